use screenlab::expr::{parse, ParseError, Var};

#[test]
fn evaluates_with_precedence() {
    let e = parse("-x1^2 + 3*y1*y2 - 1/2", 1, 2).unwrap();
    let v = e.eval(Some(&[2.0]), Some(&[1.0, 4.0])).unwrap();
    assert_eq!(v, -4.0 + 12.0 - 0.5);
}

#[test]
fn functions_and_constants() {
    let e = parse("exp(log(x1)) + sqrt(y1) + sin(0)", 1, 1).unwrap();
    let v = e.eval(Some(&[3.0]), Some(&[9.0])).unwrap();
    assert!((v - 6.0).abs() < 1e-12);
}

#[test]
fn errors_carry_offsets() {
    match parse("x1 + x3", 2, 1) {
        Err(e @ ParseError::OutOfRange { .. }) => assert_eq!(e.offset(), 5),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse("x1 + z", 1, 1), Err(ParseError::UnknownIdentifier { .. })));
    assert!(matches!(parse("(x1", 1, 1), Err(ParseError::Syntax { .. })));
}

#[test]
fn mixed_partials_match_hand_derivatives() {
    let e = parse("x1*y1 + 0.1*x1^2*y1^2", 1, 1).unwrap();
    let d = e.partial(&[Var::X(0), Var::Y(0)]).simplify();
    // d2/dx dy = 1 + 0.4 x y
    let v = d.eval(Some(&[2.0]), Some(&[3.0])).unwrap();
    assert!((v - 3.4).abs() < 1e-12);
}

#[test]
fn dependence_queries() {
    assert!(parse("y1^2 + 1", 1, 1).unwrap().depends_only_on_goods());
    assert!(!parse("x1*y1", 1, 1).unwrap().depends_only_on_goods());
    assert!(parse("2", 1, 1).unwrap().is_const());
}
