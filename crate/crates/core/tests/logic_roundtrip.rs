use respgames::logic::{parse_formula, parse_path_formula};
use respgames::model::{build_psmas, parse_model, Psmas};

fn ball() -> Psmas {
    let path = format!("{}/../../fixtures/ball.game", env!("CARGO_MANIFEST_DIR"));
    build_psmas(parse_model(&std::fs::read_to_string(path).unwrap()).unwrap()).unwrap()
}

const CORPUS: &[&str] = &[
    "true",
    "false",
    "dropped",
    "!collision",
    "dropped & collision",
    "dropped | score1",
    "!(dropped & !score2)",
    "<A1,A2> P>=1 [ X true ]",
    "<A1> P>=3/4 [ X score1 ]",
    "<A2> P<0.25 [ X collision ]",
    "<> P>0 [ dropped U<=3 score1 ]",
    "<A1,A2> P<=1/2 [ F<=2 (collision | dropped) ]",
    "<A1> R>=2 [ F<=2 collision @ A1 ]",
    "<A2> R<10 [ F<=1 (score1 | score2) @ A2 ]",
    "<A1,A2> D>=1 [ CAR(A1, pi_skip, X (dropped | score2)) ]",
    "<A1,A2> D<1/3 [ CPR(A2, pi_catch, X collision) ]",
    "<A1> D>0 [ CAR(A1, pi9, F<=2 (collision | dropped)) ]",
    "<A1,A2> P>=1/2 [ X (<A1> P>=1/2 [ X score1 ]) ]",
    "!(<A1> P>0 [ X collision ]) & score2",
    "<A2,A1> P>0.5 [ !dropped U<=2 collision ]",
    "(dropped | collision) & !(score1 | score2)",
    "<A1,A2> R<=4 [ F<=2 !dropped @ A1 ]",
];

#[test]
fn formulas_survive_printing_and_parsing() {
    let m = ball();
    for text in CORPUS {
        let f = parse_formula(text, &m).unwrap_or_else(|e| panic!("{text}: {e}"));
        let printed = f.to_string();
        let again = parse_formula(&printed, &m).unwrap_or_else(|e| panic!("{printed}: {e}"));
        assert_eq!(f, again, "{text} printed as {printed}");
        assert_eq!(printed, again.to_string());
    }
}

#[test]
fn path_formulas_round_trip() {
    let m = ball();
    for text in ["X collision", "F<=3 score1", "dropped U<=1 !score2", "true U<=0 false"] {
        let p = parse_path_formula(text, &m).unwrap();
        assert_eq!(parse_path_formula(&p.to_string(), &m).unwrap(), p);
    }
}

#[test]
fn coalitions_are_normalized() {
    let m = ball();
    let a = parse_formula("<A2,A1,A2> P>0 [ X collision ]", &m).unwrap();
    let b = parse_formula("<A1,A2> P>0 [ X collision ]", &m).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rejects_bad_input() {
    let m = ball();
    for text in [
        "<A3> P>0 [ X collision ]",
        "<A1> P>2 [ X collision ]",
        "nowhere",
        "<A1> D>0 [ CAR(A2, pi_skip, X collision) ]",
        "<A1,A2> D>0 [ CAR(A1, missing, X collision) ]",
        "<A1> P>0 [ X collision",
        "<A1> P>0 [ collision U score1 ]",
    ] {
        assert!(parse_formula(text, &m).is_err(), "{text} should be rejected");
    }
}
