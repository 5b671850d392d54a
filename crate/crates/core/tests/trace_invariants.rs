use respgames::model::{build_psmas, parse_model, Psmas};
use respgames::polyarith::Polynomial;
use respgames::trace::{are_compatible, compatible_plans, enumerate_histories, plan_histories, plans_matching};

fn fixture(name: &str) -> Psmas {
    let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    build_psmas(parse_model(&std::fs::read_to_string(path).unwrap()).unwrap()).unwrap()
}

#[test]
fn history_probabilities_sum_to_one() {
    for name in ["ball.game", "courier.game", "pennies.game"] {
        let m = fixture(name);
        for s in 0..m.csg().states().len() {
            for depth in 1..=3 {
                let total: Polynomial = enumerate_histories(&m, s, depth)
                    .unwrap()
                    .into_iter()
                    .map(|h| h.prob)
                    .sum();
                assert!(total.is_one(), "{name} state {s} depth {depth}: {total}");
            }
        }
    }
}

#[test]
fn plan_histories_are_enumerated_histories() {
    for name in ["ball.game", "courier.game"] {
        let m = fixture(name);
        for plan in m.csg().plans().values() {
            let all = enumerate_histories(&m, plan.start, plan.steps.len()).unwrap();
            for h in plan_histories(&m, plan) {
                let found = all.iter().find(|g| g.key() == h.key()).expect("history enumerated");
                assert_eq!(found.prob, h.prob);
            }
        }
    }
}

#[test]
fn compatibility_is_an_equivalence() {
    let m = fixture("ball.game");
    let plans = plans_matching(&m, 0, 2, |_, _| None, usize::MAX).unwrap();
    for coalition in [vec![], vec![0], vec![1], vec![0, 1]] {
        for a in &plans {
            assert!(are_compatible(a, a, &coalition));
            for b in &plans {
                assert_eq!(are_compatible(a, b, &coalition), are_compatible(b, a, &coalition));
                if !are_compatible(a, b, &coalition) {
                    continue;
                }
                for c in &plans {
                    if are_compatible(b, c, &coalition) {
                        assert!(are_compatible(a, c, &coalition));
                    }
                }
            }
            let class = compatible_plans(&m, a, &coalition).unwrap();
            let expected = plans.iter().filter(|b| are_compatible(a, b, &coalition)).count();
            assert_eq!(class.members.len(), expected);
        }
    }
}
