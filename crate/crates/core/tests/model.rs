mod common;

use std::cmp::Ordering;

use common::{random_instance, random_plan};
use hypforge_core::compile::compile;
use hypforge_core::corpus;
use hypforge_core::lts::parse;
use hypforge_core::model::{
    check_hypothesis, compare_plausibility, cost_of, validate_model, CostParams, Hypothesis, ModelSpec, StateType,
    Step, Trace,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A valid hypothesis for a random instance, via a random plan.
fn sample(seed: u64) -> Option<(ModelSpec, Trace, Hypothesis, usize)> {
    let (m, trace) = random_instance(seed, 8, 5);
    let p = compile(&m, &trace, &CostParams::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plan = random_plan(&p, &mut rng)?;
    Some((m, trace, p.hypothesis_for(&plan), p.chain_cap))
}

#[test]
fn crawler_is_cheaper_than_infection_chain() {
    let m = corpus::malware();
    let params = CostParams::default();
    let crawler = Hypothesis::new(vec![Step::enter("start", vec![]), Step::enter("crawling", vec![0, 1])]);
    let infection = Hypothesis::new(vec![
        Step::enter("start", vec![]),
        Step::enter("infection_download", vec![0]),
        Step::enter("CC", vec![]),
        Step::enter("CC_IRC", vec![]),
        Step::enter("click_fraud", vec![1]),
    ]);
    let trace = Trace::from_symbols(["blacklisted_download", "adserver_increase"]);
    check_hypothesis(&m, &trace, &crawler, 18).unwrap();
    check_hypothesis(&m, &trace, &infection, 18).unwrap();
    // good start 1, good crawling 1
    assert_eq!(cost_of(&m, &crawler, &params).unwrap(), 2);
    // 1 + bad 10 + two unobserved bad entries (10 + 5 each) + bad 10
    assert_eq!(cost_of(&m, &infection, &params).unwrap(), 51);
    assert_eq!(compare_plausibility(&m, &crawler, &infection, &params).unwrap(), Ordering::Less);
}

#[test]
fn cost_examples() {
    let m = parse("default <good>\nA {x} -> B\nB {y}\nstart: A").unwrap();
    let params = CostParams::default();
    assert_eq!(cost_of(&m, &Hypothesis::new(vec![Step::enter("A", vec![])]), &params).unwrap(), 1);
    let h = Hypothesis::new(vec![Step::enter("A", vec![0]), Step::Discard { index: 1 }]);
    assert_eq!(cost_of(&m, &h, &params).unwrap(), 101);
    let bogus = Hypothesis::new(vec![Step::enter("Nope", vec![])]);
    assert!(cost_of(&m, &bogus, &params).is_err());
}

#[test]
fn validation_examples() {
    assert!(validate_model(&corpus::malware()).is_empty());
    let mut m = corpus::malware();
    m.start = "ghost".into();
    let d = validate_model(&m);
    assert_eq!(d.len(), 1);
    assert!(d[0].message.contains("unknown start state"));

    let mut m = corpus::malware();
    m.hyperstates[0].members[0].transitions[0].target = "X".into();
    let d = validate_model(&m);
    assert!(d.iter().any(|d| d.is_error() && d.message.contains("`X`")));
}

#[test]
fn icu_four_hypotheses_compare_by_cost() {
    let m = corpus::icu();
    let params = CostParams::default();
    let h = |tail: Option<&str>| {
        let mut steps = vec![Step::enter("Unadmitted", vec![])];
        match tail {
            None => steps.push(Step::enter("Highrisk", vec![0, 1])),
            Some(s) => {
                steps.push(Step::enter("Highrisk", vec![0]));
                steps.push(Step::enter(s, vec![1]));
            }
        }
        Hypothesis::new(steps)
    };
    let highrisk = h(None);
    let no_lead = h(Some("PatientNoLead"));
    let infarction = h(Some("Infarction"));
    let dci = h(Some("DCI"));
    let cmp = |a, b| compare_plausibility(&m, a, b, &params).unwrap();
    assert_eq!(cmp(&highrisk, &no_lead), Ordering::Less);
    assert_eq!(cmp(&no_lead, &infarction), Ordering::Less);
    assert_eq!(cmp(&infarction, &dci), Ordering::Equal);
}

#[test]
fn mismatched_coverage_is_rejected() {
    let m = corpus::icu();
    let a = Hypothesis::new(vec![Step::enter("Unadmitted", vec![])]);
    let b = Hypothesis::new(vec![Step::enter("Unadmitted", vec![]), Step::Discard { index: 0 }]);
    assert!(compare_plausibility(&m, &a, &b, &CostParams::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn inserting_a_discard_adds_its_cost(seed in 0u64..5000, pos in any::<prop::sample::Index>()) {
        let Some((m, trace, h, _)) = sample(seed) else { return Ok(()) };
        let params = CostParams::default();
        let before = cost_of(&m, &h, &params).unwrap();
        let mut steps = h.steps.clone();
        let at = 1 + pos.index(steps.len());
        steps.insert(at, Step::Discard { index: trace.len() });
        let after = cost_of(&m, &Hypothesis::new(steps), &params).unwrap();
        prop_assert_eq!(after, before + params.discard_cost);
    }

    #[test]
    fn turning_a_good_state_bad_raises_cost(seed in 0u64..5000) {
        let Some((m, _, h, _)) = sample(seed) else { return Ok(()) };
        let params = CostParams::default();
        let visited: Vec<String> = h.state_sequence().into_iter().map(String::from).collect();
        let Some(target) = visited.iter().find(|s| m.state(s).is_some_and(|s| s.state_type == StateType::Good)) else {
            return Ok(());
        };
        let mut worse = m.clone();
        for hs in &mut worse.hyperstates {
            for s in &mut hs.members {
                if &s.id == target {
                    s.state_type = StateType::Bad;
                }
            }
        }
        let visits = visited.iter().filter(|s| *s == target).count() as u64;
        let (a, b) = (cost_of(&m, &h, &params).unwrap(), cost_of(&worse, &h, &params).unwrap());
        prop_assert!(b > a);
        prop_assert_eq!(b - a, visits * (params.bad_entry_cost - params.good_entry_cost));
    }

    #[test]
    fn plausibility_is_a_total_preorder(seed in 0u64..3000) {
        let (m, trace) = random_instance(seed, 8, 4);
        let p = compile(&m, &trace, &CostParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hs: Vec<Hypothesis> = (0..3).filter_map(|_| random_plan(&p, &mut rng)).map(|pl| p.hypothesis_for(&pl)).collect();
        let params = CostParams::default();
        let cmp = |a: &Hypothesis, b: &Hypothesis| compare_plausibility(&m, a, b, &params).unwrap();
        for a in &hs {
            prop_assert_eq!(cmp(a, a), Ordering::Equal);
            for b in &hs {
                prop_assert_eq!(cmp(a, b), cmp(b, a).reverse());
                prop_assert_eq!(cmp(a, b), a.total_cost.cmp(&b.total_cost));
                for c in &hs {
                    if cmp(a, b) != Ordering::Greater && cmp(b, c) != Ordering::Greater {
                        prop_assert_ne!(cmp(a, c), Ordering::Greater);
                    }
                }
            }
        }
    }

    #[test]
    fn coverage_must_be_exact(seed in 0u64..5000, pick in any::<prop::sample::Index>(), dup in any::<bool>()) {
        let Some((m, trace, h, cap)) = sample(seed) else { return Ok(()) };
        check_hypothesis(&m, &trace, &h, cap).unwrap();
        if trace.is_empty() {
            return Ok(());
        }
        let index = pick.index(trace.len());
        let mut steps = h.steps.clone();
        if dup {
            steps.push(Step::Discard { index });
        } else {
            for s in &mut steps {
                if let Step::EnterState { explained, .. } = s {
                    explained.retain(|&i| i != index);
                }
            }
            steps.retain(|s| *s != Step::Discard { index });
        }
        prop_assert!(check_hypothesis(&m, &trace, &Hypothesis::new(steps), cap).is_err());
    }
}

#[test]
fn random_hypotheses_cover_every_index_once() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let Some((_, trace, h, _)) = sample(rng.gen()) else { continue };
        assert_eq!(h.covered_indices(), (0..trace.len()).collect::<Vec<_>>());
    }
}
