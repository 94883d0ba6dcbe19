mod common;

use std::collections::HashSet;
use std::path::PathBuf;

use common::{random_instance, random_plan};
use hypforge_core::compile::{
    compile, compile_with, decode, export_pddl, read_pddl, ActionKind, CompileError, CompileOptions, Fluent,
    PlanningProblem, ProblemLocation,
};
use hypforge_core::corpus;
use hypforge_core::eval::{generate_ground_truth, generate_random_model, Noise};
use hypforge_core::lts::parse;
use hypforge_core::model::{check_hypothesis, cost_of, CostParams, Hypothesis, Step, Trace};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn malware_two_obs() -> PlanningProblem {
    let trace = Trace::from_symbols(["blacklisted_download", "adserver_increase"]);
    compile(&corpus::malware(), &trace, &CostParams::default()).unwrap()
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

#[test]
fn malware_two_observation_counts() {
    let p = malware_two_obs();
    let m = corpus::malware();
    assert_eq!(m.state_count(), 18);
    // init sentinel, 18 states, 3 hyperstate placeholders
    let hypers = p.locations.iter().filter(|l| matches!(l, ProblemLocation::Hyper { .. })).count();
    assert_eq!(p.locations.len(), 1 + 18 + 3);
    assert_eq!(hypers, 3);
    // locations + pending(0..2) + done + chain(0..=18) + anchored, open, started
    assert_eq!(p.fluents.len(), 22 + 2 + 1 + 19 + 3);
    assert_eq!(p.fluents.len(), 47);
    assert_eq!(p.count_actions(|k| matches!(k, ActionKind::Discard { .. })), 2);
    assert_eq!(p.count_actions(|k| matches!(k, ActionKind::Begin { .. })), 1);
    assert_eq!(p.chain_cap, 18);
    assert_eq!(p.goal.len(), 2);
    assert!(p.goal.iter().all(|&f| matches!(p.fluents[f], Fluent::Done | Fluent::Started)));
}

#[test]
fn explain_actions_follow_observation_sets() {
    let p = malware_two_obs();
    // blacklisted_download: crawling and infection_download
    let mut explainers: Vec<&str> = p
        .actions
        .iter()
        .filter_map(|a| match &a.kind {
            ActionKind::Explain { state, index: 0, .. } | ActionKind::ExplainInPlace { state, index: 0 } => {
                Some(state.as_str())
            }
            _ => None,
        })
        .collect();
    explainers.sort();
    explainers.dedup();
    assert_eq!(explainers, vec!["crawling", "infection_download"]);
    for a in &p.actions {
        let want = match &a.kind {
            ActionKind::Discard { .. } => 100,
            ActionKind::ExplainInPlace { .. } => 0,
            ActionKind::Explain { state, .. } | ActionKind::Begin { state } => {
                if ["start", "crawling"].contains(&state.as_str()) {
                    1
                } else {
                    10
                }
            }
            ActionKind::UnobservedStep { to, .. } => {
                if ["start", "crawling"].contains(&to.as_str()) {
                    6
                } else {
                    15
                }
            }
            ActionKind::EnterHyper { .. } => 5,
        };
        assert_eq!(a.cost, want, "{:?}", a.kind);
    }
}

#[test]
fn icu_hrvl_is_explained_by_four_states() {
    let trace = Trace::from_symbols(["HH3", "HRVL"]);
    let p = compile(&corpus::icu(), &trace, &CostParams::default()).unwrap();
    let mut states: Vec<&str> = p
        .actions
        .iter()
        .filter_map(|a| match &a.kind {
            ActionKind::Explain { state, index: 1, .. } => Some(state.as_str()),
            _ => None,
        })
        .collect();
    states.sort();
    states.dedup();
    assert_eq!(states, vec!["DCI", "Highrisk", "Infarction", "PatientNoLead"]);
}

#[test]
fn empty_trace_goal_follows_start_entry() {
    let p = compile(&corpus::malware(), &Trace::default(), &CostParams::default()).unwrap();
    assert_eq!(p.count_actions(|k| matches!(k, ActionKind::Discard { .. })), 0);
    assert_eq!(p.count_actions(|k| matches!(k, ActionKind::UnobservedStep { .. })), 0);
    let begin = p.actions.iter().position(|a| matches!(a.kind, ActionKind::Begin { .. })).unwrap();
    assert!(p.is_valid_plan(&[begin]));
    assert!(!p.is_valid_plan(&[]));
    let files = export_pddl(&p);
    assert!(!files.domain.contains("(:action discard-"));
}

#[test]
fn unknown_observation_is_a_compile_error() {
    let trace = Trace::from_symbols(["blacklisted_download", "telnet_flood"]);
    let err = compile(&corpus::malware(), &trace, &CostParams::default()).unwrap_err();
    assert_eq!(err, CompileError::UnknownObservation { symbol: "telnet_flood".into(), position: 1 });
    assert!(err.to_string().contains("telnet_flood"));
}

#[test]
fn invalid_params_are_rejected() {
    let params = CostParams { discard_cost: 5, ..CostParams::default() };
    assert!(matches!(compile(&corpus::malware(), &Trace::default(), &params), Err(CompileError::Params(_))));
}

#[test]
fn golden_pddl_for_two_observations() {
    let files = export_pddl(&malware_two_obs());
    let (dom, prob) = (golden("malware-2obs-domain.pddl"), golden("malware-2obs-problem.pddl"));
    if std::env::var_os("HYPFORGE_BLESS").is_some() {
        std::fs::create_dir_all(dom.parent().unwrap()).unwrap();
        std::fs::write(&dom, &files.domain).unwrap();
        std::fs::write(&prob, &files.problem).unwrap();
    }
    assert_eq!(files.domain, std::fs::read_to_string(dom).unwrap());
    assert_eq!(files.problem, std::fs::read_to_string(prob).unwrap());
    assert!(files.domain.contains(":action-costs"));
    assert!(files.problem.contains("(:metric minimize (total-cost))"));
    // two ordered observation slots
    assert!(files.problem.contains("(follows o0 o1)"));
}

#[test]
fn tampered_cost_is_detected() {
    let p = malware_two_obs();
    let files = export_pddl(&p);
    let needle = "(increase (total-cost) 100)";
    assert!(files.domain.contains(needle));
    let tampered = files.domain.replacen(needle, "(increase (total-cost) 99)", 1);
    let q = read_pddl(&tampered, &files.problem).unwrap();
    assert_ne!(q, p);
    assert_eq!(read_pddl(&files.domain, &files.problem).unwrap(), p);
}

#[test]
fn singleton_model_round_trips() {
    let m = parse("default <good>\nS {obs1}\nstart: S").unwrap();
    let p = compile(&m, &Trace::from_symbols(["obs1", "obs1"]), &CostParams::default()).unwrap();
    let files = export_pddl(&p);
    assert_eq!(read_pddl(&files.domain, &files.problem).unwrap(), p);
}

#[test]
fn unobserved_chain_decodes_to_empty_explanations() {
    let m = corpus::malware();
    let trace = Trace::from_symbols(["blacklisted_download", "p2p_increase", "adserver_increase"]);
    let p = compile(&m, &trace, &CostParams::default()).unwrap();
    let h = Hypothesis::new(vec![
        Step::enter("start", vec![]),
        Step::enter("infection_download", vec![0]),
        Step::enter("CC", vec![]),
        Step::enter("cc_p2p", vec![1]),
        Step::enter("click_fraud", vec![2]),
    ]);
    let plan = p.encode(&h).expect("valid hypothesis has a plan");
    let actions: Vec<_> = plan.iter().map(|&a| p.actions[a].clone()).collect();
    let decoded = decode(&actions, &m, &trace).unwrap();
    assert_eq!(decoded.steps, h.steps);
    assert_eq!(decoded.total_cost, 1 + 10 + 15 + 10 + 10);

    let h = Hypothesis::new(vec![
        Step::enter("start", vec![]),
        Step::enter("infection_download", vec![0]),
        Step::enter("CC", vec![]),
        Step::enter("CC_Domain", vec![]),
        Step::enter("ByIP", vec![]),
        Step::EnterHyperstate { hyper: "EXPLOIT".into() },
        Step::Discard { index: 1 },
        Step::Discard { index: 2 },
    ]);
    assert!(p.encode(&h).is_none(), "a discard may not follow an unobserved step");
}

#[test]
fn decode_marks_discarded_index() {
    let m = corpus::malware();
    let trace = Trace::from_symbols(["blacklisted_download", "smtp_increase"]);
    let p = compile(&m, &trace, &CostParams::default()).unwrap();
    let h = Hypothesis::new(vec![
        Step::enter("start", vec![]),
        Step::enter("crawling", vec![0]),
        Step::Discard { index: 1 },
    ]);
    let plan = p.encode(&h).unwrap();
    let actions: Vec<_> = plan.iter().map(|&a| p.actions[a].clone()).collect();
    let decoded = decode(&actions, &m, &trace).unwrap();
    assert_eq!(decoded.steps[2], Step::Discard { index: 1 });
    assert_eq!(decoded.total_cost, 102);
}

#[test]
fn decode_rejects_out_of_order_plans() {
    let m = corpus::malware();
    let trace = Trace::from_symbols(["blacklisted_download", "smtp_increase"]);
    let p = compile(&m, &trace, &CostParams::default()).unwrap();
    let begin = p.actions.iter().position(|a| matches!(a.kind, ActionKind::Begin { .. })).unwrap();
    let d1 = p.actions.iter().position(|a| a.kind == ActionKind::Discard { index: 1 }).unwrap();
    let d0 = p.actions.iter().position(|a| a.kind == ActionKind::Discard { index: 0 }).unwrap();
    let plan: Vec<_> = [begin, d1, d0].iter().map(|&a| p.actions[a].clone()).collect();
    assert_eq!(decode(&plan, &m, &trace).unwrap_err().action_index, 1);
    assert!(!p.is_valid_plan(&[begin, d1, d0]));
    let plan: Vec<_> = [begin, d0].iter().map(|&a| p.actions[a].clone()).collect();
    assert_eq!(decode(&plan, &m, &trace).unwrap_err().action_index, 2);
}

#[test]
fn cost_soundness_over_random_plans() {
    let params = CostParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    let mut seed = 0u64;
    while checked < 1000 {
        let (m, trace) = random_instance(seed, 10, 6);
        seed += 1;
        let p = compile(&m, &trace, &params).unwrap();
        for _ in 0..10 {
            let Some(plan) = random_plan(&p, &mut rng) else { continue };
            let actions: Vec<_> = plan.iter().map(|&a| p.actions[a].clone()).collect();
            let h = decode(&actions, &m, &trace).unwrap();
            let sum: u64 = plan.iter().map(|&a| p.actions[a].cost).sum();
            assert_eq!(sum, cost_of(&m, &h, &params).unwrap());
            assert_eq!(sum, h.total_cost);
            check_hypothesis(&m, &trace, &h, p.chain_cap).unwrap();
            checked += 1;
        }
    }
}

#[test]
fn indices_are_handled_in_increasing_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..100u64 {
        let (m, trace) = random_instance(seed, 8, 6);
        let p = compile(&m, &trace, &CostParams::default()).unwrap();
        let Some(plan) = random_plan(&p, &mut rng) else { continue };
        let handled: Vec<usize> = plan
            .iter()
            .filter_map(|&a| match p.actions[a].kind {
                ActionKind::Explain { index, .. }
                | ActionKind::ExplainInPlace { index, .. }
                | ActionKind::Discard { index } => Some(index),
                _ => None,
            })
            .collect();
        assert_eq!(handled, (0..trace.len()).collect::<Vec<_>>(), "seed {seed}");
    }
}

#[test]
fn exactly_one_location_holds_along_random_plans() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for seed in 0..60u64 {
        let (m, trace) = random_instance(seed, 8, 5);
        let p = compile(&m, &trace, &CostParams::default()).unwrap();
        let Some(plan) = random_plan(&p, &mut rng) else { continue };
        let mut state: HashSet<usize> = p.initial.iter().copied().collect();
        for &a in &plan {
            for f in &p.actions[a].del {
                state.remove(f);
            }
            state.extend(p.actions[a].add.iter().copied());
            let at = state.iter().filter(|&&f| matches!(p.fluents[f], Fluent::At(_))).count();
            assert_eq!(at, 1, "seed {seed}");
        }
    }
}

#[test]
fn encode_inverts_decode_on_random_plans() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for seed in 0..150u64 {
        let (m, trace) = random_instance(seed, 8, 5);
        let p = compile(&m, &trace, &CostParams::default()).unwrap();
        let Some(plan) = random_plan(&p, &mut rng) else { continue };
        let h = p.hypothesis_for(&plan);
        assert_eq!(p.encode(&h), Some(plan), "seed {seed}");
    }
}

#[test]
fn ground_truth_hypotheses_have_plans() {
    // Valid hypotheses from an independent source: noise-free random walks.
    for seed in 0..100u64 {
        let n = 3 + (seed as usize % 8);
        let m = generate_random_model(n, 0.6, seed).unwrap();
        let gt = generate_ground_truth(&m, 1 + seed as usize % 7, Noise::NONE, seed).unwrap();
        let p = compile(&m, &gt.trace, &CostParams::default()).unwrap();
        let Some(plan) = p.encode(&gt.truth) else {
            // Trailing unobserved states have no plan.
            assert!(!gt.truth_is_valid(&m), "seed {seed}");
            continue;
        };
        let actions: Vec<_> = plan.iter().map(|&a| p.actions[a].clone()).collect();
        assert_eq!(decode(&actions, &m, &gt.trace).unwrap().steps, gt.truth.steps, "seed {seed}");
    }
}

#[test]
fn compile_is_bit_stable() {
    for seed in 0..20u64 {
        let (m, trace) = random_instance(seed, 10, 6);
        let a = compile(&m, &trace, &CostParams::default()).unwrap();
        let b = compile(&m.clone(), &trace.clone(), &CostParams::default()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn chain_cap_is_configurable() {
    let trace = Trace::from_symbols(["blacklisted_download", "adserver_increase"]);
    let p = compile_with(&corpus::malware(), &trace, &CostParams::default(), CompileOptions { chain_cap: Some(2) })
        .unwrap();
    assert_eq!(p.chain_cap, 2);
    assert_eq!(p.fluents.iter().filter(|f| matches!(f, Fluent::Chain(_))).count(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn pddl_round_trip(seed in any::<u64>(), states in 2usize..=10, obs in 0usize..=6, cap in prop::option::of(1usize..5)) {
        let m = generate_random_model(states, 0.6, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocab: Vec<String> = m.observation_vocab().into_iter().collect();
        let trace = Trace::from_symbols((0..obs).map(|_| vocab[rng.gen_range(0..vocab.len())].clone()));
        let p = compile_with(&m, &trace, &CostParams::default(), CompileOptions { chain_cap: cap }).unwrap();
        let files = export_pddl(&p);
        prop_assert_eq!(read_pddl(&files.domain, &files.problem).unwrap(), p);
    }
}
