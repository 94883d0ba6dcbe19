use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::model::{check_hypothesis, Hyperstate, Hypothesis, ModelSpec, State, StateType, Step, Trace};

/// Probabilities of corrupting each emitted observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    pub p_missing: f64,
    pub p_inconsistent: f64,
}

impl Noise {
    pub const NONE: Noise = Noise { p_missing: 0.0, p_inconsistent: 0.0 };

    pub fn validate(&self) -> Result<(), EvalError> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if ok(self.p_missing) && ok(self.p_inconsistent) {
            Ok(())
        } else {
            Err(EvalError::InvalidArgument("noise probabilities must lie in [0, 1]".into()))
        }
    }
}

impl Default for Noise {
    fn default() -> Self {
        Self { p_missing: 0.1, p_inconsistent: 0.05 }
    }
}

/// How observation symbols are handed out to states.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsAssignment {
    /// Any symbol of the vocabulary.
    Uniform,
    /// Avoid symbols already carried by a neighbouring state when enough
    /// others remain, so consecutive states of a walk rarely share one.
    #[default]
    Separated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub min_out_degree: usize,
    pub max_out_degree: usize,
    pub min_observations: usize,
    pub max_observations: usize,
    pub assignment: ObsAssignment,
}

impl Default for ModelShape {
    fn default() -> Self {
        Self {
            min_out_degree: 1,
            max_out_degree: 3,
            min_observations: 1,
            max_observations: 3,
            assignment: ObsAssignment::default(),
        }
    }
}

pub fn generate_random_model(n_states: usize, bad_fraction: f64, seed: u64) -> Result<ModelSpec, EvalError> {
    generate_random_model_with(n_states, bad_fraction, seed, ModelShape::default())
}

/// Random lifecycle model over states `s0..`, observations `o0..` (one
/// symbol per state in the vocabulary) and start `s0`.
///
/// Each state samples its out-degree first. A random spanning tree rooted at
/// `s0`, whose parents are drawn among states with spare degree, keeps every
/// state reachable; more edges are added until each state has its degree. There are no
/// self-loops and no multi-member hyperstates.
pub fn generate_random_model_with(
    n_states: usize,
    bad_fraction: f64,
    seed: u64,
    shape: ModelShape,
) -> Result<ModelSpec, EvalError> {
    if n_states < 2 {
        return Err(EvalError::InvalidArgument("a random model needs at least 2 states".into()));
    }
    if !(0.0..=1.0).contains(&bad_fraction) {
        return Err(EvalError::InvalidArgument("bad_fraction must lie in [0, 1]".into()));
    }
    if shape.min_out_degree == 0
        || shape.min_out_degree > shape.max_out_degree
        || shape.min_observations == 0
        || shape.min_observations > shape.max_observations
    {
        return Err(EvalError::InvalidArgument("invalid model shape".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_states;
    let n_bad = ((bad_fraction * n as f64) + 1e-9).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut is_bad = vec![false; n];
    for &i in &order[..n_bad.min(n)] {
        is_bad[i] = true;
    }

    let want: Vec<usize> =
        (0..n).map(|_| rng.gen_range(shape.min_out_degree..=shape.max_out_degree).min(n - 1)).collect();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 1..n {
        // Earlier states always have spare out-degree: they want at least
        // i edges in total and hold i - 1 so far.
        let open: Vec<usize> = (0..i).filter(|&p| succ[p].len() < want[p]).collect();
        let parent = open[rng.gen_range(0..open.len())];
        succ[parent].push(i);
    }
    for (i, out) in succ.iter_mut().enumerate() {
        while out.len() < want[i] {
            let t = rng.gen_range(0..n);
            if t != i && !out.contains(&t) {
                out.push(t);
            }
        }
        out.sort_unstable();
    }
    let vocab = n;
    let mut neighbours: Vec<Vec<usize>> = succ.clone();
    for (i, out) in succ.iter().enumerate() {
        for &t in out {
            neighbours[t].push(i);
        }
    }
    let mut symbols: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let k = rng.gen_range(shape.min_observations..=shape.max_observations).min(vocab);
        let mut pool: Vec<usize> = (0..vocab).collect();
        if shape.assignment == ObsAssignment::Separated {
            let taken: Vec<usize> = neighbours[i].iter().flat_map(|&j| symbols[j].iter().copied()).collect();
            let free: Vec<usize> = pool.iter().copied().filter(|o| !taken.contains(o)).collect();
            if free.len() >= k {
                pool = free;
            }
        }
        let mut obs: Vec<usize> = rand::seq::index::sample(&mut rng, pool.len(), k).into_iter().map(|j| pool[j]).collect();
        obs.sort_unstable();
        symbols[i] = obs;
    }
    let mut hyperstates = Vec::with_capacity(n);
    for i in 0..n {
        let ty = if is_bad[i] { StateType::Bad } else { StateType::Good };
        let mut state = State::new(format!("s{i}"), ty)
            .with_observations(symbols[i].iter().map(|o| format!("o{o}")))
            .with_transitions(succ[i].iter().map(|t| format!("s{t}")));
        state.type_annotated = is_bad[i];
        hyperstates.push(Hyperstate::singleton(state));
    }
    Ok(ModelSpec {
        name: format!("random-{n}-{seed}"),
        default_type: StateType::Good,
        hyperstates,
        start: "s0".into(),
        start_span: Default::default(),
    })
}

/// What happened to one emitted observation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseEvent {
    Kept,
    Dropped,
    Replaced { symbol: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub trace: Trace,
    pub truth: Hypothesis,
    /// The visited states, start first.
    pub walk: Vec<String>,
    /// One event per visited state.
    pub noise: Vec<NoiseEvent>,
    /// True when the walk stopped early at a state without successors.
    pub truncated: bool,
}

impl GroundTruth {
    /// Whether some hypothesis can have the ground truth's state sequence.
    /// Walks whose final observations were dropped never can, because
    /// hypotheses do not end in unobserved steps.
    pub fn truth_is_valid(&self, model: &ModelSpec) -> bool {
        check_hypothesis(model, &self.trace, &self.truth, model.state_count()).is_ok()
    }
}

/// Applies the noise process for `len` emitted observations.
///
/// The process uses its own generator, `ChaCha8Rng::seed_from_u64(seed)`
/// on stream 1, and draws per position: one `f64` compared against
/// `p_missing`; if kept, one `f64` compared against `p_inconsistent`; if
/// replaced, one `gen_range(0..vocab.len())` picking the new symbol.
pub fn noise_events(len: usize, noise: Noise, vocab: &[String], seed: u64) -> Vec<NoiseEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    (0..len)
        .map(|_| {
            if rng.gen::<f64>() < noise.p_missing {
                NoiseEvent::Dropped
            } else if rng.gen::<f64>() < noise.p_inconsistent && !vocab.is_empty() {
                NoiseEvent::Replaced { symbol: vocab[rng.gen_range(0..vocab.len())].clone() }
            } else {
                NoiseEvent::Kept
            }
        })
        .collect()
}

/// Random walk of `walk_length` states from the start, one observation per
/// visited state (none for states without observations), corrupted by
/// [`noise_events`].
///
/// The ground-truth hypothesis explains every kept observation in the state
/// that emitted it. Dropped and replaced observations leave their state
/// unobserved; a replaced observation is discarded right after the latest
/// state that explained something, since a discard may not follow an
/// unobserved step.
pub fn generate_ground_truth(model: &ModelSpec, walk_length: usize, noise: Noise, seed: u64) -> Result<GroundTruth, EvalError> {
    if walk_length == 0 {
        return Err(EvalError::InvalidArgument("walk_length must be at least 1".into()));
    }
    noise.validate()?;
    let start = model.start_states();
    let Some(first) = start.first() else {
        return Err(EvalError::InvalidArgument("model has no start state".into()));
    };
    let graph = model.graph();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);

    let mut walk: Vec<usize> = vec![graph.state_index(first).expect("start is a state")];
    let mut truncated = false;
    while walk.len() < walk_length {
        let cur = *walk.last().unwrap();
        let succ: Vec<usize> = model
            .state(&graph.locations[cur].id)
            .map(|s| s.transitions.iter().filter_map(|t| graph.state_index(&t.target)).collect())
            .unwrap_or_default();
        if succ.is_empty() {
            truncated = true;
            break;
        }
        walk.push(succ[rng.gen_range(0..succ.len())]);
    }
    let emitted: Vec<Option<String>> = walk
        .iter()
        .map(|&s| {
            let obs: Vec<&String> = graph.observations(s).iter().collect();
            (!obs.is_empty()).then(|| obs[rng.gen_range(0..obs.len())].clone())
        })
        .collect();

    let vocab: Vec<String> = model.observation_vocab().into_iter().collect();
    let events = noise_events(walk.len(), noise, &vocab, seed);
    let mut symbols = Vec::new();
    let mut steps: Vec<Step> = Vec::new();
    let mut anchor = 0usize;
    for (pos, (&s, event)) in walk.iter().zip(&events).enumerate() {
        let id = graph.locations[s].id.clone();
        match (event, &emitted[pos]) {
            (_, None) | (NoiseEvent::Dropped, _) => steps.push(Step::enter(id, vec![])),
            (NoiseEvent::Kept, Some(symbol)) => {
                anchor = steps.len();
                steps.push(Step::enter(id, vec![symbols.len()]));
                symbols.push(symbol.clone());
            }
            (NoiseEvent::Replaced { symbol }, Some(_)) => {
                steps.push(Step::enter(id, vec![]));
                steps.insert(anchor + 1, Step::Discard { index: symbols.len() });
                anchor += 1;
                symbols.push(symbol.clone());
            }
        }
    }
    Ok(GroundTruth {
        trace: Trace::from_symbols(symbols),
        truth: Hypothesis::new(steps),
        walk: walk.iter().map(|&s| graph.locations[s].id.clone()).collect(),
        noise: events,
        truncated,
    })
}
