//! Search experiments on a marked node.
//!
//! A trace records, per step, the probability of finding the walker on the
//! marked node (`p_marked`), the mass on last-generation nodes
//! (`p_subspace`) and their ratio (`p_conditional`), the success probability
//! after post-selecting on the last-generation subspace. Both channels are
//! always kept; [`Channel`] selects which one a peak refers to.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::scalar::Real;
use crate::walk::{apply_shift, initial_state, ArcSpace, CoinSpec, WalkState, Walker};
use crate::DEFAULT_SEED;

pub const MAX_STEPS: usize = 1_000_000;

/// Below this mass a subspace probability counts as zero.
pub const PROBABILITY_FLOOR: f64 = 1e-15;

/// Values within this distance of a maximum count as ties.
pub const PEAK_TIE_TOLERANCE: f64 = 1e-9;

/// Which arcs carry amplitude in the starting state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSet {
    /// Every arc of the network.
    Full,
    /// Arcs leaving last-generation nodes.
    LastGeneration,
}

impl InitSet {
    pub fn nodes(self, arcs: &ArcSpace) -> Vec<NodeId> {
        match self {
            InitSet::Full => arcs.graph().nodes().collect(),
            InitSet::LastGeneration => arcs.last_generation_nodes(),
        }
    }

    pub fn state<T: Real>(self, arcs: &ArcSpace) -> Result<WalkState<T>> {
        initial_state(arcs, &self.nodes(arcs))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// Unconditioned probability of the marked node.
    Raw,
    /// Probability of the marked node given the last-generation projection succeeded.
    Conditional,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchConfig {
    pub marked: NodeId,
    pub init: InitSet,
    pub steps: usize,
    pub record_every: usize,
}

impl SearchConfig {
    pub fn new(marked: NodeId, init: InitSet, steps: usize) -> Self {
        SearchConfig {
            marked,
            init,
            steps,
            record_every: 1,
        }
    }

    pub fn record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    fn validate(&self, arcs: &ArcSpace) -> Result<()> {
        if !arcs.graph().contains(self.marked) {
            return Err(Error::param(format!(
                "marked node {} out of range 0..{}",
                self.marked,
                arcs.node_count()
            )));
        }
        if self.steps > MAX_STEPS {
            return Err(Error::Capacity(format!(
                "{} steps requested, cap is {MAX_STEPS}",
                self.steps
            )));
        }
        if self.record_every == 0 {
            return Err(Error::param("record_every must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow<T> {
    pub step: usize,
    pub p_marked: T,
    pub p_subspace: T,
    pub p_conditional: Option<T>,
}

impl<T: Real> TraceRow<T> {
    fn new(step: usize, p_marked: T, p_subspace: T) -> Self {
        let p_conditional =
            (p_subspace.as_f64() > PROBABILITY_FLOOR).then(|| p_marked / p_subspace);
        TraceRow {
            step,
            p_marked,
            p_subspace,
            p_conditional,
        }
    }

    pub fn channel(&self, channel: Channel) -> Option<T> {
        match channel {
            Channel::Raw => Some(self.p_marked),
            Channel::Conditional => self.p_conditional,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProbabilityTrace<T> {
    rows: Vec<TraceRow<T>>,
}

impl<T: Real> ProbabilityTrace<T> {
    pub fn from_rows(rows: Vec<TraceRow<T>>) -> Self {
        ProbabilityTrace { rows }
    }

    /// Trace from raw `(p_marked, p_subspace)` pairs at steps `0, 1, 2, ...`.
    pub fn from_pairs(pairs: &[(T, T)]) -> Self {
        ProbabilityTrace {
            rows: pairs
                .iter()
                .enumerate()
                .map(|(t, &(m, s))| TraceRow::new(t, m, s))
                .collect(),
        }
    }

    pub fn rows(&self) -> &[TraceRow<T>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn values(&self, channel: Channel) -> Vec<Option<T>> {
        self.rows.iter().map(|r| r.channel(channel)).collect()
    }

    /// Pointwise mean. The conditional channel of the mean is defined only
    /// where it is defined for every input.
    pub fn mean<'a>(traces: impl IntoIterator<Item = &'a Self>) -> Option<Self> {
        let mut it = traces.into_iter();
        let first = it.next()?;
        let mut acc: Vec<(T, T, Option<T>)> = first
            .rows
            .iter()
            .map(|r| (r.p_marked, r.p_subspace, r.p_conditional))
            .collect();
        let mut count = 1usize;
        for t in it {
            assert_eq!(t.rows.len(), acc.len(), "traces of unequal length");
            for (a, r) in acc.iter_mut().zip(&t.rows) {
                a.0 = a.0 + r.p_marked;
                a.1 = a.1 + r.p_subspace;
                a.2 = match (a.2, r.p_conditional) {
                    (Some(x), Some(y)) => Some(x + y),
                    _ => None,
                };
            }
            count += 1;
        }
        let n = <T as Real>::from_usize(count);
        Some(ProbabilityTrace {
            rows: acc
                .into_iter()
                .zip(&first.rows)
                .map(|((m, s, c), r)| TraceRow {
                    step: r.step,
                    p_marked: m / n,
                    p_subspace: s / n,
                    p_conditional: c.map(|c| c / n),
                })
                .collect(),
        })
    }
}

struct Recorder {
    marked: std::ops::Range<usize>,
    subspace: Vec<std::ops::Range<usize>>,
}

impl Recorder {
    fn new(arcs: &ArcSpace, marked: NodeId) -> Self {
        Recorder {
            marked: arcs.block(marked),
            subspace: arcs
                .last_generation_nodes()
                .into_iter()
                .map(|n| arcs.block(n))
                .collect(),
        }
    }

    fn row<T: Real>(&self, step: usize, amps: &[T]) -> TraceRow<T> {
        let mass = |r: &std::ops::Range<usize>| amps[r.clone()].iter().map(|&a| a * a).sum::<T>();
        let p_subspace = self.subspace.iter().map(mass).sum();
        TraceRow::new(step, mass(&self.marked), p_subspace)
    }
}

/// Evolve under the marked coin and record the trace every
/// `record_every` steps, starting at step 0.
pub fn evolve_and_trace<T: Real>(arcs: &ArcSpace, config: &SearchConfig) -> Result<ProbabilityTrace<T>> {
    config.validate(arcs)?;
    let start = config.init.state::<T>(arcs)?;
    let recorder = Recorder::new(arcs, config.marked);
    let mut walker = Walker::new(arcs, CoinSpec::marked(config.marked), start)?;
    let mut rows = Vec::with_capacity(config.steps / config.record_every + 1);
    rows.push(recorder.row(0, walker.amplitudes()));
    for t in 1..=config.steps {
        walker.advance();
        if t % config.record_every == 0 {
            rows.push(recorder.row(t, walker.amplitudes()));
        }
    }
    Ok(ProbabilityTrace { rows })
}

/// Outcome of projecting onto the span of last-generation arcs.
#[derive(Debug, Clone)]
pub struct Projection<T> {
    pub success_prob: T,
    conditional: Option<WalkState<T>>,
    complement: Option<WalkState<T>>,
}

impl<T: Real> Projection<T> {
    /// Renormalized state after a successful projection.
    pub fn conditional_state(&self) -> Result<&WalkState<T>> {
        self.conditional
            .as_ref()
            .ok_or_else(|| Error::DegenerateProjection(self.success_prob.as_f64()))
    }

    /// Renormalized state after a failed projection; absent when failure
    /// has (numerically) zero probability.
    pub fn complement_state(&self) -> Option<&WalkState<T>> {
        self.complement.as_ref()
    }
}

pub fn project_last_generation<T: Real>(state: &WalkState<T>, arcs: &ArcSpace) -> Result<Projection<T>> {
    if state.len() != arcs.len() {
        return Err(Error::Contract(format!(
            "state has {} amplitudes, arc space has {}",
            state.len(),
            arcs.len()
        )));
    }
    let tol = T::epsilon().sqrt() * <T as Real>::from_usize(10);
    if (state.norm() - T::one()).abs() > tol {
        return Err(Error::Contract(format!(
            "projection needs a unit-norm state, norm is {}",
            state.norm()
        )));
    }
    let mut inside = WalkState::zeros(state.len());
    let mut outside = state.clone();
    for n in arcs.last_generation_nodes() {
        let r = arcs.block(n);
        inside.amplitudes_mut()[r.clone()].copy_from_slice(&state.amplitudes()[r.clone()]);
        outside.amplitudes_mut()[r].fill(T::zero());
    }
    let success = inside.norm_sqr().min(T::one());
    let failure = outside.norm_sqr();
    let floor = PROBABILITY_FLOOR;
    Ok(Projection {
        success_prob: success,
        conditional: if success.as_f64() >= floor {
            inside.normalized()
        } else {
            None
        },
        complement: if success.as_f64() <= 1.0 - floor && failure.as_f64() >= floor {
            outside.normalized()
        } else {
            None
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOutcome {
    /// Measured position; `None` when both projection attempts failed.
    pub outcome: Option<NodeId>,
    pub projection_succeeded: bool,
    pub attempts: u8,
}

#[derive(Debug, Clone)]
struct Branch {
    success: f64,
    nodes: Vec<NodeId>,
    dist: Option<WeightedIndex<f64>>,
    marked_conditional: f64,
}

impl Branch {
    fn from_projection<T: Real>(proj: &Projection<T>, arcs: &ArcSpace, marked: NodeId) -> Self {
        let nodes = arcs.last_generation_nodes();
        let (weights, marked_conditional) = match proj.conditional_state() {
            Ok(state) => {
                let w: Vec<f64> = nodes
                    .iter()
                    .map(|&n| {
                        state.amplitudes()[arcs.block(n)]
                            .iter()
                            .map(|a| a.as_f64().powi(2))
                            .sum()
                    })
                    .collect();
                let total: f64 = w.iter().sum();
                let mc = nodes
                    .iter()
                    .position(|&n| n == marked)
                    .map_or(0.0, |p| w[p] / total);
                (Some(w), mc)
            }
            Err(_) => (None, 0.0),
        };
        Branch {
            success: proj.success_prob.as_f64(),
            dist: weights.and_then(|w| WeightedIndex::new(w).ok()),
            nodes,
            marked_conditional,
        }
    }

    fn empty() -> Self {
        Branch {
            success: 0.0,
            nodes: Vec::new(),
            dist: None,
            marked_conditional: 0.0,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<NodeId> {
        self.dist.as_ref().map(|d| self.nodes[d.sample(rng)])
    }
}

/// The four-step restricted search with post-selection, prepared once and
/// sampled many times.
///
/// The run prepares the `init` superposition, evolves `steps` steps with
/// the marked coin, projects onto last-generation arcs and measures the
/// position. When the projection fails, one shift is applied to the failed state and
/// the projection is attempted once more; a second failure is reported as a
/// failed attempt.
#[derive(Debug, Clone)]
pub struct RestrictedSearch<T> {
    marked: NodeId,
    steps: usize,
    init: InitSet,
    first: Branch,
    second: Branch,
    _scalar: std::marker::PhantomData<T>,
}

impl<T: Real> RestrictedSearch<T> {
    pub fn prepare(arcs: &ArcSpace, marked: NodeId, steps: usize, init: InitSet) -> Result<Self> {
        let config = SearchConfig::new(marked, init, steps);
        config.validate(arcs)?;
        let mut walker = Walker::new(arcs, CoinSpec::marked(marked), init.state::<T>(arcs)?)?;
        for _ in 0..steps {
            walker.advance();
        }
        let proj = project_last_generation(&walker.into_state(), arcs)?;
        let first = Branch::from_projection(&proj, arcs, marked);
        let second = match proj.complement_state() {
            Some(rest) => {
                let shifted = apply_shift(rest, arcs)?;
                Branch::from_projection(&project_last_generation(&shifted, arcs)?, arcs, marked)
            }
            None => Branch::empty(),
        };
        Ok(RestrictedSearch {
            marked,
            steps,
            init,
            first,
            second,
            _scalar: std::marker::PhantomData,
        })
    }

    pub fn marked(&self) -> NodeId {
        self.marked
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn init(&self) -> InitSet {
        self.init
    }

    /// Probability that the first projection succeeds.
    pub fn first_projection_probability(&self) -> f64 {
        self.first.success
    }

    /// Probability of measuring the marked node given the first projection succeeded.
    pub fn conditional_marked_probability(&self) -> f64 {
        self.first.marked_conditional
    }

    /// Probability that the re-projection after the corrective shift succeeds,
    /// given the first projection failed.
    pub fn second_projection_probability(&self) -> f64 {
        self.second.success
    }

    /// Probability that one run of the whole protocol reports the marked node.
    pub fn marked_probability(&self) -> f64 {
        let p1 = self.first.success;
        p1 * self.first.marked_conditional
            + (1.0 - p1) * self.second.success * self.second.marked_conditional
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SearchOutcome {
        if rng.random::<f64>() < self.first.success {
            if let Some(n) = self.first.sample(rng) {
                return SearchOutcome {
                    outcome: Some(n),
                    projection_succeeded: true,
                    attempts: 1,
                };
            }
        }
        if rng.random::<f64>() < self.second.success {
            if let Some(n) = self.second.sample(rng) {
                return SearchOutcome {
                    outcome: Some(n),
                    projection_succeeded: true,
                    attempts: 2,
                };
            }
        }
        SearchOutcome {
            outcome: None,
            projection_succeeded: false,
            attempts: 2,
        }
    }

    /// Run `trials` seeded protocol runs.
    pub fn trials(&self, trials: usize, seed: u64) -> TrialSummary {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut summary = TrialSummary {
            trials,
            ..TrialSummary::default()
        };
        for _ in 0..trials {
            let o = self.sample(&mut rng);
            let hit = o.outcome == Some(self.marked);
            match (o.projection_succeeded, o.attempts) {
                (true, 1) => {
                    summary.first_attempt_successes += 1;
                    summary.first_attempt_hits += usize::from(hit);
                }
                (false, _) => summary.failures += 1,
                _ => {}
            }
            summary.hits += usize::from(hit);
        }
        summary
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialSummary {
    pub trials: usize,
    /// Runs whose first projection succeeded.
    pub first_attempt_successes: usize,
    /// Of those, runs that measured the marked node.
    pub first_attempt_hits: usize,
    /// Runs that measured the marked node on either attempt.
    pub hits: usize,
    pub failures: usize,
}

/// One seeded run of the restricted search protocol.
pub fn restricted_search(
    arcs: &ArcSpace,
    marked: NodeId,
    steps: usize,
    init: InitSet,
    seed: Option<u64>,
) -> Result<SearchOutcome> {
    let prepared = RestrictedSearch::<f64>::prepare(arcs, marked, steps, init)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(DEFAULT_SEED));
    Ok(prepared.sample(&mut rng))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakReport<T> {
    pub step: usize,
    pub probability: T,
    pub channel: Channel,
}

fn channel_values<T: Real>(trace: &ProbabilityTrace<T>, channel: Channel) -> Result<Vec<Option<f64>>> {
    if trace.is_empty() {
        return Err(Error::param("empty trace"));
    }
    let values: Vec<Option<f64>> = trace
        .rows
        .iter()
        .map(|r| r.channel(channel).map(Real::as_f64))
        .collect();
    if values.iter().all(Option::is_none) {
        return Err(Error::param(format!("{channel:?} channel is undefined on every step")));
    }
    Ok(values)
}

fn earliest_max<T: Real>(
    trace: &ProbabilityTrace<T>,
    values: &[Option<f64>],
    range: std::ops::Range<usize>,
    channel: Channel,
) -> PeakReport<T> {
    let max = values[range.clone()]
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let idx = range
        .clone()
        .find(|&i| values[i].is_some_and(|v| v >= max - PEAK_TIE_TOLERANCE))
        .expect("range holds a defined value");
    let row = &trace.rows[idx];
    PeakReport {
        step: row.step,
        probability: row.channel(channel).expect("defined at peak"),
        channel,
    }
}

/// Earliest step attaining the channel maximum (ties within 1e-9).
pub fn find_peak<T: Real>(trace: &ProbabilityTrace<T>, channel: Channel) -> Result<PeakReport<T>> {
    let values = channel_values(trace, channel)?;
    Ok(earliest_max(trace, &values, 0..values.len(), channel))
}

/// Peak of the first lobe of a periodic-looking trace.
///
/// With `M` the channel maximum, the first lobe starts at the first step
/// whose value reaches `M/2` and ends before the first later step that drops
/// below `M/4`; its earliest maximum is returned. Undefined values count as
/// zero. Use this when revivals later in the horizon may exceed the first
/// peak by a hair.
pub fn find_first_lobe_peak<T: Real>(trace: &ProbabilityTrace<T>, channel: Channel) -> Result<PeakReport<T>> {
    let values = channel_values(trace, channel)?;
    let max = values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let v = |i: usize| values[i].unwrap_or(0.0);
    let start = (0..values.len())
        .find(|&i| v(i) >= 0.5 * max)
        .expect("maximum is attained");
    let end = (start..values.len())
        .find(|&i| v(i) < 0.25 * max)
        .unwrap_or(values.len());
    Ok(earliest_max(trace, &values, start..end, channel))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MarkedSet {
    All,
    LastGeneration,
    Explicit(Vec<NodeId>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepConfig {
    pub marked_set: MarkedSet,
    pub init: InitSet,
    pub steps: usize,
    pub record_every: usize,
    pub group_by_generation: bool,
    pub sample_per_group: Option<usize>,
    pub seed: u64,
    /// Keep every per-node trace in the result (needed for per-node peaks).
    pub keep_node_traces: bool,
}

impl SweepConfig {
    pub fn new(marked_set: MarkedSet, init: InitSet, steps: usize) -> Self {
        SweepConfig {
            marked_set,
            init,
            steps,
            record_every: 1,
            group_by_generation: true,
            sample_per_group: None,
            seed: DEFAULT_SEED,
            keep_node_traces: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupTrace<T> {
    /// Generation shared by the members; `None` for an ungrouped sweep.
    pub generation: Option<u32>,
    pub members: Vec<NodeId>,
    /// Size of the group before sampling.
    pub population: usize,
    pub trace: ProbabilityTrace<T>,
    pub node_traces: Vec<ProbabilityTrace<T>>,
}

impl<T> GroupTrace<T> {
    pub fn sampled(&self) -> bool {
        self.members.len() < self.population
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedGroup {
    pub generation: Option<u32>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult<T> {
    pub groups: Vec<GroupTrace<T>>,
    pub skipped: Vec<SkippedGroup>,
}

impl<T> SweepResult<T> {
    pub fn group(&self, generation: u32) -> Option<&GroupTrace<T>> {
        self.groups.iter().find(|g| g.generation == Some(generation))
    }
}

/// Run one trace per marked node and average them per generation group.
///
/// Runs are independent and may execute on any number of threads; the
/// reduction walks members in ascending id order, so results do not depend
/// on the thread count.
pub fn sweep<T: Real>(arcs: &ArcSpace, config: &SweepConfig) -> Result<SweepResult<T>> {
    let graph = arcs.graph();
    if config.sample_per_group == Some(0) {
        return Err(Error::param("sample_per_group must be positive"));
    }
    let candidates: Vec<NodeId> = match &config.marked_set {
        MarkedSet::All => graph.nodes().collect(),
        MarkedSet::LastGeneration => graph.last_generation(),
        MarkedSet::Explicit(list) => {
            let mut list = list.clone();
            list.sort_unstable();
            list.dedup();
            if let Some(bad) = list.iter().find(|n| !graph.contains(**n)) {
                return Err(Error::param(format!(
                    "marked node {bad} out of range 0..{}",
                    graph.node_count()
                )));
            }
            list
        }
    };

    let mut plan: Vec<(Option<u32>, Vec<NodeId>)> = Vec::new();
    if config.group_by_generation {
        let generations: Vec<u32> = match &config.marked_set {
            MarkedSet::All => (0..=graph.generation()).collect(),
            MarkedSet::LastGeneration => vec![graph.generation()],
            MarkedSet::Explicit(_) => {
                let mut g: Vec<u32> = candidates.iter().map(|&n| graph.node_generation(n)).collect();
                g.sort_unstable();
                g.dedup();
                g
            }
        };
        for g in generations {
            plan.push((
                Some(g),
                candidates
                    .iter()
                    .copied()
                    .filter(|&n| graph.node_generation(n) == g)
                    .collect(),
            ));
        }
    } else {
        plan.push((None, candidates));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut skipped = Vec::new();
    let mut planned = Vec::new();
    for (generation, members) in plan {
        if members.is_empty() {
            skipped.push(SkippedGroup {
                generation,
                reason: "no marked candidates in group".into(),
            });
            continue;
        }
        let population = members.len();
        let members = match config.sample_per_group {
            Some(n) if n < population => {
                let mut picked: Vec<NodeId> = index::sample(&mut rng, population, n)
                    .into_iter()
                    .map(|i| members[i])
                    .collect();
                picked.sort_unstable();
                picked
            }
            _ => members,
        };
        planned.push((generation, population, members));
    }

    let jobs: Vec<NodeId> = planned.iter().flat_map(|(_, _, m)| m.iter().copied()).collect();
    let traces: Vec<ProbabilityTrace<T>> = jobs
        .par_iter()
        .map(|&m| {
            let cfg = SearchConfig::new(m, config.init, config.steps).record_every(config.record_every);
            evolve_and_trace(arcs, &cfg)
        })
        .collect::<Result<_>>()?;

    let mut groups = Vec::with_capacity(planned.len());
    let mut cursor = 0;
    for (generation, population, members) in planned {
        let slice = &traces[cursor..cursor + members.len()];
        cursor += members.len();
        groups.push(GroupTrace {
            generation,
            population,
            trace: ProbabilityTrace::mean(slice).expect("group is nonempty"),
            node_traces: if config.keep_node_traces {
                slice.to_vec()
            } else {
                Vec::new()
            },
            members,
        });
    }
    Ok(SweepResult { groups, skipped })
}

/// `ceil(4 * sqrt(n_last))`: default horizon for last-generation sweeps.
pub fn restricted_horizon(n_last: usize) -> usize {
    (4.0 * (n_last as f64).sqrt()).ceil() as usize
}

/// `ceil(6 * sqrt(n))`: default horizon for whole-network sweeps.
pub fn full_horizon(n: usize) -> usize {
    (6.0 * (n as f64).sqrt()).ceil() as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResidual<T> {
    pub generation: u32,
    pub observed: T,
    pub fitted: T,
    pub residual: T,
}

/// Least-squares fit of `T_p = alpha * 3^(K/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityFit<T> {
    pub alpha: T,
    pub residuals: Vec<FitResidual<T>>,
}

impl<T: Real> ComplexityFit<T> {
    pub fn predict(&self, generation: u32) -> T {
        self.alpha * scale(generation)
    }
}

fn scale<T: Real>(generation: u32) -> T {
    T::from_f64_lossy(3f64.powf(generation as f64 / 2.0))
}

pub fn fit_alpha<T: Real>(observations: &[(u32, T)]) -> Result<ComplexityFit<T>> {
    if observations.len() < 2 {
        return Err(Error::param("at least two (generation, step) observations are needed"));
    }
    let (num, den) = observations.iter().fold((T::zero(), T::zero()), |(n, d), &(k, t)| {
        let x: T = scale(k);
        (n + t * x, d + x * x)
    });
    let alpha = num / den;
    if alpha.is_nan() || alpha <= T::zero() {
        return Err(Error::param("fitted alpha is not positive"));
    }
    let residuals = observations
        .iter()
        .map(|&(k, t)| {
            let fitted = alpha * scale(k);
            FitResidual {
                generation: k,
                observed: t,
                fitted,
                residual: t - fitted,
            }
        })
        .collect();
    Ok(ComplexityFit { alpha, residuals })
}

/// Expected number of steps `T_p / p` when a run succeeds with probability `p`.
pub fn expected_cost<T: Real>(t_p: T, p: T) -> Result<T> {
    if p.is_nan() || p <= T::zero() || p > T::one() {
        return Err(Error::param(format!("success probability {p} outside (0, 1]")));
    }
    Ok(t_p / p)
}

/// One row of the generation summary table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub generation: u32,
    pub n_last: usize,
    pub t_p: usize,
    pub two_sqrt_n_last: f64,
    pub p_bar: f64,
}

impl SummaryRow {
    /// Conditional-channel peak of a last-generation group.
    pub fn from_group<T: Real>(generation: u32, n_last: usize, group: &GroupTrace<T>) -> Result<Self> {
        let peak = find_peak(&group.trace, Channel::Conditional)?;
        Ok(SummaryRow {
            generation,
            n_last,
            t_p: peak.step,
            two_sqrt_n_last: 2.0 * (n_last as f64).sqrt(),
            p_bar: peak.probability.as_f64(),
        })
    }
}
