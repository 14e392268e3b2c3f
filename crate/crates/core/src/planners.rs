//! On-line and search planners: RTDP, symbolic RTDP and symbolic LAO*,
//! plus the simulator that stands in for the environment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diagram::{Manager, StateAssignment};
use crate::dp::{self, DpError, Policy, ValueFunction};
use crate::model::{maintain, FactoredMdp};
use crate::reach::{self, StateSet};

/// Deterministic random stream used for simulation and exploration.
pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const DEFAULT_LAO_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("generalization of state {0} does not contain the state itself")]
    GeneralizationMissedState(StateAssignment),
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error("symbolic LAO* did not converge within {0} iterations")]
    IterationCap(usize),
    #[error("symbolic LAO* stopped by the caller after {iterations} iterations (V(s0) = {v_start})")]
    Stopped { iterations: usize, v_start: f64 },
}

/// How a visited state is generalized to an abstract state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Generalization {
    /// States whose value is within `delta` of the current state's;
    /// `None` picks 1% of the value range.
    Value { delta: Option<f64> },
    /// States whose successors all lie in the current state's successors.
    Reach,
    /// Just the current state.
    Single,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialSchedule {
    pub trials: usize,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub trial: usize,
    pub step: usize,
    pub state: StateAssignment,
    pub action: usize,
    pub reward: f64,
    /// V at the visited state right after its update.
    pub value: f64,
    /// V at the start state right after the update.
    pub v_start: f64,
    /// Number of states in the updated abstract state.
    pub updated: f64,
    pub cpu_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub cpu_ms: f64,
    pub v_start: f64,
    /// Undiscounted sum of rewards collected in the trial.
    pub reward: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrialLog {
    pub steps: Vec<StepRecord>,
    pub trials: Vec<TrialRecord>,
}

impl TrialLog {
    /// `(state, action, value)` per step, the timing-free part of the log.
    pub fn trace(&self) -> Vec<(StateAssignment, usize, f64)> {
        self.steps.iter().map(|r| (r.state, r.action, r.value)).collect()
    }
}

/// Thread CPU time, in milliseconds since construction.
pub struct CpuClock {
    start: f64,
}

impl CpuClock {
    pub fn start() -> Self {
        CpuClock { start: thread_cpu_ms() }
    }

    pub fn elapsed_ms(&self) -> f64 {
        thread_cpu_ms() - self.start
    }
}

fn thread_cpu_ms() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 * 1e3 + ts.tv_nsec as f64 * 1e-6
}

/// Samples the next state bit by bit and returns it with `R^a(s)`.
pub fn simulate_step(
    mgr: &Manager,
    m: &FactoredMdp,
    s: &StateAssignment,
    a: usize,
    rng: &mut SimRng,
) -> (StateAssignment, f64) {
    let action = m.action(a);
    let mut next = StateAssignment::new(m.num_vars());
    for i in 0..m.num_vars() {
        let p = mgr.value_at(action.cpt(i), s);
        let u: f64 = rng.random();
        next.set(i, u < p);
    }
    (next, mgr.value_at(action.reward(), s))
}

pub(crate) fn generalize(
    mgr: &mut Manager,
    m: &FactoredMdp,
    v: ValueFunction,
    s: &StateAssignment,
    mode: Generalization,
) -> StateSet {
    match mode {
        Generalization::Value { delta } => reach::generalize_value(mgr, s, v.0, delta),
        Generalization::Reach => reach::generalize_reach(mgr, m, s),
        Generalization::Single => reach::chi_of(mgr, m.num_vars(), &[*s]),
    }
}

pub(crate) struct StepOutcome {
    pub value: ValueFunction,
    pub greedy: usize,
    pub updated: f64,
    pub set: StateSet,
}

/// What an observer sees after each step: the log record, the value
/// function before and after the update and the states it backed up.
pub struct StepView<'a> {
    pub record: &'a StepRecord,
    pub before: ValueFunction,
    pub after: ValueFunction,
    pub updated: StateSet,
}

/// Single-state backup at `s`, written into `v`.
pub(crate) fn single_update(mgr: &mut Manager, m: &FactoredMdp, v: ValueFunction, s: &StateAssignment) -> StepOutcome {
    let q = dp::single_state_q(mgr, m, v, s);
    let greedy = dp::argmax(&q);
    let value = mgr.set_value(v.0, s, q[greedy]).expect("finite backed-up value");
    let set = reach::chi_of(mgr, m.num_vars(), &[*s]);
    StepOutcome { value: ValueFunction(value), greedy, updated: 1.0, set }
}

/// Generalize, masked backup over the abstract state, merge.
pub(crate) fn symbolic_update(
    mgr: &mut Manager,
    m: &FactoredMdp,
    v: ValueFunction,
    s: &StateAssignment,
    mode: Generalization,
) -> Result<StepOutcome, PlannerError> {
    let e = generalize(mgr, m, v, s, mode);
    if !e.contains(mgr, s) {
        return Err(PlannerError::GeneralizationMissedState(*s));
    }
    let backup = dp::masked_backup(mgr, m, v, &e)?;
    let (greedy, _) = dp::greedy_action(mgr, m, v, s, Some(&backup.q));
    let value = dp::merge_masked(mgr, v, backup.value, &e);
    Ok(StepOutcome { value, greedy, updated: e.count(mgr), set: e })
}

/// Trial loop shared by the known-model planners.
#[allow(clippy::too_many_arguments)]
fn run_trials(
    mgr: &mut Manager,
    m: &FactoredMdp,
    v0: ValueFunction,
    s0: &StateAssignment,
    schedule: TrialSchedule,
    rng: &mut SimRng,
    mut update: impl FnMut(&mut Manager, ValueFunction, &StateAssignment) -> Result<StepOutcome, PlannerError>,
    mut observe: impl FnMut(&Manager, &StepView),
) -> Result<(ValueFunction, TrialLog), PlannerError> {
    let clock = CpuClock::start();
    let mut v = v0;
    let mut log = TrialLog::default();
    for trial in 1..=schedule.trials {
        let mut s = *s0;
        let mut total = 0.0;
        for step in 1..=schedule.steps {
            let out = update(mgr, v, &s)?;
            let before = v;
            v = out.value;
            let (next, reward) = simulate_step(mgr, m, &s, out.greedy, rng);
            total += reward;
            let record = StepRecord {
                trial,
                step,
                state: s,
                action: out.greedy,
                reward,
                value: v.at(mgr, &s),
                v_start: v.at(mgr, s0),
                updated: out.updated,
                cpu_ms: clock.elapsed_ms(),
            };
            observe(mgr, &StepView { record: &record, before, after: v, updated: out.set });
            log.steps.push(record);
            s = next;
            maintain(mgr, &[m], &[v.0, v0.0]);
        }
        log.trials.push(TrialRecord { trial, cpu_ms: clock.elapsed_ms(), v_start: v.at(mgr, s0), reward: total });
    }
    Ok((v, log))
}

/// RTDP: one single-state backup per step, greedy action selection.
pub fn run_rtdp(
    mgr: &mut Manager,
    m: &FactoredMdp,
    v0: ValueFunction,
    s0: &StateAssignment,
    schedule: TrialSchedule,
    rng: &mut SimRng,
) -> (ValueFunction, TrialLog) {
    run_rtdp_observed(mgr, m, v0, s0, schedule, rng, |_, _| {})
}

/// [`run_rtdp`] reporting every step to `observe`.
pub fn run_rtdp_observed(
    mgr: &mut Manager,
    m: &FactoredMdp,
    v0: ValueFunction,
    s0: &StateAssignment,
    schedule: TrialSchedule,
    rng: &mut SimRng,
    observe: impl FnMut(&Manager, &StepView),
) -> (ValueFunction, TrialLog) {
    run_trials(mgr, m, v0, s0, schedule, rng, |mgr, v, s| Ok(single_update(mgr, m, v, s)), observe)
        .expect("single-state updates cannot fail")
}

/// Symbolic RTDP: each step backs up the abstract state chosen by `mode`.
pub fn run_srtdp(
    mgr: &mut Manager,
    m: &FactoredMdp,
    v0: ValueFunction,
    s0: &StateAssignment,
    schedule: TrialSchedule,
    rng: &mut SimRng,
    mode: Generalization,
) -> Result<(ValueFunction, TrialLog), PlannerError> {
    run_srtdp_observed(mgr, m, v0, s0, schedule, rng, mode, |_, _| {})
}

/// [`run_srtdp`] reporting every step to `observe`.
#[allow(clippy::too_many_arguments)]
pub fn run_srtdp_observed(
    mgr: &mut Manager,
    m: &FactoredMdp,
    v0: ValueFunction,
    s0: &StateAssignment,
    schedule: TrialSchedule,
    rng: &mut SimRng,
    mode: Generalization,
    observe: impl FnMut(&Manager, &StepView),
) -> Result<(ValueFunction, TrialLog), PlannerError> {
    run_trials(mgr, m, v0, s0, schedule, rng, |mgr, v, s| symbolic_update(mgr, m, v, s, mode), observe)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaoIteration {
    pub iteration: usize,
    pub cpu_ms: f64,
    pub v_start: f64,
    pub expanded: f64,
}

#[derive(Clone, Debug)]
pub struct LaoResult {
    pub value: ValueFunction,
    pub policy: Policy,
    pub expanded: StateSet,
    pub history: Vec<LaoIteration>,
}

/// States reachable from `s0` under the greedy policy of `v`, with that
/// policy.
fn expand_greedy(mgr: &mut Manager, m: &FactoredMdp, v: ValueFunction, s0: &StateAssignment) -> Result<(StateSet, Policy), PlannerError> {
    let start = reach::chi_of(mgr, m.num_vars(), &[*s0]);
    let mut seen = start;
    let mut frontier = start;
    let mut sets = vec![StateSet::empty(mgr); m.num_actions()];
    while !frontier.is_empty(mgr) {
        let backup = dp::masked_backup(mgr, m, v, &frontier)?;
        let local = dp::policy_from_q(mgr, &backup.q, &frontier);
        let mut succ = StateSet::empty(mgr);
        for (a, part) in local.sets.iter().enumerate() {
            if part.is_empty(mgr) {
                continue;
            }
            sets[a] = reach::union(mgr, &sets[a], part);
            let next = reach::img_action(mgr, m, a, part);
            succ = reach::union(mgr, &succ, &next);
        }
        frontier = reach::difference(mgr, &succ, &seen);
        seen = reach::union(mgr, &seen, &frontier);
    }
    Ok((seen, Policy { sets }))
}

/// Masked value iteration over `e` until the change on `e` is at most `tol`.
fn masked_value_iteration(
    mgr: &mut Manager,
    m: &FactoredMdp,
    mut v: ValueFunction,
    e: &StateSet,
    tol: f64,
) -> Result<ValueFunction, PlannerError> {
    let mut residual = f64::INFINITY;
    for _ in 0..dp::DEFAULT_MAX_ITERATIONS {
        let backup = dp::masked_backup(mgr, m, v, e)?;
        let next = dp::merge_masked(mgr, v, backup.value, e);
        let change = mgr.sub(next.0, v.0);
        residual = mgr.sup_norm(change);
        v = next;
        maintain(mgr, &[m], &[v.0, e.chi]);
        if residual <= tol {
            return Ok(v);
        }
    }
    Err(DpError::NoConvergence { iterations: dp::DEFAULT_MAX_ITERATIONS, residual }.into())
}

/// Symbolic LAO*: alternate greedy-policy expansion from `s0` with masked
/// value iteration on the expanded set until the set stops changing.
pub fn run_lao_star(
    mgr: &mut Manager,
    m: &FactoredMdp,
    v0: ValueFunction,
    s0: &StateAssignment,
    tol: f64,
) -> Result<LaoResult, PlannerError> {
    run_lao_star_with(mgr, m, v0, s0, tol, DEFAULT_LAO_MAX_ITERATIONS)
}

pub fn run_lao_star_with(
    mgr: &mut Manager,
    m: &FactoredMdp,
    v0: ValueFunction,
    s0: &StateAssignment,
    tol: f64,
    max_iterations: usize,
) -> Result<LaoResult, PlannerError> {
    run_lao_star_observed(mgr, m, v0, s0, tol, max_iterations, |_| true)
}

/// [`run_lao_star_with`] that reports each outer iteration to `proceed`
/// and stops with [`PlannerError::Stopped`] once it returns false.
pub fn run_lao_star_observed(
    mgr: &mut Manager,
    m: &FactoredMdp,
    v0: ValueFunction,
    s0: &StateAssignment,
    tol: f64,
    max_iterations: usize,
    proceed: impl FnMut(&LaoIteration) -> bool,
) -> Result<LaoResult, PlannerError> {
    mgr.protect(v0.0);
    let result = lao_star(mgr, m, v0, s0, tol, max_iterations, proceed);
    mgr.unprotect(v0.0);
    result
}

fn lao_star(
    mgr: &mut Manager,
    m: &FactoredMdp,
    v0: ValueFunction,
    s0: &StateAssignment,
    tol: f64,
    max_iterations: usize,
    mut proceed: impl FnMut(&LaoIteration) -> bool,
) -> Result<LaoResult, PlannerError> {
    let clock = CpuClock::start();
    let mut v = v0;
    let mut previous: Option<StateSet> = None;
    let mut history = Vec::new();
    for iteration in 1..=max_iterations {
        let (expanded, policy) = expand_greedy(mgr, m, v, s0)?;
        if previous == Some(expanded) {
            return Ok(LaoResult { value: v, policy, expanded, history });
        }
        v = masked_value_iteration(mgr, m, v, &expanded, tol)?;
        let record = LaoIteration {
            iteration,
            cpu_ms: clock.elapsed_ms(),
            v_start: v.at(mgr, s0),
            expanded: expanded.count(mgr),
        };
        let go_on = proceed(&record);
        history.push(record);
        if !go_on {
            return Err(PlannerError::Stopped { iterations: iteration, v_start: v.at(mgr, s0) });
        }
        previous = Some(expanded);
    }
    Err(PlannerError::IterationCap(max_iterations))
}
