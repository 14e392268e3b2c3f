//! Factored MDPs over Boolean state variables.
//!
//! Each action carries one conditional probability diagram per variable,
//! `P(X'_i = true | X)`, and a reward diagram `R(X)`. The model text
//! format is a parenthesized tree language:
//!
//! ```text
//! (variables x1 x2)
//! (discount 0.9)
//! (start (x1 0) (x2 0))
//! (action flip1 (x1 (x1 0.0 1.0)) (x2 (x2 1.0 0.0)) (reward (x1 (x2 1.0 0.0) 0.0)))
//! ```
//!
//! A tree `(v T F)` takes `T` when `v` is true. Every variable needs a CPT
//! in every action. `(absorbing (x1 1) ...)` names a zero-reward goal state
//! and is required when the discount is 1.

use std::cell::OnceCell;
use std::fmt;
use std::fmt::Write as _;

use rustc_hash::FxHashSet;
use thiserror::Error;

use crate::diagram::{Diagram, DiagramError, Manager, Node, StateAssignment, VarId, VarSet};
use crate::reach;
use crate::sexpr::{self, Pos, SExpr};

/// Tolerance on `Σ_{s'} P(s, s') = 1` in [`validate_model`]; products and
/// sums of decimal probabilities are not exact in binary floating point.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: unknown variable `{name}`")]
    UnknownVariable { name: String, pos: Pos },
    #[error("{pos}: probability {value} outside [0, 1]")]
    ProbabilityRange { value: f64, pos: Pos },
    #[error("{pos}: duplicate action `{name}`")]
    DuplicateAction { name: String, pos: Pos },
    #[error("{pos}: action `{name}` has an empty body")]
    EmptyAction { name: String, pos: Pos },
    #[error("action `{action}` has no CPT for variable `{variable}`")]
    MissingCpt { action: String, variable: String },
    #[error("{pos}: duplicate CPT for `{variable}` in action `{action}`")]
    DuplicateCpt { action: String, variable: String, pos: Pos },
    #[error("action `{0}` has no reward tree")]
    MissingReward(String),
    #[error("missing `({0} ...)` clause")]
    MissingClause(&'static str),
    #[error("discount {0} outside [0, 1]")]
    DiscountRange(f64),
    #[error("discount 1 requires an `(absorbing ...)` goal clause")]
    DiscountOneWithoutGoal,
    #[error("model has no actions")]
    NoActions,
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
}

impl From<sexpr::ReadError> for ModelError {
    fn from(e: sexpr::ReadError) -> Self {
        ModelError::Syntax { pos: e.pos, message: e.message }
    }
}

/// One action: per-variable CPTs, reward, and derived diagrams.
#[derive(Clone, Debug)]
pub struct ActionSpec {
    name: String,
    cpts: Vec<Diagram>,
    reward: Diagram,
    // ite(X'_i, F_i, 1 - F_i)
    factors: Vec<Diagram>,
    // ite(X'_i, F_i > 0, F_i < 1): which values of X'_i have positive probability
    edges: Vec<Diagram>,
    // Primed variables whose CPT is the identity `X'_i = X_i`.
    frame: VarSet,
    relation: OnceCell<Diagram>,
    transition: OnceCell<Diagram>,
}

impl ActionSpec {
    /// Builds an action from CPT and reward diagrams over unprimed variables.
    pub fn new(mgr: &mut Manager, name: impl Into<String>, cpts: Vec<Diagram>, reward: Diagram) -> Result<Self, ModelError> {
        let name = name.into();
        if cpts.len() != mgr.num_state_vars() {
            return Err(ModelError::Invalid(format!(
                "action `{name}` has {} CPTs for {} variables",
                cpts.len(),
                mgr.num_state_vars()
            )));
        }
        for &d in cpts.iter().chain(std::iter::once(&reward)) {
            if mgr.support(d).iter().any(|v| v.is_primed()) {
                return Err(DiagramError::PrimedSupport.into());
            }
        }
        let mut factors = Vec::with_capacity(cpts.len());
        let mut edges = Vec::with_capacity(cpts.len());
        let mut frame = VarSet::empty();
        for (i, &cpt) in cpts.iter().enumerate() {
            let (f, e) = derive_factor(mgr, i, cpt)?;
            factors.push(f);
            edges.push(e);
            if cpt == mgr.mk_literal(VarId::unprimed(i))? {
                frame.insert(VarId::primed(i));
            }
        }
        Ok(ActionSpec {
            name,
            cpts,
            reward,
            factors,
            edges,
            frame,
            relation: OnceCell::new(),
            transition: OnceCell::new(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `P(X'_i = true | X)`.
    pub fn cpt(&self, i: usize) -> Diagram {
        self.cpts[i]
    }

    pub fn cpts(&self) -> &[Diagram] {
        &self.cpts
    }

    pub fn reward(&self) -> Diagram {
        self.reward
    }

    /// Primed variables this action leaves unchanged.
    pub fn frame(&self) -> VarSet {
        self.frame
    }

    /// `P(X'_i | X)` as a diagram over `X` and `X'_i`.
    pub fn factor(&self, i: usize) -> Diagram {
        self.factors[i]
    }
}

fn derive_factor(mgr: &mut Manager, i: usize, cpt: Diagram) -> Result<(Diagram, Diagram), ModelError> {
    let next = VarId::primed(i);
    let complement = mgr.one_minus(cpt);
    let factor = mgr.ite_var(next, cpt, complement)?;
    let can_be_true = mgr.positive(cpt);
    let can_be_false = mgr.below_one(cpt);
    let edge = mgr.ite_var(next, can_be_true, can_be_false)?;
    Ok((factor, edge))
}

#[derive(Clone, Debug)]
pub struct FactoredMdp {
    names: Vec<String>,
    gamma: f64,
    start: StateAssignment,
    absorbing: Option<StateAssignment>,
    actions: Vec<ActionSpec>,
    relation: OnceCell<Diagram>,
}

impl FactoredMdp {
    pub fn new(
        names: Vec<String>,
        gamma: f64,
        start: StateAssignment,
        actions: Vec<ActionSpec>,
        absorbing: Option<StateAssignment>,
    ) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(ModelError::DiscountRange(gamma));
        }
        if gamma == 1.0 && absorbing.is_none() {
            return Err(ModelError::DiscountOneWithoutGoal);
        }
        if actions.is_empty() {
            return Err(ModelError::NoActions);
        }
        let n = names.len();
        if start.len() != n || absorbing.is_some_and(|g| g.len() != n) {
            return Err(ModelError::Invalid("state length does not match variable count".into()));
        }
        let mut seen = FxHashSet::default();
        for a in &actions {
            if a.cpts.len() != n {
                return Err(ModelError::Invalid(format!("action `{}` has the wrong number of CPTs", a.name)));
            }
            if !seen.insert(a.name.as_str()) {
                return Err(ModelError::DuplicateAction { name: a.name.clone(), pos: Pos { line: 0, col: 0 } });
            }
        }
        Ok(FactoredMdp { names, gamma, start, absorbing, actions, relation: OnceCell::new() })
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn start(&self) -> StateAssignment {
        self.start
    }

    pub fn absorbing(&self) -> Option<StateAssignment> {
        self.absorbing
    }

    pub fn actions(&self) -> &[ActionSpec] {
        &self.actions
    }

    pub fn action(&self, a: usize) -> &ActionSpec {
        &self.actions[a]
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a.name == name)
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Every diagram the model holds, cached ones included; the roots to
    /// keep across [`Manager::collect_garbage`].
    pub fn diagrams(&self) -> Vec<Diagram> {
        let mut out = Vec::new();
        for a in &self.actions {
            out.extend_from_slice(&a.cpts);
            out.extend_from_slice(&a.factors);
            out.extend_from_slice(&a.edges);
            out.push(a.reward);
            out.extend(a.relation.get().copied());
            out.extend(a.transition.get().copied());
        }
        out.extend(self.relation.get().copied());
        out
    }

    /// Replaces one CPT, refreshing the derived diagrams of that action.
    pub fn set_cpt(&mut self, mgr: &mut Manager, a: usize, i: usize, cpt: Diagram) -> Result<(), ModelError> {
        let (factor, edge) = derive_factor(mgr, i, cpt)?;
        let action = &mut self.actions[a];
        action.cpts[i] = cpt;
        action.factors[i] = factor;
        action.transition = OnceCell::new();
        if action.edges[i] != edge {
            action.edges[i] = edge;
            action.relation = OnceCell::new();
            self.relation = OnceCell::new();
        }
        Ok(())
    }

    /// Replaces the cached `P^a(X, X')` without touching the CPTs. Only
    /// meaningful for checking [`validate_model`] on malformed transitions.
    pub fn override_transition(&mut self, a: usize, transition: Diagram) {
        self.actions[a].transition = OnceCell::from(transition);
    }

    /// Positive-probability transition relation of action `a`, a 0/1
    /// diagram over `X` and `X'`.
    pub fn action_relation(&self, mgr: &mut Manager, a: usize) -> Diagram {
        let action = &self.actions[a];
        *action.relation.get_or_init(|| {
            action.edges.iter().rev().fold(mgr.one(), |acc, &e| mgr.and(e, acc))
        })
    }

    /// Union of the positive-probability relations of all actions.
    pub fn transition_relation(&self, mgr: &mut Manager) -> Diagram {
        if let Some(&r) = self.relation.get() {
            return r;
        }
        let mut r = mgr.zero();
        for a in 0..self.actions.len() {
            let ra = self.action_relation(mgr, a);
            r = mgr.or(r, ra);
        }
        *self.relation.get_or_init(|| r)
    }
}

/// `P^a(X, X') = Π_i [X'_i · P(X'_i | X) + (1 - X'_i) · (1 - P(X'_i | X))]`,
/// built on first use and cached in the model.
pub fn action_transition(mgr: &mut Manager, m: &FactoredMdp, a: usize) -> Diagram {
    let action = &m.actions[a];
    *action.transition.get_or_init(|| {
        action.factors.iter().rev().fold(mgr.one(), |acc, &f| mgr.mul(f, acc))
    })
}

// ---------------------------------------------------------------------------
// Parsing

struct Header {
    names: Option<Vec<String>>,
    gamma: Option<f64>,
    start: Option<Vec<(usize, bool)>>,
    absorbing: Option<Vec<(usize, bool)>>,
}

fn syntax(pos: Pos, message: impl Into<String>) -> ModelError {
    ModelError::Syntax { pos, message: message.into() }
}

fn parse_number(e: &SExpr) -> Result<f64, ModelError> {
    let text = e.as_atom().ok_or_else(|| syntax(e.pos(), "expected a number"))?;
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(syntax(e.pos(), format!("`{text}` is not a finite number"))),
    }
}

fn lookup(names: &[String], e: &SExpr) -> Result<usize, ModelError> {
    let name = e.as_atom().ok_or_else(|| syntax(e.pos(), "expected a variable name"))?;
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| ModelError::UnknownVariable { name: name.to_string(), pos: e.pos() })
}

fn parse_bits(names: &[String], items: &[SExpr]) -> Result<Vec<(usize, bool)>, ModelError> {
    items
        .iter()
        .map(|item| {
            let pair = item.as_list().filter(|l| l.len() == 2).ok_or_else(|| syntax(item.pos(), "expected `(name bit)`"))?;
            let var = lookup(names, &pair[0])?;
            let bit = match pair[1].as_atom() {
                Some("0") => false,
                Some("1") => true,
                _ => return Err(syntax(pair[1].pos(), "bit must be 0 or 1")),
            };
            Ok((var, bit))
        })
        .collect()
}

fn full_state(names: &[String], bits: &[(usize, bool)], clause: &'static str) -> Result<StateAssignment, ModelError> {
    let mut s = StateAssignment::new(names.len());
    let mut seen = vec![false; names.len()];
    for &(i, b) in bits {
        if seen[i] {
            return Err(ModelError::Invalid(format!("variable `{}` assigned twice in ({clause} ...)", names[i])));
        }
        seen[i] = true;
        s.set(i, b);
    }
    if let Some(i) = seen.iter().position(|&x| !x) {
        return Err(ModelError::Invalid(format!("variable `{}` missing from ({clause} ...)", names[i])));
    }
    Ok(s)
}

fn parse_tree(mgr: &mut Manager, names: &[String], e: &SExpr, probability: bool) -> Result<Diagram, ModelError> {
    match e {
        SExpr::Atom(..) => {
            let v = parse_number(e)?;
            if probability && !(0.0..=1.0).contains(&v) {
                return Err(ModelError::ProbabilityRange { value: v, pos: e.pos() });
            }
            Ok(mgr.mk_const(v)?)
        }
        SExpr::List(items, pos) => {
            if items.len() != 3 {
                return Err(syntax(*pos, "expected `(variable true-branch false-branch)`"));
            }
            let var = lookup(names, &items[0])?;
            let hi = parse_tree(mgr, names, &items[1], probability)?;
            let lo = parse_tree(mgr, names, &items[2], probability)?;
            Ok(mgr.ite_var(VarId::unprimed(var), hi, lo)?)
        }
    }
}

fn parse_action(mgr: &mut Manager, names: &[String], items: &[SExpr], pos: Pos) -> Result<ActionSpec, ModelError> {
    let name = items
        .get(1)
        .and_then(SExpr::as_atom)
        .ok_or_else(|| syntax(pos, "expected `(action name ...)`"))?
        .to_string();
    if items.len() == 2 {
        return Err(ModelError::EmptyAction { name, pos });
    }
    let mut cpts: Vec<Option<Diagram>> = vec![None; names.len()];
    let mut reward = None;
    for clause in &items[2..] {
        let parts = clause
            .as_list()
            .filter(|l| l.len() == 2)
            .ok_or_else(|| syntax(clause.pos(), "expected `(variable tree)` or `(reward tree)`"))?;
        if parts[0].as_atom() == Some("reward") {
            if reward.is_some() {
                return Err(syntax(clause.pos(), format!("duplicate reward in action `{name}`")));
            }
            reward = Some(parse_tree(mgr, names, &parts[1], false)?);
            continue;
        }
        let var = lookup(names, &parts[0])?;
        if cpts[var].is_some() {
            return Err(ModelError::DuplicateCpt { action: name, variable: names[var].clone(), pos: clause.pos() });
        }
        cpts[var] = Some(parse_tree(mgr, names, &parts[1], true)?);
    }
    let cpts = cpts
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| ModelError::MissingCpt { action: name.clone(), variable: names[i].clone() }))
        .collect::<Result<Vec<_>, _>>()?;
    let reward = reward.ok_or_else(|| ModelError::MissingReward(name.clone()))?;
    ActionSpec::new(mgr, name, cpts, reward)
}

/// Parses model text into a fresh manager.
pub fn parse_model(text: &str) -> Result<(Manager, FactoredMdp), ModelError> {
    let exprs = sexpr::read_all(text)?;
    let mut header = Header { names: None, gamma: None, start: None, absorbing: None };
    let mut action_exprs = Vec::new();
    for e in &exprs {
        let items = e.as_list().ok_or_else(|| syntax(e.pos(), "expected a clause"))?;
        match e.head() {
            Some("variables") => {
                if header.names.is_some() {
                    return Err(syntax(e.pos(), "duplicate (variables ...) clause"));
                }
                let mut names = Vec::new();
                for item in &items[1..] {
                    let name = item.as_atom().ok_or_else(|| syntax(item.pos(), "expected a variable name"))?;
                    if name == "reward" || name.parse::<f64>().is_ok() {
                        return Err(syntax(item.pos(), format!("`{name}` cannot name a variable")));
                    }
                    if names.iter().any(|n| n == name) {
                        return Err(syntax(item.pos(), format!("duplicate variable `{name}`")));
                    }
                    names.push(name.to_string());
                }
                if names.is_empty() {
                    return Err(syntax(e.pos(), "at least one variable is required"));
                }
                header.names = Some(names);
            }
            Some("discount") => {
                if items.len() != 2 {
                    return Err(syntax(e.pos(), "expected `(discount real)`"));
                }
                header.gamma = Some(parse_number(&items[1])?);
            }
            Some("start") | Some("absorbing") => {
                let names = header
                    .names
                    .as_deref()
                    .ok_or_else(|| syntax(e.pos(), "(variables ...) must come first"))?;
                let bits = parse_bits(names, &items[1..])?;
                if e.head() == Some("start") {
                    header.start = Some(bits);
                } else {
                    header.absorbing = Some(bits);
                }
            }
            Some("action") => action_exprs.push(e),
            _ => return Err(syntax(e.pos(), "unknown clause")),
        }
    }
    let names = header.names.ok_or(ModelError::MissingClause("variables"))?;
    let gamma = header.gamma.ok_or(ModelError::MissingClause("discount"))?;
    let start = full_state(&names, &header.start.ok_or(ModelError::MissingClause("start"))?, "start")?;
    let absorbing = header
        .absorbing
        .map(|bits| full_state(&names, &bits, "absorbing"))
        .transpose()?;
    if !(0.0..=1.0).contains(&gamma) {
        return Err(ModelError::DiscountRange(gamma));
    }
    if gamma == 1.0 && absorbing.is_none() {
        return Err(ModelError::DiscountOneWithoutGoal);
    }
    let mut mgr = Manager::new(names.len())?;
    let mut actions: Vec<ActionSpec> = Vec::new();
    for e in action_exprs {
        let items = e.as_list().unwrap_or_default();
        let action = parse_action(&mut mgr, &names, items, e.pos())?;
        if actions.iter().any(|a| a.name == action.name) {
            return Err(ModelError::DuplicateAction { name: action.name, pos: e.pos() });
        }
        actions.push(action);
    }
    if actions.is_empty() {
        return Err(ModelError::MissingClause("action"));
    }
    let m = FactoredMdp::new(names, gamma, start, actions, absorbing)?;
    Ok((mgr, m))
}

// ---------------------------------------------------------------------------
// Serialization

fn write_tree(mgr: &Manager, names: &[String], d: Diagram, out: &mut String) {
    match mgr.node(d) {
        Node::Leaf(v) => write!(out, "{v:?}").unwrap(),
        Node::Internal { var, hi, lo } => {
            write!(out, "({} ", names[var.state_var()]).unwrap();
            write_tree(mgr, names, hi, out);
            out.push(' ');
            write_tree(mgr, names, lo, out);
            out.push(')');
        }
    }
}

fn write_bits(names: &[String], s: &StateAssignment, out: &mut String) {
    for (i, name) in names.iter().enumerate() {
        write!(out, " ({name} {})", s.get(i) as u8).unwrap();
    }
}

/// Model text that [`parse_model`] reads back to the same functions.
pub fn serialize_model(mgr: &Manager, m: &FactoredMdp) -> String {
    let mut out = String::new();
    writeln!(out, "(variables {})", m.names.join(" ")).unwrap();
    writeln!(out, "(discount {:?})", m.gamma).unwrap();
    out.push_str("(start");
    write_bits(&m.names, &m.start, &mut out);
    out.push_str(")\n");
    if let Some(g) = &m.absorbing {
        out.push_str("(absorbing");
        write_bits(&m.names, g, &mut out);
        out.push_str(")\n");
    }
    for action in &m.actions {
        writeln!(out, "(action {}", action.name).unwrap();
        for (name, &cpt) in m.names.iter().zip(&action.cpts) {
            write!(out, "  ({name} ").unwrap();
            write_tree(mgr, &m.names, cpt, &mut out);
            out.push_str(")\n");
        }
        out.push_str("  (reward ");
        write_tree(mgr, &m.names, action.reward, &mut out);
        out.push_str("))\n");
    }
    out
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    CptOutOfRange { action: String, variable: String, value: f64 },
    RowSum { action: String, leaf: f64 },
    GoalNotAbsorbing { action: String },
    GoalReward { action: String, value: f64 },
    GoalNotCertain,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CptOutOfRange { action, variable, value } => {
                write!(f, "action `{action}`, variable `{variable}`: CPT leaf {value} outside [0, 1]")
            }
            Violation::RowSum { action, leaf } => {
                write!(f, "action `{action}`: transition rows sum to {leaf}, not 1")
            }
            Violation::GoalNotAbsorbing { action } => {
                write!(f, "action `{action}` leaves the absorbing goal state")
            }
            Violation::GoalReward { action, value } => {
                write!(f, "action `{action}` earns {value} in the absorbing goal state")
            }
            Violation::GoalNotCertain => {
                write!(f, "some policy avoids the absorbing goal state with positive probability")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks CPT ranges, transition normalization and, for undiscounted
/// models, the absorbing-goal proviso.
pub fn validate_model(mgr: &mut Manager, m: &FactoredMdp) -> ValidationReport {
    let mut violations = Vec::new();
    let primed = VarSet::all_primed(m.num_vars());
    let mut cpt_ok = true;
    for (a, action) in m.actions.iter().enumerate() {
        for (i, &cpt) in action.cpts.iter().enumerate() {
            for value in mgr.leaf_values(cpt) {
                if !(0.0..=1.0).contains(&value) {
                    cpt_ok = false;
                    violations.push(Violation::CptOutOfRange {
                        action: action.name.clone(),
                        variable: m.names[i].clone(),
                        value,
                    });
                }
            }
        }
        let p = action_transition(mgr, m, a);
        let rows = mgr.sum_abstract(p, primed);
        for leaf in mgr.leaf_values(rows) {
            if (leaf - 1.0).abs() > ROW_SUM_TOLERANCE {
                violations.push(Violation::RowSum { action: action.name.clone(), leaf });
            }
        }
    }
    if let (Some(goal), true) = (m.absorbing, cpt_ok) {
        check_goal(mgr, m, &goal, &mut violations);
    }
    ValidationReport { violations }
}

fn check_goal(mgr: &mut Manager, m: &FactoredMdp, goal: &StateAssignment, violations: &mut Vec<Violation>) {
    let g = reach::chi_of(mgr, m.num_vars(), &[*goal]);
    for (a, action) in m.actions.iter().enumerate() {
        let succ = reach::img_action(mgr, m, a, &g);
        if succ != g {
            violations.push(Violation::GoalNotAbsorbing { action: action.name.clone() });
        }
        let r = mgr.value_at(action.reward, goal);
        if r != 0.0 {
            violations.push(Violation::GoalReward { action: action.name.clone(), value: r });
        }
    }
    // States from which some policy can avoid the goal forever:
    // Z = ¬G ∧ ∨_a {s | succ_a(s) ⊆ Z}, a greatest fixpoint.
    let mut avoid = reach::complement(mgr, &g);
    loop {
        let outside = reach::complement(mgr, &avoid);
        let mut stay = mgr.zero();
        for a in 0..m.num_actions() {
            let leaks = reach::preimg_action(mgr, m, a, &outside);
            let keeps = mgr.not(leaks.chi);
            stay = mgr.or(stay, keeps);
        }
        let next = mgr.and(avoid.chi, stay);
        if next == avoid.chi {
            break;
        }
        avoid = reach::StateSet { chi: next };
    }
    let start = reach::chi_of(mgr, m.num_vars(), &[m.start]);
    let reachable = reach::reachable_from(mgr, m, &start);
    if mgr.and(reachable.chi, avoid.chi) != mgr.zero() {
        violations.push(Violation::GoalNotCertain);
    }
}

/// Live-node floor for [`maintain`].
pub const GC_FLOOR: usize = 2_000_000;
/// Cache entries above which [`maintain`] drops the operation caches.
pub const CACHE_LIMIT: usize = 4_000_000;

/// Between-step housekeeping: collects garbage keeping the diagrams of
/// `models` and `extra` alive, or just drops oversized caches.
pub fn maintain(mgr: &mut Manager, models: &[&FactoredMdp], extra: &[Diagram]) {
    if mgr.wants_collection(GC_FLOOR) {
        let mut roots: Vec<Diagram> = models.iter().flat_map(|m| m.diagrams()).collect();
        roots.extend_from_slice(extra);
        mgr.collect_garbage(&roots);
    } else if mgr.cache_len() > CACHE_LIMIT {
        mgr.clear_caches();
    }
}
