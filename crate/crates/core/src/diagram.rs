//! Reduced ordered algebraic decision diagrams.
//!
//! A [`Manager`] owns every node. Nodes are hash-consed through a unique
//! table, so two diagrams built in the same manager represent the same
//! function iff their [`Diagram`] handles are equal. Leaves hold `f64`
//! values; a BDD is simply a diagram whose leaves are all `0.0` or `1.0`.
//!
//! The variable order is fixed and interleaved: state variable `i` is
//! [`VarId::unprimed(i)`] at position `2i` and its next-state copy
//! [`VarId::primed(i)`] at position `2i + 1`.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rustc_hash::FxHashMap;
use thiserror::Error;

/// Largest number of state variables a manager accepts (`2n` variables must
/// fit a 64-bit variable set).
pub const MAX_STATE_VARS: usize = 32;

/// Handle to a node owned by a [`Manager`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Diagram(u32);

impl Diagram {
    pub fn index(self) -> u32 {
        self.0
    }
}

/// Position of a variable in the global order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct VarId(u32);

impl VarId {
    const LEAF_LEVEL: u32 = u32::MAX;

    pub fn from_index(index: u32) -> Self {
        VarId(index)
    }

    /// Current-state variable `X_i`.
    pub fn unprimed(state_var: usize) -> Self {
        VarId(2 * state_var as u32)
    }

    /// Next-state variable `X'_i`.
    pub fn primed(state_var: usize) -> Self {
        VarId(2 * state_var as u32 + 1)
    }

    pub fn index(self) -> u32 {
        self.0
    }

    /// Index of the state variable this diagram variable belongs to.
    pub fn state_var(self) -> usize {
        (self.0 / 2) as usize
    }

    pub fn is_primed(self) -> bool {
        self.0 % 2 == 1
    }

    pub fn prime(self) -> Self {
        VarId(self.0 | 1)
    }

    pub fn unprime(self) -> Self {
        VarId(self.0 & !1)
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_primed() {
            write!(f, "x{}'", self.state_var() + 1)
        } else {
            write!(f, "x{}", self.state_var() + 1)
        }
    }
}

/// A set of diagram variables, stored as a bit mask over variable indices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub struct VarSet(u64);

impl VarSet {
    pub fn empty() -> Self {
        VarSet(0)
    }

    pub fn all_unprimed(n: usize) -> Self {
        (0..n).map(VarId::unprimed).collect()
    }

    pub fn all_primed(n: usize) -> Self {
        (0..n).map(VarId::primed).collect()
    }

    pub fn insert(&mut self, v: VarId) {
        self.0 |= 1 << v.0;
    }

    pub fn contains(self, v: VarId) -> bool {
        v.0 < 64 && self.0 & (1 << v.0) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    fn lowest(self) -> u32 {
        self.0.trailing_zeros()
    }

    fn without(self, var: u32) -> Self {
        VarSet(self.0 & !(1u64 << var))
    }

    /// Drops every variable strictly above `level` in the order.
    fn below_level(self, level: u32) -> Self {
        if level >= 64 {
            VarSet(0)
        } else {
            VarSet(self.0 & (u64::MAX << level))
        }
    }
}

impl FromIterator<VarId> for VarSet {
    fn from_iter<I: IntoIterator<Item = VarId>>(iter: I) -> Self {
        let mut set = VarSet::empty();
        for v in iter {
            set.insert(v);
        }
        set
    }
}

/// One concrete state: a total assignment to the unprimed variables.
///
/// Rendered as the bit string `b_1 … b_n`, with `x1` first. The derived
/// ordering is lexicographic on that string.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct StateAssignment {
    len: u8,
    bits: u64,
}

impl StateAssignment {
    pub fn new(len: usize) -> Self {
        assert!(len <= MAX_STATE_VARS, "too many state variables");
        StateAssignment { len: len as u8, bits: 0 }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = StateAssignment::new(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            s.set(i, b);
        }
        s
    }

    /// State number `index` in lexicographic order (`x1` is the most
    /// significant bit).
    pub fn from_index(len: usize, index: u64) -> Self {
        let mut s = StateAssignment::new(len);
        for i in 0..len {
            s.set(i, (index >> (len - 1 - i)) & 1 == 1);
        }
        s
    }

    pub fn index(&self) -> u64 {
        (0..self.len()).fold(0, |acc, i| (acc << 1) | self.get(i) as u64)
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len());
        self.bits & (1 << i) != 0
    }

    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len());
        if value {
            self.bits |= 1 << i;
        } else {
            self.bits &= !(1 << i);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// All `2^len` states in lexicographic order.
    pub fn all(len: usize) -> impl Iterator<Item = StateAssignment> {
        (0..1u64 << len).map(move |i| StateAssignment::from_index(len, i))
    }
}

impl PartialOrd for StateAssignment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for StateAssignment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.len, self.index()).cmp(&(other.len, other.index()))
    }
}

impl fmt::Display for StateAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_char(if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl FromStr for StateAssignment {
    type Err = DiagramError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() > MAX_STATE_VARS {
            return Err(DiagramError::BadStateString(s.to_string()));
        }
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(DiagramError::BadStateString(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(StateAssignment::from_bits(&bits))
    }
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub enum Node {
    Leaf(f64),
    Internal { var: VarId, hi: Diagram, lo: Diagram },
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Max,
    Min,
    /// Boolean conjunction; operands must be 0/1-valued.
    And,
    /// Boolean disjunction; operands must be 0/1-valued.
    Or,
    /// Set difference `f ∧ ¬g`; operands must be 0/1-valued.
    Diff,
}

impl BinaryOp {
    fn is_boolean(self) -> bool {
        matches!(self, BinaryOp::And | BinaryOp::Or | BinaryOp::Diff)
    }

    fn is_commutative(self) -> bool {
        !matches!(self, BinaryOp::Sub | BinaryOp::Diff)
    }

    fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Max => "max",
            BinaryOp::Min => "min",
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
            BinaryOp::Diff => "diff",
        }
    }

    fn leaf(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Max => a.max(b),
            BinaryOp::Min => a.min(b),
            BinaryOp::And => a * b,
            BinaryOp::Or => a.max(b),
            BinaryOp::Diff => {
                if a == 1.0 && b == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Leaf-wise transformations; the `u64` payloads are `f64` bit patterns so
/// the op can key the cache.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum LeafMap {
    Not,
    OneMinus,
    Positive,
    BelowOne,
    Scale(u64),
    Threshold(u64, u64),
    Rename,
}

impl LeafMap {
    fn apply(self, v: f64) -> f64 {
        match self {
            LeafMap::Not | LeafMap::OneMinus => 1.0 - v,
            LeafMap::Positive => (v > 0.0) as u8 as f64,
            LeafMap::BelowOne => (v < 1.0) as u8 as f64,
            LeafMap::Scale(c) => f64::from_bits(c) * v,
            LeafMap::Threshold(lo, hi) => {
                (f64::from_bits(lo) <= v && v <= f64::from_bits(hi)) as u8 as f64
            }
            LeafMap::Rename => v,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Abstraction {
    Sum,
    Or,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagramError {
    #[error("leaf value {0} is not finite")]
    NonFinite(f64),
    #[error("variable index {var} out of range (manager has {limit} variables)")]
    VarOutOfRange { var: u32, limit: u32 },
    #[error("variable {var} must precede every variable of its children (found {child})")]
    OrderViolation { var: VarId, child: VarId },
    #[error("operation `{0}` requires 0/1-valued diagrams")]
    NotBoolean(&'static str),
    #[error("diagram mixes primed and unprimed variables")]
    MixedSupport,
    #[error("diagram must range over unprimed variables only")]
    PrimedSupport,
    #[error("empty interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("assignment does not cover variable {0}")]
    MissingVariable(VarId),
    #[error("at most {MAX_STATE_VARS} state variables are supported, got {0}")]
    TooManyVariables(usize),
    #[error("`{0}` is not a bit string")]
    BadStateString(String),
    #[error("state has {got} bits, expected {expected}")]
    StateLength { got: usize, expected: usize },
}

/// Owner of all nodes plus the unique table and operation caches.
///
/// All diagrams handed out by one manager must be combined through that
/// same manager. Caches grow without bound until [`Manager::clear_caches`].
pub struct Manager {
    num_state_vars: usize,
    nodes: Vec<Node>,
    unique: FxHashMap<(VarId, Diagram, Diagram), Diagram>,
    leaves: FxHashMap<u64, Diagram>,
    binary_cache: FxHashMap<(BinaryOp, Diagram, Diagram), Diagram>,
    map_cache: FxHashMap<(LeafMap, Diagram), Diagram>,
    abstract_cache: FxHashMap<(Abstraction, Diagram, VarSet), Diagram>,
    and_exists_cache: FxHashMap<(Diagram, Diagram, VarSet), Diagram>,
    restrict_cache: FxHashMap<(Diagram, VarId, bool), Diagram>,
    frame_cache: FxHashMap<(Diagram, VarSet), Diagram>,
    boolean: FxHashMap<Diagram, bool>,
    free: Vec<u32>,
    live_after_gc: usize,
    protected: FxHashMap<Diagram, usize>,
    zero: Diagram,
    one: Diagram,
}

impl fmt::Debug for Manager {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Manager")
            .field("num_state_vars", &self.num_state_vars)
            .field("nodes", &self.node_count())
            .finish()
    }
}

impl Manager {
    pub fn new(num_state_vars: usize) -> Result<Self, DiagramError> {
        if num_state_vars > MAX_STATE_VARS {
            return Err(DiagramError::TooManyVariables(num_state_vars));
        }
        let mut m = Manager {
            num_state_vars,
            nodes: Vec::new(),
            unique: FxHashMap::default(),
            leaves: FxHashMap::default(),
            binary_cache: FxHashMap::default(),
            map_cache: FxHashMap::default(),
            abstract_cache: FxHashMap::default(),
            and_exists_cache: FxHashMap::default(),
            restrict_cache: FxHashMap::default(),
            frame_cache: FxHashMap::default(),
            boolean: FxHashMap::default(),
            free: Vec::new(),
            live_after_gc: 0,
            protected: FxHashMap::default(),
            zero: Diagram(0),
            one: Diagram(0),
        };
        m.zero = m.leaf(0.0);
        m.one = m.leaf(1.0);
        Ok(m)
    }

    pub fn num_state_vars(&self) -> usize {
        self.num_state_vars
    }

    /// Live nodes, leaves included.
    pub fn node_count(&self) -> usize {
        self.nodes.len() - self.free.len()
    }

    /// Frees every node not reachable from `roots` and clears the caches.
    /// Handles to freed nodes become invalid and may later be reused, so
    /// every diagram still in use must be listed. Returns the number of
    /// nodes freed.
    pub fn collect_garbage(&mut self, roots: &[Diagram]) -> usize {
        let mut marked = vec![false; self.nodes.len()];
        let mut stack: Vec<Diagram> = roots.to_vec();
        stack.extend(self.protected.keys().copied());
        stack.push(self.zero);
        stack.push(self.one);
        while let Some(d) = stack.pop() {
            let i = d.0 as usize;
            if marked[i] {
                continue;
            }
            marked[i] = true;
            if let Node::Internal { hi, lo, .. } = self.nodes[i] {
                stack.push(hi);
                stack.push(lo);
            }
        }
        self.clear_caches();
        let mut freed = 0;
        for (i, &keep) in marked.iter().enumerate() {
            if keep {
                continue;
            }
            match self.nodes[i] {
                Node::Leaf(v) if v.is_nan() => continue,
                Node::Leaf(v) => {
                    self.leaves.remove(&v.to_bits());
                }
                Node::Internal { var, hi, lo } => {
                    self.unique.remove(&(var, hi, lo));
                }
            }
            self.nodes[i] = Node::Leaf(f64::NAN);
            self.free.push(i as u32);
            freed += 1;
        }
        self.live_after_gc = self.node_count();
        freed
    }

    /// True once live nodes exceed both `floor` and twice the live count
    /// left by the previous collection.
    pub fn wants_collection(&self, floor: usize) -> bool {
        self.node_count() > floor.max(2 * self.live_after_gc)
    }

    /// Keeps `f` alive across collections until a matching
    /// [`Manager::unprotect`].
    pub fn protect(&mut self, f: Diagram) {
        *self.protected.entry(f).or_insert(0) += 1;
    }

    pub fn unprotect(&mut self, f: Diagram) {
        if let Some(n) = self.protected.get_mut(&f) {
            *n -= 1;
            if *n == 0 {
                self.protected.remove(&f);
            }
        }
    }

    fn alloc(&mut self, node: Node) -> Diagram {
        match self.free.pop() {
            Some(i) => {
                self.nodes[i as usize] = node;
                Diagram(i)
            }
            None => {
                self.nodes.push(node);
                Diagram(self.nodes.len() as u32 - 1)
            }
        }
    }

    pub fn cache_len(&self) -> usize {
        self.binary_cache.len()
            + self.map_cache.len()
            + self.abstract_cache.len()
            + self.and_exists_cache.len()
            + self.restrict_cache.len()
            + self.frame_cache.len()
    }

    pub fn clear_caches(&mut self) {
        self.binary_cache.clear();
        self.map_cache.clear();
        self.abstract_cache.clear();
        self.and_exists_cache.clear();
        self.restrict_cache.clear();
        self.frame_cache.clear();
        self.boolean.clear();
    }

    pub fn zero(&self) -> Diagram {
        self.zero
    }

    pub fn one(&self) -> Diagram {
        self.one
    }

    pub fn node(&self, f: Diagram) -> Node {
        self.nodes[f.0 as usize]
    }

    pub fn leaf_value(&self, f: Diagram) -> Option<f64> {
        match self.node(f) {
            Node::Leaf(v) => Some(v),
            Node::Internal { .. } => None,
        }
    }

    pub fn is_leaf(&self, f: Diagram) -> bool {
        matches!(self.node(f), Node::Leaf(_))
    }

    fn level(&self, f: Diagram) -> u32 {
        match self.node(f) {
            Node::Leaf(_) => VarId::LEAF_LEVEL,
            Node::Internal { var, .. } => var.0,
        }
    }

    /// Top variable of `f`, `None` for a leaf.
    pub fn top_var(&self, f: Diagram) -> Option<VarId> {
        match self.node(f) {
            Node::Leaf(_) => None,
            Node::Internal { var, .. } => Some(var),
        }
    }

    fn cofactors(&self, f: Diagram, level: u32) -> (Diagram, Diagram) {
        match self.node(f) {
            Node::Internal { var, hi, lo } if var.0 == level => (hi, lo),
            _ => (f, f),
        }
    }

    fn check_var(&self, v: VarId) -> Result<(), DiagramError> {
        let limit = 2 * self.num_state_vars as u32;
        if v.0 < limit {
            Ok(())
        } else {
            Err(DiagramError::VarOutOfRange { var: v.0, limit })
        }
    }

    // Leaves are keyed by bit pattern; `+ 0.0` folds -0.0 into 0.0.
    fn leaf(&mut self, value: f64) -> Diagram {
        let value = value + 0.0;
        let key = value.to_bits();
        if let Some(&d) = self.leaves.get(&key) {
            return d;
        }
        let d = self.alloc(Node::Leaf(value));
        self.leaves.insert(key, d);
        d
    }

    fn make_node(&mut self, var: VarId, hi: Diagram, lo: Diagram) -> Diagram {
        if hi == lo {
            return hi;
        }
        debug_assert!(var.0 < self.level(hi) && var.0 < self.level(lo));
        if let Some(&d) = self.unique.get(&(var, hi, lo)) {
            return d;
        }
        let d = self.alloc(Node::Internal { var, hi, lo });
        self.unique.insert((var, hi, lo), d);
        d
    }

    /// The unique constant diagram for `value`.
    pub fn mk_const(&mut self, value: f64) -> Result<Diagram, DiagramError> {
        if !value.is_finite() {
            return Err(DiagramError::NonFinite(value));
        }
        Ok(self.leaf(value))
    }

    /// Indicator of `v`: 1 where `v` is true, 0 elsewhere.
    pub fn mk_literal(&mut self, v: VarId) -> Result<Diagram, DiagramError> {
        self.check_var(v)?;
        Ok(self.make_node(v, self.one, self.zero))
    }

    /// Reduced node `(v ? hi : lo)`; `v` must precede the children's top
    /// variables.
    pub fn ite_node(&mut self, v: VarId, hi: Diagram, lo: Diagram) -> Result<Diagram, DiagramError> {
        self.check_var(v)?;
        for child in [hi, lo] {
            if let Some(cv) = self.top_var(child) {
                if cv <= v {
                    return Err(DiagramError::OrderViolation { var: v, child: cv });
                }
            }
        }
        Ok(self.make_node(v, hi, lo))
    }

    /// `(v ? hi : lo)` for children in any order, built with arithmetic.
    pub fn ite_var(&mut self, v: VarId, hi: Diagram, lo: Diagram) -> Result<Diagram, DiagramError> {
        let lit = self.mk_literal(v)?;
        let not_lit = self.make_node(v, self.zero, self.one);
        let a = self.apply_rec(BinaryOp::Mul, lit, hi);
        let b = self.apply_rec(BinaryOp::Mul, not_lit, lo);
        Ok(self.apply_rec(BinaryOp::Add, a, b))
    }

    /// Whether every leaf of `f` is 0 or 1.
    pub fn is_boolean(&mut self, f: Diagram) -> bool {
        if let Some(&b) = self.boolean.get(&f) {
            return b;
        }
        let b = match self.node(f) {
            Node::Leaf(v) => v == 0.0 || v == 1.0,
            Node::Internal { hi, lo, .. } => self.is_boolean(hi) && self.is_boolean(lo),
        };
        self.boolean.insert(f, b);
        b
    }

    /// Pointwise `op(f, g)`.
    pub fn apply(&mut self, op: BinaryOp, f: Diagram, g: Diagram) -> Result<Diagram, DiagramError> {
        if op.is_boolean() && !(self.is_boolean(f) && self.is_boolean(g)) {
            return Err(DiagramError::NotBoolean(op.name()));
        }
        Ok(self.apply_rec(op, f, g))
    }

    pub fn add(&mut self, f: Diagram, g: Diagram) -> Diagram {
        self.apply_rec(BinaryOp::Add, f, g)
    }

    pub fn sub(&mut self, f: Diagram, g: Diagram) -> Diagram {
        self.apply_rec(BinaryOp::Sub, f, g)
    }

    pub fn mul(&mut self, f: Diagram, g: Diagram) -> Diagram {
        self.apply_rec(BinaryOp::Mul, f, g)
    }

    pub fn max(&mut self, f: Diagram, g: Diagram) -> Diagram {
        self.apply_rec(BinaryOp::Max, f, g)
    }

    pub fn min(&mut self, f: Diagram, g: Diagram) -> Diagram {
        self.apply_rec(BinaryOp::Min, f, g)
    }

    // Boolean operations without the 0/1 check, for callers that hold the
    // invariant by construction (state sets).
    pub(crate) fn and(&mut self, f: Diagram, g: Diagram) -> Diagram {
        self.apply_rec(BinaryOp::And, f, g)
    }

    pub(crate) fn or(&mut self, f: Diagram, g: Diagram) -> Diagram {
        self.apply_rec(BinaryOp::Or, f, g)
    }

    pub(crate) fn diff(&mut self, f: Diagram, g: Diagram) -> Diagram {
        self.apply_rec(BinaryOp::Diff, f, g)
    }

    pub(crate) fn not(&mut self, f: Diagram) -> Diagram {
        self.map_leaves(f, LeafMap::Not)
    }

    fn terminal_case(&self, op: BinaryOp, f: Diagram, g: Diagram) -> Option<Diagram> {
        let (zero, one) = (self.zero, self.one);
        match op {
            BinaryOp::Add if f == zero => Some(g),
            BinaryOp::Add if g == zero => Some(f),
            BinaryOp::Sub if g == zero => Some(f),
            BinaryOp::Sub if f == g => Some(zero),
            BinaryOp::Mul if f == zero || g == zero => Some(zero),
            BinaryOp::Mul if f == one => Some(g),
            BinaryOp::Mul if g == one => Some(f),
            BinaryOp::Max | BinaryOp::Min if f == g => Some(f),
            BinaryOp::And if f == zero || g == zero => Some(zero),
            BinaryOp::And if f == one || f == g => Some(g),
            BinaryOp::And if g == one => Some(f),
            BinaryOp::Or if f == one || g == one => Some(one),
            BinaryOp::Or if f == zero || f == g => Some(g),
            BinaryOp::Or if g == zero => Some(f),
            BinaryOp::Diff if f == zero || g == one || f == g => Some(zero),
            BinaryOp::Diff if g == zero => Some(f),
            _ => None,
        }
    }

    fn apply_rec(&mut self, op: BinaryOp, f: Diagram, g: Diagram) -> Diagram {
        if let Some(d) = self.terminal_case(op, f, g) {
            return d;
        }
        if let (Node::Leaf(a), Node::Leaf(b)) = (self.node(f), self.node(g)) {
            return self.leaf(op.leaf(a, b));
        }
        let (f, g) = if op.is_commutative() && g < f { (g, f) } else { (f, g) };
        if let Some(&d) = self.binary_cache.get(&(op, f, g)) {
            return d;
        }
        let top = self.level(f).min(self.level(g));
        let (fh, fl) = self.cofactors(f, top);
        let (gh, gl) = self.cofactors(g, top);
        let hi = self.apply_rec(op, fh, gh);
        let lo = self.apply_rec(op, fl, gl);
        let d = self.make_node(VarId(top), hi, lo);
        self.binary_cache.insert((op, f, g), d);
        d
    }

    fn map_leaves(&mut self, f: Diagram, map: LeafMap) -> Diagram {
        if let Some(&d) = self.map_cache.get(&(map, f)) {
            return d;
        }
        let d = match self.node(f) {
            Node::Leaf(v) => self.leaf(map.apply(v)),
            Node::Internal { var, hi, lo } => {
                let h = self.map_leaves(hi, map);
                let l = self.map_leaves(lo, map);
                let var = if map == LeafMap::Rename { VarId(var.0 ^ 1) } else { var };
                self.make_node(var, h, l)
            }
        };
        self.map_cache.insert((map, f), d);
        d
    }

    /// Boolean complement `1 - f`.
    pub fn bdd_not(&mut self, f: Diagram) -> Result<Diagram, DiagramError> {
        if !self.is_boolean(f) {
            return Err(DiagramError::NotBoolean("not"));
        }
        Ok(self.not(f))
    }

    /// Arithmetic complement `1 - f` for any diagram.
    pub fn one_minus(&mut self, f: Diagram) -> Diagram {
        self.map_leaves(f, LeafMap::OneMinus)
    }

    /// `c · f`.
    pub fn scale(&mut self, f: Diagram, c: f64) -> Diagram {
        if c == 1.0 {
            return f;
        }
        self.map_leaves(f, LeafMap::Scale(c.to_bits()))
    }

    /// 0/1 diagram that is 1 where `f > 0`.
    pub fn positive(&mut self, f: Diagram) -> Diagram {
        self.map_leaves(f, LeafMap::Positive)
    }

    /// 0/1 diagram that is 1 where `f < 1`.
    pub fn below_one(&mut self, f: Diagram) -> Diagram {
        self.map_leaves(f, LeafMap::BelowOne)
    }

    /// 0/1 diagram that is 1 exactly where `lo <= f <= hi`.
    pub fn threshold_to_bdd(&mut self, f: Diagram, lo: f64, hi: f64) -> Result<Diagram, DiagramError> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(DiagramError::InvalidInterval { lo, hi });
        }
        Ok(self.map_leaves(f, LeafMap::Threshold(lo.to_bits(), hi.to_bits())))
    }

    fn support_kind(&self, f: Diagram) -> (bool, bool) {
        let (mut unprimed, mut primed) = (false, false);
        for var in self.support(f) {
            if var.is_primed() {
                primed = true;
            } else {
                unprimed = true;
            }
        }
        (unprimed, primed)
    }

    /// Renames `X_i ↔ X'_i`. The support must be all unprimed or all primed.
    pub fn swap_prime(&mut self, f: Diagram) -> Result<Diagram, DiagramError> {
        if let (true, true) = self.support_kind(f) {
            return Err(DiagramError::MixedSupport);
        }
        Ok(self.map_leaves(f, LeafMap::Rename))
    }

    /// Cofactor `f|_{v=value}`.
    pub fn restrict(&mut self, f: Diagram, v: VarId, value: bool) -> Result<Diagram, DiagramError> {
        self.check_var(v)?;
        Ok(self.restrict_rec(f, v, value))
    }

    fn restrict_rec(&mut self, f: Diagram, v: VarId, value: bool) -> Diagram {
        let Node::Internal { var, hi, lo } = self.node(f) else {
            return f;
        };
        if var > v {
            return f;
        }
        if var == v {
            return if value { hi } else { lo };
        }
        if let Some(&d) = self.restrict_cache.get(&(f, v, value)) {
            return d;
        }
        let h = self.restrict_rec(hi, v, value);
        let l = self.restrict_rec(lo, v, value);
        let d = self.make_node(var, h, l);
        self.restrict_cache.insert((f, v, value), d);
        d
    }

    /// Sum over all assignments to `vars`.
    pub fn exists_abstract(&mut self, f: Diagram, vars: &[VarId]) -> Result<Diagram, DiagramError> {
        for &v in vars {
            self.check_var(v)?;
        }
        Ok(self.sum_abstract(f, vars.iter().copied().collect()))
    }

    /// Disjunction over all assignments to `vars`; `f` must be 0/1-valued.
    pub fn or_abstract(&mut self, f: Diagram, vars: &[VarId]) -> Result<Diagram, DiagramError> {
        for &v in vars {
            self.check_var(v)?;
        }
        if !self.is_boolean(f) {
            return Err(DiagramError::NotBoolean("or-abstract"));
        }
        Ok(self.abstract_rec(Abstraction::Or, f, vars.iter().copied().collect()))
    }

    pub(crate) fn sum_abstract(&mut self, f: Diagram, vars: VarSet) -> Diagram {
        self.abstract_rec(Abstraction::Sum, f, vars)
    }

    pub(crate) fn or_abstract_set(&mut self, f: Diagram, vars: VarSet) -> Diagram {
        self.abstract_rec(Abstraction::Or, f, vars)
    }

    fn abstract_rec(&mut self, kind: Abstraction, f: Diagram, vars: VarSet) -> Diagram {
        let level = self.level(f);
        // Or-abstraction of a variable outside the support is the identity.
        let vars = match kind {
            Abstraction::Or => vars.below_level(level),
            Abstraction::Sum => vars,
        };
        if vars.is_empty() {
            return f;
        }
        if let Some(&d) = self.abstract_cache.get(&(kind, f, vars)) {
            return d;
        }
        let lowest = vars.lowest();
        let d = if lowest < level {
            // Sum over a variable f does not depend on: 2·f.
            let r = self.abstract_rec(kind, f, vars.without(lowest));
            self.add(r, r)
        } else {
            let (hi, lo) = self.cofactors(f, level);
            if lowest == level {
                let rest = vars.without(lowest);
                let h = self.abstract_rec(kind, hi, rest);
                if kind == Abstraction::Or && h == self.one {
                    h
                } else {
                    let l = self.abstract_rec(kind, lo, rest);
                    match kind {
                        Abstraction::Sum => self.add(h, l),
                        Abstraction::Or => self.or(h, l),
                    }
                }
            } else {
                let h = self.abstract_rec(kind, hi, vars);
                let l = self.abstract_rec(kind, lo, vars);
                self.make_node(VarId(level), h, l)
            }
        };
        self.abstract_cache.insert((kind, f, vars), d);
        d
    }

    /// `∃_{x'_i} [x'_i = x_i] · f` for every primed `x'_i` in `frame`, in
    /// one pass: each such `x'_i` is replaced by `x_i`. The result is exact,
    /// since the identity factor only selects a cofactor.
    pub(crate) fn substitute_frame(&mut self, f: Diagram, frame: VarSet) -> Diagram {
        if frame.is_empty() {
            return f;
        }
        let last = 63 - frame.0.leading_zeros();
        self.frame_rec(f, frame, last)
    }

    fn frame_rec(&mut self, f: Diagram, frame: VarSet, last: u32) -> Diagram {
        let (var, hi, lo) = match self.node(f) {
            Node::Internal { var, hi, lo } if var.0 <= last => (var, hi, lo),
            _ => return f,
        };
        if let Some(&d) = self.frame_cache.get(&(f, frame)) {
            return d;
        }
        let d = if !var.is_primed() && frame.contains(var.prime()) {
            // x_i directly above x'_i: keep only the agreeing branches.
            let below = var.prime().0;
            let (h, _) = self.cofactors(hi, below);
            let (_, l) = self.cofactors(lo, below);
            let h = self.frame_rec(h, frame, last);
            let l = self.frame_rec(l, frame, last);
            self.make_node(var, h, l)
        } else {
            let h = self.frame_rec(hi, frame, last);
            let l = self.frame_rec(lo, frame, last);
            let var = if frame.contains(var) { var.unprime() } else { var };
            self.make_node(var, h, l)
        };
        self.frame_cache.insert((f, frame), d);
        d
    }

    /// Relational product `∃ vars. f ∧ g` for 0/1 diagrams.
    pub(crate) fn and_exists(&mut self, f: Diagram, g: Diagram, vars: VarSet) -> Diagram {
        let (zero, one) = (self.zero, self.one);
        if f == zero || g == zero {
            return zero;
        }
        if f == one && g == one {
            return one;
        }
        let top = self.level(f).min(self.level(g));
        let vars = vars.below_level(top);
        if vars.is_empty() {
            return self.and(f, g);
        }
        if f == one {
            return self.or_abstract_set(g, vars);
        }
        if g == one || f == g {
            return self.or_abstract_set(f, vars);
        }
        let (f, g) = if g < f { (g, f) } else { (f, g) };
        if let Some(&d) = self.and_exists_cache.get(&(f, g, vars)) {
            return d;
        }
        let (fh, fl) = self.cofactors(f, top);
        let (gh, gl) = self.cofactors(g, top);
        let d = if vars.contains(VarId(top)) {
            let h = self.and_exists(fh, gh, vars);
            if h == one {
                one
            } else {
                let l = self.and_exists(fl, gl, vars);
                self.or(h, l)
            }
        } else {
            let h = self.and_exists(fh, gh, vars);
            let l = self.and_exists(fl, gl, vars);
            self.make_node(VarId(top), h, l)
        };
        self.and_exists_cache.insert((f, g, vars), d);
        d
    }

    /// Follows `state` (unprimed) and `next` (primed) down to a leaf.
    pub fn eval(
        &self,
        f: Diagram,
        state: &StateAssignment,
        next: Option<&StateAssignment>,
    ) -> Result<f64, DiagramError> {
        let mut cur = f;
        loop {
            match self.node(cur) {
                Node::Leaf(v) => return Ok(v),
                Node::Internal { var, hi, lo } => {
                    let i = var.state_var();
                    let source = if var.is_primed() { next } else { Some(state) };
                    let bit = match source {
                        Some(s) if i < s.len() => s.get(i),
                        _ => return Err(DiagramError::MissingVariable(var)),
                    };
                    cur = if bit { hi } else { lo };
                }
            }
        }
    }

    /// `f(s)` for a diagram over unprimed variables. Panics when `f` reads a
    /// primed variable or a variable `s` does not cover.
    pub fn value_at(&self, f: Diagram, s: &StateAssignment) -> f64 {
        self.eval(f, s, None).expect("diagram must range over the state's variables")
    }

    /// States where the 0/1 diagram `f` (over unprimed variables) is 1, in
    /// lexicographic order.
    pub fn enumerate_states(&mut self, f: Diagram) -> Result<Vec<StateAssignment>, DiagramError> {
        if !self.is_boolean(f) {
            return Err(DiagramError::NotBoolean("enumerate"));
        }
        if self.support_kind(f).1 {
            return Err(DiagramError::PrimedSupport);
        }
        let mut out = Vec::new();
        let mut cur = StateAssignment::new(self.num_state_vars);
        self.enumerate_rec(f, 0, &mut cur, &mut out);
        Ok(out)
    }

    fn enumerate_rec(&self, f: Diagram, i: usize, cur: &mut StateAssignment, out: &mut Vec<StateAssignment>) {
        if f == self.zero {
            return;
        }
        if i == self.num_state_vars {
            out.push(*cur);
            return;
        }
        let (hi, lo) = self.cofactors(f, VarId::unprimed(i).0);
        cur.set(i, false);
        self.enumerate_rec(lo, i + 1, cur, out);
        cur.set(i, true);
        self.enumerate_rec(hi, i + 1, cur, out);
        cur.set(i, false);
    }

    /// Number of states (over the unprimed variables) where `f` is nonzero.
    pub fn count_states(&self, f: Diagram) -> f64 {
        let mut memo = FxHashMap::default();
        self.count_rec(f, 0, &mut memo)
    }

    fn count_rec(&self, f: Diagram, i: usize, memo: &mut FxHashMap<(Diagram, usize), f64>) -> f64 {
        if f == self.zero {
            return 0.0;
        }
        if i == self.num_state_vars {
            return 1.0;
        }
        if let Some(&c) = memo.get(&(f, i)) {
            return c;
        }
        let (hi, lo) = self.cofactors(f, VarId::unprimed(i).0);
        let c = self.count_rec(hi, i + 1, memo) + self.count_rec(lo, i + 1, memo);
        memo.insert((f, i), c);
        c
    }

    /// Copy of `f` (over unprimed variables) with the value at `s` replaced.
    pub fn set_value(&mut self, f: Diagram, s: &StateAssignment, value: f64) -> Result<Diagram, DiagramError> {
        if !value.is_finite() {
            return Err(DiagramError::NonFinite(value));
        }
        if self.support_kind(f).1 {
            return Err(DiagramError::PrimedSupport);
        }
        if s.len() != self.num_state_vars {
            return Err(DiagramError::StateLength { got: s.len(), expected: self.num_state_vars });
        }
        Ok(self.set_value_rec(f, s, 0, value))
    }

    fn set_value_rec(&mut self, f: Diagram, s: &StateAssignment, i: usize, value: f64) -> Diagram {
        if i == self.num_state_vars {
            return self.leaf(value);
        }
        let var = VarId::unprimed(i);
        let (hi, lo) = self.cofactors(f, var.0);
        if s.get(i) {
            let h = self.set_value_rec(hi, s, i + 1, value);
            self.make_node(var, h, lo)
        } else {
            let l = self.set_value_rec(lo, s, i + 1, value);
            self.make_node(var, hi, l)
        }
    }

    /// Nodes reachable from `f`, in depth-first order (children first).
    pub fn reachable_nodes(&self, f: Diagram) -> Vec<Diagram> {
        let mut seen = rustc_hash::FxHashSet::default();
        let mut order = Vec::new();
        let mut stack = vec![(f, false)];
        while let Some((d, expanded)) = stack.pop() {
            if expanded {
                order.push(d);
                continue;
            }
            if !seen.insert(d) {
                continue;
            }
            stack.push((d, true));
            if let Node::Internal { hi, lo, .. } = self.node(d) {
                stack.push((lo, false));
                stack.push((hi, false));
            }
        }
        order
    }

    pub fn size(&self, f: Diagram) -> usize {
        self.reachable_nodes(f).len()
    }

    /// Variables `f` depends on, in order.
    pub fn support(&self, f: Diagram) -> Vec<VarId> {
        let mut vars: Vec<VarId> = self
            .reachable_nodes(f)
            .into_iter()
            .filter_map(|d| self.top_var(d))
            .collect();
        vars.sort();
        vars.dedup();
        vars
    }

    /// Distinct leaf values of `f`, ascending.
    pub fn leaf_values(&self, f: Diagram) -> Vec<f64> {
        let mut vals: Vec<f64> = self
            .reachable_nodes(f)
            .into_iter()
            .filter_map(|d| self.leaf_value(d))
            .collect();
        vals.sort_by(f64::total_cmp);
        vals
    }

    pub fn max_leaf(&self, f: Diagram) -> f64 {
        self.leaf_values(f).last().copied().unwrap_or(0.0)
    }

    pub fn min_leaf(&self, f: Diagram) -> f64 {
        self.leaf_values(f).first().copied().unwrap_or(0.0)
    }

    /// `max |f|` over all assignments.
    pub fn sup_norm(&self, f: Diagram) -> f64 {
        self.leaf_values(f).into_iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Structural check: ordered, no redundant tests, no duplicate nodes or
    /// leaves among the nodes reachable from `f`.
    pub fn audit(&self, f: Diagram) -> Result<(), String> {
        let mut triples = rustc_hash::FxHashSet::default();
        let mut leaves = rustc_hash::FxHashSet::default();
        for d in self.reachable_nodes(f) {
            match self.node(d) {
                Node::Leaf(v) if v.is_nan() => return Err(format!("node {} was freed", d.0)),
                Node::Leaf(v) => {
                    if !leaves.insert(v.to_bits()) {
                        return Err(format!("duplicate leaf {v}"));
                    }
                }
                Node::Internal { var, hi, lo } => {
                    if hi == lo {
                        return Err(format!("redundant test on {var} at node {}", d.0));
                    }
                    if var.0 >= self.level(hi) || var.0 >= self.level(lo) {
                        return Err(format!("order violated below node {}", d.0));
                    }
                    if !triples.insert((var, hi, lo)) {
                        return Err(format!("duplicate node ({var}, {}, {})", hi.0, lo.0));
                    }
                }
            }
        }
        Ok(())
    }

    /// Deterministic text dump of the DAG under `f`, one node per line,
    /// children before parents, ids renumbered from 0.
    pub fn dump(&self, f: Diagram) -> String {
        let nodes = self.reachable_nodes(f);
        let ids: FxHashMap<Diagram, usize> = nodes.iter().enumerate().map(|(i, &d)| (d, i)).collect();
        let mut out = String::new();
        for (i, &d) in nodes.iter().enumerate() {
            match self.node(d) {
                Node::Leaf(v) => writeln!(out, "{i} leaf {v:?}").unwrap(),
                Node::Internal { var, hi, lo } => {
                    writeln!(out, "{i} {var} {} {}", ids[&hi], ids[&lo]).unwrap()
                }
            }
        }
        out
    }
}
