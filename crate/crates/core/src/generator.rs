//! Seeded random factored MDPs with a fixed shape: each action touches a
//! few variables, everything else persists, rewards are small trees.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diagram::{Diagram, Manager, StateAssignment, VarId, MAX_STATE_VARS};
use crate::model::{ActionSpec, FactoredMdp, ModelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("need at least one variable and one action")]
    Empty,
    #[error("{0} variables exceeds the supported maximum of {MAX_STATE_VARS}")]
    TooManyVariables(usize),
    #[error("max parents {max_parents} exceeds the variable count {vars}")]
    TooManyParents { max_parents: usize, vars: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub vars: usize,
    pub actions: usize,
    pub max_parents: usize,
    pub discount: f64,
    /// Upper bound on the variables one action affects before the
    /// coverage pass.
    pub max_affected: usize,
    /// Depth of the reward trees, which split on the action's own
    /// affected variables.
    pub reward_depth: usize,
}

impl GeneratorConfig {
    pub fn new(seed: u64, vars: usize, actions: usize, max_parents: usize) -> Self {
        GeneratorConfig { seed, vars, actions, max_parents, discount: 0.9, max_affected: 3, reward_depth: 1 }
    }
}

pub fn generate_problem(
    seed: u64,
    vars: usize,
    actions: usize,
    max_parents: usize,
) -> Result<(Manager, FactoredMdp), GeneratorError> {
    generate_with(&GeneratorConfig::new(seed, vars, actions, max_parents))
}

/// Full binary tree over `vars` (root first) with leaves from `leaf`.
fn random_tree(mgr: &mut Manager, vars: &[usize], leaf: &mut impl FnMut() -> f64) -> Diagram {
    match vars.split_first() {
        None => mgr.mk_const(leaf()).expect("finite leaf"),
        Some((&v, rest)) => {
            let hi = random_tree(mgr, rest, leaf);
            let lo = random_tree(mgr, rest, leaf);
            mgr.ite_var(VarId::unprimed(v), hi, lo).expect("unprimed tree")
        }
    }
}

fn random_subset(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    index::sample(rng, n, k).into_vec()
}

pub fn generate_with(cfg: &GeneratorConfig) -> Result<(Manager, FactoredMdp), GeneratorError> {
    let n = cfg.vars;
    if n == 0 || cfg.actions == 0 {
        return Err(GeneratorError::Empty);
    }
    if n > MAX_STATE_VARS {
        return Err(GeneratorError::TooManyVariables(n));
    }
    if cfg.max_parents > n {
        return Err(GeneratorError::TooManyParents { max_parents: cfg.max_parents, vars: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut mgr = Manager::new(n).map_err(ModelError::from)?;

    let cap = cfg.max_affected.clamp(1, n);
    let mut affected: Vec<Vec<bool>> = (0..cfg.actions)
        .map(|_| {
            let k = rng.random_range(1..=cap);
            let mut row = vec![false; n];
            for i in random_subset(&mut rng, n, k) {
                row[i] = true;
            }
            row
        })
        .collect();
    for i in 0..n {
        if !affected.iter().any(|row| row[i]) {
            let a = rng.random_range(0..cfg.actions);
            affected[a][i] = true;
        }
    }

    let mut specs = Vec::with_capacity(cfg.actions);
    for (a, row) in affected.iter().enumerate() {
        let mut cpts = Vec::with_capacity(n);
        for (i, &hit) in row.iter().enumerate() {
            let cpt = if hit {
                let k = rng.random_range(0..=cfg.max_parents);
                let mut parents = random_subset(&mut rng, n, k);
                parents.sort_unstable();
                let mut leaf = || rng.random_range(1..=9u32) as f64 / 10.0;
                random_tree(&mut mgr, &parents, &mut leaf)
            } else {
                mgr.mk_literal(VarId::unprimed(i)).map_err(ModelError::from)?
            };
            cpts.push(cpt);
        }
        let own: Vec<usize> = (0..n).filter(|&i| row[i]).collect();
        let depth = cfg.reward_depth.min(own.len());
        let split: Vec<usize> = random_subset(&mut rng, own.len(), depth).into_iter().map(|j| own[j]).collect();
        let mut leaf = || rng.random::<f64>();
        let reward = random_tree(&mut mgr, &split, &mut leaf);
        specs.push(ActionSpec::new(&mut mgr, format!("a{}", a + 1), cpts, reward)?);
    }
    let names = (1..=n).map(|i| format!("x{i}")).collect();
    let m = FactoredMdp::new(names, cfg.discount, StateAssignment::new(n), specs, None)?;
    Ok((mgr, m))
}

/// Indices of variables whose CPT under some action is not the identity.
pub fn affected_variables(mgr: &mut Manager, m: &FactoredMdp) -> Vec<bool> {
    let n = m.num_vars();
    (0..n)
        .map(|i| {
            let lit = mgr.mk_literal(VarId::unprimed(i)).expect("in range");
            m.actions().iter().any(|a| a.cpt(i) != lit)
        })
        .collect()
}
