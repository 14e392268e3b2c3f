//! Small reference models shared by tests, examples and bindings.

/// Two variables, two actions. `flip1` negates `x1` and keeps `x2`;
/// `noisy2` keeps `x1` and sets `x2` with probability 0.9 when `x1` holds,
/// 0.1 otherwise. Reward 1 in state 11 under either action.
pub const TINY_CHAIN: &str = "\
(variables x1 x2) (discount 0.9) (start (x1 0) (x2 0))
(action flip1 (x1 (x1 0.0 1.0)) (x2 (x2 1.0 0.0)) (reward (x1 (x2 1.0 0.0) 0.0)))
(action noisy2 (x1 (x1 1.0 0.0)) (x2 (x1 0.9 0.1)) (reward (x1 (x2 1.0 0.0) 0.0)))
";

/// Optimal values of [`TINY_CHAIN`], solved by hand from the Bellman
/// equations: `V(11) = 1/(1 - 0.81 - 0.0729/0.91) = 9.1`, `V(10) = 8.1`,
/// `V(01) = 0.9·V(11)`, `V(00) = 0.9·V(10)`.
pub const TINY_CHAIN_V_STAR: [(&str, f64); 4] = [("00", 7.29), ("01", 8.19), ("10", 8.1), ("11", 9.1)];
