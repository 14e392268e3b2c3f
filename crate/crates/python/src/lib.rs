//! Python bindings: load or generate a factored MDP, solve it, and run the
//! planners through the experiment harness.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use symdp_core::dp::{self, HeuristicMode};
use symdp_core::experiment::{run_experiment, Algorithm, ExperimentConfig, ModelSource};
use symdp_core::generator::{generate_with, GeneratorConfig};
use symdp_core::{oracle_value_iteration, parse_model, serialize_model, validate_model, FactoredMdp, Manager};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A factored MDP with its own diagram manager.
#[pyclass(unsendable)]
struct Problem {
    mgr: Manager,
    model: FactoredMdp,
}

/// One CSV row: `(algo, run, trial, cpu_ms, v_start, trial_reward)`.
type Row = (String, usize, usize, f64, f64, Option<f64>);

#[pymethods]
impl Problem {
    /// Parses the s-expression model format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let (mgr, model) = parse_model(text).map_err(value_error)?;
        Ok(Problem { mgr, model })
    }

    #[staticmethod]
    #[pyo3(signature = (seed, vars, actions, max_parents, discount = 0.9))]
    fn generate(seed: u64, vars: usize, actions: usize, max_parents: usize, discount: f64) -> PyResult<Self> {
        let cfg = GeneratorConfig { discount, ..GeneratorConfig::new(seed, vars, actions, max_parents) };
        let (mgr, model) = generate_with(&cfg).map_err(value_error)?;
        Ok(Problem { mgr, model })
    }

    fn serialize(&self) -> String {
        serialize_model(&self.mgr, &self.model)
    }

    /// Violations as messages; empty when the model is valid.
    fn validate(&mut self) -> Vec<String> {
        validate_model(&mut self.mgr, &self.model).violations.iter().map(|v| v.to_string()).collect()
    }

    #[getter]
    fn variables(&self) -> Vec<String> {
        self.model.names().to_vec()
    }

    #[getter]
    fn actions(&self) -> Vec<String> {
        self.model.actions().iter().map(|a| a.name().to_string()).collect()
    }

    #[getter]
    fn discount(&self) -> f64 {
        self.model.gamma()
    }

    #[getter]
    fn start(&self) -> String {
        self.model.start().to_string()
    }

    /// Symbolic value iteration from the admissible heuristic. Returns
    /// `(V(start), iterations)`.
    #[pyo3(signature = (tol = 1e-6, heuristic = "bound"))]
    fn value_iteration(&mut self, tol: f64, heuristic: &str) -> PyResult<(f64, usize)> {
        let mode: HeuristicMode = heuristic.parse().map_err(value_error)?;
        let h = dp::admissible_heuristic(&mut self.mgr, &self.model, mode).map_err(value_error)?;
        let (v, iterations) = dp::value_iteration(&mut self.mgr, &self.model, h, tol).map_err(value_error)?;
        Ok((v.at(&self.mgr, &self.model.start()), iterations))
    }

    /// Tabular optimal values by state string, for up to 16 variables.
    fn oracle(&self) -> PyResult<BTreeMap<String, f64>> {
        let sol = oracle_value_iteration(&self.mgr, &self.model).map_err(value_error)?;
        let n = self.model.num_vars();
        Ok(symdp_core::StateAssignment::all(n).map(|s| (s.to_string(), sol.value(&s))).collect())
    }

    /// Runs a planner and returns its log rows.
    #[pyo3(signature = (
        algo, trials = 100, steps = 20, seed = 0, delta = None, epsilon = 0.1, tol = 1e-6,
        heuristic = "bound", runs = 1
    ))]
    #[allow(clippy::too_many_arguments)]
    fn run(
        &self,
        py: Python<'_>,
        algo: &str,
        trials: usize,
        steps: usize,
        seed: u64,
        delta: Option<f64>,
        epsilon: f64,
        tol: f64,
        heuristic: &str,
        runs: usize,
    ) -> PyResult<Vec<Row>> {
        let algorithm: Algorithm = algo.parse().map_err(value_error)?;
        let config = ExperimentConfig {
            trials,
            steps,
            seed,
            delta,
            epsilon,
            tol,
            heuristic: heuristic.parse().map_err(value_error)?,
            runs,
            ..ExperimentConfig::new(ModelSource::Text(self.serialize()), algorithm)
        };
        let rows = py.detach(|| run_experiment(&config)).map_err(value_error)?;
        Ok(rows
            .into_iter()
            .map(|r| (r.algo.to_string(), r.run, r.trial, r.cpu_ms, r.v_start, r.trial_reward))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(variables={}, actions={}, discount={})",
            self.model.num_vars(),
            self.model.num_actions(),
            self.model.gamma()
        )
    }
}

/// The TinyChain reference model in the text format.
#[pyfunction]
fn tiny_chain() -> &'static str {
    symdp_core::fixtures::TINY_CHAIN
}

#[pymodule]
fn symdp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_function(wrap_pyfunction!(tiny_chain, m)?)?;
    m.add("ALGORITHMS", Algorithm::ALL.iter().map(|a| a.id()).collect::<Vec<_>>())?;
    Ok(())
}
