//! Config-driven sweeps over (method, n, seed) cells.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::scenario::{build_scenario, Scenario, ScenarioParams};
use crate::coverage::{c_inf, chi_sq_coverage, sigma_min_gram};
use crate::data::{sample_trajectories_with, sample_tuples_with, TupleDataset};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::function_class::FunctionClass;
use crate::mdp::{occupancy, policy_return, solve_q, Policy, Target, ValueFunction};
use crate::ope::{self, Estimate, IsMode, ModelSource, VsConfig};
use crate::opt::{self, EvalMode, ModelPessConfig, PessMode, PeviConfig, PspiConfig};
use crate::selection::{bvft_tournament, SelectionReport};

pub const ESTIMATORS: &[&str] = &["is", "wis", "fqe", "brm", "lstdq", "mql", "mwl", "mle"];
pub const OPTIMIZERS: &[&str] = &["fqi", "fpi", "vs_pess", "pspi", "pevi", "model_pess", "model_pess_rel"];
pub const SELECTORS: &[&str] = &["bvft"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRef {
    pub name: String,
    #[serde(default)]
    pub params: ScenarioParams,
}

/// One method with its settings. Missing settings take per-method defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub id: String,
    /// Iteration count for fqe/fqi/fpi/pspi/pevi.
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub ridge: Option<f64>,
    /// Scenario class used as `F`.
    #[serde(default)]
    pub class: Option<String>,
    /// Grid width for bvft.
    #[serde(default)]
    pub eps: Option<f64>,
    /// Constant in the statistical threshold or bonus.
    #[serde(default)]
    pub c: Option<f64>,
}

impl MethodSpec {
    pub fn new(id: &str) -> Self {
        MethodSpec { id: id.to_string(), iterations: None, ridge: None, class: None, eps: None, c: None }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: String,
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioRef,
    #[serde(default)]
    pub estimators: Vec<MethodSpec>,
    #[serde(default)]
    pub optimizers: Vec<MethodSpec>,
    pub n_grid: Vec<usize>,
    pub seeds: usize,
    pub master_seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub output: Option<OutputSpec>,
}

fn default_delta() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn methods(&self) -> impl Iterator<Item = &MethodSpec> {
        self.estimators.iter().chain(&self.optimizers)
    }

    pub fn validate(&self) -> Result<()> {
        if self.estimators.is_empty() && self.optimizers.is_empty() {
            return Err(Error::InvalidParams("config lists no estimators or optimizers".into()));
        }
        if self.seeds == 0 {
            return Err(Error::InvalidParams("seeds must be >= 1".into()));
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(Error::InvalidParams("n_grid must be non-empty and positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParams("delta must lie in (0, 1)".into()));
        }
        for m in &self.estimators {
            if !ESTIMATORS.contains(&m.id.as_str()) && !SELECTORS.contains(&m.id.as_str()) {
                return Err(Error::UnknownIdentifier(m.id.clone()));
            }
        }
        for m in &self.optimizers {
            if !OPTIMIZERS.contains(&m.id.as_str()) {
                return Err(Error::UnknownIdentifier(m.id.clone()));
            }
        }
        Ok(())
    }
}

/// One result row. Optional fields are empty when they do not apply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub estimator: String,
    pub n: usize,
    pub seed: usize,
    pub point: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub truth: Option<f64>,
    pub abs_error: Option<f64>,
    pub j_cp: Option<f64>,
    pub gap: Option<f64>,
    pub c_inf: Option<f64>,
    pub chi_sq: Option<f64>,
    pub sigma_min_d: Option<f64>,
    pub error_code: String,
}

impl ResultRow {
    fn empty(scenario: &str, method: &str, n: usize, seed: usize) -> Self {
        ResultRow {
            scenario: scenario.to_string(),
            estimator: method.to_string(),
            n,
            seed,
            point: None,
            lower: None,
            upper: None,
            truth: None,
            abs_error: None,
            j_cp: None,
            gap: None,
            c_inf: None,
            chi_sq: None,
            sigma_min_d: None,
            error_code: String::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    /// Tournament reports keyed by `method/n/seed`.
    pub selections: BTreeMap<String, SelectionReport>,
}

/// Seed of one cell: the first 8 bytes of a SHA-256 digest of its key.
pub fn cell_seed(master_seed: u64, scenario: &str, method: &str, n: usize, seed_index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(scenario.as_bytes());
    h.update([0u8]);
    h.update(method.as_bytes());
    h.update([0u8]);
    h.update((n as u64).to_le_bytes());
    h.update((seed_index as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

struct Truths {
    j_pi: f64,
    j_cp: f64,
    q_pi: ValueFunction,
    cov_pi: (f64, f64),
    cov_cp: (f64, f64),
    sigma_min_d: Option<f64>,
}

fn truths(sc: &Scenario) -> Result<Truths> {
    let d_d = sc.data_dist.dist();
    let d_pi = occupancy(&sc.mdp, sc.target(), None)?;
    let d_cp = occupancy(&sc.mdp, sc.comparator(), None)?;
    let sigma_min_d = sc.classes.get("F").and_then(|c| c.as_linear()).map(|phi| sigma_min_gram(&phi, d_d));
    Ok(Truths {
        j_pi: policy_return(&sc.mdp, sc.target(), None),
        j_cp: policy_return(&sc.mdp, sc.comparator(), None),
        q_pi: solve_q(&sc.mdp, Target::Policy(sc.target()), 1e-12)?,
        cov_pi: (c_inf(d_pi.dist(), d_d), chi_sq_coverage(d_pi.dist(), d_d)),
        cov_cp: (c_inf(d_cp.dist(), d_d), chi_sq_coverage(d_cp.dist(), d_d)),
        sigma_min_d,
    })
}

/// Iterations needed for `gamma^K v_max` to drop below 1e-6, at least 1.
fn default_iterations(gamma: f64, v_max: f64) -> usize {
    if gamma <= 0.0 {
        return 1;
    }
    ((1e-6 / v_max.max(1e-12)).ln() / gamma.ln()).ceil().clamp(1.0, 2000.0) as usize
}

enum CellOutput {
    Estimate(Estimate),
    Policy(Estimate, Policy),
    Selection(Estimate, SelectionReport),
}

fn run_method(sc: &Scenario, m: &MethodSpec, n: usize, seed: u64, delta: f64, tr: &Truths) -> Result<CellOutput> {
    let spec = sc.mdp.spec();
    let pi = sc.target();
    let class_key = m.class.as_deref().unwrap_or("F");
    let iterations = m.iterations.unwrap_or_else(|| default_iterations(spec.gamma, spec.v_max()));
    let tuples = || -> TupleDataset { sample_tuples_with(Exec::Sequential, &sc.mdp, &sc.data_dist, n, seed) };
    let linear = |key: &str| -> Result<crate::function_class::FeatureMap> {
        sc.class(key)?.as_linear().ok_or_else(|| Error::Unsupported(format!("class {key} is not linear")))
    };
    let out = match m.id.as_str() {
        "is" | "wis" => {
            let h = sc.horizon.ok_or_else(|| Error::Unsupported("scenario has no episode horizon".into()))?;
            let td = sample_trajectories_with(Exec::Sequential, &sc.mdp, &sc.behavior, n, h, seed);
            let mode = if m.id == "is" { IsMode::Plain } else { IsMode::Weighted };
            CellOutput::Estimate(ope::is_estimate(&td, pi, &sc.behavior, mode, spec.gamma)?)
        }
        "fqe" => CellOutput::Estimate(ope::fqe(&spec, sc.class(class_key)?, &tuples(), pi, iterations, m.ridge.unwrap_or(0.0))?.estimate),
        "brm" => CellOutput::Estimate(ope::brm(&spec, sc.class(class_key)?, sc.classes.get("G"), &tuples(), pi)?.estimate),
        "lstdq" => CellOutput::Estimate(ope::lstdq(&spec, &linear(class_key)?, &tuples(), pi, m.ridge.unwrap_or(0.0))?.estimate),
        "mql" => {
            let f = sc.class(class_key)?;
            let w = if matches!(f, FunctionClass::Finite { .. }) { Some(sc.class("W")?) } else { None };
            CellOutput::Estimate(ope::mql(&spec, f, w, &tuples(), pi)?.estimate)
        }
        "mwl" => {
            let w = sc.class("W")?;
            let f = if matches!(w, FunctionClass::Finite { .. }) { Some(sc.class(class_key)?) } else { None };
            CellOutput::Estimate(ope::mwl(&spec, w, f, &tuples(), pi)?.estimate)
        }
        "mle" => {
            let fit = ope::mle_model(&spec, ModelSource::Tabular, &tuples(), Some(&sc.mdp))?;
            let mut est = Estimate::new(ope::model_return(&fit.model, pi));
            if let Some(e) = fit.l1_error {
                est = est.with("l1_error", e);
            }
            CellOutput::Estimate(est)
        }
        "bvft" => {
            let eps = m.eps.unwrap_or(spec.v_max() / 20.0);
            let candidates = planted_candidates(&tr.q_pi, spec.v_max(), 4, 0.3, seed);
            let report = bvft_tournament(Exec::Sequential, &candidates, &tuples(), pi, spec.gamma, eps, spec.v_max())?;
            let est = Estimate::new(ope::plug_in_return(&spec, &candidates[report.winner_index], pi))
                .with("winner_index", report.winner_index as f64);
            CellOutput::Selection(est, report)
        }
        "fqi" => {
            let r = opt::fqi(&spec, sc.class(class_key)?, &tuples(), iterations, m.ridge.unwrap_or(0.0))?;
            CellOutput::Policy(r.value_estimate, r.policy)
        }
        "fpi" => {
            let eval = EvalMode::Fqe { iterations, ridge: m.ridge.unwrap_or(0.0) };
            let r = opt::fpi(&spec, sc.class(class_key)?, &tuples(), m.iterations.unwrap_or(10), eval)?;
            CellOutput::Policy(r.value_estimate, r.policy)
        }
        "vs_pess" => {
            let cfg = VsConfig { delta, c: m.c.unwrap_or(2.0), n_policies: sc.policies.len() };
            let r = opt::pessimistic_search(&spec, &sc.policies, sc.class(class_key)?, &tuples(), cfg)?;
            CellOutput::Policy(r.value_estimate, r.policy)
        }
        "pspi" => {
            let mut cfg = PspiConfig::new(m.iterations.unwrap_or(16));
            cfg.vs = VsConfig { delta, c: m.c.unwrap_or(2.0), n_policies: 1 };
            let r = opt::pspi(&spec, sc.class(class_key)?, &tuples(), &cfg)?;
            CellOutput::Policy(r.result.value_estimate, r.result.policy)
        }
        "pevi" => {
            let phi = match m.class.as_deref() {
                Some(key) => linear(key)?,
                None => sc.features.clone().ok_or_else(|| Error::Unsupported("scenario has no feature map".into()))?,
            };
            let mut cfg = PeviConfig::new(m.iterations.unwrap_or(iterations));
            cfg.delta = delta;
            cfg.beta_c = m.c.unwrap_or(1.0);
            cfg.ridge = m.ridge.unwrap_or(1.0);
            let r = opt::pevi(&spec, &phi, &tuples(), &cfg)?;
            CellOutput::Policy(r.result.value_estimate, r.result.policy)
        }
        "model_pess" | "model_pess_rel" => {
            let cfg = ModelPessConfig { delta, c: m.c.unwrap_or(1.0) };
            let mode = if m.id == "model_pess" { PessMode::Absolute } else { PessMode::Relative(&sc.behavior) };
            let r = opt::model_pessimism(&spec, &sc.models, &sc.policies, &tuples(), cfg, mode)?;
            CellOutput::Policy(r.result.value_estimate, r.result.policy)
        }
        other => return Err(Error::UnknownIdentifier(other.to_string())),
    };
    Ok(out)
}

/// `Q^pi` followed by `count` corrupted copies: each entry moves by at least
/// `min_shift * v_max` in a random direction, then everything is clipped
/// into `[0, v_max]`.
pub fn planted_candidates(q: &ValueFunction, v_max: f64, count: usize, min_shift: f64, seed: u64) -> Vec<ValueFunction> {
    use rand::Rng;
    let mut rng = crate::data::cell_rng(seed, u64::MAX);
    let mut out = vec![q.clone()];
    for _ in 0..count {
        let vals: Vec<f64> = q
            .values()
            .iter()
            .map(|&v| {
                let shift = v_max * rng.gen_range(min_shift..=2.0 * min_shift);
                let up = if v + shift > v_max {
                    false
                } else if v - shift < 0.0 {
                    true
                } else {
                    rng.gen::<bool>()
                };
                (if up { v + shift } else { v - shift }).clamp(0.0, v_max)
            })
            .collect();
        out.push(ValueFunction::new(q.n_states(), q.n_actions(), vals).expect("finite"));
    }
    out
}

fn fill_row(row: &mut ResultRow, out: CellOutput, sc: &Scenario, tr: &Truths) -> Option<SelectionReport> {
    let (est, policy, report) = match out {
        CellOutput::Estimate(e) => (e, None, None),
        CellOutput::Policy(e, p) => (e, Some(p), None),
        CellOutput::Selection(e, r) => (e, None, Some(r)),
    };
    row.point = Some(est.point);
    row.lower = est.lower;
    row.upper = est.upper;
    match policy {
        None => {
            row.truth = Some(tr.j_pi);
            row.abs_error = Some((est.point - tr.j_pi).abs());
            row.c_inf = Some(tr.cov_pi.0);
            row.chi_sq = Some(tr.cov_pi.1);
        }
        Some(p) => {
            let j = policy_return(&sc.mdp, &p, None);
            row.truth = Some(j);
            row.abs_error = Some((est.point - j).abs());
            row.j_cp = Some(tr.j_cp);
            row.gap = Some(tr.j_cp - j);
            row.c_inf = Some(tr.cov_cp.0);
            row.chi_sq = Some(tr.cov_cp.1);
        }
    }
    row.sigma_min_d = tr.sigma_min_d;
    report
}

/// Run every (method, n, seed) cell. Cells are independent and draw from
/// their own hashed seeds, so the table does not depend on `exec`. Failing
/// cells produce a row with `error_code` set.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Exec) -> Result<ResultTable> {
    cfg.validate()?;
    let sc = build_scenario(&cfg.scenario.name, &cfg.scenario.params)?;
    let tr = truths(&sc)?;
    let methods: Vec<&MethodSpec> = cfg.methods().collect();
    let mut cells: Vec<(usize, usize, usize)> = Vec::new();
    for (mi, _) in methods.iter().enumerate() {
        for &n in &cfg.n_grid {
            for s in 0..cfg.seeds {
                cells.push((mi, n, s));
            }
        }
    }
    let results = exec.map_indexed(cells.len(), |i| {
        let (mi, n, s) = cells[i];
        let m = methods[mi];
        let seed = cell_seed(cfg.master_seed, &sc.name, &m.id, n, s);
        let mut row = ResultRow::empty(&sc.name, &m.id, n, s);
        let report = match run_method(&sc, m, n, seed, cfg.delta, &tr) {
            Ok(out) => fill_row(&mut row, out, &sc, &tr),
            Err(e) => {
                log::warn!("cell {}/{n}/{s} failed: {e}", m.id);
                row.error_code = e.code().to_string();
                None
            }
        };
        (row, report)
    });
    let mut table = ResultTable::default();
    for (row, report) in results {
        if let Some(r) = report {
            table.selections.insert(format!("{}/{}/{}", row.estimator, row.n, row.seed), r);
        }
        table.rows.push(row);
    }
    table.rows.sort_by(|a, b| (&a.estimator, a.n, a.seed).cmp(&(&b.estimator, b.n, b.seed)));
    Ok(table)
}

/// Median of the finite values, `None` when there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Median absolute error per (method, n) over successful rows.
pub fn summarize(table: &ResultTable) -> Vec<(String, usize, f64, usize)> {
    let mut groups: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for r in &table.rows {
        if let Some(e) = r.abs_error {
            groups.entry((r.estimator.clone(), r.n)).or_default().push(e);
        }
    }
    groups
        .into_iter()
        .filter_map(|((m, n), v)| {
            let count = v.len();
            median(v).map(|med| (m, n, med, count))
        })
        .collect()
}
