//! Seeded Monte-Carlo campaigns: fit many overparameterized non-negative
//! networks, compare achieved outer norms against the theoretical cap,
//! check the population-risk cap, and trace the λ(d) decay curve. Trials
//! are independent work units keyed by (trial, m̄) indices; results are
//! deterministic for a fixed master seed regardless of worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::activations::ActivationKind;
use crate::bounds::{self, BoundInput, ThetaConstants};
use crate::data::{
    self, assumption1_holds, sample_dataset, DistributionParams, DistributionSpec, Estimate,
};
use crate::error::{Error, Result};
use crate::trainer::{self, TrainConfig, TrainMethod};
use crate::util::{derive_seed, ols_slope, quantile_sorted};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub spec: DistributionSpec,
    pub activation: ActivationKind,
    /// Training-set size N per trial.
    pub n: usize,
    pub m_bar_grid: Vec<usize>,
    /// Training-error scale δ: trials with risk ≤ δ² are applicable.
    pub delta: f64,
    pub n_trials: usize,
    pub master_seed: u64,
    pub trainer: TrainConfig,
    pub params: DistributionParams,
    #[serde(default)]
    pub theta: ThetaConstants,
    /// Constant in the N ≤ exp(c·d) sample budget.
    #[serde(default = "default_budget_c")]
    pub assumption1_c: f64,
    #[serde(default = "default_true")]
    pub enforce_budget: bool,
}

fn default_budget_c() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

/// One fitted network compared against the bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub m_bar: usize,
    pub seed: u64,
    pub achieved_risk: f64,
    /// True when the fit reached risk ≤ δ²; the bounds only quantify over
    /// such networks, so the comparisons below are conditioned on this.
    pub applicable: bool,
    pub converged: bool,
    pub outer_norm: f64,
    pub bound_value: f64,
    pub within_bound: Option<bool>,
    pub population_risk: Option<f64>,
    pub gen_gap: Option<f64>,
    pub gen_cap: Option<f64>,
    pub within_gen_cap: Option<bool>,
    pub event_e0: bool,
    pub event_e2: bool,
}

#[derive(Debug, Clone, Copy)]
struct GenSettings {
    alpha: f64,
    n_mc: usize,
}

impl ExperimentConfig {
    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn validate(&self, need_gen: bool) -> Result<(f64, f64, f64)> {
        if self.n == 0 || self.n_trials == 0 || self.m_bar_grid.is_empty() {
            return Err(Error::InvalidArgument(
                "campaign needs n >= 1, n_trials >= 1 and a non-empty m_bar grid".into(),
            ));
        }
        if self.enforce_budget && !assumption1_holds(self.n, self.dim(), self.assumption1_c) {
            return Err(Error::HypothesisViolated(format!(
                "sample budget violated: N = {} > exp({}·{})",
                self.n,
                self.assumption1_c,
                self.dim()
            )));
        }
        let label_bound = self
            .params
            .label_bound
            .ok_or_else(|| Error::HypothesisViolated("params.label_bound is required".into()))?
            .value;
        let c_tail = self
            .params
            .c_tail
            .ok_or_else(|| Error::HypothesisViolated("params.c_tail is required".into()))?
            .value;
        if matches!(
            self.activation,
            ActivationKind::ReLU | ActivationKind::Step
        ) && self.trainer.method == TrainMethod::ProjectedGd
            && self.trainer.row_norm != Some(true)
        {
            return Err(Error::HypothesisViolated(
                "relu/step campaigns need unit inner rows: use NNLS features or set row_norm"
                    .into(),
            ));
        }
        if need_gen && self.spec.label.bound().is_none() {
            return Err(Error::HypothesisViolated(
                "generalization campaigns need almost-surely bounded labels".into(),
            ));
        }
        let bound = self.bound_input(label_bound, c_tail, 0.0);
        let bound_value = bounds::outer_norm_bound(self.activation, &bound)?.value;
        Ok((label_bound, c_tail, bound_value))
    }

    fn bound_input(&self, label_bound: f64, c_tail: f64, alpha: f64) -> BoundInput {
        BoundInput {
            delta: self.delta,
            label_bound,
            tail_c: c_tail,
            radius: 1.0,
            mu_star: self.params.mu_star.map(|e| e.value),
            eta: self.params.eta.map(|e| e.value),
            dim: self.dim(),
            n_samples: self.n as u64,
            alpha,
            theta: self.theta,
            ..BoundInput::default()
        }
    }

    fn run(&self, gen: Option<GenSettings>) -> Result<Vec<TrialResult>> {
        let (label_bound, c_tail, bound_value) = self.validate(gen.is_some())?;
        let grid = &self.m_bar_grid;
        let total = self.n_trials * grid.len();
        let delta_sq = self.delta * self.delta;
        let gen_cap = gen.map(|g| {
            let extra = if self.activation == ActivationKind::ReLU {
                (-self.theta.tail_d * self.dim() as f64).exp()
            } else {
                0.0
            };
            g.alpha + delta_sq + extra
        });

        (0..total)
            .into_par_iter()
            .map(|idx| {
                let trial = idx / grid.len();
                let mi = idx % grid.len();
                let m_bar = grid[mi];
                let seed = derive_seed(self.master_seed, &[trial as u64, mi as u64]);

                let data = sample_dataset(&self.spec, self.n, derive_seed(seed, &[0]))?;
                let mut tcfg = self.trainer.clone();
                tcfg.m_bar = m_bar;
                tcfg.seed = derive_seed(seed, &[1]);
                let fit = trainer::fit(&data, self.activation, &tcfg)?;
                let achieved_risk = fit.final_risk;
                let applicable = achieved_risk <= delta_sq;
                let outer_norm = fit.net.outer_norm();
                let within_bound = applicable.then_some(outer_norm <= bound_value);
                let (event_e0, event_e2) = data::check_events(&data, c_tail, label_bound);

                let (population_risk, gen_gap, within_gen_cap) = match gen {
                    Some(g) => {
                        let pop = fit.net.population_risk_mc(
                            &self.spec,
                            g.n_mc,
                            derive_seed(seed, &[2]),
                        )?;
                        let cap = gen_cap.expect("set alongside gen");
                        (
                            Some(pop),
                            Some((achieved_risk - pop).abs()),
                            applicable.then_some(pop <= cap),
                        )
                    }
                    None => (None, None, None),
                };

                Ok(TrialResult {
                    trial,
                    m_bar,
                    seed,
                    achieved_risk,
                    applicable,
                    converged: fit.converged,
                    outer_norm,
                    bound_value,
                    within_bound,
                    population_risk,
                    gen_gap,
                    gen_cap,
                    within_gen_cap,
                    event_e0,
                    event_e2,
                })
            })
            .collect()
    }
}

/// Fits every (trial, m̄) cell and compares the achieved outer norm against
/// the activation's theoretical cap. Trials that never reach risk ≤ δ² are
/// recorded as not applicable, never dropped.
pub fn run_norm_verification(cfg: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    cfg.run(None)
}

/// Norm verification plus a Monte-Carlo population-risk estimate per trial,
/// checked against the cap α + δ² (ReLU carries an extra exp(−Θ(d)) term).
pub fn run_generalization_gap(
    cfg: &ExperimentConfig,
    alpha: f64,
    n_mc: usize,
) -> Result<Vec<TrialResult>> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument("alpha must be > 0".into()));
    }
    if n_mc == 0 {
        return Err(Error::InvalidArgument("n_mc must be >= 1".into()));
    }
    cfg.run(Some(GenSettings { alpha, n_mc }))
}

#[derive(Debug, Clone, Serialize)]
pub struct MBarSummary {
    pub m_bar: usize,
    pub applicable: usize,
    pub violations: usize,
    pub violation_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub trials: usize,
    pub applicable: usize,
    /// Applicable trials violating any recorded cap (outer norm or
    /// population risk).
    pub violations: usize,
    pub violation_rate: f64,
    /// Fraction of applicable trials with population risk within its cap,
    /// when the campaign estimated one.
    pub gen_within_rate: Option<f64>,
    pub outer_norm_quantiles: Option<[f64; 3]>,
    pub gap_quantiles: Option<[f64; 3]>,
    pub per_m_bar: Vec<MBarSummary>,
}

fn quantiles(mut values: Vec<f64>) -> Option<[f64; 3]> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some([
        quantile_sorted(&values, 0.25),
        quantile_sorted(&values, 0.50),
        quantile_sorted(&values, 0.75),
    ])
}

/// Aggregates trial rows; errors on an empty list.
pub fn summarize(results: &[TrialResult]) -> Result<Summary> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("no trials to summarize".into()));
    }
    let is_violation = |r: &TrialResult| {
        r.within_bound == Some(false) || r.within_gen_cap == Some(false)
    };
    let applicable: Vec<&TrialResult> = results.iter().filter(|r| r.applicable).collect();
    let violations = applicable.iter().filter(|r| is_violation(r)).count();

    let gen_checked: Vec<&&TrialResult> = applicable
        .iter()
        .filter(|r| r.within_gen_cap.is_some())
        .collect();
    let gen_within_rate = if gen_checked.is_empty() {
        None
    } else {
        Some(
            gen_checked
                .iter()
                .filter(|r| r.within_gen_cap == Some(true))
                .count() as f64
                / gen_checked.len() as f64,
        )
    };

    let mut m_bars: Vec<usize> = results.iter().map(|r| r.m_bar).collect();
    m_bars.sort_unstable();
    m_bars.dedup();
    let per_m_bar = m_bars
        .into_iter()
        .map(|m| {
            let app: Vec<&&TrialResult> = applicable.iter().filter(|r| r.m_bar == m).collect();
            let v = app.iter().filter(|r| is_violation(r)).count();
            MBarSummary {
                m_bar: m,
                applicable: app.len(),
                violations: v,
                violation_rate: if app.is_empty() {
                    0.0
                } else {
                    v as f64 / app.len() as f64
                },
            }
        })
        .collect();

    Ok(Summary {
        trials: results.len(),
        applicable: applicable.len(),
        violations,
        violation_rate: if applicable.is_empty() {
            0.0
        } else {
            violations as f64 / applicable.len() as f64
        },
        gen_within_rate,
        outer_norm_quantiles: quantiles(applicable.iter().map(|r| r.outer_norm).collect()),
        gap_quantiles: quantiles(
            applicable
                .iter()
                .filter_map(|r| r.gen_gap)
                .collect(),
        ),
        per_m_bar,
    })
}

fn opt_cell<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// One trial per row; missing optional fields are empty cells.
pub fn write_trials_csv<W: Write>(results: &[TrialResult], mut out: W) -> Result<()> {
    writeln!(
        out,
        "trial,m_bar,seed,achieved_risk,applicable,converged,outer_norm,bound_value,\
         within_bound,population_risk,gen_gap,gen_cap,within_gen_cap,event_e0,event_e2"
    )?;
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.trial,
            r.m_bar,
            r.seed,
            r.achieved_risk,
            r.applicable,
            r.converged,
            r.outer_norm,
            r.bound_value,
            opt_cell(&r.within_bound),
            opt_cell(&r.population_risk),
            opt_cell(&r.gen_gap),
            opt_cell(&r.gen_cap),
            opt_cell(&r.within_gen_cap),
            r.event_e0,
            r.event_e2,
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaRow {
    pub dim: usize,
    pub lambda: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaDecayTable {
    pub rows: Vec<LambdaRow>,
    /// Least-squares slope of ln λ̂ against d; `None` when an estimate is
    /// zero.
    pub ln_slope: Option<f64>,
}

impl LambdaDecayTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "d,lambda,std_error")?;
        for r in &self.rows {
            writeln!(out, "{},{},{}", r.dim, r.lambda, r.std_error)?;
        }
        Ok(())
    }
}

/// λ(d) estimates over a dimension grid with the fitted log-slope
/// (expected negative for light-tailed inputs).
pub fn run_lambda_decay(
    spec: &DistributionSpec,
    c: f64,
    d_grid: &[usize],
    n_directions: usize,
    n_mc: usize,
    seed: u64,
) -> Result<LambdaDecayTable> {
    if d_grid.is_empty() || d_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "d_grid must be non-empty and strictly increasing".into(),
        ));
    }
    let rows: Vec<LambdaRow> = d_grid
        .iter()
        .map(|&d| {
            let spec_d = spec.with_dim(d)?;
            let est: Estimate =
                data::estimate_lambda(&spec_d, c, n_directions, n_mc, derive_seed(seed, &[d as u64]))?;
            Ok(LambdaRow {
                dim: d,
                lambda: est.value,
                std_error: est.std_error,
            })
        })
        .collect::<Result<_>>()?;
    let ln_slope = if rows.iter().all(|r| r.lambda > 0.0) {
        let xs: Vec<f64> = rows.iter().map(|r| r.dim as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.lambda.ln()).collect();
        Some(ols_slope(&xs, &ys))
    } else {
        None
    };
    Ok(LambdaDecayTable { rows, ln_slope })
}
