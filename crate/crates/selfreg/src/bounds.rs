//! Closed-form evaluation of the theoretical bounds: outer-norm caps and
//! their failure probabilities for sigmoid/ReLU/step networks, the
//! fat-shattering dimension bound, the ξ and ζ uniform-convergence terms,
//! the covering-number-based concentration probability, the generalization
//! risk caps with their sample-size side conditions, and the
//! sample-complexity scaling table.
//!
//! Everything here is pure and deterministic. Quantities that blow up like
//! d^d are carried in log-space with linear probabilities clipped to [0,1].
//! The unquantified pieces (the universal constant c, the Θ(N)/Θ(d) tail
//! exponents, the o_N(1) label term) are explicit inputs, echoed in every
//! report.

use serde::{Deserialize, Serialize};

use crate::activations::ActivationKind;
use crate::error::{Error, Result};
use crate::util::log_add_exp;

/// Concrete stand-ins for the Θ(N) and Θ(d) tail exponents: exp(−tail_n·N)
/// and exp(−tail_d·d).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaConstants {
    pub tail_n: f64,
    pub tail_d: f64,
}

impl Default for ThetaConstants {
    fn default() -> Self {
        Self {
            tail_n: 0.01,
            tail_d: 0.1,
        }
    }
}

/// Every input a bound formula can consume. Unused fields are ignored by a
/// given formula; missing hypotheses (μ*, η) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInput {
    /// Training-error scale: risk ≤ δ².
    pub delta: f64,
    /// Label scale M (E|Y| for the norm bounds, a.s. bound for the
    /// generalization bounds).
    pub label_bound: f64,
    /// Input norm-tail constant C in P(‖X‖² ≤ Cd).
    pub tail_c: f64,
    /// Inner-weight radius R (sigmoid only).
    pub radius: f64,
    pub mu_star: Option<f64>,
    pub eta: Option<f64>,
    pub dim: usize,
    pub n_samples: u64,
    /// Generalization-gap target α.
    pub alpha: f64,
    /// Fat-shattering scale γ.
    pub gamma: f64,
    /// Activation range bound 𝓜 (σ maps into [−𝓜/2, 𝓜/2]).
    pub range_bound: f64,
    /// Outer-norm cap A.
    pub outer_cap: f64,
    /// The universal constant c; nothing pins its value, so it is a knob
    /// defaulting to 1.
    pub c_universal: f64,
    pub theta: ThetaConstants,
}

impl Default for BoundInput {
    fn default() -> Self {
        Self {
            delta: 0.0,
            label_bound: 0.0,
            tail_c: 0.0,
            radius: 0.0,
            mu_star: None,
            eta: None,
            dim: 1,
            n_samples: 1,
            alpha: 0.0,
            gamma: 0.0,
            range_bound: 0.0,
            outer_cap: 0.0,
            c_universal: 1.0,
            theta: ThetaConstants::default(),
        }
    }
}

/// An evaluated bound: linear value, log value where the formula lives in
/// log-space, hypothesis validity, and the inputs echoed back.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub formula: String,
    pub value: f64,
    pub log_value: Option<f64>,
    pub valid: bool,
    pub notes: Vec<String>,
    pub inputs: BoundInput,
}

fn require_positive(name: &str, value: Option<f64>) -> Result<f64> {
    match value {
        Some(v) if v > 0.0 => Ok(v),
        Some(v) => Err(Error::HypothesisViolated(format!(
            "{name} must be positive, got {v}"
        ))),
        None => Err(Error::HypothesisViolated(format!("{name} is required"))),
    }
}

/// The outer-norm cap: 3(1+e)(δ+2M) for sigmoid, 4(δ+2M)/μ* for ReLU,
/// 2(δ+2M)/η for step.
pub fn outer_norm_bound(activation: ActivationKind, input: &BoundInput) -> Result<BoundReport> {
    let dm = input.delta + 2.0 * input.label_bound;
    let (formula, value) = match activation {
        ActivationKind::Sigmoid => (
            "sigmoid_outer_norm",
            3.0 * (1.0 + std::f64::consts::E) * dm,
        ),
        ActivationKind::ReLU => {
            let mu = require_positive("mu_star", input.mu_star)?;
            ("relu_outer_norm", 4.0 * dm / mu)
        }
        ActivationKind::Step => {
            let eta = require_positive("eta", input.eta)?;
            ("step_outer_norm", 2.0 * dm / eta)
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "no outer-norm bound for {other} networks"
            )))
        }
    };
    Ok(BoundReport {
        formula: formula.into(),
        value,
        log_value: None,
        valid: input.delta >= 0.0 && input.label_bound >= 0.0,
        notes: Vec::new(),
        inputs: input.clone(),
    })
}

/// Failure probability of the outer-norm bound: (base)^d·exp(−Θ(N)) +
/// N·exp(−Θ(d)), where base is 3R√(Cd), 12√(Cd)/μ*, or 6√(Cd)/η. Computed
/// in log-space with the Θ exponents taken from `input.theta`; the o_N(1)
/// label term is unquantified and only noted.
pub fn outer_norm_failure_prob(
    activation: ActivationKind,
    input: &BoundInput,
) -> Result<BoundReport> {
    let cd = input.tail_c * input.dim as f64;
    if !(cd > 0.0) {
        return Err(Error::HypothesisViolated("need C·d > 0".into()));
    }
    let (formula, base) = match activation {
        ActivationKind::Sigmoid => {
            if !(input.radius > 0.0) {
                return Err(Error::HypothesisViolated("sigmoid case needs R > 0".into()));
            }
            ("sigmoid_failure_prob", 3.0 * input.radius * cd.sqrt())
        }
        ActivationKind::ReLU => {
            let mu = require_positive("mu_star", input.mu_star)?;
            ("relu_failure_prob", 12.0 * cd.sqrt() / mu)
        }
        ActivationKind::Step => {
            let eta = require_positive("eta", input.eta)?;
            ("step_failure_prob", 6.0 * cd.sqrt() / eta)
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "no failure probability for {other} networks"
            )))
        }
    };
    let n = input.n_samples as f64;
    let log_net_term = input.dim as f64 * base.ln() - input.theta.tail_n * n;
    let log_data_term = n.ln() - input.theta.tail_d * input.dim as f64;
    let log_value = log_add_exp(log_net_term, log_data_term);
    Ok(BoundReport {
        formula: formula.into(),
        value: log_value.exp().clamp(0.0, 1.0),
        log_value: Some(log_value),
        valid: true,
        notes: vec![
            "o_N(1) label term unquantified; drops when labels are a.s. bounded".into(),
        ],
        inputs: input.clone(),
    })
}

/// Fat-shattering bound for outer norm ≤ A and range 𝓜:
/// c·𝓜²A²d/γ² · ln(𝓜A/γ), valid for A ≥ 1 and γ ≤ 𝓜A.
pub fn fsd_bound(input: &BoundInput) -> Result<BoundReport> {
    let ma = input.range_bound * input.outer_cap;
    if !(input.gamma > 0.0) {
        return Err(Error::InvalidArgument("gamma must be > 0".into()));
    }
    let mut notes = Vec::new();
    let mut valid = true;
    if input.outer_cap < 1.0 {
        valid = false;
        notes.push("hypothesis A >= 1 fails".into());
    }
    if input.gamma > ma {
        valid = false;
        notes.push("hypothesis gamma <= M·A fails".into());
    }
    let value = input.c_universal * ma * ma * input.dim as f64 / (input.gamma * input.gamma)
        * (ma / input.gamma).ln();
    Ok(BoundReport {
        formula: "fat_shattering_bound".into(),
        value,
        log_value: None,
        valid,
        notes,
        inputs: input.clone(),
    })
}

fn xi_value(alpha: f64, m: f64, mcal: f64, a: f64, c: f64) -> f64 {
    let mx = (mcal * a).max(2.0 * m);
    let ln_arg = 128.0 * mcal.powi(3) * a.powi(3) * mx / alpha;
    (2.0 / std::f64::consts::LN_2) * c * (128.0 * 128.0) * mcal.powi(6) * a.powi(6) * mx * mx
        / (alpha * alpha)
        * ln_arg.ln()
}

/// The ξ(α, M, 𝓜, A) constant of the uniform-convergence machinery.
pub fn xi(input: &BoundInput) -> Result<BoundReport> {
    if !(input.alpha > 0.0) {
        return Err(Error::InvalidArgument("alpha must be > 0".into()));
    }
    let mx = (input.range_bound * input.outer_cap).max(2.0 * input.label_bound);
    let ln_arg = 128.0 * input.range_bound.powi(3) * input.outer_cap.powi(3) * mx / input.alpha;
    let mut notes = Vec::new();
    if ln_arg <= 1.0 {
        notes.push("log argument <= 1: monotonicity guarantees do not apply".into());
    }
    let value = xi_value(
        input.alpha,
        input.label_bound,
        input.range_bound,
        input.outer_cap,
        input.c_universal,
    );
    Ok(BoundReport {
        formula: "xi".into(),
        value,
        log_value: None,
        valid: ln_arg > 1.0,
        notes,
        inputs: input.clone(),
    })
}

/// Exponent of the ζ(α, M, A, N) probability term:
/// ξ(α,M,2,A)·d·ln²(2304·N·A²·max{2A,M}/α) − α²N/(64·max{2A,M}²).
pub fn zeta_exponent(alpha: f64, m: f64, a: f64, n: f64, d: f64, c: f64) -> f64 {
    let mx = (2.0 * a).max(m);
    let xi2 = xi_value(alpha, m, 2.0, a, c);
    let ln_term = (2304.0 * n * a * a * mx / alpha).ln();
    xi2 * d * ln_term * ln_term - alpha * alpha * n / (64.0 * mx * mx)
}

/// ζ as a probability: the exponent is the log value, the linear value is
/// clipped to [0, 1].
pub fn zeta(input: &BoundInput) -> Result<BoundReport> {
    if !(input.alpha > 0.0) {
        return Err(Error::InvalidArgument("alpha must be > 0".into()));
    }
    if input.n_samples == 0 {
        return Err(Error::InvalidArgument("need N >= 1".into()));
    }
    let exponent = zeta_exponent(
        input.alpha,
        input.label_bound,
        input.outer_cap,
        input.n_samples as f64,
        input.dim as f64,
        input.c_universal,
    );
    Ok(BoundReport {
        formula: "zeta".into(),
        value: exponent.exp().clamp(0.0, 1.0),
        log_value: Some(exponent),
        valid: true,
        notes: Vec::new(),
        inputs: input.clone(),
    })
}

/// Log failure probability of the covering-number concentration step:
/// ln(4·𝒩·exp(−α²N/(64T²))) with the cover size given in log-space.
pub fn haussler_prob(cover_log: f64, alpha: f64, t: f64, n: u64) -> Result<f64> {
    if !(alpha > 0.0) || !(t > 0.0) {
        return Err(Error::InvalidArgument("need alpha > 0 and T > 0".into()));
    }
    Ok(4.0f64.ln() + cover_log - alpha * alpha * n as f64 / (64.0 * t * t))
}

/// Generalization verdict: the population-risk cap, the composed failure
/// probability, and the sample-size side conditions.
#[derive(Debug, Clone, Serialize)]
pub struct GenBoundReport {
    pub formula: String,
    /// Population risk cap α + δ² (plus exp(−Θ(d)) in the ReLU case).
    pub risk_cap: f64,
    pub failure_log: f64,
    pub failure_prob: f64,
    /// Outer-norm cap A used inside ξ/ζ.
    pub outer_cap_used: f64,
    pub min_n_required: f64,
    pub min_n_ok: bool,
    pub alpha_cap: f64,
    pub alpha_ok: bool,
    pub valid: bool,
    pub notes: Vec<String>,
    pub inputs: BoundInput,
}

/// Population-risk cap with probability composed from ζ and the outer-norm
/// failure terms by a union bound.
pub fn generalization_bound(
    activation: ActivationKind,
    input: &BoundInput,
) -> Result<GenBoundReport> {
    if !(input.alpha > 0.0) {
        return Err(Error::InvalidArgument("alpha must be > 0".into()));
    }
    let dm = input.delta + 2.0 * input.label_bound;
    let cd = input.tail_c * input.dim as f64;
    let mut notes = Vec::new();
    let (formula, a_used, extra_cap) = match activation {
        ActivationKind::Sigmoid => (
            "sigmoid_generalization",
            3.0 * (1.0 + std::f64::consts::E) * dm,
            0.0,
        ),
        ActivationKind::ReLU => {
            let mu = require_positive("mu_star", input.mu_star)?;
            if !(cd > 0.0) {
                return Err(Error::HypothesisViolated("relu case needs C·d > 0".into()));
            }
            notes.push("mu* = exp(o(d)) is asymptotic and not checkable here".into());
            (
                "relu_generalization",
                4.0 * cd.sqrt() * dm / mu,
                (-input.theta.tail_d * input.dim as f64).exp(),
            )
        }
        ActivationKind::Step => {
            let eta = require_positive("eta", input.eta)?;
            ("step_generalization", 2.0 * dm / eta, 0.0)
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "no generalization bound for {other} networks"
            )))
        }
    };

    let m = input.label_bound;
    let alpha = input.alpha;
    let n = input.n_samples as f64;
    let d = input.dim as f64;
    let max_am = a_used.max(m);
    let min_n_required =
        input.c_universal * 2.0f64.powi(21) * a_used.powi(6) * max_am * max_am / (alpha * alpha)
            * d;
    let min_n_ok = n >= min_n_required;
    let alpha_cap = 2.0f64.powi(11) * a_used.powi(3) * max_am;
    let alpha_ok = alpha <= alpha_cap;
    if !min_n_ok {
        notes.push("sample-size side condition unmet".into());
    }
    if !alpha_ok {
        notes.push("alpha side condition unmet".into());
    }

    let zeta_log = zeta_exponent(alpha, m, a_used, n, d, input.c_universal);
    let mut fail_input = input.clone();
    fail_input.outer_cap = a_used;
    let norm_fail = outer_norm_failure_prob(activation, &fail_input)?;
    let failure_log = log_add_exp(zeta_log, norm_fail.log_value.expect("log-space"));

    Ok(GenBoundReport {
        formula: formula.into(),
        risk_cap: alpha + input.delta * input.delta + extra_cap,
        failure_log,
        failure_prob: failure_log.exp().clamp(0.0, 1.0),
        outer_cap_used: a_used,
        min_n_required,
        min_n_ok,
        alpha_cap,
        alpha_ok,
        valid: min_n_ok && alpha_ok,
        notes,
        inputs: input.clone(),
    })
}

/// One row of the sample-complexity scaling table. Constants are unit-level:
/// the entries are order statements, not sharp thresholds.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub activation: ActivationKind,
    pub regime: String,
    pub min_n_formula: String,
    pub dim: usize,
    pub min_n_at_d: u64,
}

/// Sample-size regime per activation: d·ln²d for step and poly-radius
/// sigmoid, d^(K+1) for sigmoid with ln R = d^K, d⁶·ln³d for ReLU.
pub fn scaling_report(activation: ActivationKind, input: &BoundInput) -> Result<ScalingReport> {
    let d = input.dim as f64;
    if input.dim < 2 {
        return Err(Error::InvalidArgument("scaling needs d >= 2".into()));
    }
    let (regime, formula, value) = match activation {
        ActivationKind::Step => (
            "near-linear".to_string(),
            "d·ln²d".to_string(),
            d * d.ln() * d.ln(),
        ),
        ActivationKind::Sigmoid => {
            let ln_r = if input.radius > 0.0 {
                input.radius.ln()
            } else {
                0.0
            };
            // order-level split: radii up to d³ count as polynomial
            if ln_r <= 3.0 * d.ln() {
                (
                    "near-linear (R polynomial in d)".to_string(),
                    "d·ln²d".to_string(),
                    d * d.ln() * d.ln(),
                )
            } else {
                let k = ln_r.ln() / d.ln();
                (
                    format!("polynomial, exponent K = {k:.3} (R = exp(d^K))"),
                    format!("d^{:.3}", k + 1.0),
                    d.powf(k + 1.0),
                )
            }
        }
        ActivationKind::ReLU => (
            "degree-six polynomial".to_string(),
            "d⁶·ln³d".to_string(),
            d.powi(6) * d.ln().powi(3),
        ),
        other => {
            return Err(Error::InvalidArgument(format!(
                "no scaling regime for {other} networks"
            )))
        }
    };
    Ok(ScalingReport {
        activation,
        regime,
        min_n_formula: formula,
        dim: input.dim,
        min_n_at_d: value.ceil() as u64,
    })
}
