//! Trainers producing networks with non-negative output weights and small
//! training error: non-negative least squares over fixed random features
//! (any activation) and joint projected gradient descent (differentiable
//! activations). The verification campaigns only need some net with
//! risk ≤ δ²; nothing downstream depends on how it was found.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::activations::ActivationKind;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::TwoLayerNet;
use crate::util::{pairwise_sum, sample_unit_vector, seeded_rng, solve_pd};

/// KKT stationarity target that counts as converged for the NNLS solver.
pub const NNLS_KKT_TOL: f64 = 1e-8;
const NNLS_REL_DECREASE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMethod {
    NnlsRandomFeatures,
    ProjectedGd,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: TrainMethod,
    /// Hidden-unit count m̄.
    pub m_bar: usize,
    /// Step size for projected GD; `None` means 0.1/m̄.
    #[serde(default)]
    pub lr: Option<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Target empirical risk δ².
    #[serde(default)]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    /// Re-project inner rows to the unit sphere after each GD step.
    #[serde(default)]
    pub row_norm: Option<bool>,
}

fn default_max_iters() -> usize {
    2000
}

impl TrainConfig {
    pub fn nnls(m_bar: usize, seed: u64) -> Self {
        Self {
            method: TrainMethod::NnlsRandomFeatures,
            m_bar,
            lr: None,
            max_iters: default_max_iters(),
            tol: 0.0,
            seed,
            row_norm: None,
        }
    }

    pub fn projected_gd(m_bar: usize, lr: Option<f64>, max_iters: usize, tol: f64, seed: u64) -> Self {
        Self {
            method: TrainMethod::ProjectedGd,
            m_bar,
            lr,
            max_iters,
            tol,
            seed,
            row_norm: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m_bar == 0 {
            return Err(Error::InvalidArgument("m_bar must be >= 1".into()));
        }
        if let Some(lr) = self.lr {
            if !(lr >= 0.0) || !lr.is_finite() {
                return Err(Error::InvalidArgument("lr must be finite and >= 0".into()));
            }
        }
        if self.tol < 0.0 {
            return Err(Error::InvalidArgument("tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// A trained net plus convergence diagnostics. Failures to converge are
/// flagged here, never raised.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub net: TwoLayerNet<f64>,
    pub final_risk: f64,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    /// Max stationarity violation at the returned point (NNLS only).
    pub kkt_residual: Option<f64>,
    /// Objective value after every iteration, first entry is the initial
    /// objective (NNLS only).
    pub objective_trace: Vec<f64>,
}

/// Random inner rows for the fixed-feature trainer: uniform unit sphere for
/// the homogeneous activations, N(0, I/d) otherwise.
pub fn random_feature_rows(
    activation: ActivationKind,
    m_bar: usize,
    d: usize,
    seed: u64,
) -> Array2<f64> {
    let mut rng = seeded_rng(seed, &[0xfe]);
    let mut w = Array2::zeros((m_bar, d));
    match activation {
        ActivationKind::ReLU | ActivationKind::Step => {
            for j in 0..m_bar {
                w.row_mut(j).assign(&sample_unit_vector(&mut rng, d));
            }
        }
        _ => {
            let sd = 1.0 / (d as f64).sqrt();
            for v in w.iter_mut() {
                *v = sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    w
}

/// Dispatches on `config.method`.
pub fn fit(data: &Dataset, activation: ActivationKind, config: &TrainConfig) -> Result<FitResult> {
    config.validate()?;
    match config.method {
        TrainMethod::NnlsRandomFeatures => {
            let w = random_feature_rows(activation, config.m_bar, data.dim(), config.seed);
            nnls_fit(data, w, activation, config)
        }
        TrainMethod::ProjectedGd => projected_gd(data, activation, config),
    }
}

enum NnlsOp {
    /// Precomputed m̄×m̄ Gram form, cheaper once m̄ ≤ N.
    Gram {
        g: Array2<f64>,
        b: Array1<f64>,
        y_mean_sq: f64,
    },
    Direct {
        phi: Array2<f64>,
        y: Array1<f64>,
    },
}

impl NnlsOp {
    fn obj_grad(&self, a: &Array1<f64>) -> (f64, Array1<f64>) {
        match self {
            NnlsOp::Gram { g, b, y_mean_sq } => {
                let ga = g.dot(a);
                let obj = y_mean_sq - 2.0 * a.dot(b) + a.dot(&ga);
                let grad = (ga - b) * 2.0;
                (obj.max(0.0), grad)
            }
            NnlsOp::Direct { phi, y } => {
                let r = phi.dot(a) - y;
                let n = y.len() as f64;
                let obj = r.dot(&r) / n;
                let grad = phi.t().dot(&r) * (2.0 / n);
                (obj, grad)
            }
        }
    }

    fn lipschitz(&self) -> f64 {
        // power iteration on the Hessian 2G (resp. (2/N)ΦᵀΦ)
        let m = match self {
            NnlsOp::Gram { g, .. } => g.nrows(),
            NnlsOp::Direct { phi, .. } => phi.ncols(),
        };
        let mut v = Array1::from_elem(m, 1.0 / (m as f64).sqrt());
        let mut lambda = 0.0;
        for _ in 0..80 {
            let w = match self {
                NnlsOp::Gram { g, .. } => g.dot(&v),
                NnlsOp::Direct { phi, y } => phi.t().dot(&phi.dot(&v)) / y.len() as f64,
            };
            let norm = w.dot(&w).sqrt();
            if norm <= 1e-300 {
                return 0.0;
            }
            let new_lambda = v.dot(&w);
            v = w / norm;
            if (new_lambda - lambda).abs() <= 1e-9 * new_lambda.abs() {
                lambda = new_lambda;
                break;
            }
            lambda = new_lambda;
        }
        2.0 * lambda * 1.02
    }

    fn reduced_system(&self, support: &[usize]) -> (Array2<f64>, Vec<f64>) {
        let s = support.len();
        match self {
            NnlsOp::Gram { g, b, .. } => {
                let mut gs = Array2::zeros((s, s));
                let mut bs = vec![0.0; s];
                for (p, &jp) in support.iter().enumerate() {
                    bs[p] = b[jp];
                    for (q, &jq) in support.iter().enumerate() {
                        gs[[p, q]] = g[[jp, jq]];
                    }
                }
                (gs, bs)
            }
            NnlsOp::Direct { phi, y } => {
                let n = y.len() as f64;
                let cols: Vec<_> = support.iter().map(|&j| phi.column(j)).collect();
                let mut gs = Array2::zeros((s, s));
                let mut bs = vec![0.0; s];
                for p in 0..s {
                    bs[p] = cols[p].dot(y) / n;
                    for q in 0..=p {
                        let v = cols[p].dot(&cols[q]) / n;
                        gs[[p, q]] = v;
                        gs[[q, p]] = v;
                    }
                }
                (gs, bs)
            }
        }
    }
}

fn clamp_nonneg(a: &mut Array1<f64>) {
    a.mapv_inplace(|v| v.max(0.0));
}

fn kkt_residual(a: &Array1<f64>, grad: &Array1<f64>) -> f64 {
    a.iter()
        .zip(grad)
        .map(|(&aj, &gj)| if aj > 0.0 { gj.abs() } else { (-gj).max(0.0) })
        .fold(0.0, f64::max)
}

/// Feature matrix Φᵢⱼ = σ(wⱼᵀxᵢ).
pub fn feature_matrix(data: &Dataset, w: &Array2<f64>, activation: ActivationKind) -> Array2<f64> {
    let mut z = data.inputs().dot(&w.t());
    z.mapv_inplace(|v| activation.apply(v));
    z
}

/// Non-negative least squares over fixed features: monotone accelerated
/// projected gradient (restart on objective increase) followed by an exact
/// solve on the detected support when that is feasible and improves the
/// stationarity residual.
pub fn nnls_fit(
    data: &Dataset,
    w: Array2<f64>,
    activation: ActivationKind,
    config: &TrainConfig,
) -> Result<FitResult> {
    config.validate()?;
    if w.ncols() != data.dim() {
        return Err(Error::ShapeMismatch {
            context: "feature rows vs data dimension",
            expected: data.dim(),
            actual: w.ncols(),
        });
    }
    for v in w.iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "feature row entry",
                value: *v,
            });
        }
    }
    let m_bar = w.nrows();
    if matches!(activation, ActivationKind::ReLU | ActivationKind::Step) {
        for j in 0..m_bar {
            let norm = w.row(j).dot(&w.row(j)).sqrt();
            if (norm - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidArgument(format!(
                    "relu/step feature rows must be unit norm, row {j} has norm {norm}"
                )));
            }
        }
    }

    let phi = feature_matrix(data, &w, activation);
    let n = data.len();
    let y = data.labels().clone();
    let op = if m_bar <= n {
        let g = phi.t().dot(&phi) / n as f64;
        let b = phi.t().dot(&y) / n as f64;
        let y_mean_sq = y.dot(&y) / n as f64;
        NnlsOp::Gram { g, b, y_mean_sq }
    } else {
        NnlsOp::Direct {
            phi: phi.clone(),
            y: y.clone(),
        }
    };

    let l = op.lipschitz();
    let mut x: Array1<f64> = Array1::zeros(m_bar);
    let (mut f_x, mut grad_x) = op.obj_grad(&x);
    let mut trace = vec![f_x];
    let mut converged = l == 0.0; // all-zero features: x = 0 is optimal
    let mut iterations = 0;

    if l > 0.0 {
        let step = 1.0 / l;
        let mut y_v = x.clone();
        let mut t: f64 = 1.0;
        let mut plateau = 0;
        for iter in 0..config.max_iters {
            let (_, g_y) = op.obj_grad(&y_v);
            let mut x_new = &y_v - &(g_y * step);
            clamp_nonneg(&mut x_new);
            let (mut f_new, mut grad_new) = op.obj_grad(&x_new);
            if f_new > f_x {
                // momentum overshoot: plain projected step from x
                t = 1.0;
                x_new = &x - &(&grad_x * step);
                clamp_nonneg(&mut x_new);
                let og = op.obj_grad(&x_new);
                f_new = og.0;
                grad_new = og.1;
                if f_new > f_x {
                    // numerically stuck at x
                    x_new = x.clone();
                    f_new = f_x;
                    grad_new = grad_x.clone();
                }
            }
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y_v = &x_new + &((&x_new - &x) * ((t - 1.0) / t_new));
            let rel = (f_x - f_new) / f_x.abs().max(1e-300);
            x = x_new;
            f_x = f_new;
            grad_x = grad_new;
            t = t_new;
            trace.push(f_x);
            iterations = iter + 1;
            if rel < NNLS_REL_DECREASE {
                plateau += 1;
            } else {
                plateau = 0;
            }
            if plateau >= 3 {
                converged = true;
                break;
            }
            if iterations % 25 == 0 && kkt_residual(&x, &grad_x) <= NNLS_KKT_TOL {
                converged = true;
                break;
            }
        }
    }

    // exact solve on the support
    let support: Vec<usize> = (0..m_bar).filter(|&j| x[j] > 0.0).collect();
    if !support.is_empty() && support.len() <= 2000 {
        let (gs, bs) = op.reduced_system(&support);
        if let Some(sol) = solve_pd(&gs, &bs) {
            if sol.iter().all(|&v| v >= 0.0) {
                let mut cand: Array1<f64> = Array1::zeros(m_bar);
                for (p, &j) in support.iter().enumerate() {
                    cand[j] = sol[p];
                }
                let (f_cand, grad_cand) = op.obj_grad(&cand);
                if f_cand <= f_x && kkt_residual(&cand, &grad_cand) <= kkt_residual(&x, &grad_x) {
                    x = cand;
                    f_x = f_cand;
                    grad_x = grad_cand;
                    trace.push(f_x);
                }
            }
        }
    }

    let kkt = kkt_residual(&x, &grad_x);
    if kkt <= NNLS_KKT_TOL {
        converged = true;
    }

    // exact residual for the reported risk
    let r = &phi.dot(&x) - &y;
    let final_risk = pairwise_sum(r.iter().map(|v| v * v).collect()) / n as f64;

    let net = TwoLayerNet::new(activation, x, w)?.require_nonneg()?;
    Ok(FitResult {
        net,
        final_risk,
        iterations,
        converged,
        diverged: false,
        kkt_residual: Some(kkt),
        objective_trace: trace,
    })
}

type RiskGrads = (f64, Option<(Array1<f64>, Array2<f64>)>);

fn risk_and_grads(
    activation: ActivationKind,
    a: &Array1<f64>,
    w: &Array2<f64>,
    data: &Dataset,
    want_grads: bool,
) -> Result<RiskGrads> {
    let n = data.len() as f64;
    let z = data.inputs().dot(&w.t());
    let phi = z.mapv(|v| activation.apply(v));
    let r = data.labels() - &phi.dot(a);
    let risk = pairwise_sum(r.iter().map(|v| v * v).collect()) / n;
    if !want_grads {
        return Ok((risk, None));
    }
    let ga = phi.t().dot(&r) * (-2.0 / n);
    // M[i,j] = r_i · σ'(z_ij); ∂R/∂w_j = -(2/N) a_j Σ_i M[i,j] x_i
    let mut m = Array2::zeros(z.raw_dim());
    for ((i, j), &zij) in z.indexed_iter() {
        m[[i, j]] = r[i] * activation.apply_derivative(zij)?;
    }
    let mut gw = m.t().dot(data.inputs()) * (-2.0 / n);
    for (j, mut row) in gw.axis_iter_mut(Axis(0)).enumerate() {
        let aj = a[j];
        row.mapv_inplace(|v| v * aj);
    }
    Ok((risk, Some((ga, gw))))
}

/// Gradient of the training error at `net`: (∂R/∂a, ∂R/∂W).
pub fn grad_empirical_risk(
    net: &TwoLayerNet<f64>,
    data: &Dataset,
) -> Result<(Array1<f64>, Array2<f64>)> {
    if !net.activation().is_differentiable() {
        return Err(Error::UnsupportedDerivative(net.activation()));
    }
    if data.dim() != net.dim() {
        return Err(Error::ShapeMismatch {
            context: "dataset dimension",
            expected: net.dim(),
            actual: data.dim(),
        });
    }
    let (_, grads) = risk_and_grads(
        net.activation(),
        net.output_weights(),
        net.inner_weights(),
        data,
        true,
    )?;
    Ok(grads.expect("gradients requested"))
}

/// Joint projected gradient descent on (a, W) with the output weights
/// clamped to ≥ 0 after every step. Steps that increase the risk are
/// rejected and halve the step size.
pub fn projected_gd(
    data: &Dataset,
    activation: ActivationKind,
    config: &TrainConfig,
) -> Result<FitResult> {
    config.validate()?;
    if !activation.is_differentiable() {
        // gradient training on Step is rejected loudly (features are 0/1)
        return Err(Error::UnsupportedDerivative(activation));
    }
    let m_bar = config.m_bar;
    let d = data.dim();
    let mut rng = seeded_rng(config.seed, &[0x6d]);
    let mut w = Array2::zeros((m_bar, d));
    for j in 0..m_bar {
        w.row_mut(j).assign(&sample_unit_vector(&mut rng, d));
    }
    let mut a = Array1::from_elem(m_bar, 1.0 / m_bar as f64);

    let mut lr = config.lr.unwrap_or(0.1 / m_bar as f64);
    let (risk0, _) = risk_and_grads(activation, &a, &w, data, false)?;
    let mut risk = risk0;
    let mut iterations = 0;
    let mut diverged = false;
    let mut converged = risk <= config.tol && config.max_iters > 0;

    for iter in 0..config.max_iters {
        iterations = iter + 1;
        if risk <= config.tol {
            converged = true;
            break;
        }
        let (_, grads) = risk_and_grads(activation, &a, &w, data, true)?;
        let (ga, gw) = grads.expect("gradients requested");
        let mut a_new = &a - &(ga * lr);
        clamp_nonneg(&mut a_new);
        let mut w_new = &w - &(gw * lr);
        if config.row_norm == Some(true) {
            for j in 0..m_bar {
                let norm = w_new.row(j).dot(&w_new.row(j)).sqrt();
                if norm > 1e-300 {
                    let mut row = w_new.row_mut(j);
                    row.mapv_inplace(|v| v / norm);
                } else {
                    w_new.row_mut(j).assign(&w.row(j));
                }
            }
        }
        let (risk_new, _) = risk_and_grads(activation, &a_new, &w_new, data, false)?;
        if risk_new > risk {
            lr *= 0.5;
            if lr < 1e-18 {
                break;
            }
            continue;
        }
        a = a_new;
        w = w_new;
        risk = risk_new;
        if risk > 1e3 * risk0 {
            diverged = true;
            break;
        }
        if risk <= config.tol {
            converged = true;
            break;
        }
    }

    let net = TwoLayerNet::new(activation, a, w)?.require_nonneg()?;
    Ok(FitResult {
        net,
        final_risk: risk,
        iterations,
        converged,
        diverged,
        kkt_residual: None,
        objective_trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sample_dataset, DistributionSpec, InputDist, LabelDist};
    use crate::network::sample_teacher;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;

    fn dataset_from(x: Array2<f64>, y: Array1<f64>) -> Dataset {
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn nnls_orthonormal_columns_reduce_to_coordinate_clamp() {
        // Φ columns e1, e2 with Y = (3, -2): a = (3, 0), risk = (-2)²/2 = 2
        let x = array![[1.0, 0.0], [0.0, 1.0]];
        let y = array![3.0, -2.0];
        let data = dataset_from(x, y);
        let w = array![[1.0, 0.0], [0.0, 1.0]];
        // ReLU of the identity inputs reproduces the identity features
        let fit = nnls_fit(&data, w, ActivationKind::ReLU, &TrainConfig::nnls(2, 1)).unwrap();
        assert_abs_diff_eq!(fit.net.output_weights()[0], 3.0, epsilon = 1e-9);
        assert_eq!(fit.net.output_weights()[1], 0.0);
        assert_abs_diff_eq!(fit.final_risk, 2.0, epsilon = 1e-9);
        assert!(fit.converged);
        assert!(fit.kkt_residual.unwrap() <= 1e-6);
    }

    #[test]
    fn nnls_negative_targets_give_zero_weights() {
        let spec = DistributionSpec::new(
            InputDist::GaussianIso,
            LabelDist::Custom { id: "zero".into() },
            5,
        )
        .unwrap();
        let mut data = sample_dataset(&spec, 100, 3).unwrap();
        data = dataset_from(data.inputs().clone(), Array1::from_elem(100, -1.0));
        let w = random_feature_rows(ActivationKind::ReLU, 20, 5, 7);
        let fit = nnls_fit(&data, w, ActivationKind::ReLU, &TrainConfig::nnls(20, 7)).unwrap();
        // each coordinate's 1-D KKT solves to the clamp at zero
        assert!(fit.net.output_weights().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nnls_interpolates_labels_in_the_feature_cone() {
        let d = 8;
        let m = 16;
        let w = random_feature_rows(ActivationKind::ReLU, m, d, 11);
        let spec = DistributionSpec::new(
            InputDist::GaussianIso,
            LabelDist::Custom { id: "zero".into() },
            d,
        )
        .unwrap();
        let base = sample_dataset(&spec, 200, 13).unwrap();
        // labels generated by a non-negative combination of the same features
        let teacher = TwoLayerNet::new(
            ActivationKind::ReLU,
            Array1::from_vec((0..m).map(|j| 0.1 + 0.05 * j as f64).collect()),
            w.clone(),
        )
        .unwrap();
        let y: Array1<f64> = (0..base.len())
            .map(|i| teacher.forward(base.row(i)).unwrap())
            .collect();
        let data = dataset_from(base.inputs().clone(), y);
        let fit = nnls_fit(&data, w, ActivationKind::ReLU, &TrainConfig::nnls(m, 1)).unwrap();
        assert!(fit.final_risk <= 1e-12, "risk {}", fit.final_risk);
    }

    #[test]
    fn nnls_objective_is_monotone_and_kkt_holds_at_convergence() {
        let d = 10;
        for inst in 0..5u64 {
            let m = 40 + 30 * inst as usize;
            let n = 300;
            let spec = DistributionSpec::new(
                InputDist::GaussianIso,
                LabelDist::Teacher {
                    net: sample_teacher(ActivationKind::Sigmoid, 6, d, 1.0, 100 + inst).unwrap(),
                    clip: Some(1.0),
                },
                d,
            )
            .unwrap();
            let data = sample_dataset(&spec, n, 200 + inst).unwrap();
            let w = random_feature_rows(ActivationKind::Sigmoid, m, d, 300 + inst);
            let mut cfg = TrainConfig::nnls(m, 300 + inst);
            cfg.max_iters = 20_000;
            let fit = nnls_fit(&data, w, ActivationKind::Sigmoid, &cfg).unwrap();
            for pair in fit.objective_trace.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-15, "objective increased: {pair:?}");
            }
            assert!(fit.converged);
            assert!(
                fit.kkt_residual.unwrap() <= 1e-6,
                "kkt {}",
                fit.kkt_residual.unwrap()
            );
        }
    }

    #[test]
    fn nnls_tolerates_an_all_zero_feature_column() {
        // one ReLU row pointing away from every sample makes a zero column
        let x = array![[1.0, 0.0], [2.0, 0.0], [0.5, 0.0]];
        let y = array![1.0, 2.0, 0.5];
        let data = dataset_from(x, y);
        let w = array![[1.0, 0.0], [-1.0, 0.0]];
        let fit = nnls_fit(&data, w, ActivationKind::ReLU, &TrainConfig::nnls(2, 1)).unwrap();
        assert_eq!(fit.net.output_weights()[1], 0.0);
        assert_abs_diff_eq!(fit.net.output_weights()[0], 1.0, epsilon = 1e-9);
        assert!(fit.final_risk <= 1e-18);
    }

    #[test]
    fn nnls_rejects_non_unit_rows_for_homogeneous_activations() {
        let data = dataset_from(array![[1.0, 0.0]], array![1.0]);
        let w = array![[2.0, 0.0]];
        assert!(nnls_fit(&data, w, ActivationKind::ReLU, &TrainConfig::nnls(1, 1)).is_err());
    }

    #[test]
    fn nnls_direct_path_handles_overparameterized_m() {
        let d = 6;
        let n = 40;
        let m = 90; // m̄ > N exercises the matrix-free path
        let spec = DistributionSpec::new(
            InputDist::GaussianIso,
            LabelDist::Teacher {
                net: sample_teacher(ActivationKind::Sigmoid, 3, d, 1.0, 5).unwrap(),
                clip: Some(1.0),
            },
            d,
        )
        .unwrap();
        let data = sample_dataset(&spec, n, 6).unwrap();
        let w = random_feature_rows(ActivationKind::Sigmoid, m, d, 7);
        let mut cfg = TrainConfig::nnls(m, 7);
        cfg.max_iters = 10_000;
        let fit = nnls_fit(&data, w, ActivationKind::Sigmoid, &cfg).unwrap();
        assert!(fit.net.is_nonneg());
        // interpolation over the non-negative cone is not guaranteed, but
        // 90 features against 40 samples should get very close
        assert!(fit.final_risk <= 1e-3, "risk {}", fit.final_risk);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let d = 7;
        let spec = DistributionSpec::new(
            InputDist::GaussianIso,
            LabelDist::Teacher {
                net: sample_teacher(ActivationKind::Sigmoid, 4, d, 1.0, 31).unwrap(),
                clip: Some(1.0),
            },
            d,
        )
        .unwrap();
        let data = sample_dataset(&spec, 50, 32).unwrap();
        for activation in [ActivationKind::Sigmoid, ActivationKind::ReLU] {
            let mut rng = seeded_rng(33, &[]);
            let m = 5;
            let a = Array1::from_vec((0..m).map(|_| rng.random_range(0.0..1.0)).collect());
            let w = random_feature_rows(activation, m, d, 34);
            let net = TwoLayerNet::new(activation, a.clone(), w.clone()).unwrap();
            let (ga, gw) = grad_empirical_risk(&net, &data).unwrap();
            let h = 1e-6;
            let risk_at = |a: &Array1<f64>, w: &Array2<f64>| -> f64 {
                risk_and_grads(activation, a, w, &data, false).unwrap().0
            };
            let mut rng = seeded_rng(35, &[]);
            for _ in 0..50 {
                if rng.random::<bool>() {
                    let j = rng.random_range(0..m);
                    let mut ap = a.clone();
                    let mut am = a.clone();
                    ap[j] += h;
                    am[j] -= h;
                    let fd = (risk_at(&ap, &w) - risk_at(&am, &w)) / (2.0 * h);
                    let denom = ga[j].abs().max(fd.abs()).max(1e-6);
                    assert!(
                        (ga[j] - fd).abs() / denom <= 1e-5,
                        "{activation:?} a[{j}]: {} vs {fd}",
                        ga[j]
                    );
                } else {
                    let j = rng.random_range(0..m);
                    let k = rng.random_range(0..d);
                    let mut wp = w.clone();
                    let mut wm = w.clone();
                    wp[[j, k]] += h;
                    wm[[j, k]] -= h;
                    let fd = (risk_at(&a, &wp) - risk_at(&a, &wm)) / (2.0 * h);
                    let denom = gw[[j, k]].abs().max(fd.abs()).max(1e-6);
                    assert!(
                        (gw[[j, k]] - fd).abs() / denom <= 1e-5,
                        "{activation:?} w[{j},{k}]: {} vs {fd}",
                        gw[[j, k]]
                    );
                }
            }
        }
    }

    #[test]
    fn gradient_hand_case_single_relu_unit() {
        // a = 0, one unit, one sample: ∂R/∂a = -2·Y·ReLU(wᵀx)
        let data = dataset_from(array![[2.0, 1.0]], array![3.0]);
        let net = TwoLayerNet::new(
            ActivationKind::ReLU,
            array![0.0],
            array![[0.6, 0.8]],
        )
        .unwrap();
        let (ga, _) = grad_empirical_risk(&net, &data).unwrap();
        let expected = -2.0 * 3.0 * (0.6 * 2.0 + 0.8 * 1.0);
        assert_abs_diff_eq!(ga[0], expected, epsilon = 1e-12);
    }

    #[test]
    fn zero_residual_nets_have_zero_gradients() {
        let d = 5;
        let teacher = sample_teacher(ActivationKind::Sigmoid, 4, d, 1.0, 41).unwrap();
        let spec = DistributionSpec::new(
            InputDist::GaussianIso,
            LabelDist::Teacher {
                net: teacher.clone(),
                clip: None,
            },
            d,
        )
        .unwrap();
        let data = sample_dataset(&spec, 30, 42).unwrap();
        let (ga, gw) = grad_empirical_risk(&teacher, &data).unwrap();
        assert!(ga.iter().all(|v| v.abs() <= 1e-14));
        assert!(gw.iter().all(|v| v.abs() <= 1e-14));
    }

    #[test]
    fn projected_gd_keeps_weights_nonneg_and_respects_degenerate_configs() {
        let d = 4;
        let spec = DistributionSpec::new(
            InputDist::GaussianIso,
            LabelDist::Teacher {
                net: sample_teacher(ActivationKind::Sigmoid, 2, d, 1.0, 51).unwrap(),
                clip: Some(1.0),
            },
            d,
        )
        .unwrap();
        let data = sample_dataset(&spec, 60, 52).unwrap();

        // lr = 0 leaves the initialization untouched after max_iters
        let mut cfg = TrainConfig::projected_gd(6, Some(0.0), 50, 0.0, 5);
        let fit0 = projected_gd(&data, ActivationKind::Sigmoid, &cfg).unwrap();
        let mut cfg_none = cfg.clone();
        cfg_none.max_iters = 0;
        let init = projected_gd(&data, ActivationKind::Sigmoid, &cfg_none).unwrap();
        assert_eq!(fit0.net, init.net);
        assert_eq!(init.iterations, 0);

        cfg = TrainConfig::projected_gd(6, None, 300, 0.0, 5);
        let fit = projected_gd(&data, ActivationKind::Sigmoid, &cfg).unwrap();
        assert!(fit.net.is_nonneg());
        assert!(!fit.diverged);

        assert!(projected_gd(&data, ActivationKind::Step, &cfg).is_err());
    }

    #[test]
    fn projected_gd_row_norm_keeps_unit_rows() {
        let d = 5;
        let spec = DistributionSpec::new(
            InputDist::GaussianIso,
            LabelDist::Teacher {
                net: sample_teacher(ActivationKind::ReLU, 2, d, 1.0, 61).unwrap(),
                clip: Some(1.0),
            },
            d,
        )
        .unwrap();
        let data = sample_dataset(&spec, 80, 62).unwrap();
        let mut cfg = TrainConfig::projected_gd(8, Some(0.05), 200, 0.0, 6);
        cfg.row_norm = Some(true);
        let fit = projected_gd(&data, ActivationKind::ReLU, &cfg).unwrap();
        assert!(fit.net.has_unit_rows(1e-10));
        assert!(fit.net.is_nonneg());
    }

    #[test]
    fn projected_gd_learns_a_realizable_sigmoid_teacher() {
        // regression baseline: m̄ = 4·m*, d = 10, tol 0.01, succeeds in >= 8/10 seeds
        let d = 10;
        let m_star = 4;
        let mut successes = 0;
        for seed in 0..10u64 {
            let teacher = sample_teacher(ActivationKind::Sigmoid, m_star, d, 1.0, 900 + seed).unwrap();
            let spec = DistributionSpec::new(
                InputDist::GaussianIso,
                LabelDist::Teacher {
                    net: teacher,
                    clip: Some(1.0),
                },
                d,
            )
            .unwrap();
            let data = sample_dataset(&spec, 300, 950 + seed).unwrap();
            let cfg = TrainConfig::projected_gd(4 * m_star, Some(0.5), 4000, 0.01, seed);
            let fit = projected_gd(&data, ActivationKind::Sigmoid, &cfg).unwrap();
            if fit.final_risk <= 0.01 {
                successes += 1;
            }
        }
        assert!(successes >= 8, "only {successes}/10 seeds reached tol");
    }
}
