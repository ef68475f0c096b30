//! Samplers for the distributional assumptions and Monte-Carlo estimators
//! for every distributional constant the bounds consume: the norm-tail
//! constant C, the label scale M, the ReLU floor μ*, the step constant η,
//! directional MGF caps, and the truncated second moment λ(d). Also the
//! observable proof events E0 (label mass) and E2 (input norm cap).

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::network::TwoLayerNet;
use crate::util::{mean_and_se, pairwise_sum, sample_unit_vector, seeded_rng};

/// Input-side distribution.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputDist {
    /// Standard Gaussian N(0, I_d).
    GaussianIso,
    /// Zero-mean Gaussian with the given covariance (symmetric PSD).
    GaussianCov { sigma: Vec<Vec<f64>> },
    /// Built-in bounded samplers by id: "zero" (point mass at the origin) or
    /// "rademacher" (independent ±1 coordinates).
    Custom { id: String },
}

/// Label-side distribution.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelDist {
    /// Labels computed by a teacher network, optionally clipped to [-clip, clip].
    Teacher {
        net: TwoLayerNet<f64>,
        #[serde(default)]
        clip: Option<f64>,
    },
    /// Built-in bounded samplers by id: "zero" or "one".
    Custom { id: String },
}

impl LabelDist {
    /// Almost-sure label bound when one is derivable: the clip value, or
    /// ‖a‖₁ · sup σ for a non-negative teacher with a bounded activation.
    pub fn bound(&self) -> Option<f64> {
        match self {
            LabelDist::Teacher { net, clip } => {
                if let Some(m) = clip {
                    return Some(*m);
                }
                if net.is_nonneg() {
                    net.activation().range_sup().map(|s| s * net.outer_norm())
                } else {
                    None
                }
            }
            LabelDist::Custom { id } => match id.as_str() {
                "zero" => Some(0.0),
                "one" => Some(1.0),
                _ => None,
            },
        }
    }
}

/// A sampling description for i.i.d. input/label pairs in dimension `d`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DistributionSpec {
    pub input: InputDist,
    pub label: LabelDist,
    pub d: usize,
}

impl DistributionSpec {
    pub fn new(input: InputDist, label: LabelDist, d: usize) -> Result<Self> {
        let spec = Self { input, label, d };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Same input family at a different dimension; only dimension-parametric
    /// inputs support this.
    pub fn with_dim(&self, d: usize) -> Result<Self> {
        match &self.input {
            InputDist::GaussianIso | InputDist::Custom { .. } => Self::new(
                self.input.clone(),
                LabelDist::Custom { id: "zero".into() },
                d,
            ),
            InputDist::GaussianCov { .. } => Err(Error::InvalidSpec(
                "a fixed covariance has no canonical extension across dimensions".into(),
            )),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidSpec("dimension must be >= 1".into()));
        }
        if let InputDist::GaussianCov { sigma } = &self.input {
            if sigma.len() != self.d || sigma.iter().any(|r| r.len() != self.d) {
                return Err(Error::InvalidSpec(format!(
                    "covariance must be {d}x{d}",
                    d = self.d
                )));
            }
            let scale: f64 = sigma
                .iter()
                .enumerate()
                .map(|(i, r)| r[i].abs())
                .fold(0.0, f64::max)
                .max(1.0);
            for i in 0..self.d {
                for j in 0..i {
                    if (sigma[i][j] - sigma[j][i]).abs() > 1e-10 * scale {
                        return Err(Error::InvalidSpec("covariance must be symmetric".into()));
                    }
                }
            }
        }
        if let InputDist::Custom { id } = &self.input {
            if !matches!(id.as_str(), "zero" | "rademacher") {
                return Err(Error::InvalidSpec(format!("unknown input sampler '{id}'")));
            }
        }
        if let LabelDist::Custom { id } = &self.label {
            if !matches!(id.as_str(), "zero" | "one") {
                return Err(Error::InvalidSpec(format!("unknown label sampler '{id}'")));
            }
        }
        if let LabelDist::Teacher { net, .. } = &self.label {
            if net.dim() != self.d {
                return Err(Error::InvalidSpec(format!(
                    "teacher dimension {} disagrees with d = {}",
                    net.dim(),
                    self.d
                )));
            }
        }
        Ok(())
    }

    /// Prepared sampler (covariance factored once).
    pub fn sampler(&self) -> Result<DistSampler<'_>> {
        let input = match &self.input {
            InputDist::GaussianIso => InputSampler::GaussianIso,
            InputDist::GaussianCov { sigma } => {
                let mut m = Array2::zeros((self.d, self.d));
                for i in 0..self.d {
                    for j in 0..self.d {
                        m[[i, j]] = sigma[i][j];
                    }
                }
                let l = crate::util::cholesky_psd(&m).ok_or_else(|| {
                    Error::InvalidSpec("covariance is not positive semidefinite".into())
                })?;
                InputSampler::GaussianChol(l)
            }
            InputDist::Custom { id } => match id.as_str() {
                "zero" => InputSampler::Zero,
                "rademacher" => InputSampler::Rademacher,
                _ => unreachable!("validated at construction"),
            },
        };
        Ok(DistSampler {
            input,
            label: &self.label,
        })
    }
}

enum InputSampler {
    GaussianIso,
    GaussianChol(Array2<f64>),
    Zero,
    Rademacher,
}

/// Draws inputs and labels from a validated spec.
pub struct DistSampler<'a> {
    input: InputSampler,
    label: &'a LabelDist,
}

impl DistSampler<'_> {
    pub fn sample_x_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match &self.input {
            InputSampler::GaussianIso => {
                for v in out.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
            }
            InputSampler::GaussianChol(l) => {
                let d = out.len();
                let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                for i in 0..d {
                    let mut acc = 0.0;
                    for j in 0..=i {
                        acc += l[[i, j]] * z[j];
                    }
                    out[i] = acc;
                }
            }
            InputSampler::Zero => out.fill(0.0),
            InputSampler::Rademacher => {
                for v in out.iter_mut() {
                    *v = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
            }
        }
    }

    pub fn label(&self, x: &[f64], _rng: &mut ChaCha8Rng) -> f64 {
        match self.label {
            LabelDist::Teacher { net, clip } => {
                let y = net.forward_unchecked(x);
                match clip {
                    Some(m) => y.clamp(-m, *m),
                    None => y,
                }
            }
            LabelDist::Custom { id } => match id.as_str() {
                "zero" => 0.0,
                "one" => 1.0,
                _ => unreachable!("validated at construction"),
            },
        }
    }
}

/// N input/label pairs in dimension d.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
    y: Array1<f64>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::ShapeMismatch {
                context: "inputs vs labels",
                expected: x.nrows(),
                actual: y.len(),
            });
        }
        if x.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        for v in x.iter().chain(y.iter()) {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "dataset entry",
                    value: *v,
                });
            }
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn inputs(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn labels(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.x.row(i).to_slice().expect("row-major dataset")
    }

    pub fn label(&self, i: usize) -> f64 {
        self.y[i]
    }

    /// Writes the dataset as CSV with header `x_1,..,x_d,y`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.dim();
        for j in 1..=d {
            write!(out, "x_{j},")?;
        }
        writeln!(out, "y")?;
        for i in 0..self.len() {
            for v in self.row(i) {
                write!(out, "{v},")?;
            }
            writeln!(out, "{}", self.y[i])?;
        }
        Ok(())
    }
}

/// Sample-size budget from the N ≤ exp(c·d) assumption; c is configurable
/// (default 0.5) because the constant is otherwise unspecified.
pub fn assumption1_holds(n: usize, d: usize, c: f64) -> bool {
    (n as f64).ln() <= c * d as f64
}

/// Draws N i.i.d. pairs; deterministic per seed.
pub fn sample_dataset(spec: &DistributionSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("need N >= 1 samples".into()));
    }
    let sampler = spec.sampler()?;
    let d = spec.dim();
    let mut rng = seeded_rng(seed, &[0xda]);
    let mut x = Array2::zeros((n, d));
    let mut y = Array1::zeros(n);
    let mut buf = vec![0.0; d];
    for i in 0..n {
        sampler.sample_x_into(&mut rng, &mut buf);
        y[i] = sampler.label(&buf, &mut rng);
        x.row_mut(i).assign(&Array1::from_vec(buf.clone()));
    }
    Dataset::new(x, y)
}

/// A scalar estimate with its standard error (grid resolution for grid
/// searches).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// η estimate; `warning` is set when no grid point satisfies the defining
/// inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaEstimate {
    pub value: f64,
    pub std_error: f64,
    pub warning: bool,
}

/// Directional MGF caps sup_w E[exp(±s·wᵀX)].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgfBounds {
    pub s: f64,
    pub plus: Estimate,
    pub minus: Estimate,
    pub overflowed: bool,
}

/// Everything the bound formulas consume about a distribution.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct DistributionParams {
    pub c_tail: Option<Estimate>,
    pub label_bound: Option<Estimate>,
    pub mu_star: Option<Estimate>,
    pub eta: Option<EtaEstimate>,
    pub mgf: Option<MgfBounds>,
    pub lambda_d: Option<Estimate>,
}

const C_GRID_STEP: f64 = 0.1;
const ETA_GRID_STEP: f64 = 0.01;

/// Smallest C on a 0.1 grid with empirical P(‖X‖² ≤ Cd) ≥ 1 − target_tail.
pub fn estimate_c(
    spec: &DistributionSpec,
    n_mc: usize,
    target_tail: f64,
    seed: u64,
) -> Result<Estimate> {
    if n_mc < 1000 {
        return Err(Error::InvalidArgument("estimate_c needs n_mc >= 1000".into()));
    }
    if !(0.0..1.0).contains(&target_tail) {
        return Err(Error::InvalidArgument("target_tail must be in [0, 1)".into()));
    }
    let sampler = spec.sampler()?;
    let d = spec.dim();
    let mut rng = seeded_rng(seed, &[0xc0]);
    let mut buf = vec![0.0; d];
    let mut scaled: Vec<f64> = (0..n_mc)
        .map(|_| {
            sampler.sample_x_into(&mut rng, &mut buf);
            buf.iter().map(|v| v * v).sum::<f64>() / d as f64
        })
        .collect();
    scaled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = (((1.0 - target_tail) * n_mc as f64).ceil() as usize).clamp(1, n_mc);
    let q = scaled[k - 1];
    let c = ((q / C_GRID_STEP).ceil() * C_GRID_STEP).max(C_GRID_STEP);
    Ok(Estimate {
        value: c,
        std_error: C_GRID_STEP,
    })
}

fn per_direction<T: Send>(
    n_directions: usize,
    f: impl Fn(usize) -> T + Sync + Send,
) -> Vec<T> {
    (0..n_directions).into_par_iter().map(f).collect()
}

/// Min over sampled unit directions of the MC mean of ReLU(wᵀX). One-sided:
/// an upper bound on the true sphere infimum.
pub fn estimate_mu_star(
    spec: &DistributionSpec,
    n_directions: usize,
    n_mc: usize,
    seed: u64,
) -> Result<Estimate> {
    if n_directions == 0 || n_mc == 0 {
        return Err(Error::InvalidArgument(
            "need n_directions >= 1 and n_mc >= 1".into(),
        ));
    }
    spec.validate()?;
    let d = spec.dim();
    let per: Vec<(f64, f64)> = per_direction(n_directions, |k| {
        let sampler = spec.sampler().expect("validated");
        let mut dir_rng = seeded_rng(seed, &[0xd1, k as u64]);
        let w = sample_unit_vector(&mut dir_rng, d);
        let mut mc_rng = seeded_rng(seed, &[0x3c, k as u64]);
        let mut buf = vec![0.0; d];
        let vals: Vec<f64> = (0..n_mc)
            .map(|_| {
                sampler.sample_x_into(&mut mc_rng, &mut buf);
                let dot: f64 = w.iter().zip(&buf).map(|(a, b)| a * b).sum();
                dot.max(0.0)
            })
            .collect();
        mean_and_se(&vals)
    });
    let (mean, se) = per
        .into_iter()
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .expect("n_directions >= 1");
    Ok(Estimate {
        value: mean,
        std_error: se,
    })
}

/// Largest η on a descending 0.01 grid with min-over-directions empirical
/// P(wᵀX ≥ η) ≥ η.
pub fn estimate_eta(
    spec: &DistributionSpec,
    n_directions: usize,
    n_mc: usize,
    seed: u64,
) -> Result<EtaEstimate> {
    if n_directions == 0 || n_mc == 0 {
        return Err(Error::InvalidArgument(
            "need n_directions >= 1 and n_mc >= 1".into(),
        ));
    }
    spec.validate()?;
    let d = spec.dim();
    let n_grid = (1.0 / ETA_GRID_STEP).round() as usize; // 1.00 down to 0.01

    // per direction, tail fractions at every grid point
    let tails: Vec<Vec<f64>> = per_direction(n_directions, |k| {
        let sampler = spec.sampler().expect("validated");
        let mut dir_rng = seeded_rng(seed, &[0xd1, k as u64]);
        let w = sample_unit_vector(&mut dir_rng, d);
        let mut mc_rng = seeded_rng(seed, &[0x3c, k as u64]);
        let mut buf = vec![0.0; d];
        // counts[b] = #draws with wᵀx in [b, b+1)·step, overflow bucket at the top
        let mut counts = vec![0u64; n_grid + 1];
        for _ in 0..n_mc {
            sampler.sample_x_into(&mut mc_rng, &mut buf);
            let dot: f64 = w.iter().zip(&buf).map(|(a, b)| a * b).sum();
            let b = (dot / ETA_GRID_STEP).floor();
            if b >= 0.0 {
                counts[(b as usize).min(n_grid)] += 1;
            }
        }
        let mut acc = 0u64;
        let mut tail = vec![0.0; n_grid + 1];
        for b in (0..=n_grid).rev() {
            acc += counts[b];
            tail[b] = acc as f64 / n_mc as f64;
        }
        tail
    });

    for i in (1..=n_grid).rev() {
        let eta = i as f64 * ETA_GRID_STEP;
        let min_frac = tails
            .iter()
            .map(|t| t[i])
            .fold(f64::INFINITY, f64::min);
        if min_frac >= eta {
            let se = (min_frac * (1.0 - min_frac) / n_mc as f64).sqrt();
            return Ok(EtaEstimate {
                value: eta,
                std_error: se,
                warning: false,
            });
        }
    }
    Ok(EtaEstimate {
        value: 0.0,
        std_error: 0.0,
        warning: true,
    })
}

/// Sup over sampled unit directions of the MC estimates of E[exp(s·wᵀX)]
/// and E[exp(−s·wᵀX)].
pub fn estimate_mgf_bounds(
    spec: &DistributionSpec,
    s: f64,
    n_directions: usize,
    n_mc: usize,
    seed: u64,
) -> Result<MgfBounds> {
    if !(s >= 0.0) {
        return Err(Error::InvalidArgument("mgf scale s must be >= 0".into()));
    }
    if n_directions == 0 || n_mc == 0 {
        return Err(Error::InvalidArgument(
            "need n_directions >= 1 and n_mc >= 1".into(),
        ));
    }
    spec.validate()?;
    let d = spec.dim();
    let per: Vec<((f64, f64), (f64, f64))> = per_direction(n_directions, |k| {
        let sampler = spec.sampler().expect("validated");
        let mut dir_rng = seeded_rng(seed, &[0xd1, k as u64]);
        let w = sample_unit_vector(&mut dir_rng, d);
        let mut mc_rng = seeded_rng(seed, &[0x3c, k as u64]);
        let mut buf = vec![0.0; d];
        let mut plus = Vec::with_capacity(n_mc);
        let mut minus = Vec::with_capacity(n_mc);
        for _ in 0..n_mc {
            sampler.sample_x_into(&mut mc_rng, &mut buf);
            let dot: f64 = w.iter().zip(&buf).map(|(a, b)| a * b).sum();
            plus.push((s * dot).exp());
            minus.push((-s * dot).exp());
        }
        (mean_and_se(&plus), mean_and_se(&minus))
    });
    let plus = per
        .iter()
        .map(|(p, _)| *p)
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
        .expect("n_directions >= 1");
    let minus = per
        .iter()
        .map(|(_, m)| *m)
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
        .expect("n_directions >= 1");
    let overflowed = !plus.0.is_finite() || !minus.0.is_finite();
    Ok(MgfBounds {
        s,
        plus: Estimate {
            value: plus.0,
            std_error: plus.1,
        },
        minus: Estimate {
            value: minus.0,
            std_error: minus.1,
        },
        overflowed,
    })
}

/// Max over sampled directions of ‖w‖ = 1/√(Cd) of the MC mean of
/// |wᵀX|²·1{‖X‖² > Cd}.
pub fn estimate_lambda(
    spec: &DistributionSpec,
    c: f64,
    n_directions: usize,
    n_mc: usize,
    seed: u64,
) -> Result<Estimate> {
    if !(c > 0.0) {
        return Err(Error::InvalidArgument("need C > 0".into()));
    }
    if n_directions == 0 || n_mc == 0 {
        return Err(Error::InvalidArgument(
            "need n_directions >= 1 and n_mc >= 1".into(),
        ));
    }
    spec.validate()?;
    let d = spec.dim();
    let cd = c * d as f64;
    let scale = 1.0 / cd.sqrt();
    let per: Vec<(f64, f64)> = per_direction(n_directions, |k| {
        let sampler = spec.sampler().expect("validated");
        let mut dir_rng = seeded_rng(seed, &[0xd1, k as u64]);
        let w = sample_unit_vector(&mut dir_rng, d);
        let mut mc_rng = seeded_rng(seed, &[0x3c, k as u64]);
        let mut buf = vec![0.0; d];
        let vals: Vec<f64> = (0..n_mc)
            .map(|_| {
                sampler.sample_x_into(&mut mc_rng, &mut buf);
                let norm_sq: f64 = buf.iter().map(|v| v * v).sum();
                if norm_sq > cd {
                    let dot: f64 = w.iter().zip(&buf).map(|(a, b)| a * b).sum::<f64>() * scale;
                    dot * dot
                } else {
                    0.0
                }
            })
            .collect();
        mean_and_se(&vals)
    });
    let (mean, se) = per
        .into_iter()
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .expect("n_directions >= 1");
    Ok(Estimate {
        value: mean,
        std_error: se,
    })
}

/// The observable proof events: E0 = {Σ|Yᵢ| ≤ 2MN} and
/// E2 = {maxᵢ ‖Xᵢ‖² ≤ Cd}.
pub fn check_events(data: &Dataset, c: f64, m: f64) -> (bool, bool) {
    let n = data.len() as f64;
    let label_mass = pairwise_sum(data.labels().iter().map(|y| y.abs()).collect());
    let e0 = label_mass <= 2.0 * m * n;
    let cd = c * data.dim() as f64;
    let e2 = (0..data.len()).all(|i| data.row(i).iter().map(|v| v * v).sum::<f64>() <= cd);
    (e0, e2)
}
