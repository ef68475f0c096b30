//! Two-layer networks x ↦ Σⱼ aⱼ·σ(wⱼᵀx), their empirical and population
//! risks, the outer norm ‖a‖₁, and the homogeneity normalizations for
//! ReLU/Step inner rows.

use ndarray::{Array1, Array2};
use num_traits::{Float, Signed};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::activations::ActivationKind;
use crate::data::{Dataset, DistributionSpec};
use crate::error::{Error, Result};
use crate::util::{pairwise_sum, seeded_rng};

/// Weight scalars. Covers the floats as well as exact rationals, so the
/// norm-level identities can be checked in exact arithmetic.
pub trait Scalar: num_traits::Num + Signed + Clone + PartialOrd {}
impl<T: num_traits::Num + Signed + Clone + PartialOrd> Scalar for T {}

/// A two-layer network: `a` holds the m̄ output weights, `w` the m̄×d inner
/// rows. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerNet<T = f64> {
    activation: ActivationKind,
    a: Array1<T>,
    w: Array2<T>,
}

impl<T: Scalar> TwoLayerNet<T> {
    /// Builds a net from raw parts, checking shapes only. Use [`Self::new`]
    /// for floats, which also rejects non-finite entries.
    pub fn from_parts(activation: ActivationKind, a: Array1<T>, w: Array2<T>) -> Result<Self> {
        if a.len() != w.nrows() {
            return Err(Error::ShapeMismatch {
                context: "output weights vs inner rows",
                expected: w.nrows(),
                actual: a.len(),
            });
        }
        if a.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one unit".into()));
        }
        Ok(Self { activation, a, w })
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    /// Number of hidden units m̄.
    pub fn units(&self) -> usize {
        self.a.len()
    }

    /// Input dimension d.
    pub fn dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_weights(&self) -> &Array1<T> {
        &self.a
    }

    pub fn inner_weights(&self) -> &Array2<T> {
        &self.w
    }

    /// The outer norm ‖a‖₁. Exact in the scalar's arithmetic.
    pub fn outer_norm(&self) -> T {
        self.a
            .iter()
            .fold(T::zero(), |acc, aj| acc + aj.abs())
    }

    pub fn is_nonneg(&self) -> bool {
        self.a.iter().all(|aj| *aj >= T::zero())
    }
}

impl<T: Float + Signed> TwoLayerNet<T> {
    /// Builds a net, rejecting shape mismatches and non-finite entries.
    pub fn new(activation: ActivationKind, a: Array1<T>, w: Array2<T>) -> Result<Self> {
        for v in a.iter().chain(w.iter()) {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "network weight",
                    value: v.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Self::from_parts(activation, a, w)
    }

    /// Constructor-time non-negativity check; trainers go through this so a
    /// negative weight is a loud bug rather than a silent clamp.
    pub fn require_nonneg(self) -> Result<Self> {
        match self.a.iter().cloned().fold(None::<T>, |m, v| {
            Some(m.map_or(v, |m| m.min(v)))
        }) {
            Some(min) if min < T::zero() => Err(Error::InvalidArgument(format!(
                "output weights must be non-negative (min {})",
                min.to_f64().unwrap_or(f64::NAN)
            ))),
            _ => Ok(self),
        }
    }

    pub fn row_norm(&self, j: usize) -> T {
        self.w
            .row(j)
            .iter()
            .fold(T::zero(), |acc, &x| acc + x * x)
            .sqrt()
    }

    /// True when every inner row has unit Euclidean norm within `tol`.
    pub fn has_unit_rows(&self, tol: T) -> bool {
        (0..self.units()).all(|j| (self.row_norm(j) - T::one()).abs() <= tol)
    }

    /// Σⱼ aⱼ·σ(wⱼᵀx), unit contributions combined by adjacent pairwise
    /// summation.
    pub fn forward(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                context: "input dimension",
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[T]) -> T {
        let terms: Vec<T> = (0..self.units())
            .map(|j| {
                let dot = self
                    .w
                    .row(j)
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (&wj, &xi)| acc + wj * xi);
                self.a[j] * self.activation.apply(dot)
            })
            .collect();
        pairwise_sum(terms)
    }

    /// Equivalent net with unit inner rows, using positive homogeneity.
    ///
    /// ReLU: aⱼ ← aⱼ‖wⱼ‖, wⱼ ← wⱼ/‖wⱼ‖; a zero row becomes e₁ with aⱼ ← 0.
    /// Step: rows are normalized with aⱼ unchanged (Step(cx) = Step(x) for
    /// c>0); a zero row has no output-preserving unit replacement and is
    /// rejected.
    pub fn normalize_relu(&self) -> Result<Self> {
        if !matches!(
            self.activation,
            ActivationKind::ReLU | ActivationKind::Step
        ) {
            return Err(Error::InvalidArgument(format!(
                "normalize_relu applies to relu/step nets, got {}",
                self.activation
            )));
        }
        let mut a = self.a.clone();
        let mut w = self.w.clone();
        for j in 0..self.units() {
            let norm = self.row_norm(j);
            if norm == T::zero() {
                if self.activation == ActivationKind::Step {
                    return Err(Error::InvalidArgument(
                        "step net has a zero inner row; no unit replacement preserves outputs"
                            .into(),
                    ));
                }
                let mut row = w.row_mut(j);
                row.fill(T::zero());
                row[0] = T::one();
                a[j] = T::zero();
            } else {
                if self.activation == ActivationKind::ReLU {
                    a[j] = a[j] * norm;
                }
                let mut row = w.row_mut(j);
                row.mapv_inplace(|x| x / norm);
            }
        }
        Self::new(self.activation, a, w)
    }

    /// Rescales every inner row to the given norm, compensating `a` by ReLU
    /// homogeneity so the ReLU forward map is unchanged. Builds the
    /// 1/√(Cd)-row form that the saturated-ReLU analysis evaluates.
    pub fn rescale_rows(&self, target_norm: T) -> Result<Self> {
        if !matches!(
            self.activation,
            ActivationKind::ReLU | ActivationKind::SaturatedReLU
        ) {
            return Err(Error::InvalidArgument(format!(
                "rescale_rows applies to relu/srelu nets, got {}",
                self.activation
            )));
        }
        if !(target_norm > T::zero()) {
            return Err(Error::InvalidArgument("target row norm must be > 0".into()));
        }
        let mut a = self.a.clone();
        let mut w = self.w.clone();
        for j in 0..self.units() {
            let norm = self.row_norm(j);
            if norm == T::zero() {
                let mut row = w.row_mut(j);
                row.fill(T::zero());
                row[0] = target_norm;
                a[j] = T::zero();
            } else {
                a[j] = a[j] * (norm / target_norm);
                let scale = target_norm / norm;
                let mut row = w.row_mut(j);
                row.mapv_inplace(|x| x * scale);
            }
        }
        Self::new(self.activation, a, w)
    }
}

impl TwoLayerNet<f64> {
    /// Training error: mean squared residual over the dataset, accumulated
    /// pairwise.
    pub fn empirical_risk(&self, data: &Dataset) -> Result<f64> {
        if data.dim() != self.dim() {
            return Err(Error::ShapeMismatch {
                context: "dataset dimension",
                expected: self.dim(),
                actual: data.dim(),
            });
        }
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let terms: Vec<f64> = (0..data.len())
            .map(|i| {
                let r = data.label(i) - self.forward_unchecked(data.row(i));
                r * r
            })
            .collect();
        Ok(pairwise_sum(terms) / data.len() as f64)
    }

    /// Monte-Carlo estimate of the population risk E[(Y − f(X))²] over fresh
    /// draws from `spec`. Deterministic per seed: draws are sharded into
    /// fixed-size chunks with per-chunk derived streams.
    pub fn population_risk_mc(
        &self,
        spec: &DistributionSpec,
        n_mc: usize,
        seed: u64,
    ) -> Result<f64> {
        if n_mc == 0 {
            return Err(Error::InvalidArgument("n_mc must be >= 1".into()));
        }
        if spec.dim() != self.dim() {
            return Err(Error::ShapeMismatch {
                context: "distribution dimension",
                expected: self.dim(),
                actual: spec.dim(),
            });
        }
        const CHUNK: usize = 8192;
        let sampler = spec.sampler()?;
        let mut x = vec![0.0; spec.dim()];
        let n_chunks = n_mc.div_ceil(CHUNK);
        let mut chunk_sums = Vec::with_capacity(n_chunks);
        for c in 0..n_chunks {
            let mut rng = seeded_rng(seed, &[0x9c, c as u64]);
            let this_chunk = CHUNK.min(n_mc - c * CHUNK);
            let terms: Vec<f64> = (0..this_chunk)
                .map(|_| {
                    sampler.sample_x_into(&mut rng, &mut x);
                    let y = sampler.label(&x, &mut rng);
                    let r = y - self.forward_unchecked(&x);
                    r * r
                })
                .collect();
            chunk_sums.push(pairwise_sum(terms));
        }
        Ok(pairwise_sum(chunk_sums) / n_mc as f64)
    }
}

#[derive(Serialize, Deserialize)]
struct NetRepr {
    activation: ActivationKind,
    a: Vec<f64>,
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
}

impl Serialize for TwoLayerNet<f64> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = NetRepr {
            activation: self.activation,
            a: self.a.to_vec(),
            w: self.w.rows().into_iter().map(|r| r.to_vec()).collect(),
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TwoLayerNet<f64> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = NetRepr::deserialize(deserializer)?;
        let m = repr.a.len();
        let d = repr.w.first().map_or(0, |r| r.len());
        if repr.w.len() != m {
            return Err(D::Error::custom("a and W disagree on the unit count"));
        }
        let mut flat = Vec::with_capacity(m * d);
        for row in &repr.w {
            if row.len() != d {
                return Err(D::Error::custom("ragged W rows"));
            }
            flat.extend_from_slice(row);
        }
        let w = Array2::from_shape_vec((m, d), flat).map_err(D::Error::custom)?;
        TwoLayerNet::new(repr.activation, Array1::from_vec(repr.a), w)
            .map_err(D::Error::custom)
    }
}

/// Random teacher: m* unit-sphere rows, equal non-negative output weights
/// summing to `outer_norm`.
pub fn sample_teacher(
    activation: ActivationKind,
    m_star: usize,
    d: usize,
    outer_norm: f64,
    seed: u64,
) -> Result<TwoLayerNet<f64>> {
    if m_star == 0 || d == 0 {
        return Err(Error::InvalidArgument("teacher needs m* >= 1 and d >= 1".into()));
    }
    if !(outer_norm >= 0.0) {
        return Err(Error::InvalidArgument("teacher outer norm must be >= 0".into()));
    }
    let mut rng = seeded_rng(seed, &[0x7e]);
    let mut w = Array2::zeros((m_star, d));
    for j in 0..m_star {
        let row = crate::util::sample_unit_vector(&mut rng, d);
        w.row_mut(j).assign(&row);
    }
    let a = Array1::from_elem(m_star, outer_norm / m_star as f64);
    TwoLayerNet::new(activation, a, w)?.require_nonneg()
}
