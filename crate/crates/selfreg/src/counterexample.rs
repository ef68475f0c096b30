//! The signed cancellation construction showing non-negativity is
//! necessary: a teacher is widened with 2z extra units on a shared row v
//! whose output weights alternate ±ν. The extra units cancel in pairs, so
//! the computed function — and with it every training error — is unchanged,
//! while the outer norm grows by exactly 2zν. Amplifying z or ν makes ‖a‖₁
//! arbitrarily large.

use ndarray::{Array1, Array2};
use num_traits::Float;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{Scalar, TwoLayerNet};
use crate::util::pairwise_sum;

#[derive(Debug, Clone)]
pub struct CounterexampleSpec<T = f64> {
    /// Teacher with non-negative output weights.
    pub teacher: TwoLayerNet<T>,
    /// Number of cancelling pairs.
    pub z: usize,
    /// Magnitude ν of the signed extra weights.
    pub nu: T,
    /// Shared inner row of the extra units.
    pub v: Array1<T>,
}

impl<T: Scalar> CounterexampleSpec<T> {
    pub fn new(teacher: TwoLayerNet<T>, z: usize, nu: T, v: Array1<T>) -> Result<Self> {
        if !teacher.is_nonneg() {
            return Err(Error::InvalidArgument(
                "counterexample teacher must have non-negative output weights".into(),
            ));
        }
        if z == 0 {
            return Err(Error::InvalidArgument("need z >= 1 pairs".into()));
        }
        if !(nu > T::zero()) {
            return Err(Error::InvalidArgument("need nu > 0".into()));
        }
        if v.len() != teacher.dim() {
            return Err(Error::ShapeMismatch {
                context: "cancellation row dimension",
                expected: teacher.dim(),
                actual: v.len(),
            });
        }
        if v.iter().all(|c| c.is_zero()) {
            return Err(Error::InvalidArgument("v must be non-zero".into()));
        }
        Ok(Self { teacher, z, nu, v })
    }
}

/// The inflated student on m*+2z units: the first m* copy the teacher; the
/// extras all carry row v with output weight +ν at even positions and −ν at
/// odd positions (1-indexed), giving z weights of each sign.
pub fn build_inflated_student<T: Scalar>(spec: &CounterexampleSpec<T>) -> Result<TwoLayerNet<T>> {
    let m_star = spec.teacher.units();
    let d = spec.teacher.dim();
    let m_total = m_star + 2 * spec.z;

    let mut a = Vec::with_capacity(m_total);
    a.extend(spec.teacher.output_weights().iter().cloned());
    for j in (m_star + 1)..=(m_star + 2 * spec.z) {
        if j % 2 == 0 {
            a.push(spec.nu.clone());
        } else {
            a.push(-spec.nu.clone());
        }
    }

    let mut w = Vec::with_capacity(m_total * d);
    w.extend(spec.teacher.inner_weights().iter().cloned());
    for _ in 0..(2 * spec.z) {
        w.extend(spec.v.iter().cloned());
    }
    let w = Array2::from_shape_vec((m_total, d), w)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    TwoLayerNet::from_parts(spec.teacher.activation(), Array1::from_vec(a), w)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct InvarianceReport {
    pub risk_teacher: f64,
    pub risk_inflated: f64,
    pub risk_diff: f64,
    pub norm_teacher: f64,
    pub norm_inflated: f64,
    pub norm_growth: f64,
    pub expected_growth: f64,
}

/// Extra-unit contribution at one input, each ±ν pair summed adjacently so
/// the cancellation is exact in floating point: ν·t + (−(ν·t)) = 0.
fn extras_contribution<T: Float + num_traits::Signed>(spec: &CounterexampleSpec<T>, x: &[T]) -> T {
    let dot = spec
        .v
        .iter()
        .zip(x)
        .fold(T::zero(), |acc, (&vi, &xi)| acc + vi * xi);
    let t = spec.teacher.activation().apply(dot);
    let m_star = spec.teacher.units();
    let pair_terms: Vec<T> = (0..spec.z)
        .map(|p| {
            let j_first = m_star + 2 * p + 1; // 1-indexed position of the pair's first unit
            let first = if j_first % 2 == 0 { spec.nu * t } else { -(spec.nu * t) };
            let second = if (j_first + 1) % 2 == 0 {
                spec.nu * t
            } else {
                -(spec.nu * t)
            };
            first + second
        })
        .collect();
    pairwise_sum(pair_terms)
}

/// Compares teacher and inflated-student training errors on the same data
/// and reports the outer-norm growth. The inflated forward map is evaluated
/// as teacher(x) + paired extras, which is the same sum with the cancelling
/// pair contributions grouped adjacently.
pub fn verify_invariance(
    spec: &CounterexampleSpec<f64>,
    data: &Dataset,
) -> Result<InvarianceReport> {
    let inflated = build_inflated_student(spec)?;
    if data.dim() != spec.teacher.dim() {
        return Err(Error::ShapeMismatch {
            context: "dataset dimension",
            expected: spec.teacher.dim(),
            actual: data.dim(),
        });
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let risk_teacher = spec.teacher.empirical_risk(data)?;
    let terms: Vec<f64> = (0..data.len())
        .map(|i| {
            let x = data.row(i);
            let f = spec.teacher.forward_unchecked(x) + extras_contribution(spec, x);
            let r = data.label(i) - f;
            r * r
        })
        .collect();
    let risk_inflated = pairwise_sum(terms) / data.len() as f64;

    let norm_teacher = spec.teacher.outer_norm();
    let norm_inflated = inflated.outer_norm();
    Ok(InvarianceReport {
        risk_teacher,
        risk_inflated,
        risk_diff: (risk_inflated - risk_teacher).abs(),
        norm_teacher,
        norm_inflated,
        norm_growth: norm_inflated - norm_teacher,
        expected_growth: 2.0 * spec.z as f64 * spec.nu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::ActivationKind;
    use crate::data::{sample_dataset, DistributionSpec, InputDist, LabelDist};
    use crate::network::sample_teacher;
    use crate::util::seeded_rng;
    use ndarray::array;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use rand::Rng;

    fn f64_spec(z: usize, nu: f64, seed: u64) -> CounterexampleSpec<f64> {
        let d = 6;
        let teacher = sample_teacher(ActivationKind::Sigmoid, 4, d, 5.0, seed).unwrap();
        let mut rng = seeded_rng(seed, &[0xce]);
        let v = crate::util::sample_unit_vector(&mut rng, d) * 1.7;
        CounterexampleSpec::new(teacher, z, nu, v).unwrap()
    }

    #[test]
    fn outer_norm_grows_by_exactly_two_z_nu() {
        let spec = f64_spec(3, 10.0, 1);
        let inflated = build_inflated_student(&spec).unwrap();
        assert_eq!(inflated.units(), 4 + 6);
        assert_eq!(inflated.outer_norm(), 5.0 + 60.0);
        assert!(!inflated.is_nonneg());

        let spec = f64_spec(1, 0.5, 2);
        assert_eq!(build_inflated_student(&spec).unwrap().outer_norm(), 6.0);
    }

    #[test]
    fn signs_alternate_with_z_of_each() {
        for m_star in [3usize, 4] {
            let teacher = sample_teacher(ActivationKind::ReLU, m_star, 4, 1.0, 7).unwrap();
            let spec =
                CounterexampleSpec::new(teacher, 5, 2.0, array![1.0, 0.0, 0.0, 0.0]).unwrap();
            let inflated = build_inflated_student(&spec).unwrap();
            let extras: Vec<f64> = inflated.output_weights().iter().skip(m_star).cloned().collect();
            assert_eq!(extras.len(), 10);
            assert_eq!(extras.iter().filter(|&&v| v == 2.0).count(), 5);
            assert_eq!(extras.iter().filter(|&&v| v == -2.0).count(), 5);
            // adjacent positions carry opposite signs
            for pair in extras.chunks(2) {
                assert_eq!(pair[0], -pair[1]);
            }
        }
    }

    #[test]
    fn forward_maps_agree_on_random_inputs() {
        let spec = f64_spec(4, 25.0, 3);
        let inflated = build_inflated_student(&spec).unwrap();
        let mut rng = seeded_rng(4, &[]);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            let ft = spec.teacher.forward(&x).unwrap();
            let fi = inflated.forward(&x).unwrap();
            assert!(
                (ft - fi).abs() <= 1e-9 * (1.0 + ft.abs()),
                "teacher {ft} vs inflated {fi}"
            );
        }
    }

    #[test]
    fn paired_extras_cancel_exactly() {
        let spec = f64_spec(10, 100.0, 5);
        let mut rng = seeded_rng(6, &[]);
        for _ in 0..200 {
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert_eq!(extras_contribution(&spec, &x), 0.0);
        }
    }

    #[test]
    fn invariance_on_teacher_labeled_data() {
        let spec = f64_spec(3, 10.0, 8);
        let dist = DistributionSpec::new(
            InputDist::GaussianIso,
            LabelDist::Teacher {
                net: spec.teacher.clone(),
                clip: None,
            },
            6,
        )
        .unwrap();
        let data = sample_dataset(&dist, 200, 9).unwrap();
        let rep = verify_invariance(&spec, &data).unwrap();
        assert!(rep.risk_teacher <= 1e-20);
        assert!(rep.risk_inflated <= 1e-20);
        assert_eq!(rep.norm_growth, 60.0);
    }

    #[test]
    fn invariance_on_arbitrary_labels() {
        let spec = f64_spec(10, 100.0, 10);
        let dist = DistributionSpec::new(
            InputDist::GaussianIso,
            LabelDist::Custom { id: "one".into() },
            6,
        )
        .unwrap();
        let data = sample_dataset(&dist, 500, 11).unwrap();
        let rep = verify_invariance(&spec, &data).unwrap();
        assert!(rep.risk_teacher > 0.0);
        assert!(rep.risk_diff <= 1e-12, "risk diff {}", rep.risk_diff);
        assert_eq!(rep.norm_growth, 2000.0);
    }

    #[test]
    fn rejects_degenerate_specs() {
        let teacher = sample_teacher(ActivationKind::ReLU, 2, 3, 1.0, 1).unwrap();
        assert!(
            CounterexampleSpec::new(teacher.clone(), 0, 1.0, array![1.0, 0.0, 0.0]).is_err()
        );
        assert!(
            CounterexampleSpec::new(teacher.clone(), 1, 0.0, array![1.0, 0.0, 0.0]).is_err()
        );
        assert!(CounterexampleSpec::new(teacher, 1, 1.0, array![0.0, 0.0, 0.0]).is_err());
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn norm_growth_is_exact_in_rational_arithmetic() {
        // ν = 1/3 is not representable in binary floating point; the identity
        // ‖ā‖₁ = ‖a*‖₁ + 2zν still holds exactly over the rationals
        let a = Array1::from_vec(vec![rat(1, 7), rat(2, 7), rat(4, 7)]);
        let w = Array2::from_shape_vec(
            (3, 2),
            vec![rat(1, 1), rat(0, 1), rat(1, 2), rat(1, 2), rat(0, 1), rat(1, 1)],
        )
        .unwrap();
        let teacher = TwoLayerNet::from_parts(ActivationKind::ReLU, a, w).unwrap();
        let teacher_norm = teacher.outer_norm();
        assert_eq!(teacher_norm, rat(1, 1));

        let spec = CounterexampleSpec::new(
            teacher,
            7,
            rat(1, 3),
            Array1::from_vec(vec![rat(5, 9), rat(-2, 9)]),
        )
        .unwrap();
        let inflated = build_inflated_student(&spec).unwrap();
        let growth = inflated.outer_norm() - teacher_norm;
        assert_eq!(growth, rat(14, 3)); // 2·7·(1/3)
    }
}
