//! Constructive nets for Euclidean balls: the covering-number formula
//! (3R/ε)^d, a greedy packing construction whose saturation makes it a
//! covering at twice the packing separation, probabilistic covering
//! verification, and the per-direction dataset events checked over a net.

use ndarray::Array1;
use serde::Serialize;
use std::io::Write;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::util::{pairwise_sum, sample_in_ball, seeded_rng};

/// Hard cap on the construction dimension; net sizes scale like (3R/ε)^d.
pub const MAX_NET_DIM: usize = 8;

/// An explicit net of points in the ball B(0, R), valid at `scale`.
#[derive(Debug, Clone)]
pub struct EpsNet {
    points: Vec<Array1<f64>>,
    pub radius: f64,
    /// Pairwise separation the greedy construction guarantees (> eps).
    pub eps: f64,
    /// Covering scale the net is reported at (2·eps for greedy nets).
    pub scale: f64,
    /// False when the construction stopped at `max_points`.
    pub complete: bool,
}

/// Upper bound (3R/ε)^d on the covering number of B(0, R), carried in
/// log-space; the linear value may overflow to infinity.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoveringBound {
    pub ln_value: f64,
    pub value: f64,
}

pub fn covering_bound(r: f64, eps: f64, d: usize) -> Result<CoveringBound> {
    if !(r >= 1.0) {
        return Err(Error::HypothesisViolated(format!(
            "covering bound needs R >= 1, got {r}"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be > 0".into()));
    }
    let ln_value = d as f64 * (3.0 * r / eps).ln();
    Ok(CoveringBound {
        ln_value,
        value: ln_value.exp(),
    })
}

impl EpsNet {
    /// Wraps an explicit point set (e.g. sampled directions for the event
    /// checks). Points must lie in the ball.
    pub fn from_points(points: Vec<Array1<f64>>, radius: f64, scale: f64) -> Result<Self> {
        for p in &points {
            if p.dot(p).sqrt() > radius + 1e-9 {
                return Err(Error::InvalidArgument(
                    "net point outside the stated ball".into(),
                ));
            }
        }
        Ok(Self {
            points,
            radius,
            eps: scale,
            scale,
            complete: true,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Array1<f64>] {
        &self.points
    }

    /// Minimum pairwise distance; infinite for nets with fewer than two
    /// points.
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in 0..i {
                let diff = &self.points[i] - &self.points[j];
                best = best.min(diff.dot(&diff).sqrt());
            }
        }
        best
    }

    /// One point per row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.points.first().map_or(0, |p| p.len());
        let header: Vec<String> = (1..=d).map(|j| format!("p_{j}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for p in &self.points {
            let row: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Greedy packing of B(0, R): candidates are drawn uniformly in the ball and
/// admitted when they keep distance > eps to every admitted point. The run
/// stops after 10·|net| consecutive rejections (or at `max_points`, flagged
/// incomplete). A saturated packing covers at 2·eps, which is the reported
/// scale.
pub fn build_greedy_net(
    r: f64,
    eps: f64,
    d: usize,
    seed: u64,
    max_points: usize,
) -> Result<EpsNet> {
    if d == 0 || d > MAX_NET_DIM {
        return Err(Error::InvalidArgument(format!(
            "net construction supports 1 <= d <= {MAX_NET_DIM}, got {d}"
        )));
    }
    if !(eps > 0.0) || !(r > 0.0) {
        return Err(Error::InvalidArgument("need R > 0 and eps > 0".into()));
    }
    if max_points == 0 {
        return Err(Error::InvalidArgument("max_points must be >= 1".into()));
    }
    let mut rng = seeded_rng(seed, &[0xe5]);
    let eps_sq = eps * eps;
    let mut points: Vec<Array1<f64>> = Vec::new();
    let mut rejections = 0usize;
    let mut complete = true;
    loop {
        if points.len() >= max_points {
            complete = false;
            break;
        }
        let cand = sample_in_ball(&mut rng, d, r);
        let admissible = points.iter().all(|p| {
            let mut dist_sq = 0.0;
            for (a, b) in cand.iter().zip(p.iter()) {
                let diff = a - b;
                dist_sq += diff * diff;
            }
            dist_sq > eps_sq
        });
        if admissible {
            points.push(cand);
            rejections = 0;
        } else {
            rejections += 1;
            if rejections >= 10 * points.len().max(1) {
                break;
            }
        }
    }
    Ok(EpsNet {
        points,
        radius: r,
        eps,
        scale: 2.0 * eps,
        complete,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoverReport {
    pub max_gap: f64,
    pub ok: bool,
    pub n_probes: usize,
}

/// Samples probes uniformly in the ball and reports the worst distance to
/// the net; `ok` when no probe is farther than the net's scale.
pub fn verify_covering(net: &EpsNet, n_probes: usize, seed: u64) -> Result<CoverReport> {
    if n_probes == 0 {
        return Err(Error::InvalidArgument("n_probes must be >= 1".into()));
    }
    let d = net.points.first().map_or(1, |p| p.len());
    let mut rng = seeded_rng(seed, &[0xcf]);
    let mut max_gap: f64 = if net.is_empty() { f64::INFINITY } else { 0.0 };
    for _ in 0..n_probes {
        let probe = sample_in_ball(&mut rng, d, net.radius);
        // a probe only matters if it is farther than the current worst, so
        // the scan can bail out as soon as some point is at least as close
        let mut min_sq = f64::INFINITY;
        let cutoff = max_gap * max_gap;
        for p in &net.points {
            let mut dist_sq = 0.0;
            for (a, b) in probe.iter().zip(p.iter()) {
                let diff = a - b;
                dist_sq += diff * diff;
            }
            min_sq = min_sq.min(dist_sq);
            if min_sq <= cutoff {
                break;
            }
        }
        if min_sq > cutoff {
            max_gap = min_sq.sqrt();
        }
    }
    Ok(CoverReport {
        max_gap,
        ok: max_gap <= net.scale,
        n_probes,
    })
}

/// Which per-direction dataset statistic to verify over the net.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum E1Mode {
    /// Σᵢ 1{ŵᵀXᵢ ≥ 0} ≥ N/3 for every net direction.
    SigmoidSign,
    /// Σᵢ ReLU(ŵᵀXᵢ) ≥ μ*N/2 for every net direction.
    ReluMean { mu_star: f64 },
    /// Σᵢ 1{ŵᵀXᵢ ≥ η} ≥ ηN/2 for every net direction.
    StepTail { eta: f64 },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct E1Report {
    pub min_over_net: f64,
    pub threshold: f64,
    pub ok: bool,
}

/// Evaluates the mode's statistic for every direction in the net and checks
/// that the minimum clears the threshold.
pub fn verify_event_e1(net: &EpsNet, data: &Dataset, mode: E1Mode) -> Result<E1Report> {
    if net.is_empty() {
        return Err(Error::InvalidArgument("empty net".into()));
    }
    let d = data.dim();
    if net.points.iter().any(|p| p.len() != d) {
        return Err(Error::ShapeMismatch {
            context: "net direction dimension",
            expected: d,
            actual: net.points[0].len(),
        });
    }
    let n = data.len() as f64;
    let threshold = match mode {
        E1Mode::SigmoidSign => n / 3.0,
        E1Mode::ReluMean { mu_star } => mu_star * n / 2.0,
        E1Mode::StepTail { eta } => eta * n / 2.0,
    };
    let mut min_stat = f64::INFINITY;
    for w in &net.points {
        let terms: Vec<f64> = (0..data.len())
            .map(|i| {
                let dot: f64 = w.iter().zip(data.row(i)).map(|(a, b)| a * b).sum();
                match mode {
                    E1Mode::SigmoidSign => {
                        if dot >= 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    E1Mode::ReluMean { .. } => dot.max(0.0),
                    E1Mode::StepTail { eta } => {
                        if dot >= eta {
                            1.0
                        } else {
                            0.0
                        }
                    }
                }
            })
            .collect();
        min_stat = min_stat.min(pairwise_sum(terms));
    }
    Ok(E1Report {
        min_over_net: min_stat,
        threshold,
        ok: min_stat >= threshold,
    })
}
