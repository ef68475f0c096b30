//! Numeric and RNG plumbing shared across modules: pairwise summation,
//! seed derivation, sphere/ball sampling, and small statistics helpers.

use ndarray::Array1;
use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Sums `terms` by repeated adjacent pairing: level 0 combines (0,1), (2,3), …
///
/// Error grows like O(log n) instead of O(n), and terms that cancel exactly
/// and sit in one leaf pair (index 2i, 2i+1) contribute an exact zero.
pub fn pairwise_sum<T: Float>(mut terms: Vec<T>) -> T {
    if terms.is_empty() {
        return T::zero();
    }
    let mut n = terms.len();
    while n > 1 {
        let half = n / 2;
        for i in 0..half {
            terms[i] = terms[2 * i] + terms[2 * i + 1];
        }
        if n % 2 == 1 {
            terms[half] = terms[n - 1];
            n = half + 1;
        } else {
            n = half;
        }
    }
    terms[0]
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(samples.to_vec()) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = pairwise_sum(samples.iter().map(|&s| (s - mean) * (s - mean)).collect());
    let var = ss / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a path of indices.
///
/// Used everywhere a computation shards work (trials, directions, chunks) so
/// that results are independent of scheduling and worker count.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ p))
}

/// Seeded RNG for a (master, path) pair.
pub fn seeded_rng(master: u64, parts: &[u64]) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(derive_seed(master, parts))
}

/// Uniform point on the unit sphere in `d` dimensions.
pub fn sample_unit_vector(rng: &mut impl Rng, d: usize) -> Array1<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return Array1::from_vec(v.into_iter().map(|x| x / norm).collect());
        }
    }
}

/// Uniform point in the closed ball of given radius: unit direction scaled
/// by `radius * U^(1/d)`.
pub fn sample_in_ball(rng: &mut impl Rng, d: usize, radius: f64) -> Array1<f64> {
    let dir = sample_unit_vector(rng, d);
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / d as f64);
    dir * r
}

/// Nearest-rank quantile of an already sorted slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    let k = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

/// Least-squares slope of y against x.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Lower-triangular Cholesky factor, tolerating semidefinite pivots by
/// zeroing their columns. `None` when a pivot is negative beyond tolerance.
pub fn cholesky_psd(sigma: &ndarray::Array2<f64>) -> Option<ndarray::Array2<f64>> {
    let d = sigma.nrows();
    let scale = (0..d)
        .map(|i| sigma[[i, i]].abs())
        .fold(0.0, f64::max)
        .max(1.0);
    let tol = 1e-10 * scale;
    let mut l: ndarray::Array2<f64> = ndarray::Array2::zeros((d, d));
    for j in 0..d {
        let mut diag = sigma[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if diag < -tol {
            return None;
        }
        if diag <= tol {
            continue;
        }
        let root = diag.sqrt();
        l[[j, j]] = root;
        for i in (j + 1)..d {
            let mut acc = sigma[[i, j]];
            for k in 0..j {
                acc -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = acc / root;
        }
    }
    Some(l)
}

/// Solves `a x = b` for symmetric positive definite `a`. `None` when a pivot
/// is not strictly positive.
pub fn solve_pd(a: &ndarray::Array2<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[[i, i]].abs()).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-14 * scale;
    let mut l: ndarray::Array2<f64> = ndarray::Array2::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if diag <= tol {
            return None;
        }
        let root = diag.sqrt();
        l[[j, j]] = root;
        for i in (j + 1)..n {
            let mut acc = a[[i, j]];
            for k in 0..j {
                acc -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = acc / root;
        }
    }
    // forward then backward substitution
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut acc = b[i];
        for k in 0..i {
            acc -= l[[i, k]] * z[k];
        }
        z[i] = acc / l[[i, i]];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = z[i];
        for k in (i + 1)..n {
            acc -= l[[k, i]] * x[k];
        }
        x[i] = acc / l[[i, i]];
    }
    Some(x)
}

/// log(exp(a) + exp(b)) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}
