//! Sparse reflectivity recovery.
//!
//! [`solve_l1`] minimizes `½‖y − D r‖²₂ + λ‖r‖₁` over complex `r` with an
//! accelerated proximal gradient method. Momentum is restarted whenever a
//! step would raise the objective, so the recorded objective sequence is
//! non-increasing. [`exhaustive_l0`] is the combinatorial reference for small
//! problems.

use alloc::vec;
use alloc::vec::Vec;

use itertools::Itertools;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::{CMatrix, CVector, Cx};

/// How the ℓ1 weight `λ` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularization {
    /// Use this `λ` as given.
    Fixed(f64),
    /// `λ = factor · ‖Dᴴ y‖_∞`.
    Relative(f64),
}

impl Regularization {
    fn resolve(&self, correlation_max: f64) -> Result<f64> {
        let lambda = match *self {
            Regularization::Fixed(l) => l,
            Regularization::Relative(f) => f * correlation_max,
        };
        if lambda.is_finite() && lambda >= 0.0 {
            Ok(lambda)
        } else {
            Err(invalid!("regularization weight must be finite and nonnegative, got {lambda}"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryConfig {
    pub regularization: Regularization,
    pub max_iterations: usize,
    /// Stop once the relative objective decrease of one step falls below this.
    pub convergence_tol: f64,
    /// Known number of scatterers; the support is then the `T` strongest pixels.
    pub sparsity: Option<usize>,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            regularization: Regularization::Relative(0.1),
            max_iterations: 5000,
            convergence_tol: 1e-10,
            sparsity: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryWarning {
    /// `λ = 0` on an underdetermined system.
    IllPosed,
    /// A restricted least-squares system was rank deficient; the minimum-norm
    /// solution was used.
    RankDeficient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub r_hat: CVector,
    /// Ascending pixel indices.
    pub support: Vec<usize>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Resolved ℓ1 weight (zero for the ℓ0 oracle).
    pub lambda: f64,
    /// Objective after each accepted step (ℓ1 solver only).
    pub objective_trace: Vec<f64>,
    pub warnings: Vec<RecoveryWarning>,
}

fn check_finite_inputs(d: &CMatrix, y: &CVector) -> Result<()> {
    if d.nrows() != y.len() {
        return Err(invalid!("D has {} rows but y has {} entries", d.nrows(), y.len()));
    }
    let finite = |z: &Cx| z.re.is_finite() && z.im.is_finite();
    if !d.iter().all(finite) || !y.iter().all(finite) {
        return Err(invalid!("measurement matrix and observations must be finite"));
    }
    Ok(())
}

/// Complex soft-thresholding `z · max(1 − τ/|z|, 0)`.
pub fn soft_threshold(z: Cx, tau: f64) -> Cx {
    let r = z.norm();
    if r <= tau || r == 0.0 {
        Cx::new(0.0, 0.0)
    } else {
        z * ((r - tau) / r)
    }
}

fn l1_norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

/// Largest eigenvalue of `DᴴD` by power iteration (20 steps, relative tolerance 1e−6).
pub fn lipschitz_estimate(d: &CMatrix) -> f64 {
    let k = d.ncols();
    if k == 0 || d.nrows() == 0 {
        return 0.0;
    }
    let mut v = CVector::from_element(k, Cx::new(1.0 / (k as f64).sqrt(), 0.0));
    let mut estimate = 0.0;
    for _ in 0..20 {
        let w = d.ad_mul(&(d * &v));
        let n = w.norm();
        if n == 0.0 {
            return 0.0;
        }
        v = w / Cx::new(n, 0.0);
        let done = (n - estimate).abs() <= 1e-6 * n;
        estimate = n;
        if done {
            break;
        }
    }
    estimate
}

/// Accelerated proximal gradient solution of the complex LASSO.
pub fn solve_l1(d: &CMatrix, y: &CVector, config: &RecoveryConfig) -> Result<RecoveryResult> {
    check_finite_inputs(d, y)?;
    if config.max_iterations == 0 {
        return Err(invalid!("max_iterations must be at least 1"));
    }
    if !(config.convergence_tol > 0.0) {
        return Err(invalid!("convergence tolerance must be positive"));
    }
    let (n, k) = d.shape();
    if let Some(t) = config.sparsity {
        if t == 0 || t > k {
            return Err(invalid!("sparsity {t} must lie in [1, {k}]"));
        }
    }

    let d_h = d.adjoint();
    let correlation = &d_h * y;
    let correlation_max = correlation.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let lambda = config.regularization.resolve(correlation_max)?;
    let mut warnings = Vec::new();
    if lambda == 0.0 && n < k {
        warnings.push(RecoveryWarning::IllPosed);
    }

    let objective = |dx: &CVector, x: &CVector| 0.5 * (dx - y).norm_squared() + lambda * l1_norm(x);

    let mut x = CVector::zeros(k);
    let mut dx = CVector::zeros(n);
    let mut current = objective(&dx, &x);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    let mut lipschitz = lipschitz_estimate(d);
    if lipschitz == 0.0 {
        // D = 0: every r has the same data fit, zero minimizes the penalty.
        converged = true;
    } else {
        let mut z = x.clone();
        let mut dz = dx.clone();
        let mut t = 1.0f64;
        let mut momentum = false;

        'outer: while iterations < config.max_iterations {
            iterations += 1;
            let (x_next, dx_next, next) = loop {
                let step = 1.0 / lipschitz;
                let grad = &d_h * (&dz - y);
                let x_next = (&z - grad * Cx::new(step, 0.0)).map(|v| soft_threshold(v, lambda * step));
                let dx_next = d * &x_next;
                let next = objective(&dx_next, &x_next);
                if next <= current {
                    break (x_next, dx_next, next);
                }
                if momentum {
                    z.copy_from(&x);
                    dz.copy_from(&dx);
                    t = 1.0;
                    momentum = false;
                    continue;
                }
                if next - current <= 1e-14 * current.max(f64::MIN_POSITIVE) {
                    // Rounding-level stall at the minimizer.
                    converged = true;
                    break 'outer;
                }
                lipschitz *= 2.0;
            };

            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            z = &x_next + (&x_next - &x) * Cx::new(beta, 0.0);
            dz = &dx_next + (&dx_next - &dx) * Cx::new(beta, 0.0);
            momentum = beta > 0.0;
            t = t_next;

            let decrease = (current - next) / current.max(f64::MIN_POSITIVE);
            x = x_next;
            dx = dx_next;
            current = next;
            trace.push(current);
            if decrease < config.convergence_tol {
                converged = true;
                break;
            }
        }
    }

    let support = match config.sparsity {
        Some(t) => extract_support(&x, t)?,
        None => x
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > 0.0)
            .map(|(i, _)| i)
            .collect(),
    };
    Ok(RecoveryResult {
        residual_norm: (&dx - y).norm(),
        r_hat: x,
        support,
        iterations,
        converged,
        lambda,
        objective_trace: trace,
        warnings,
    })
}

/// Restricted least squares on `support`; returns the coefficients and
/// whether the restricted matrix was rank deficient.
fn restricted_least_squares(d: &CMatrix, y: &CVector, support: &[usize]) -> (CVector, bool) {
    let sub = d.select_columns(support);
    let svd = sub.svd(true, true);
    let largest = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = largest * (d.nrows().max(support.len()) as f64) * f64::EPSILON;
    let rank_deficient = largest == 0.0 || svd.singular_values.iter().any(|&s| s <= eps);
    let coeffs = svd
        .solve(y, eps)
        .unwrap_or_else(|_| CVector::zeros(support.len()));
    (coeffs, rank_deficient)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Largest number of supports [`exhaustive_l0`] will enumerate.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

/// Best `T`-sparse least-squares fit by enumeration of all supports.
///
/// Supports are visited in lexicographic order and replaced only on a strict
/// improvement, so ties resolve to the smallest support.
pub fn exhaustive_l0(d: &CMatrix, y: &CVector, t: usize) -> Result<RecoveryResult> {
    check_finite_inputs(d, y)?;
    let (n, k) = d.shape();
    if t == 0 || t > k {
        return Err(invalid!("sparsity {t} must lie in [1, {k}]"));
    }
    if t > n {
        return Err(invalid!("sparsity {t} exceeds the number of measurements {n}"));
    }
    let count = binomial(k, t);
    if count > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge {
            count,
            limit: EXHAUSTIVE_LIMIT,
        });
    }

    let tie = 1e-12 * y.norm_squared();
    let mut best: Option<(f64, Vec<usize>, CVector, bool)> = None;
    for support in (0..k).combinations(t) {
        let (coeffs, deficient) = restricted_least_squares(d, y, &support);
        let residual = (y - d.select_columns(&support) * &coeffs).norm_squared();
        let better = match &best {
            None => true,
            Some((b, ..)) => residual < *b - tie,
        };
        if better {
            best = Some((residual, support, coeffs, deficient));
        }
    }
    let (residual, support, coeffs, deficient) = best.expect("at least one support");
    let mut r_hat = CVector::zeros(k);
    for (&i, c) in support.iter().zip(coeffs.iter()) {
        r_hat[i] = *c;
    }
    Ok(RecoveryResult {
        r_hat,
        support,
        residual_norm: residual.sqrt(),
        iterations: count as usize,
        converged: true,
        lambda: 0.0,
        objective_trace: Vec::new(),
        warnings: if deficient { vec![RecoveryWarning::RankDeficient] } else { Vec::new() },
    })
}

/// Indices of the `t` largest-modulus entries, ascending. Ties go to the
/// smaller index.
pub fn extract_support(r_hat: &CVector, t: usize) -> Result<Vec<usize>> {
    let k = r_hat.len();
    if t == 0 || t > k {
        return Err(invalid!("support size {t} must lie in [1, {k}]"));
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        r_hat[b]
            .norm()
            .partial_cmp(&r_hat[a].norm())
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(t);
    order.sort_unstable();
    Ok(order)
}

/// Least-squares refit on a fixed support.
#[derive(Debug, Clone, PartialEq)]
pub struct Debiased {
    pub values: CVector,
    pub rank_deficient: bool,
}

pub fn debias_on_support(d: &CMatrix, y: &CVector, support: &[usize]) -> Result<Debiased> {
    check_finite_inputs(d, y)?;
    let (n, k) = d.shape();
    if support.len() > n {
        return Err(invalid!(
            "support of size {} exceeds the number of measurements {n}",
            support.len()
        ));
    }
    if let Some(&bad) = support.iter().find(|&&i| i >= k) {
        return Err(invalid!("support index {bad} out of range (K = {k})"));
    }
    if support.iter().sorted_unstable().tuple_windows().any(|(a, b)| a == b) {
        return Err(invalid!("support indices must be distinct"));
    }
    let mut values = CVector::zeros(k);
    if support.is_empty() {
        return Ok(Debiased { values, rank_deficient: false });
    }
    let (coeffs, rank_deficient) = restricted_least_squares(d, y, support);
    for (&i, c) in support.iter().zip(coeffs.iter()) {
        values[i] = *c;
    }
    Ok(Debiased { values, rank_deficient })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::complex_gaussian_noise;
    use approx::assert_relative_eq;

    fn cmat(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let v = complex_gaussian_noise(rows * cols, 1.0, seed);
        CMatrix::from_iterator(rows, cols, v.iter().copied())
    }

    fn real_vec(v: &[f64]) -> CVector {
        CVector::from_iterator(v.len(), v.iter().map(|&x| Cx::new(x, 0.0)))
    }

    #[test]
    fn identity_design_is_soft_threshold() {
        let d = CMatrix::identity(3, 3);
        let y = real_vec(&[2.0, 0.0, 0.0]);
        let cfg = RecoveryConfig { regularization: Regularization::Fixed(0.5), ..Default::default() };
        let out = solve_l1(&d, &y, &cfg).unwrap();
        assert_relative_eq!(out.r_hat[0].re, 1.5, epsilon = 1e-12);
        assert_eq!(out.r_hat[1], Cx::new(0.0, 0.0));
        assert_eq!(out.r_hat[2], Cx::new(0.0, 0.0));
        assert!(out.converged);
        assert_eq!(out.support, vec![0]);
    }

    #[test]
    fn zero_observation_gives_zero() {
        let d = cmat(5, 9, 1);
        let y = CVector::zeros(5);
        let cfg = RecoveryConfig { regularization: Regularization::Fixed(0.3), ..Default::default() };
        let out = solve_l1(&d, &y, &cfg).unwrap();
        assert!(out.r_hat.iter().all(|z| *z == Cx::new(0.0, 0.0)));
        assert!(out.support.is_empty());
    }

    #[test]
    fn rejects_non_finite_and_flags_ill_posed() {
        let d = cmat(3, 6, 1);
        let mut y = CVector::zeros(3);
        y[0] = Cx::new(f64::NAN, 0.0);
        assert!(matches!(solve_l1(&d, &y, &RecoveryConfig::default()), Err(Error::InvalidArgument(_))));
        let y = complex_gaussian_noise(3, 1.0, 2);
        let cfg = RecoveryConfig {
            regularization: Regularization::Fixed(0.0),
            max_iterations: 50,
            ..Default::default()
        };
        let out = solve_l1(&d, &y, &cfg).unwrap();
        assert!(out.warnings.contains(&RecoveryWarning::IllPosed));
    }

    #[test]
    fn objective_trace_is_monotone() {
        let d = cmat(10, 30, 5);
        let mut r = CVector::zeros(30);
        r[3] = Cx::new(1.0, 0.5);
        r[17] = Cx::new(-0.7, 0.2);
        let y = &d * &r + complex_gaussian_noise(10, 0.05, 6);
        let cfg = RecoveryConfig {
            regularization: Regularization::Relative(0.05),
            max_iterations: 3000,
            convergence_tol: 1e-14,
            sparsity: Some(2),
        };
        let out = solve_l1(&d, &y, &cfg).unwrap();
        assert!(out.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(out.support, vec![3, 17]);
    }

    #[test]
    fn noiseless_identity_recovery_as_lambda_shrinks() {
        let d = CMatrix::identity(6, 6);
        let r = CVector::from_fn(6, |i, _| Cx::new(i as f64 - 2.5, 0.3 * i as f64));
        let y = &d * &r;
        for lambda in [1e-3, 1e-5, 1e-8] {
            let cfg = RecoveryConfig { regularization: Regularization::Fixed(lambda), ..Default::default() };
            let out = solve_l1(&d, &y, &cfg).unwrap();
            assert!((out.r_hat - &r).norm() <= 6.0 * lambda + 1e-12);
        }
    }

    #[test]
    fn exhaustive_full_support_is_least_squares() {
        let d = cmat(6, 3, 9);
        let y = complex_gaussian_noise(6, 1.0, 10);
        let out = exhaustive_l0(&d, &y, 3).unwrap();
        let normal = (d.adjoint() * &d).lu().solve(&(d.adjoint() * &y)).unwrap();
        assert!((out.r_hat - normal).norm() < 1e-10);
        assert_eq!(out.support, vec![0, 1, 2]);
    }

    #[test]
    fn exhaustive_single_column() {
        let d = cmat(5, 8, 3);
        let y = d.column(6).into_owned();
        let out = exhaustive_l0(&d, &y, 1).unwrap();
        assert_eq!(out.support, vec![6]);
        assert!(out.residual_norm < 1e-12);
    }

    #[test]
    fn exhaustive_planted_pair() {
        let d = cmat(6, 10, 4);
        let mut r = CVector::zeros(10);
        r[2] = Cx::new(0.8, -0.1);
        r[7] = Cx::new(-1.2, 0.4);
        let out = exhaustive_l0(&d, &(&d * &r), 2).unwrap();
        assert_eq!(out.support, vec![2, 7]);
    }

    #[test]
    fn exhaustive_guard_and_ties() {
        let d = cmat(10, 100, 1);
        let y = CVector::zeros(10);
        assert!(matches!(exhaustive_l0(&d, &y, 5), Err(Error::TooLarge { .. })));
        assert!(exhaustive_l0(&cmat(3, 6, 1), &CVector::zeros(3), 4).is_err());

        let mut d = cmat(4, 3, 7);
        let c = d.column(0).into_owned();
        d.set_column(2, &c);
        let out = exhaustive_l0(&d, &c, 1).unwrap();
        assert_eq!(out.support, vec![0]);
    }

    #[test]
    fn exhaustive_dominates_random_supports() {
        let d = cmat(6, 9, 12);
        let y = complex_gaussian_noise(6, 1.0, 13);
        let best = exhaustive_l0(&d, &y, 2).unwrap();
        for support in (0..9).combinations(2) {
            let (c, _) = restricted_least_squares(&d, &y, &support);
            let res = (&y - d.select_columns(&support) * c).norm();
            assert!(best.residual_norm <= res + 1e-12);
        }
    }

    #[test]
    fn support_examples() {
        assert_eq!(extract_support(&real_vec(&[0.0, 5.0, 0.0, 3.0]), 2).unwrap(), vec![1, 3]);
        assert_eq!(extract_support(&real_vec(&[1.0, 1.0, 1.0]), 2).unwrap(), vec![0, 1]);
        assert_eq!(extract_support(&real_vec(&[0.1, 0.9, 0.89]), 1).unwrap(), vec![1]);
        assert!(extract_support(&real_vec(&[1.0]), 2).is_err());
        assert!(extract_support(&real_vec(&[1.0]), 0).is_err());
    }

    #[test]
    fn debias_examples() {
        let d = cmat(4, 4, 21);
        let y = complex_gaussian_noise(4, 1.0, 22);
        let out = debias_on_support(&d, &y, &[0, 1, 2, 3]).unwrap();
        let direct = d.clone().lu().solve(&y).unwrap();
        assert!((out.values - direct).norm() < 1e-10);

        let d = cmat(6, 5, 23);
        let y = d.column(3) * Cx::new(2.0, 0.0);
        let out = debias_on_support(&d, &y, &[3]).unwrap();
        assert_relative_eq!(out.values[3].re, 2.0, epsilon = 1e-12);
        assert_relative_eq!(out.values[3].im, 0.0, epsilon = 1e-12);

        let d = cmat(9, 6, 24);
        let y = complex_gaussian_noise(9, 1.0, 25);
        let support = [0, 2, 5];
        let out = debias_on_support(&d, &y, &support).unwrap();
        let sub = d.select_columns(&support);
        let normal = (sub.adjoint() * &sub).lu().solve(&(sub.adjoint() * &y)).unwrap();
        for (j, &i) in support.iter().enumerate() {
            assert!((out.values[i] - normal[j]).norm() < 1e-8);
        }
        assert!(!out.rank_deficient);

        assert!(debias_on_support(&cmat(2, 5, 1), &CVector::zeros(2), &[0, 1, 2]).is_err());
    }

    #[test]
    fn debias_flags_rank_deficiency() {
        let mut d = cmat(5, 4, 31);
        let c = d.column(0).into_owned();
        d.set_column(1, &c);
        let y = d.column(0) * Cx::new(2.0, 0.0);
        let out = debias_on_support(&d, &y, &[0, 1]).unwrap();
        assert!(out.rank_deficient);
        // minimum-norm split of the shared column
        assert_relative_eq!(out.values[0].re, 1.0, epsilon = 1e-9);
        assert_relative_eq!(out.values[1].re, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn soft_threshold_keeps_phase() {
        let z = Cx::from_polar(2.0, 1.1);
        let s = soft_threshold(z, 0.5);
        assert_relative_eq!(s.norm(), 1.5, epsilon = 1e-15);
        assert_relative_eq!(s.arg(), 1.1, epsilon = 1e-15);
        assert_eq!(soft_threshold(Cx::new(0.0, 0.0), 0.0), Cx::new(0.0, 0.0));
        assert_eq!(soft_threshold(Cx::new(0.1, 0.0), 0.2), Cx::new(0.0, 0.0));
    }
}
