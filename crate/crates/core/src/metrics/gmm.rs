//! Seeded Gaussian mixture fitting and the PCA front end it feeds on.
//!
//! Everything here is deterministic given the seed: center picking, the
//! initial hard assignment, and EM itself involve no unordered iteration.

use ndarray::{Array1, Array2};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::MetricsError;
use crate::linalg::{cholesky, forward_solve, population_covariance, sym_eig};
use crate::num::{count, real, wide, Scalar};
use crate::rng;

/// Project rows of `x` onto the leading principal components that together
/// retain at least `keep_variance` of the total variance. At least one
/// component is always kept; zero-variance input projects to a zero column.
pub fn pca_project<R: Scalar>(x: &Array2<R>, keep_variance: f64) -> Result<Array2<R>, MetricsError> {
    let n = x.nrows();
    let (cov, mean) = population_covariance(x);
    let (eigvals, eigvecs) = sym_eig(&cov)?;
    let total: R = eigvals.iter().copied().filter(|v| *v > R::zero()).sum();
    let mut keep = 1;
    if total > R::zero() {
        let target = total * real::<R>(keep_variance);
        let mut acc = eigvals[0];
        while acc < target && keep < eigvals.len() {
            acc += eigvals[keep];
            keep += 1;
        }
    }
    let mut out = Array2::<R>::zeros((n, keep));
    for i in 0..n {
        for j in 0..keep {
            let mut dot = R::zero();
            for d in 0..x.ncols() {
                dot += (x[[i, d]] - mean[d]) * eigvecs[[d, j]];
            }
            out[[i, j]] = dot;
        }
    }
    Ok(out)
}

/// A fitted mixture plus the evidence trail of the run that produced it.
#[derive(Debug, Clone)]
pub struct GmmFit<R: Scalar> {
    pub weights: Vec<R>,
    pub means: Array2<R>,
    pub covariances: Vec<Array2<R>>,
    /// Posterior component probabilities for the training rows, one row per
    /// sample, consistent with the final parameters.
    pub responsibilities: Array2<R>,
    /// Total log-likelihood after each accepted EM iteration.
    pub log_likelihoods: Vec<R>,
    pub converged: bool,
}

struct Component<R: Scalar> {
    weight: R,
    mean: Array1<R>,
    cov: Array2<R>,
    // Cached cholesky factor and log-determinant of cov.
    chol: Array2<R>,
    log_det: R,
}

impl<R: Scalar> Component<R> {
    fn refresh(&mut self) -> Result<(), MetricsError> {
        self.chol = cholesky(&self.cov)?;
        let two = real::<R>(2.0);
        self.log_det = self.chol.diag().iter().map(|v| two * v.ln()).sum();
        Ok(())
    }

    fn log_density(&self, row: &[R]) -> R {
        let d = row.len();
        let diff: Vec<R> = (0..d).map(|j| row[j] - self.mean[j]).collect();
        // cov = L L^T, so the quadratic form is |L^{-1} diff|^2.
        let y = forward_solve(&self.chol, &diff).expect("factor and row share the dimension");
        let quad: R = y.iter().map(|v| *v * *v).sum();
        let half = real::<R>(0.5);
        let log_two_pi = real::<R>((2.0 * std::f64::consts::PI).ln());
        -half * (count::<R>(d) * log_two_pi + self.log_det + quad)
    }
}

pub(crate) fn squared_distance<R: Scalar>(x: &Array2<R>, i: usize, center: &[R]) -> R {
    let mut acc = R::zero();
    for (j, c) in center.iter().enumerate() {
        let d = x[[i, j]] - *c;
        acc += d * d;
    }
    acc
}

/// Classic k-means++ seeding: first center uniform, the rest drawn with
/// probability proportional to squared distance from the nearest chosen one.
pub(crate) fn kmeans_plus_plus<R: Scalar>(x: &Array2<R>, k: usize, seed: u64) -> Vec<Vec<R>> {
    let n = x.nrows();
    let mut gen = rng::rng(seed);
    let first = gen.gen_range(0..n);
    let mut centers: Vec<Vec<R>> = vec![x.row(first).to_vec()];
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| wide(squared_distance(x, i, &centers[0])))
        .collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            WeightedIndex::new(nearest.iter().copied())
                .expect("positive total weight")
                .sample(&mut gen)
        } else {
            // All remaining points coincide with a center; any choice works.
            gen.gen_range(0..n)
        };
        centers.push(x.row(pick).to_vec());
        for i in 0..n {
            let d = wide(squared_distance(x, i, centers.last().unwrap()));
            if d < nearest[i] {
                nearest[i] = d;
            }
        }
    }
    centers
}

fn add_ridge<R: Scalar>(cov: &mut Array2<R>, reg: R) {
    for i in 0..cov.nrows() {
        cov[[i, i]] += reg;
    }
}

/// Fit a `k`-component full-covariance Gaussian mixture with EM.
///
/// `reg` is added to every covariance diagonal, which keeps the factorization
/// alive but means the tracked log-likelihood can dip by a hair between
/// iterations; callers asserting monotonicity should allow that slack.
/// A component whose posterior mass vanishes keeps its previous parameters.
pub fn fit_gmm<R: Scalar>(
    x: &Array2<R>,
    k: usize,
    reg: f64,
    seed: u64,
    max_iters: u32,
    tol: f64,
) -> Result<GmmFit<R>, MetricsError> {
    let n = x.nrows();
    let d = x.ncols();
    if k == 0 {
        return Err(MetricsError::Degenerate("mixture needs at least one component".into()));
    }
    if n <= k {
        return Err(MetricsError::NotEnoughSamples { needed: k, got: n });
    }
    let reg = real::<R>(reg);

    // Hard-assign to k-means++ seeds to get starting parameters.
    let centers = kmeans_plus_plus(x, k, seed);
    let assign: Vec<usize> = (0..n)
        .map(|i| {
            (0..k)
                .min_by(|&a, &b| {
                    squared_distance(x, i, &centers[a])
                        .partial_cmp(&squared_distance(x, i, &centers[b]))
                        .expect("finite features")
                })
                .unwrap()
        })
        .collect();
    let (global_cov, global_mean) = population_covariance(x);
    let mut components: Vec<Component<R>> = Vec::with_capacity(k);
    for c in 0..k {
        let members: Vec<usize> = (0..n).filter(|&i| assign[i] == c).collect();
        let (mean, mut cov) = if members.len() >= 2 {
            let mut sub = Array2::<R>::zeros((members.len(), d));
            for (r, &i) in members.iter().enumerate() {
                sub.row_mut(r).assign(&x.row(i));
            }
            let (cov, mean) = population_covariance(&sub);
            (mean, cov)
        } else {
            // Too small to shape a covariance; borrow the global one.
            let mean = members
                .first()
                .map(|&i| x.row(i).to_owned())
                .unwrap_or_else(|| global_mean.clone());
            (mean, global_cov.clone())
        };
        add_ridge(&mut cov, reg);
        let mut comp = Component {
            weight: count::<R>(members.len().max(1)) / count::<R>(n),
            mean,
            cov,
            chol: Array2::zeros((d, d)),
            log_det: R::zero(),
        };
        comp.refresh()?;
        components.push(comp);
    }
    let weight_total: R = components.iter().map(|c| c.weight).sum();
    for c in &mut components {
        c.weight /= weight_total;
    }

    let mut resp = Array2::<R>::zeros((n, k));
    let mut log_likelihoods: Vec<R> = Vec::new();
    let mut converged = false;

    // E-step into `resp`, returning the total log-likelihood.
    let e_step = |components: &[Component<R>], resp: &mut Array2<R>| -> R {
        let mut total = R::zero();
        let mut log_terms = vec![R::zero(); k];
        for i in 0..n {
            let row = x.row(i).to_vec();
            for (c, comp) in components.iter().enumerate() {
                log_terms[c] = comp.weight.ln() + comp.log_density(&row);
            }
            let max = log_terms.iter().copied().fold(log_terms[0], R::max);
            let mut norm = R::zero();
            for t in &log_terms {
                norm += (*t - max).exp();
            }
            let log_norm = max + norm.ln();
            total += log_norm;
            for c in 0..k {
                resp[[i, c]] = (log_terms[c] - log_norm).exp();
            }
        }
        total
    };

    for _ in 0..max_iters {
        let ll = e_step(&components, &mut resp);
        if let Some(&prev) = log_likelihoods.last() {
            if (ll - prev).abs() <= real::<R>(tol) * (R::one() + ll.abs()) {
                log_likelihoods.push(ll);
                converged = true;
                break;
            }
        }
        log_likelihoods.push(ll);

        // M-step.
        for c in 0..k {
            let mass: R = (0..n).map(|i| resp[[i, c]]).sum();
            if mass <= real::<R>(1e-10) {
                continue;
            }
            let mut mean = Array1::<R>::zeros(d);
            for i in 0..n {
                for j in 0..d {
                    mean[j] += resp[[i, c]] * x[[i, j]];
                }
            }
            mean.mapv_inplace(|v| v / mass);
            let mut cov = Array2::<R>::zeros((d, d));
            for i in 0..n {
                let r = resp[[i, c]];
                for a in 0..d {
                    let da = x[[i, a]] - mean[a];
                    for b in 0..=a {
                        cov[[a, b]] += r * da * (x[[i, b]] - mean[b]);
                    }
                }
            }
            for a in 0..d {
                for b in 0..a {
                    cov[[a, b]] /= mass;
                    cov[[b, a]] = cov[[a, b]];
                }
                cov[[a, a]] /= mass;
            }
            add_ridge(&mut cov, reg);
            components[c].weight = mass / count::<R>(n);
            components[c].mean = mean;
            components[c].cov = cov;
            components[c].refresh()?;
        }
        let weight_total: R = components.iter().map(|c| c.weight).sum();
        for comp in &mut components {
            comp.weight /= weight_total;
        }
    }

    // Make the reported responsibilities consistent with the final parameters.
    let final_ll = e_step(&components, &mut resp);
    if log_likelihoods.is_empty() {
        log_likelihoods.push(final_ll);
    }

    let mut means = Array2::<R>::zeros((k, d));
    for (c, comp) in components.iter().enumerate() {
        means.row_mut(c).assign(&comp.mean);
    }
    Ok(GmmFit {
        weights: components.iter().map(|c| c.weight).collect(),
        means,
        covariances: components.into_iter().map(|c| c.cov).collect(),
        responsibilities: resp,
        log_likelihoods,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    fn blob_data() -> Array2<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut x = Array2::<f64>::zeros((60, 2));
        for i in 0..60 {
            let (cx, cy) = if i < 30 { (0.0, 0.0) } else { (8.0, 8.0) };
            x[[i, 0]] = cx + rng.gen_range(-0.5..0.5);
            x[[i, 1]] = cy + rng.gen_range(-0.5..0.5);
        }
        x
    }

    #[test]
    fn pca_keeps_one_axis_when_it_dominates() {
        let mut x = Array2::<f64>::zeros((50, 2));
        for i in 0..50 {
            x[[i, 0]] = i as f64; // variance ~208
            x[[i, 1]] = if i % 2 == 0 { 0.1 } else { -0.1 }; // variance 0.01
        }
        let p = pca_project(&x, 0.8).unwrap();
        assert_eq!(p.ncols(), 1);
    }

    #[test]
    fn pca_needs_both_axes_when_variance_is_split() {
        let x = array![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        let p = pca_project(&x, 0.8).unwrap();
        assert_eq!(p.ncols(), 2);
    }

    #[test]
    fn pca_with_full_retention_preserves_pairwise_distances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x = Array2::<f64>::from_shape_fn((12, 4), |_| rng.gen_range(-1.0..1.0));
        let p = pca_project(&x, 1.0).unwrap();
        assert_eq!(p.ncols(), 4);
        for i in 0..12 {
            for j in 0..i {
                let orig: f64 = (0..4).map(|d| (x[[i, d]] - x[[j, d]]).powi(2)).sum();
                let proj: f64 = (0..4).map(|d| (p[[i, d]] - p[[j, d]]).powi(2)).sum();
                assert_abs_diff_eq!(orig, proj, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn pca_zero_variance_input_projects_to_a_zero_column() {
        let x = Array2::<f64>::from_elem((5, 3), 2.5);
        let p = pca_project(&x, 0.8).unwrap();
        assert_eq!(p.dim(), (5, 1));
        assert!(p.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn two_blobs_are_separated_with_near_hard_responsibilities() {
        let x = blob_data();
        let fit = fit_gmm(&x, 2, 1e-6, 0, 100, 1e-7).unwrap();
        assert!(fit.converged);
        // Each blob should be owned by a single component.
        let owner = |i: usize| if fit.responsibilities[[i, 0]] > 0.5 { 0 } else { 1 };
        let first = owner(0);
        for i in 0..30 {
            assert_eq!(owner(i), first);
            assert!(fit.responsibilities[[i, first]] > 0.999);
        }
        for i in 30..60 {
            assert_eq!(owner(i), 1 - first);
        }
        let m = fit.means.row(first);
        assert!(m[0].abs() < 0.3 && m[1].abs() < 0.3);
        assert_abs_diff_eq!(fit.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn log_likelihood_trail_never_decreases_beyond_ridge_slack() {
        let x = blob_data();
        for seed in 0..20 {
            let fit = fit_gmm(&x, 3, 1e-6, seed, 100, 1e-9).unwrap();
            for pair in fit.log_likelihoods.windows(2) {
                assert!(
                    pair[1] >= pair[0] - 1e-7 * (1.0 + pair[0].abs()),
                    "seed {seed}: {} -> {}",
                    pair[0],
                    pair[1]
                );
            }
        }
    }

    #[test]
    fn same_seed_gives_bitwise_identical_fits() {
        let x = blob_data();
        let a = fit_gmm(&x, 3, 1e-6, 42, 100, 1e-7).unwrap();
        let b = fit_gmm(&x, 3, 1e-6, 42, 100, 1e-7).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.means, b.means);
        assert_eq!(a.responsibilities, b.responsibilities);
        assert_eq!(a.log_likelihoods, b.log_likelihoods);
    }

    #[test]
    fn single_component_recovers_sample_moments() {
        let x = array![[0.0, 1.0], [2.0, 3.0], [4.0, 5.0], [6.0, 7.0]];
        let fit = fit_gmm(&x, 1, 1e-9, 0, 50, 1e-10).unwrap();
        assert!(fit.responsibilities.iter().all(|&r| (r - 1.0f64).abs() < 1e-12));
        assert_abs_diff_eq!(fit.means[[0, 0]], 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.means[[0, 1]], 4.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.covariances[0][[0, 0]], 5.0, epsilon = 1e-6);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let x = array![[0.0], [1.0]];
        assert!(matches!(
            fit_gmm(&x, 2, 1e-6, 0, 10, 1e-6),
            Err(MetricsError::NotEnoughSamples { .. })
        ));
    }
}
