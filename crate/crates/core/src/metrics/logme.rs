//! Marginal-likelihood scoring of features under a Bayesian linear head.
//!
//! Each target class gets a one-vs-rest 0/1 regression target `y`. The
//! model is `y = F w + noise` with isotropic prior `w ~ N(0, 1/alpha)` and
//! noise `N(0, 1/beta)`; [`evidence_maximize`] ascends the log marginal
//! likelihood in `(alpha, beta)` and [`logme`] averages the per-class
//! optima, normalized by the sample count.
//!
//! All evidence terms are expressed through the eigenvalues `lambda_i` of
//! the feature Gram matrix and squared projections `t_i` of `y` onto the
//! matching eigendirections. Both the `F^T F` route (d <= n) and the
//! `F F^T` route (n < d) produce the same `(lambda_i, t_i)` pairs for the
//! nonzero spectrum, so one evidence formula covers both shapes.

use ndarray::Array2;

use super::{MetricConfig, MetricFlag, MetricValue, MetricsError};
use crate::data::LabeledFeatureSet;
use crate::linalg::sym_eig;
use crate::num::{count, real, Scalar};

/// Outcome of one evidence ascent.
#[derive(Debug, Clone)]
pub struct EvidenceFit<R: Scalar> {
    pub alpha: R,
    pub beta: R,
    pub log_evidence: R,
    /// Evidence after initialization and after each accepted update.
    pub history: Vec<R>,
    pub iterations: u32,
    pub converged: bool,
}

/// Log marginal likelihood at fixed `(alpha, beta)`, in spectrum form.
pub fn log_evidence<R: Scalar>(
    alpha: R,
    beta: R,
    lambdas: &[R],
    t: &[R],
    y_sq: R,
    n: usize,
    d: usize,
) -> R {
    let mut res = y_sq;
    let mut m_sq = R::zero();
    let mut log_det = count::<R>(d - lambdas.len()) * alpha.ln();
    for (&lam, &ti) in lambdas.iter().zip(t) {
        let denom = alpha + beta * lam;
        let shrink = alpha / denom;
        res += ti * (shrink * shrink - R::one());
        m_sq += beta * beta * lam * ti / (denom * denom);
        log_det += denom.ln();
    }
    res = res.max(R::zero());
    let half = real::<R>(0.5);
    let log_two_pi = real::<R>((2.0 * std::f64::consts::PI).ln());
    half * (count::<R>(d) * alpha.ln() + count::<R>(n) * beta.ln()
        - count::<R>(n) * log_two_pi
        - beta * res
        - alpha * m_sq
        - log_det)
}

/// Fixed-point ascent on the evidence, starting from `alpha = beta = 1`.
///
/// Updates are accepted only when they raise the evidence, so the history
/// is non-decreasing by construction; a proposed step that lowers it ends
/// the ascent at the best point seen.
pub fn evidence_maximize<R: Scalar>(
    lambdas: &[R],
    t: &[R],
    y_sq: R,
    n: usize,
    d: usize,
    tol: f64,
    max_iters: u32,
) -> EvidenceFit<R> {
    assert_eq!(lambdas.len(), t.len());
    let tol = real::<R>(tol);
    let mut alpha = R::one();
    let mut beta = R::one();
    let mut best = log_evidence(alpha, beta, lambdas, t, y_sq, n, d);
    let mut history = vec![best];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iters {
        iterations += 1;
        let mut gamma = R::zero();
        let mut m_sq = R::zero();
        let mut res = y_sq;
        for (&lam, &ti) in lambdas.iter().zip(t) {
            let denom = alpha + beta * lam;
            let shrink = alpha / denom;
            gamma += beta * lam / denom;
            m_sq += beta * beta * lam * ti / (denom * denom);
            res += ti * (shrink * shrink - R::one());
        }
        if m_sq <= R::zero() || res <= R::zero() {
            // Boundary optimum: either no signal or a perfect fit.
            converged = true;
            break;
        }
        let next_alpha = gamma / m_sq;
        let next_beta = (count::<R>(n) - gamma) / res;
        if !next_alpha.is_finite()
            || !next_beta.is_finite()
            || next_alpha <= R::zero()
            || next_beta <= R::zero()
        {
            converged = true;
            break;
        }
        let cand = log_evidence(next_alpha, next_beta, lambdas, t, y_sq, n, d);
        if cand < best {
            converged = true;
            break;
        }
        let gain = cand - best;
        alpha = next_alpha;
        beta = next_beta;
        best = cand;
        history.push(best);
        if gain <= tol {
            converged = true;
            break;
        }
    }
    EvidenceFit { alpha, beta, log_evidence: best, history, iterations, converged }
}

/// Kept spectrum of the features plus the basis needed to project targets.
struct Spectrum<R: Scalar> {
    lambdas: Vec<R>,
    basis: Basis<R>,
}

enum Basis<R: Scalar> {
    /// Columns are eigenvectors of `F^T F`; targets enter as `F^T y`.
    Gram(Array2<R>),
    /// Columns are eigenvectors of `F F^T`; targets enter directly.
    Outer(Array2<R>),
}

fn spectrum<R: Scalar>(
    features: &Array2<R>,
    rcond: f64,
    use_gram: bool,
) -> Result<Spectrum<R>, MetricsError> {
    let (n, d) = features.dim();
    let side = if use_gram { d } else { n };
    let mut m = Array2::<R>::zeros((side, side));
    for a in 0..side {
        for b in 0..=a {
            let mut acc = R::zero();
            if use_gram {
                for i in 0..n {
                    acc += features[[i, a]] * features[[i, b]];
                }
            } else {
                for j in 0..d {
                    acc += features[[a, j]] * features[[b, j]];
                }
            }
            m[[a, b]] = acc;
            m[[b, a]] = acc;
        }
    }
    let (vals, vecs) = sym_eig(&m)?;
    let cutoff = vals[0].max(R::zero()) * real::<R>(rcond);
    let kept = vals.iter().take_while(|&&v| v > cutoff && v > R::zero()).count();
    let mut basis = Array2::<R>::zeros((side, kept));
    for j in 0..kept {
        basis.column_mut(j).assign(&vecs.column(j));
    }
    Ok(Spectrum {
        lambdas: vals.iter().take(kept).copied().collect(),
        basis: if use_gram { Basis::Gram(basis) } else { Basis::Outer(basis) },
    })
}

/// Squared projections of a 0/1 class-indicator target onto the spectrum.
fn class_projections<R: Scalar>(
    spec: &Spectrum<R>,
    features: &Array2<R>,
    labels: &[u32],
    class: u32,
) -> Vec<R> {
    match &spec.basis {
        Basis::Gram(v) => {
            // F^T y is the column sum of the class's feature rows.
            let d = features.ncols();
            let mut fy = vec![R::zero(); d];
            for (i, &l) in labels.iter().enumerate() {
                if l == class {
                    for (j, slot) in fy.iter_mut().enumerate() {
                        *slot += features[[i, j]];
                    }
                }
            }
            spec.lambdas
                .iter()
                .enumerate()
                .map(|(k, &lam)| {
                    let p: R = fy.iter().zip(v.column(k)).map(|(&a, &b)| a * b).sum();
                    p * p / lam
                })
                .collect()
        }
        Basis::Outer(u) => (0..spec.lambdas.len())
            .map(|k| {
                let c: R = labels
                    .iter()
                    .enumerate()
                    .filter(|(_, &l)| l == class)
                    .map(|(i, _)| u[[i, k]])
                    .sum();
                c * c
            })
            .collect(),
    }
}

fn logme_with_route<R: Scalar>(
    set: &LabeledFeatureSet<R>,
    cfg: &MetricConfig,
    use_gram: bool,
) -> Result<MetricValue<R>, MetricsError> {
    let n = set.n_samples();
    let d = set.dim();
    let spec = spectrum(set.features(), cfg.pinv_rcond, use_gram)?;
    let mut total = R::zero();
    let mut flag = None;
    for class in 0..set.n_classes() {
        let members = set.labels().iter().filter(|&&l| l == class).count();
        if members == 0 || members == n {
            return Err(MetricsError::ZeroVarianceTarget { class });
        }
        let t = class_projections(&spec, set.features(), set.labels(), class);
        let y_sq = count::<R>(members);
        let fit = evidence_maximize(
            &spec.lambdas,
            &t,
            y_sq,
            n,
            d,
            cfg.logme_tol,
            cfg.logme_max_iters,
        );
        if !fit.converged {
            flag = Some(MetricFlag::NotConverged);
        }
        total += fit.log_evidence / count::<R>(n);
    }
    Ok(MetricValue { value: total / count::<R>(set.n_classes() as usize), flag })
}

/// Mean per-class evidence optimum, normalized by the sample count.
pub fn logme<R: Scalar>(
    set: &LabeledFeatureSet<R>,
    cfg: &MetricConfig,
) -> Result<MetricValue<R>, MetricsError> {
    logme_with_route(set, cfg, set.dim() <= set.n_samples())
}
