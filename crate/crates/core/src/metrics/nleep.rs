//! Mixture-smoothed variant of the empirical-predictor log-likelihood.
//!
//! Instead of a source head's predictions, the "source classes" are the
//! posterior components of a Gaussian mixture fitted to a PCA reduction of
//! the features. The posterior matrix then plays the role of the soft
//! prediction matrix in [`super::leep`].

use super::{leep, MetricConfig, MetricFlag, MetricValue, MetricsError};
use crate::data::{LabeledFeatureSet, SourceProbs};
use crate::metrics::gmm::{fit_gmm, pca_project};
use crate::num::Scalar;

const EM_MAX_ITERS: u32 = 100;
const EM_TOL: f64 = 1e-7;

pub fn nleep<R: Scalar>(
    set: &LabeledFeatureSet<R>,
    cfg: &MetricConfig,
    seed: u64,
) -> Result<MetricValue<R>, MetricsError> {
    let components = cfg.nleep_components.unwrap_or(set.n_classes()).max(1) as usize;
    let reduced = pca_project(set.features(), cfg.nleep_pca_variance)?;
    let fit = fit_gmm(&reduced, components, cfg.gmm_reg, seed, EM_MAX_ITERS, EM_TOL)?;
    let probs = SourceProbs::new(fit.responsibilities)
        .map_err(|e| MetricsError::Degenerate(format!("mixture posteriors: {e}")))?;
    let mut value = leep(&probs, set.labels())?;
    if !fit.converged {
        value.flag = Some(MetricFlag::NotConverged);
    }
    Ok(value)
}
