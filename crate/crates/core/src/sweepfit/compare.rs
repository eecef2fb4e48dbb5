use serde::{Deserialize, Serialize};

use super::{FitModel, FitReport};
use crate::models::{LossModelParams, PowerLawTlsParams, ShiftModelParams};

/// Pairwise Q_TLS,0 ratio above which the estimates are called inconsistent.
pub const INCONSISTENCY_RATIO: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlsEstimate {
    pub model: FitModel,
    pub q_tls0: f64,
    pub stderr: Option<f64>,
}

/// Q_TLS,0 from the different pipelines side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlsComparison {
    pub estimates: Vec<TlsEstimate>,
    pub missing: Vec<FitModel>,
    /// Largest over smallest estimate; `None` with fewer than two.
    pub max_pairwise_ratio: Option<f64>,
    pub partial: bool,
    pub warning: Option<String>,
}

fn entry<P>(model: FitModel, report: Option<&FitReport<P>>) -> Result<TlsEstimate, FitModel> {
    let r = report.ok_or(model)?;
    let e = r.estimate("q_tls0").ok_or(model)?;
    Ok(TlsEstimate {
        model,
        q_tls0: e.value,
        stderr: e.stderr,
    })
}

/// Compares Q_TLS,0 across the loss-vs-temperature, frequency-shift and
/// power-law fits of one resonator. Absent reports are listed in `missing`
/// and the comparison covers the rest.
pub fn compare_tls_estimates(
    loss_vs_temperature: Option<&FitReport<LossModelParams>>,
    frequency_shift: Option<&FitReport<ShiftModelParams>>,
    power_law: Option<&FitReport<PowerLawTlsParams>>,
) -> TlsComparison {
    let mut estimates = Vec::new();
    let mut missing = Vec::new();
    for e in [
        entry(FitModel::LossVsTemperature, loss_vs_temperature),
        entry(FitModel::FrequencyShift, frequency_shift),
        entry(FitModel::PowerLaw, power_law),
    ] {
        match e {
            Ok(est) => estimates.push(est),
            Err(model) => missing.push(model),
        }
    }
    let max_pairwise_ratio = (estimates.len() >= 2).then(|| {
        let hi = estimates.iter().map(|e| e.q_tls0).fold(f64::MIN, f64::max);
        let lo = estimates.iter().map(|e| e.q_tls0).fold(f64::MAX, f64::min);
        hi / lo
    });
    let warning = max_pairwise_ratio
        .filter(|r| *r > INCONSISTENCY_RATIO)
        .map(|r| {
            format!("Q_TLS,0 estimates differ by a factor {r:.2}, above {INCONSISTENCY_RATIO}")
        });
    TlsComparison {
        partial: !missing.is_empty(),
        estimates,
        missing,
        max_pairwise_ratio,
        warning,
    }
}
