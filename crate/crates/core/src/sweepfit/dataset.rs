use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SweepFitError;

/// Relative Q_i uncertainty assumed when a point carries none.
pub const DEFAULT_RELATIVE_SIGMA: f64 = 0.05;

/// One internal-Q measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub n_ph: f64,
    pub t_k: f64,
    pub q_i: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_i_sigma: Option<f64>,
}

impl LossPoint {
    pub fn sigma(&self) -> f64 {
        self.q_i_sigma.unwrap_or(DEFAULT_RELATIVE_SIGMA * self.q_i)
    }
}

/// One fractional frequency-shift measurement, δf/f₀ relative to base
/// temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftPoint {
    pub t_k: f64,
    pub df_f0: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepPoint {
    Loss(LossPoint),
    Shift(ShiftPoint),
}

/// Measurements of a single resonator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDataset {
    pub resonator_id: String,
    pub f0_hz: f64,
    pub tc_k: f64,
    pub points: Vec<SweepPoint>,
}

impl SweepDataset {
    pub fn from_loss(id: &str, f0_hz: f64, tc_k: f64, points: Vec<LossPoint>) -> Self {
        Self {
            resonator_id: id.to_string(),
            f0_hz,
            tc_k,
            points: points.into_iter().map(SweepPoint::Loss).collect(),
        }
    }

    pub fn from_shift(id: &str, f0_hz: f64, tc_k: f64, points: Vec<ShiftPoint>) -> Self {
        Self {
            resonator_id: id.to_string(),
            f0_hz,
            tc_k,
            points: points.into_iter().map(SweepPoint::Shift).collect(),
        }
    }

    fn check_header(&self) -> Result<(), SweepFitError> {
        if !(self.f0_hz.is_finite() && self.f0_hz > 0.0) {
            return Err(SweepFitError::InvalidData(format!(
                "f0_hz = {}",
                self.f0_hz
            )));
        }
        if !(self.tc_k.is_finite() && self.tc_k > 0.0) {
            return Err(SweepFitError::InvalidData(format!("tc_k = {}", self.tc_k)));
        }
        Ok(())
    }

    /// Loss points, validated. Fails if any point is a shift point.
    pub fn loss_points(&self) -> Result<Vec<LossPoint>, SweepFitError> {
        self.check_header()?;
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| match p {
                SweepPoint::Loss(lp) => {
                    let ok = lp.n_ph.is_finite()
                        && lp.n_ph >= 0.0
                        && lp.t_k.is_finite()
                        && lp.t_k > 0.0
                        && lp.q_i.is_finite()
                        && lp.q_i > 0.0
                        && lp.sigma().is_finite()
                        && lp.sigma() > 0.0;
                    if ok {
                        Ok(*lp)
                    } else {
                        Err(SweepFitError::InvalidData(format!("point {i}: {lp:?}")))
                    }
                }
                SweepPoint::Shift(_) => Err(SweepFitError::InvalidData(format!(
                    "point {i} is a frequency-shift point in a loss dataset"
                ))),
            })
            .collect()
    }

    /// Shift points, validated. Fails if any point is a loss point.
    pub fn shift_points(&self) -> Result<Vec<ShiftPoint>, SweepFitError> {
        self.check_header()?;
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| match p {
                SweepPoint::Shift(sp) => {
                    let ok = sp.t_k.is_finite()
                        && sp.t_k > 0.0
                        && sp.df_f0.is_finite()
                        && sp.sigma.is_finite()
                        && sp.sigma > 0.0;
                    if ok {
                        Ok(*sp)
                    } else {
                        Err(SweepFitError::InvalidData(format!("point {i}: {sp:?}")))
                    }
                }
                SweepPoint::Loss(_) => Err(SweepFitError::InvalidData(format!(
                    "point {i} is a loss point in a frequency-shift dataset"
                ))),
            })
            .collect()
    }
}

/// A single repeated Q_i fit with its acquisition time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedLossSample {
    pub time_s: f64,
    pub n_ph: f64,
    pub t_k: f64,
    pub q_i: f64,
    #[serde(default)]
    pub q_i_sigma: Option<f64>,
}

/// Averages repeated fits taken at the same (n_ph, T) setting.
///
/// Samples of one setting are grouped into consecutive windows of
/// `window_s` seconds measured from that setting's first sample. Each
/// window gives one point: the mean Q_i, with the standard error of the
/// mean as its sigma (or the single sample's own sigma when the window
/// holds one sample). Output is ordered by (n_ph, T, window).
pub fn time_average(
    samples: &[TimedLossSample],
    window_s: f64,
) -> Result<Vec<LossPoint>, SweepFitError> {
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(SweepFitError::InvalidData(format!("window_s = {window_s}")));
    }
    let mut groups: BTreeMap<(u64, u64), Vec<TimedLossSample>> = BTreeMap::new();
    for s in samples {
        if !(s.time_s.is_finite() && s.q_i.is_finite() && s.q_i > 0.0) {
            return Err(SweepFitError::InvalidData(format!("sample {s:?}")));
        }
        // non-negative floats order like their bit patterns
        groups
            .entry((s.n_ph.to_bits(), s.t_k.to_bits()))
            .or_default()
            .push(*s);
    }
    let mut out = Vec::new();
    for group in groups.values_mut() {
        group.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
        let start = group[0].time_s;
        let mut windows: BTreeMap<u64, Vec<&TimedLossSample>> = BTreeMap::new();
        for s in group.iter() {
            let k = ((s.time_s - start) / window_s).floor() as u64;
            windows.entry(k).or_default().push(s);
        }
        for members in windows.values() {
            let k = members.len() as f64;
            let mean = members.iter().map(|s| s.q_i).sum::<f64>() / k;
            let sigma = if members.len() == 1 {
                members[0].q_i_sigma
            } else {
                let var = members.iter().map(|s| (s.q_i - mean).powi(2)).sum::<f64>() / (k - 1.0);
                Some((var / k).sqrt()).filter(|s| *s > 0.0)
            };
            out.push(LossPoint {
                n_ph: members[0].n_ph,
                t_k: members[0].t_k,
                q_i: mean,
                q_i_sigma: sigma,
            });
        }
    }
    Ok(out)
}
