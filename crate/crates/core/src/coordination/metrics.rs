//! Learning-quality metrics computed from a per-episode APE series.

use super::CoordinationError;

/// Trailing mean over the last `window` values (fewer at the start).
pub fn rolling_mean(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockWindows {
    /// Width of the rolling MAPE.
    pub mape: usize,
    /// Episodes before the shock that define the baseline APE.
    pub baseline: usize,
    /// Episodes after the shock searched for the MAPE peak.
    pub spike: usize,
    /// Recovered once MAPE falls below this multiple of the baseline.
    pub recovery_factor: f64,
    /// Final episodes used for the steady-state variance.
    pub tail: usize,
}

impl Default for ShockWindows {
    fn default() -> Self {
        ShockWindows { mape: 10, baseline: 50, spike: 50, recovery_factor: 1.5, tail: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShockMetrics {
    pub shock_episode: usize,
    /// Mean APE over the baseline episodes.
    pub baseline: f64,
    pub peak_mape: f64,
    pub peak_episode: usize,
    /// Peak MAPE over the baseline.
    pub spike_ratio: f64,
    /// First episode at or after the peak with MAPE under the recovery level.
    pub recovery_episode: Option<usize>,
    pub episodes_to_recovery: Option<usize>,
    /// APE variance over the final episodes.
    pub tail_variance: f64,
    /// Rolling MAPE of the whole run.
    pub mape: Vec<f64>,
}

/// Spike, recovery and steady-state error of a run with a parameter shock.
pub fn shock_metrics(ape: &[f64], shock_episode: usize, w: ShockWindows) -> Result<ShockMetrics, CoordinationError> {
    if shock_episode < w.baseline || w.baseline == 0 {
        return Err(CoordinationError::Invalid(format!(
            "shock at episode {shock_episode} leaves fewer than {} baseline episodes",
            w.baseline.max(1)
        )));
    }
    if ape.len() < shock_episode + w.spike.max(1) || ape.len() < w.tail.max(1) {
        return Err(CoordinationError::Invalid(format!(
            "{} episodes are too few to measure a shock at episode {shock_episode}",
            ape.len()
        )));
    }
    let mape = rolling_mean(ape, w.mape);
    let baseline = mean(&ape[shock_episode - w.baseline..shock_episode]);
    let (peak_episode, peak_mape) = mape[shock_episode..shock_episode + w.spike.max(1)].iter().enumerate().fold(
        (shock_episode, f64::NEG_INFINITY),
        |best, (k, &m)| {
            if m > best.1 {
                (shock_episode + k, m)
            } else {
                best
            }
        },
    );
    let level = w.recovery_factor * baseline;
    let recovery_episode = (peak_episode..mape.len()).find(|&e| mape[e] < level);
    Ok(ShockMetrics {
        shock_episode,
        baseline,
        peak_mape,
        peak_episode,
        spike_ratio: peak_mape / baseline,
        recovery_episode,
        episodes_to_recovery: recovery_episode.map(|e| e - shock_episode),
        tail_variance: variance(&ape[ape.len() - w.tail.max(1)..]),
        mape,
    })
}
