//! Structural chip metrics, their correlation with logical error rates,
//! ensemble culling and effective code distance.
//!
//! Per-circuit quantities over Z stabilizers: Q devices touched, DQ data
//! qubits, K circuit depth and C cycle (steps between consecutive measurements
//! in the steady state, waiting included). Products are KQ, KDQ, CQ and CDQ.

use serde::{Deserialize, Serialize};

use crate::lattice::{self, Kind, Role};
use crate::pipeline::Compiled;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("need at least 3 records, got {0}")]
    TooFew(usize),
    #[error("zero variance in {0}")]
    UndefinedVariance(&'static str),
    #[error("query p={0} outside the baseline range")]
    OutOfRange(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Linear,
    Logarithmic,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Linear => "linear",
            Mode::Logarithmic => "log",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChipMetrics {
    pub n_stabilizers: usize,
    pub n_faulty_qubits: usize,
    pub n_faulty_data: usize,
    pub n_faulty_syndrome: usize,
    pub reduced_distance: usize,
    pub n_z_stabs: usize,
    pub biggest_qubits_z: f64,
    pub average_qubits_z: f64,
    pub biggest_dataq_z: f64,
    pub average_dataq_z: f64,
    pub deepest_depth_z: f64,
    pub average_depth_z: f64,
    pub biggest_kq_z: f64,
    pub average_kq_z: f64,
    pub biggest_kdq_z: f64,
    pub average_kdq_z: f64,
    pub biggest_cycle_z: f64,
    pub average_cycle_z: f64,
    pub biggest_cq_z: f64,
    pub average_cq_z: f64,
    pub biggest_cdq_z: f64,
    pub average_cdq_z: f64,
    pub z_measurements_per_step: f64,
    /// Chip-level steps until every stabilizer has been measured once.
    pub steps_per_round: f64,
}

/// Names of the correlated metrics, in column order.
pub const METRIC_NAMES: [&str; 23] = [
    "n_stabilizers",
    "n_faulty_qubits",
    "n_faulty_data",
    "n_faulty_syndrome",
    "reduced_distance",
    "n_z_stabs",
    "biggest_qubits_z",
    "average_qubits_z",
    "biggest_dataq_z",
    "average_dataq_z",
    "deepest_depth_z",
    "average_depth_z",
    "biggest_kq_z",
    "average_kq_z",
    "biggest_kdq_z",
    "average_kdq_z",
    "biggest_cycle_z",
    "average_cycle_z",
    "biggest_cq_z",
    "average_cq_z",
    "biggest_cdq_z",
    "average_cdq_z",
    "z_measurements_per_step",
];

impl ChipMetrics {
    /// Values in [`METRIC_NAMES`] order.
    pub fn values(&self) -> [f64; 23] {
        [
            self.n_stabilizers as f64,
            self.n_faulty_qubits as f64,
            self.n_faulty_data as f64,
            self.n_faulty_syndrome as f64,
            self.reduced_distance as f64,
            self.n_z_stabs as f64,
            self.biggest_qubits_z,
            self.average_qubits_z,
            self.biggest_dataq_z,
            self.average_dataq_z,
            self.deepest_depth_z,
            self.average_depth_z,
            self.biggest_kq_z,
            self.average_kq_z,
            self.biggest_kdq_z,
            self.average_kdq_z,
            self.biggest_cycle_z,
            self.average_cycle_z,
            self.biggest_cq_z,
            self.average_cq_z,
            self.biggest_cdq_z,
            self.average_cdq_z,
            self.z_measurements_per_step,
        ]
    }
}

/// Per-circuit (Q, DQ, K, C) of every Z stabilizer.
pub fn z_circuit_shapes(compiled: &Compiled) -> Vec<(f64, f64, f64, f64)> {
    compiled
        .circuits
        .iter()
        .filter(|c| c.kind == Kind::Z)
        .map(|c| {
            (
                c.n_devices() as f64,
                c.data_qubits as f64,
                c.depth as f64,
                compiled.whole.cycles[c.stabilizer],
            )
        })
        .collect()
}

fn biggest_and_mean(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    (xs.clone().fold(f64::MIN, f64::max), xs.sum::<f64>() / n as f64)
}

pub fn compute_metrics(compiled: &Compiled) -> ChipMetrics {
    let chip = &compiled.chip;
    let shapes = z_circuit_shapes(compiled);
    let col = |f: fn(&(f64, f64, f64, f64)) -> f64| biggest_and_mean(shapes.iter().map(f));
    let (biggest_qubits_z, average_qubits_z) = col(|s| s.0);
    let (biggest_dataq_z, average_dataq_z) = col(|s| s.1);
    let (deepest_depth_z, average_depth_z) = col(|s| s.2);
    let (biggest_kq_z, average_kq_z) = col(|s| s.2 * s.0);
    let (biggest_kdq_z, average_kdq_z) = col(|s| s.2 * s.1);
    let (biggest_cycle_z, average_cycle_z) = col(|s| s.3);
    let (biggest_cq_z, average_cq_z) = col(|s| s.3 * s.0);
    let (biggest_cdq_z, average_cdq_z) = col(|s| s.3 * s.1);
    let whole = &compiled.whole;
    let z_meas = whole
        .measurements
        .iter()
        .filter(|m| whole.stabilizer_kinds[m.stabilizer] == Kind::Z)
        .count();
    let rc = &compiled.reconfiguration;
    let reduced_distance = lattice::reduced_distance_of(rc, Kind::X).min(lattice::reduced_distance_of(rc, Kind::Z));
    ChipMetrics {
        n_stabilizers: compiled.stabilizers.len(),
        n_faulty_qubits: chip.n_faulty(),
        n_faulty_data: chip.n_faulty_role(Role::Data),
        n_faulty_syndrome: chip.n_faulty() - chip.n_faulty_role(Role::Data),
        reduced_distance,
        n_z_stabs: shapes.len(),
        biggest_qubits_z,
        average_qubits_z,
        biggest_dataq_z,
        average_dataq_z,
        deepest_depth_z,
        average_depth_z,
        biggest_kq_z,
        average_kq_z,
        biggest_kdq_z,
        average_kdq_z,
        biggest_cycle_z,
        average_cycle_z,
        biggest_cq_z,
        average_cq_z,
        biggest_cdq_z,
        average_cdq_z,
        z_measurements_per_step: z_meas as f64 / whole.period as f64,
        steps_per_round: whole.steps_per_round,
    }
}

/// Pearson coefficient of (x, y), or of (x, ln y) in logarithmic mode.
pub fn correlate(xs: &[f64], ys: &[f64], mode: Mode) -> Result<f64, MetricsError> {
    if xs.len() != ys.len() {
        return Err(MetricsError::Invalid(format!(
            "{} values vs {} rates",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(MetricsError::TooFew(xs.len()));
    }
    let ys: Vec<f64> = match mode {
        Mode::Linear => ys.to_vec(),
        Mode::Logarithmic => {
            if ys.iter().any(|&y| y <= 0.0) {
                return Err(MetricsError::Invalid("logarithmic mode needs positive rates".into()));
            }
            ys.iter().map(|y| y.ln()).collect()
        }
    };
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    // Relative thresholds: constant columns leave rounding residue only.
    let tiny = |s: f64, m: f64| s <= 1e-24 * n * (1.0 + m * m);
    if tiny(sxx, mx) {
        return Err(MetricsError::UndefinedVariance("metric"));
    }
    if tiny(syy, my) {
        return Err(MetricsError::UndefinedVariance("rate"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Metric names ranked by |coefficient|, strongest first. Metrics with
/// undefined correlation are left out.
pub fn rank_metrics(metrics: &[ChipMetrics], rates: &[f64], mode: Mode) -> Vec<(&'static str, f64)> {
    let mut out: Vec<(&'static str, f64)> = METRIC_NAMES
        .iter()
        .enumerate()
        .filter_map(|(i, &name)| {
            let xs: Vec<f64> = metrics.iter().map(|m| m.values()[i]).collect();
            correlate(&xs, rates, mode).ok().map(|r| (name, r))
        })
        .collect();
    out.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(b.0)));
    out
}

/// Keep the best `floor(original_count * keep_fraction)` records by rate,
/// lowest first. `original_count` includes chips that could not be encoded.
pub fn cull<T: Clone>(
    records: &[(T, f64)],
    keep_fraction: f64,
    original_count: usize,
) -> Result<Vec<(T, f64)>, MetricsError> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(MetricsError::Invalid(format!(
            "keep fraction {keep_fraction} outside (0, 1]"
        )));
    }
    if original_count < records.len() {
        return Err(MetricsError::Invalid(
            "original count below the number of records".into(),
        ));
    }
    // Nudge before flooring so 0.3 * 10 keeps 3.
    let keep = ((original_count as f64 * keep_fraction) + 1e-9).floor() as usize;
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    sorted.truncate(keep);
    Ok(sorted)
}

/// Geometric mean of positive values; `None` if empty or any value is not positive.
pub fn geometric_mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() || xs.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
        return None;
    }
    Some((xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64).exp())
}

/// Logical rate curve of a perfect lattice: points (p, rate) sorted by p.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub distance: usize,
    pub points: Vec<(f64, f64)>,
}

impl Baseline {
    /// ln rate at `p`, linear in (ln p, ln rate) between neighbouring points.
    pub fn log_rate_at(&self, p: f64) -> Option<f64> {
        let pts = &self.points;
        let i = pts.iter().position(|&(q, _)| q >= p)?;
        let (p1, r1) = pts[i];
        if p1 == p {
            return (r1 > 0.0).then(|| r1.ln());
        }
        if i == 0 {
            return None;
        }
        let (p0, r0) = pts[i - 1];
        if r0 <= 0.0 || r1 <= 0.0 {
            return None;
        }
        let t = (p.ln() - p0.ln()) / (p1.ln() - p0.ln());
        Some(r0.ln() + t * (r1.ln() - r0.ln()))
    }
}

/// Distance of the perfect lattice whose rate at `p` is closest to `rate`,
/// interpolated linearly in (d, ln rate) between adjacent baseline distances
/// and clamped to the baseline range.
pub fn effective_distance(p: f64, rate: f64, baselines: &[Baseline]) -> Result<f64, MetricsError> {
    if rate <= 0.0 {
        return Err(MetricsError::Invalid("rate must be positive".into()));
    }
    let mut curve: Vec<(f64, f64)> = baselines
        .iter()
        .map(|b| {
            b.log_rate_at(p)
                .map(|l| (b.distance as f64, l))
                .ok_or(MetricsError::OutOfRange(p))
        })
        .collect::<Result<_, _>>()?;
    if curve.is_empty() {
        return Err(MetricsError::Invalid("no baselines".into()));
    }
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    let target = rate.ln();
    for w in curve.windows(2) {
        let ((d0, l0), (d1, l1)) = (w[0], w[1]);
        let (lo, hi) = (l0.min(l1), l0.max(l1));
        if (lo..=hi).contains(&target) {
            if l1 == l0 {
                return Ok(d0);
            }
            return Ok(d0 + (target - l0) / (l1 - l0) * (d1 - d0));
        }
    }
    // Outside every bracket: the nearest curve in log-rate.
    let best = curve
        .iter()
        .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
        .unwrap();
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_is_one() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        assert!((correlate(&xs, &ys, Mode::Linear).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = ys.iter().map(|y| -y).collect();
        assert!((correlate(&xs, &neg, Mode::Linear).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn undefined_variance_is_signalled() {
        let xs = [2.0; 5];
        let ys = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(
            correlate(&xs, &ys, Mode::Linear),
            Err(MetricsError::UndefinedVariance("metric"))
        );
        assert_eq!(
            correlate(&ys, &xs, Mode::Linear),
            Err(MetricsError::UndefinedVariance("rate"))
        );
        assert_eq!(
            correlate(&ys[..2], &ys[..2], Mode::Linear),
            Err(MetricsError::TooFew(2))
        );
    }

    #[test]
    fn cull_counts_against_original() {
        let recs: Vec<(usize, f64)> = (0..24).map(|i| (i, 1.0 / (i + 1) as f64)).collect();
        let kept = cull(&recs, 0.1, 30).unwrap();
        assert_eq!(kept.len(), 3);
        assert_eq!(kept.iter().map(|r| r.0).collect::<Vec<_>>(), vec![23, 22, 21]);
        assert_eq!(cull(&recs, 1.0, 24).unwrap().len(), 24);
        let thirty: Vec<(usize, f64)> = (0..30).map(|i| (i, i as f64)).collect();
        assert_eq!(cull(&thirty, 0.5, 30).unwrap().len(), 15);
    }

    #[test]
    fn effective_distance_of_a_baseline_point() {
        let b = |d: usize, r: f64| Baseline {
            distance: d,
            points: vec![(0.002, r / 4.0), (0.004, r)],
        };
        let bases = [b(3, 3e-2), b(5, 1e-2), b(7, 4e-3)];
        assert!((effective_distance(0.004, 1e-2, &bases).unwrap() - 5.0).abs() < 1e-12);
        let mid = effective_distance(0.004, (3e-2f64 * 1e-2).sqrt(), &bases).unwrap();
        assert!((mid - 4.0).abs() < 1e-9);
        assert_eq!(effective_distance(0.004, 1.0, &bases).unwrap(), 3.0);
        assert_eq!(
            effective_distance(0.01, 1e-2, &bases),
            Err(MetricsError::OutOfRange(0.01))
        );
    }
}
