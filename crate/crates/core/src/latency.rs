//! Latency measurement between a ground-truth signal and a sensor signal,
//! zero-phase smoothing, and proximity-to-force contact transitions.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use thiserror::Error;

use crate::numfmt::sig9;

#[derive(Debug, Error)]
pub enum LatencyError {
    #[error("sample rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("series contains non-finite values")]
    NonFinite,
    #[error("sample rates differ: {0} Hz vs {1} Hz")]
    RateMismatch(f64, f64),
    #[error("series are not aligned (start {0} s vs {1} s, lengths {2} vs {3})")]
    Misaligned(f64, f64, usize, usize),
    #[error("signal is constant; correlation undefined")]
    Degenerate,
    #[error("no overlap between the series within the lag window")]
    NoOverlap,
    #[error("moving-average window must be odd and at least 1, got {0}")]
    EvenWindow(usize),
    #[error("window {window} is longer than the series ({len} samples)")]
    WindowTooLong { window: usize, len: usize },
    #[error("proximity never fell to {floor_mm} mm")]
    NoTransition { floor_mm: f64 },
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Uniformly sampled scalar signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub rate_hz: f64,
    pub start_s: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(rate_hz: f64, start_s: f64, values: Vec<f64>) -> Result<Self, LatencyError> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(LatencyError::BadRate(rate_hz));
        }
        if !start_s.is_finite() || values.iter().any(|v| !v.is_finite()) {
            return Err(LatencyError::NonFinite);
        }
        Ok(Self { rate_hz, start_s, values })
    }

    pub fn period(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start_s + i as f64 / self.rate_hz
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Read `t_s,value` rows. The rate is taken from `rate_hz` when given,
    /// otherwise from the mean spacing of the time column.
    pub fn read_csv<R: Read>(input: R, rate_hz: Option<f64>) -> Result<Self, LatencyError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, row) in reader.records().enumerate() {
            let row = row.map_err(|e| LatencyError::Csv(e.to_string()))?;
            let field = |k: usize| -> Result<f64, LatencyError> {
                row.get(k)
                    .ok_or_else(|| LatencyError::Csv(format!("row {}: missing column {k}", i + 2)))?
                    .parse()
                    .map_err(|e| LatencyError::Csv(format!("row {}: {e}", i + 2)))
            };
            times.push(field(0)?);
            values.push(field(1)?);
        }
        if times.is_empty() {
            return Err(LatencyError::Csv("no rows".into()));
        }
        let rate = match rate_hz {
            Some(r) => r,
            None if times.len() >= 2 => (times.len() - 1) as f64 / (times[times.len() - 1] - times[0]),
            None => return Err(LatencyError::Csv("cannot infer the rate from one row".into())),
        };
        Self::new(rate, times[0], values)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t_s,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", sig9(self.time(i)), sig9(*v))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyOptions {
    /// Lags searched on each side of zero (s).
    pub max_lag_s: f64,
    /// Parabolic sub-sample refinement of the peak.
    pub refine: bool,
}

impl Default for LatencyOptions {
    fn default() -> Self {
        Self { max_lag_s: 0.5, refine: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyEstimate {
    /// Delay of `measured` behind `truth` (s); positive when the sensor lags.
    pub latency_s: f64,
    /// Peak normalized correlation.
    pub peak: f64,
    /// Another local peak is within 1% of the best one.
    pub ambiguous: bool,
}

fn demeaned_unit(values: &[f64]) -> Result<Vec<f64>, LatencyError> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let energy = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if energy <= 1e-12 * scale * n.sqrt() {
        return Err(LatencyError::Degenerate);
    }
    Ok(centered.into_iter().map(|v| v / energy).collect())
}

/// Pearson correlation of `a[i]` with `b[i + lag]` over their overlap, for
/// `lag` in `-max_lag..=max_lag`, returned in that order. Lags whose overlap
/// is shorter than half the shorter series, or has no variance, score 0.
pub fn cross_correlation(a: &[f64], b: &[f64], max_lag: usize) -> Vec<f64> {
    let max_lag = max_lag as isize;
    let min_overlap = (a.len().min(b.len()) / 2).max(2);
    (-max_lag..=max_lag)
        .map(|lag| {
            let lo = 0.max(-lag) as usize;
            let hi = (a.len() as isize).min(b.len() as isize - lag).max(lo as isize) as usize;
            let m = hi - lo;
            if m < min_overlap {
                return 0.0;
            }
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in lo..hi {
                let (x, y) = (a[i], b[(i as isize + lag) as usize]);
                sa += x;
                sb += y;
                saa += x * x;
                sbb += y * y;
                sab += x * y;
            }
            let m = m as f64;
            let var_a = saa - sa * sa / m;
            let var_b = sbb - sb * sb / m;
            if var_a <= 1e-12 * saa || var_b <= 1e-12 * sbb {
                return 0.0;
            }
            (sab - sa * sb / m) / (var_a * var_b).sqrt()
        })
        .collect()
}

/// Shift that maximizes the Pearson-normalized cross-correlation.
pub fn estimate_latency(
    truth: &TimeSeries,
    measured: &TimeSeries,
    opts: &LatencyOptions,
) -> Result<LatencyEstimate, LatencyError> {
    if (truth.rate_hz - measured.rate_hz).abs() > 1e-9 * truth.rate_hz {
        return Err(LatencyError::RateMismatch(truth.rate_hz, measured.rate_hz));
    }
    if truth.len() < 2 || measured.len() < 2 {
        return Err(LatencyError::NoOverlap);
    }
    let a = demeaned_unit(&truth.values)?;
    let b = demeaned_unit(&measured.values)?;
    let max_lag = (opts.max_lag_s * truth.rate_hz).round().max(0.0) as usize;
    let corr = cross_correlation(&a, &b, max_lag);
    if corr.iter().all(|c| *c == 0.0) {
        return Err(LatencyError::NoOverlap);
    }

    let best = (0..corr.len()).max_by(|&i, &j| corr[i].total_cmp(&corr[j]).then(j.cmp(&i))).unwrap();
    let peak = corr[best];
    let is_local_max = |i: usize| {
        let left = if i > 0 { corr[i - 1] } else { f64::NEG_INFINITY };
        let right = if i + 1 < corr.len() { corr[i + 1] } else { f64::NEG_INFINITY };
        corr[i] > left && corr[i] >= right
    };
    let runner_up = (0..corr.len())
        .filter(|&i| i != best && is_local_max(i))
        .map(|i| corr[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let ambiguous = peak > 0.0 && runner_up >= 0.99 * peak;

    let mut lag = best as f64 - max_lag as f64;
    if opts.refine && best > 0 && best + 1 < corr.len() {
        let (l, c, r) = (corr[best - 1], corr[best], corr[best + 1]);
        let denom = l - 2.0 * c + r;
        if denom < 0.0 {
            lag += (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
        }
    }
    Ok(LatencyEstimate {
        latency_s: measured.start_s - truth.start_s + lag / truth.rate_hz,
        peak,
        ambiguous,
    })
}

fn causal_moving_average(x: &[f64], window: usize) -> Vec<f64> {
    // Samples before the start are held at x[0] (steady-state initial condition).
    let mut out = Vec::with_capacity(x.len());
    let mut acc = x[0] * window as f64;
    let mut history = std::collections::VecDeque::from(vec![x[0]; window]);
    for &v in x {
        acc += v - history.pop_front().unwrap();
        history.push_back(v);
        out.push(acc / window as f64);
    }
    out
}

/// Forward-backward moving average with odd-reflection padding.
///
/// The causal average runs forward, then over the reversed result, so the
/// net phase is zero and the interior impulse response is a symmetric
/// triangle of length `2 window - 1` summing to one.
pub fn zero_phase_moving_average(x: &TimeSeries, window: usize) -> Result<TimeSeries, LatencyError> {
    if window == 0 || window % 2 == 0 {
        return Err(LatencyError::EvenWindow(window));
    }
    let n = x.len();
    if window > n {
        return Err(LatencyError::WindowTooLong { window, len: n });
    }
    if window == 1 {
        return Ok(x.clone());
    }
    let v = &x.values;
    let pad = (3 * (window - 1)).min(n - 1);
    let mut padded = Vec::with_capacity(n + 2 * pad);
    padded.extend((1..=pad).rev().map(|i| 2.0 * v[0] - v[i]));
    padded.extend_from_slice(v);
    padded.extend((1..=pad).map(|i| 2.0 * v[n - 1] - v[n - 1 - i]));

    let mut y = causal_moving_average(&padded, window);
    y.reverse();
    let mut y = causal_moving_average(&y, window);
    y.reverse();
    Ok(TimeSeries { rate_hz: x.rate_hz, start_s: x.start_s, values: y[pad..pad + n].to_vec() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionEvent {
    /// First time the proximity reading reached the floor (s).
    pub contact_time_s: f64,
    /// Proximity reading at that sample (mm).
    pub proximity_floor_mm: f64,
    /// First time at or after contact with |force| above the threshold (s).
    pub first_force_time_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionOptions {
    pub prox_floor_mm: f64,
    pub force_eps_n: f64,
}

impl Default for TransitionOptions {
    fn default() -> Self {
        Self { prox_floor_mm: 10.0, force_eps_n: 0.5 }
    }
}

/// Locate the handoff from proximity sensing to force sensing.
pub fn detect_transition(
    proximity_mm: &TimeSeries,
    normal_force_n: &TimeSeries,
    opts: &TransitionOptions,
) -> Result<TransitionEvent, LatencyError> {
    if (proximity_mm.rate_hz - normal_force_n.rate_hz).abs() > 1e-9 * proximity_mm.rate_hz {
        return Err(LatencyError::RateMismatch(proximity_mm.rate_hz, normal_force_n.rate_hz));
    }
    if (proximity_mm.start_s - normal_force_n.start_s).abs() > 0.5 * proximity_mm.period()
        || proximity_mm.len() != normal_force_n.len()
    {
        return Err(LatencyError::Misaligned(
            proximity_mm.start_s,
            normal_force_n.start_s,
            proximity_mm.len(),
            normal_force_n.len(),
        ));
    }
    let contact = proximity_mm
        .values
        .iter()
        .position(|d| *d <= opts.prox_floor_mm)
        .ok_or(LatencyError::NoTransition { floor_mm: opts.prox_floor_mm })?;
    let first_force = normal_force_n.values[contact..]
        .iter()
        .position(|f| f.abs() > opts.force_eps_n)
        .map(|k| normal_force_n.time(contact + k));
    Ok(TransitionEvent {
        contact_time_s: proximity_mm.time(contact),
        proximity_floor_mm: proximity_mm.values[contact],
        first_force_time_s: first_force,
    })
}

/// Synthetic signals with known timing, for latency and transition checks.
pub mod synth {
    use rand::Rng;

    /// Sum of random sinusoids with frequencies in `[0.5, cutoff_hz]`; can be
    /// evaluated at any time, so exact shifts need no interpolation.
    #[derive(Debug, Clone, PartialEq)]
    pub struct BandLimited {
        components: Vec<(f64, f64, f64)>,
    }

    impl BandLimited {
        pub fn random<R: Rng + ?Sized>(rng: &mut R, cutoff_hz: f64, components: usize) -> Self {
            let components = (0..components)
                .map(|_| {
                    let f = rng.random_range(0.5..cutoff_hz.max(0.6));
                    let a = rng.random_range(0.2..1.0);
                    let phase = rng.random_range(0.0..std::f64::consts::TAU);
                    (f, a, phase)
                })
                .collect();
            Self { components }
        }

        pub fn at(&self, t: f64) -> f64 {
            self.components.iter().map(|(f, a, p)| a * (std::f64::consts::TAU * f * t + p).sin()).sum()
        }

        /// `n` samples at `rate_hz` of the signal delayed by `delay_s`.
        pub fn sample(&self, rate_hz: f64, n: usize, delay_s: f64) -> Vec<f64> {
            (0..n).map(|i| self.at(i as f64 / rate_hz - delay_s)).collect()
        }
    }

    /// Approach-then-press profile: proximity falls linearly from `start_mm`
    /// and bottoms out at `floor_mm` exactly at `contact_s`; the normal force
    /// ramps from zero at `contact_s` to `peak_n` over `ramp_s` and holds.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct ApproachPress {
        pub rate_hz: f64,
        pub duration_s: f64,
        pub contact_s: f64,
        pub start_mm: f64,
        pub floor_mm: f64,
        pub peak_n: f64,
        pub ramp_s: f64,
    }

    impl ApproachPress {
        pub fn proximity_mm(&self) -> Vec<f64> {
            self.times()
                .map(|t| {
                    if t >= self.contact_s {
                        self.floor_mm
                    } else {
                        self.floor_mm + (self.start_mm - self.floor_mm) * (self.contact_s - t) / self.contact_s
                    }
                })
                .collect()
        }

        pub fn force_n(&self) -> Vec<f64> {
            self.times().map(|t| self.peak_n * ((t - self.contact_s) / self.ramp_s).clamp(0.0, 1.0)).collect()
        }

        fn times(&self) -> impl Iterator<Item = f64> + '_ {
            let n = (self.duration_s * self.rate_hz).round() as usize;
            (0..n).map(move |i| i as f64 / self.rate_hz)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(values: Vec<f64>) -> TimeSeries {
        TimeSeries::new(1000.0, 0.0, values).unwrap()
    }

    #[test]
    fn self_correlation_has_zero_lag() {
        let x: Vec<f64> = (0..500).map(|i| ((i as f64) * 0.05).sin() + 0.3 * ((i as f64) * 0.17).cos()).collect();
        let est = estimate_latency(&ts(x.clone()), &ts(x), &LatencyOptions::default()).unwrap();
        assert_eq!(est.latency_s, 0.0);
        assert!((est.peak - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_shift_scores_one_on_overlap() {
        // Slow content: a whole-signal normalization would favour shorter lags here.
        let x: Vec<f64> = (0..4000).map(|i| (i as f64 * 0.002).sin() + 0.1 * (i as f64 * 0.05).cos()).collect();
        let c = cross_correlation(&x[..3990], &x[8..3998], 20);
        let best = (0..c.len()).max_by(|&i, &j| c[i].total_cmp(&c[j])).unwrap();
        assert_eq!(best, 20 - 8);
        assert!((c[best] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn start_offset_counts_as_latency() {
        let x: Vec<f64> = (0..400).map(|i| ((i as f64) * 0.07).sin() * (1.0 + (i as f64 * 0.01).cos())).collect();
        let a = ts(x.clone());
        let b = TimeSeries::new(1000.0, 0.004, x).unwrap();
        let est = estimate_latency(&a, &b, &LatencyOptions::default()).unwrap();
        assert!((est.latency_s - 0.004).abs() < 1e-12);
    }

    #[test]
    fn constant_signal_is_degenerate() {
        let err = estimate_latency(&ts(vec![2.0; 100]), &ts((0..100).map(f64::from).collect()), &LatencyOptions::default());
        assert!(matches!(err, Err(LatencyError::Degenerate)));
    }

    #[test]
    fn periodic_signal_is_flagged_ambiguous() {
        let x: Vec<f64> = (0..2000).map(|i| (std::f64::consts::TAU * i as f64 / 10.0).sin()).collect();
        let est = estimate_latency(&ts(x.clone()), &ts(x), &LatencyOptions { max_lag_s: 0.2, refine: false }).unwrap();
        assert!(est.ambiguous);
    }

    #[test]
    fn rate_mismatch_rejected() {
        let a = ts(vec![0.0, 1.0, 0.0]);
        let b = TimeSeries::new(2000.0, 0.0, vec![0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(estimate_latency(&a, &b, &LatencyOptions::default()), Err(LatencyError::RateMismatch(..))));
    }

    #[test]
    fn window_one_is_identity() {
        let x = ts(vec![1.0, -2.0, 5.0, 0.5]);
        assert_eq!(zero_phase_moving_average(&x, 1).unwrap(), x);
    }

    #[test]
    fn constant_is_preserved() {
        let x = ts(vec![3.25; 40]);
        for w in [3, 7, 15] {
            let y = zero_phase_moving_average(&x, w).unwrap();
            assert!(y.values.iter().all(|v| (v - 3.25).abs() < 1e-12));
        }
    }

    #[test]
    fn impulse_response_is_symmetric_triangle() {
        let mut v = vec![0.0; 101];
        v[50] = 1.0;
        let y = zero_phase_moving_average(&ts(v), 7).unwrap().values;
        // Oracle: box * box by direct convolution.
        let boxk = [1.0 / 7.0; 7];
        let mut tri = [0.0; 13];
        for i in 0..7 {
            for j in 0..7 {
                tri[i + j] += boxk[i] * boxk[j];
            }
        }
        for (k, t) in tri.iter().enumerate() {
            assert!((y[44 + k] - t).abs() < 1e-15, "tap {k}");
        }
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for d in 0..=50 {
            assert!((y[50 - d] - y[50 + d]).abs() < 1e-15);
        }
    }

    #[test]
    fn window_errors() {
        let x = ts(vec![0.0; 5]);
        assert!(matches!(zero_phase_moving_average(&x, 4), Err(LatencyError::EvenWindow(4))));
        assert!(matches!(zero_phase_moving_average(&x, 7), Err(LatencyError::WindowTooLong { .. })));
        assert!(zero_phase_moving_average(&x, 5).is_ok());
    }

    #[test]
    fn no_transition_when_far() {
        let prox = ts(vec![50.0; 20]);
        let force = ts(vec![0.0; 20]);
        assert!(matches!(
            detect_transition(&prox, &force, &TransitionOptions::default()),
            Err(LatencyError::NoTransition { .. })
        ));
    }

    #[test]
    fn transition_on_constructed_profile() {
        // Approach at 100 mm/s from 60 mm, contact at sample 50, press after.
        let n = 120;
        let prox: Vec<f64> = (0..n).map(|i| (60.0 - i as f64).max(10.0)).collect();
        let force: Vec<f64> = (0..n).map(|i| if i > 50 { -0.2 * (i - 50) as f64 } else { 0.0 }).collect();
        let ev = detect_transition(&ts(prox), &ts(force), &TransitionOptions { prox_floor_mm: 10.0, force_eps_n: 0.5 })
            .unwrap();
        assert!((ev.contact_time_s - 0.050).abs() < 1e-12);
        assert_eq!(ev.proximity_floor_mm, 10.0);
        assert!((ev.first_force_time_s.unwrap() - 0.053).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let x = TimeSeries::new(200.0, 1.5, vec![0.25, -1.0, 3.0]).unwrap();
        let mut buf = Vec::new();
        x.write_csv(&mut buf).unwrap();
        let back = TimeSeries::read_csv(buf.as_slice(), None).unwrap();
        assert!((back.rate_hz - 200.0).abs() < 1e-6);
        assert_eq!(back.values, x.values);
        assert_eq!(back.start_s, 1.5);
    }
}
