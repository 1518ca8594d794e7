//! Charging capacity and charging time extraction, τ sweeps, singular-peak
//! prediction and detection, and the valley scaling fit.
//!
//! The charger energy is modeled as `E^c(t) ≈ A/2·[cos(πt/T) − 1] + λ3`.
//! Fits are seeded from the first full-charge maximum of E^b and refined by
//! damped Gauss–Newton on E^c over `[0, T₀]`.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{run_stroboscopic, EngineError, EnergyTimeSeries};
use crate::model::ModelParams;

pub const MIN_FIT_SAMPLES: usize = 50;
/// A maximum counts as the first full charge if it reaches this fraction of the window maximum.
pub const FULL_CHARGE_FRACTION: f64 = 0.9;
/// Spike threshold: T above this multiple of the neighborhood median, or A
/// below the neighborhood median divided by it.
pub const PEAK_FACTOR: f64 = 3.0;
/// Valley prominence threshold relative to the neighborhood median.
pub const VALLEY_PROMINENCE: f64 = 0.05;
/// Neighborhood half-width in coarse grid steps (10 coarse points).
pub const NEIGHBORHOOD_STEPS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("series has {found} samples, at least {required} required")]
    TooFewSamples { found: usize, required: usize },
    #[error("scan has {found} points, at least {required} required")]
    TooFewPoints { found: usize, required: usize },
    #[error("found {found} valleys, at least 3 required")]
    TooFewValleys { found: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Extracted capacity `a` and first full-charge time `t_charge`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub a: f64,
    pub t_charge: f64,
    /// RMS misfit over the fit window divided by `a`.
    pub residual: f64,
    /// False when no full-charge maximum lies inside the window; then
    /// `t_charge` is the window end (a lower bound) and `a` the window maximum.
    pub resolved: bool,
}

impl FitResult {
    /// Average charging power A/T.
    pub fn power(&self) -> f64 {
        self.a / self.t_charge
    }
}

fn cosine_model(offset: f64, a: f64, t_charge: f64, t: f64) -> f64 {
    offset + 0.5 * a * ((PI * t / t_charge).cos() - 1.0)
}

fn rms_misfit(series: &EnergyTimeSeries, range: std::ops::Range<usize>, offset: f64, a: f64, t_charge: f64) -> f64 {
    let n = range.len().max(1) as f64;
    let sse: f64 = range
        .map(|i| (cosine_model(offset, a, t_charge, series.times[i]) - series.ec[i]).powi(2))
        .sum();
    (sse / n).sqrt()
}

/// Vertex of the parabola through three points; `None` if degenerate or outside the bracket.
fn parabola_vertex(t: [f64; 3], y: [f64; 3]) -> Option<(f64, f64)> {
    let d1 = (y[1] - y[0]) / (t[1] - t[0]);
    let d2 = (y[2] - y[1]) / (t[2] - t[1]);
    let curv = (d2 - d1) / (t[2] - t[0]);
    if !(curv < 0.0) {
        return None;
    }
    // y = y0 + d1 (s - t0) + curv (s - t0)(s - t1)
    let ts = 0.5 * (t[0] + t[1]) - d1 / (2.0 * curv);
    if !(ts >= t[0] && ts <= t[2]) {
        return None;
    }
    let ys = y[0] + d1 * (ts - t[0]) + curv * (ts - t[0]) * (ts - t[1]);
    Some((ts, ys))
}

/// Index of the first local maximum of E^b reaching [`FULL_CHARGE_FRACTION`]
/// of the window maximum. Among equal adjacent samples the earlier wins.
fn first_full_charge(eb: &[f64]) -> Option<usize> {
    let max = eb.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return None;
    }
    (1..eb.len().saturating_sub(1))
        .find(|&j| eb[j] >= FULL_CHARGE_FRACTION * max && eb[j] > eb[j - 1] && eb[j] >= eb[j + 1])
}

/// Fits the charger-energy cosine model to a simulated series.
pub fn fit_charging_curve(series: &EnergyTimeSeries, p: &ModelParams) -> Result<FitResult, AnalysisError> {
    if series.len() < MIN_FIT_SAMPLES {
        return Err(AnalysisError::TooFewSamples {
            found: series.len(),
            required: MIN_FIT_SAMPLES,
        });
    }
    let offset = p.lambda3();
    let Some(j) = first_full_charge(&series.eb) else {
        let a = series.max_eb().max(0.0);
        let t_end = series.end_time();
        let misfit = rms_misfit(series, 0..series.len(), offset, a, t_end);
        return Ok(FitResult {
            a,
            t_charge: t_end,
            residual: if a > 0.0 { misfit / a } else { 0.0 },
            resolved: false,
        });
    };

    let tt = [series.times[j - 1], series.times[j], series.times[j + 1]];
    let yy = [series.eb[j - 1], series.eb[j], series.eb[j + 1]];
    let (t0, a0) = parabola_vertex(tt, yy).unwrap_or((tt[1], yy[1]));

    let end = series.times.partition_point(|&t| t <= t0);
    let (a, t_charge) = refine_cosine(series, 0..end, offset, a0, t0);
    let residual = rms_misfit(series, 0..end, offset, a, t_charge) / a;
    Ok(FitResult {
        a,
        t_charge,
        residual,
        resolved: true,
    })
}

/// Damped Gauss–Newton on (A, T). Returns the seeds unchanged if the window
/// is too short or the iteration leaves the physical region.
fn refine_cosine(
    series: &EnergyTimeSeries,
    range: std::ops::Range<usize>,
    offset: f64,
    a0: f64,
    t0: f64,
) -> (f64, f64) {
    if range.len() < 3 || !(a0 > 0.0 && t0 > 0.0) {
        return (a0, t0);
    }
    let times = &series.times[range.clone()];
    let ec = &series.ec[range];
    let sse = |a: f64, t: f64| -> f64 {
        times
            .iter()
            .zip(ec)
            .map(|(&s, &e)| (cosine_model(offset, a, t, s) - e).powi(2))
            .sum()
    };

    let (mut a, mut t) = (a0, t0);
    let mut cost = sse(a, t);
    let mut damping = 1e-6;
    for _ in 0..200 {
        // Normal equations J^T J δ = −J^T r.
        let (mut jaa, mut jat, mut jtt, mut ga, mut gt) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&s, &e) in times.iter().zip(ec) {
            let phase = PI * s / t;
            let (sin, cos) = phase.sin_cos();
            let r = offset + 0.5 * a * (cos - 1.0) - e;
            let da = 0.5 * (cos - 1.0);
            let dt = 0.5 * a * sin * phase / t;
            jaa += da * da;
            jat += da * dt;
            jtt += dt * dt;
            ga += da * r;
            gt += dt * r;
        }
        let mut accepted = false;
        for _ in 0..30 {
            let (maa, mtt) = (jaa * (1.0 + damping), jtt * (1.0 + damping));
            let det = maa * mtt - jat * jat;
            if !(det.abs() > 0.0) {
                damping *= 10.0;
                continue;
            }
            let step_a = -(mtt * ga - jat * gt) / det;
            let step_t = -(maa * gt - jat * ga) / det;
            let (na, nt) = (a + step_a, t + step_t);
            if na > 0.0 && nt > 0.0 {
                let new_cost = sse(na, nt);
                if new_cost <= cost {
                    let rel = (step_a / na).abs().max((step_t / nt).abs());
                    a = na;
                    t = nt;
                    cost = new_cost;
                    damping = (damping * 0.1).max(1e-15);
                    accepted = true;
                    if rel < 1e-13 {
                        return (a, t);
                    }
                    break;
                }
            }
            damping *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    (a, t)
}

/// Inter-pulse intervals to sweep, with the coarse spacing that defines
/// the detection neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub struct TauGrid {
    taus: Vec<f64>,
    coarse: Vec<bool>,
    base_step: f64,
}

/// `(1000/π)·g·τ`, the dimensionless pulse interval of the τ-sweep axes.
pub fn tau_scaled(g: f64, tau: f64) -> f64 {
    1000.0 / PI * g * tau
}

pub fn tau_from_scaled(g: f64, scaled: f64) -> f64 {
    scaled * PI / (1000.0 * g)
}

impl TauGrid {
    /// Arbitrary strictly increasing positive intervals. The coarse step is
    /// the largest spacing.
    pub fn new(taus: Vec<f64>) -> Result<Self, AnalysisError> {
        if taus.is_empty() {
            return Err(AnalysisError::InvalidGrid("grid is empty".into()));
        }
        if taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(AnalysisError::InvalidGrid("intervals must be finite and > 0".into()));
        }
        if taus.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(AnalysisError::InvalidGrid("intervals must be strictly increasing".into()));
        }
        let base_step = taus
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max);
        let base_step = if base_step > 0.0 { base_step } else { taus[0] };
        let coarse = vec![true; taus.len()];
        Ok(Self {
            taus,
            coarse,
            base_step,
        })
    }

    /// Uniform grid in scaled units `start..=stop` with spacing `step`,
    /// plus a `refine`-times finer lattice within `±halfwidth` of each
    /// center. Fine points sit on the coarse lattice subdivided by `refine`.
    pub fn scaled(
        g: f64,
        start: f64,
        stop: f64,
        step: f64,
        refine: usize,
        centers: &[f64],
        halfwidth: f64,
    ) -> Result<Self, AnalysisError> {
        if !(start > 0.0 && stop >= start && step > 0.0 && refine >= 1) {
            return Err(AnalysisError::InvalidGrid(format!(
                "need 0 < start <= stop, step > 0, refine >= 1 (got {start}, {stop}, {step}, {refine})"
            )));
        }
        let fine = step / refine as f64;
        let r = refine as i64;
        let last = ((stop - start) / fine + 1e-9).floor() as i64;
        let mut lattice: BTreeSet<i64> = (0..=last).filter(|k| k % r == 0).collect();
        for &c in centers {
            let lo = ((c - halfwidth - start) / fine).ceil().max(0.0) as i64;
            let hi = (((c + halfwidth - start) / fine).floor() as i64).min(last);
            lattice.extend(lo..=hi);
        }
        let taus = lattice
            .iter()
            .map(|&k| tau_from_scaled(g, start + k as f64 * fine))
            .collect();
        let mut grid = Self::new(taus)?;
        grid.coarse = lattice.iter().map(|k| k % r == 0).collect();
        grid.base_step = tau_from_scaled(g, step);
        Ok(grid)
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn base_step(&self) -> f64 {
        self.base_step
    }

    /// Whether each point lies on the coarse lattice.
    pub fn coarse(&self) -> &[bool] {
        &self.coarse
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }
}

/// Least-squares slope of T against τ through the valley minima.
#[derive(Debug, Clone, PartialEq)]
pub struct ValleyFit {
    pub slope: f64,
    /// RMS of `T − slope·τ` over the valleys, relative to the mean valley T.
    pub residual: f64,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub params: ModelParams,
    pub taus: Vec<f64>,
    pub fits: Vec<FitResult>,
    pub window: f64,
    pub base_step: f64,
    pub coarse: Vec<bool>,
    pub predicted_peaks: Vec<f64>,
    pub detected_peaks: Vec<usize>,
    pub valley: Option<ValleyFit>,
}

impl ScanResult {
    pub fn valley_slope(&self) -> Option<f64> {
        self.valley.as_ref().map(|v| v.slope)
    }

    fn neighborhood(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let half = NEIGHBORHOOD_STEPS * self.base_step * (1.0 + 1e-9);
        let ti = self.taus[i];
        (0..self.taus.len()).filter(move |&j| j != i && self.coarse[j] && (self.taus[j] - ti).abs() <= half)
    }

    /// Nearest predicted peak interval to `tau`.
    pub fn nearest_predicted(&self, tau: f64) -> Option<f64> {
        self.predicted_peaks
            .iter()
            .copied()
            .min_by(|a, b| (a - tau).abs().total_cmp(&(b - tau).abs()))
    }
}

/// Sweeps τ: one stroboscopic run of `floor(window/τ)` pulses and one fit per
/// grid point. Output order follows the grid for any `jobs`.
pub fn scan_tau(p: &ModelParams, grid: &TauGrid, window: f64, jobs: usize) -> Result<ScanResult, AnalysisError> {
    if !(window.is_finite() && window > 0.0) {
        return Err(AnalysisError::InvalidArgument(format!("window must be > 0, got {window}")));
    }
    let run_one = |&tau: &f64| -> Result<FitResult, AnalysisError> {
        let n_pulses = (window / tau * (1.0 + 1e-12)).floor() as usize;
        if n_pulses + 1 < MIN_FIT_SAMPLES {
            return Err(AnalysisError::TooFewSamples {
                found: n_pulses + 1,
                required: MIN_FIT_SAMPLES,
            });
        }
        let series = run_stroboscopic(p, tau, n_pulses, 1)?;
        fit_charging_curve(&series, p)
    };
    let fits = if jobs <= 1 {
        grid.taus().iter().map(run_one).collect::<Result<Vec<_>, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| AnalysisError::InvalidArgument(e.to_string()))?;
        pool.install(|| grid.taus().par_iter().map(run_one).collect::<Result<Vec<_>, _>>())?
    };

    let tau1 = 2.0 * PI / p.lambda4();
    let n_max = (grid.taus().last().copied().unwrap_or(0.0) / tau1).floor() as usize + 1;
    let mut scan = ScanResult {
        params: *p,
        taus: grid.taus().to_vec(),
        fits,
        window,
        base_step: grid.base_step(),
        coarse: grid.coarse().to_vec(),
        predicted_peaks: predict_peaks(p, n_max)?,
        detected_peaks: Vec::new(),
        valley: None,
    };
    if scan.taus.len() >= 5 {
        scan.detected_peaks = detect_peaks(&scan)?;
    }
    scan.valley = fit_valleys(&scan).ok();
    Ok(scan)
}

/// Singular intervals `τn = 2πn/λ4`, n = 1..=n_max.
pub fn predict_peaks(p: &ModelParams, n_max: usize) -> Result<Vec<f64>, AnalysisError> {
    if n_max == 0 {
        return Err(AnalysisError::InvalidArgument("n_max must be >= 1".into()));
    }
    let l4 = p.lambda4();
    Ok((1..=n_max).map(|n| 2.0 * PI * n as f64 / l4).collect())
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Grid indices whose T exceeds [`PEAK_FACTOR`] times the median over the
/// coarse points of its neighborhood, whose A falls below that median divided
/// by [`PEAK_FACTOR`], or which are censored while both grid neighbors are
/// resolved.
pub fn detect_peaks(scan: &ScanResult) -> Result<Vec<usize>, AnalysisError> {
    let n = scan.taus.len();
    if n < 5 {
        return Err(AnalysisError::TooFewPoints { found: n, required: 5 });
    }
    let mut out = Vec::new();
    for i in 0..n {
        let fit = &scan.fits[i];
        let spike = median(scan.neighborhood(i).map(|j| scan.fits[j].t_charge).collect())
            .is_some_and(|m| fit.t_charge >= PEAK_FACTOR * m);
        let collapse = median(scan.neighborhood(i).map(|j| scan.fits[j].a).collect())
            .is_some_and(|m| fit.a * PEAK_FACTOR <= m);
        let isolated_censor = !fit.resolved
            && (i == 0 || scan.fits[i - 1].resolved)
            && (i + 1 == n || scan.fits[i + 1].resolved);
        if spike || collapse || isolated_censor {
            out.push(i);
        }
    }
    Ok(out)
}

/// A run of adjacent detections reported as one spike.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakMatch {
    pub indices: Vec<usize>,
    /// Detection with the smallest A in the run (earliest on ties).
    pub representative: usize,
    pub tau: f64,
    /// `(n, τn)` of the closest predicted peak.
    pub nearest: Option<(usize, f64)>,
    /// Largest grid spacing adjacent to the representative.
    pub local_step: f64,
    pub matched: bool,
}

pub fn match_peaks(scan: &ScanResult, detected: &[usize]) -> Vec<PeakMatch> {
    let mut runs: Vec<Vec<usize>> = Vec::new();
    for &i in detected {
        match runs.last_mut() {
            Some(run) if run.last() == Some(&(i.wrapping_sub(1))) => run.push(i),
            _ => runs.push(vec![i]),
        }
    }
    runs.into_iter()
        .map(|indices| {
            let representative = indices
                .iter()
                .copied()
                .fold(indices[0], |best, i| {
                    if scan.fits[i].a < scan.fits[best].a {
                        i
                    } else {
                        best
                    }
                });
            let tau = scan.taus[representative];
            let nearest = scan
                .predicted_peaks
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - tau).abs().total_cmp(&(b.1 - tau).abs()))
                .map(|(k, &t)| (k + 1, t));
            let left = representative
                .checked_sub(1)
                .map_or(0.0, |j| tau - scan.taus[j]);
            let right = scan
                .taus
                .get(representative + 1)
                .map_or(0.0, |t| t - tau);
            let local_step = left.max(right);
            let matched = nearest.is_some_and(|(_, t)| (t - tau).abs() <= local_step * (1.0 + 1e-9));
            PeakMatch {
                indices,
                representative,
                tau,
                nearest,
                local_step,
                matched,
            }
        })
        .collect()
}

/// Valleys: strict local minima of T over resolved coarse points whose
/// topographic prominence is at least [`VALLEY_PROMINENCE`] of the
/// neighborhood median. Prominence is the rise to the lower of the two
/// side maxima, where each side extends until T drops below the candidate.
pub fn find_valleys(scan: &ScanResult) -> Vec<usize> {
    let resolved: Vec<usize> = (0..scan.taus.len())
        .filter(|&i| scan.fits[i].resolved && scan.coarse[i])
        .collect();
    let t: Vec<f64> = resolved.iter().map(|&i| scan.fits[i].t_charge).collect();
    let mut out = Vec::new();
    for k in 1..t.len().saturating_sub(1) {
        if !(t[k] < t[k - 1] && t[k] < t[k + 1]) {
            continue;
        }
        // Highest point on each side before reaching something lower. A side
        // that runs into the grid end without descending does not bound it.
        let side = |iter: &mut dyn Iterator<Item = usize>| -> (f64, bool) {
            let mut m = t[k];
            for j in iter {
                if t[j] < t[k] {
                    return (m, true);
                }
                m = m.max(t[j]);
            }
            (m, false)
        };
        let (left, left_bounded) = side(&mut (0..k).rev());
        let (right, right_bounded) = side(&mut (k + 1..t.len()));
        let prominence = match (left_bounded, right_bounded) {
            (true, true) => left.min(right),
            (true, false) => left,
            (false, true) => right,
            (false, false) => left.max(right),
        } - t[k];
        let i = resolved[k];
        let local = median(
            scan.neighborhood(i)
                .filter(|&j| scan.fits[j].resolved)
                .map(|j| scan.fits[j].t_charge)
                .chain(std::iter::once(t[k]))
                .collect(),
        )
        .unwrap_or(t[k]);
        if prominence >= VALLEY_PROMINENCE * local {
            out.push(i);
        }
    }
    out
}

/// Slope of `T = slope·τ` (intercept fixed at zero) through the valleys.
pub fn fit_valleys(scan: &ScanResult) -> Result<ValleyFit, AnalysisError> {
    let indices = find_valleys(scan);
    if indices.len() < 3 {
        return Err(AnalysisError::TooFewValleys { found: indices.len() });
    }
    let (mut stt, mut sty) = (0.0, 0.0);
    for &i in &indices {
        stt += scan.taus[i] * scan.taus[i];
        sty += scan.taus[i] * scan.fits[i].t_charge;
    }
    let slope = sty / stt;
    let n = indices.len() as f64;
    let mean_t = indices.iter().map(|&i| scan.fits[i].t_charge).sum::<f64>() / n;
    let rms = (indices
        .iter()
        .map(|&i| (scan.fits[i].t_charge - slope * scan.taus[i]).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ValleyFit {
        slope,
        residual: rms / mean_t,
        indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const G: f64 = 0.01;

    fn synthetic(a: f64, t_charge: f64, offset: f64, n: usize, span: f64) -> EnergyTimeSeries {
        let times: Vec<f64> = (0..n).map(|i| span * i as f64 / (n - 1) as f64).collect();
        let ec: Vec<f64> = times.iter().map(|&t| cosine_model(offset, a, t_charge, t)).collect();
        let eb: Vec<f64> = ec.iter().map(|e| offset - e).collect();
        EnergyTimeSeries::new(times, ec, eb, vec![0; n], G).unwrap()
    }

    fn scan_from(taus: Vec<f64>, t: Vec<f64>, resolved: Vec<bool>, base_step: f64) -> ScanResult {
        let n = taus.len();
        let fits = t
            .iter()
            .zip(&resolved)
            .map(|(&t_charge, &resolved)| FitResult {
                a: 1.0,
                t_charge,
                residual: 0.0,
                resolved,
            })
            .collect();
        ScanResult {
            params: ModelParams::baseline(G).unwrap(),
            taus,
            fits,
            window: 1e9,
            base_step,
            coarse: vec![true; n],
            predicted_peaks: vec![],
            detected_peaks: vec![],
            valley: None,
        }
    }

    #[test]
    fn exact_cosine_is_recovered() {
        let p = ModelParams::baseline(G).unwrap();
        let (a, t) = (1.234, 157.3);
        let s = synthetic(a, t, p.lambda3(), 400, 2.6 * t);
        let fit = fit_charging_curve(&s, &p).unwrap();
        assert!(fit.resolved);
        assert!((fit.a - a).abs() < 1e-9, "{}", fit.a);
        assert!((fit.t_charge - t).abs() < 1e-9, "{}", fit.t_charge);
        assert!(fit.residual < 1e-9);
    }

    #[test]
    fn too_few_samples() {
        let p = ModelParams::baseline(G).unwrap();
        let s = synthetic(1.0, 10.0, p.lambda3(), 20, 30.0);
        assert!(matches!(
            fit_charging_curve(&s, &p),
            Err(AnalysisError::TooFewSamples { found: 20, .. })
        ));
    }

    #[test]
    fn censored_when_still_rising() {
        let p = ModelParams::baseline(G).unwrap();
        let s = synthetic(1.0, 1000.0, p.lambda3(), 100, 500.0);
        let fit = fit_charging_curve(&s, &p).unwrap();
        assert!(!fit.resolved);
        assert_eq!(fit.t_charge, 500.0);
        assert!((fit.a - s.max_eb()).abs() < 1e-15);
    }

    #[test]
    fn plateau_tie_takes_earlier_sample() {
        let eb = vec![0.0, 0.5, 1.0, 1.0, 0.5, 0.0];
        assert_eq!(first_full_charge(&eb), Some(2));
        let eb = vec![0.0, 0.95, 0.5, 1.0, 0.0];
        assert_eq!(first_full_charge(&eb), Some(1));
        assert_eq!(first_full_charge(&[0.0; 5]), None);
    }

    #[test]
    fn parabola_vertex_exact() {
        let f = |t: f64| 3.0 - 2.0 * (t - 1.3).powi(2);
        let (ts, ys) = parabola_vertex([1.0, 1.5, 2.2], [f(1.0), f(1.5), f(2.2)]).unwrap();
        assert!((ts - 1.3).abs() < 1e-12);
        assert!((ys - 3.0).abs() < 1e-12);
        assert!(parabola_vertex([0.0, 1.0, 2.0], [0.0, 1.0, 2.0]).is_none());
    }

    #[test]
    fn peak_prediction() {
        let p = ModelParams::baseline(G).unwrap();
        let peaks = predict_peaks(&p, 3).unwrap();
        for (n, tau) in peaks.iter().enumerate() {
            let want = 10.0 * 2f64.sqrt() * (n + 1) as f64;
            assert!((tau_scaled(G, *tau) - want).abs() < 1e-12);
        }
        let s3 = ModelParams::new(1.0, G, 0.7, 1.0, None).unwrap();
        assert!((tau_scaled(G, predict_peaks(&s3, 1).unwrap()[0]) - 12.21).abs() < 0.005);
        let s4 = ModelParams::new(1.0, G, 1.0, 2.0, None).unwrap();
        assert!((tau_scaled(G, predict_peaks(&s4, 1).unwrap()[0]) - 7.07).abs() < 0.005);
        assert!(predict_peaks(&p, 0).is_err());
    }

    #[test]
    fn grid_construction() {
        let g = TauGrid::scaled(G, 1.0, 3.0, 0.5, 5, &[2.0], 0.2).unwrap();
        let scaled: Vec<f64> = g.taus().iter().map(|&t| tau_scaled(G, t)).collect();
        let want = [1.0, 1.5, 1.8, 1.9, 2.0, 2.1, 2.2, 2.5, 3.0];
        assert_eq!(scaled.len(), want.len(), "{scaled:?}");
        for (a, b) in scaled.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((g.base_step() - tau_from_scaled(G, 0.5)).abs() < 1e-15);
        assert_eq!(g.coarse(), [true, true, false, false, true, false, false, true, true]);
        assert!(TauGrid::new(vec![]).is_err());
        assert!(TauGrid::new(vec![2.0, 1.0]).is_err());
        assert!(TauGrid::scaled(G, 1.0, 0.5, 0.1, 1, &[], 0.0).is_err());
    }

    #[test]
    fn flat_scan_has_no_detections() {
        let taus: Vec<f64> = (1..=30).map(|i| i as f64).collect();
        let scan = scan_from(taus, vec![5.0; 30], vec![true; 30], 1.0);
        assert!(detect_peaks(&scan).unwrap().is_empty());
        let short = scan_from(vec![1.0, 2.0], vec![1.0, 1.0], vec![true; 2], 1.0);
        assert!(matches!(detect_peaks(&short), Err(AnalysisError::TooFewPoints { .. })));
    }

    #[test]
    fn spike_and_isolated_censor_detected() {
        let taus: Vec<f64> = (1..=30).map(|i| i as f64).collect();
        let mut t = vec![5.0; 30];
        t[10] = 20.0;
        let mut resolved = vec![true; 30];
        resolved[20] = false;
        let mut scan = scan_from(taus, t, resolved, 1.0);
        assert_eq!(detect_peaks(&scan).unwrap(), vec![10, 20]);
        scan.fits[25].a = 0.3;
        assert_eq!(detect_peaks(&scan).unwrap(), vec![10, 20, 25]);
        scan.fits[25].a = 0.4;
        assert_eq!(detect_peaks(&scan).unwrap(), vec![10, 20]);
    }

    #[test]
    fn fine_points_do_not_enter_the_median() {
        let taus: Vec<f64> = (1..=40).map(|i| i as f64).collect();
        let mut t = vec![5.0; 40];
        let mut coarse = vec![true; 40];
        for i in 16..=24 {
            t[i] = 18.0;
            coarse[i] = i == 20;
        }
        t[20] = 20.0;
        let mut scan = scan_from(taus, t, vec![true; 40], 1.0);
        scan.coarse = coarse;
        assert!(detect_peaks(&scan).unwrap().contains(&20));
    }

    #[test]
    fn synthetic_valleys_give_exact_slope() {
        // Saw-tooth T with minima exactly on T = 7τ.
        let taus: Vec<f64> = (1..=70).map(|i| i as f64 * 0.5).collect();
        let t: Vec<f64> = taus
            .iter()
            .map(|&x| {
                let d = (x - 5.0).rem_euclid(10.0) - 5.0;
                7.0 * x + 40.0 * d.abs()
            })
            .collect();
        let scan = scan_from(taus, t, vec![true; 70], 0.5);
        let fit = fit_valleys(&scan).unwrap();
        assert_eq!(fit.indices.len(), 3);
        assert!((fit.slope - 7.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);

        let flat = scan_from((1..=10).map(f64::from).collect(), vec![1.0; 10], vec![true; 10], 1.0);
        assert!(matches!(fit_valleys(&flat), Err(AnalysisError::TooFewValleys { found: 0 })));
    }

    #[test]
    fn peak_runs_are_grouped() {
        let taus: Vec<f64> = (0..10).map(|i| 1.0 + i as f64 * 0.1).collect();
        let mut t = vec![1.0; 10];
        t[4] = 8.0;
        t[5] = 9.0;
        t[6] = 7.0;
        let mut scan = scan_from(taus, t, vec![true; 10], 0.1);
        scan.fits[5].a = 0.1;
        scan.fits[6].a = 0.05;
        scan.predicted_peaks = vec![1.62];
        let m = match_peaks(&scan, &[4, 5, 6, 9]);
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].representative, 6);
        assert!(m[0].matched);
        assert_eq!(m[0].nearest.map(|x| x.0), Some(1));
        assert!(!m[1].matched);
    }
}
