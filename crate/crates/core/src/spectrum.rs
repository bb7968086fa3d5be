//! Fourier transform of `G_A(t)`, peak extraction and comparison with exact gaps.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::dynamics::CorrelatorSeries;
use crate::eigen::SpectrumReference;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub omega: f64,
    pub height: f64,
    /// Position and height come from log-parabolic interpolation.
    pub interp_refined: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    /// `omega_m = m * pi / T`, `m = 0..=N`.
    pub omega: Vec<f64>,
    /// Complex transform `(dt / 2T) sum_k e^{i omega_m t_k} G_A(t_k)`.
    pub values: Vec<Complex64>,
    pub magnitude: Vec<f64>,
    pub peaks: Vec<Peak>,
    pub threshold: f64,
    /// `pi / T`.
    pub resolution: f64,
    /// Plancherel ratio; at most 1 up to round-off.
    pub parseval_ratio: f64,
    /// `max_m |Im G(omega_m)| / max_m |G(omega_m)|`.
    pub imag_ratio: f64,
}

/// Rectangular-window transform on the frequency grid `m * pi / T`.
///
/// Evaluated as a length-`2N` inverse FFT: `t_{-N}` and `t_N` share the phase
/// `(-1)^m` and are folded into one bin.
pub fn fourier_spectrum(series: &CorrelatorSeries) -> Result<SpectrumResult> {
    let grid = series.grid;
    let n = grid.n;
    if series.g_a.len() != grid.len() || n == 0 {
        return Err(Error::AsymmetricGrid);
    }
    let len = 2 * n;
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (i, g) in series.g_a.iter().enumerate() {
        let k = i as i64 - n as i64;
        buf[k.rem_euclid(len as i64) as usize] += g;
    }
    let energy: f64 = buf.iter().map(|x| x.norm_sqr()).sum();
    FftPlanner::<f64>::new().plan_fft_inverse(len).process(&mut buf);
    let t = grid.half_window();
    let scale = grid.dt_long / (2.0 * t);
    let values: Vec<Complex64> = buf[..=n].iter().map(|x| x * scale).collect();
    let magnitude: Vec<f64> = values.iter().map(|x| x.norm()).collect();
    let resolution = grid.resolution();
    let omega = (0..=n).map(|m| m as f64 * resolution).collect();

    let lhs: f64 = magnitude.iter().map(|m| m * m).sum::<f64>() * resolution;
    let rhs = resolution * scale * energy * scale * len as f64;
    let parseval_ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    let max_mag = magnitude.iter().copied().fold(0.0, f64::max);
    let imag_ratio = if max_mag > 0.0 {
        values.iter().map(|v| v.im.abs()).fold(0.0, f64::max) / max_mag
    } else {
        0.0
    };
    Ok(SpectrumResult {
        omega,
        values,
        magnitude,
        peaks: Vec::new(),
        threshold: f64::NAN,
        resolution,
        parseval_ratio,
        imag_ratio,
    })
}

/// Local maxima of the magnitude above `threshold`, refined by a three-point parabola
/// through the log-magnitudes. The shift is clamped to half a bin.
pub fn extract_peaks(mut spec: SpectrumResult, threshold: f64) -> SpectrumResult {
    let mag = &spec.magnitude;
    let last = mag.len().saturating_sub(1);
    let mut peaks = Vec::new();
    for m in 0..mag.len() {
        let b = mag[m];
        let left_ok = m == 0 || b > mag[m - 1];
        let right_ok = m == last || b >= mag[m + 1];
        if !(b > threshold && left_ok && right_ok) {
            continue;
        }
        let mut peak = Peak {
            omega: spec.omega[m],
            height: b,
            interp_refined: false,
        };
        if m > 0 && m < last && mag[m - 1] > 0.0 && mag[m + 1] > 0.0 {
            let (la, lb, lc) = (mag[m - 1].ln(), b.ln(), mag[m + 1].ln());
            let denom = la - 2.0 * lb + lc;
            if denom < 0.0 {
                let delta = (0.5 * (la - lc) / denom).clamp(-0.5, 0.5);
                peak.omega = (m as f64 + delta) * spec.resolution;
                peak.height = (lb - 0.25 * (la - lc) * delta).exp();
                peak.interp_refined = true;
            }
        }
        peaks.push(peak);
    }
    spec.peaks = peaks;
    spec.threshold = threshold;
    spec
}

/// An excitation energy `E_n - E_0` with its spectral weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceLine {
    pub omega: f64,
    pub weight: f64,
}

/// Exact lines scaled by `<A†A>`, with lines closer than `resolution` merged into one at
/// their weighted mean position (they cannot be separated on this grid).
pub fn reference_lines(r: &SpectrumReference, a_norm2: f64, resolution: f64) -> Vec<ReferenceLine> {
    let mut out: Vec<ReferenceLine> = Vec::new();
    let mut run: Vec<(f64, f64)> = Vec::new();
    let flush = |run: &mut Vec<(f64, f64)>, out: &mut Vec<ReferenceLine>| {
        if run.is_empty() {
            return;
        }
        let w: f64 = run.iter().map(|x| x.1).sum();
        let omega = if w > 0.0 {
            run.iter().map(|x| x.0 * x.1).sum::<f64>() / w
        } else {
            run.iter().map(|x| x.0).sum::<f64>() / run.len() as f64
        };
        out.push(ReferenceLine { omega, weight: w });
        run.clear();
    };
    for (gap, w) in r.lines(a_norm2, 1e-9) {
        if let Some(&(g0, _)) = run.first() {
            if gap - g0 >= resolution {
                flush(&mut run, &mut out);
            }
        }
        run.push((gap, w));
    }
    flush(&mut run, &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakMatch {
    pub peak: Peak,
    pub reference: ReferenceLine,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    pub matched: Vec<PeakMatch>,
    /// Reference lines above threshold without a peak.
    pub missed: Vec<ReferenceLine>,
    /// Peaks with no reference line of non-negligible weight within tolerance,
    /// or duplicates of an already matched line.
    pub spurious: Vec<Peak>,
    /// Peaks next to a reference line whose weight is below the threshold.
    pub straddling: Vec<PeakMatch>,
    pub match_tol: f64,
    pub threshold: f64,
}

impl MatchReport {
    pub fn max_error(&self) -> f64 {
        self.matched.iter().map(|m| m.abs_error).fold(0.0, f64::max)
    }

    pub fn is_clean(&self) -> bool {
        self.missed.is_empty() && self.spurious.is_empty()
    }
}

/// Lines lighter than this are treated as absent.
const NEGLIGIBLE_WEIGHT: f64 = 1e-10;

/// Greedy nearest matching of peaks to reference lines above the spectrum's threshold.
pub fn compare_to_reference(spec: &SpectrumResult, lines: &[ReferenceLine], match_tol: f64) -> MatchReport {
    let threshold = spec.threshold;
    let significant: Vec<usize> = (0..lines.len()).filter(|&j| lines[j].weight > threshold).collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in spec.peaks.iter().enumerate() {
        for &j in &significant {
            let d = (p.omega - lines[j].omega).abs();
            if d <= match_tol {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut peak_used = vec![false; spec.peaks.len()];
    let mut line_used = vec![false; lines.len()];
    let mut matched = Vec::new();
    for (d, i, j) in pairs {
        if peak_used[i] || line_used[j] {
            continue;
        }
        peak_used[i] = true;
        line_used[j] = true;
        matched.push(PeakMatch {
            peak: spec.peaks[i],
            reference: lines[j],
            abs_error: d,
        });
    }
    matched.sort_by(|a, b| a.peak.omega.total_cmp(&b.peak.omega));
    let missed = significant
        .iter()
        .filter(|&&j| !line_used[j])
        .map(|&j| lines[j])
        .collect();
    let mut spurious = Vec::new();
    let mut straddling = Vec::new();
    for (i, p) in spec.peaks.iter().enumerate() {
        if peak_used[i] {
            continue;
        }
        let nearest = lines
            .iter()
            .filter(|l| l.weight > NEGLIGIBLE_WEIGHT)
            .map(|l| ((p.omega - l.omega).abs(), *l))
            .filter(|(d, _)| *d <= match_tol)
            .min_by(|a, b| a.0.total_cmp(&b.0));
        match nearest {
            Some((d, l)) if l.weight <= threshold => straddling.push(PeakMatch {
                peak: *p,
                reference: l,
                abs_error: d,
            }),
            _ => spurious.push(*p),
        }
    }
    MatchReport {
        matched,
        missed,
        spurious,
        straddling,
        match_tol,
        threshold,
    }
}
