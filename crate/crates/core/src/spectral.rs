//! Periodograms of stroboscopic series and the derived line metrics.
//!
//! `S_k = |Σ_n (x_n − x̄) e^{−2πikn/N_t}|²`, rectangular window, no padding.
//! For complex series the line of a charge-1 probe under an `m`-cycle sits at
//! `f = −1/m`, i.e. bin `N_t − round(N_t/m)`; [`Spectrum::target_bin`] picks
//! that bin automatically.

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{Complex64, Error, Result};

/// Conversion from a Gaussian standard deviation to its FWHM.
pub const FWHM_FACTOR: f64 = 2.355;

pub const DEFAULT_HALF_WINDOW: usize = 3;

/// Mean-removed power below this fraction of the raw input power counts as
/// no signal (a relative amplitude of 1e−12, i.e. rounding residue).
pub const SILENCE_RATIO: f64 = 1e-24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    n_samples: usize,
    power: Vec<f64>,
    complex_input: bool,
    mean_removed: bool,
    /// `N Σ|x_n|²` before mean removal.
    #[serde(default)]
    input_power: f64,
}

impl Spectrum {
    /// Wraps an externally computed power vector (mean-removed assumed).
    pub fn from_power(power: Vec<f64>, complex_input: bool) -> Result<Self> {
        if power.len() < 2 {
            return Err(Error::TooShort(power.len()));
        }
        if power.iter().any(|p| p.is_nan() || *p < 0.0) {
            return Err(Error::InvalidArgument("power must be non-negative".into()));
        }
        let input_power = power.iter().sum();
        Ok(Self { n_samples: power.len(), power, complex_input, mean_removed: true, input_power })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn is_complex(&self) -> bool {
        self.complex_input
    }

    pub fn mean_removed(&self) -> bool {
        self.mean_removed
    }

    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 / self.n_samples as f64
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_samples).map(|k| self.frequency(k)).collect()
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    /// True when the mean-removed series is indistinguishable from a constant.
    pub fn is_silent(&self) -> bool {
        self.total_power() <= SILENCE_RATIO * self.input_power
    }

    /// Bin of the `1/m` line: `round(N_t/m)` for real input, its mirror
    /// `N_t − round(N_t/m)` for complex input.
    pub fn target_bin(&self, m: usize) -> usize {
        let k = ideal_bin(self.n_samples, m);
        if self.complex_input {
            (self.n_samples - k) % self.n_samples
        } else {
            k
        }
    }

    /// Frequency the target bin stands for: `1/m`, or `1 − 1/m` for complex input.
    pub fn target_frequency(&self, m: usize) -> f64 {
        if self.complex_input {
            1.0 - 1.0 / m as f64
        } else {
            1.0 / m as f64
        }
    }

    /// CSV with columns `k,f,S`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,f,S\n");
        for (k, p) in self.power.iter().enumerate() {
            out.push_str(&format!("{k},{},{p}\n", self.frequency(k)));
        }
        out
    }
}

/// `round(n/m)` with ties rounded up.
pub fn ideal_bin(n: usize, m: usize) -> usize {
    (2 * n + m) / (2 * m)
}

fn dft_power(mut buf: Vec<Complex64>) -> Vec<f64> {
    let n = buf.len();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    fft.process(&mut buf);
    buf.iter().map(|z| z.norm_sqr()).collect()
}

pub fn periodogram(series: &[f64]) -> Result<Spectrum> {
    let n = series.len();
    if n < 2 {
        return Err(Error::TooShort(n));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let input_power = n as f64 * series.iter().map(|x| x * x).sum::<f64>();
    let buf = series.iter().map(|x| Complex64::new(x - mean, 0.0)).collect();
    Ok(Spectrum { n_samples: n, power: dft_power(buf), complex_input: false, mean_removed: true, input_power })
}

pub fn periodogram_complex(series: &[Complex64]) -> Result<Spectrum> {
    let n = series.len();
    if n < 2 {
        return Err(Error::TooShort(n));
    }
    let mean = series.iter().sum::<Complex64>() / n as f64;
    let input_power = n as f64 * series.iter().map(|x| x.norm_sqr()).sum::<f64>();
    let buf = series.iter().map(|x| x - mean).collect();
    Ok(Spectrum { n_samples: n, power: dft_power(buf), complex_input: true, mean_removed: true, input_power })
}

/// Fraction of power in bin `k`; `None` when the spectrum carries no power.
pub fn weight_at(spectrum: &Spectrum, k: usize) -> Option<f64> {
    let total = spectrum.total_power();
    if total <= 0.0 || spectrum.is_silent() || k >= spectrum.n_samples {
        return None;
    }
    Some((spectrum.power[k] / total).clamp(0.0, 1.0))
}

/// Subharmonic weight `C_m = S(k_m)/Σ_k S(k)`; `None` means no signal.
pub fn subharmonic_weight(spectrum: &Spectrum, m: usize) -> Option<f64> {
    weight_at(spectrum, spectrum.target_bin(m))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakMetrics {
    pub target: usize,
    pub center_bin: usize,
    pub half_window: usize,
    pub peak_bin: usize,
    pub f_peak: f64,
    pub delta_f: f64,
    pub gamma: f64,
}

/// Peak position and moment width inside `k_m ± h`.
///
/// The maximum is the lowest-index bin among ties. `Ok(None)` signals a
/// window without power.
pub fn peak_metrics(spectrum: &Spectrum, m: usize, h: usize) -> Result<Option<PeakMetrics>> {
    let n = spectrum.n_samples;
    let center = spectrum.target_bin(m);
    let lo = center as i64 - h as i64;
    let hi = center as i64 + h as i64;
    if lo < 0 || hi >= n as i64 {
        return Err(Error::WindowOutOfRange { lo, hi, n });
    }
    let window = center - h..=center + h;
    let p = &spectrum.power;
    let wsum: f64 = p[window.clone()].iter().sum();
    if wsum <= 0.0 || spectrum.is_silent() {
        return Ok(None);
    }
    let mut peak = center - h;
    for k in window.clone() {
        if p[k] > p[peak] {
            peak = k;
        }
    }
    let f_peak = spectrum.frequency(peak);
    let var: f64 = window.map(|k| p[k] / wsum * (spectrum.frequency(k) - f_peak).powi(2)).sum();
    Ok(Some(PeakMetrics {
        target: m,
        center_bin: center,
        half_window: h,
        peak_bin: peak,
        f_peak,
        delta_f: f_peak - spectrum.target_frequency(m),
        gamma: FWHM_FACTOR * var.sqrt(),
    }))
}
