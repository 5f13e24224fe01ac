//! Quasi-energy statistics of the dense Floquet operator.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::floquet::FloquetCircuit;
use crate::state::QuditState;
use crate::{Complex64, Error, Result};

pub const DEFAULT_DENSE_CAP: usize = 8192;

/// `2 ln 2 − 1`, the Poisson value of `⟨r⟩`.
pub const POISSON_MEAN_R: f64 = 0.386_294_361_119_890_6;
/// Large-N GOE value of `⟨r⟩`.
pub const GOE_MEAN_R: f64 = 0.5307;

const UNITARITY_TOL: f64 = 1e-8;
const DUPLICATE_TOL: f64 = 1e-14;

/// `U_F` as a dense matrix whose column `j` is the image of basis state `j`.
pub fn build_floquet_matrix(circuit: &FloquetCircuit, cap: usize) -> Result<Mat<Complex64>> {
    let shape = circuit.shape();
    let dim = shape.dim();
    if dim > cap {
        return Err(Error::DenseCap { dim, cap });
    }
    let columns = (0..dim)
        .into_par_iter()
        .map(|j| {
            let mut s = QuditState::basis_state(shape, j)?;
            circuit.step(&mut s)?;
            Ok(s.into_amplitudes())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Mat::from_fn(dim, dim, |r, c| columns[c][r]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenphaseSet {
    /// Sorted, in `[0, 2π)`.
    pub phases: Vec<f64>,
    pub dim: usize,
    /// `max_k ||λ_k| − 1|`.
    pub unitarity_residual: f64,
}

fn to_unit_interval(phi: f64) -> f64 {
    let p = phi.rem_euclid(2.0 * PI);
    if p >= 2.0 * PI {
        0.0
    } else {
        p
    }
}

pub fn eigenphases(u: &Mat<Complex64>) -> Result<EigenphaseSet> {
    let n = u.nrows();
    if u.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u.ncols() });
    }
    // cheap pre-screen: columns of a unitary are unit vectors
    for c in 0..n {
        let norm: f64 = (0..n).map(|r| u[(r, c)].norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNITARITY_TOL {
            return Err(Error::NotUnitary { residual: (norm - 1.0).abs() });
        }
    }
    let ev = u.eigenvalues().map_err(|e| Error::LinAlg(format!("{e:?}")))?;
    let residual = ev.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
    if residual > UNITARITY_TOL {
        return Err(Error::NotUnitary { residual });
    }
    let mut phases: Vec<f64> = ev.iter().map(|z| to_unit_interval(z.arg())).collect();
    phases.sort_by(f64::total_cmp);
    Ok(EigenphaseSet { phases, dim: n, unitarity_residual: residual })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRatio {
    pub mean_r: f64,
    pub n_used: usize,
    /// Consecutive gap pairs dropped because a gap was at most 1e−14.
    pub n_excluded: usize,
}

fn ratio_mean(gaps: &[f64], circular: bool) -> Result<GapRatio> {
    let pairs = if circular { gaps.len() } else { gaps.len().saturating_sub(1) };
    let mut sum = 0.0;
    let (mut used, mut excluded) = (0, 0);
    for n in 0..pairs {
        let a = gaps[n];
        let b = gaps[(n + 1) % gaps.len()];
        if a <= DUPLICATE_TOL || b <= DUPLICATE_TOL {
            excluded += 1;
            continue;
        }
        sum += a.min(b) / a.max(b);
        used += 1;
    }
    if used == 0 {
        return Err(Error::InvalidArgument("no non-degenerate gap pairs".into()));
    }
    Ok(GapRatio { mean_r: sum / used as f64, n_used: used, n_excluded: excluded })
}

/// Consecutive gaps of sorted phases on the circle, wrap-around gap last.
pub fn circular_gaps(phases: &[f64]) -> Vec<f64> {
    let mut gaps: Vec<f64> = phases.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.push(2.0 * PI - (phases[phases.len() - 1] - phases[0]));
    gaps
}

/// `⟨r⟩` over all consecutive gap pairs on the unit circle.
pub fn gap_ratio(phases: &[f64]) -> Result<GapRatio> {
    if phases.len() < 3 {
        return Err(Error::TooShort(phases.len()));
    }
    let mut sorted: Vec<f64> = phases.iter().map(|&p| to_unit_interval(p)).collect();
    sorted.sort_by(f64::total_cmp);
    ratio_mean(&circular_gaps(&sorted), true)
}

/// `⟨r⟩` of an ordinary (non-circular) spectrum.
pub fn gap_ratio_linear(levels: &[f64]) -> Result<GapRatio> {
    if levels.len() < 3 {
        return Err(Error::TooShort(levels.len()));
    }
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    let gaps: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
    ratio_mean(&gaps, false)
}

/// Circular gaps rescaled to unit mean.
pub fn normalized_spacings(phases: &[f64]) -> Result<Vec<f64>> {
    if phases.len() < 2 {
        return Err(Error::TooShort(phases.len()));
    }
    let mut sorted: Vec<f64> = phases.iter().map(|&p| to_unit_interval(p)).collect();
    sorted.sort_by(f64::total_cmp);
    let gaps = circular_gaps(&sorted);
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    Ok(gaps.iter().map(|g| g / mean).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingHistogram {
    pub s_max: f64,
    pub bin_width: f64,
    /// Bin centers.
    pub centers: Vec<f64>,
    /// Probability density per bin; integrates to the fraction below `s_max`.
    pub density: Vec<f64>,
}

impl SpacingHistogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,P\n");
        for (s, p) in self.centers.iter().zip(&self.density) {
            out.push_str(&format!("{s},{p}\n"));
        }
        out
    }
}

pub fn spacing_histogram(phases: &[f64], n_bins: usize, s_max: f64) -> Result<SpacingHistogram> {
    if phases.len() < 10 {
        return Err(Error::TooShort(phases.len()));
    }
    if n_bins == 0 || s_max.is_nan() || s_max <= 0.0 {
        return Err(Error::InvalidArgument("need n_bins ≥ 1 and s_max > 0".into()));
    }
    Ok(histogram_of(&normalized_spacings(phases)?, n_bins, s_max))
}

/// Density histogram of arbitrary unit-mean spacings.
pub fn histogram_of(spacings: &[f64], n_bins: usize, s_max: f64) -> SpacingHistogram {
    let w = s_max / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for &s in spacings {
        if (0.0..s_max).contains(&s) {
            counts[((s / w) as usize).min(n_bins - 1)] += 1;
        }
    }
    let total = spacings.len() as f64;
    SpacingHistogram {
        s_max,
        bin_width: w,
        centers: (0..n_bins).map(|b| (b as f64 + 0.5) * w).collect(),
        density: counts.iter().map(|&c| c as f64 / (total * w)).collect(),
    }
}
