//! Quantized LLR densities.
//!
//! Bin `i` holds LLR `i·step` for `|i| ≤ J`; bins `±(J+1)` collect all mass
//! beyond `±(J + ½)·step`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub step: f64,
    /// Interior half-width in bins; interior bins are `-J..=J`.
    pub half_bins: usize,
}

impl Default for Grid {
    /// Step 0.05 over ±25.
    fn default() -> Self {
        Self { step: 0.05, half_bins: 500 }
    }
}

impl Grid {
    pub fn new(step: f64, half_bins: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) || half_bins == 0 {
            return Err(Error::Input(format!("bad grid: step {step}, {half_bins} half bins")));
        }
        Ok(Self { step, half_bins })
    }

    /// Total bins including the two saturation bins.
    pub fn len(&self) -> usize {
        2 * self.half_bins + 3
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Signed bin value of a storage index.
    pub fn bin_of(&self, idx: usize) -> i64 {
        idx as i64 - self.half_bins as i64 - 1
    }

    pub fn index_of(&self, bin: i64) -> usize {
        let s = self.half_bins as i64 + 1;
        (bin.clamp(-s, s) + s) as usize
    }

    /// Storage index for an LLR value, saturating out-of-range values.
    pub fn quantize(&self, llr: f64) -> usize {
        let s = self.half_bins as f64 + 1.0;
        self.index_of((llr / self.step).round().clamp(-s, s) as i64)
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.bin_of(idx) as f64 * self.step
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedPdf {
    grid: Grid,
    mass: Vec<f64>,
}

impl QuantizedPdf {
    /// Wraps raw masses, rejecting negative entries and normalizing to 1.
    pub fn from_masses(grid: Grid, mut mass: Vec<f64>) -> Result<Self> {
        if mass.len() != grid.len() {
            return Err(Error::Dimension(format!("{} masses for a {}-bin grid", mass.len(), grid.len())));
        }
        if mass.iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
            return Err(Error::Input("negative or non-finite mass".into()));
        }
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            return Err(Error::Input("density has no mass".into()));
        }
        mass.iter_mut().for_each(|m| *m /= total);
        Ok(Self { grid, mass })
    }

    pub fn point_mass(grid: Grid, llr: f64) -> Self {
        let mut mass = vec![0.0; grid.len()];
        mass[grid.quantize(llr)] = 1.0;
        Self { grid, mass }
    }

    /// Normalized histogram of bin counts.
    pub fn from_counts(grid: Grid, counts: &[u64]) -> Result<Self> {
        Self::from_masses(grid, counts.iter().map(|&c| c as f64).collect())
    }

    pub fn from_samples(grid: Grid, samples: &[f64]) -> Result<Self> {
        let mut counts = vec![0u64; grid.len()];
        for &s in samples {
            counts[grid.quantize(s)] += 1;
        }
        Self::from_counts(grid, &counts)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Mass at a signed bin.
    pub fn at(&self, bin: i64) -> f64 {
        self.mass[self.grid.index_of(bin)]
    }

    /// Mass on negative LLRs plus half the mass at zero.
    pub fn error_probability(&self) -> f64 {
        let zero = self.grid.half_bins + 1;
        (self.mass[..zero].iter().sum::<f64>() + 0.5 * self.mass[zero]).clamp(0.0, 1.0)
    }

    pub fn mean(&self) -> f64 {
        self.mass.iter().enumerate().map(|(i, &m)| m * self.grid.value(i)).sum()
    }

    /// Mirror image `p(−l)`.
    pub fn reflected(&self) -> Self {
        let mut mass = self.mass.clone();
        mass.reverse();
        Self { grid: self.grid, mass }
    }

    /// `w·a + (1−w)·b`.
    pub fn mix(a: &Self, b: &Self, w: f64) -> Result<Self> {
        if a.grid != b.grid {
            return Err(Error::GridMismatch);
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::Input(format!("mixture weight {w} outside [0,1]")));
        }
        let mass = a.mass.iter().zip(&b.mass).map(|(x, y)| w * x + (1.0 - w) * y).collect();
        Ok(Self { grid: a.grid, mass })
    }

    /// Weighted mixture; weights must sum to 1.
    pub fn mixture(parts: &[(f64, &Self)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Input("empty mixture".into()))?.1;
        let mut mass = vec![0.0; first.mass.len()];
        let mut wsum = 0.0;
        for &(w, p) in parts {
            if p.grid != first.grid {
                return Err(Error::GridMismatch);
            }
            if w < 0.0 {
                return Err(Error::Input(format!("negative mixture weight {w}")));
            }
            wsum += w;
            mass.iter_mut().zip(&p.mass).for_each(|(m, x)| *m += w * x);
        }
        if (wsum - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!("mixture weights sum to {wsum}")));
        }
        Ok(Self { grid: first.grid, mass })
    }

    pub(crate) fn from_raw(grid: Grid, mass: Vec<f64>) -> Self {
        debug_assert_eq!(mass.len(), grid.len());
        Self { grid, mass }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_and_saturate() {
        let g = Grid::default();
        assert_eq!(g.len(), 1003);
        assert_eq!(g.bin_of(g.quantize(0.0)), 0);
        assert_eq!(g.bin_of(g.quantize(0.074)), 1);
        assert_eq!(g.bin_of(g.quantize(-25.0)), -500);
        assert_eq!(g.bin_of(g.quantize(25.03)), 501);
        assert_eq!(g.bin_of(g.quantize(-1e9)), -501);
    }

    #[test]
    fn error_probability_counts_half_of_zero() {
        let g = Grid::new(1.0, 4).unwrap();
        let p = QuantizedPdf::from_samples(g, &[-2.0, 0.0, 1.0, 3.0]).unwrap();
        assert!((p.error_probability() - 0.375).abs() < 1e-15);
        assert!((p.total() - 1.0).abs() < 1e-15);
        assert!((p.reflected().error_probability() - 0.625).abs() < 1e-15);
    }

    #[test]
    fn mixtures_check_grids_and_weights() {
        let a = QuantizedPdf::point_mass(Grid::new(1.0, 4).unwrap(), 1.0);
        let b = QuantizedPdf::point_mass(Grid::new(0.5, 4).unwrap(), 1.0);
        assert!(matches!(QuantizedPdf::mix(&a, &b, 0.5), Err(Error::GridMismatch)));
        assert!(QuantizedPdf::mixture(&[(0.3, &a), (0.3, &a)]).is_err());
        assert!(QuantizedPdf::from_masses(a.grid(), vec![-1.0; 11]).is_err());
    }
}
