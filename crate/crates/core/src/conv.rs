//! One-dimensional convolution primitives.
//!
//! A filter `w = (w_0, .., w_s)` of length `s` acts on a signal `v` of
//! length `D`, regarded as a sequence on the integers supported on the
//! first `D` positions. The expansive (zero-padded) convolution has
//! `D + s` outputs,
//!
//! ```text
//! (w * v)_j = sum_l w_{j-l} v_l,   0 <= j-l <= s,
//! ```
//!
//! and the contracting (valid) convolution keeps only the `D - s`
//! positions where the filter overlaps the signal completely, i.e. the
//! central slice `(w * v)_{j+s}`.
//!
//! Both are linear maps and have sparse Toeplitz matrix forms with
//! constant diagonals, see [`toeplitz_expansive`] and
//! [`toeplitz_contracting`]. Summation inside an output entry always runs
//! over ascending signal index so results are bitwise reproducible and the
//! matrix form agrees with the direct form exactly.

use crate::error::{invalid, EdcnnError, Result};

/// Convolution kernel with `s + 1` coefficients indexed `0..=s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    coeffs: Vec<f64>,
}

impl Filter {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return invalid("a filter needs at least one coefficient");
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return invalid(format!("filter coefficient {i} is not finite"));
        }
        Ok(Filter { coeffs })
    }

    /// Filter length `s` (one less than the number of coefficients).
    pub fn len_s(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }
}

impl TryFrom<Vec<f64>> for Filter {
    type Error = EdcnnError;

    fn try_from(coeffs: Vec<f64>) -> Result<Self> {
        Filter::new(coeffs)
    }
}

/// Dense storage for the banded Toeplitz form of a convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl ToeplitzMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        self.entries[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }

    /// Transpose-free matrix-vector product; panics on a length mismatch.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "vector length must equal column count");
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .filter(|(a, _)| **a != 0.0)
                    .fold(0.0, |acc, (a, x)| acc + a * x)
            })
            .collect()
    }
}

/// Zero-padded convolution writing into `out`, which must have length `v.len() + s`.
///
/// This is the allocation-free kernel used by the network forward pass.
pub fn expansive_convolve_into(w: &[f64], v: &[f64], out: &mut [f64]) {
    let s = w.len() - 1;
    debug_assert_eq!(out.len(), v.len() + s);
    for (j, o) in out.iter_mut().enumerate() {
        let lo = j.saturating_sub(s);
        let hi = j.min(v.len() - 1);
        let mut acc = 0.0;
        for l in lo..=hi {
            acc += w[j - l] * v[l];
        }
        *o = acc;
    }
}

/// Expansive convolution `w * v`, output length `D + s`.
pub fn expansive_convolve(w: &Filter, v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return invalid("expansive convolution needs a nonempty signal");
    }
    let mut out = vec![0.0; v.len() + w.len_s()];
    expansive_convolve_into(w.coeffs(), v, &mut out);
    Ok(out)
}

/// Contracting convolution, output length `D - s`; requires `D > s`.
pub fn contracting_convolve(w: &Filter, v: &[f64]) -> Result<Vec<f64>> {
    let s = w.len_s();
    if v.len() <= s {
        return invalid(format!(
            "contracting convolution needs signal length D > s (D = {}, s = {s})",
            v.len()
        ));
    }
    let full = expansive_convolve(w, v)?;
    Ok(full[s..v.len()].to_vec())
}

/// The `(D + s) x D` matrix `T` with `T[j][l] = w_{j-l}`, so that `T v = w * v`.
pub fn toeplitz_expansive(w: &Filter, dim: usize) -> Result<ToeplitzMatrix> {
    if dim < 1 {
        return invalid("Toeplitz matrix needs D >= 1");
    }
    let s = w.len_s();
    let rows = dim + s;
    let mut entries = vec![0.0; rows * dim];
    for j in 0..rows {
        for l in j.saturating_sub(s)..=j.min(dim - 1) {
            entries[j * dim + l] = w.coeffs()[j - l];
        }
    }
    Ok(ToeplitzMatrix {
        rows,
        cols: dim,
        entries,
    })
}

/// Rows `s+1 ..= D` of [`toeplitz_expansive`], a `(D - s) x D` matrix.
pub fn toeplitz_contracting(w: &Filter, dim: usize) -> Result<ToeplitzMatrix> {
    let s = w.len_s();
    if dim <= s {
        return invalid(format!(
            "contracting Toeplitz matrix needs D > s (D = {dim}, s = {s})"
        ));
    }
    let full = toeplitz_expansive(w, dim)?;
    let rows = dim - s;
    Ok(ToeplitzMatrix {
        rows,
        cols: dim,
        entries: full.entries[s * dim..(s + rows) * dim].to_vec(),
    })
}
