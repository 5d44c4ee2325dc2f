//! Rotary position embedding.
//!
//! Dimensions are rotated in interleaved pairs `(2m, 2m + 1)` by the angle
//! `position * base^(-2m / d)`. The rotation matrices satisfy
//! `R_i^T R_j = R_{j - i}`, so a dot product of a rotated query and a rotated
//! key depends only on the offset between their positions.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

pub const ROPE_BASE: f64 = 10_000.0;

/// Per-pair angular frequencies for dimension `dim`.
pub fn frequencies(dim: usize) -> Result<Vec<f64>> {
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::Config(format!(
            "rotary embedding needs an even, nonzero dimension; got {dim}"
        )));
    }
    Ok((0..dim / 2)
        .map(|m| ROPE_BASE.powf(-2.0 * m as f64 / dim as f64))
        .collect())
}

/// `R_position v`.
pub fn rope_rotate(v: ArrayView1<'_, f64>, position: usize) -> Result<Array1<f64>> {
    let freqs = frequencies(v.len())?;
    let mut out = v.to_owned();
    rotate_in_place(out.as_slice_mut().expect("owned is contiguous"), &freqs, position as f64);
    Ok(out)
}

pub(crate) fn rotate_in_place(v: &mut [f64], freqs: &[f64], position: f64) {
    for (m, &f) in freqs.iter().enumerate() {
        let (sin, cos) = (position * f).sin_cos();
        let (a, b) = (v[2 * m], v[2 * m + 1]);
        v[2 * m] = a * cos - b * sin;
        v[2 * m + 1] = a * sin + b * cos;
    }
}

/// Rotates row `i` by position `i + offset`. A negative `sign` applies the
/// inverse rotation, which is the transpose.
pub(crate) fn rotate_rows(m: &Array2<f64>, offset: f64, sign: f64) -> Result<Array2<f64>> {
    let freqs = frequencies(m.ncols())?;
    let mut out = m.to_owned();
    for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let pos = sign * (i as f64 + offset);
        let slice = row.as_slice_mut().expect("standard layout rows");
        rotate_in_place(slice, &freqs, pos);
    }
    Ok(out)
}
