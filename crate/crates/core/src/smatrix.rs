//! Generalized scattering matrix over M modes per port.

use faer::{c64, Mat, MatRef};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// 2M x 2M scattering matrix in two-port block form: it maps the incoming
/// coefficient vector `a = [a_I; a_II]` to the outgoing `b = [b_I; b_II]`.
/// Indices 0..M are port-I modes, M..2M port-II modes.
#[derive(Debug, Clone)]
pub struct ScatteringMatrix {
    modes: usize,
    s: Mat<c64>,
}

impl ScatteringMatrix {
    pub fn from_mat(modes: usize, s: Mat<c64>) -> Result<Self> {
        if modes == 0 {
            return Err(Error::invalid("scattering matrix needs at least one mode"));
        }
        if s.nrows() != 2 * modes || s.ncols() != 2 * modes {
            return Err(Error::invalid(format!(
                "scattering matrix must be {0}x{0}, got {1}x{2}",
                2 * modes,
                s.nrows(),
                s.ncols()
            )));
        }
        for j in 0..s.ncols() {
            for i in 0..s.nrows() {
                let v = s[(i, j)];
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::invalid(format!(
                        "non-finite scattering entry at ({i}, {j}): {v}"
                    )));
                }
            }
        }
        Ok(ScatteringMatrix { modes, s })
    }

    /// Build a `2M x 2M` matrix entry by entry.
    pub fn from_fn(modes: usize, f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        Self::from_mat(modes, Mat::from_fn(2 * modes, 2 * modes, f))
    }

    /// Through-connection of length zero: `S11 = S22 = 0`, `S12 = S21 = I`.
    pub fn identity_through(modes: usize) -> Self {
        let n = 2 * modes;
        let mut s = Mat::<c64>::zeros(n, n);
        for m in 0..modes {
            s[(m, modes + m)] = c64::new(1.0, 0.0);
            s[(modes + m, m)] = c64::new(1.0, 0.0);
        }
        ScatteringMatrix { modes, s }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Full matrix dimension `2M`.
    pub fn dim(&self) -> usize {
        2 * self.modes
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.s[(i, j)]
    }

    pub fn as_mat(&self) -> MatRef<'_, c64> {
        self.s.as_ref()
    }

    pub fn s11(&self) -> MatRef<'_, c64> {
        self.s.as_ref().submatrix(0, 0, self.modes, self.modes)
    }

    pub fn s12(&self) -> MatRef<'_, c64> {
        self.s
            .as_ref()
            .submatrix(0, self.modes, self.modes, self.modes)
    }

    pub fn s21(&self) -> MatRef<'_, c64> {
        self.s
            .as_ref()
            .submatrix(self.modes, 0, self.modes, self.modes)
    }

    pub fn s22(&self) -> MatRef<'_, c64> {
        self.s
            .as_ref()
            .submatrix(self.modes, self.modes, self.modes, self.modes)
    }

    /// Re-express the port-II amplitudes in the unflipped (port-I) frame.
    ///
    /// The port-II transverse coordinate runs opposite to port I's, so mode
    /// m picks up `(-1)^{m+1}` under `x -> a - x`; flipping the even-mode
    /// port-II rows and columns lets uniform guide sections cascade with a
    /// plain `e^{-gamma l}` diagonal.
    pub(crate) fn normalize_port_two_frame(&mut self) {
        let m = self.modes;
        let flip = |i: usize| i >= m && (i - m + 1).is_multiple_of(2);
        for j in 0..2 * m {
            for i in 0..2 * m {
                if flip(i) != flip(j) {
                    self.s[(i, j)] = -self.s[(i, j)];
                }
            }
        }
    }

    /// The 2P x 2P scattering matrix restricted to the first `propagating`
    /// modes of each port (the power-carrying sub-block).
    pub fn propagating_submatrix(&self, propagating: usize) -> Result<Mat<c64>> {
        let p = propagating;
        if p == 0 || p > self.modes {
            return Err(Error::invalid(format!(
                "propagating mode count {p} out of range 1..={}",
                self.modes
            )));
        }
        let m = self.modes;
        Ok(Mat::from_fn(2 * p, 2 * p, |i, j| {
            let si = if i < p { i } else { m + i - p };
            let sj = if j < p { j } else { m + j - p };
            self.s[(si, sj)]
        }))
    }

    /// Largest singular value of the propagating sub-block; at most 1 (plus
    /// numerical slack) for a passive structure.
    pub fn propagating_max_singular_value(&self, propagating: usize) -> Result<f64> {
        let block = self.propagating_submatrix(propagating)?;
        let sv = block
            .singular_values()
            .map_err(|e| Error::invalid(format!("singular value computation failed: {e:?}")))?;
        Ok(sv.first().copied().unwrap_or(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_through_blocks() {
        let s = ScatteringMatrix::identity_through(3);
        assert_eq!(s.modes(), 3);
        assert_eq!(s.dim(), 6);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(s.s12()[(i, j)].re, expect);
                assert_eq!(s.s21()[(i, j)].re, expect);
                assert_eq!(s.s11()[(i, j)].re, 0.0);
                assert_eq!(s.s22()[(i, j)].re, 0.0);
            }
        }
    }

    #[test]
    fn rejects_bad_shapes_and_nonfinite_entries() {
        let m = Mat::<c64>::zeros(4, 3);
        assert!(ScatteringMatrix::from_mat(2, m).is_err());

        let mut m = Mat::<c64>::zeros(4, 4);
        m[(1, 2)] = c64::new(f64::NAN, 0.0);
        assert!(ScatteringMatrix::from_mat(2, m).is_err());
    }

    #[test]
    fn propagating_submatrix_picks_port_corners() {
        // Fill with recognizable entries: s[i][j] = i + 10j.
        let n = 6;
        let mat = Mat::from_fn(n, n, |i, j| c64::new(i as f64, 10.0 * j as f64));
        let s = ScatteringMatrix::from_mat(3, mat).unwrap();
        let p = s.propagating_submatrix(2).unwrap();
        assert_eq!(p.nrows(), 4);
        // Row 2 of the sub-block is global row 3 (first port-II mode).
        assert_eq!(p[(2, 0)].re, 3.0);
        // Column 2 of the sub-block is global column 3.
        assert_eq!(p[(0, 2)].im, 30.0);
        assert!(s.propagating_submatrix(0).is_err());
        assert!(s.propagating_submatrix(4).is_err());
    }

    #[test]
    fn identity_through_is_unitary() {
        let s = ScatteringMatrix::identity_through(4);
        let top = s.propagating_max_singular_value(4).unwrap();
        assert!((top - 1.0).abs() < 1e-14);
    }
}
