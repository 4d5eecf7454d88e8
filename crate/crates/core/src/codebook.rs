//! Constant-modulus beamsteering codebooks and the joint action index.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{CMatrix, Complex};

/// `antennas x num_codewords` matrix whose columns are unit-norm beams
/// with phases quantized to `num_phases` levels.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    mat: CMatrix,
    num_phases: usize,
}

impl Codebook {
    pub fn antennas(&self) -> usize {
        self.mat.rows()
    }

    pub fn len(&self) -> usize {
        self.mat.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_phases(&self) -> usize {
        self.num_phases
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    /// Codeword `q` as a column vector.
    pub fn codeword(&self, q: usize) -> CMatrix {
        self.mat.col(q)
    }
}

/// Builds the codebook with entry `(p, q)` equal to
/// `exp(j 2pi/T * floor(p * ((q + S/2) mod S) / (S/T))) / sqrt(antennas)`.
///
/// The phase index is evaluated in exact integer arithmetic on doubled
/// quantities so that odd `S` (half-integer shifts) is handled exactly.
pub fn build_codebook(antennas: usize, num_codewords: usize, num_phases: usize) -> Result<Codebook> {
    if antennas == 0 {
        return Err(Error::Config("codebook needs at least one antenna".into()));
    }
    if num_codewords == 0 {
        return Err(Error::Config("codebook size S must be positive (S/T must be > 0)".into()));
    }
    if num_phases < 2 {
        return Err(Error::Config(format!("need at least 2 phase levels, got {num_phases}")));
    }
    let s = num_codewords as u128;
    let t = num_phases as u128;
    let amp = 1.0 / (antennas as f64).sqrt();
    let mat = CMatrix::from_fn(antennas, num_codewords, |p, q| {
        // twice (q + S/2) mod S
        let shifted2 = (2 * q as u128 + s) % (2 * s);
        let level = (p as u128 * shifted2 * t) / (2 * s);
        let phase = 2.0 * PI / num_phases as f64 * (level % t) as f64;
        Complex::from_polar(amp, phase)
    });
    Ok(Codebook { mat, num_phases })
}

/// Cartesian product of transmit and receive codebook indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActionSpace {
    pub s_t: usize,
    pub s_r: usize,
}

impl ActionSpace {
    pub fn new(s_t: usize, s_r: usize) -> Self {
        Self { s_t, s_r }
    }

    pub fn size(&self) -> usize {
        self.s_t * self.s_r
    }

    pub fn split(&self, a: usize) -> Result<(usize, usize)> {
        split_action(a, *self)
    }

    pub fn join(&self, tx: usize, rx: usize) -> Result<usize> {
        join_action(tx, rx, *self)
    }
}

/// Action index to `(precoder index, combiner index)`.
pub fn split_action(a: usize, space: ActionSpace) -> Result<(usize, usize)> {
    if a >= space.size() {
        return Err(Error::Index { index: a, size: space.size() });
    }
    Ok((a / space.s_r, a % space.s_r))
}

pub fn join_action(tx: usize, rx: usize, space: ActionSpace) -> Result<usize> {
    if tx >= space.s_t {
        return Err(Error::Index { index: tx, size: space.s_t });
    }
    if rx >= space.s_r {
        return Err(Error::Index { index: rx, size: space.s_r });
    }
    Ok(tx * space.s_r + rx)
}

/// Transmit and receive codebooks plus their joint action space.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamCodebooks {
    pub tx: Codebook,
    pub rx: Codebook,
}

impl BeamCodebooks {
    pub fn new(tx_antennas: usize, rx_antennas: usize, s_t: usize, s_r: usize, num_phases: usize) -> Result<Self> {
        Ok(Self {
            tx: build_codebook(tx_antennas, s_t, num_phases)?,
            rx: build_codebook(rx_antennas, s_r, num_phases)?,
        })
    }

    pub fn space(&self) -> ActionSpace {
        ActionSpace::new(self.tx.len(), self.rx.len())
    }

    /// `(precoder, combiner)` vectors for an action index.
    pub fn beams(&self, a: usize) -> Result<(CMatrix, CMatrix)> {
        let (u, v) = self.space().split(a)?;
        Ok((self.tx.codeword(u), self.rx.codeword(v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_unit_norm_constant_modulus() {
        for &(ant, s, t) in &[(32, 32, 4), (4, 4, 4), (8, 8, 2), (5, 7, 3), (1, 1, 4)] {
            let cb = build_codebook(ant, s, t).unwrap();
            for q in 0..s {
                assert!((cb.codeword(q).norm() - 1.0).abs() <= 1e-12);
            }
            let amp = 1.0 / (ant as f64).sqrt();
            assert!(cb.matrix().as_slice().iter().all(|z| (z.norm() - amp).abs() < 1e-12));
        }
    }

    #[test]
    fn first_row_has_zero_phase() {
        let cb = build_codebook(6, 8, 4).unwrap();
        for q in 0..8 {
            assert!((cb.matrix().get(0, q) - Complex::new(1.0 / 6f64.sqrt(), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn small_codebook_matches_formula_table() {
        // antennas = 2, S = 4, T = 4. S/T = 1, so level = p * ((q + 2) mod 4).
        // q:       0  1  2  3
        // shift:   2  3  0  1
        // p=1:     2  3  0  1  -> phases pi, 3pi/2, 0, pi/2
        let cb = build_codebook(2, 4, 4).unwrap();
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let want = [Complex::new(-a, 0.0), Complex::new(0.0, -a), Complex::new(a, 0.0), Complex::new(0.0, a)];
        for q in 0..4 {
            assert!((cb.matrix().get(0, q) - Complex::new(a, 0.0)).norm() < 1e-15);
            assert!((cb.matrix().get(1, q) - want[q]).norm() < 1e-15, "q={q}");
        }
    }

    #[test]
    fn fractional_s_over_t() {
        // S = 2, T = 4 -> S/T = 1/2: level = floor(2 p ((q+1) mod 2)).
        let cb = build_codebook(3, 2, 4).unwrap();
        let a = 1.0 / 3f64.sqrt();
        // q = 0: shift 1 -> levels 0, 2, 4 -> phases 0, pi, 2pi
        assert!((cb.matrix().get(1, 0) - Complex::new(-a, 0.0)).norm() < 1e-15);
        assert!((cb.matrix().get(2, 0) - Complex::new(a, 0.0)).norm() < 1e-12);
        // q = 1: shift 0 -> all zero phase
        assert!((0..3).all(|p| (cb.matrix().get(p, 1) - Complex::new(a, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn distinct_codewords_when_t_divides_s() {
        for &(s, t) in &[(8, 4), (16, 4), (32, 4), (8, 8), (4, 2)] {
            let cb = build_codebook(s, s, t).unwrap();
            for a in 0..s {
                for b in (a + 1)..s {
                    let g = cb.codeword(a).inner(&cb.codeword(b)).norm();
                    assert!(g < 1.0 - 1e-9, "S={s} T={t}: columns {a},{b} coincide");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_codebook(0, 4, 4).is_err());
        assert!(build_codebook(4, 0, 4).is_err());
        assert!(build_codebook(4, 4, 1).is_err());
    }

    #[test]
    fn split_join_bijection() {
        let space = ActionSpace::new(32, 4);
        assert_eq!(split_action(0, space).unwrap(), (0, 0));
        assert_eq!(split_action(127, space).unwrap(), (31, 3));
        for a in 0..space.size() {
            let (u, v) = split_action(a, space).unwrap();
            assert_eq!(join_action(u, v, space).unwrap(), a);
        }
        assert!(matches!(split_action(128, space), Err(Error::Index { index: 128, size: 128 })));
        assert!(join_action(32, 0, space).is_err());
    }
}
