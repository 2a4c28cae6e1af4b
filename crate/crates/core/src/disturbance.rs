//! Compact boxes of admissible disturbance vectors.

use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Interior samples added to the corners by [`DisturbanceBox::check_points`].
pub const DEFAULT_INTERIOR_SAMPLES: usize = 64;

/// Largest dimension for which all corners are enumerated.
pub const MAX_CORNER_DIM: usize = 16;

/// Fixed seed used for the deterministic interior samples.
const CHECK_POINT_SEED: u64 = 0x5eed_d15c;

#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceError {
    LengthMismatch { lo: usize, hi: usize },
    InvertedBound(usize),
    NonFinite(usize),
    TooManyCorners(usize),
}

impl fmt::Display for DisturbanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LengthMismatch { lo, hi } => {
                write!(f, "disturbance bounds have lengths {lo} and {hi}")
            }
            Self::InvertedBound(k) => write!(f, "disturbance coordinate {} has lo > hi", k + 1),
            Self::NonFinite(k) => write!(f, "disturbance coordinate {} is not finite", k + 1),
            Self::TooManyCorners(l) => {
                write!(f, "disturbance dimension {l} exceeds {MAX_CORNER_DIM}")
            }
        }
    }
}

impl core::error::Error for DisturbanceError {}

/// Axis-aligned box `[lo, hi]` in disturbance space. Dimension zero is allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl DisturbanceBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, DisturbanceError> {
        if lo.len() != hi.len() {
            return Err(DisturbanceError::LengthMismatch { lo: lo.len(), hi: hi.len() });
        }
        if lo.len() > MAX_CORNER_DIM {
            return Err(DisturbanceError::TooManyCorners(lo.len()));
        }
        for k in 0..lo.len() {
            if !lo[k].is_finite() || !hi[k].is_finite() {
                return Err(DisturbanceError::NonFinite(k));
            }
            if lo[k] > hi[k] {
                return Err(DisturbanceError::InvertedBound(k));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The zero-dimensional box: no disturbance.
    pub fn empty() -> Self {
        Self { lo: Vec::new(), hi: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, d: &[f64]) -> bool {
        d.len() == self.dim()
            && d.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (l, h))| *l <= *x && *x <= *h)
    }

    /// Componentwise midpoint.
    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    /// True when every coordinate is pinned (`lo == hi`).
    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    /// All `2^dim` corners, with lexicographic bit order on coordinates.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let l = self.dim();
        (0..1usize << l)
            .map(|mask| {
                (0..l).map(|k| if mask >> k & 1 == 1 { self.hi[k] } else { self.lo[k] }).collect()
            })
            .collect()
    }

    /// One uniform sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| l + rng.gen::<f64>() * (h - l))
            .collect()
    }

    /// Points used to check universally quantified statements over the box:
    /// all corners followed by `samples` deterministic interior samples.
    /// A degenerate box yields its single point.
    pub fn check_points_with(&self, samples: usize) -> Vec<Vec<f64>> {
        if self.is_degenerate() {
            return alloc::vec![self.lo.clone()];
        }
        let mut pts = self.corners();
        let mut rng = ChaCha8Rng::seed_from_u64(CHECK_POINT_SEED);
        pts.extend((0..samples).map(|_| self.sample(&mut rng)));
        pts
    }

    pub fn check_points(&self) -> Vec<Vec<f64>> {
        self.check_points_with(DEFAULT_INTERIOR_SAMPLES)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corners_of_square() {
        let b = DisturbanceBox::new(alloc::vec![0.0, -1.0], alloc::vec![1.0, 1.0]).unwrap();
        let c = b.corners();
        assert_eq!(c.len(), 4);
        assert!(c.contains(&alloc::vec![1.0, -1.0]));
        assert_eq!(b.check_points().len(), 4 + DEFAULT_INTERIOR_SAMPLES);
        assert!(b.check_points().iter().all(|d| b.contains(d)));
    }

    #[test]
    fn empty_box_has_one_point() {
        let b = DisturbanceBox::empty();
        assert_eq!(b.check_points(), alloc::vec![Vec::<f64>::new()]);
        assert!(b.contains(&[]));
    }

    #[test]
    fn rejects_inverted() {
        assert_eq!(
            DisturbanceBox::new(alloc::vec![1.0], alloc::vec![0.0]),
            Err(DisturbanceError::InvertedBound(0))
        );
    }
}
