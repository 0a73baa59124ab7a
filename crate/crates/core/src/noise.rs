//! Online process-noise estimation from a sliding window of differenced
//! utilization observations.
//!
//! For a random walk observed with fixed measurement noise, the difference
//! `z_t = y_t − y_{t−1}` carries one step of process noise. The window keeps
//! the last `T` differences per component and turns them into a per-step
//! variance (SISO) or covariance matrix (MIMO).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Mat;

/// Fraction of the Cauchy–Schwarz bound an off-diagonal covariance may reach.
const PSD_SHRINK: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffWindow {
    capacity: usize,
    prev: Option<Vec<f64>>,
    diffs: Vec<VecDeque<f64>>,
}

impl DiffWindow {
    pub fn new(components: usize, capacity: usize) -> Result<Self> {
        if components == 0 {
            return Err(Error::usage("difference window needs at least one component"));
        }
        if capacity == 0 {
            return Err(Error::usage("window size T must be at least 1"));
        }
        Ok(DiffWindow {
            capacity,
            prev: None,
            diffs: vec![VecDeque::with_capacity(capacity + 1); components],
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn components(&self) -> usize {
        self.diffs.len()
    }

    /// Number of differences currently held (same for every component).
    pub fn len(&self) -> usize {
        self.diffs[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.capacity
    }

    pub fn previous(&self) -> Option<&[f64]> {
        self.prev.as_deref()
    }

    pub fn diffs(&self, component: usize) -> impl Iterator<Item = f64> + '_ {
        self.diffs[component].iter().copied()
    }

    /// Records an observation. The very first one only seeds `y_prev`.
    pub fn push(&mut self, y: &[f64]) -> Result<()> {
        if y.len() != self.components() {
            return Err(Error::input(format!(
                "observation has {} components, window tracks {}",
                y.len(),
                self.components()
            )));
        }
        if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite observation {bad}")));
        }
        if let Some(prev) = &self.prev {
            for ((buf, &cur), &old) in self.diffs.iter_mut().zip(y).zip(prev) {
                buf.push_back(cur - old);
                if buf.len() > self.capacity {
                    buf.pop_front();
                }
            }
        }
        self.prev = Some(y.to_vec());
        Ok(())
    }

    pub fn clear(&mut self) {
        self.prev = None;
        self.diffs.iter_mut().for_each(VecDeque::clear);
    }

    fn require_full(&self) -> Result<()> {
        if self.is_full() {
            Ok(())
        } else {
            Err(Error::WarmingUp {
                have: self.len(),
                need: self.capacity,
            })
        }
    }

    /// `(1/T)·[ Σz²/T − (Σz/T)² ]` over the window of one component.
    pub fn siso_variance(&self, component: usize) -> Result<f64> {
        if component >= self.components() {
            return Err(Error::usage(format!("no component {component}")));
        }
        self.require_full()?;
        let t = self.capacity as f64;
        let buf = &self.diffs[component];
        let mean = buf.iter().sum::<f64>() / t;
        let mean_sq = buf.iter().map(|z| z * z).sum::<f64>() / t;
        // Rounding can push the one-pass form a hair below zero.
        Ok(((mean_sq - mean * mean) / t).max(0.0))
    }

    /// Windowed covariance matrix of the differences, divided by `T`, with
    /// off-diagonals clamped so the result stays positive semidefinite.
    pub fn mimo_covariance(&self) -> Result<Mat> {
        self.require_full()?;
        let n = self.components();
        let t = self.capacity as f64;
        let means: Vec<f64> = self
            .diffs
            .iter()
            .map(|b| b.iter().sum::<f64>() / t)
            .collect();
        let mut w = Mat::zeros(n, n);
        for i in 0..n {
            w[(i, i)] = self.siso_variance(i)?;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let cross: f64 = self.diffs[i]
                    .iter()
                    .zip(&self.diffs[j])
                    .map(|(a, b)| (a - means[i]) * (b - means[j]))
                    .sum();
                let bound = (w[(i, i)] * w[(j, j)]).sqrt() * PSD_SHRINK;
                let c = (cross / t / t).clamp(-bound, bound);
                w[(i, j)] = c;
                w[(j, i)] = c;
            }
        }
        Ok(w)
    }
}

/// Process covariance currently in force plus the pinned measurement covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    pub process: Mat,
    pub measurement: Mat,
    /// False while the window is still warming up and `process` is the prior.
    pub from_window: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn window_with_diffs(cols: &[&[f64]]) -> DiffWindow {
        let t = cols[0].len();
        let mut w = DiffWindow::new(cols.len(), t).unwrap();
        let mut y = vec![50.0; cols.len()];
        w.push(&y).unwrap();
        for k in 0..t {
            for (c, col) in cols.iter().enumerate() {
                y[c] += col[k];
            }
            w.push(&y).unwrap();
        }
        w
    }

    /// Independent two-pass population variance.
    fn two_pass_var(z: &[f64]) -> f64 {
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
    }

    #[test]
    fn first_push_only_seeds() {
        let mut w = DiffWindow::new(1, 5).unwrap();
        w.push(&[50.0]).unwrap();
        assert!(w.is_empty());
        assert_eq!(w.previous(), Some(&[50.0][..]));
        w.push(&[60.0]).unwrap();
        assert_eq!(w.diffs(0).collect::<Vec<_>>(), vec![10.0]);
    }

    #[test]
    fn evicts_beyond_capacity() {
        let mut w = DiffWindow::new(1, 5).unwrap();
        for k in 0..7 {
            w.push(&[(k * k) as f64]).unwrap();
        }
        // Six differences were produced: 1,3,5,7,9,11; the oldest is gone.
        assert_eq!(w.diffs(0).collect::<Vec<_>>(), vec![3.0, 5.0, 7.0, 9.0, 11.0]);
    }

    #[test]
    fn rejects_bad_observations() {
        let mut w = DiffWindow::new(2, 3).unwrap();
        assert!(matches!(w.push(&[1.0, f64::NAN]), Err(Error::Input(_))));
        assert!(matches!(w.push(&[1.0]), Err(Error::Input(_))));
        assert!(w.previous().is_none());
    }

    #[test]
    fn variance_examples() {
        let w = window_with_diffs(&[&[0.1, -0.1, 0.1, -0.1, 0.1]]);
        assert!((w.siso_variance(0).unwrap() - 0.00192).abs() < 1e-15);
        let w = window_with_diffs(&[&[2.5; 5]]);
        assert!(w.siso_variance(0).unwrap().abs() < 1e-15);
        let w = window_with_diffs(&[&[1.0, -1.0]]);
        assert_eq!(w.siso_variance(0).unwrap(), 0.5);
    }

    #[test]
    fn warm_up_is_signalled() {
        let mut w = DiffWindow::new(2, 5).unwrap();
        w.push(&[1.0, 2.0]).unwrap();
        w.push(&[2.0, 3.0]).unwrap();
        assert_eq!(w.siso_variance(0), Err(Error::WarmingUp { have: 1, need: 5 }));
        assert!(matches!(w.mimo_covariance(), Err(Error::WarmingUp { .. })));
    }

    #[test]
    fn covariance_examples() {
        let w = window_with_diffs(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]]);
        let m = w.mimo_covariance().unwrap();
        // Raw cross term 4/3, divided once more by T = 3. The pair is exactly
        // collinear so the PSD clamp trims it by one part in 1e9.
        assert!((m[(0, 1)] - 4.0 / 9.0).abs() < 1e-9);
        assert_eq!(m[(0, 1)], m[(1, 0)]);

        let w = window_with_diffs(&[&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]]);
        assert_eq!(w.mimo_covariance().unwrap()[(0, 1)], 0.0);

        let z = [0.3, -1.2, 2.0, 0.4];
        let w = window_with_diffs(&[&z, &z]);
        let m = w.mimo_covariance().unwrap();
        let diag = two_pass_var(&z) / 4.0;
        assert!((m[(0, 0)] - diag).abs() < 1e-12);
        assert!((m[(0, 1)] - diag).abs() < 1e-9 * diag.max(1.0));
        assert!(m[(0, 1)] <= m[(0, 0)]);
    }

    fn diff_columns(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..12).prop_flat_map(move |t| {
            prop::collection::vec(prop::collection::vec(-20.0f64..20.0, t), n)
        })
    }

    proptest! {
        #[test]
        fn siso_matches_two_pass(cols in diff_columns(1)) {
            let w = window_with_diffs(&[&cols[0]]);
            let t = cols[0].len() as f64;
            let expected = two_pass_var(&cols[0]) / t;
            prop_assert!((w.siso_variance(0).unwrap() - expected).abs() <= 1e-12);
        }

        #[test]
        fn mimo_is_symmetric_psd(cols in diff_columns(3)) {
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            let m = window_with_diffs(&refs).mimo_covariance().unwrap();
            prop_assert_eq!(m.clone(), m.transpose());
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!(m[(i, j)].powi(2) <= m[(i, i)] * m[(j, j)] + 1e-12);
                }
            }
        }

        #[test]
        fn scale_equivariance(cols in diff_columns(2), s in 0.1f64..10.0) {
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            let base = window_with_diffs(&refs).mimo_covariance().unwrap();
            let scaled_cols: Vec<Vec<f64>> =
                cols.iter().map(|c| c.iter().map(|v| v * s).collect()).collect();
            let refs: Vec<&[f64]> = scaled_cols.iter().map(Vec::as_slice).collect();
            let scaled = window_with_diffs(&refs).mimo_covariance().unwrap();
            for (a, b) in base.as_slice().iter().zip(scaled.as_slice()) {
                prop_assert!((a * s * s - b).abs() <= 1e-9 * (1.0 + b.abs()));
            }
        }
    }
}
