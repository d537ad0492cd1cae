//! Piecewise-linear non-decreasing escape functions on positive integers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PwlError {
    #[error("breakpoint list must be non-empty and start at t = 1 (got first t = {0})")]
    FirstBreakpoint(u64),
    #[error("breakpoint times must be strictly increasing (at index {0})")]
    NonIncreasingTimes(usize),
    #[error("breakpoint values must be non-decreasing and in [0, 1] (at index {0})")]
    BadValue(usize),
}

/// A non-decreasing piecewise-linear function `f : {1, 2, ...} -> [0, 1]`
/// given by breakpoints `(t_1 = 1, f(t_1)), ..., (t_m, f(t_m))`; linear
/// between consecutive breakpoints and constant at `f(t_m)` beyond the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearMonotone {
    breakpoints: Vec<(u64, f64)>,
}

impl PiecewiseLinearMonotone {
    pub fn new(breakpoints: Vec<(u64, f64)>) -> Result<Self, PwlError> {
        match breakpoints.first() {
            None => return Err(PwlError::FirstBreakpoint(0)),
            Some(&(t, _)) if t != 1 => return Err(PwlError::FirstBreakpoint(t)),
            _ => {}
        }
        for (i, w) in breakpoints.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(PwlError::NonIncreasingTimes(i + 1));
            }
            if w[1].1 < w[0].1 {
                return Err(PwlError::BadValue(i + 1));
            }
        }
        for (i, &(_, v)) in breakpoints.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(PwlError::BadValue(i));
            }
        }
        Ok(PiecewiseLinearMonotone { breakpoints })
    }

    /// Constant function, a single breakpoint at t = 1.
    pub fn constant(value: f64) -> Result<Self, PwlError> {
        Self::new(vec![(1, value)])
    }

    pub fn breakpoints(&self) -> &[(u64, f64)] {
        &self.breakpoints
    }

    /// The breakpoint times; dual LP constraints only need these.
    pub fn times(&self) -> impl Iterator<Item = u64> + '_ {
        self.breakpoints.iter().map(|&(t, _)| t)
    }

    pub fn last_breakpoint(&self) -> u64 {
        self.breakpoints.last().unwrap().0
    }

    /// Evaluate at integer `t >= 1`: exact at breakpoints, linear in between,
    /// constant beyond the last breakpoint.
    pub fn eval(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        let pts = &self.breakpoints;
        match pts.binary_search_by_key(&t, |&(bt, _)| bt) {
            Ok(i) => pts[i].1,
            Err(0) => pts[0].1,
            Err(i) if i == pts.len() => pts[pts.len() - 1].1,
            Err(i) => {
                let (t1, v1) = pts[i - 1];
                let (t2, v2) = pts[i];
                let w = (t - t1) as f64 / (t2 - t1) as f64;
                v1 + w * (v2 - v1)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn midpoint_interpolation() {
        let f = PiecewiseLinearMonotone::new(vec![(1, 0.0), (5, 1.0)]).unwrap();
        assert_eq!(f.eval(3), 0.5);
        assert_eq!(f.eval(1), 0.0);
        assert_eq!(f.eval(5), 1.0);
    }

    #[test]
    fn constant_extension_past_last_breakpoint() {
        let f = PiecewiseLinearMonotone::new(vec![(1, 0.0), (5, 1.0)]).unwrap();
        assert_eq!(f.eval(9), 1.0);
        assert_eq!(f.eval(1_000_000), 1.0);
    }

    #[test]
    fn interpolant_through_belief_samples_is_exact() {
        let arm = crate::FeedbackArm::new(0.2, 0.3, 1.0, crate::DEFAULT_DELTA).unwrap();
        let pts: Vec<(u64, f64)> = (1..=40).map(|t| (t, arm.belief_v(t))).collect();
        let f = PiecewiseLinearMonotone::new(pts).unwrap();
        for t in 1..=40 {
            assert_eq!(f.eval(t), arm.belief_v(t));
        }
    }

    #[test]
    fn rejects_invalid_breakpoints() {
        assert!(PiecewiseLinearMonotone::new(vec![]).is_err());
        assert!(PiecewiseLinearMonotone::new(vec![(2, 0.5)]).is_err());
        assert!(PiecewiseLinearMonotone::new(vec![(1, 0.5), (1, 0.6)]).is_err());
        assert!(PiecewiseLinearMonotone::new(vec![(1, 0.5), (3, 0.4)]).is_err());
        assert!(PiecewiseLinearMonotone::new(vec![(1, 1.5)]).is_err());
    }

    proptest! {
        #[test]
        fn eval_is_non_decreasing(
            raw_times in proptest::collection::vec(1u64..60, 1..8),
            raw_vals in proptest::collection::vec(0.0f64..=1.0, 8),
        ) {
            let mut times: Vec<u64> = raw_times;
            times.push(1);
            times.sort_unstable();
            times.dedup();
            let mut vals: Vec<f64> = raw_vals[..times.len()].to_vec();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let pts: Vec<(u64, f64)> = times.into_iter().zip(vals).collect();
            let f = PiecewiseLinearMonotone::new(pts).unwrap();
            let mut prev = f.eval(1);
            for t in 2..=80u64 {
                let cur = f.eval(t);
                prop_assert!(cur >= prev - 1e-15);
                prev = cur;
            }
        }
    }
}
