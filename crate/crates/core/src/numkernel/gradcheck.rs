use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;

use crate::{Error, Result};

/// Magnitudes below this are treated as this when forming relative errors,
/// so that a pair of near-zero gradients compares by absolute difference.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
    (analytic - numeric).abs() / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdProbe {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FdReport {
    pub probes: Vec<FdProbe>,
}

impl FdReport {
    pub fn max_relative_error(&self) -> f64 {
        self.probes
            .iter()
            .map(|p| p.relative_error)
            .fold(0.0, f64::max)
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }
}

/// Compares `analytic` against central differences of `loss_fn` at `theta`.
///
/// `probe_count` scalar coordinates are drawn without replacement from
/// `candidates` (all of them when there are fewer). `loss_fn` is evaluated
/// twice at `theta` first; differing values mean it is not deterministic.
pub fn finite_difference_check<F, R>(
    mut loss_fn: F,
    theta: &[f64],
    analytic: &[f64],
    candidates: &[usize],
    probe_count: usize,
    h: f64,
    rng: &mut R,
) -> Result<FdReport>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    if !(h > 0.0) {
        return Err(Error::Usage("finite-difference step must be positive".into()));
    }
    if theta.len() != analytic.len() {
        return Err(Error::dim(
            "finite_difference_check",
            (theta.len(), 1),
            (analytic.len(), 1),
        ));
    }
    if candidates.is_empty() || probe_count == 0 {
        return Ok(FdReport::default());
    }
    if let Some(&bad) = candidates.iter().find(|&&i| i >= theta.len()) {
        return Err(Error::Usage(alloc::format!(
            "probe index {bad} out of range for {} parameters",
            theta.len()
        )));
    }
    let first = loss_fn(theta);
    let second = loss_fn(theta);
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }

    let chosen: Vec<usize> = if probe_count >= candidates.len() {
        candidates.to_vec()
    } else {
        sample(rng, candidates.len(), probe_count)
            .into_iter()
            .map(|k| candidates[k])
            .collect()
    };

    let mut work = theta.to_vec();
    let mut probes = Vec::with_capacity(chosen.len());
    for index in chosen {
        let orig = work[index];
        work[index] = orig + h;
        let plus = loss_fn(&work);
        work[index] = orig - h;
        let minus = loss_fn(&work);
        work[index] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        probes.push(FdProbe {
            index,
            analytic: analytic[index],
            numeric,
            relative_error: relative_error(analytic[index], numeric),
        });
    }
    Ok(FdReport { probes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use core::cell::Cell;

    #[test]
    fn quadratic_is_exact() {
        let mut r = rng::stream(1, "test");
        let report = finite_difference_check(
            |t: &[f64]| 0.5 * t[0] * t[0],
            &[3.0],
            &[3.0],
            &[0],
            1,
            1e-4,
            &mut r,
        )
        .unwrap();
        assert_eq!(report.probes.len(), 1);
        assert!((report.probes[0].numeric - 3.0).abs() < 1e-8);
        assert!(report.max_relative_error() < 1e-8);
    }

    #[test]
    fn empty_probe_set() {
        let mut r = rng::stream(1, "test");
        let report =
            finite_difference_check(|_: &[f64]| 1.0, &[1.0], &[0.0], &[], 5, 1e-4, &mut r).unwrap();
        assert!(report.is_empty());
        assert_eq!(report.max_relative_error(), 0.0);
    }

    #[test]
    fn detects_nondeterminism() {
        let mut r = rng::stream(1, "test");
        let counter = Cell::new(0.0);
        let err = finite_difference_check(
            |t: &[f64]| {
                counter.set(counter.get() + 1.0);
                t[0] + counter.get()
            },
            &[0.0],
            &[1.0],
            &[0],
            1,
            1e-4,
            &mut r,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonDeterministic { .. }));
    }

    #[test]
    fn flags_a_wrong_gradient() {
        let mut r = rng::stream(1, "test");
        let report = finite_difference_check(
            |t: &[f64]| t[0] * t[0] + t[1],
            &[2.0, 0.0],
            &[4.0, 2.0],
            &[0, 1],
            2,
            1e-4,
            &mut r,
        )
        .unwrap();
        assert!(report.max_relative_error() > 0.4);
    }

    #[test]
    fn rejects_bad_step() {
        let mut r = rng::stream(1, "test");
        assert!(finite_difference_check(|_: &[f64]| 0.0, &[0.0], &[0.0], &[0], 1, 0.0, &mut r).is_err());
    }
}
