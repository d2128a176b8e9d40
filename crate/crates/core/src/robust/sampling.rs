use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::BoxUncertaintySet;

/// Chord endpoints are located to this absolute tolerance.
pub const CHORD_TOL: f64 = 1e-10;

const MAX_EXPAND: u32 = 80;
const MAX_REDRAWS: usize = 1000;

/// `count` i.i.d. uniform draws from a box, one per row.
pub fn sample_uniform_box(bx: &BoxUncertaintySet, count: usize, seed: u64) -> Result<DMatrix<f64>> {
    if count == 0 {
        return Err(Error::InvalidParameter {
            name: "count",
            reason: "must be at least 1".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = bx.dim();
    let mut out = DMatrix::zeros(count, m);
    for i in 0..count {
        for j in 0..m {
            let (l, u) = (bx.lower()[j], bx.upper()[j]);
            out[(i, j)] = l + (u - l) * rng.random::<f64>();
        }
    }
    Ok(out)
}

/// Hit-and-run walk over the convex body described by `membership`.
///
/// The body must be bounded and `start` must be a member. After `burn_in`
/// steps, every `thin`-th position is kept until `count` rows are collected.
pub fn hit_and_run<F>(
    membership: F,
    start: &[f64],
    count: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> bool,
{
    if !membership(start) {
        return Err(Error::StartNotMember);
    }
    if count == 0 || thin == 0 {
        return Err(Error::InvalidParameter {
            name: "count/thin",
            reason: "must be at least 1".into(),
        });
    }
    let m = start.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = start.to_vec();
    let mut dir = vec![0.0; m];
    let mut probe = vec![0.0; m];
    let mut out = DMatrix::zeros(count, m);
    let mut kept = 0;
    let mut step = 0usize;
    while kept < count {
        for _ in 0..MAX_REDRAWS {
            for v in dir.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            dir.iter_mut().for_each(|v| *v /= norm);
            let fwd = chord_end(&membership, &x, &dir, 1.0, &mut probe)?;
            let back = chord_end(&membership, &x, &dir, -1.0, &mut probe)?;
            if fwd + back <= CHORD_TOL {
                continue;
            }
            let t = -back + (fwd + back) * rng.random::<f64>();
            for (xi, di) in x.iter_mut().zip(&dir) {
                *xi += t * di;
            }
            break;
        }
        step += 1;
        if step > burn_in && (step - burn_in) % thin == 0 {
            out.row_mut(kept).copy_from_slice(&x);
            kept += 1;
        }
    }
    Ok(out)
}

/// Distance from `x` to the boundary along `sign·dir`.
fn chord_end<F>(membership: &F, x: &[f64], dir: &[f64], sign: f64, probe: &mut [f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> bool,
{
    let mut inside = |t: f64| {
        for ((p, xi), di) in probe.iter_mut().zip(x).zip(dir) {
            *p = xi + sign * t * di;
        }
        membership(probe)
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut expansions = 0;
    while inside(hi) {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > MAX_EXPAND {
            return Err(Error::Unsupported("hit-and-run on an unbounded set"));
        }
    }
    while hi - lo > CHORD_TOL {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_box_repeats_point() {
        let b = BoxUncertaintySet::point(vec![1.5, -2.0]).unwrap();
        let s = sample_uniform_box(&b, 10, 3).unwrap();
        assert!(s.row_iter().all(|r| r[0] == 1.5 && r[1] == -2.0));
    }

    #[test]
    fn rejects_outside_start() {
        let r = hit_and_run(|p: &[f64]| p[0].abs() <= 1.0, &[2.0], 5, 0, 1, 0);
        assert_eq!(r.unwrap_err(), Error::StartNotMember);
    }

    #[test]
    fn flat_direction_redrawn() {
        // A segment embedded in 2d: every chord off the axis is degenerate.
        let member = |p: &[f64]| p[1] == 0.0 && p[0].abs() <= 1.0;
        let s = hit_and_run(member, &[0.0, 0.0], 5, 0, 1, 9).unwrap();
        assert!(s.row_iter().all(|r| r[1] == 0.0 && r[0].abs() <= 1.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let member = |p: &[f64]| p.iter().all(|v| (0.0..=1.0).contains(v));
        let a = hit_and_run(member, &[0.5, 0.5], 50, 10, 2, 4).unwrap();
        let b = hit_and_run(member, &[0.5, 0.5], 50, 10, 2, 4).unwrap();
        assert_eq!(a, b);
    }
}
