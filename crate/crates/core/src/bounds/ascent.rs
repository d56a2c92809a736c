//! Building blocks for projected coordinate ascent over products of
//! probability simplices and linear polytopes.

use crate::rng::SplitMix64;

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const GOLDEN_ITERS: usize = 32;

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Maximizes `f` on `[lo, hi]` by golden-section search, also checking both
/// endpoints and `s = 0`. Returns `(s, f(s))`; `s = 0` wins ties so a line
/// search never moves to a worse or equal point.
pub fn golden_max(lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let f0 = f(0.0);
    let mut best = (0.0, f0);
    let consider = |s: f64, v: f64, best: &mut (f64, f64)| {
        if v > best.1 {
            *best = (s, v);
        }
    };
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        return best;
    }
    let flo = f(lo);
    consider(lo, flo, &mut best);
    let fhi = f(hi);
    consider(hi, fhi, &mut best);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..GOLDEN_ITERS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    consider(c, fc, &mut best);
    consider(d, fd, &mut best);
    best
}

/// Largest interval `[lo, hi]` (containing 0) with `x + s*d >= 0` and no
/// coordinate moving by more than 1. Directions unbounded either way
/// (e.g. `d = 0`) give `(0, 0)`.
pub fn nonnegative_interval(x: &[f64], d: &[f64]) -> (f64, f64) {
    let reach = 1.0 / d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut lo = -reach;
    let mut hi = reach;
    for (&xi, &di) in x.iter().zip(d) {
        if di == 0.0 {
            continue;
        }
        let s = -xi.max(0.0) / di;
        if di > 0.0 {
            lo = lo.max(s);
        } else {
            hi = hi.min(s);
        }
    }
    if !lo.is_finite() || !hi.is_finite() || reach > 1e12 {
        return (0.0, 0.0);
    }
    (lo.min(0.0), hi.max(0.0))
}

/// Orthonormal basis of the span of `rows` (modified Gram-Schmidt).
pub fn orthonormal_rows(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for r in rows {
        let mut v = r.clone();
        for u in &basis {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(vi, ui)| *vi -= dot * ui);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-10 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

/// Removes from `v` its components along an orthonormal `basis`.
pub fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for u in basis {
        let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
        v.iter_mut().zip(u).for_each(|(vi, ui)| *vi -= dot * ui);
    }
}

/// Standard normal via Box-Muller.
pub fn gaussian(rng: &mut SplitMix64) -> f64 {
    let u1 = 1.0 - rng.next_f64();
    let u2 = rng.next_f64();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn gaussian_vec(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
    (0..n).map(|_| gaussian(rng)).collect()
}

/// Random zero-sum direction of unit length.
pub fn zero_sum_direction(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
    let mut d = gaussian_vec(rng, n);
    let mean = d.iter().sum::<f64>() / n as f64;
    d.iter_mut().for_each(|x| *x -= mean);
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        d.iter_mut().for_each(|x| *x /= norm);
    }
    d
}

/// Improves a simplex block in place. Tries a random direction with
/// projection, then a move towards a random vertex. `eval` scores a
/// candidate block. Returns the (possibly unchanged) best score.
pub fn improve_simplex_block(
    block: &mut [f64],
    current: f64,
    rng: &mut SplitMix64,
    mut eval: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let n = block.len();
    if n < 2 {
        return current;
    }
    let mut best = current;

    let d = zero_sum_direction(rng, n);
    let base = block.to_vec();
    let at = |s: f64| {
        project_simplex(
            &base
                .iter()
                .zip(&d)
                .map(|(b, di)| b + s * di)
                .collect::<Vec<_>>(),
        )
    };
    let (s, v) = golden_max(-1.0, 1.0, |s| eval(&at(s)));
    if s != 0.0 && v > best {
        block.copy_from_slice(&at(s));
        best = v;
    }

    let vertex = rng.below(n);
    let base = block.to_vec();
    let d: Vec<f64> = base
        .iter()
        .enumerate()
        .map(|(i, &b)| if i == vertex { 1.0 - b } else { -b })
        .collect();
    let (lo, hi) = nonnegative_interval(&base, &d);
    let at = |s: f64| -> Vec<f64> {
        let mut v: Vec<f64> = base
            .iter()
            .zip(&d)
            .map(|(b, di)| (b + s * di).max(0.0))
            .collect();
        let total: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= total);
        v
    };
    let (s, v) = golden_max(lo, hi.min(1.0), |s| eval(&at(s)));
    if s != 0.0 && v > best {
        block.copy_from_slice(&at(s));
        best = v;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn projection_examples() {
        assert_eq!(project_simplex(&[0.2, 0.3, 0.5]), vec![0.2, 0.3, 0.5]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        assert!(p.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(project_simplex(&[-1.0, 3.0, 0.0]), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (s, v) = golden_max(-2.0, 2.0, |s| -(s - 0.7) * (s - 0.7) + 1.0);
        assert!((s - 0.7).abs() < 1e-5);
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn golden_prefers_endpoints_for_convex() {
        let (s, _) = golden_max(-1.0, 2.0, |s| s * s);
        assert_eq!(s, 2.0);
        let (s, v) = golden_max(-1.0, 1.0, |_| 5.0);
        assert_eq!((s, v), (0.0, 5.0));
    }

    #[test]
    fn interval_respects_bounds() {
        let (lo, hi) = nonnegative_interval(&[0.5, 0.25], &[1.0, -1.0]);
        assert_eq!((lo, hi), (-0.5, 0.25));
        let (lo, hi) = nonnegative_interval(&[0.0, 0.25], &[-1.0, 1.0]);
        assert_eq!((lo, hi), (-0.25, 0.0));
        assert_eq!(nonnegative_interval(&[1.0, 0.0], &[0.0, 0.0]), (0.0, 0.0));
        assert_eq!(
            nonnegative_interval(&[0.5, 0.5], &[0.25, -0.25]),
            (-2.0, 2.0)
        );
    }

    #[test]
    fn gram_schmidt_drops_dependent_rows() {
        let rows = vec![
            vec![1.0, 1.0, 0.0],
            vec![2.0, 2.0, 0.0],
            vec![0.0, 1.0, 1.0],
        ];
        let basis = orthonormal_rows(&rows);
        assert_eq!(basis.len(), 2);
        let mut v = vec![1.0, 1.0, 0.0];
        project_out(&mut v, &basis);
        assert!(v.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn simplex_block_moves_uphill() {
        let mut rng = SplitMix64::new(5);
        let mut block = vec![1.0 / 3.0; 3];
        let score = |b: &[f64]| b[2];
        let mut best = score(&block);
        for _ in 0..20 {
            best = improve_simplex_block(&mut block, best, &mut rng, score);
        }
        assert!(best > 0.999, "{block:?}");
        assert!((block.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn projection_lands_on_simplex(v in prop::collection::vec(-3.0f64..3.0, 1..10)) {
            let p = project_simplex(&v);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn projection_is_idempotent(v in prop::collection::vec(-3.0f64..3.0, 1..10)) {
            let p = project_simplex(&v);
            let q = project_simplex(&p);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
