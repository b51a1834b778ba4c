//! Finite windows of point sets and the discreteness / density classifiers.
//!
//! Every verdict is a claim about the points inside the closed ball
//! `B(0, window_radius)`; nothing is asserted about the complement.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::exact::Real;
use crate::fit::{geometric_grid, power_fit};

/// Default exponent cap for the p-discreteness search.
pub const DEFAULT_H_MAX: f64 = 16.0;

/// Factor by which pairs far from the origin may undercut the separation
/// measured on the innermost pairs before a larger exponent is required.
pub const ANCHOR_SLACK: f64 = 16.0;

const H_GRID: [f64; 8] = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub dimension: usize,
    pub window_radius: f64,
    pub points: Vec<Vec<Real>>,
}

impl PointSet {
    /// Validates the invariants and stores the points in lexicographic order.
    pub fn new(dimension: usize, window_radius: f64, mut points: Vec<Vec<Real>>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidPointSet("dimension must be positive".into()));
        }
        if !(window_radius > 0.0 && window_radius.is_finite()) {
            return Err(Error::InvalidPointSet(format!(
                "window radius must be positive, got {window_radius}"
            )));
        }
        for p in &points {
            if p.len() != dimension {
                return Err(Error::InvalidPointSet(format!(
                    "point of dimension {} in a {dimension}-dimensional set",
                    p.len()
                )));
            }
            let norm = p.iter().map(|c| c.to_f64().powi(2)).sum::<f64>().sqrt();
            if norm > window_radius * (1.0 + 1e-12) {
                return Err(Error::InvalidPointSet(format!(
                    "point at distance {norm} outside window radius {window_radius}"
                )));
            }
        }
        points.sort_by(|a, b| lex_cmp(a, b));
        for w in points.windows(2) {
            if lex_cmp(&w[0], &w[1]) == Ordering::Equal {
                return Err(Error::InvalidPointSet(format!(
                    "duplicate point {:?}",
                    w[0].iter().map(|c| c.to_string()).collect::<Vec<_>>()
                )));
            }
        }
        Ok(Self {
            dimension,
            window_radius,
            points,
        })
    }

    /// One-dimensional set from scalar coordinates.
    pub fn line<I: IntoIterator<Item = Real>>(window_radius: f64, xs: I) -> Result<Self> {
        Self::new(1, window_radius, xs.into_iter().map(|x| vec![x]).collect())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: PointSet = serde_json::from_str(s)?;
        Self::new(raw.dimension, raw.window_radius, raw.points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn norm(&self, i: usize) -> f64 {
        self.points[i]
            .iter()
            .map(|c| c.to_f64().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        if self.dimension == 1 {
            return self.points[i][0].distance(&self.points[j][0]);
        }
        self.points[i]
            .iter()
            .zip(&self.points[j])
            .map(|(a, b)| a.distance(b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Pairs that can bind the separation inequalities, as `(gap, scale)` with
    /// `scale = max{1, |x|, |x'|}`. On the line only consecutive points matter;
    /// in higher dimension all pairs are returned.
    pub fn binding_pairs(&self) -> Vec<(f64, f64)> {
        let n = self.len();
        let mut out = Vec::new();
        if self.dimension == 1 {
            for i in 1..n {
                out.push(self.pair(i - 1, i));
            }
        } else {
            for i in 0..n {
                for j in i + 1..n {
                    out.push(self.pair(i, j));
                }
            }
        }
        out
    }

    /// Every distinct pair, as `(gap, scale)`.
    pub fn all_pairs(&self) -> Vec<(f64, f64)> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.pair(i, j));
            }
        }
        out
    }

    fn pair(&self, i: usize, j: usize) -> (f64, f64) {
        (self.distance(i, j), self.norm(i).max(self.norm(j)).max(1.0))
    }
}

fn lex_cmp(a: &[Real], b: &[Real]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.cmp_value(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Minimum pairwise distance `eta(A)`.
pub fn separating_constant(a: &PointSet) -> Result<f64> {
    if a.len() < 2 {
        return Err(Error::TooFewPoints(a.len()));
    }
    Ok(a.binding_pairs()
        .into_iter()
        .map(|(g, _)| g)
        .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PDiscreteFit {
    pub c: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PDiscreteOutcome {
    pub fit: Option<PDiscreteFit>,
    pub h_max: f64,
    pub diagnostic: String,
}

/// Largest `ln c` such that every pair satisfies `gap >= c * scale^-h`.
fn log_c_max(pairs: &[(f64, f64)], h: f64) -> f64 {
    pairs
        .iter()
        .map(|&(g, s)| g.ln() + h * s.ln())
        .fold(f64::INFINITY, f64::min)
}

/// Searches the smallest exponent `h <= h_max` whose best constant `c(h)`
/// stays within [`ANCHOR_SLACK`] of the constant the innermost pairs allow.
///
/// On a finite window some `(c, h)` always exists, so the search anchors `c`
/// on the core pairs (scale at most twice the smallest scale) and asks
/// whether the outer pairs decay at most polynomially relative to it.
pub fn fit_p_discreteness(a: &PointSet, h_max: f64) -> Result<PDiscreteOutcome> {
    if a.len() < 2 {
        return Err(Error::TooFewPoints(a.len()));
    }
    let pairs = a.binding_pairs();
    let s_min = pairs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let core: Vec<(f64, f64)> = pairs
        .iter()
        .copied()
        .filter(|p| p.1 <= 2.0 * s_min)
        .collect();
    let slack = ANCHOR_SLACK.ln();
    let feasible = |h: f64| log_c_max(&pairs, h) >= log_c_max(&core, h) - slack;

    let mut grid: Vec<f64> = H_GRID.iter().copied().filter(|&h| h < h_max).collect();
    grid.push(h_max);
    let mut prev: Option<f64> = None;
    let mut found = None;
    for &h in &grid {
        if feasible(h) {
            found = Some(h);
            break;
        }
        prev = Some(h);
    }
    let Some(mut hi) = found else {
        return Ok(PDiscreteOutcome {
            fit: None,
            h_max,
            diagnostic: format!("no polynomial separation up to h_max = {h_max}"),
        });
    };
    if let Some(mut lo) = prev {
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let h = hi;
    let c = log_c_max(&pairs, h).exp();
    // re-check the inequality on every pair of the window
    let check = if a.len() <= 2000 { a.all_pairs() } else { pairs };
    let ok = check
        .iter()
        .all(|&(g, s)| g >= c * s.powf(-h) * (1.0 - 1e-12));
    if !ok || !(c > 0.0) {
        return Ok(PDiscreteOutcome {
            fit: None,
            h_max,
            diagnostic: format!("fitted constant failed the re-check at h = {h}"),
        });
    }
    Ok(PDiscreteOutcome {
        fit: Some(PDiscreteFit { c, h }),
        h_max,
        diagnostic: "ok".into(),
    })
}

/// Covering radius of the centres `|x| <= window - r` by the points, on the line.
fn covering_radius_1d(xs: &[f64], window: f64, r: f64) -> f64 {
    let lo = -(window - r);
    let hi = window - r;
    if lo > hi {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    // ends of the centre region
    for &c in &[lo, hi] {
        let d = xs
            .iter()
            .map(|x| (x - c).abs())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
    }
    for w in xs.windows(2) {
        let (a, b) = (w[0], w[1]);
        // farthest centre inside [a,b] ∩ [lo,hi] from {a,b}
        let mid = 0.5 * (a + b);
        let c = mid.clamp(lo, hi);
        if c >= a && c <= b {
            worst = worst.max((c - a).min(b - c));
        }
    }
    worst
}

fn covering_radius_sampled(a: &PointSet, r: f64, step: f64) -> f64 {
    let d = a.dimension;
    let reach = a.window_radius - r;
    if reach < 0.0 {
        return 0.0;
    }
    let k = (reach / step).floor() as i64;
    let mut worst: f64 = 0.0;
    let mut idx = vec![-k; d];
    loop {
        let c: Vec<f64> = idx.iter().map(|&i| i as f64 * step).collect();
        if c.iter().map(|v| v * v).sum::<f64>().sqrt() <= reach {
            let near = a
                .points
                .iter()
                .map(|p| {
                    p.iter()
                        .zip(&c)
                        .map(|(x, y)| (x.to_f64() - y).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(near);
        }
        let mut j = 0;
        loop {
            if j == d {
                return worst + 0.5 * step * (d as f64).sqrt();
            }
            idx[j] += 1;
            if idx[j] <= k {
                break;
            }
            idx[j] = -k;
            j += 1;
        }
    }
}

/// Grid step used by [`relative_density_radius`]: a power of two about `window / 4096`.
pub fn density_grid_step(window: f64) -> f64 {
    2f64.powi(window.log2().floor() as i32 - 12)
}

/// Smallest grid radius `R` such that every closed ball `B(x, R)` with
/// `|x| <= window - R` meets the set; `None` when no `R <= window / 4` works.
pub fn relative_density_radius(a: &PointSet) -> Result<Option<f64>> {
    if a.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let w = a.window_radius;
    let step = density_grid_step(w);
    let max_k = ((w / 4.0) / step).floor() as i64;
    let xs: Vec<f64> = if a.dimension == 1 {
        a.points.iter().map(|p| p[0].to_f64()).collect()
    } else {
        Vec::new()
    };
    let covered = |r: f64| -> bool {
        if a.dimension == 1 {
            covering_radius_1d(&xs, w, r) <= r
        } else {
            covering_radius_sampled(a, r, (r / 4.0).max(step)) <= r
        }
    };
    if max_k < 1 || !covered(max_k as f64 * step) {
        return Ok(None);
    }
    // covering radius shrinks as R grows, so the predicate is monotone
    let (mut lo, mut hi) = (0i64, max_k);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if covered(mid as f64 * step) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi as f64 * step))
}

/// `max_x #(A ∩ B(x, 1))` over the window.
pub fn bounded_density_sup(a: &PointSet) -> usize {
    let n = a.len();
    if n == 0 {
        return 0;
    }
    if a.dimension == 1 {
        // a closed unit ball is an interval of length 2; an optimal one starts at a point
        let two = Real::Exact(crate::exact::int(2));
        let mut best = 0;
        let mut j = 0;
        for i in 0..n {
            if j < i {
                j = i;
            }
            while j + 1 < n && within(&a.points[i][0], &a.points[j + 1][0], &two) {
                j += 1;
            }
            best = best.max(j - i + 1);
        }
        return best;
    }
    let mut centres: Vec<Vec<f64>> = a
        .points
        .iter()
        .map(|p| p.iter().map(Real::to_f64).collect())
        .collect();
    for i in 0..n {
        for j in i + 1..n {
            if a.distance(i, j) <= 2.0 {
                centres.push(
                    a.points[i]
                        .iter()
                        .zip(&a.points[j])
                        .map(|(x, y)| 0.5 * (x.to_f64() + y.to_f64()))
                        .collect(),
                );
            }
        }
    }
    centres
        .iter()
        .map(|c| {
            a.points
                .iter()
                .filter(|p| {
                    p.iter()
                        .zip(c)
                        .map(|(x, y)| (x.to_f64() - y).powi(2))
                        .sum::<f64>()
                        <= 1.0 + 1e-12
                })
                .count()
        })
        .max()
        .unwrap_or(0)
}

fn within(a: &Real, b: &Real, len: &Real) -> bool {
    match (a, b, len) {
        (Real::Exact(x), Real::Exact(y), Real::Exact(l)) => y - x <= *l,
        _ => b.to_f64() - a.to_f64() <= len.to_f64(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountingExponent {
    pub exponent: f64,
    pub residual: f64,
}

/// Slope of `log #(A ∩ B(0,r))` against `log r` on 16 geometric radii in `[W/64, W]`.
pub fn counting_exponent(a: &PointSet) -> Result<CountingExponent> {
    let w = a.window_radius;
    let radii = geometric_grid(w / 64.0, w, 16);
    let norms: Vec<f64> = (0..a.len()).map(|i| a.norm(i)).collect();
    let samples: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| (r, norms.iter().filter(|&&x| x <= r).count() as f64))
        .collect();
    let nonzero = samples.iter().filter(|s| s.1 > 0.0).count();
    if nonzero < 8 {
        return Err(Error::InsufficientSamples(format!(
            "{nonzero} radii with nonzero counts, need 8"
        )));
    }
    let f = power_fit(&samples);
    Ok(CountingExponent {
        exponent: f.exponent,
        residual: f.residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub window_radius: f64,
    pub point_count: usize,
    pub separating_constant: Option<f64>,
    pub relative_density_radius: Option<f64>,
    pub p_discrete_fit: Option<PDiscreteFit>,
    pub p_discrete_diagnostic: String,
    pub bounded_density_sup: usize,
    pub counting_exponent: Option<CountingExponent>,
}

pub fn classify(a: &PointSet, h_max: f64) -> Result<ClassifierReport> {
    if a.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let sep = separating_constant(a).ok();
    let (fit, diag) = match fit_p_discreteness(a, h_max) {
        Ok(o) => (o.fit, o.diagnostic),
        Err(e) => (None, e.to_string()),
    };
    Ok(ClassifierReport {
        window_radius: a.window_radius,
        point_count: a.len(),
        separating_constant: sep,
        relative_density_radius: relative_density_radius(a)?,
        p_discrete_fit: fit,
        p_discrete_diagnostic: diag,
        bounded_density_sup: bounded_density_sup(a),
        counting_exponent: counting_exponent(a).ok(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, pow2, rat};
    use proptest::prelude::*;

    fn ints(lo: i64, hi: i64, w: f64) -> PointSet {
        PointSet::line(w, (lo..=hi).map(|n| Real::Exact(int(n)))).unwrap()
    }

    fn brute_min_distance(a: &PointSet) -> f64 {
        a.all_pairs().iter().map(|p| p.0).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn rejects_invalid_sets() {
        assert!(PointSet::line(1.0, [Real::Float(2.0)]).is_err());
        assert!(PointSet::line(5.0, [Real::Float(1.0), Real::Exact(int(1))]).is_err());
        assert!(PointSet::new(2, 5.0, vec![vec![Real::Float(1.0)]]).is_err());
        assert!(PointSet::line(0.0, []).is_err());
    }

    #[test]
    fn stores_points_sorted() {
        let a = PointSet::line(10.0, [3.0, -1.0, 2.0].map(Real::Float)).unwrap();
        let xs: Vec<f64> = a.points.iter().map(|p| p[0].to_f64()).collect();
        assert_eq!(xs, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn separating_constant_examples() {
        assert_eq!(separating_constant(&ints(0, 3, 3.0)).unwrap(), 1.0);
        let scaled = PointSet::line(0.5, (-8..=8).map(|n| Real::Exact(rat(n, 16)))).unwrap();
        assert_eq!(separating_constant(&scaled).unwrap(), 1.0 / 16.0);
        // as a set the union identifies 1 + 1^-2 with 2
        let mut xs = std::collections::BTreeSet::new();
        for n in 1..=50i64 {
            xs.insert(int(n));
            xs.insert(int(n) + rat(1, n * n));
        }
        let a = PointSet::line(51.0, xs.into_iter().map(Real::Exact)).unwrap();
        let brute = brute_min_distance(&a);
        assert_eq!(brute, 1.0 / 2500.0);
        assert_eq!(separating_constant(&a).unwrap(), brute);
        assert!(matches!(
            separating_constant(&ints(0, 0, 1.0)),
            Err(Error::TooFewPoints(1))
        ));
    }

    #[test]
    fn p_discrete_integers_fit_h_zero() {
        let o = fit_p_discreteness(&ints(1, 40, 40.0), DEFAULT_H_MAX).unwrap();
        let f = o.fit.unwrap();
        assert_eq!(f.h, 0.0);
        assert!((f.c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn p_discrete_inverse_square_perturbation() {
        let mut xs = Vec::new();
        for n in 1..=40i64 {
            let x = int(n) + rat(1, n * n);
            xs.push(Real::Exact(x.clone()));
            xs.push(Real::Exact(-x));
        }
        let a = PointSet::line(42.0, xs).unwrap();
        let f = fit_p_discreteness(&a, DEFAULT_H_MAX).unwrap().fit.unwrap();
        assert!(f.h <= 2.0 + 1e-9);
        // brute-force check of the separation inequality with the reported pair
        for (g, s) in a.all_pairs() {
            assert!(g >= f.c * s.powf(-f.h) * (1.0 - 1e-12));
        }
        // and the looser pair (1/4, 3) holds as well
        for (g, s) in a.all_pairs() {
            assert!(g >= 0.25 * s.powf(-3.0));
        }
    }

    fn exponential_pairs(n_hi: i64) -> PointSet {
        let mut xs = Vec::new();
        for n in 2..=n_hi {
            xs.push(Real::Exact(int(n)));
            xs.push(Real::Exact(int(n) + pow2(-n)));
        }
        PointSet::line(n_hi as f64 + 1.0, xs).unwrap()
    }

    #[test]
    fn p_discrete_exponential_gaps_need_a_long_window() {
        // n ≤ 20: polynomial n^h still beats 2^-n at h ≈ 6, so a fit exists
        let short = fit_p_discreteness(&exponential_pairs(20), 10.0).unwrap();
        assert!(short.fit.is_some());
        // n ≤ 60: exponential decay outruns every h ≤ 10
        let long = fit_p_discreteness(&exponential_pairs(60), 10.0).unwrap();
        assert!(long.fit.is_none());
        assert!(long.diagnostic.contains("no polynomial separation"));
    }

    /// Smallest grid radius whose ball around every grid centre in range meets the set.
    fn brute_covering(a: &PointSet) -> f64 {
        let w = a.window_radius;
        let step = density_grid_step(w);
        let xs: Vec<f64> = a.points.iter().map(|p| p[0].to_f64()).collect();
        let mut k = 1;
        loop {
            let r = k as f64 * step;
            let m = ((w - r) / step).floor() as i64;
            let ok = (-m..=m).all(|i| {
                let c = i as f64 * step;
                xs.iter().any(|x| (x - c).abs() <= r)
            }) && [-(w - r), w - r].iter().all(|c| xs.iter().any(|x| (x - c).abs() <= r));
            if ok {
                return r;
            }
            k += 1;
        }
    }

    #[test]
    fn relative_density_examples() {
        assert_eq!(relative_density_radius(&ints(-100, 100, 100.0)).unwrap(), Some(0.5));
        let mut xs: Vec<Real> = Vec::new();
        for n in 0..=10i64 {
            xs.push(Real::Exact(int(n * n)));
            if n > 0 {
                xs.push(Real::Exact(int(-n * n)));
            }
        }
        let squares = PointSet::line(100.0, xs).unwrap();
        // the widest gap (81, 100) needs R = 19/2, well under W/4
        assert_eq!(relative_density_radius(&squares).unwrap(), Some(9.5));
        assert_eq!(relative_density_radius(&squares).unwrap(), Some(brute_covering(&squares)));
        // a set confined near the origin leaves most of the window uncovered
        let clump = PointSet::line(100.0, (-3..=3).map(|n| Real::Exact(int(n)))).unwrap();
        assert_eq!(relative_density_radius(&clump).unwrap(), None);
        let empty = PointSet::line(1.0, []).unwrap();
        assert!(matches!(relative_density_radius(&empty), Err(Error::EmptyPointSet)));
    }

    #[test]
    fn bounded_density_examples() {
        assert_eq!(bounded_density_sup(&ints(-50, 50, 50.0)), 3);
        let fine = PointSet::line(8.0, (-128..=128).map(|n| Real::Exact(rat(n, 16)))).unwrap();
        assert_eq!(bounded_density_sup(&fine), 33);
        // sliding-window oracle on {n, n + 2^-n}
        let a = exponential_pairs(20);
        let xs: Vec<f64> = a.points.iter().map(|p| p[0].to_f64()).collect();
        let brute = xs
            .iter()
            .map(|&c| xs.iter().filter(|&&x| x >= c && x <= c + 2.0).count())
            .max()
            .unwrap();
        assert_eq!(bounded_density_sup(&a), brute);
        assert!(brute == 4 || brute == 5);
    }

    #[test]
    fn counting_exponent_examples() {
        let z = counting_exponent(&ints(-100, 100, 100.0)).unwrap();
        assert!((z.exponent - 1.0).abs() < 0.1, "{z:?}");
        let mut xs = vec![Real::Exact(int(0))];
        for n in 1..=30i64 {
            xs.push(Real::Exact(int(n * n)));
            xs.push(Real::Exact(int(-n * n)));
        }
        let sq = counting_exponent(&PointSet::line(900.0, xs).unwrap()).unwrap();
        assert!((sq.exponent - 0.5).abs() < 0.1, "{sq:?}");
        let fine = PointSet::line(8.0, (-128..=128).map(|n| Real::Exact(rat(n, 16)))).unwrap();
        assert!((counting_exponent(&fine).unwrap().exponent - 1.0).abs() < 0.1);
    }

    #[test]
    fn planar_lattice_classifiers() {
        let mut pts = Vec::new();
        for i in -5..=5i64 {
            for j in -5..=5i64 {
                if i * i + j * j <= 25 {
                    pts.push(vec![Real::Exact(int(i)), Real::Exact(int(j))]);
                }
            }
        }
        let a = PointSet::new(2, 5.0, pts).unwrap();
        assert_eq!(separating_constant(&a).unwrap(), 1.0);
        assert_eq!(bounded_density_sup(&a), 5);
        assert_eq!(fit_p_discreteness(&a, 16.0).unwrap().fit.unwrap().h, 0.0);
    }

    fn arb_line_set() -> impl Strategy<Value = Vec<i64>> {
        proptest::collection::btree_set(-5000i64..5000, 2..120)
            .prop_map(|s| s.into_iter().collect())
    }

    proptest! {
        #[test]
        fn scaling_covariance(ks in arb_line_set(), s in 1i64..9) {
            let a = PointSet::line(5000.0, ks.iter().map(|&k| Real::Exact(rat(k, 1000)))).unwrap();
            let b = PointSet::line(5000.0 * s as f64, ks.iter().map(|&k| Real::Exact(rat(k * s, 1000)))).unwrap();
            let exact_min = ks.windows(2).map(|w| w[1] - w[0]).min().unwrap();
            prop_assert_eq!(separating_constant(&a).unwrap(), crate::exact::to_f64(&rat(exact_min, 1000)));
            prop_assert_eq!(separating_constant(&b).unwrap(), crate::exact::to_f64(&rat(exact_min * s, 1000)));
        }

        #[test]
        fn monotone_under_insertion(ks in arb_line_set(), extra in -5000i64..5000) {
            prop_assume!(!ks.contains(&extra));
            let a = PointSet::line(5.0, ks.iter().map(|&k| Real::Exact(rat(k, 1000)))).unwrap();
            let mut more = ks.clone();
            more.push(extra);
            let b = PointSet::line(5.0, more.iter().map(|&k| Real::Exact(rat(k, 1000)))).unwrap();
            prop_assert!(separating_constant(&b).unwrap() <= separating_constant(&a).unwrap());
            prop_assert!(bounded_density_sup(&b) >= bounded_density_sup(&a));
        }

        #[test]
        fn classifiers_match_pairwise_oracle(ks in arb_line_set()) {
            let a = PointSet::line(5.0, ks.iter().map(|&k| Real::Exact(rat(k, 1000)))).unwrap();
            prop_assert_eq!(separating_constant(&a).unwrap(), brute_min_distance(&a));
            let xs: Vec<f64> = a.points.iter().map(|p| p[0].to_f64()).collect();
            let brute = xs.iter()
                .map(|&c| ks.iter().filter(|&&k| k >= (c * 1000.0).round() as i64 && k <= (c * 1000.0).round() as i64 + 2000).count())
                .max().unwrap();
            prop_assert_eq!(bounded_density_sup(&a), brute);
            if let Some(f) = fit_p_discreteness(&a, DEFAULT_H_MAX).unwrap().fit {
                for (g, s) in a.all_pairs() {
                    prop_assert!(g >= f.c * s.powf(-f.h) * (1.0 - 1e-12));
                }
            }
        }

        #[test]
        fn uniformly_discrete_sets_fit_with_h_zero(step in 1i64..50, count in 2i64..80) {
            let a = PointSet::line((step * count) as f64, (0..count).map(|k| Real::Exact(rat(k * step, 10)))).unwrap();
            let f = fit_p_discreteness(&a, DEFAULT_H_MAX).unwrap().fit.unwrap();
            prop_assert_eq!(f.h, 0.0);
        }
    }
}
