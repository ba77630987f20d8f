//! Gauss–Lobatto rules, peak-aware panel ladders and breadth-first adaptive
//! panel refinement.

use alloc::vec::Vec;
use num_complex::Complex64 as C64;

use crate::math::{abs, cos, PI};

/// `n`-point Gauss–Lobatto rule on `[-1, 1]`. The endpoints are nodes; the
/// interior nodes are the roots of `P'_{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLobatto {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLobatto {
    /// Panics if `n < 2`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "Gauss–Lobatto needs at least two points");
        let deg = n - 1;
        // Chebyshev–Gauss–Lobatto points as the starting guess
        let mut x: Vec<f64> = (0..n).map(|k| -cos(PI * k as f64 / deg as f64)).collect();
        for _ in 0..100 {
            let mut max_dx = 0.0f64;
            for (i, xi) in x.iter_mut().enumerate() {
                let (p, p_prev) = legendre_pair(deg, *xi);
                if i == 0 || i == deg {
                    continue;
                }
                let dx = (*xi * p - p_prev) / (n as f64 * p);
                *xi -= dx;
                max_dx = max_dx.max(abs(dx));
            }
            if max_dx < 1e-16 {
                break;
            }
        }
        x[0] = -1.0;
        x[deg] = 1.0;
        // enforce exact symmetry
        for i in 0..n / 2 {
            let m = 0.5 * (x[deg - i] - x[i]);
            x[i] = -m;
            x[deg - i] = m;
        }
        if n % 2 == 1 {
            x[deg / 2] = 0.0;
        }
        let scale = 2.0 / (deg as f64 * n as f64);
        let mut weights: Vec<f64> = x
            .iter()
            .map(|&xi| {
                let p = legendre_pair(deg, xi).0;
                scale / (p * p)
            })
            .collect();
        for i in 0..n / 2 {
            let w = 0.5 * (weights[i] + weights[deg - i]);
            weights[i] = w;
            weights[deg - i] = w;
        }
        GaussLobatto { nodes: x, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let m = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (m + h * x, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> C64>(&self, mut f: F, a: f64, b: f64) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for (x, w) in self.mapped(a, b) {
            s += f(x) * w;
        }
        s
    }
}

/// `(P_n(x), P_{n-1}(x))` by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// `n`-point Gauss–Lobatto estimate of `∫_a^b f`.
pub fn gauss_lobatto<F: FnMut(f64) -> C64>(f: F, a: f64, b: f64, n: usize) -> C64 {
    GaussLobatto::new(n).integrate(f, a, b)
}

/// A peak position together with the innermost panel half width around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub position: f64,
    pub width: f64,
}

/// Panel geometry: `base_panels` uniform panels on `[a, b]`, then around every
/// peak `p` the boundaries `p` and `p ± w r^k`, `k = 0, 1, …`, while inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelLadder {
    pub ratio: f64,
    pub base_panels: usize,
}

impl Default for PanelLadder {
    fn default() -> Self {
        PanelLadder {
            ratio: 4.0,
            base_panels: 1,
        }
    }
}

/// Sorted, deduplicated panel boundaries on `[a, b]` for the given peaks and
/// ladder. Peaks outside the open interval are ignored.
pub fn panelize_with(a: f64, b: f64, peaks: &[Peak], ladder: &PanelLadder) -> Vec<f64> {
    let mut pts = Vec::with_capacity(ladder.base_panels + 1 + 40 * peaks.len());
    let nb = ladder.base_panels.max(1);
    for k in 0..=nb {
        pts.push(a + (b - a) * k as f64 / nb as f64);
    }
    pts[nb] = b;
    let ratio = if ladder.ratio > 1.0 {
        ladder.ratio
    } else {
        4.0
    };
    for pk in peaks {
        let p = pk.position;
        if !(p > a && p < b) || !(pk.width > 0.0) {
            continue;
        }
        pts.push(p);
        let mut w = pk.width;
        loop {
            let mut added = false;
            for q in [p - w, p + w] {
                if q > a && q < b {
                    pts.push(q);
                    added = true;
                }
            }
            if !added {
                break;
            }
            w *= ratio;
        }
    }
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
    // merge boundaries closer than roundoff of the interval
    let eps = 1e-13 * (abs(a) + abs(b)).max(b - a);
    let mut out: Vec<f64> = Vec::with_capacity(pts.len());
    for x in pts {
        match out.last() {
            Some(&l) if x - l <= eps => {
                if x == b {
                    *out.last_mut().unwrap() = b;
                }
            }
            _ => out.push(x),
        }
    }
    out
}

/// Panel boundaries with the default ladder (ratio 4, no base subdivision)
/// and the same innermost width for every peak.
pub fn panelize(a: f64, b: f64, peaks: &[f64], width_hint: f64) -> Vec<f64> {
    let p: Vec<Peak> = peaks
        .iter()
        .map(|&position| Peak {
            position,
            width: width_hint,
        })
        .collect();
    panelize_with(a, b, &p, &PanelLadder::default())
}

/// Splits every panel into `2^levels` equal parts.
pub fn subdivide(bounds: &[f64], levels: u32) -> Vec<f64> {
    if levels == 0 || bounds.len() < 2 {
        return bounds.to_vec();
    }
    let parts = 1usize << levels;
    let mut out = Vec::with_capacity((bounds.len() - 1) * parts + 1);
    for w in bounds.windows(2) {
        for k in 0..parts {
            out.push(w[0] + (w[1] - w[0]) * k as f64 / parts as f64);
        }
    }
    out.push(*bounds.last().unwrap());
    out
}

/// Composite rule over consecutive panels. Shared endpoints are merged into
/// a single node carrying both weights.
pub fn composite_nodes(bounds: &[f64], rule: &GaussLobatto) -> (Vec<f64>, Vec<f64>) {
    let n = rule.len();
    let panels = bounds.len().saturating_sub(1);
    let mut xs = Vec::with_capacity(panels * (n - 1) + 1);
    let mut ws = Vec::with_capacity(panels * (n - 1) + 1);
    for w in bounds.windows(2) {
        for (k, (x, wt)) in rule.mapped(w[0], w[1]).enumerate() {
            if k == 0 && !xs.is_empty() {
                *ws.last_mut().unwrap() += wt;
                continue;
            }
            xs.push(if k == n - 1 {
                w[1]
            } else if k == 0 {
                w[0]
            } else {
                x
            });
            ws.push(wt);
        }
    }
    (xs, ws)
}

/// Breadth-first refinement: every panel is compared against the sum over
/// its two halves, and panels whose difference exceeds `tol` times the total
/// absolute integral are split. Returns the accepted panel boundaries, or
/// `None` if some panel still fails after `max_depth` levels.
pub fn adaptive_bounds<const K: usize, F>(
    mut f: F,
    initial: &[f64],
    rule: &GaussLobatto,
    tol: f64,
    max_depth: u32,
) -> Option<Vec<f64>>
where
    F: FnMut(f64) -> [C64; K],
{
    let mut integrate = |a: f64, b: f64| -> [C64; K] {
        let mut s = [C64::new(0.0, 0.0); K];
        for (x, w) in rule.mapped(a, b) {
            let v = f(x);
            for (acc, vi) in s.iter_mut().zip(v.iter()) {
                *acc += *vi * w;
            }
        }
        s
    };
    let dist = |p: &[C64; K], q: &[C64; K]| -> f64 {
        p.iter()
            .zip(q.iter())
            .map(|(x, y)| (*x - *y).norm())
            .fold(0.0, f64::max)
    };
    let size = |p: &[C64; K]| -> f64 { p.iter().map(|x| x.norm()).fold(0.0, f64::max) };

    // (a, b, estimate, depth)
    let mut active: Vec<(f64, f64, [C64; K], u32)> = initial
        .windows(2)
        .map(|w| (w[0], w[1], integrate(w[0], w[1]), 0))
        .collect();
    let mut accepted: Vec<(f64, f64)> = Vec::new();
    loop {
        let mut halves = Vec::with_capacity(2 * active.len());
        let mut total = 0.0;
        for &(a, b, _, d) in &active {
            let m = 0.5 * (a + b);
            let l = integrate(a, m);
            let r = integrate(m, b);
            let mut s = l;
            for (x, y) in s.iter_mut().zip(r.iter()) {
                *x += *y;
            }
            total += size(&l) + size(&r);
            halves.push((a, m, b, l, r, s, d));
        }
        for &(a, b) in &accepted {
            total += size(&integrate(a, b));
        }
        let mut next = Vec::new();
        for (i, (a, m, b, l, r, s, d)) in halves.into_iter().enumerate() {
            let err = dist(&s, &active[i].2);
            if err <= tol * total {
                accepted.push((a, b));
            } else if d + 1 > max_depth {
                return None;
            } else {
                next.push((a, m, l, d + 1));
                next.push((m, b, r, d + 1));
            }
        }
        if next.is_empty() {
            break;
        }
        active = next;
    }
    let mut pts: Vec<f64> = accepted.iter().flat_map(|&(a, b)| [a, b]).collect();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
    pts.dedup();
    Some(pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn re(f: impl Fn(f64) -> f64) -> impl FnMut(f64) -> C64 {
        move |x| C64::new(f(x), 0.0)
    }

    #[test]
    fn polynomial_exactness() {
        for n in 3..=20usize {
            let deg = 2 * n - 3;
            let v = gauss_lobatto(re(|x| x.powi(deg as i32)), 0.0, 1.0, n);
            assert!((v.re - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n = {n}");
            let one = gauss_lobatto(re(|_| 1.0), 0.0, 1.0, n);
            assert!((one.re - 1.0).abs() < 1e-14);
        }
        assert!((gauss_lobatto(re(|x| x * x * x), 0.0, 1.0, 4).re - 0.25).abs() < 1e-16);
    }

    #[test]
    fn known_nodes() {
        let r = GaussLobatto::new(5);
        let s = (3.0f64 / 7.0).sqrt();
        assert_relative_eq!(r.nodes()[1], -s, epsilon = 1e-15);
        assert_relative_eq!(r.weights()[0], 0.1, epsilon = 1e-15);
        assert_relative_eq!(r.weights()[2], 32.0 / 45.0, epsilon = 1e-15);
        assert_eq!(r.nodes()[0], -1.0);
        assert_eq!(r.nodes()[4], 1.0);
    }

    #[test]
    fn panel_construction() {
        assert_eq!(panelize(0.0, 1.0, &[], 0.1), vec![0.0, 1.0]);
        assert_eq!(panelize(0.0, 1.0, &[2.0, -1.0], 0.1), vec![0.0, 1.0]);
        let p = panelize(-10.0, 10.0, &[0.0], 1.0);
        assert_eq!(p, vec![-10.0, -4.0, -1.0, 0.0, 1.0, 4.0, 10.0]);
        let q = panelize(-10.0, 10.0, &[0.0, 0.0], 1.0);
        assert_eq!(p, q);
    }

    #[test]
    fn composite_merges_endpoints() {
        let r = GaussLobatto::new(4);
        let (xs, ws) = composite_nodes(&[0.0, 1.0, 3.0], &r);
        assert_eq!(xs.len(), 7);
        assert_eq!(xs[3], 1.0);
        let total: f64 = ws.iter().sum();
        assert!((total - 3.0).abs() < 1e-14);
    }

    #[test]
    fn subdivision() {
        assert_eq!(
            subdivide(&[0.0, 1.0, 3.0], 1),
            vec![0.0, 0.5, 1.0, 2.0, 3.0]
        );
        assert_eq!(subdivide(&[0.0, 1.0], 0), vec![0.0, 1.0]);
    }

    #[test]
    fn adaptive_refines_a_narrow_peak() {
        let rule = GaussLobatto::new(7);
        let w = 1e-3;
        let f = |x: f64| [C64::new(w / (x * x + w * w), 0.0)];
        let b = adaptive_bounds(f, &[-1.0, 0.3, 1.0], &rule, 1e-10, 30).unwrap();
        let (xs, ws) = composite_nodes(&b, &rule);
        let s: f64 = xs.iter().zip(&ws).map(|(x, wt)| f(*x)[0].re * wt).sum();
        let exact = 2.0 * (1.0f64 / w).atan();
        assert!((s - exact).abs() < 1e-8 * exact);
        assert!(adaptive_bounds(f, &[-1.0, 0.3, 1.0], &rule, 1e-10, 2).is_none());
    }
}
