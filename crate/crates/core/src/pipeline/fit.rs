//! Recall-curve model `a1 [1 - tanh(a2 e - a3)]` and its least-squares fit.

use serde::{Deserialize, Serialize};

/// Relative parameter change at which the iteration stops.
pub const REL_TOL: f64 = 1e-8;
const MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    GaussNewton,
    Simplex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TanhFit {
    pub a: [f64; 3],
    pub sse: f64,
    pub converged: bool,
    pub method: FitMethod,
}

/// One aggregated level: error count, success fraction, weight (trials).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub e: f64,
    pub p: f64,
    pub w: f64,
}

#[inline]
pub fn tanh_curve(a: &[f64; 3], e: f64) -> f64 {
    a[0] * (1.0 - (a[1] * e - a[2]).tanh())
}

/// Error count at which the curve equals `threshold`:
/// `(a3 + atanh(1 - threshold / a1)) / a2`. `None` if the curve never
/// reaches `threshold` or is flat.
pub fn crossing(a: &[f64; 3], threshold: f64) -> Option<f64> {
    if !(a[0] > threshold / 2.0) || a[1] == 0.0 || !a.iter().all(|v| v.is_finite()) {
        return None;
    }
    let x = 1.0 - threshold / a[0];
    let b = (a[2] + x.atanh()) / a[1];
    b.is_finite().then_some(b)
}

fn sse(levels: &[Level], a: &[f64; 3]) -> f64 {
    levels
        .iter()
        .map(|l| {
            let r = tanh_curve(a, l.e) - l.p;
            l.w * r * r
        })
        .sum()
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut x = [0.0; 3];
    for (c, xc) in x.iter_mut().enumerate() {
        let mut mc = m;
        for r in 0..3 {
            mc[r][c] = b[r];
        }
        *xc = det(&mc) / d;
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Levenberg-damped Gauss-Newton from `start`.
fn gauss_newton(levels: &[Level], start: [f64; 3]) -> Option<TanhFit> {
    let mut a = start;
    let mut cost = sse(levels, &a);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITER {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for l in levels {
            let u = a[1] * l.e - a[2];
            let t = u.tanh();
            let s2 = 1.0 - t * t;
            let g = [1.0 - t, -a[0] * s2 * l.e, a[0] * s2];
            let r = a[0] * (1.0 - t) - l.p;
            for i in 0..3 {
                jtr[i] += l.w * g[i] * r;
                for k in 0..3 {
                    jtj[i][k] += l.w * g[i] * g[k];
                }
            }
        }
        let mut step = None;
        for _ in 0..60 {
            let mut m = jtj;
            for (i, row) in m.iter_mut().enumerate() {
                row[i] += lambda * (jtj[i][i] + 1e-12);
            }
            let Some(d) = solve3(m, [-jtr[0], -jtr[1], -jtr[2]]) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [a[0] + d[0], a[1] + d[1], a[2] + d[2]];
            let c = sse(levels, &trial);
            if c.is_finite() && c <= cost {
                step = Some((trial, d, c));
                lambda = (lambda / 3.0).max(1e-12);
                break;
            }
            lambda *= 4.0;
        }
        let (next, d, c) = step?;
        let rel = (0..3)
            .map(|i| d[i].abs() / a[i].abs().max(1e-12))
            .fold(0.0, f64::max);
        a = next;
        let done = rel < REL_TOL || (cost - c).abs() <= 1e-15 * cost.max(1e-300);
        cost = c;
        if done {
            return Some(TanhFit { a, sse: cost, converged: true, method: FitMethod::GaussNewton });
        }
    }
    a.iter().all(|v| v.is_finite()).then_some(TanhFit {
        a,
        sse: cost,
        converged: false,
        method: FitMethod::GaussNewton,
    })
}

/// Derivative-free Nelder-Mead minimisation of the weighted SSE.
fn simplex(levels: &[Level], start: [f64; 3]) -> Option<TanhFit> {
    let f = |a: &[f64; 3]| {
        let c = sse(levels, a);
        if c.is_finite() {
            c
        } else {
            f64::INFINITY
        }
    };
    let mut pts: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    pts.push((start, f(&start)));
    for i in 0..3 {
        let mut p = start;
        p[i] += if p[i] != 0.0 { 0.1 * p[i].abs() } else { 0.25 };
        pts.push((p, f(&p)));
    }
    let mut converged = false;
    for _ in 0..4000 {
        pts.sort_by(|x, y| x.1.total_cmp(&y.1));
        let spread = (0..3)
            .map(|i| {
                let lo = pts.iter().map(|p| p.0[i]).fold(f64::INFINITY, f64::min);
                let hi = pts.iter().map(|p| p.0[i]).fold(f64::NEG_INFINITY, f64::max);
                (hi - lo) / pts[0].0[i].abs().max(1e-12)
            })
            .fold(0.0, f64::max);
        if spread < REL_TOL {
            converged = true;
            break;
        }
        let mut c = [0.0; 3];
        for p in &pts[..3] {
            for i in 0..3 {
                c[i] += p.0[i] / 3.0;
            }
        }
        let along = |t: f64| {
            let mut x = [0.0; 3];
            for i in 0..3 {
                x[i] = c[i] + t * (pts[3].0[i] - c[i]);
            }
            x
        };
        let r = along(-1.0);
        let fr = f(&r);
        if fr < pts[0].1 {
            let e = along(-2.0);
            let fe = f(&e);
            pts[3] = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < pts[2].1 {
            pts[3] = (r, fr);
        } else {
            let k = if fr < pts[3].1 { along(-0.5) } else { along(0.5) };
            let fk = f(&k);
            if fk < pts[3].1.min(fr) {
                pts[3] = (k, fk);
            } else {
                let best = pts[0].0;
                for p in pts.iter_mut().skip(1) {
                    for i in 0..3 {
                        p.0[i] = best[i] + 0.5 * (p.0[i] - best[i]);
                    }
                    p.1 = f(&p.0);
                }
            }
        }
    }
    pts.sort_by(|x, y| x.1.total_cmp(&y.1));
    let (a, c) = pts[0];
    c.is_finite().then_some(TanhFit { a, sse: c, converged, method: FitMethod::Simplex })
}

/// Multistart fit over `a3 in {0, 1, ..., e_max}`; falls back to the simplex
/// when no Gauss-Newton start converges.
pub fn fit_tanh(levels: &[Level], e_max: usize) -> Option<TanhFit> {
    if levels.is_empty() {
        return None;
    }
    let wsum: f64 = levels.iter().map(|l| l.w).sum();
    let e_lo = levels.iter().map(|l| l.e).fold(f64::INFINITY, f64::min);
    let y0 = {
        let (mut s, mut w) = (0.0, 0.0);
        for l in levels.iter().filter(|l| l.e == e_lo) {
            s += l.w * l.p;
            w += l.w;
        }
        if w > 0.0 {
            s / w
        } else {
            levels.iter().map(|l| l.w * l.p).sum::<f64>() / wsum
        }
    };
    let starts: Vec<[f64; 3]> = (0..=e_max)
        .map(|k| {
            let a3 = k as f64;
            [y0.max(0.02) / (1.0 + a3.tanh()), 1.0, a3]
        })
        .collect();
    let mut best: Option<TanhFit> = None;
    for s in &starts {
        if let Some(f) = gauss_newton(levels, *s) {
            if f.converged && best.is_none_or(|b| f.sse < b.sse) {
                best = Some(f);
            }
        }
    }
    if best.is_some() {
        return best;
    }
    starts
        .iter()
        .filter_map(|s| simplex(levels, *s))
        .min_by(|x, y| x.sse.total_cmp(&y.sse))
}

/// Weighted pool-adjacent-violators fit of a non-increasing sequence.
pub fn isotonic_decreasing(levels: &[Level]) -> Vec<Level> {
    let mut sorted = levels.to_vec();
    sorted.sort_by(|x, y| x.e.total_cmp(&y.e));
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
    for l in &sorted {
        blocks.push((l.p * l.w, l.w, 1));
        while blocks.len() > 1 {
            let k = blocks.len();
            let (s1, w1, _) = blocks[k - 2];
            let (s2, w2, _) = blocks[k - 1];
            if s1 / w1.max(1e-300) >= s2 / w2.max(1e-300) {
                break;
            }
            let (_, _, c2) = blocks.pop().unwrap();
            let b = blocks.last_mut().unwrap();
            b.0 += s2;
            b.1 += w2;
            b.2 += c2;
        }
    }
    let mut out = Vec::with_capacity(sorted.len());
    let mut i = 0;
    for (s, w, c) in blocks {
        for _ in 0..c {
            out.push(Level { e: sorted[i].e, p: s / w.max(1e-300), w: sorted[i].w });
            i += 1;
        }
    }
    out
}

/// First crossing of `threshold` by linear interpolation between levels
/// (sorted by `e`). Returns the last level if the data never drop to the
/// threshold, and the first level if they start below it.
pub fn interpolated_crossing(levels: &[Level], threshold: f64) -> f64 {
    let mut sorted = levels.to_vec();
    sorted.sort_by(|x, y| x.e.total_cmp(&y.e));
    let Some(first) = sorted.first() else {
        return 0.0;
    };
    if first.p <= threshold {
        return first.e;
    }
    for w in sorted.windows(2) {
        if w[1].p <= threshold {
            return w[0].e + (w[0].p - threshold) / (w[0].p - w[1].p) * (w[1].e - w[0].e);
        }
    }
    sorted.last().unwrap().e
}
