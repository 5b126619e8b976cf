//! Test-side oracles and fixtures, written independently of the library
//! code they check.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use statrs::function::gamma::ln_gamma;

use vibrancy::glm::{logistic, negbin, FitResult};
use vibrancy::linalg::Matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(r: &mut ChaCha8Rng) -> f64 {
    Normal::new(0.0, 1.0).unwrap().sample(r)
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// `(XᵀX)⁻¹ Xᵀy`.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..p {
            xty[i] += row[i] * yi;
            for j in 0..p {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    gauss_solve(xtx, xty)
}

pub struct OlsFixture {
    pub rows: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl OlsFixture {
    pub fn matrix(&self) -> Matrix<f64> {
        Matrix::from_rows(&self.rows)
    }
}

/// Intercept plus up to five standard-normal columns, n in [p + 3, 50].
pub fn ols_fixture(seed: u64) -> OlsFixture {
    let mut r = rng(seed);
    let p = r.random_range(1..=6);
    let n = r.random_range(p + 3..=50);
    let beta: Vec<f64> = (0..p).map(|_| 3.0 * normal(&mut r)).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| std::iter::once(1.0).chain((1..p).map(|_| normal(&mut r))).collect())
        .collect();
    let y = rows
        .iter()
        .map(|x| x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + normal(&mut r))
        .collect();
    OlsFixture { rows, y }
}

/// Minimizes a unimodal function on `[a, b]`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

pub fn logistic_loglik_1d(x: &[f64], y: &[f64], b: f64) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let e = xi * b;
            // ln(1 + e^e) without overflow
            let soft = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
            yi * e - soft
        })
        .sum()
}

pub fn negbin_loglik_1d(x: &[f64], y: &[f64], b: f64, theta: f64) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let mu = (xi * b).exp();
            ln_gamma(yi + theta) - ln_gamma(theta) - ln_gamma(yi + 1.0) + theta * (theta / (theta + mu)).ln()
                + yi * (mu / (theta + mu)).ln()
        })
        .sum()
}

/// One predictor, no intercept: `x` uniform on [-2, 2], slope `b`.
pub fn logistic_fixture_1d(seed: u64, n: usize, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let x: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
    let y = x
        .iter()
        .map(|&xi| if r.random::<f64>() < 1.0 / (1.0 + (-b * xi).exp()) { 1.0 } else { 0.0 })
        .collect();
    (x, y)
}

pub fn negbin_fixture_1d(seed: u64, n: usize, b: f64, theta: f64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let x: Vec<f64> = (0..n).map(|_| r.random_range(0.5..2.0)).collect();
    let y = x.iter().map(|&xi| nb_draw(&mut r, (b * xi).exp(), theta)).collect();
    (x, y)
}

/// NB2 draw as a gamma-Poisson mixture.
pub fn nb_draw(r: &mut ChaCha8Rng, mu: f64, theta: f64) -> f64 {
    let lam = Gamma::new(theta, mu / theta).unwrap().sample(r);
    if lam <= 0.0 {
        0.0
    } else {
        Poisson::new(lam).unwrap().sample(r)
    }
}

pub fn poisson_draw(r: &mut ChaCha8Rng, mu: f64) -> f64 {
    Poisson::new(mu).unwrap().sample(r)
}

pub fn column(x: &[f64]) -> Matrix<f64> {
    Matrix::from_columns(&[x.to_vec()])
}

/// Profile-likelihood oracle for the no-intercept NB fit: golden section
/// over `ln θ` with an inner golden section over `β`.
pub fn negbin_oracle_1d(x: &[f64], y: &[f64]) -> (f64, f64) {
    let inner = |th: f64| golden_min(|b| -negbin_loglik_1d(x, y, b, th), -5.0, 5.0, 1e-11);
    let lt = golden_min(|lt| -negbin_loglik_1d(x, y, inner(lt.exp()), lt.exp()), -5.0, 10.0, 1e-10);
    (inner(lt.exp()), lt.exp())
}

pub fn logistic_oracle_1d(x: &[f64], y: &[f64]) -> f64 {
    golden_min(|b| -logistic_loglik_1d(x, y, b), -20.0, 20.0, 1e-12)
}

#[derive(Debug)]
pub struct ScoreCheck {
    /// Largest analytic score component at the estimate.
    pub score_at_fit: f64,
    /// Largest absolute gap between the analytic score and central
    /// differences at the estimate, where relative gaps are meaningless.
    pub fd_gap_at_fit: f64,
    /// Largest relative disagreement at perturbed points.
    pub relative_gap: f64,
}

impl ScoreCheck {
    pub fn passes(&self) -> bool {
        self.score_at_fit < 1e-6 && self.fd_gap_at_fit < 1e-4 && self.relative_gap < 1e-4
    }
}

/// Richardson-extrapolated central difference. The step is a tenth of the
/// curvature scale along `j`, so steep coordinates (large count predictors)
/// do not pick up truncation error.
fn central(f: &dyn Fn(&[f64]) -> f64, at: &[f64], j: usize) -> f64 {
    let shifted = |h: f64| {
        let mut v = at.to_vec();
        v[j] += h;
        f(&v)
    };
    let diff = |h: f64| (shifted(h) - shifted(-h)) / (2.0 * h);
    let d = 1e-4 * at[j].abs().max(1.0);
    let curv = ((shifted(d) - 2.0 * f(at) + shifted(-d)) / (d * d)).abs();
    let mut h = 1e-4 * at[j].abs().max(1.0);
    if curv > 0.0 {
        h = h.min(0.1 / curv.sqrt());
    }
    (4.0 * diff(h / 2.0) - diff(h)) / 3.0
}

fn perturbations(p: usize) -> Vec<Vec<f64>> {
    let mut r = rng(17);
    (0..3).map(|_| (0..p).map(|_| 0.05 * normal(&mut r)).collect()).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn check(params: &[f64], ll: &dyn Fn(&[f64]) -> f64, score: &dyn Fn(&[f64]) -> Vec<f64>) -> ScoreCheck {
    let s = score(params);
    let score_at_fit = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let fd_gap_at_fit = (0..params.len()).map(|j| (central(ll, params, j) - s[j]).abs()).fold(0.0, f64::max);
    let mut relative_gap = 0.0f64;
    for d in perturbations(params.len()) {
        let q: Vec<f64> = params.iter().zip(&d).map(|(a, b)| a + b).collect();
        let s = score(&q);
        for (j, sj) in s.iter().enumerate() {
            relative_gap = relative_gap.max(rel(*sj, central(ll, &q, j)));
        }
    }
    ScoreCheck { score_at_fit, fd_gap_at_fit, relative_gap }
}

pub fn logistic_score_check(x: &Matrix<f64>, y: &[f64], fit: &FitResult<f64>) -> ScoreCheck {
    let ll = |b: &[f64]| logistic::log_likelihood(x, y, b);
    let sc = |b: &[f64]| logistic::score(x, y, b);
    check(&fit.coefficients, &ll, &sc)
}

/// Parameters are `(β, θ)`.
pub fn negbin_score_check(x: &Matrix<f64>, y: &[f64], fit: &FitResult<f64>) -> ScoreCheck {
    let p = fit.coefficients.len();
    let ll = |v: &[f64]| negbin::log_likelihood(x, y, &v[..p], v[p]);
    let sc = |v: &[f64]| {
        let (mut s, st) = negbin::score(x, y, &v[..p], v[p]);
        s.push(st);
        s
    };
    let mut params = fit.coefficients.clone();
    params.push(fit.theta.expect("negative binomial fit has theta"));
    check(&params, &ll, &sc)
}

/// Naive greedy matching replay: returns `(treated, control)` pairs in
/// processing order and the dropped treated units.
pub fn greedy_replay(
    ids: &[String],
    scores: &[f64],
    treated: &[bool],
    replace: bool,
    caliper: Option<f64>,
) -> (Vec<(usize, usize)>, Vec<usize>) {
    let mut order: Vec<usize> = (0..ids.len()).filter(|&i| treated[i]).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(ids[a].cmp(&ids[b])));
    let mut used = vec![false; ids.len()];
    let (mut pairs, mut dropped) = (Vec::new(), Vec::new());
    for t in order {
        let mut best: Option<usize> = None;
        for c in (0..ids.len()).filter(|&c| !treated[c] && !used[c]) {
            let d = (scores[t] - scores[c]).abs();
            best = match best {
                None => Some(c),
                Some(b) => {
                    let db = (scores[t] - scores[b]).abs();
                    if d < db || (d == db && ids[c] < ids[b]) {
                        Some(c)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        match best {
            Some(c) if caliper.is_none_or(|cal| (scores[t] - scores[c]).abs() <= cal) => {
                if !replace {
                    used[c] = true;
                }
                pairs.push((t, c));
            }
            _ => dropped.push(t),
        }
    }
    (pairs, dropped)
}

/// A random matching problem: scores drawn from a small grid so that ties
/// in score and in distance occur often.
pub fn score_configuration(seed: u64) -> (Vec<String>, Vec<f64>, Vec<bool>) {
    let mut r = rng(seed);
    let n = r.random_range(2..60);
    let coarse = r.random::<bool>();
    let ids: Vec<String> = (0..n).map(|i| format!("u{:03}", (i * 37) % 101)).collect();
    let scores = (0..n)
        .map(|_| if coarse { r.random_range(0..20) as f64 / 20.0 } else { r.random::<f64>() })
        .collect();
    let share = r.random_range(0.1..0.9);
    let treated = (0..n).map(|_| r.random::<f64>() < share).collect();
    (ids, scores, treated)
}

/// `k × k` grid of quadrilaterals over the unit square whose interior
/// vertices are jittered, so cells are irregular but tile exactly.
pub fn jittered_grid(k: usize, seed: u64) -> Vec<vibrancy::ingest::geometry::BlockGroup> {
    let mut r = rng(seed);
    let s = 1.0 / k as f64;
    let mut v = vec![vec![(0.0, 0.0); k + 1]; k + 1];
    for (i, row) in v.iter_mut().enumerate() {
        for (j, p) in row.iter_mut().enumerate() {
            let (mut x, mut y) = (j as f64 * s, i as f64 * s);
            if i > 0 && i < k && j > 0 && j < k {
                x += r.random_range(-0.3..0.3) * s;
                y += r.random_range(-0.3..0.3) * s;
            }
            *p = (x, y);
        }
    }
    let mut out = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let ring = vec![v[i][j], v[i][j + 1], v[i + 1][j + 1], v[i + 1][j], v[i][j]];
            out.push(vibrancy::ingest::geometry::BlockGroup::new(format!("g{i}{j}"), vec![ring], Some(1.0)));
        }
    }
    out
}

/// Uniform points over a box slightly larger than the unit square, plus
/// every polygon vertex.
pub fn probe_points(n: usize, seed: u64, polys: &[vibrancy::ingest::geometry::BlockGroup]) -> Vec<(f64, f64)> {
    let mut r = rng(seed);
    let mut pts: Vec<(f64, f64)> = (0..n).map(|_| (r.random_range(-0.05..1.05), r.random_range(-0.05..1.05))).collect();
    pts.extend(polys.iter().flat_map(|b| b.rings[0].iter().copied()));
    pts
}

/// O(n·m) containment: boundary or odd winding of a horizontal ray, the
/// smallest id among covering polygons.
pub fn naive_assignment(pts: &[(f64, f64)], polys: &[vibrancy::ingest::geometry::BlockGroup]) -> Vec<Option<String>> {
    let on_edge = |(px, py): (f64, f64), a: (f64, f64), b: (f64, f64)| {
        let cross = (b.0 - a.0) * (py - a.1) - (b.1 - a.1) * (px - a.0);
        cross == 0.0 && px >= a.0.min(b.0) && px <= a.0.max(b.0) && py >= a.1.min(b.1) && py <= a.1.max(b.1)
    };
    let inside = |p: (f64, f64), ring: &[(f64, f64)]| {
        let mut crossings = 0;
        for w in ring.windows(2) {
            let (a, b) = (w[0], w[1]);
            if (a.1 > p.1) != (b.1 > p.1) && p.0 < a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1) {
                crossings += 1;
            }
        }
        crossings
    };
    pts.iter()
        .map(|&p| {
            polys
                .iter()
                .filter(|g| {
                    g.rings.iter().any(|r| r.windows(2).any(|w| on_edge(p, w[0], w[1])))
                        || g.rings.iter().map(|r| inside(p, r)).sum::<usize>() % 2 == 1
                })
                .map(|g| g.id.clone())
                .min()
        })
        .collect()
}
