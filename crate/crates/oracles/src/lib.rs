//! Exact or exhaustive reference computations for cross-checking the
//! production code. Everything here favours obviousness over speed and is
//! meant for tiny inputs only.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

/// Dense LP/MILP with finite variable bounds: minimize `c.x` subject to
/// `row_lo <= A x <= row_hi`, `lb <= x <= ub`, and `x_j` integral where
/// `integer[j]`.
#[derive(Debug, Clone)]
pub struct DenseProblem {
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub row_lo: Vec<f64>,
    pub row_hi: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub integer: Vec<bool>,
}

/// Solves the square system `m x = b` by Gaussian elimination with partial
/// pivoting. Returns `None` when the matrix is (numerically) singular.
pub fn solve_dense(m: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut a: Vec<Vec<f64>> = m.iter().zip(b).map(|(r, &v)| {
        let mut r = r.clone();
        r.push(v);
        r
    }).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        for i in 0..n {
            if i != col {
                let f = a[i][col] / a[col][col];
                if f != 0.0 {
                    for k in col..=n {
                        a[i][k] -= f * a[col][k];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

/// One half-space `g.x <= h` (or `>=`, encoded by negation).
fn halfspaces(p: &DenseProblem) -> Vec<(Vec<f64>, f64)> {
    let n = p.c.len();
    let mut out = Vec::new();
    for (row, (&lo, &hi)) in p.a.iter().zip(p.row_lo.iter().zip(&p.row_hi)) {
        if hi.is_finite() {
            out.push((row.clone(), hi));
        }
        if lo.is_finite() {
            out.push((row.iter().map(|v| -v).collect(), -lo));
        }
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        out.push((e.clone(), p.ub[j]));
        e[j] = -1.0;
        out.push((e, -p.lb[j]));
    }
    out
}

fn feasible(p: &DenseProblem, x: &[f64], tol: f64) -> bool {
    for j in 0..x.len() {
        if x[j] < p.lb[j] - tol || x[j] > p.ub[j] + tol {
            return false;
        }
    }
    p.a.iter().zip(p.row_lo.iter().zip(&p.row_hi)).all(|(row, (&lo, &hi))| {
        let v: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
        v >= lo - tol && v <= hi + tol
    })
}

fn combinations(k: usize, n: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, k: usize, cur: &mut Vec<usize>, n: usize, f: &mut impl FnMut(&[usize])) {
        if cur.len() == n {
            f(cur);
            return;
        }
        for i in start..k {
            if k - i < n - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, k, cur, n, f);
            cur.pop();
        }
    }
    rec(0, k, &mut Vec::with_capacity(n), n, f);
}

/// LP optimum by enumerating every vertex of the (bounded) polytope.
/// Integrality is ignored. Returns `None` if infeasible.
pub fn lp_by_vertices(p: &DenseProblem) -> Option<(f64, Vec<f64>)> {
    let n = p.c.len();
    if n == 0 {
        return feasible(p, &[], 1e-9).then(|| (0.0, Vec::new()));
    }
    let hs = halfspaces(p);
    let mut best: Option<(f64, Vec<f64>)> = None;
    combinations(hs.len(), n, &mut |idx| {
        let m: Vec<Vec<f64>> = idx.iter().map(|&i| hs[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| hs[i].1).collect();
        if let Some(x) = solve_dense(&m, &b) {
            if feasible(p, &x, 1e-7) {
                let v: f64 = p.c.iter().zip(&x).map(|(a, b)| a * b).sum();
                if best.as_ref().map_or(true, |(bv, _)| v < *bv) {
                    best = Some((v, x));
                }
            }
        }
    });
    best
}

/// MILP optimum by enumerating every integer assignment and solving the
/// remaining LP by vertex enumeration.
pub fn milp_brute_force(p: &DenseProblem) -> Option<(f64, Vec<f64>)> {
    enumerate_integers(p, lp_by_vertices)
}

/// As [`milp_brute_force`], with the dense tableau simplex for the LPs so
/// that a dozen or more continuous columns stay tractable.
pub fn milp_brute_force_simplex(p: &DenseProblem) -> Option<(f64, Vec<f64>)> {
    enumerate_integers(p, lp_dense_simplex)
}

fn enumerate_integers(p: &DenseProblem, lp: fn(&DenseProblem) -> Option<(f64, Vec<f64>)>) -> Option<(f64, Vec<f64>)> {
    let ints: Vec<usize> = (0..p.c.len()).filter(|&j| p.integer[j]).collect();
    let ranges: Vec<Vec<f64>> = ints
        .iter()
        .map(|&j| {
            let lo = p.lb[j].ceil() as i64;
            let hi = p.ub[j].floor() as i64;
            (lo..=hi).map(|v| v as f64).collect()
        })
        .collect();
    if ranges.iter().any(|r| r.is_empty()) {
        return None;
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut pos = vec![0usize; ints.len()];
    loop {
        let mut q = p.clone();
        for (k, &j) in ints.iter().enumerate() {
            q.lb[j] = ranges[k][pos[k]];
            q.ub[j] = ranges[k][pos[k]];
        }
        if let Some((v, x)) = lp(&q) {
            if best.as_ref().map_or(true, |(bv, _)| v < *bv) {
                best = Some((v, x));
            }
        }
        let mut k = 0;
        loop {
            if k == ints.len() {
                return best;
            }
            pos[k] += 1;
            if pos[k] < ranges[k].len() {
                break;
            }
            pos[k] = 0;
            k += 1;
        }
    }
}

/// LP optimum by a dense two-phase tableau simplex with Bland's rule.
/// Every column needs finite bounds. Integrality is ignored. Returns `None`
/// if infeasible.
pub fn lp_dense_simplex(p: &DenseProblem) -> Option<(f64, Vec<f64>)> {
    let n = p.c.len();
    let mut g: Vec<Vec<f64>> = Vec::new();
    let mut h: Vec<f64> = Vec::new();
    for j in 0..n {
        assert!(p.lb[j].is_finite() && p.ub[j].is_finite(), "column {j} needs finite bounds");
        let mut r = vec![0.0; n];
        r[j] = 1.0;
        g.push(r);
        h.push(p.ub[j] - p.lb[j]);
    }
    for (i, row) in p.a.iter().enumerate() {
        let shift: f64 = row.iter().zip(&p.lb).map(|(a, l)| a * l).sum();
        if p.row_hi[i].is_finite() {
            g.push(row.clone());
            h.push(p.row_hi[i] - shift);
        }
        if p.row_lo[i].is_finite() {
            g.push(row.iter().map(|v| -v).collect());
            h.push(shift - p.row_lo[i]);
        }
    }
    // Columns: shifted variables, slacks, artificials, right-hand side.
    let m = g.len();
    let width = n + 2 * m;
    let mut t = vec![vec![0.0; width + 1]; m];
    let mut basis = vec![0usize; m];
    let mut phase1 = vec![0.0; width];
    for i in 0..m {
        let sign = if h[i] >= 0.0 { 1.0 } else { -1.0 };
        for j in 0..n {
            t[i][j] = sign * g[i][j];
        }
        t[i][n + i] = sign;
        t[i][width] = sign * h[i];
        if sign > 0.0 {
            basis[i] = n + i;
        } else {
            t[i][n + m + i] = 1.0;
            basis[i] = n + m + i;
            phase1[n + m + i] = 1.0;
        }
    }
    tableau_simplex(&mut t, &mut basis, &phase1, |_| true);
    let infeas: f64 = (0..m).filter(|&i| basis[i] >= n + m).map(|i| t[i][width]).sum();
    let scale = 1.0 + h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if infeas > 1e-7 * scale {
        return None;
    }
    for i in 0..m {
        if basis[i] >= n + m {
            if let Some(j) = (0..n + m).find(|&j| t[i][j].abs() > 1e-9) {
                pivot(&mut t, &mut basis, i, j);
            }
        }
    }
    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(&p.c);
    tableau_simplex(&mut t, &mut basis, &cost, |j| j < n + m);
    let mut x = p.lb.clone();
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] += t[i][width];
        }
    }
    Some((p.c.iter().zip(&x).map(|(c, v)| c * v).sum(), x))
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, e: usize) {
    let pv = t[r][e];
    for v in t[r].iter_mut() {
        *v /= pv;
    }
    let prow = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        let f = row[e];
        if i != r && f != 0.0 {
            for (v, p) in row.iter_mut().zip(&prow) {
                *v -= f * p;
            }
        }
    }
    basis[r] = e;
}

fn tableau_simplex(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], allowed: impl Fn(usize) -> bool) {
    let width = cost.len();
    for _ in 0..100_000 {
        let reduced = |j: usize| cost[j] - t.iter().zip(basis.iter()).map(|(row, &b)| cost[b] * row[j]).sum::<f64>();
        let Some(e) = (0..width).filter(|&j| allowed(j) && !basis.contains(&j)).find(|&j| reduced(j) < -1e-9) else {
            return;
        };
        let mut leave: Option<(usize, f64)> = None;
        for (i, row) in t.iter().enumerate() {
            if row[e] > 1e-9 {
                let ratio = row[width] / row[e];
                let better = match leave {
                    None => true,
                    Some((l, best)) => ratio < best - 1e-12 || (ratio <= best + 1e-12 && basis[i] < basis[l]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let (r, _) = leave.expect("bounded variables cannot give an unbounded ray");
        pivot(t, basis, r, e);
    }
    panic!("tableau simplex did not terminate");
}

/// Normalizes the products of each factor list exactly: entry `m` is
/// `prod(factors[m]) / sum_k prod(factors[k])`.
pub fn normalized_products(factors: &[Vec<f64>]) -> Vec<f64> {
    let products: Vec<BigRational> = factors
        .iter()
        .map(|fs| fs.iter().fold(BigRational::one(), |acc, &f| acc * BigRational::from_float(f).expect("finite factor")))
        .collect();
    let total = products.iter().fold(BigRational::from_integer(BigInt::from(0)), |a, p| a + p);
    products.iter().map(|p| rational_to_f64(&(p / &total))).collect()
}

/// Exact capital recovery factor `d(1+d)^n / ((1+d)^n - 1)` for a rate given
/// as `num/den`.
pub fn annuity_factor_exact(num: i64, den: i64, years: u32) -> BigRational {
    let d = BigRational::new(BigInt::from(num), BigInt::from(den));
    let one = BigRational::one();
    let mut g = one.clone();
    for _ in 0..years {
        g = &g * (&one + &d);
    }
    &d * &g / (&g - &one)
}

/// Capital recovery factor for a lifetime of `half_years / 2` years, where
/// `(1+d)^(k/2)` is the integer square root of `(1+d)^k` carried to 40
/// decimal places.
pub fn annuity_factor_half_years(num: i64, den: i64, half_years: u32) -> f64 {
    let base = BigRational::new(BigInt::from(den + num), BigInt::from(den));
    let pow = base.pow(half_years as i32);
    let (n, d) = (pow.numer().to_biguint().unwrap(), pow.denom().to_biguint().unwrap());
    let scale = BigUint::from(10u8).pow(40);
    let root = (n * &d * &scale * &scale).sqrt();
    let g = BigRational::new(BigInt::from(root), BigInt::from(d * scale));
    let rate = BigRational::new(BigInt::from(num), BigInt::from(den));
    let one = BigRational::one();
    rational_to_f64(&(&rate * &g / (&g - &one)))
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    // Scale to keep 30 significant digits before converting.
    let scale = BigInt::from(10u8).pow(30);
    let scaled = (r * BigRational::from_integer(scale.clone())).round().to_integer();
    scaled.to_f64().unwrap() / scale.to_f64().unwrap()
}

/// `k^exponent` as an exact integer.
pub fn power_count(k: u64, exponent: u32) -> BigUint {
    BigUint::from(k).pow(exponent)
}

/// Number of decimal digits minus one, i.e. `floor(log10(v))` for `v > 0`.
pub fn floor_log10(v: &BigUint) -> usize {
    v.to_str_radix(10).len() - 1
}

/// Minimum within-cluster sum of squares over every assignment of `points`
/// to exactly `k` nonempty clusters.
pub fn best_sse_bruteforce(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    assert!(k >= 1 && k <= n && n <= 12);
    let mut best = f64::INFINITY;
    let mut assign = vec![0usize; n];
    loop {
        let mut used = vec![false; k];
        for &a in &assign {
            used[a] = true;
        }
        if used.iter().all(|&u| u) {
            best = best.min(sse(points, &assign, k));
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            assign[i] += 1;
            if assign[i] < k {
                break;
            }
            assign[i] = 0;
            i += 1;
        }
    }
}

pub fn sse(points: &[Vec<f64>], assign: &[usize], k: usize) -> f64 {
    let dim = points.first().map_or(0, |p| p.len());
    let mut total = 0.0;
    for c in 0..k {
        let members: Vec<&Vec<f64>> = points.iter().zip(assign).filter(|(_, &a)| a == c).map(|(p, _)| p).collect();
        if members.is_empty() {
            continue;
        }
        for d in 0..dim {
            let mean = members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64;
            total += members.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>();
        }
    }
    total
}

/// Standard normal CDF from an erf series and an erfc continued fraction.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 3.0 {
        // Maclaurin series of erf, adequate to ~1e-15 on this range.
        let mut sum = x;
        let mut term = x;
        let x2 = x * x;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= -x2 / k;
            let add = term / (2.0 * k + 1.0);
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        // Continued fraction evaluated from the tail.
        let mut f = x;
        for i in (1..=120).rev() {
            f = x + (i as f64 / 2.0) / f;
        }
        (-x * x).exp() / f / std::f64::consts::PI.sqrt()
    }
}
