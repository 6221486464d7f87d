//! Independent oracles shared by the integration tests.
//!
//! Every error `eps_t` is carried as an explicit coefficient vector over the
//! channel noise `eta_1..eta_t`. Variances, covariances and MMSE gains are
//! read off by dot products, so nothing here shares code with the scalar
//! recursions in the library.

#![allow(dead_code)]

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Neumaier summation.
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let v = x * y;
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

pub fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(u, v)| a * u + v).collect()
}

pub fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

pub struct SingleOracle {
    pub alpha: Vec<f64>,
    /// `mu[t-1]`, zero at `t = 1`.
    pub mu: Vec<f64>,
    /// Coefficients of `eps_t` over `eta`.
    pub eps: Vec<Vec<f64>>,
}

pub fn single_oracle(p: f64, sigma2: f64, gamma: f64, n: usize) -> SingleOracle {
    let gp = gamma * p;
    let var = |v: &[f64]| sigma2 * dot(v, v);
    let mut eps = vec![unit(n, 0).iter().map(|c| c / (12.0 * gp).sqrt()).collect::<Vec<_>>()];
    let mut alpha = vec![var(&eps[0])];
    let mut mu = vec![0.0];
    for t in 2..=n {
        let prev = &eps[t - 2];
        let k = (gp / alpha[t - 2]).sqrt();
        // Y_t - omega S_t = k eps_{t-1} + eta_t
        let innovation = axpy(k, prev, &unit(n, t - 1));
        let m = sigma2 * dot(prev, &innovation) / var(&innovation);
        let next = axpy(-m, &innovation, prev);
        alpha.push(var(&next));
        mu.push(m);
        eps.push(next);
    }
    SingleOracle { alpha, mu, eps }
}

pub struct MacOracle {
    pub alpha: [Vec<f64>; 2],
    pub mu: [Vec<f64>; 2],
    pub rho: Vec<f64>,
    pub eps: [Vec<Vec<f64>>; 2],
}

pub fn mac_oracle(g1: f64, g2: f64, sigma2: f64, n: usize) -> MacOracle {
    let var = |v: &[f64]| sigma2 * dot(v, v);
    let cov = |a: &[f64], b: &[f64]| sigma2 * dot(a, b);
    let e1: Vec<f64> = unit(n, 0).iter().map(|c| c / (12.0 * g1).sqrt()).collect();
    let e2: Vec<f64> = unit(n, 1).iter().map(|c| c / (12.0 * g2).sqrt()).collect();
    let mut eps = [vec![e1.clone(), e1], vec![vec![0.0; n], e2]];
    let mut alpha = [vec![var(&eps[0][0]), var(&eps[0][1])], vec![0.0, var(&eps[1][1])]];
    let mut mu = [vec![0.0, 0.0], vec![0.0, 0.0]];
    let mut rho = vec![0.0, 0.0];
    for t in 3..=n {
        let (p1, p2) = (eps[0][t - 2].clone(), eps[1][t - 2].clone());
        let sign = if rho[t - 2] >= 0.0 { 1.0 } else { -1.0 };
        let k1 = (g1 / alpha[0][t - 2]).sqrt();
        let k2 = sign * (g2 / alpha[1][t - 2]).sqrt();
        let innovation = axpy(k1, &p1, &axpy(k2, &p2, &unit(n, t - 1)));
        let energy = var(&innovation);
        let m1 = cov(&p1, &innovation) / energy;
        let m2 = cov(&p2, &innovation) / energy;
        let n1 = axpy(-m1, &innovation, &p1);
        let n2 = axpy(-m2, &innovation, &p2);
        let (a1, a2) = (var(&n1), var(&n2));
        rho.push(cov(&n1, &n2) / (a1 * a2).sqrt());
        alpha[0].push(a1);
        alpha[1].push(a2);
        mu[0].push(m1);
        mu[1].push(m2);
        eps[0].push(n1);
        eps[1].push(n2);
    }
    MacOracle { alpha, mu, rho, eps }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Root in (0, 1) of `rho^4 - 4 rho^2 - 2 rho + 1`, the symmetric
/// `g1 = g2 = sigma2` case of the correlation fixed point, by plain bisection.
pub fn symmetric_quartic_root() -> f64 {
    let f = |r: f64| r.powi(4) - 4.0 * r * r - 2.0 * r + 1.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    assert!(f(lo) > 0.0 && f(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
