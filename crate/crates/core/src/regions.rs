//! Closed-form rate–distortion regions and the limiting MAC correlation.
//!
//! Every region here is a union over power splits (and, for the MAC, over an
//! input correlation) of simple constraint sets, so the calculators return the
//! generating parameters next to each boundary value instead of a frontier.
//! [`pareto_frontier`] does the reduction when one is wanted.

use serde::Serialize;

use crate::error::RegionError;
use crate::noisy_obs::make_equivalent;
use crate::params::{DpcParams, MacParams, NoisyObsParams};

/// `(1/2) log2(1 + snr)`.
pub fn half_log2(snr: f64) -> f64 {
    0.5 * (1.0 + snr).log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RdPoint {
    pub gamma: f64,
    pub rate: f64,
    pub distortion: f64,
}

/// Rate cap and minimum distortion of the single-user region at split `gamma`.
pub fn dpc_fb_boundary(params: &DpcParams, gamma: f64) -> RdPoint {
    let (p, q, s2) = (params.p(), params.q(), params.sigma2());
    let msg = gamma * p;
    let fwd = (q.sqrt() + ((1.0 - gamma) * p).sqrt()).powi(2);
    RdPoint {
        gamma,
        rate: half_log2(msg / s2),
        distortion: q * (msg + s2) / (fwd + msg + s2),
    }
}

/// The four caps of the MAC region for one `(gamma, beta, rho)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacRegionConstraints {
    pub gamma: f64,
    pub beta: f64,
    pub rho: f64,
    pub r1_max: f64,
    pub r2_max: f64,
    pub rsum_max: f64,
    pub d_min: f64,
}

/// `L(gamma, beta)`: received power when both encoders forward the state
/// coherently and the message parts are uncorrelated.
pub fn mac_load(params: &MacParams, gamma: f64, beta: f64) -> f64 {
    let (p1, p2, q, s2) = (params.p1(), params.p2(), params.q(), params.sigma2());
    p1 + p2
        + q
        + s2
        + 2.0 * ((1.0 - gamma) * p1 * q).sqrt()
        + 2.0 * ((1.0 - beta) * p2 * q).sqrt()
        + 2.0 * ((1.0 - gamma) * (1.0 - beta) * p1 * p2).sqrt()
}

pub fn mac_constraints(params: &MacParams, gamma: f64, beta: f64, rho: f64) -> MacRegionConstraints {
    let (q, s2) = (params.q(), params.sigma2());
    let g1 = gamma * params.p1();
    let g2 = beta * params.p2();
    let coherent = 2.0 * (g1 * g2).sqrt() * rho;
    let residual = 1.0 - rho * rho;
    MacRegionConstraints {
        gamma,
        beta,
        rho,
        r1_max: half_log2(g1 * residual / s2),
        r2_max: half_log2(g2 * residual / s2),
        rsum_max: half_log2((g1 + g2 + coherent) / s2),
        d_min: q * (g1 + g2 + s2 + coherent) / (mac_load(params, gamma, beta) + coherent),
    }
}

/// Region without feedback, written out on its own so it can be compared
/// against the `rho = 0` slice of [`mac_constraints`].
pub fn mac_nofb_constraints(params: &MacParams, gamma: f64, beta: f64) -> MacRegionConstraints {
    let s2 = params.sigma2();
    let g1 = gamma * params.p1();
    let g2 = beta * params.p2();
    MacRegionConstraints {
        gamma,
        beta,
        rho: 0.0,
        r1_max: half_log2(g1 / s2),
        r2_max: half_log2(g2 / s2),
        rsum_max: half_log2((g1 + g2) / s2),
        d_min: params.q() * (g1 + g2 + s2) / mac_load(params, gamma, beta),
    }
}

/// `f(rho) = s2 (g1 + g2 + 2 sqrt(g1 g2) rho + s2) - (g2 (1 - rho^2) + s2)(g1 (1 - rho^2) + s2)`.
///
/// Its root in (0, 1) is where the two individual caps add up to the sum cap.
pub fn rho_star_residual(params: &MacParams, gamma: f64, beta: f64, rho: f64) -> f64 {
    let s2 = params.sigma2();
    let g1 = gamma * params.p1();
    let g2 = beta * params.p2();
    let residual = 1.0 - rho * rho;
    s2 * (g1 + g2 + 2.0 * (g1 * g2).sqrt() * rho + s2) - (g2 * residual + s2) * (g1 * residual + s2)
}

/// Natural magnitude of the terms in [`rho_star_residual`], for relative
/// tolerances.
pub fn rho_star_scale(params: &MacParams, gamma: f64, beta: f64) -> f64 {
    let s2 = params.sigma2();
    (gamma * params.p1() + s2) * (beta * params.p2() + s2)
}

pub const BISECTION_MAX_ITER: usize = 200;
pub const BISECTION_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    pub root: f64,
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

/// Bisection on `[lo, hi]` with `f(lo) <= 0 <= f(hi)` (either orientation is
/// accepted). `on_step` sees every bracket, including the initial one.
pub fn bisect<F, S>(f: F, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize, mut on_step: S) -> Option<Bisection>
where
    F: Fn(f64) -> f64,
    S: FnMut(f64, f64),
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(Bisection { root: lo, lo, hi: lo, iterations: 0 });
    }
    if f_hi == 0.0 {
        return Some(Bisection { root: hi, lo: hi, hi, iterations: 0 });
    }
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    let mut iterations = 0;
    on_step(lo, hi);
    while iterations < max_iter && hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        iterations += 1;
        if f_mid == 0.0 {
            return Some(Bisection { root: mid, lo: mid, hi: mid, iterations });
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        on_step(lo, hi);
    }
    Some(Bisection { root: 0.5 * (lo + hi), lo, hi, iterations })
}

/// Limiting error correlation of the two-user feedback scheme.
///
/// Zero when either encoder spends no power on its message.
pub fn solve_rho_star(params: &MacParams, gamma: f64, beta: f64) -> f64 {
    solve_rho_star_with(params, gamma, beta, |_, _| {})
}

pub fn solve_rho_star_with<S: FnMut(f64, f64)>(params: &MacParams, gamma: f64, beta: f64, on_step: S) -> f64 {
    if gamma * params.p1() == 0.0 || beta * params.p2() == 0.0 {
        return 0.0;
    }
    let f = |rho| rho_star_residual(params, gamma, beta, rho);
    match bisect(f, 0.0, 1.0, BISECTION_TOL, BISECTION_MAX_ITER, on_step) {
        // f(1) = s2 (g1 + g2 + 2 sqrt(g1 g2)) > 0, so the root is never 1.
        Some(b) => b.root.min(1.0 - f64::EPSILON),
        None => 0.0,
    }
}

/// Caps achieved by the feedback scheme: [`mac_constraints`] at `rho*`.
pub fn mac_fb_operating_point(params: &MacParams, gamma: f64, beta: f64) -> MacRegionConstraints {
    mac_constraints(params, gamma, beta, solve_rho_star(params, gamma, beta))
}

pub fn check_grid(name: &'static str, grid: &[f64]) -> Result<(), RegionError> {
    if grid.is_empty() {
        return Err(RegionError::EmptyGrid(name));
    }
    let in_range = grid.iter().all(|v| (0.0..=1.0).contains(v));
    let ascending = grid.windows(2).all(|w| w[0] < w[1]);
    if in_range && ascending {
        Ok(())
    } else {
        Err(RegionError::InvalidGrid(name))
    }
}

/// Cartesian sweep of [`mac_constraints`], gamma outermost and rho innermost.
pub fn mac_fb_region(
    params: &MacParams,
    gamma_grid: &[f64],
    beta_grid: &[f64],
    rho_grid: &[f64],
) -> Result<Vec<MacRegionConstraints>, RegionError> {
    check_grid("gamma", gamma_grid)?;
    check_grid("beta", beta_grid)?;
    check_grid("rho", rho_grid)?;
    let mut rows = Vec::with_capacity(gamma_grid.len() * beta_grid.len() * rho_grid.len());
    for &g in gamma_grid {
        for &b in beta_grid {
            rows.extend(rho_grid.iter().map(|&r| mac_constraints(params, g, b, r)));
        }
    }
    Ok(rows)
}

/// Region reachable without feedback, one row per `(gamma, beta)`.
pub fn mac_nofb_region(
    params: &MacParams,
    gamma_grid: &[f64],
    beta_grid: &[f64],
) -> Result<Vec<MacRegionConstraints>, RegionError> {
    check_grid("gamma", gamma_grid)?;
    check_grid("beta", beta_grid)?;
    Ok(gamma_grid
        .iter()
        .flat_map(|&g| beta_grid.iter().map(move |&b| mac_nofb_constraints(params, g, b)))
        .collect())
}

/// Boundary of the region achieved by the feedback scheme when the
/// transmitter sees the state through AWGN of variance `sigma_z2`.
pub fn noisy_boundary(params: &NoisyObsParams, gamma: f64) -> RdPoint {
    let base = params.base();
    let (p, q) = (base.p(), base.q());
    let eq = make_equivalent(params);
    let kappa = eq.kappa;
    let msg = gamma * p;
    let fwd = ((kappa * q).sqrt() + ((1.0 - gamma) * p).sqrt()).powi(2);
    let noise = eq.noise_var_eff;
    RdPoint {
        gamma,
        rate: half_log2(msg / noise),
        distortion: q * (msg + noise + (1.0 - kappa) * fwd) / (msg + fwd + noise),
    }
}

pub fn dpc_fb_region(params: &DpcParams, gamma_grid: &[f64]) -> Result<Vec<RdPoint>, RegionError> {
    check_grid("gamma", gamma_grid)?;
    Ok(gamma_grid.iter().map(|&g| dpc_fb_boundary(params, g)).collect())
}

pub fn noisy_region(params: &NoisyObsParams, gamma_grid: &[f64]) -> Result<Vec<RdPoint>, RegionError> {
    check_grid("gamma", gamma_grid)?;
    Ok(gamma_grid.iter().map(|&g| noisy_boundary(params, g)).collect())
}

/// `k` evenly spaced points covering [0, 1]; a single point sits at 1.
pub fn unit_grid(k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..k).map(|i| i as f64 / (k - 1) as f64).collect(),
    }
}

/// Non-dominated points (higher rate, lower distortion), ascending in rate.
pub fn pareto_frontier(points: &[RdPoint]) -> Vec<RdPoint> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| b.rate.total_cmp(&a.rate).then(a.distortion.total_cmp(&b.distortion)));
    let mut best = f64::INFINITY;
    let mut front: Vec<RdPoint> = sorted
        .into_iter()
        .filter(|p| {
            let keep = p.distortion < best;
            best = best.min(p.distortion);
            keep
        })
        .collect();
    front.reverse();
    front
}
