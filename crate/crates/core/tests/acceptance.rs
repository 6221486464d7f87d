//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use dpsk_core::harness::output::{mac_region_csv, rd_region_csv};
use dpsk_core::harness::rng::{draw_trial, RandomPlan};
use dpsk_core::harness::{run_experiment, DiagnosticKind, Execution, ExperimentOptions, ExperimentReport};
use dpsk_core::regions::{
    dpc_fb_boundary, half_log2, mac_constraints, mac_fb_region, noisy_boundary, rho_star_residual, rho_star_scale,
    solve_rho_star, unit_grid,
};
use dpsk_core::sk_dpc::{self, compute_coefficients};
use dpsk_core::sk_dpmac::{mac_coefficients, mac_run_block_with, SignRule};
use dpsk_core::{validate, DpcParams, MacParams, NoisyObsParams, RawConfig, Scheme, ValidatedConfig};

use common::*;

const SEED: u64 = 20240611;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn dpc_raw(n: u64, trials: u64, rate_fraction: f64) -> RawConfig {
    RawConfig {
        p: Some(10.0),
        q: Some(10.0),
        sigma2: Some(5.0),
        gamma: Some(0.5),
        n: Some(n),
        rate_fraction: Some(rate_fraction),
        trials: Some(trials),
        seed: Some(SEED),
        ..Default::default()
    }
}

fn mac_raw(n: u64, trials: u64, rate: f64) -> RawConfig {
    RawConfig {
        p1: Some(10.0),
        p2: Some(10.0),
        q: Some(10.0),
        sigma2: Some(5.0),
        gamma: Some(0.8),
        beta: Some(0.8),
        n: Some(n),
        rate: Some(rate),
        trials: Some(trials),
        seed: Some(SEED),
        ..Default::default()
    }
}

fn noisy_raw(trials: u64) -> RawConfig {
    RawConfig {
        p: Some(7.7),
        q: Some(10.0),
        sigma2: Some(5.0),
        sigma_z2: Some(1.0),
        gamma: Some(0.5),
        n: Some(100),
        rate_fraction: Some(0.7),
        trials: Some(trials),
        seed: Some(SEED),
        ..Default::default()
    }
}

fn run(raw: &RawConfig, scheme: Scheme) -> ExperimentReport {
    let cfg = validate(raw, scheme).expect("acceptance config is valid");
    run_experiment(&cfg, &ExperimentOptions::default()).expect("experiment runs")
}

fn run_with(cfg: &ValidatedConfig, execution: Execution) -> ExperimentReport {
    run_experiment(cfg, &ExperimentOptions { execution, ..Default::default() }).expect("experiment runs")
}

fn within_time(elapsed: Duration, limit: Option<f64>) -> bool {
    limit.is_none_or(|l| elapsed.as_secs_f64() < l)
}

fn offset_cancellation() -> Outcome {
    let params = DpcParams::new(10.0, 10.0, 5.0).unwrap();
    let (gamma, n, m) = (0.5, 50, 16);
    let coeffs = compute_coefficients(&params, gamma, n).unwrap();
    let mut worst = 0.0f64;
    let mut all_decoded = true;
    for w in 1..=m {
        let (_, mut draws) = draw_trial(&mut RandomPlan::new(SEED).trial_rng(w), &[m], n, 10.0, 5.0, None);
        draws.noise = vec![0.0; n];
        let tr = sk_dpc::run_block_with(&params, gamma, Some(&coeffs), m, w, &draws).unwrap();
        worst = worst.max((tr.theta_hat[n - 1] - tr.theta).abs());
        all_decoded &= tr.decoded();
    }
    outcome(worst <= 1e-9 && all_decoded, format!("max |theta_hat_n - theta| = {worst:.3e} (tol 1e-9) over 16 messages"))
}

fn coefficient_oracle() -> Outcome {
    let levels = [1.0, 5.0, 10.0];
    let mut worst = 0.0f64;
    for &p in &levels {
        for &q in &levels {
            for &s2 in &levels {
                for &gamma in &[0.25, 0.5, 1.0] {
                    let n = 50;
                    let c = compute_coefficients(&DpcParams::new(p, q, s2).unwrap(), gamma, n).unwrap();
                    let o = single_oracle(p, s2, gamma, n);
                    for t in 1..=n {
                        worst = worst.max(rel(c.alpha(t), o.alpha[t - 1]));
                        if t >= 2 {
                            worst = worst.max(rel(c.mu(t), o.mu[t - 1]));
                        }
                    }
                }
            }
        }
    }
    outcome(worst <= 1e-10, format!("worst relative gap {worst:.3e} (tol 1e-10), 81 configs, n = 50"))
}

fn single_user_distortion() -> Outcome {
    let r = run(&dpc_raw(100, 100_000, 0.7), Scheme::Dpc);
    let target = r.theory.distortion_finite_n;
    let gap = (r.empirical_distortion - target).abs() / target;
    outcome(
        gap <= 0.02,
        format!(
            "D_emp = {:.5} +/- {:.5}, target (Q + 99 D)/100 = {target:.5} (D = {:.5}), rel gap {:.3}% (tol 2%)",
            r.empirical_distortion,
            r.distortion_std_error,
            r.theory.distortion,
            100.0 * gap
        ),
    )
}

fn single_user_reliability() -> Outcome {
    let pe: Vec<(u64, f64, u64)> = [10, 20, 40]
        .iter()
        .map(|&n| {
            let r = run(&dpc_raw(n, 10_000, 0.7), Scheme::Dpc);
            (n, r.empirical_pe, r.messages[0])
        })
        .collect();
    let monotone = pe.windows(2).all(|w| w[1].1 <= w[0].1);
    let last = pe[2].1;
    let listing: Vec<String> = pe.iter().map(|(n, p, m)| format!("n={n} (M={m}): {p:.2e}")).collect();
    outcome(
        last <= 1e-3 && monotone,
        format!("P_e {} ; n=40 tol 1e-3, non-increasing: {monotone}", listing.join(", ")),
    )
}

fn power_contract() -> Outcome {
    let p = 10.0;
    let r = run(&dpc_raw(40, 100_000, 0.7), Scheme::Dpc);
    let mut worst_z = 0.0f64;
    for est in &r.per_symbol_power[0][1..] {
        worst_z = worst_z.max((est.mean - p).abs() / est.std_error);
    }
    let closed = r.theory.first_symbol_power.expect("message power present");
    let first = |r: &ExperimentReport| {
        let e = &r.per_symbol_power[0][0];
        (e.mean, (e.mean - closed).abs() / closed, (e.mean - closed).abs() / e.std_error)
    };
    // At 1e5 trials the 1% band is only about 2.2 standard errors wide, so
    // the time-1 check is judged on 1e6 trials; the 1e5 figure is reported.
    let (_, gap_small, z_small) = first(&r);
    let big = run(&dpc_raw(40, 1_000_000, 0.7), Scheme::Dpc);
    let (mean, gap, z) = first(&big);
    outcome(
        worst_z <= 5.0 && gap <= 0.01,
        format!(
            "t>=2: max |E[X_t^2] - P| = {worst_z:.2} SE (tol 5); t=1 at 1e6 trials: {mean:.4} vs closed form {closed:.4}, \
             rel gap {:.3}% ({z:.2} SE, tol 1%); at 1e5 trials: rel gap {:.3}% ({z_small:.2} SE)",
            100.0 * gap,
            100.0 * gap_small
        ),
    )
}

fn rho_star_solver() -> Outcome {
    let s2 = 5.0;
    let mut worst = 0.0f64;
    let levels = [0.5, 2.0, 5.0, 10.0, 40.0];
    for &g1 in &levels {
        for &g2 in &levels {
            let params = MacParams::new(g1, g2, 10.0, s2).unwrap();
            let rho = solve_rho_star(&params, 1.0, 1.0);
            let residual = rho_star_residual(&params, 1.0, 1.0, rho).abs() / rho_star_scale(&params, 1.0, 1.0);
            worst = worst.max(residual);
        }
    }
    let sym = solve_rho_star(&MacParams::new(s2, s2, 10.0, s2).unwrap(), 1.0, 1.0);
    let oracle = symmetric_quartic_root();
    let gap = (sym - oracle).abs();
    outcome(
        worst <= 1e-12 && gap <= 1e-10,
        format!("max scaled |f(rho*)| = {worst:.2e} (tol 1e-12); symmetric rho* = {sym:.12} vs quartic {oracle:.12}, gap {gap:.1e} (tol 1e-10)"),
    )
}

fn mac_rho_convergence() -> Outcome {
    let params = MacParams::new(10.0, 10.0, 10.0, 5.0).unwrap();
    let c = mac_coefficients(&params, 0.8, 0.8, 200, SignRule::Aligned).unwrap();
    let rho_star = solve_rho_star(&params, 0.8, 0.8);
    let gap = (c.rho(200) - rho_star).abs();
    outcome(
        gap <= 1e-3,
        format!(
            "rho_200 = {:.8}, rho* = {rho_star:.8}, gap {gap:.2e} (tol 1e-3); input correlation {:.8}",
            c.rho(200),
            c.input_correlation(200)
        ),
    )
}

fn mac_distortion() -> Outcome {
    let r = run(&mac_raw(200, 100_000, 0.1), Scheme::Mac);
    let target = r.theory.distortion_finite_n;
    let gap = (r.empirical_distortion - target).abs() / target;
    outcome(
        gap <= 0.02,
        format!(
            "D_emp = {:.5} +/- {:.5}, target (2Q + 198 D)/200 = {target:.5} (D = {:.5} at rho* = {:.6}), rel gap {:.3}% (tol 2%); P_e = {:.2e}",
            r.empirical_distortion,
            r.distortion_std_error,
            r.theory.distortion,
            r.theory.rho_star.unwrap_or(f64::NAN),
            100.0 * gap,
            r.empirical_pe
        ),
    )
}

fn mac_zero_noise() -> Outcome {
    let params = MacParams::new(10.0, 10.0, 10.0, 5.0).unwrap();
    let n = 60;
    let coeffs = mac_coefficients(&params, 0.8, 0.8, n, SignRule::Aligned).unwrap();
    let mut decoded = 0;
    for w1 in 1..=8u64 {
        for w2 in 1..=8u64 {
            let (_, mut draws) =
                draw_trial(&mut RandomPlan::new(SEED).trial_rng(w1 * 8 + w2), &[8, 8], n, 10.0, 5.0, None);
            draws.noise = vec![0.0; n];
            let tr = mac_run_block_with(&coeffs, [8, 8], [w1, w2], &draws).unwrap();
            decoded += tr.decoded() as u32;
        }
    }
    outcome(decoded == 64, format!("{decoded}/64 message pairs decoded exactly"))
}

fn remark_one() -> Outcome {
    let params = MacParams::new(10.0, 6.0, 10.0, 5.0).unwrap();
    let (p1, p2, q, s2) = (10.0f64, 6.0f64, 10.0f64, 5.0f64);
    let mut worst = 0.0f64;
    let mut feedback_gain = true;
    let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    for &g in &grid {
        for &b in &grid {
            let c = mac_constraints(&params, g, b, 0.0);
            let l = p1 + p2 + q + s2
                + 2.0 * ((1.0 - g) * p1 * q).sqrt()
                + 2.0 * ((1.0 - b) * p2 * q).sqrt()
                + 2.0 * ((1.0 - g) * (1.0 - b) * p1 * p2).sqrt();
            let want = [
                0.5 * (1.0 + g * p1 / s2).log2(),
                0.5 * (1.0 + b * p2 / s2).log2(),
                0.5 * (1.0 + (g * p1 + b * p2) / s2).log2(),
                q * (g * p1 + b * p2 + s2) / l,
            ];
            let got = [c.r1_max, c.r2_max, c.rsum_max, c.d_min];
            for (a, w) in got.iter().zip(want) {
                worst = worst.max((a - w).abs());
            }
            let with_fb = mac_constraints(&params, g, b, solve_rho_star(&params, g, b));
            feedback_gain &= with_fb.rsum_max > c.rsum_max;
        }
    }
    outcome(
        worst <= 1e-12 && feedback_gain,
        format!("max field gap {worst:.2e} (tol 1e-12) on 10x10 grid; sum-rate cap at rho* > at 0 everywhere: {feedback_gain}"),
    )
}

fn noisy_reduction_and_dominance() -> Outcome {
    let base = DpcParams::new(7.7, 10.0, 5.0).unwrap();
    let exact = NoisyObsParams::new(base, 0.0).unwrap();
    let fig3 = NoisyObsParams::new(base, 1.0).unwrap();
    let grid = unit_grid(100);
    let mut worst = 0.0f64;
    let mut dominated = true;
    for &g in &grid {
        let a = noisy_boundary(&exact, g);
        let b = dpc_fb_boundary(&base, g);
        worst = worst.max((a.rate - b.rate).abs()).max((a.distortion - b.distortion).abs());
        let noisy = noisy_boundary(&fig3, g);
        dominated &= noisy.rate <= b.rate && noisy.distortion >= b.distortion;
    }
    let hand = half_log2(0.5 * 7.7 / (10.0 / 11.0 + 5.0));
    let spot = (noisy_boundary(&fig3, 0.5).rate - hand).abs() < 1e-15;
    outcome(
        worst <= 1e-12 && dominated && spot,
        format!("sigma_z2 = 0 max gap {worst:.2e} (tol 1e-12) on 100 points; sigma_z2 = 1 boundary dominated pointwise: {dominated}"),
    )
}

fn noisy_simulation() -> Outcome {
    let r = run(&noisy_raw(100_000), Scheme::Noisy);
    let formula = r.theory.distortion_finite_n;
    let exact = r.theory.scheme_distortion_finite_n;
    let gap = (r.empirical_distortion - formula).abs() / formula;
    let exact_gap = (r.empirical_distortion - exact).abs() / exact;
    let flagged = r.has(DiagnosticKind::FormulaMismatch);
    let summary = format!(
        "D_emp = {:.5} +/- {:.5}; closed-form boundary (finite n) {formula:.5}, gap {:.2}%; exact scheme MMSE {exact:.5}, gap {:.2}%",
        r.empirical_distortion,
        r.distortion_std_error,
        100.0 * gap,
        100.0 * exact_gap
    );
    if gap <= 0.02 {
        outcome(!flagged, format!("agreement within 2%; {summary}"))
    } else {
        outcome(flagged, format!("disagreement beyond 2%, formula_mismatch flagged: {flagged}; {summary}"))
    }
}

fn determinism() -> Outcome {
    let mut same = true;
    let configs = [
        validate(&dpc_raw(40, 20_000, 0.7), Scheme::Dpc).unwrap(),
        validate(&mac_raw(60, 5_000, 0.3), Scheme::Mac).unwrap(),
        validate(&noisy_raw(5_000), Scheme::Noisy).unwrap(),
    ];
    for cfg in &configs {
        let a = run_with(cfg, Execution::Parallel).to_json();
        let b = run_with(cfg, Execution::Parallel).to_json();
        let c = run_with(cfg, Execution::Sequential).to_json();
        same &= a == b && a == c;
    }
    let params = MacParams::new(10.0, 10.0, 10.0, 5.0).unwrap();
    let g = unit_grid(11);
    let csv = |_: ()| mac_region_csv(&mac_fb_region(&params, &g, &g, &g).unwrap());
    same &= csv(()) == csv(());
    let base = DpcParams::new(10.0, 10.0, 5.0).unwrap();
    let rd = |_: ()| rd_region_csv(&dpsk_core::regions::dpc_fb_region(&base, &g).unwrap());
    same &= rd(()) == rd(());
    outcome(same, format!("3 reports x (parallel, parallel, sequential) and 2 region CSVs byte-identical: {same}"))
}

fn main() {
    let criteria: Vec<(u32, &str, Option<f64>, fn() -> Outcome)> = vec![
        (1, "offset cancellation", Some(1.0), offset_cancellation),
        (2, "coefficient oracle", Some(5.0), coefficient_oracle),
        (3, "single-user distortion", Some(60.0), single_user_distortion),
        (4, "single-user reliability", Some(60.0), single_user_reliability),
        (5, "power contract", None, power_contract),
        (6, "rho* solver", None, rho_star_solver),
        (7, "MAC rho convergence", Some(1.0), mac_rho_convergence),
        (8, "MAC distortion", Some(120.0), mac_distortion),
        (9, "MAC zero-noise decode", None, mac_zero_noise),
        (10, "no-feedback slice", None, remark_one),
        (11, "noisy-observation reduction", None, noisy_reduction_and_dominance),
        (12, "noisy-observation simulation", None, noisy_simulation),
        (13, "determinism", None, determinism),
    ];
    let mut failed = Vec::new();
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let timely = within_time(elapsed, limit);
        let pass = out.pass && timely;
        let budget = limit.map(|l| format!(", limit {l} s")).unwrap_or_default();
        println!(
            "{} [{id:>2}] {name}: {} ({:.2} s{budget})",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 13 criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
