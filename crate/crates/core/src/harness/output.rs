//! CSV rendering. Numbers use 12 significant digits, `%g` style.

use std::fmt::Write;

use super::experiment::{ExperimentReport, Trace};
use super::sweep::SweepRow;
use crate::regions::{MacRegionConstraints, RdPoint};

/// `%.12g`: fixed notation for exponents in `[-4, 12)`, scientific otherwise,
/// trailing zeros trimmed.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp) as usize;
        trim(format!("{:.*}", decimals, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa.to_string()), sign, exp.abs())
    }
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn row(out: &mut String, values: &[f64]) {
    let cells: Vec<String> = values.iter().map(|&v| fmt_num(v)).collect();
    writeln!(out, "{}", cells.join(",")).unwrap();
}

pub fn rd_region_csv(points: &[RdPoint]) -> String {
    let mut out = String::from("gamma,rate,distortion\n");
    for p in points {
        row(&mut out, &[p.gamma, p.rate, p.distortion]);
    }
    out
}

pub fn noisy_region_csv(points: &[RdPoint], sigma_z2: f64) -> String {
    let mut out = String::from("gamma,rate,distortion,sigma_z2\n");
    for p in points {
        row(&mut out, &[p.gamma, p.rate, p.distortion, sigma_z2]);
    }
    out
}

pub fn mac_region_csv(rows: &[MacRegionConstraints]) -> String {
    let mut out = String::from("gamma,beta,rho,r1_max,r2_max,rsum_max,d_min\n");
    for c in rows {
        row(&mut out, &[c.gamma, c.beta, c.rho, c.r1_max, c.r2_max, c.rsum_max, c.d_min]);
    }
    out
}

pub fn trace_csv(trace: &Trace) -> String {
    match trace {
        Trace::Single(t) => {
            let mut out = String::from("t,X,Y,theta_hat,S,S_hat\n");
            for i in 0..t.n() {
                row(&mut out, &[(i + 1) as f64, t.x[i], t.y[i], t.theta_hat[i], t.s[i], t.s_hat[i]]);
            }
            out
        }
        Trace::Mac(t) => {
            let mut out = String::from("t,X1,X2,Y,theta1_hat,theta2_hat,S,S_hat\n");
            for i in 0..t.n() {
                row(
                    &mut out,
                    &[(i + 1) as f64, t.x1[i], t.x2[i], t.y[i], t.theta1_hat[i], t.theta2_hat[i], t.s[i], t.s_hat[i]],
                );
            }
            out
        }
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let users = rows.first().map(|r| r.rate_caps.len()).unwrap_or(1);
    let exact = rows.first().is_some_and(|r| r.exact_obs_rate.is_some());
    let mut out = String::from("gamma,beta");
    for u in 1..=users {
        write!(out, ",rate{u}").unwrap();
    }
    out.push_str(
        ",empirical_pe,pe_ci_half_width,empirical_distortion,distortion_std_error,\
         theory_distortion,theory_distortion_finite_n,scheme_distortion_finite_n",
    );
    for u in 1..=users {
        write!(out, ",rate_cap{u}").unwrap();
    }
    if exact {
        out.push_str(",exact_obs_rate,exact_obs_distortion");
    }
    out.push('\n');
    for r in rows {
        let mut v = vec![r.gamma, r.beta];
        v.extend(&r.rates);
        v.extend([
            r.empirical_pe,
            r.pe_ci_half_width,
            r.empirical_distortion,
            r.distortion_std_error,
            r.theory_distortion,
            r.theory_distortion_finite_n,
            r.scheme_distortion_finite_n,
        ]);
        v.extend(&r.rate_caps);
        if exact {
            v.extend([r.exact_obs_rate.unwrap_or(f64::NAN), r.exact_obs_distortion.unwrap_or(f64::NAN)]);
        }
        row(&mut out, &v);
    }
    out
}

/// One-row summary of a report.
pub fn report_csv(r: &ExperimentReport) -> String {
    let users = r.empirical_powers.len();
    let mut out = String::from(
        "n,trials,seed,empirical_pe,pe_ci_half_width,empirical_distortion,distortion_std_error,\
         theory_distortion,theory_distortion_finite_n,scheme_distortion_finite_n",
    );
    for u in 1..=users {
        write!(out, ",rate{u},power{u},theory_power{u}").unwrap();
    }
    out.push('\n');
    let mut v = vec![
        r.n as f64,
        r.trials as f64,
        r.seed as f64,
        r.empirical_pe,
        r.pe_ci_half_width,
        r.empirical_distortion,
        r.distortion_std_error,
        r.theory.distortion,
        r.theory.distortion_finite_n,
        r.theory.scheme_distortion_finite_n,
    ];
    for u in 0..users {
        v.extend([r.rates[u], r.empirical_powers[u], r.theory.powers[u]]);
    }
    let mut cells: Vec<String> = v.iter().map(|&x| fmt_num(x)).collect();
    // Counts and seeds print as integers whatever their size.
    cells[1] = r.trials.to_string();
    cells[2] = r.seed.to_string();
    writeln!(out, "{}", cells.join(",")).unwrap();
    out
}
