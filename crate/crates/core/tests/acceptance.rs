//! End-to-end acceptance checks at desk scale (N = 100, 200 runs).
//!
//! Prints one PASS/FAIL line per criterion and exits non-zero if any fails.

mod common;

use std::process::ExitCode;

use cbsim_core::allocation::{analytic_average_snr, cbepa_weight, solve_max_gain, solve_min_power, ReiStats};
use cbsim_core::config::{preset, preset_group, ScenarioConfig};
use cbsim_core::geometry::ShadowingModel;
use cbsim_core::montecarlo::{compare_strategies, Comparison, EnsembleResult};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RUNS: usize = 200;
const SEED: u64 = 1;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn group(name: &str, tweak: impl Fn(&mut ScenarioConfig)) -> Comparison {
    let mut cfgs = preset_group(name).expect("known group");
    cfgs.iter_mut().for_each(tweak);
    compare_strategies(&cfgs, RUNS, SEED, 0).expect("ensemble runs")
}

fn by_name<'a>(cmp: &'a Comparison, name: &str) -> &'a EnsembleResult {
    cmp.ensembles.iter().find(|e| e.name == name).expect("scenario present")
}

fn link_budget() -> Verdict {
    let cfg = preset("paper-ex1-uniform").unwrap();
    let p_tx = cfg.link_budget().required_tx_power_db(11.76);
    verdict((p_tx - 11.76).abs() <= 1e-9, format!("P_Tx = {p_tx:.12} dB"))
}

fn analytic_vs_empirical_snr() -> Verdict {
    let ch = ShadowingModel::new(16.0, 10.0).unwrap().channel_stats();
    let w = cbepa_weight(15.0, 100, &ch, 1.0).unwrap();
    let epa = empirical_mean_snr(100_000, 100, 101, |_| vec![w; 100]);
    let epa_gap = rel_gap(epa, 15.0);

    let rei = ReiStats::from_normalized(0.5, 1.0 / 12.0);
    let scale = 0.01;
    let target = analytic_average_snr(scale, 100, &rei, &ch, 1.0);
    let pa = empirical_mean_snr(100_000, 100, 102, |rng| (0..100).map(|_| scale * rng.random::<f64>()).collect());
    let pa_gap = rel_gap(pa, target);
    verdict(
        epa_gap < 0.02 && pa_gap < 0.02,
        format!("equal power off by {:.2}%, uniform REI off by {:.2}%", epa_gap * 100.0, pa_gap * 100.0),
    )
}

/// Wasted-energy targets of the first example.
fn ex1_wasted(cmp: &Comparison) -> Verdict {
    let epa_u = by_name(cmp, "paper-ex1-uniform-epa").wasted_pct_mean;
    let pa_u = by_name(cmp, "paper-ex1-uniform").wasted_pct_mean;
    let epa_g = by_name(cmp, "paper-ex1-gaussian-epa").wasted_pct_mean;
    let pa_g = by_name(cmp, "paper-ex1-gaussian").wasted_pct_mean;
    let checks = [(epa_u - 42.0).abs() <= 5.0, (pa_u - 14.0).abs() <= 5.0, pa_g < epa_g];
    verdict(
        checks.iter().all(|&c| c),
        format!(
            "uniform: equal power {epa_u:.2}% (42±5 {}), allocation {pa_u:.2}% (14±5 {}); \
             gaussian: allocation {pa_g:.2}% < equal power {epa_g:.2}% {}",
            ok(checks[0]),
            ok(checks[1]),
            ok(checks[2])
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "MISSED"
    }
}

/// Coefficient of determination of a least-squares line through `(x, y)`.
fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

fn alive_at(e: &EnsembleResult, round: usize) -> f64 {
    e.rounds.get(round - 1).map_or(0.0, |r| r.alive_fraction)
}

/// Shape of the alive-fraction curves in the first example.
fn ex1_shape(cmp: &Comparison) -> Verdict {
    let epa = by_name(cmp, "paper-ex1-uniform-epa");
    let pa = by_name(cmp, "paper-ex1-uniform");
    let span = (0.8 * epa.lifetime.mean).floor() as usize;
    let x: Vec<f64> = (1..=span).map(|t| t as f64).collect();
    let y: Vec<f64> = (1..=span).map(|t| alive_at(epa, t)).collect();
    let r2 = r_squared(&x, &y);
    let half = (epa.lifetime.mean / 2.0).round() as usize;
    let (a_pa, a_epa) = (alive_at(pa, half), alive_at(epa, half));
    verdict(
        r2 >= 0.98 && a_pa > a_epa,
        format!(
            "equal-power R² = {r2:.4} over rounds 1..{span}; alive at round {half}: allocation {a_pa:.4} vs equal power {a_epa:.4}"
        ),
    )
}

fn ex2_multi_link(cmp: &Comparison) -> Verdict {
    let single = by_name(cmp, "paper-ex2-single-link");
    let multi = by_name(cmp, "paper-ex2-multi-link");
    let (r1, rk) = (single.rounds[0].rate_bits, multi.rounds[0].rate_bits);
    let rate_gap = rel_gap(rk, r1);
    let (s1, sk) = (single.rounds[0].snr_db, multi.rounds[0].snr_db);
    let (t1, tk) = (single.lifetime.mean, multi.lifetime.mean);
    verdict(
        rate_gap <= 0.10 && s1 > sk && tk >= t1,
        format!(
            "round-1 rate {rk:.3} vs {r1:.3} bits/s/Hz ({:.1}% apart); SNR {s1:.2} dB single vs {sk:.2} dB per link; \
             lifetime {tk:.1} multi vs {t1:.1} single",
            rate_gap * 100.0
        ),
    )
}

fn ex3_bit_rate(cmp: &Comparison) -> Verdict {
    let ratio = by_name(cmp, "paper-ex3-rate3").lifetime.mean / by_name(cmp, "paper-ex3-rate4").lifetime.mean;
    verdict((1.7..=2.4).contains(&ratio), format!("lifetime ratio 3 bits / 4 bits = {ratio:.3}"))
}

fn ex4_quantization(cmp: &Comparison) -> Verdict {
    let [l2, l4, l8] = ["paper-ex4-levels2", "paper-ex4-levels4", "paper-ex4-levels8"].map(|n| by_name(cmp, n));
    let life = l8.lifetime.mean >= l4.lifetime.mean && l4.lifetime.mean >= l2.lifetime.mean;
    let waste = l8.wasted_pct_mean <= l4.wasted_pct_mean && l4.wasted_pct_mean <= l2.wasted_pct_mean;
    verdict(
        life && waste,
        format!(
            "lifetime L8 {:.1} / L4 {:.1} / L2 {:.1}; wasted L8 {:.2}% / L4 {:.2}% / L2 {:.2}%",
            l8.lifetime.mean,
            l4.lifetime.mean,
            l2.lifetime.mean,
            l8.wasted_pct_mean,
            l4.wasted_pct_mean,
            l2.wasted_pct_mean
        ),
    )
}

fn solver_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=4);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
        let p_max = rng.random_range(0.2..1.5);

        let p_tot = rng.random_range(0.1..1.0) * n as f64 * p_max;
        let got = gain(&a, &solve_max_gain(&a, p_tot, p_max).unwrap().effective);
        let grid = max_gain_by_grid(&a, p_tot, p_max, 1e-3).unwrap();
        worst = worst.max(rel_gap(got, grid));
        if got < grid * (1.0 - 1e-9) {
            return verdict(false, format!("max-gain beaten by grid on a = {a:?}: {got} < {grid}"));
        }

        let reach: f64 = a.iter().map(|x| x * p_max.sqrt()).sum();
        let target = (rng.random_range(0.1..0.95) * reach).powi(2);
        let got = power(&solve_min_power(&a, target, p_max).unwrap().effective);
        let grid = min_power_by_grid(&a, target, p_max, 1e-3).unwrap();
        worst = worst.max(rel_gap(got, grid));
        if got > grid * (1.0 + 1e-9) {
            return verdict(false, format!("min-power beaten by grid on a = {a:?}: {got} > {grid}"));
        }
    }
    verdict(worst <= 1e-3, format!("largest objective gap to the 1e-3 grid: {worst:.2e}"))
}

fn bookkeeping_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut checked, mut refused) = (0, 0);
    for i in 0..1000u64 {
        let cfg = mini_scenario(&mut rng, 50);
        match check_bookkeeping(&cfg.resolve().unwrap(), 1_000 + i, 50) {
            Bookkeeping::Ok => checked += 1,
            Bookkeeping::Infeasible => refused += 1,
            Bookkeeping::Violated(msg) => return verdict(false, format!("scenario {i}: {msg}")),
        }
    }
    verdict(true, format!("{checked} scenarios clean, {refused} refused as infeasible at start"))
}

fn main() -> ExitCode {
    let ex1 = group("paper-ex1", |_| {});
    let ex1_phase = group("paper-ex1", |c| c.channel.phase_error_deg_bound = 5.0);
    let ex1_sync = group("paper-ex1", |c| c.channel.phase_error_deg_bound = 0.0);
    let ex2 = group("paper-ex2", |_| {});
    let ex3 = group("paper-ex3", |_| {});
    let ex4 = group("paper-ex4", |_| {});

    let robust = {
        let (w, s) = (ex1_wasted(&ex1_phase), ex1_shape(&ex1_phase));
        let sync = ex1_wasted(&ex1_sync);
        verdict(
            w.pass && s.pass,
            format!("with ±5°: [{}] [{}]; perfectly synchronised reference: [{}]", w.detail, s.detail, sync.detail),
        )
    };

    let results = [
        ("C1 link budget", link_budget()),
        ("C2 analytic vs empirical SNR", analytic_vs_empirical_snr()),
        ("C3 Ex.1 wasted energy", ex1_wasted(&ex1)),
        ("C4 Ex.1 alive-fraction shape", ex1_shape(&ex1)),
        ("C5 Ex.2 multi-link", ex2_multi_link(&ex2)),
        ("C6 Ex.3 bit-rate lifetime ratio", ex3_bit_rate(&ex3)),
        ("C7 Ex.4 quantization ordering", ex4_quantization(&ex4)),
        ("C8 centralized solvers vs grid oracle", solver_oracles()),
        ("C9 bookkeeping property suite", bookkeeping_suite()),
        ("C10 Ex.1 under ±5° phase errors", robust),
    ];
    let mut failed = 0;
    for (name, v) in &results {
        println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
