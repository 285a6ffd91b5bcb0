//! Independent reference solvers shared by the integration tests.
#![allow(dead_code)]

/// Objective `(aᵀw)²`.
pub fn gain(a: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(w).map(|(x, y)| x * y).sum::<f64>().powi(2)
}

pub fn power(w: &[f64]) -> f64 {
    w.iter().map(|x| x * x).sum()
}

/// Every subset of `0..n` as a bit mask.
fn subsets(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0u32..1 << n).map(move |m| (0..n).map(|i| m >> i & 1 == 1).collect())
}

/// Exact max-gain optimum by enumerating which nodes sit at the cap.
pub fn max_gain_by_enumeration(a: &[f64], p_tot: f64, p_max: f64) -> Option<f64> {
    let cap = p_max.sqrt();
    let mut best: Option<f64> = None;
    for capped in subsets(a.len()) {
        let k = capped.iter().filter(|&&c| c).count() as f64;
        let rest = p_tot - k * p_max;
        let free2: f64 = a.iter().zip(&capped).filter(|(_, &c)| !c).map(|(x, _)| x * x).sum();
        let w: Vec<f64> = if free2 == 0.0 {
            if rest.abs() > 1e-12 {
                continue;
            }
            vec![cap; a.len()]
        } else {
            if rest < 0.0 {
                continue;
            }
            let mu = (rest / free2).sqrt();
            a.iter().zip(&capped).map(|(x, &c)| if c { cap } else { mu * x }).collect()
        };
        if w.iter().any(|&x| x > cap * (1.0 + 1e-12)) {
            continue;
        }
        let g = gain(a, &w);
        best = Some(best.map_or(g, |b: f64| b.max(g)));
    }
    best
}

/// Exact min-power optimum by enumerating which nodes sit at the cap.
pub fn min_power_by_enumeration(a: &[f64], target: f64, p_max: f64) -> Option<f64> {
    let cap = p_max.sqrt();
    let need = target.sqrt();
    let mut best: Option<f64> = None;
    for capped in subsets(a.len()) {
        let fixed: f64 = a.iter().zip(&capped).filter(|(_, &c)| c).map(|(x, _)| x * cap).sum();
        let free2: f64 = a.iter().zip(&capped).filter(|(_, &c)| !c).map(|(x, _)| x * x).sum();
        let mu = if free2 == 0.0 {
            if fixed + 1e-12 < need {
                continue;
            }
            0.0
        } else {
            (need - fixed) / free2
        };
        if mu < 0.0 {
            continue;
        }
        let w: Vec<f64> = a.iter().zip(&capped).map(|(x, &c)| if c { cap } else { mu * x }).collect();
        if w.iter().any(|&x| x > cap * (1.0 + 1e-12)) {
            continue;
        }
        let p = power(&w);
        best = Some(best.map_or(p, |b: f64| b.min(p)));
    }
    best
}

/// Coarse-to-fine grid search over the first `n − 1` amplitudes, with the
/// last one fixed by the equality constraint. `complete` returns the last
/// amplitude (or `None` if infeasible) and `score` is maximised.
fn grid_search(
    n: usize,
    cap: f64,
    resolution: f64,
    complete: impl Fn(&[f64]) -> Option<f64>,
    score: impl Fn(&[f64]) -> f64,
) -> Option<f64> {
    let dims = n - 1;
    let eval = |free: &[f64]| -> Option<(f64, Vec<f64>)> {
        let last = complete(free)?;
        if !(0.0..=cap * (1.0 + 1e-12)).contains(&last) {
            return None;
        }
        let mut w = free.to_vec();
        w.push(last);
        Some((score(&w), free.to_vec()))
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let consider = |best: &mut Option<(f64, Vec<f64>)>, cand: Option<(f64, Vec<f64>)>| {
        if let Some(c) = cand {
            if best.as_ref().is_none_or(|b| c.0 > b.0) {
                *best = Some(c);
            }
        }
    };
    if dims == 0 {
        return eval(&[]).map(|b| b.0);
    }
    // full sweep at a coarse step
    let coarse = 40usize;
    let mut idx = vec![0usize; dims];
    loop {
        let point: Vec<f64> = idx.iter().map(|&i| cap * i as f64 / coarse as f64).collect();
        consider(&mut best, eval(&point));
        let mut d = 0;
        while d < dims {
            idx[d] += 1;
            if idx[d] <= coarse {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == dims {
            break;
        }
    }
    // refine around the incumbent down to the requested resolution
    let mut step = cap / coarse as f64;
    while step > resolution {
        step = (step / 4.0).max(resolution);
        let centre = best.as_ref()?.1.clone();
        let span = 6i64;
        let mut off = vec![-span; dims];
        loop {
            let point: Vec<f64> =
                centre.iter().zip(&off).map(|(c, &o)| (c + o as f64 * step).clamp(0.0, cap)).collect();
            consider(&mut best, eval(&point));
            let mut d = 0;
            while d < dims {
                off[d] += 1;
                if off[d] <= span {
                    break;
                }
                off[d] = -span;
                d += 1;
            }
            if d == dims {
                break;
            }
        }
    }
    best.map(|b| b.0)
}

/// Reorders `a` so that index `d` comes last.
fn with_last(a: &[f64], d: usize) -> Vec<f64> {
    let mut p: Vec<f64> = a.iter().enumerate().filter(|&(i, _)| i != d).map(|(_, &x)| x).collect();
    p.push(a[d]);
    p
}

/// Grid-search estimate of the max-gain optimum. Each amplitude takes a turn
/// as the one fixed by the power constraint.
pub fn max_gain_by_grid(a: &[f64], p_tot: f64, p_max: f64, resolution: f64) -> Option<f64> {
    (0..a.len())
        .filter_map(|d| {
            let a = with_last(a, d);
            grid_search(
                a.len(),
                p_max.sqrt(),
                resolution,
                |free| {
                    let rest = p_tot - power(free);
                    (rest >= 0.0).then(|| rest.sqrt())
                },
                |w| gain(&a, w),
            )
        })
        .reduce(f64::max)
}

/// Grid-search estimate of the min-power optimum. Each amplitude takes a turn
/// as the one fixed by the SNR constraint.
pub fn min_power_by_grid(a: &[f64], target: f64, p_max: f64, resolution: f64) -> Option<f64> {
    let need = target.sqrt();
    (0..a.len())
        .filter_map(|d| {
            let a = with_last(a, d);
            let n = a.len();
            grid_search(
                n,
                p_max.sqrt(),
                resolution,
                |free| {
                    let partial: f64 = a.iter().zip(free).map(|(x, y)| x * y).sum();
                    Some(((need - partial) / a[n - 1]).max(0.0))
                },
                |w| -power(w),
            )
        })
        .reduce(f64::max)
        .map(|neg| -neg)
}

/// Relative gap `|x − y| / max(|y|, tiny)`.
pub fn rel_gap(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(1e-300)
}

/// Mean of `received_snr` over `draws` independent 16 dB² channels with zero
/// residual phase and unit noise, the weights redrawn by `weights` each time.
pub fn empirical_mean_snr(
    draws: usize,
    n: usize,
    seed: u64,
    mut weights: impl FnMut(&mut rand_chacha::ChaCha8Rng) -> Vec<f64>,
) -> f64 {
    use rand::SeedableRng;
    let model = cbsim_core::geometry::ShadowingModel::new(16.0, 10.0).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let phases = vec![0.0; n];
    let mut acc = 0.0;
    for _ in 0..draws {
        let g = model.sample(n, &mut rng).gains;
        let w = weights(&mut rng);
        acc += cbsim_core::geometry::received_snr(&w, &g, &phases, 1.0).unwrap();
    }
    acc / draws as f64
}

/// Outcome of one bookkeeping check.
pub enum Bookkeeping {
    Ok,
    /// The scenario refused to start because its target is out of reach.
    Infeasible,
    Violated(String),
}

/// Runs `params` once and checks conservation, monotone residuals, death
/// permanence, silence of dead nodes, trace shape and determinism.
pub fn check_bookkeeping(params: &cbsim_core::SimParams, seed: u64, max_rounds: u64) -> Bookkeeping {
    use cbsim_core::lifetime::{simulate, simulate_observed};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    let mut prev_residual: Option<Vec<f64>> = None;
    let mut prev_alive: Option<Vec<bool>> = None;
    let mut violations = Vec::new();
    let trace = simulate_observed(params, &mut ChaCha8Rng::seed_from_u64(seed), |view| {
        let e = view.energy;
        for i in 0..e.initial.len() {
            let drift = (e.initial[i] - e.residual[i] - e.consumed[i]).abs();
            if drift > 1e-12 * e.initial[i].max(1.0) {
                violations.push(format!("round {}: node {i} leaks {drift:e} J", view.round));
            }
            if e.residual[i] < 0.0 {
                violations.push(format!("round {}: node {i} residual negative", view.round));
            }
            if !e.alive[i] && view.weights[i] != 0.0 {
                violations.push(format!("round {}: dead node {i} transmits", view.round));
            }
        }
        if let Some(p) = &prev_residual {
            if p.iter().zip(&e.residual).any(|(a, b)| b > a) {
                violations.push(format!("round {}: residual increased", view.round));
            }
        }
        if let Some(p) = &prev_alive {
            if p.iter().zip(&e.alive).any(|(&was, &is)| !was && is) {
                violations.push(format!("round {}: node revived", view.round));
            }
        }
        prev_residual = Some(e.residual.clone());
        prev_alive = Some(e.alive.clone());
    });
    let trace = match trace {
        Ok(t) => t,
        Err(cbsim_core::SimError::Infeasible(_)) => return Bookkeeping::Infeasible,
        Err(e) => return Bookkeeping::Violated(format!("simulation error: {e}")),
    };
    if trace.lifetime > max_rounds {
        violations.push(format!("lifetime {} exceeds {max_rounds}", trace.lifetime));
    }
    if trace.records.len() as u64 != trace.lifetime {
        violations.push(format!("{} records for lifetime {}", trace.records.len(), trace.lifetime));
    }
    if trace.records.windows(2).any(|w| w[1].alive_fraction > w[0].alive_fraction) {
        violations.push("alive fraction increased".into());
    }
    let final_residual = prev_residual.map(|r| r.iter().sum::<f64>()).unwrap_or(trace.initial_total_j);
    if (trace.wasted.joules - final_residual).abs() > 1e-9 {
        violations.push(format!("wasted {} J but {final_residual} J left", trace.wasted.joules));
    }
    match simulate(params, &mut ChaCha8Rng::seed_from_u64(seed)) {
        Ok(again) if again == trace => {}
        _ => violations.push("rerun with the same seed differs".into()),
    }
    if violations.is_empty() {
        Bookkeeping::Ok
    } else {
        Bookkeeping::Violated(violations.join("; "))
    }
}

/// A small random scenario: up to 10 nodes, every strategy, optional second
/// link, quantisation, reallocation period and channel redraws, capped at
/// `max_rounds`.
#[allow(clippy::field_reassign_with_default)]
pub fn mini_scenario<R: rand::Rng>(rng: &mut R, max_rounds: u64) -> cbsim_core::ScenarioConfig {
    use cbsim_core::config::EnergyKind;
    use cbsim_core::lifetime::StrategyKind;
    const KINDS: [StrategyKind; 4] =
        [StrategyKind::CbEpa, StrategyKind::CbPa, StrategyKind::CentralizedMinPower, StrategyKind::CentralizedMaxGain];
    let mut cfg = cbsim_core::ScenarioConfig::default();
    cfg.name = "mini".into();
    cfg.nodes = rng.random_range(1..=10);
    cfg.destinations.count = rng.random_range(1..=2).min(cfg.nodes);
    cfg.strategy.kind = KINDS[rng.random_range(0..4)];
    cfg.strategy.levels = [0, 2, 4, 8][rng.random_range(0..4)];
    cfg.strategy.period = rng.random_range(1..=3);
    if rng.random::<bool>() {
        cfg.energy.kind = EnergyKind::Gaussian;
    }
    cfg.link.target_rate_bits = Some(rng.random_range(0.5..4.0));
    cfg.channel.redraw_period = [0, 1, 5][rng.random_range(0..3)];
    cfg.run.p_max_w = 100.0;
    cfg.run.max_rounds = max_rounds;
    cfg
}
