//! The five experiment drivers. The CSV sweeps are deterministic functions
//! of the config; the report commands run seeded Monte-Carlo sweeps whose
//! reductions (max over samples) are order-independent, so serial and
//! parallel executions emit identical bytes.

use std::fs;

use entaep::entropy::{shannon, Distribution};
use entaep::locc::{
    check_cond_pure_distance, check_max_eig, check_outcome_prob_lower, compose_and_discard,
    merged_density, monotone_avg_check, random_one_step, random_protocol, Branch,
    ConditionallyPureState, OneStepChannel,
};
use entaep::measures::{
    check_additivity, check_direct_sum_identity, check_log_boundedness, continuity_bound,
    evaluate, MeasureSpec,
};
use entaep::random::{random_density, random_distribution, random_state, rng_from_seed};
use entaep::serial::state_from_json;
use entaep::smoothing::{phi_estimate, regularized_smooth_h0};
use entaep::tensor::{
    ghz, tensor_product, trace_distance, trace_distance_pure, MultipartiteState,
};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ClassicalAepConfig, Config, QuantumAepConfig, SweepConfig};

pub struct RunOutput {
    pub text: String,
    pub pass: bool,
}

pub fn dispatch(cfg: &Config) -> Result<RunOutput, String> {
    match cfg {
        Config::ClassicalAep(c) => classical_aep(c),
        Config::QuantumAep(c) => quantum_aep(c),
        Config::Axioms(c) => Ok(axioms(c)),
        Config::LoccCheck(c) => Ok(locc_check(c)),
        Config::Appendix(c) => Ok(appendix(c)),
    }
}

/// Formats a float CSV cell with 17 significant digits.
fn cell(x: f64) -> String {
    format!("{x:.16e}")
}

/// Sorted, deduplicated sweep grid; rows are canonical in (n, ε).
fn grid(ns: &[usize], epsilons: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let mut eps = epsilons.to_vec();
    eps.sort_by(f64::total_cmp);
    eps.dedup_by(|a, b| a == b);
    (ns, eps)
}

fn classical_aep(cfg: &ClassicalAepConfig) -> Result<RunOutput, String> {
    let weights = match (&cfg.distribution, &cfg.distribution_path) {
        (Some(w), None) => w.clone(),
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("reading {}: {e}", path.display()))?;
            serde_json::from_str::<Vec<f64>>(&text)
                .map_err(|e| format!("parsing {}: {e}", path.display()))?
        }
        _ => unreachable!("config validated"),
    };
    let p = Distribution::normalized(weights).map_err(|e| e.to_string())?;
    let h = shannon(&p).map_err(|e| e.to_string())?;

    let (ns, eps) = grid(&cfg.ns, &cfg.epsilons);
    let points: Vec<(usize, f64)> = ns
        .iter()
        .flat_map(|&n| eps.iter().map(move |&e| (n, e)))
        .collect();
    let rows: Vec<String> = points
        .par_iter()
        .map(|&(n, e)| {
            let rate = regularized_smooth_h0(&p, e, n).map_err(|err| err.to_string())?;
            Ok(format!(
                "{n},{},{},{},{}\n",
                cell(e),
                cell(rate),
                cell(h),
                cell(rate - h)
            ))
        })
        .collect::<Result<_, String>>()?;

    let mut text = String::from("n,epsilon,rate,shannon,gap\n");
    text.extend(rows);
    Ok(RunOutput { text, pass: true })
}

fn quantum_aep(cfg: &QuantumAepConfig) -> Result<RunOutput, String> {
    let text = match (&cfg.state, &cfg.state_path) {
        (Some(value), None) => value.to_string(),
        (None, Some(path)) => {
            fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?
        }
        _ => unreachable!("config validated"),
    };
    let psi = state_from_json(&text).map_err(|e| e.to_string())?;
    let k = psi.num_parties();
    if cfg.theta.len() != k {
        return Err(format!(
            "theta has {} weights, the state has {k} parties",
            cfg.theta.len()
        ));
    }
    // The estimate targets the weighted max-entropy of the marginals, so
    // every cut carries order zero.
    let spec = MeasureSpec::weighted_marginal_renyi(
        cfg.theta.iter().enumerate().map(|(j, &w)| (j, w, 0.0)).collect(),
    )
    .map_err(|e| e.to_string())?;

    let (ns, eps) = grid(&cfg.ns, &cfg.epsilons);
    let estimates: Vec<(f64, entaep::smoothing::PhiEstimate)> = eps
        .par_iter()
        .map(|&e| {
            phi_estimate(&spec, &psi, e, &ns)
                .map(|est| (e, est))
                .map_err(|err| err.to_string())
        })
        .collect::<Result<_, String>>()?;

    let mut rows: Vec<(usize, f64, String)> = Vec::new();
    for (e, est) in &estimates {
        for row in &est.rows {
            let bounds = row
                .rank_bounds
                .iter()
                .map(|b| b.to_string())
                .collect::<Vec<_>>()
                .join(";");
            rows.push((
                row.n,
                *e,
                format!(
                    "{},{},{bounds},{},{},{}\n",
                    row.n,
                    cell(*e),
                    cell(row.value),
                    cell(est.analytic_limit),
                    cell(row.gap)
                ),
            ));
        }
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut text = String::from("n,epsilon,rank_bounds,estimate,limit,gap\n");
    text.extend(rows.into_iter().map(|(_, _, line)| line));
    Ok(RunOutput { text, pass: true })
}

#[derive(Serialize)]
struct ReportRow {
    anchor: &'static str,
    samples: usize,
    worst: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct Report {
    command: &'static str,
    seed: u64,
    samples: usize,
    rows: Vec<ReportRow>,
    pass: bool,
}

fn report(command: &'static str, cfg: &SweepConfig, rows: Vec<ReportRow>) -> RunOutput {
    let pass = rows.iter().all(|r| r.pass);
    let report = Report {
        command,
        seed: cfg.seed,
        samples: cfg.samples,
        rows,
        pass,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    RunOutput { text, pass }
}

/// Per-sample generator: distinct stream per (seed, property, index).
fn sample_rng(seed: u64, salt: u64, i: usize) -> ChaCha8Rng {
    rng_from_seed(
        seed ^ salt
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(i as u64),
    )
}

/// Max of a per-sample statistic over the sweep; order-independent, so the
/// parallel reduction is deterministic.
fn sweep_max(samples: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    (0..samples)
        .into_par_iter()
        .map(&f)
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

fn shannon_cuts(k: usize, rng: &mut impl Rng) -> MeasureSpec {
    let w = random_distribution(k, rng);
    MeasureSpec::weighted_marginal_renyi((0..k).map(|j| (j, w.weights()[j], 1.0)).collect())
        .unwrap()
}

fn random_dims(k: usize, max: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..k).map(|_| rng.gen_range(2..=max)).collect()
}

fn axioms(cfg: &SweepConfig) -> RunOutput {
    let (seed, samples) = (cfg.seed, cfg.samples);
    let rows = vec![
        row("ghz-normalization", samples, 1e-10, sweep_max(samples, |i| {
            let mut rng = sample_rng(seed, 1, i);
            let k = 2 + i % 3;
            let w = random_distribution(k, &mut rng);
            let spec = MeasureSpec::weighted_marginal_renyi(
                (0..k)
                    .map(|j| (j, w.weights()[j], rng.gen_range(0.0..=1.0)))
                    .collect(),
            )
            .unwrap();
            (evaluate(&spec, &ghz(k, 2).unwrap()).unwrap() - 1.0).abs()
        })),
        row("additivity", samples, 1e-9, sweep_max(samples, |i| {
            let mut rng = sample_rng(seed, 2, i);
            let psi = random_state(&random_dims(3, 3, &mut rng), &mut rng);
            let phi = random_state(&random_dims(3, 3, &mut rng), &mut rng);
            let spec = if i % 4 == 3 {
                let w = random_distribution(2, &mut rng);
                MeasureSpec::weighted_marginal_shannon_general(vec![
                    (vec![0], w.weights()[0]),
                    (vec![1, 2], w.weights()[1]),
                ])
                .unwrap()
            } else {
                let w = random_distribution(3, &mut rng);
                MeasureSpec::weighted_marginal_renyi(
                    (0..3)
                        .map(|j| (j, w.weights()[j], rng.gen_range(0.0..=1.0)))
                        .collect(),
                )
                .unwrap()
            };
            check_additivity(&spec, &psi, &phi).unwrap()
        })),
        row("direct-sum-identity", samples, 1e-9, sweep_max(samples, |i| {
            let mut rng = sample_rng(seed, 3, i);
            let psi = random_state(&random_dims(3, 3, &mut rng), &mut rng);
            let phi = random_state(&random_dims(3, 3, &mut rng), &mut rng);
            let p: f64 = rng.gen_range(0.0..=1.0);
            let spec = shannon_cuts(3, &mut rng);
            check_direct_sum_identity(&spec, &psi, &phi, p).unwrap()
        })),
        row("log-boundedness", samples, 1e-9, sweep_max(samples, |i| {
            let mut rng = sample_rng(seed, 4, i);
            let l = 2 + i % 3;
            let w = random_distribution(l, &mut rng);
            let summands: Vec<MultipartiteState> = (0..l)
                .map(|j| {
                    random_state(&[2, 2], &mut rng)
                        .scaled(Complex64::new(w.weights()[j].sqrt(), 0.0))
                })
                .collect();
            -check_log_boundedness(&shannon_cuts(2, &mut rng), &summands).unwrap()
        })),
        row("continuity-envelope", samples, 0.0, sweep_max(samples, |i| {
            let mut rng = sample_rng(seed, 5, i);
            let dims = random_dims(3, 4, &mut rng);
            let psi = random_state(&dims, &mut rng);
            let phi = if i % 2 == 0 {
                random_state(&dims, &mut rng)
            } else {
                let noise = random_state(&dims, &mut rng);
                let eta: f64 = rng.gen_range(0.0..0.5);
                let amps: Vec<Complex64> = psi
                    .amps()
                    .iter()
                    .zip(noise.amps())
                    .map(|(a, b)| a + Complex64::new(eta, 0.0) * b)
                    .collect();
                MultipartiteState::new(dims.clone(), amps)
                    .unwrap()
                    .normalized()
                    .unwrap()
            };
            let delta = trace_distance_pure(&psi, &phi).unwrap().min(1.0 - 1e-15);
            let cb = continuity_bound(3, delta).unwrap();
            let spec = shannon_cuts(3, &mut rng);
            let diff = (evaluate(&spec, &psi).unwrap() - evaluate(&spec, &phi).unwrap()).abs();
            let total: usize = dims.iter().product();
            diff - (cb.a * (total as f64).log2() + cb.b)
        })),
    ];
    report("axioms", cfg, rows)
}

fn locc_check(cfg: &SweepConfig) -> RunOutput {
    let (seed, samples) = (cfg.seed, cfg.samples);
    let rows = vec![
        row("weight-conservation", samples, 1e-10, sweep_max(samples, |i| {
            let mut rng = sample_rng(seed, 1, i);
            let dims = random_dims(2, 3, &mut rng);
            let steps = rng.gen_range(1..=2);
            let branches = rng.gen_range(2..=3);
            let protocol = random_protocol(&dims, steps, branches, rng.gen()).unwrap();
            let ensemble =
                compose_and_discard(&protocol, &random_state(&dims, &mut rng)).unwrap();
            (ensemble.total_weight() - 1.0).abs()
        })),
        row("monotone-on-average", samples, 1e-9, sweep_max(samples, |i| {
            let mut rng = sample_rng(seed, 2, i);
            let dims = random_dims(3, 3, &mut rng);
            let psi = random_state(&dims, &mut rng);
            let party = rng.gen_range(0..3);
            let branches = rng.gen_range(2..=3);
            let step =
                random_one_step(party, dims[party], dims[party], branches, rng.gen()).unwrap();
            -monotone_avg_check(&shannon_cuts(3, &mut rng), &psi, &[step]).unwrap()
        })),
        row("weak-monotonicity", samples, 1e-9, sweep_max(samples, |i| {
            let mut rng = sample_rng(seed, 3, i);
            let dims = random_dims(2, 3, &mut rng);
            let psi = random_state(&dims, &mut rng);
            let spec = shannon_cuts(2, &mut rng);
            let before = evaluate(&spec, &psi).unwrap();
            let protocol = random_protocol(&dims, 1, 2, rng.gen()).unwrap();
            compose_and_discard(&protocol, &psi)
                .unwrap()
                .branches()
                .iter()
                .map(|b| b.weight * evaluate(&spec, &b.state).unwrap() - before)
                .fold(f64::NEG_INFINITY, f64::max)
        })),
        row("power-factorization", samples, 1e-10, sweep_max(samples, |i| {
            let mut rng = sample_rng(seed, 4, i);
            let ch = random_one_step(0, 2, 2, 2, rng.gen()).unwrap();
            let psi = random_state(&[2, 2], &mut rng);
            let single = apply_pure(&ch, &psi);
            let mut kraus = Vec::new();
            for y1 in 0..2 {
                for y2 in 0..2 {
                    kraus.push(ch.kraus()[y1].kronecker(&ch.kraus()[y2]));
                }
            }
            let lifted = OneStepChannel::new(0, vec![0; 4], kraus, 1).unwrap();
            let got = apply_pure(&lifted, &psi.tensor_power(2).unwrap());
            let mut worst = 0.0f64;
            for (j, branch) in got.branches().iter().enumerate() {
                let b1 = &single.branches()[j / 2];
                let b2 = &single.branches()[j % 2];
                worst = worst.max((branch.weight - b1.weight * b2.weight).abs());
                let expected = tensor_product(&b1.state, &b2.state).unwrap();
                for (a, b) in branch.state.amps().iter().zip(expected.amps()) {
                    worst = worst.max((a - b).norm());
                }
            }
            worst
        })),
        row("register-discard-contraction", samples, 1e-10, sweep_max(samples, |i| {
            let mut rng = sample_rng(seed, 5, i);
            let dims = random_dims(2, 2, &mut rng);
            let protocol = random_protocol(&dims, 1, 2, rng.gen()).unwrap();
            let rho =
                compose_and_discard(&protocol, &random_state(&dims, &mut rng)).unwrap();
            let sigma =
                compose_and_discard(&protocol, &random_state(&dims, &mut rng)).unwrap();
            let labeled = check_cond_pure_distance(&rho, &sigma).unwrap().t;
            let merged = trace_distance(
                &merged_density(&rho).unwrap(),
                &merged_density(&sigma).unwrap(),
            )
            .unwrap();
            merged - labeled
        })),
    ];
    report("locc-check", cfg, rows)
}

fn appendix(cfg: &SweepConfig) -> RunOutput {
    let (seed, samples) = (cfg.seed, cfg.samples);
    let rows = vec![
        row("conditional-distance-register", samples, 1e-10, sweep_max(samples, |i| {
            let (rho, sigma) = ensemble_pair(seed, 1, i);
            let d = check_cond_pure_distance(&rho, &sigma).unwrap();
            d.tv - d.t
        })),
        row("conditional-distance-branches", samples, 1e-10, sweep_max(samples, |i| {
            let (rho, sigma) = ensemble_pair(seed, 2, i);
            let d = check_cond_pure_distance(&rho, &sigma).unwrap();
            d.avg_branch - 2.0 * d.t
        })),
        row("outcome-mass", samples, 1e-9, sweep_max(samples, |i| {
            let mut rng = sample_rng(seed, 3, i);
            let psi = random_state(&[2, 2], &mut rng);
            let s: f64 = if i % 2 == 0 {
                rng.gen_range(0.0..0.01)
            } else {
                rng.gen_range(0.0..0.05)
            };
            let phi = tilt_toward(&psi, s, &mut rng);
            let protocol = random_protocol(&[2, 2], 1, 2, rng.gen()).unwrap();
            let eps_prime = rng.gen_range(0.3..=1.0);
            let check = check_outcome_prob_lower(&psi, &phi, &protocol, eps_prime).unwrap();
            check.bound - check.mass
        })),
        row("max-eigenvalue-shift", samples, 1e-10, sweep_max(samples, |i| {
            let mut rng = sample_rng(seed, 4, i);
            let dim = rng.gen_range(2..=8usize);
            let check =
                check_max_eig(&random_density(dim, &mut rng), &random_density(dim, &mut rng))
                    .unwrap();
            check.gap - 2.0 * check.t
        })),
    ];
    report("appendix", cfg, rows)
}

fn row(anchor: &'static str, samples: usize, tolerance: f64, worst: f64) -> ReportRow {
    ReportRow {
        anchor,
        samples,
        worst,
        tolerance,
        pass: worst <= tolerance,
    }
}

fn apply_pure(ch: &OneStepChannel, psi: &MultipartiteState) -> ConditionallyPureState {
    entaep::locc::apply(ch, &ConditionallyPureState::pure(psi).unwrap()).unwrap()
}

/// Two random ensembles over a shared label alphabet.
fn ensemble_pair(seed: u64, salt: u64, i: usize) -> (ConditionallyPureState, ConditionallyPureState) {
    let mut rng = sample_rng(seed, salt, i);
    let labels = rng.gen_range(2..=4usize);
    let build = |rng: &mut ChaCha8Rng| {
        let w = random_distribution(labels, rng);
        ConditionallyPureState::new(
            (0..labels)
                .map(|l| Branch {
                    weight: w.weights()[l],
                    label: l,
                    state: random_state(&[2, 2], rng),
                })
                .collect(),
        )
        .unwrap()
    };
    let rho = build(&mut rng);
    let sigma = build(&mut rng);
    (rho, sigma)
}

/// Unit vector at squared overlap exactly 1 − s from ψ.
fn tilt_toward(psi: &MultipartiteState, s: f64, rng: &mut impl Rng) -> MultipartiteState {
    let noise = random_state(psi.dims(), rng);
    let overlap: Complex64 = psi
        .amps()
        .iter()
        .zip(noise.amps())
        .map(|(a, b)| a.conj() * b)
        .sum();
    let w: Vec<Complex64> = noise
        .amps()
        .iter()
        .zip(psi.amps())
        .map(|(b, a)| b - overlap * a)
        .collect();
    let wn = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let amps: Vec<Complex64> = psi
        .amps()
        .iter()
        .zip(&w)
        .map(|(a, b)| {
            Complex64::new((1.0 - s).sqrt(), 0.0) * a + Complex64::new(s.sqrt(), 0.0) * b / wn
        })
        .collect();
    MultipartiteState::new(psi.dims().to_vec(), amps)
        .unwrap()
        .normalized()
        .unwrap()
}
