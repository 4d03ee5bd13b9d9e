//! Families of runs along decreasing `epsilon` or `alpha`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::verify::{energy_ledger_check, BoundConstants};

use super::{run, FlowMode, FlowSystem, Trajectory};

/// Shared inputs of a sweep.
#[derive(Clone, Debug)]
pub struct ContinuationSetup {
    pub system: FlowSystem,
    pub beta0: Vec<f64>,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    pub seed: u64,
}

fn check_list(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::config(name, "sweep list is empty"));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::config(name, format!("sweep value {v} must be positive")));
    }
    if values.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::config(name, "sweep values must be non-increasing"));
    }
    Ok(())
}

fn run_family(
    setup: &ContinuationSetup,
    parameter: &'static str,
    systems: Vec<(f64, FlowSystem)>,
) -> Result<Vec<Trajectory>> {
    let work = || {
        systems
            .par_iter()
            .map(|(value, sys)| {
                run(sys, &setup.beta0)
                    .and_then(|t| t.into_result())
                    .map_err(|e| Error::Run { parameter: parameter.into(), value: *value, source: Box::new(e) })
            })
            .collect::<Vec<_>>()
    };
    let results = match setup.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::config("jobs", e.to_string()))?
            .install(work),
        None => work(),
    };
    let mut trajs = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(t) => trajs.push(t),
            Err(e) => failures.push(e),
        }
    }
    if failures.is_empty() {
        Ok(trajs)
    } else {
        Err(Error::Sweep(failures))
    }
}

/// `max_t |u_a(t) - u_b(t)|_{L^2}` over common sample times.
pub fn max_l2_distance(sys: &FlowSystem, a: &Trajectory, b: &Trajectory) -> f64 {
    let alg = sys.algebra().as_ref();
    let mut worst: f64 = 0.0;
    let mut j = 0;
    for sa in &a.samples {
        while j < b.samples.len() && b.samples[j].t < sa.t - 1e-12 {
            j += 1;
        }
        if j < b.samples.len() && (b.samples[j].t - sa.t).abs() <= 1e-12 {
            let d: Vec<f64> = sa.beta.iter().zip(&b.samples[j].beta).map(|(x, y)| x - y).collect();
            worst = worst.max(super::weighted_norm_sq(alg, &d, |_| 1.0).sqrt());
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub weak_max: f64,
    pub weak_mean: f64,
    /// Distance to the run with the previous (larger) epsilon.
    pub distance_to_previous: Option<f64>,
    pub final_l2_norm_sq: f64,
    pub max_q: f64,
}

#[derive(Clone, Debug)]
pub struct EpsilonReport {
    pub rows: Vec<EpsilonRow>,
    pub trajectories: Vec<Trajectory>,
    /// Expectations that did not hold; reported, never fatal.
    pub flags: Vec<String>,
}

impl EpsilonReport {
    pub fn residual_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].weak_max < w[0].weak_max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,weak_residual_max,weak_residual_mean,distance_to_previous,l2_norm_sq,max_q\n");
        for r in &self.rows {
            let d = r.distance_to_previous.map_or(String::new(), |d| format!("{d:.17e}"));
            let _ = writeln!(
                s,
                "{:.17e},{:.17e},{:.17e},{d},{:.17e},{:.17e}",
                r.epsilon, r.weak_max, r.weak_mean, r.final_l2_norm_sq, r.max_q
            );
        }
        s
    }
}

/// Runs the flow for each epsilon and compares consecutive runs.
pub fn continuation_epsilon(setup: &ContinuationSetup, eps_list: &[f64]) -> Result<EpsilonReport> {
    check_list("epsilon", eps_list)?;
    let base = setup.system.params().clone();
    let systems = eps_list
        .iter()
        .map(|&e| {
            let mut p = base.clone();
            p.epsilon = e;
            Ok((e, setup.system.with_params(p)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let trajs = run_family(setup, "epsilon", systems)?;
    let mut rows = Vec::new();
    for (k, (e, tr)) in eps_list.iter().zip(&trajs).enumerate() {
        rows.push(EpsilonRow {
            epsilon: *e,
            weak_max: tr.weak.max,
            weak_mean: tr.weak.mean,
            distance_to_previous: (k > 0).then(|| max_l2_distance(&setup.system, &trajs[k - 1], tr)),
            final_l2_norm_sq: tr.ledger.last().map_or(0.0, |r| r.l2_norm_sq),
            max_q: tr.ledger.max_of(|r| r.q),
        });
    }
    let mut flags = Vec::new();
    for w in rows.windows(2) {
        if w[1].weak_max >= w[0].weak_max {
            flags.push(format!(
                "weak residual did not decrease from epsilon {} to {} ({:.3e} -> {:.3e})",
                w[0].epsilon, w[1].epsilon, w[0].weak_max, w[1].weak_max
            ));
        }
    }
    for w in rows.windows(3) {
        if let (Some(a), Some(b)) = (w[1].distance_to_previous, w[2].distance_to_previous) {
            if b >= a {
                flags.push(format!(
                    "distance between consecutive runs did not decrease at epsilon {} ({a:.3e} -> {b:.3e})",
                    w[2].epsilon
                ));
            }
        }
    }
    Ok(EpsilonReport { rows, trajectories: trajs, flags })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaRow {
    pub alpha: f64,
    /// `alpha int_0^T int |u_t|^2`.
    pub damping_integral: f64,
    /// Battery maximum of `|alpha int int [u, u_t] phi|`.
    pub damping_pairing: f64,
    pub weak_max: f64,
    /// Bound on `alpha int int |u_t|^2` implied by the energy inequality.
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub struct AlphaReport {
    pub rows: Vec<AlphaRow>,
    /// The undamped run.
    pub reference: AlphaRow,
    pub trajectories: Vec<Trajectory>,
    pub reference_trajectory: Trajectory,
    /// Largest per-run bound; every damping integral must stay below it.
    pub common_bound: f64,
    pub flags: Vec<String>,
}

impl AlphaReport {
    pub fn bounded(&self) -> bool {
        self.rows.iter().all(|r| r.damping_integral <= self.common_bound)
    }

    pub fn pairing_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].damping_pairing < w[0].damping_pairing)
            && self.rows.last().map_or(true, |r| self.reference.damping_pairing <= r.damping_pairing)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,damping_integral,damping_pairing,weak_residual_max,bound\n");
        for r in self.rows.iter().chain(std::iter::once(&self.reference)) {
            let _ = writeln!(
                s,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.alpha, r.damping_integral, r.damping_pairing, r.weak_max, r.bound
            );
        }
        s
    }
}

fn alpha_row(sys: &FlowSystem, tr: &Trajectory, seed: u64) -> Result<AlphaRow> {
    let p = sys.params();
    let constants = BoundConstants::sample(sys, 100_000, 10_000, seed)?;
    let check = energy_ledger_check(sys, &tr.ledger, &constants);
    let last = check.points.last();
    let rhs = last.map_or(0.0, |q| q.rhs);
    let bound = match p.mode {
        FlowMode::LlgBoundary => rhs,
        FlowMode::GillTorus => 2.0 * rhs / p.alpha0,
    };
    Ok(AlphaRow {
        alpha: p.alpha,
        damping_integral: p.alpha * tr.accumulators.ut,
        damping_pairing: tr.weak.damping_max(),
        weak_max: tr.weak.max,
        bound,
    })
}

/// Runs the flow for each alpha and an undamped reference.
pub fn continuation_alpha(setup: &ContinuationSetup, alpha_list: &[f64]) -> Result<AlphaReport> {
    check_list("alpha", alpha_list)?;
    let base = setup.system.params().clone();
    let systems = alpha_list
        .iter()
        .chain(std::iter::once(&0.0))
        .map(|&a| {
            let mut p = base.clone();
            p.alpha = a;
            Ok((a, setup.system.with_params(p)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut trajs = run_family(setup, "alpha", systems.clone())?;
    let mut rows = systems
        .iter()
        .zip(&trajs)
        .map(|((_, sys), tr)| alpha_row(sys, tr, setup.seed))
        .collect::<Result<Vec<_>>>()?;
    let reference = rows.pop().expect("reference row");
    let reference_trajectory = trajs.pop().expect("reference run");
    let common_bound = rows.iter().map(|r| r.bound).fold(0.0, f64::max);
    let mut report = AlphaReport { rows, reference, trajectories: trajs, reference_trajectory, common_bound, flags: Vec::new() };
    if !report.bounded() {
        report.flags.push(format!("alpha int int |u_t|^2 exceeds the common bound {:.3e}", common_bound));
    }
    if !report.pairing_decreasing() {
        report.flags.push("damping pairing did not decrease toward the undamped reference".into());
    }
    Ok(report)
}
