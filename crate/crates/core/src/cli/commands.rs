//! The experiment drivers behind each subcommand.
//!
//! Randomness: Haar unitaries come from stream 0 of the master seed, shot
//! randomness from stream 1; row `k` uses `split(k)` of each.

use std::time::Instant;

use super::config::{Command, Settings};
use super::report::ReportRow;
use super::CliError;
use crate::circuit::{p_zero_formula, simulate_ghadamard_audited, GHadamardInstance, RegisterLayout};
use crate::estimator::{
    bias_g_average, conditional_expectation, estimate_pac_with_cap, pac_shots, EstimationPlan,
};
use crate::functions::{build_a_truncated, q_bound, rep_bound, FunctionSpec};
use crate::haar::{mc_integrate, random_state, sample_haar, RngStream};
use crate::linalg::C64;
use crate::repr::IrrepLabel;

const HAAR_STREAM: u64 = 0;
const SHOT_STREAM: u64 = 1;
/// Residual bound for the circuit and unbiasedness suites.
pub const VERIFY_TOL: f64 = 1e-9;

pub fn run(s: &Settings) -> Result<Vec<ReportRow>, CliError> {
    match s.command {
        Command::Estimate => estimate(s),
        Command::BiasScan => bias_scan(s),
        Command::Rep => rep(s),
        Command::VerifyCircuit => verify_circuit(s),
        Command::Moments => moments(s),
    }
}

fn spec(s: &Settings) -> &FunctionSpec {
    s.spec.as_ref().expect("resolve() sets a spec for this command")
}

fn timed<T>(s: &Settings, f: impl FnOnce() -> Result<T, CliError>) -> Result<(T, Option<u64>), CliError> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, s.timing.then(|| start.elapsed().as_millis() as u64)))
}

fn plan_for(spec: &FunctionSpec, m: Option<usize>) -> Result<EstimationPlan, CliError> {
    Ok(match m {
        None => EstimationPlan::for_spec(spec)?,
        Some(m) => EstimationPlan::from_form(&build_a_truncated(spec, m)?)?,
    })
}

fn estimate(s: &Settings) -> Result<Vec<ReportRow>, CliError> {
    let spec = spec(s);
    let plan = plan_for(spec, s.m)?;
    let rep = rep_bound(spec, s.epsilon)?;
    let haar = RngStream::new(s.seed, HAAR_STREAM);
    let shots = RngStream::new(s.seed, SHOT_STREAM);
    (0..s.haar_samples)
        .map(|k| {
            let (row, millis) = timed(s, || {
                let g = sample_haar(spec.d(), &mut haar.split(k as u64))?;
                let pac = estimate_pac_with_cap(&plan, &g, s.epsilon, s.delta, &shots.split(k as u64), s.shot_cap)?;
                let mut row = ReportRow::new(spec.descriptor()).compare(pac.estimate, spec.eval(&g)?);
                row.passed = row.abs_error.map(|e| e <= s.epsilon);
                row.shots = Some(pac.shots);
                row.total_queries = Some(pac.total_queries);
                row.rep_epsilon = Some(rep);
                row.stderr = Some(pac.stderr);
                row.m = Some(plan.m);
                Ok(row)
            })?;
            Ok(ReportRow {
                runtime_millis: millis,
                ..row
            })
        })
        .collect()
}

/// Averaged bias of the degree-`≤ m` truncation for each `m` up to the
/// family degree, against the exact `‖Q^⊥_{≤m} f‖²`.
fn bias_scan(s: &Settings) -> Result<Vec<ReportRow>, CliError> {
    let spec = spec(s);
    let top = s.m.unwrap_or_else(|| spec.degree());
    let haar = RngStream::new(s.seed, HAAR_STREAM);
    (0..=top)
        .map(|m| {
            let (row, millis) = timed(s, || {
                let plan = EstimationPlan::from_form(&build_a_truncated(spec, m)?)?;
                let bias = bias_g_average(&plan, spec, s.haar_samples, &haar.split(m as u64))?;
                let exact = spec.complement_norm_sq_exact(Some(m));
                let mut row = ReportRow::new(spec.descriptor()).compare(bias.mean, C64::new(exact, 0.0));
                row.bias_g = Some(bias.mean.re);
                row.stderr = Some(bias.stderr);
                row.m = Some(m);
                row.passed = Some(bias.within(C64::new(exact, 0.0), 3.0));
                Ok(row)
            })?;
            Ok(ReportRow {
                runtime_millis: millis,
                ..row
            })
        })
        .collect()
}

fn rep(s: &Settings) -> Result<Vec<ReportRow>, CliError> {
    let spec = spec(s);
    let (mut row, millis) = timed(s, || {
        let mut row = ReportRow::new(spec.descriptor());
        row.rep_epsilon = Some(rep_bound(spec, s.epsilon)?);
        row.shots = Some(pac_shots(s.epsilon, s.delta, spec.trace_norm()?)?);
        row.total_queries = Some(q_bound(spec, s.epsilon, s.delta)?);
        row.m = Some(spec.plan_truncation());
        Ok(row)
    })?;
    row.runtime_millis = millis;
    Ok(vec![row])
}

/// `∫ |f(g)|² dg` by Monte Carlo against the exact `‖f‖²`.
fn moments(s: &Settings) -> Result<Vec<ReportRow>, CliError> {
    let spec = spec(s);
    let (mut row, millis) = timed(s, || {
        let est = mc_integrate(
            |g| Ok(C64::new(spec.eval(g)?.norm_sqr(), 0.0)),
            spec.d(),
            s.samples,
            &RngStream::new(s.seed, HAAR_STREAM),
        )?;
        let exact = C64::new(spec.norm_sq(), 0.0);
        let mut row = ReportRow::new(format!("moment:{}", spec.descriptor())).compare(est.mean, exact);
        row.stderr = Some(est.stderr);
        row.passed = Some(est.within(exact, 3.0));
        Ok(row)
    })?;
    row.runtime_millis = millis;
    Ok(vec![row])
}

/// The families checked for exact unbiasedness at dimension `d`.
pub fn shipped_families(d: usize) -> Vec<FunctionSpec> {
    let mut out: Vec<FunctionSpec> = (0..=3).map(|alpha| FunctionSpec::Monomial { d, alpha }).collect();
    out.push(FunctionSpec::UnivariatePoly {
        d,
        coeffs: vec![C64::new(0.5, 0.0), C64::new(0.0, -1.0), C64::new(0.25, 0.25), C64::new(-0.75, 0.0)],
    });
    out.push(FunctionSpec::NormalizedTrace { d });
    if d <= 3 {
        out.push(FunctionSpec::Determinant { d });
    }
    if d == 2 {
        for (l1, l2) in [(2, 0), (1, -1)] {
            let label = IrrepLabel::new(l1, l2).expect("valid signature");
            for i in 0..label.dim() {
                for j in 0..label.dim() {
                    out.push(FunctionSpec::IrrepEntry { d, label, i, j });
                }
            }
        }
    }
    out
}

/// Circuit-vs-formula residuals and query counts for each `(d, m)` case,
/// then exact unbiasedness of each family's plan.
fn verify_circuit(s: &Settings) -> Result<Vec<ReportRow>, CliError> {
    let cases: Vec<(usize, usize)> = match s.m {
        Some(m) => vec![(s.d, m)],
        None => vec![(2, 1), (2, 2), (3, 1), (3, 2)],
    };
    let haar = RngStream::new(s.seed, HAAR_STREAM);
    let mut rows = Vec::new();
    for (case, &(d, m)) in cases.iter().enumerate() {
        let (row, millis) = timed(s, || {
            let layout = RegisterLayout { m, d, dim_e: 1 };
            let dim = layout.register_dim()?;
            let stream = haar.split(case as u64);
            let (mut worst, mut queries, mut counts_ok) = (0.0f64, 0u64, true);
            for k in 0..s.haar_samples {
                let mut rng = stream.split(k as u64);
                let g = sample_haar(d, &mut rng)?;
                let phi = random_state(dim, &mut rng);
                let psi = random_state(dim, &mut rng);
                let inst = GHadamardInstance::new(layout, phi, psi, rng.bit())?;
                let (dist, audit) = simulate_ghadamard_audited(&inst, &g)?;
                worst = worst.max((dist.p0 - p_zero_formula(&inst, &g)?).abs());
                queries += audit.controlled_g_applications as u64;
                counts_ok &= audit.controlled_g_applications == 2 * m;
            }
            let mut row = ReportRow::new(format!("circuit(d={d},m={m})"));
            row.abs_error = Some(worst);
            row.total_queries = Some(queries);
            row.m = Some(m);
            row.passed = Some(worst < VERIFY_TOL && counts_ok);
            Ok(row)
        })?;
        rows.push(ReportRow {
            runtime_millis: millis,
            ..row
        });
    }

    let mut dims: Vec<usize> = cases.iter().map(|c| c.0).collect();
    dims.dedup();
    let families: Vec<FunctionSpec> = match &s.spec {
        Some(spec) => vec![spec.clone()],
        None => dims.iter().flat_map(|&d| shipped_families(d)).collect(),
    };
    for (f, spec) in families.iter().enumerate() {
        let (row, millis) = timed(s, || {
            let plan = EstimationPlan::for_spec(spec)?;
            let stream = haar.split((cases.len() + f) as u64);
            let mut worst = 0.0f64;
            for k in 0..s.samples {
                let g = sample_haar(spec.d(), &mut stream.split(k as u64))?;
                worst = worst.max((conditional_expectation(&plan, &g)? - spec.eval(&g)?).norm());
            }
            let mut row = ReportRow::new(format!("unbiased:{}", spec.descriptor()));
            row.abs_error = Some(worst);
            row.m = Some(plan.m);
            row.passed = Some(worst < VERIFY_TOL);
            Ok(row)
        })?;
        rows.push(ReportRow {
            runtime_millis: millis,
            ..row
        });
    }
    Ok(rows)
}
