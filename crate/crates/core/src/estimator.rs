//! Unbiased single-shot estimators built on the G-Hadamard test, SVD-sampled
//! plans for `Tr A (⊕ g^{⊗n} ⊗ g^{*⊗n'} ⊗ I_E)`, and Hoeffding repetition.

use serde::Serialize;

use crate::circuit::{simulate_ghadamard, GHadamardInstance, RegisterLayout};
use crate::embed::{build_embedding, direct_sum_dim, EmbeddingMap};
use crate::error::{Error, Result};
use crate::functions::{AForm, FunctionSpec};
use crate::haar::{monte_carlo, sample_haar, McEstimate, RngStream};
use crate::linalg::{self, ComplexMatrix, SvdFactors, C64, ZERO};

/// Default ceiling on shots per PAC estimate.
pub const DEFAULT_SHOT_CAP: u64 = 50_000_000;
/// Relative cutoff below which singular values are treated as zero.
const SINGULAR_CUTOFF: f64 = 1e-13;

/// `f̂(M, b)`: the raw value recorded for measurement `M` under setting `b`.
pub fn f_hat(outcome: u8, b: u8) -> C64 {
    let base = C64::new(-1.0, -1.0);
    match (outcome, b) {
        (0, 0) => base + 4.0,
        (0, 1) => base + C64::new(0.0, 4.0),
        _ => base,
    }
}

/// `⌈8 C₀² ln(4/δ) / ε²⌉` with `C₀ = √10 · ‖A‖₁`, the largest modulus a
/// scaled shot can take.
pub fn pac_shots(epsilon: f64, delta: f64, trace_norm: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon and delta must lie in (0, 1), got {epsilon} and {delta}"
        )));
    }
    if !trace_norm.is_finite() || trace_norm < 0.0 {
        return Err(Error::InvalidArgument(format!("invalid trace norm {trace_norm}")));
    }
    let c0_sq = 10.0 * trace_norm * trace_norm;
    let n = (8.0 * c0_sq * (4.0 / delta).ln() / (epsilon * epsilon)).ceil();
    Ok(n as u64)
}

/// Result of one shot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShotOutcome {
    pub coordinate: usize,
    pub b: u8,
    pub outcome: u8,
    /// `‖A‖₁ · f̂(M, b)` (or `f̂` alone for a bare inner-product estimate).
    pub value: C64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PacResult {
    pub estimate: C64,
    pub stderr: f64,
    pub shots: u64,
    pub total_queries: u64,
    pub epsilon: f64,
    pub delta: f64,
}

/// Sampling plan for `f(g) = Tr A (⊕_{0≤n,n'≤m} g^{⊗n} ⊗ g^{*⊗n'} ⊗ I_E)`
/// with `A = U diag(σ) V`: `Tr A X = Σ_i σ_i ⟨V* e_i| X |U e_i⟩`.
#[derive(Clone, Debug)]
pub struct EstimationPlan {
    pub a: ComplexMatrix,
    pub svd: SvdFactors,
    pub m: usize,
    /// `None` when `m = 0`, where the circuit never touches `g`.
    pub d: Option<usize>,
    pub dim_e: usize,
    /// Coordinates with non-zero singular value, in descending order.
    pub coordinates: Vec<usize>,
    pub probs: Vec<f64>,
    pub trace_norm: f64,
    pub queries_per_shot: usize,
    /// `W(V* e_i ⊕ 0)` and `W(U e_i ⊕ 0)` for each kept coordinate.
    phis: Vec<Vec<C64>>,
    psis: Vec<Vec<C64>>,
}

fn infer_d(side: usize, m: usize, dim_e: usize) -> Result<Option<usize>> {
    if m == 0 {
        return if side == dim_e {
            Ok(None)
        } else {
            Err(Error::Shape(format!("m = 0 needs a {dim_e}x{dim_e} matrix, got side {side}")))
        };
    }
    for d in 1.. {
        let n = direct_sum_dim(m, d, dim_e);
        if n == side {
            return Ok(Some(d));
        }
        if n > side {
            break;
        }
    }
    Err(Error::Shape(format!(
        "side {side} is not a direct-sum dimension for m = {m}, dimE = {dim_e}"
    )))
}

impl EstimationPlan {
    /// Plan for `a` acting on the `m`-truncated direct sum; `d` is inferred
    /// from the side length.
    pub fn new(a: &ComplexMatrix, m: usize, dim_e: usize) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Shape(format!("A must be square, got {}x{}", a.rows(), a.cols())));
        }
        let d = infer_d(a.rows(), m, dim_e)?;
        let svd = linalg::svd(a)?;
        let top = svd.singulars.first().copied().unwrap_or(0.0);
        let coordinates: Vec<usize> = (0..svd.singulars.len())
            .filter(|&i| svd.singulars[i] > SINGULAR_CUTOFF * top.max(f64::MIN_POSITIVE))
            .collect();
        let trace_norm: f64 = coordinates.iter().map(|&i| svd.singulars[i]).sum();
        let probs: Vec<f64> = coordinates.iter().map(|&i| svd.singulars[i] / trace_norm).collect();

        let (mut phis, mut psis) = (Vec::new(), Vec::new());
        if !coordinates.is_empty() {
            let w = build_embedding(m, d.unwrap_or(1), dim_e)?;
            for &i in &coordinates {
                let phi_tilde: Vec<C64> = svd.right.row(i).iter().map(|z| z.conj()).collect();
                let psi_tilde = svd.left.column(i);
                phis.push(w.embed_state(&phi_tilde)?);
                psis.push(w.embed_state(&psi_tilde)?);
            }
        }
        Ok(Self {
            a: a.clone(),
            svd,
            m,
            d,
            dim_e,
            coordinates,
            probs,
            trace_norm,
            queries_per_shot: 2 * m,
            phis,
            psis,
        })
    }

    pub fn from_form(form: &AForm) -> Result<Self> {
        let mut plan = Self::new(&form.a, form.m, form.dim_e)?;
        if plan.d.is_none() && form.m > 0 {
            plan.d = Some(form.d);
        }
        Ok(plan)
    }

    pub fn for_spec(spec: &FunctionSpec) -> Result<Self> {
        let form = crate::functions::build_a_cached(spec)?;
        Self::from_form(&form)
    }

    /// True for `A = 0`: the plan is the constant `0` and costs nothing.
    pub fn is_zero(&self) -> bool {
        self.coordinates.is_empty()
    }

    fn layout_for(&self, g: &ComplexMatrix) -> Result<RegisterLayout> {
        if let Some(d) = self.d {
            if g.rows() != d || g.cols() != d {
                return Err(Error::Shape(format!(
                    "plan expects a {d}x{d} unitary, got {}x{}",
                    g.rows(),
                    g.cols()
                )));
            }
        }
        Ok(RegisterLayout {
            m: self.m,
            d: g.rows(),
            dim_e: self.dim_e,
        })
    }

    /// Inverse-CDF draw over `probs` (descending singular values, ties by
    /// index).
    fn sample_coordinate(&self, rng: &mut RngStream) -> usize {
        let u = rng.uniform();
        let mut acc = 0.0;
        for (k, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        self.probs.len() - 1
    }

    fn instance(&self, k: usize, layout: RegisterLayout, b: u8) -> Result<GHadamardInstance> {
        GHadamardInstance::new(layout, self.phis[k].clone(), self.psis[k].clone(), b)
    }
}

fn run_shot(inst: &GHadamardInstance, g: &ComplexMatrix, rng: &mut RngStream) -> Result<(u8, u8)> {
    let b = rng.bit();
    let inst = if inst.b == b { inst.clone() } else { inst.with_b(b)? };
    let dist = simulate_ghadamard(&inst, g)?;
    let outcome = u8::from(rng.uniform() >= dist.p0);
    Ok((b, outcome))
}

/// One run of the inner-product estimator: `E[f̂] = ⟨φ̃| ⊕… |ψ̃⟩`.
///
/// Random draws, in order: `b`, then the measurement.
pub fn est_inner(
    phi_tilde: &[C64],
    psi_tilde: &[C64],
    m: usize,
    dim_e: usize,
    g: &ComplexMatrix,
    rng: &mut RngStream,
) -> Result<ShotOutcome> {
    let (inst, g) = inner_instance(phi_tilde, psi_tilde, m, dim_e, g)?;
    let (b, outcome) = run_shot(&inst, g, rng)?;
    Ok(ShotOutcome {
        coordinate: 0,
        b,
        outcome,
        value: f_hat(outcome, b),
    })
}

fn inner_instance<'g>(
    phi_tilde: &[C64],
    psi_tilde: &[C64],
    m: usize,
    dim_e: usize,
    g: &'g ComplexMatrix,
) -> Result<(GHadamardInstance, &'g ComplexMatrix)> {
    let w: EmbeddingMap = build_embedding(m, g.rows(), dim_e)?;
    let phi = w.embed_state(phi_tilde)?;
    let psi = w.embed_state(psi_tilde)?;
    let layout = RegisterLayout { m, d: g.rows(), dim_e };
    Ok((GHadamardInstance::new(layout, phi, psi, 0)?, g))
}

/// `Σ_{b,M} P(b) P(M|b) f̂(M,b)` from exact circuit probabilities.
fn exact_expectation(inst: &GHadamardInstance, g: &ComplexMatrix) -> Result<C64> {
    let mut total = ZERO;
    for b in [0u8, 1] {
        let p0 = simulate_ghadamard(&inst.with_b(b)?, g)?.p0;
        total += (f_hat(0, b) * p0 + f_hat(1, b) * (1.0 - p0)) * 0.5;
    }
    Ok(total)
}

/// Exact expectation of [`est_inner`] over `(b, M)`.
pub fn est_inner_expectation(
    phi_tilde: &[C64],
    psi_tilde: &[C64],
    m: usize,
    dim_e: usize,
    g: &ComplexMatrix,
) -> Result<C64> {
    let (inst, g) = inner_instance(phi_tilde, psi_tilde, m, dim_e, g)?;
    exact_expectation(&inst, g)
}

/// One shot of the plan. Random draws, in order: coordinate, `b`,
/// measurement.
pub fn shot(plan: &EstimationPlan, g: &ComplexMatrix, rng: &mut RngStream) -> Result<ShotOutcome> {
    let layout = plan.layout_for(g)?;
    if plan.is_zero() {
        return Ok(ShotOutcome { coordinate: 0, b: 0, outcome: 0, value: ZERO });
    }
    let k = plan.sample_coordinate(rng);
    let inst = plan.instance(k, layout, 0)?;
    let (b, outcome) = run_shot(&inst, g, rng)?;
    Ok(ShotOutcome {
        coordinate: plan.coordinates[k],
        b,
        outcome,
        value: f_hat(outcome, b) * plan.trace_norm,
    })
}

/// `E[shot | g]` by exhaustive enumeration of `(i, b, M)`.
pub fn conditional_expectation(plan: &EstimationPlan, g: &ComplexMatrix) -> Result<C64> {
    let layout = plan.layout_for(g)?;
    let mut total = ZERO;
    for (k, &p) in plan.probs.iter().enumerate() {
        let inst = plan.instance(k, layout, 0)?;
        total += exact_expectation(&inst, g)? * p;
    }
    Ok(total * plan.trace_norm)
}

/// Averages `pac_shots(ε, δ, ‖A‖₁)` shots. Shot `k` uses `rng.split(k)`, so
/// the result does not depend on the thread count.
pub fn estimate_pac(
    plan: &EstimationPlan,
    g: &ComplexMatrix,
    epsilon: f64,
    delta: f64,
    rng: &RngStream,
) -> Result<PacResult> {
    estimate_pac_with_cap(plan, g, epsilon, delta, rng, DEFAULT_SHOT_CAP)
}

pub fn estimate_pac_with_cap(
    plan: &EstimationPlan,
    g: &ComplexMatrix,
    epsilon: f64,
    delta: f64,
    rng: &RngStream,
    cap: u64,
) -> Result<PacResult> {
    plan.layout_for(g)?;
    let shots = pac_shots(epsilon, delta, plan.trace_norm)?;
    if shots > cap {
        return Err(Error::ShotBudget { requested: shots, cap });
    }
    let (estimate, stderr) = if shots == 0 {
        (ZERO, 0.0)
    } else if shots == 1 {
        (shot(plan, g, &mut rng.split(0))?.value, f64::INFINITY)
    } else {
        let est = monte_carlo(shots as usize, rng, |_, sub| Ok(shot(plan, g, sub)?.value))?;
        (est.mean, est.stderr)
    };
    Ok(PacResult {
        estimate,
        stderr,
        shots,
        total_queries: shots * plan.queries_per_shot as u64,
        epsilon,
        delta,
    })
}

/// Monte-Carlo `E_g |E[shot | g] − f(g)|²` over Haar `g`.
pub fn bias_g_average(
    plan: &EstimationPlan,
    reference: &FunctionSpec,
    n: usize,
    rng: &RngStream,
) -> Result<McEstimate> {
    let d = reference.d();
    if let Some(pd) = plan.d {
        if pd != d {
            return Err(Error::Shape(format!("plan is over U({pd}), reference over U({d})")));
        }
    }
    if n < 2 {
        return Err(Error::InvalidArgument("bias estimation needs n >= 2".into()));
    }
    monte_carlo(n, rng, |_, sub| {
        let g = sample_haar(d, sub)?;
        let diff = conditional_expectation(plan, &g)? - reference.eval(&g)?;
        Ok(C64::new(diff.norm_sqr(), 0.0))
    })
}
