//! Polynomial spaces on U(d): monomials `g^α ḡ^{α'}`, projections onto
//! `Q_{≤m}`, and the `Rep_ε` degree measure.


use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::FunctionSpec;
use crate::haar::{mc_integrate, moment_g, monte_carlo, sample_haar, McEstimate, RngStream};
use crate::linalg::{self, ComplexMatrix, C64, ONE, ZERO};
use crate::repr::{irrep_u2, IrrepLabel};

/// Largest monomial set `enumerate_monomials` will materialize.
pub const MONOMIAL_CAP: usize = 200_000;

/// Exponents of the monomial `g^α ḡ^{α'} = Π g_ij^{α_ij} · conj(g_ij)^{α'_ij}`.
/// Both grids are stored row-major, 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExponentPair {
    d: usize,
    alpha: Vec<u32>,
    alpha_bar: Vec<u32>,
}

impl ExponentPair {
    pub fn new(d: usize, alpha: Vec<u32>, alpha_bar: Vec<u32>) -> Result<Self> {
        if d == 0 || alpha.len() != d * d || alpha_bar.len() != d * d {
            return Err(Error::Shape(format!(
                "exponent grids must be {d}x{d}, got {} and {} entries",
                alpha.len(),
                alpha_bar.len()
            )));
        }
        Ok(Self { d, alpha, alpha_bar })
    }

    pub fn constant(d: usize) -> Self {
        Self {
            d,
            alpha: vec![0; d * d],
            alpha_bar: vec![0; d * d],
        }
    }

    /// `g_ij^power` (0-based indices).
    pub fn entry_power(d: usize, i: usize, j: usize, power: u32) -> Self {
        let mut p = Self::constant(d);
        p.alpha[i * d + j] = power;
        p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self, i: usize, j: usize) -> u32 {
        self.alpha[i * self.d + j]
    }

    pub fn alpha_bar(&self, i: usize, j: usize) -> u32 {
        self.alpha_bar[i * self.d + j]
    }

    pub fn holomorphic_degree(&self) -> usize {
        self.alpha.iter().map(|&a| a as usize).sum()
    }

    pub fn antiholomorphic_degree(&self) -> usize {
        self.alpha_bar.iter().map(|&a| a as usize).sum()
    }

    pub fn degree(&self) -> usize {
        self.holomorphic_degree() + self.antiholomorphic_degree()
    }

    /// `(i, j)` of each `g` factor, repeated by multiplicity, lexicographic.
    pub fn holomorphic_factors(&self) -> Vec<(usize, usize)> {
        Self::factors(self.d, &self.alpha)
    }

    /// `(i, j)` of each `ḡ` factor, repeated by multiplicity, lexicographic.
    pub fn antiholomorphic_factors(&self) -> Vec<(usize, usize)> {
        Self::factors(self.d, &self.alpha_bar)
    }

    fn factors(d: usize, grid: &[u32]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (k, &p) in grid.iter().enumerate() {
            out.extend(std::iter::repeat_n((k / d, k % d), p as usize));
        }
        out
    }

    /// Torus weight under `g ↦ diag(z) g diag(w)`: the row and column
    /// charge vectors. Monomials with different weights are orthogonal.
    pub fn weight(&self) -> (Vec<i64>, Vec<i64>) {
        let mut rows = vec![0i64; self.d];
        let mut cols = vec![0i64; self.d];
        for i in 0..self.d {
            for j in 0..self.d {
                let net = self.alpha(i, j) as i64 - self.alpha_bar(i, j) as i64;
                rows[i] += net;
                cols[j] += net;
            }
        }
        (rows, cols)
    }

    pub fn eval(&self, g: &ComplexMatrix) -> C64 {
        let mut acc = ONE;
        for i in 0..self.d {
            for j in 0..self.d {
                let z = g[(i, j)];
                let (a, b) = (self.alpha(i, j), self.alpha_bar(i, j));
                if a > 0 {
                    acc *= z.powu(a);
                }
                if b > 0 {
                    acc *= z.conj().powu(b);
                }
            }
        }
        acc
    }
}

fn binomial_usize(n: usize, k: usize) -> Option<usize> {
    if k > n {
        return Some(0);
    }
    let mut acc: usize = 1;
    let k = k.min(n - k);
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Number of monomials with `|α| + |α'| ≤ m` in `2d²` variables.
pub fn monomial_count(d: usize, m: usize) -> Option<usize> {
    binomial_usize(2 * d * d + m, m)
}

/// All monomials of total degree `|α| + |α'| ≤ m`, graded by degree and,
/// within a degree, in descending lexicographic order of the concatenated
/// exponent vector `(α, α')`.
pub fn enumerate_monomials(d: usize, m: usize) -> Result<Vec<ExponentPair>> {
    if d == 0 {
        return Err(Error::InvalidArgument("d must be positive".into()));
    }
    let count = monomial_count(d, m).unwrap_or(usize::MAX);
    if count > MONOMIAL_CAP {
        return Err(Error::DimensionCap {
            requested: count,
            cap: MONOMIAL_CAP,
        });
    }
    let vars = 2 * d * d;
    let mut out = Vec::with_capacity(count);
    let mut current = vec![0u32; vars];
    for degree in 0..=m {
        compositions(degree as u32, 0, &mut current, &mut |v| {
            out.push(ExponentPair {
                d,
                alpha: v[..d * d].to_vec(),
                alpha_bar: v[d * d..].to_vec(),
            })
        });
    }
    Ok(out)
}

fn compositions(remaining: u32, pos: usize, current: &mut [u32], emit: &mut impl FnMut(&[u32])) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        emit(current);
        current[pos] = 0;
        return;
    }
    for first in (0..=remaining).rev() {
        current[pos] = first;
        compositions(remaining - first, pos + 1, current, emit);
    }
    current[pos] = 0;
}

/// Exact `‖Q^⊥_{≤m} f‖²` for a shipped family. See
/// [`complement_norm_sq_numeric`] for the sampled estimate.
pub fn complement_norm_sq(spec: &FunctionSpec, m: usize) -> Result<f64> {
    spec.validate()?;
    Ok(spec.complement_norm_sq_exact(Some(m)))
}

/// Numeric split `‖f‖² = ‖Q_{≤m} f‖² + ‖Q^⊥_{≤m} f‖²`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Projection {
    /// `‖Q^⊥_{≤m} f‖²` with the standard error of the squared residual.
    pub complement: McEstimate,
    pub projection_norm_sq: f64,
    pub norm_sq: f64,
    pub condition: f64,
}

struct Moments {
    grams: Vec<Vec<C64>>,
    b: Vec<C64>,
    f2: f64,
}

impl Moments {
    fn zeros(groups: &[Vec<usize>], k: usize) -> Self {
        Self {
            grams: groups.iter().map(|g| vec![ZERO; g.len() * g.len()]).collect(),
            b: vec![ZERO; k],
            f2: 0.0,
        }
    }

    fn merge(&mut self, other: &Self) {
        for (a, o) in self.grams.iter_mut().zip(&other.grams) {
            a.iter_mut().zip(o).for_each(|(x, y)| *x += y);
        }
        self.b.iter_mut().zip(&other.b).for_each(|(x, y)| *x += y);
        self.f2 += other.f2;
    }
}

const SAMPLE_CHUNK: usize = 1024;
const CHUNKS_PER_BATCH: usize = 64;
const PINV_CUTOFF: f64 = 1e-10;
const MAX_CONDITION: f64 = 1e8;

/// Moore–Penrose pseudo-inverse of a Hermitian PSD block, with its
/// condition number over the retained spectrum.
fn pseudo_inverse(gram: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
    let f = linalg::svd(gram)?;
    let top = f.singulars.first().copied().unwrap_or(0.0);
    let k = gram.rows();
    let mut out = ComplexMatrix::zeros(k, k);
    if top <= 0.0 {
        return Ok((out, 1.0));
    }
    let mut smallest = top;
    for (i, &s) in f.singulars.iter().enumerate() {
        if s <= PINV_CUTOFF * top {
            continue;
        }
        smallest = smallest.min(s);
        // A⁺ = Σ v_i u_i* / σ_i with A = U Σ V and v_i the conjugated row.
        for r in 0..k {
            for c in 0..k {
                out[(r, c)] += f.right[(i, r)].conj() * f.left[(c, i)].conj() / s;
            }
        }
    }
    Ok((out, top / smallest))
}

/// Least-squares projection of `f` onto `span{monomials}` from `n` Haar
/// samples, with the residual norm as the complement estimate.
pub fn project_onto_monomials<F>(
    f: F,
    d: usize,
    monomials: &[ExponentPair],
    n: usize,
    rng: &RngStream,
) -> Result<Projection>
where
    F: Fn(&ComplexMatrix) -> Result<C64> + Sync,
{
    if n < 2 {
        return Err(Error::InvalidArgument("projection needs n >= 2 samples".into()));
    }
    // The full empirical Gram, not its weight-block diagonal: only the full
    // normal equations make the complement equal the in-sample residual.
    let k = monomials.len();
    let groups = vec![(0..k).collect::<Vec<_>>()];
    let chunk_moments = |c: usize| -> Result<Moments> {
        let mut acc = Moments::zeros(&groups, k);
        let mut vals = vec![ZERO; k];
        for s in c * SAMPLE_CHUNK..((c + 1) * SAMPLE_CHUNK).min(n) {
            let g = sample_haar(d, &mut rng.split(s as u64))?;
            for (v, p) in vals.iter_mut().zip(monomials) {
                *v = p.eval(&g);
            }
            let fv = f(&g)?;
            for (gram, idx) in acc.grams.iter_mut().zip(&groups) {
                let w = idx.len();
                for (a, &ia) in idx.iter().enumerate() {
                    let ca = vals[ia].conj();
                    for (b, &ib) in idx.iter().enumerate() {
                        gram[a * w + b] += ca * vals[ib];
                    }
                }
            }
            for (bv, v) in acc.b.iter_mut().zip(&vals) {
                *bv += v.conj() * fv;
            }
            acc.f2 += fv.norm_sqr();
        }
        Ok(acc)
    };

    let n_chunks = n.div_ceil(SAMPLE_CHUNK);
    let mut total = Moments::zeros(&groups, k);
    for batch in (0..n_chunks).step_by(CHUNKS_PER_BATCH) {
        let parts: Vec<Result<Moments>> = (batch..(batch + CHUNKS_PER_BATCH).min(n_chunks))
            .into_par_iter()
            .map(chunk_moments)
            .collect();
        for part in parts {
            total.merge(&part?);
        }
    }

    let inv_n = 1.0 / n as f64;
    let mut coeffs = vec![ZERO; k];
    let mut projection = 0.0;
    let mut condition: f64 = 1.0;
    for (gram, idx) in total.grams.iter().zip(&groups) {
        let w = idx.len();
        let block = ComplexMatrix::from_fn(w, w, |a, b| gram[a * w + b] * inv_n);
        let (pinv, cond) = pseudo_inverse(&block)?;
        condition = condition.max(cond);
        let bw: Vec<C64> = idx.iter().map(|&i| total.b[i] * inv_n).collect();
        let cw = pinv.mat_vec(&bw);
        projection += linalg::inner_product(&bw, &cw).re;
        for (&i, c) in idx.iter().zip(cw) {
            coeffs[i] = c;
        }
    }
    if condition > MAX_CONDITION {
        return Err(Error::IllConditioned { condition });
    }
    let norm_sq = total.f2 * inv_n;

    let residuals = monte_carlo(n, rng, |_, sub| {
        let g = sample_haar(d, sub)?;
        let fit: C64 = monomials.iter().zip(&coeffs).map(|(p, c)| c * p.eval(&g)).sum();
        Ok(C64::new((f(&g)? - fit).norm_sqr(), 0.0))
    })?;
    Ok(Projection {
        complement: McEstimate {
            mean: C64::new(norm_sq - projection, 0.0),
            stderr: residuals.stderr,
            samples: n,
        },
        projection_norm_sq: projection,
        norm_sq,
        condition,
    })
}

/// Numeric `‖Q^⊥_{≤m} f‖²` against all monomials of total degree `≤ m`.
pub fn complement_norm_sq_numeric<F>(f: F, d: usize, m: usize, n: usize, rng: &RngStream) -> Result<McEstimate>
where
    F: Fn(&ComplexMatrix) -> Result<C64> + Sync,
{
    let monomials = enumerate_monomials(d, m)?;
    Ok(project_onto_monomials(f, d, &monomials, n, rng)?.complement)
}

/// Numerical rank of the Monte-Carlo Gram matrix of `monomials`.
pub fn monomial_gram_rank(monomials: &[ExponentPair], d: usize, n: usize, rng: &RngStream) -> Result<usize> {
    let k = monomials.len();
    let partials = (0..n.div_ceil(SAMPLE_CHUNK))
        .into_par_iter()
        .map(|c| -> Result<Vec<C64>> {
            let mut gram = vec![ZERO; k * k];
            for s in c * SAMPLE_CHUNK..((c + 1) * SAMPLE_CHUNK).min(n) {
                let g = sample_haar(d, &mut rng.split(s as u64))?;
                let vals: Vec<C64> = monomials.iter().map(|p| p.eval(&g)).collect();
                for a in 0..k {
                    for b in 0..k {
                        gram[a * k + b] += vals[a].conj() * vals[b];
                    }
                }
            }
            Ok(gram)
        })
        .collect::<Vec<_>>();
    let mut gram = vec![ZERO; k * k];
    for p in partials {
        gram.iter_mut().zip(p?).for_each(|(x, y)| *x += y);
    }
    let m = ComplexMatrix::from_fn(k, k, |a, b| gram[a * k + b] / n as f64);
    let f = linalg::svd(&m)?;
    let top = f.singulars.first().copied().unwrap_or(0.0);
    Ok(f.rank(PINV_CUTOFF * top))
}

/// A request for `Rep_ε(f)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepQuery {
    pub spec: FunctionSpec,
    pub epsilon: f64,
}

impl RepQuery {
    pub fn new(spec: FunctionSpec, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
        }
        spec.validate()?;
        Ok(Self { spec, epsilon })
    }
}

/// `Rep_ε(f) = max{m ∈ ℕ | ‖Q^⊥_{≤2m} f‖² ≥ ε}`, with `0` when no `m`
/// qualifies, via the per-family closed forms.
pub fn rep_epsilon(query: &RepQuery) -> Result<usize> {
    let eps = query.epsilon;
    Ok(match &query.spec {
        FunctionSpec::Monomial { d, alpha } => {
            if *alpha > 0 && eps < moment_g(*alpha, *d) {
                (*alpha as usize - 1) / 2
            } else {
                0
            }
        }
        FunctionSpec::UnivariatePoly { .. } => {
            let deg = query.spec.degree();
            (0..)
                .take_while(|r| 2 * r < deg)
                .filter(|&r| query.spec.complement_norm_sq_exact(Some(2 * r)) >= eps)
                .last()
                .unwrap_or(0)
        }
        FunctionSpec::NormalizedTrace { .. } => 0,
        FunctionSpec::Determinant { d } => {
            if eps <= 1.0 {
                (d - 1) / 2
            } else {
                0
            }
        }
        FunctionSpec::IrrepEntry { label, .. } => {
            if eps < 1.0 / label.dim() as f64 {
                label.degree().saturating_sub(1) / 2
            } else {
                0
            }
        }
    })
}

/// Outcome of a numeric `Rep_ε` evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RepOutcome {
    Value { rep: usize },
    /// `‖Q^⊥_{≤2m} f‖²` came out within three standard errors of `ε`.
    Indeterminate { m: usize, estimate: f64, stderr: f64 },
}

/// `Rep_ε` from Monte-Carlo projections. Only `2m < deg f` needs checking:
/// beyond that `f` lies in `Q_{≤2m}` and the complement vanishes.
pub fn rep_epsilon_numeric(query: &RepQuery, n: usize, rng: &RngStream) -> Result<RepOutcome> {
    let spec = &query.spec;
    let deg = spec.degree();
    let mut rep = 0;
    for r in (0..).take_while(|r| 2 * r < deg) {
        let est = complement_norm_sq_numeric(|g| spec.eval(g), spec.d(), 2 * r, n, &rng.split(r as u64))?;
        let (value, se) = (est.mean.re, est.stderr);
        if (value - query.epsilon).abs() <= 3.0 * se {
            return Ok(RepOutcome::Indeterminate { m: r, estimate: value, stderr: se });
        }
        if value >= query.epsilon {
            rep = r;
        } else {
            break;
        }
    }
    Ok(RepOutcome::Value { rep })
}

/// Monte-Carlo inner product `⟨π_probe(·)_ij, h⟩_{L²}`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Witness {
    pub estimate: McEstimate,
    /// Whether the probe lies above degree `2m`, so that any `h` produced
    /// with `m` queries must be orthogonal to it.
    pub orthogonality_expected: bool,
}

pub fn low_degree_witness<F>(
    h: F,
    m: usize,
    probe: IrrepLabel,
    (i, j): (usize, usize),
    n: usize,
    rng: &RngStream,
) -> Result<Witness>
where
    F: Fn(&ComplexMatrix) -> Result<C64> + Sync,
{
    if i >= probe.dim() || j >= probe.dim() {
        return Err(Error::InvalidArgument(format!("entry ({i},{j}) outside irrep {probe}")));
    }
    let estimate = mc_integrate(|g| Ok(irrep_u2(probe, g)?[(i, j)].conj() * h(g)?), 2, n, rng)?;
    Ok(Witness {
        estimate,
        orthogonality_expected: probe.degree() > 2 * m,
    })
}
