//! The shipped function families, their exact values, and their
//! representations `f(g) = Tr A (⊕_{0≤n,n'≤m} g^{⊗n} ⊗ g^{*⊗n'} ⊗ I_E)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::embed::{block_operator, direct_sum_blocks, direct_sum_dim, monomial_entry, register_dim};
use crate::error::{Error, Result};
use crate::fourier::ExponentPair;
use crate::haar::{moment_g, RngStream};
use crate::linalg::{self, ComplexMatrix, Factor, C64, ONE, UNITARY_TOL, ZERO};
use crate::repr::{irrep_u2, solve_intertwiner, IrrepLabel};

/// Largest `m + m̄` accepted for irrep-entry families.
pub const MAX_IRREP_DEGREE: usize = 4;
/// Fixed stream for the intertwiner solve, so A-matrices are reproducible.
const INTERTWINER_SEED: u64 = 0x1e7e_2a11;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FunctionSpec {
    /// `g₁₁^α`.
    Monomial { d: usize, alpha: u32 },
    /// `Σ_k a_k g₁₁^k`.
    #[serde(rename = "poly")]
    UnivariatePoly { d: usize, coeffs: Vec<C64> },
    /// `(1/d) Tr g`.
    #[serde(rename = "trace")]
    NormalizedTrace { d: usize },
    /// `det g`.
    #[serde(rename = "det")]
    Determinant { d: usize },
    /// `π_λ(g)_{ij}` on U(2).
    #[serde(rename = "irrep")]
    IrrepEntry { d: usize, label: IrrepLabel, i: usize, j: usize },
}

impl FunctionSpec {
    pub fn d(&self) -> usize {
        match self {
            Self::Monomial { d, .. }
            | Self::UnivariatePoly { d, .. }
            | Self::NormalizedTrace { d }
            | Self::Determinant { d }
            | Self::IrrepEntry { d, .. } => *d,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::Monomial { .. } => "monomial",
            Self::UnivariatePoly { .. } => "poly",
            Self::NormalizedTrace { .. } => "trace",
            Self::Determinant { .. } => "det",
            Self::IrrepEntry { .. } => "irrep",
        }
    }

    /// Short human-readable descriptor, e.g. `monomial(d=2,alpha=3)`.
    pub fn descriptor(&self) -> String {
        match self {
            Self::Monomial { d, alpha } => format!("monomial(d={d},alpha={alpha})"),
            Self::UnivariatePoly { d, coeffs } => {
                let cs: Vec<String> = coeffs.iter().map(|c| format!("{}{:+}i", c.re, c.im)).collect();
                format!("poly(d={d},coeffs=[{}])", cs.join(";"))
            }
            Self::NormalizedTrace { d } => format!("trace(d={d})"),
            Self::Determinant { d } => format!("det(d={d})"),
            Self::IrrepEntry { label, i, j, .. } => format!("irrep(lambda={label},i={i},j={j})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d() == 0 {
            return Err(Error::InvalidArgument("d must be positive".into()));
        }
        match self {
            Self::UnivariatePoly { coeffs, .. } => {
                if coeffs.is_empty() {
                    return Err(Error::InvalidArgument("polynomial needs at least one coefficient".into()));
                }
                if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                    return Err(Error::InvalidArgument("polynomial coefficients must be finite".into()));
                }
            }
            Self::IrrepEntry { d, label, i, j } => {
                if *d != 2 {
                    return Err(Error::Unsupported(format!("irrep entries are implemented for U(2) only, got d = {d}")));
                }
                if *i >= label.dim() || *j >= label.dim() {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({i},{j}) outside the {}-dimensional irrep {label}",
                        label.dim()
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Total polynomial degree in the entries of `g` and `ḡ`.
    pub fn degree(&self) -> usize {
        match self {
            Self::Monomial { alpha, .. } => *alpha as usize,
            Self::UnivariatePoly { coeffs, .. } => coeffs.iter().rposition(|c| c.norm() > 0.0).unwrap_or(0),
            Self::NormalizedTrace { .. } => 1,
            Self::Determinant { d } => *d,
            Self::IrrepEntry { label, .. } => label.degree(),
        }
    }

    /// Exact `f(g)`.
    pub fn eval(&self, g: &ComplexMatrix) -> Result<C64> {
        self.validate()?;
        let d = self.d();
        if g.rows() != d || g.cols() != d {
            return Err(Error::Shape(format!("expected a {d}x{d} unitary, got {}x{}", g.rows(), g.cols())));
        }
        g.ensure_unitary(UNITARY_TOL)?;
        Ok(match self {
            Self::Monomial { alpha, .. } => g[(0, 0)].powu(*alpha),
            Self::UnivariatePoly { coeffs, .. } => {
                // Horner in g₁₁.
                let x = g[(0, 0)];
                coeffs.iter().rev().fold(ZERO, |acc, &c| acc * x + c)
            }
            Self::NormalizedTrace { d } => g.trace() / *d as f64,
            Self::Determinant { .. } => g.determinant(),
            Self::IrrepEntry { label, i, j, .. } => irrep_u2(*label, g)?[(*i, *j)],
        })
    }

    /// `‖f‖²_{L²}` over Haar measure.
    pub fn norm_sq(&self) -> f64 {
        self.complement_norm_sq_exact(None)
    }

    /// `‖Q^⊥_{≤m} f‖²_{L²}` for the shipped families; `None` means `m = -1`,
    /// i.e. the full norm.
    ///
    /// Distinct powers of `g₁₁` carry distinct torus weights and are thus
    /// orthogonal, and each family member is orthogonal to every polynomial
    /// of lower degree, so only the homogeneous pieces above `m` survive.
    pub fn complement_norm_sq_exact(&self, m: Option<usize>) -> f64 {
        let above = |k: usize| m.is_none_or(|m| k > m);
        match self {
            Self::Monomial { d, alpha } => {
                if above(*alpha as usize) {
                    moment_g(*alpha, *d)
                } else {
                    0.0
                }
            }
            Self::UnivariatePoly { d, coeffs } => coeffs
                .iter()
                .enumerate()
                .filter(|&(k, _)| above(k))
                .map(|(k, c)| c.norm_sqr() * moment_g(k as u32, *d))
                .sum(),
            Self::NormalizedTrace { d } => {
                if above(1) {
                    1.0 / (*d * *d) as f64
                } else {
                    0.0
                }
            }
            Self::Determinant { d } => {
                if above(*d) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::IrrepEntry { label, .. } => {
                if above(label.degree()) {
                    1.0 / label.dim() as f64
                } else {
                    0.0
                }
            }
        }
    }

    /// Smallest power `m` of the direct sum that can represent `f`.
    pub fn plan_truncation(&self) -> usize {
        self.degree()
    }

    /// `‖A‖₁` of the representation built by [`build_a`].
    pub fn trace_norm(&self) -> Result<f64> {
        Ok(match self {
            Self::Monomial { .. } | Self::NormalizedTrace { .. } | Self::Determinant { .. } => 1.0,
            Self::UnivariatePoly { coeffs, .. } => coeffs.iter().map(|c| c.norm()).sum(),
            Self::IrrepEntry { .. } => build_a_cached(self)?.claimed_trace_norm,
        })
    }
}

/// `A` together with the direct-sum shape it acts on.
#[derive(Clone, Debug)]
pub struct AForm {
    pub a: ComplexMatrix,
    pub m: usize,
    pub d: usize,
    pub dim_e: usize,
    /// `‖A‖₁` derived from the construction, independently of an SVD.
    pub claimed_trace_norm: f64,
}

impl AForm {
    pub fn zero(d: usize) -> Self {
        Self {
            a: ComplexMatrix::zeros(1, 1),
            m: 0,
            d,
            dim_e: 1,
            claimed_trace_norm: 0.0,
        }
    }

    fn empty(m: usize, d: usize, dim_e: usize) -> Self {
        let n = direct_sum_dim(m, d, dim_e);
        Self {
            a: ComplexMatrix::zeros(n, n),
            m,
            d,
            dim_e,
            claimed_trace_norm: 0.0,
        }
    }

    /// `Tr A (⊕ g^{⊗n} ⊗ g^{*⊗n'} ⊗ I_E)`, block by block, skipping blocks
    /// where `A` vanishes.
    pub fn evaluate(&self, g: &ComplexMatrix) -> Result<C64> {
        let mut total = ZERO;
        for b in direct_sum_blocks(self.m, self.d, self.dim_e) {
            let o = b.offset;
            let nonzero = (0..b.size).any(|r| (0..b.size).any(|c| self.a[(o + r, o + c)].norm() > 0.0));
            if !nonzero {
                continue;
            }
            let blk = block_operator(g, b.n, b.nbar, self.dim_e)?;
            for r in 0..b.size {
                for c in 0..b.size {
                    total += self.a[(o + r, o + c)] * blk[(c, r)];
                }
            }
        }
        Ok(total)
    }

    /// Writes `coeff` so that `Tr A S` picks up `coeff · S[row, col]`.
    fn place(&mut self, (row, col): (usize, usize), coeff: C64) {
        self.a[(col, row)] += coeff;
    }

    /// Copies `blk` into block `(n, n')` such that `Tr A S` contains
    /// `Tr blk · S_{(n,n')}`.
    fn place_block(&mut self, n: usize, nbar: usize, blk: &ComplexMatrix) {
        let b = direct_sum_blocks(self.m, self.d, self.dim_e)[n * (self.m + 1) + nbar];
        for r in 0..b.size {
            for c in 0..b.size {
                self.a[(b.offset + r, b.offset + c)] = blk[(r, c)];
            }
        }
    }
}

fn ensure_feasible(m: usize, d: usize) -> Result<()> {
    register_dim(m, d, 1).map(|_| ())
}

/// Normalized fully antisymmetric vector in `(C^d)^{⊗d}`; its expectation in
/// `g^{⊗d}` is `det g`.
pub fn antisymmetric_state(d: usize) -> Vec<C64> {
    let mut v = vec![ZERO; d.pow(d as u32)];
    let mut perm: Vec<usize> = (0..d).collect();
    let mut count = 0usize;
    permute(&mut perm, 0, &mut |p| {
        let idx = p.iter().fold(0, |acc, &x| acc * d + x);
        v[idx] = C64::new(permutation_sign(p), 0.0);
        count += 1;
    });
    let scale = 1.0 / (count as f64).sqrt();
    v.iter_mut().for_each(|z| *z *= scale);
    v
}

fn permute(p: &mut [usize], k: usize, emit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        emit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, emit);
        p.swap(k, i);
    }
}

fn permutation_sign(p: &[usize]) -> f64 {
    let mut inversions = 0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 { 1.0 } else { -1.0 }
}

fn reshape(v: &[C64], rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |r, c| v[r * cols + c])
}

/// Builds the representation of `f` at its minimal truncation.
pub fn build_a(spec: &FunctionSpec) -> Result<AForm> {
    build_a_truncated(spec, usize::MAX)
}

/// Representation of the part of `f` of total degree `≤ max_degree`.
/// Components above the cutoff are dropped; if nothing survives the result
/// is the zero form.
pub fn build_a_truncated(spec: &FunctionSpec, max_degree: usize) -> Result<AForm> {
    spec.validate()?;
    let d = spec.d();
    if let FunctionSpec::UnivariatePoly { coeffs, .. } = spec {
        let kept: Vec<(usize, C64)> = coeffs
            .iter()
            .copied()
            .enumerate()
            .filter(|&(k, c)| k <= max_degree && c.norm() > 0.0)
            .collect();
        let Some(&(m, _)) = kept.last() else {
            return Ok(AForm::zero(d));
        };
        ensure_feasible(m, d)?;
        let mut form = AForm::empty(m, d, 1);
        for &(k, c) in &kept {
            let entry = monomial_entry(&ExponentPair::entry_power(d, 0, 0, k as u32), m, d)?;
            form.place(entry.global, c);
        }
        form.claimed_trace_norm = kept.iter().map(|(_, c)| c.norm()).sum();
        return Ok(form);
    }
    if spec.degree() > max_degree {
        return Ok(AForm::zero(d));
    }
    let m = spec.plan_truncation();
    ensure_feasible(m, d)?;
    let mut form = AForm::empty(m, d, 1);
    match spec {
        FunctionSpec::Monomial { alpha, .. } => {
            let entry = monomial_entry(&ExponentPair::entry_power(d, 0, 0, *alpha), m, d)?;
            form.place(entry.global, ONE);
            form.claimed_trace_norm = 1.0;
        }
        FunctionSpec::NormalizedTrace { .. } => {
            form.place_block(1, 0, &ComplexMatrix::identity(d).scale(C64::new(1.0 / d as f64, 0.0)));
            form.claimed_trace_norm = 1.0;
        }
        FunctionSpec::Determinant { .. } => {
            let psi = antisymmetric_state(d);
            form.place_block(d, 0, &ComplexMatrix::outer(&psi, &psi));
            form.claimed_trace_norm = 1.0;
        }
        FunctionSpec::IrrepEntry { label, i, j, .. } => {
            let (hol, anti) = label.minimal_ambient();
            if hol + anti > MAX_IRREP_DEGREE {
                return Err(Error::Unsupported(format!(
                    "irrep {label} needs m + m̄ = {} > {MAX_IRREP_DEGREE}",
                    hol + anti
                )));
            }
            let tw = solve_intertwiner(*label, hol, anti, &mut RngStream::new(INTERTWINER_SEED, 0))?;
            let u = tw.map.column(*j);
            let v = tw.map.column(*i);
            // Tr[|u><v| ρ(g)] = <v|ρ(g)|u> = π(g)_ij. The block holds
            // g^{⊗m} ⊗ (ḡ^{⊗m̄})ᵀ, so move the transpose onto A.
            let rank_one = ComplexMatrix::outer(&u, &v);
            let (dh, da) = (1usize << hol, 1usize << anti);
            let blk = linalg::partial_transpose(&rank_one, dh, da, Factor::Second)?;
            form.place_block(hol, anti, &blk);
            // (|u><v|)^Γ = (U ⊗ V†)·SWAP up to index order, so its trace norm
            // factorizes over the reshaped vectors.
            form.claimed_trace_norm =
                linalg::trace_norm(&reshape(&u, dh, da))? * linalg::trace_norm(&reshape(&v, dh, da))?;
        }
        FunctionSpec::UnivariatePoly { .. } => unreachable!(),
    }
    Ok(form)
}

fn cache() -> &'static Mutex<HashMap<String, Arc<AForm>>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<AForm>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// [`build_a`] memoized per spec.
pub fn build_a_cached(spec: &FunctionSpec) -> Result<Arc<AForm>> {
    let key = serde_json::to_string(spec).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    if let Some(hit) = cache().lock().expect("AForm cache poisoned").get(&key) {
        return Ok(Arc::clone(hit));
    }
    let form = Arc::new(build_a(spec)?);
    cache()
        .lock()
        .expect("AForm cache poisoned")
        .entry(key)
        .or_insert_with(|| Arc::clone(&form));
    Ok(form)
}

/// Total controlled-`g` queries of the PAC estimator: shots × `2m`.
pub fn q_bound(spec: &FunctionSpec, epsilon: f64, delta: f64) -> Result<u64> {
    spec.validate()?;
    let shots = crate::estimator::pac_shots(epsilon, delta, spec.trace_norm()?)?;
    Ok(shots * 2 * spec.plan_truncation() as u64)
}

/// `Rep_ε(f)`, the query lower bound for averaged-bias estimation.
pub fn rep_bound(spec: &FunctionSpec, epsilon: f64) -> Result<usize> {
    crate::fourier::rep_epsilon(&crate::fourier::RepQuery::new(spec.clone(), epsilon)?)
}
