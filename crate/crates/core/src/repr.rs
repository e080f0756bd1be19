//! Unitary irreducible representations of U(2) and numeric intertwiners
//! into the tensor-power representations `g^{⊗m} ⊗ ḡ^{⊗m̄}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::haar::{sample_haar, RngStream};
use crate::linalg::{self, ComplexMatrix, C64, ONE, ZERO};

/// Tolerance on `U(2)` membership of arguments.
const INPUT_UNITARY_TOL: f64 = 1e-10;
/// Tolerance on intertwiner isometry and equivariance.
const INTERTWINER_TOL: f64 = 1e-8;
/// Samples stacked into the equivariance system.
const EQUIVARIANCE_SAMPLES: usize = 8;
/// Fresh samples used to verify a solved intertwiner.
const VERIFY_SAMPLES: usize = 20;
/// Largest `m + m̄` the intertwiner solver accepts.
pub const MAX_AMBIENT_DEGREE: usize = 6;

/// Highest weight `(λ₁, λ₂)` of an irrep of U(2), with `λ₁ ≥ λ₂`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(i32, i32)", into = "(i32, i32)")]
pub struct IrrepLabel {
    lambda1: i32,
    lambda2: i32,
}

impl IrrepLabel {
    pub fn new(lambda1: i32, lambda2: i32) -> Result<Self> {
        if lambda1 < lambda2 {
            return Err(Error::InvalidArgument(format!(
                "irrep label ({lambda1},{lambda2}) is not non-increasing"
            )));
        }
        Ok(Self { lambda1, lambda2 })
    }

    pub fn lambda1(&self) -> i32 {
        self.lambda1
    }

    pub fn lambda2(&self) -> i32 {
        self.lambda2
    }

    pub fn dim(&self) -> usize {
        (self.lambda1 - self.lambda2) as usize + 1
    }

    /// Label of the conjugate representation, `(-λ₂, -λ₁)`.
    pub fn conjugate(&self) -> Self {
        Self {
            lambda1: -self.lambda2,
            lambda2: -self.lambda1,
        }
    }

    /// Smallest `(m, m̄)` with this irrep inside `g^{⊗m} ⊗ ḡ^{⊗m̄}`: the sums
    /// of the positive parts and of the magnitudes of the negative parts.
    pub fn minimal_ambient(&self) -> (usize, usize) {
        let pos = self.lambda1.max(0) + self.lambda2.max(0);
        let neg = (-self.lambda1).max(0) + (-self.lambda2).max(0);
        (pos as usize, neg as usize)
    }

    /// Total polynomial degree of the matrix entries, `m + m̄` of the minimal
    /// ambient representation.
    pub fn degree(&self) -> usize {
        let (m, mbar) = self.minimal_ambient();
        m + mbar
    }
}

impl TryFrom<(i32, i32)> for IrrepLabel {
    type Error = Error;

    fn try_from((a, b): (i32, i32)) -> Result<Self> {
        Self::new(a, b)
    }
}

impl From<IrrepLabel> for (i32, i32) {
    fn from(l: IrrepLabel) -> Self {
        (l.lambda1, l.lambda2)
    }
}

impl fmt::Display for IrrepLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.lambda1, self.lambda2)
    }
}

impl FromStr for IrrepLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches('(').trim_end_matches(')');
        let parts: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let bad = || Error::InvalidArgument(format!("cannot parse irrep label {s:?}"));
        if parts.len() != 2 {
            return Err(bad());
        }
        let a = parts[0].parse().map_err(|_| bad())?;
        let b = parts[1].parse().map_err(|_| bad())?;
        Self::new(a, b)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn ensure_u2(g: &ComplexMatrix) -> Result<()> {
    if g.rows() != 2 || g.cols() != 2 {
        return Err(Error::Shape(format!(
            "expected a 2x2 unitary, got {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    g.ensure_unitary(INPUT_UNITARY_TOL)
}

/// `Sym^k(g)` in the orthonormal basis of symmetric states indexed by the
/// number of `1`s: `|S_j> ∝ Σ_{|x|=j} |x>`.
fn symmetric_power(g: &ComplexMatrix, k: usize) -> ComplexMatrix {
    let (g00, g01, g10, g11) = (g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
    ComplexMatrix::from_fn(k + 1, k + 1, |i, j| {
        let mut sum = ZERO;
        for r in 0..=i.min(j) {
            if i - r > k - j {
                continue;
            }
            let coeff = binomial(j, r) * binomial(k - j, i - r);
            sum += g11.powu(r as u32)
                * g01.powu((j - r) as u32)
                * g10.powu((i - r) as u32)
                * g00.powu((k - j - (i - r)) as u32)
                * coeff;
        }
        sum * (binomial(k, j) / binomial(k, i)).sqrt()
    })
}

/// `π_λ(g) = (det g)^{λ₂} · Sym^{λ₁-λ₂}(g)`.
///
/// Negative powers of the determinant are taken as powers of its conjugate,
/// which is only valid because `|det g| = 1` on U(2).
pub fn irrep_u2(label: IrrepLabel, g: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_u2(g)?;
    Ok(irrep_u2_unchecked(label, g))
}

fn irrep_u2_unchecked(label: IrrepLabel, g: &ComplexMatrix) -> ComplexMatrix {
    let k = (label.lambda1 - label.lambda2) as usize;
    let det = g.determinant();
    let det_factor = if label.lambda2 >= 0 {
        det.powu(label.lambda2 as u32)
    } else {
        det.conj().powu((-label.lambda2) as u32)
    };
    symmetric_power(g, k).scale(det_factor)
}

/// `Tr π_λ(g)`.
pub fn character(label: IrrepLabel, g: &ComplexMatrix) -> Result<C64> {
    Ok(irrep_u2(label, g)?.trace())
}

/// `g^{⊗m} ⊗ ḡ^{⊗m̄}`.
pub fn ambient_rep(g: &ComplexMatrix, m: usize, mbar: usize) -> Result<ComplexMatrix> {
    let holo = linalg::tensor_power(g, m)?;
    let anti = linalg::tensor_power(&g.conj(), mbar)?;
    linalg::tensor(&holo, &anti)
}

/// Multiplicity of `π_λ` in `g^{⊗m} ⊗ ḡ^{⊗m̄}` as the character inner product,
/// evaluated with the Weyl integration formula on the maximal torus.
///
/// Both characters are trigonometric polynomials of degree well below the
/// grid size, so the quadrature is exact up to rounding.
pub fn isotypic_multiplicity(label: IrrepLabel, m: usize, mbar: usize) -> f64 {
    let grid = 4 * (m + mbar + label.lambda1.unsigned_abs() as usize + label.lambda2.unsigned_abs() as usize) + 8;
    let step = 2.0 * std::f64::consts::PI / grid as f64;
    let mut total = ZERO;
    for a in 0..grid {
        for b in 0..grid {
            let z1 = C64::from_polar(1.0, a as f64 * step);
            let z2 = C64::from_polar(1.0, b as f64 * step);
            let torus = ComplexMatrix::diagonal(&[z1, z2]);
            let chi_lambda = irrep_u2_unchecked(label, &torus).trace();
            let tr = z1 + z2;
            let chi_ambient = tr.powu(m as u32) * tr.conj().powu(mbar as u32);
            let weyl = (z1 - z2).norm_sqr() / 2.0;
            total += chi_lambda.conj() * chi_ambient * weyl;
        }
    }
    (total / (grid * grid) as f64).re
}

/// Isometric embedding `T` of `V_λ` into `(C²)^{⊗(m+m̄)}` with
/// `ρ(g)·T = T·π_λ(g)` for `ρ(g) = g^{⊗m} ⊗ ḡ^{⊗m̄}`.
#[derive(Clone, Debug)]
pub struct Intertwiner {
    pub map: ComplexMatrix,
    pub label: IrrepLabel,
    pub m: usize,
    pub mbar: usize,
}

impl Intertwiner {
    /// `max |ρ(g)T − Tπ_λ(g)|`.
    pub fn equivariance_residual(&self, g: &ComplexMatrix) -> Result<f64> {
        let rho = ambient_rep(g, self.m, self.mbar)?;
        let pi = irrep_u2(self.label, g)?;
        Ok((&rho * &self.map).sub(&(&self.map * &pi)).max_abs())
    }

    pub fn isometry_residual(&self) -> f64 {
        let gram = &self.map.adjoint() * &self.map;
        gram.sub(&ComplexMatrix::identity(self.label.dim())).max_abs()
    }
}

/// Locates one copy of `π_λ` inside `g^{⊗m} ⊗ ḡ^{⊗m̄}` numerically.
///
/// The equivariance constraints for several Haar samples are stacked into one
/// linear system whose null space (found by SVD) is the space of
/// intertwiners. Among the orthonormal null vectors, the one whose first
/// non-negligible entry in row-major order is largest is kept, and its phase
/// is fixed so that entry is real and positive.
pub fn solve_intertwiner(
    label: IrrepLabel,
    m: usize,
    mbar: usize,
    rng: &mut RngStream,
) -> Result<Intertwiner> {
    if m + mbar > MAX_AMBIENT_DEGREE {
        return Err(Error::Unsupported(format!(
            "intertwiners need m + m̄ <= {MAX_AMBIENT_DEGREE}, got {}",
            m + mbar
        )));
    }
    let multiplicity = isotypic_multiplicity(label, m, mbar);
    if multiplicity < 0.5 {
        return Err(Error::EmptyIsotypic {
            label: label.to_string(),
            m,
            mbar,
        });
    }
    let expected = multiplicity.round() as usize;

    let dim = label.dim();
    let amb = 1usize << (m + mbar);
    let n = amb * dim;
    let mut system = ComplexMatrix::zeros(EQUIVARIANCE_SAMPLES * n, n);
    for s in 0..EQUIVARIANCE_SAMPLES {
        let g = sample_haar(2, rng)?;
        let rho = ambient_rep(&g, m, mbar)?;
        let pi = irrep_u2_unchecked(label, &g);
        // Row-major vec: vec(ρT) = (ρ ⊗ I) vec T, vec(Tπ) = (I ⊗ πᵀ) vec T.
        for a in 0..amb {
            for b in 0..dim {
                let row = s * n + a * dim + b;
                for c in 0..amb {
                    system[(row, c * dim + b)] += rho[(a, c)];
                }
                for c in 0..dim {
                    system[(row, a * dim + c)] -= pi[(c, b)];
                }
            }
        }
    }

    let factors = linalg::svd(&system)?;
    let top = factors.singulars[0].max(1.0);
    let null: Vec<usize> = (0..n)
        .filter(|&k| factors.singulars[k] <= 1e-7 * top)
        .collect();
    if null.len() != expected {
        return Err(Error::RankDeficiency {
            expected,
            found: null.len(),
        });
    }

    // A v* e_k = σ_k U e_k, so null vectors are conjugated rows of V.
    let scale = (dim as f64).sqrt();
    let candidates: Vec<Vec<C64>> = null
        .iter()
        .map(|&k| factors.right.row(k).iter().map(|z| z.conj() * scale).collect())
        .collect();
    let lead = |v: &[C64]| {
        v.iter()
            .copied()
            .find(|z| z.norm() > INTERTWINER_TOL)
            .unwrap_or(ZERO)
    };
    let mut best = 0;
    for (i, cand) in candidates.iter().enumerate() {
        if lead(cand).norm() > lead(&candidates[best]).norm() + 1e-12 {
            best = i;
        }
    }
    let chosen = &candidates[best];
    let pivot = lead(chosen);
    let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { ONE };
    let map = ComplexMatrix::from_fn(amb, dim, |a, b| chosen[a * dim + b] * phase);

    let tw = Intertwiner { map, label, m, mbar };
    let iso = tw.isometry_residual();
    if iso > INTERTWINER_TOL {
        return Err(Error::IntertwinerCheck(format!("isometry residual {iso:.3e}")));
    }
    for _ in 0..VERIFY_SAMPLES {
        let g = sample_haar(2, rng)?;
        let res = tw.equivariance_residual(&g)?;
        if res > INTERTWINER_TOL {
            return Err(Error::IntertwinerCheck(format!("equivariance residual {res:.3e}")));
        }
    }
    Ok(tw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::mc_integrate;

    fn label(a: i32, b: i32) -> IrrepLabel {
        IrrepLabel::new(a, b).unwrap()
    }

    fn labels_up_to(spread: i32, shift: i32) -> Vec<IrrepLabel> {
        let mut out = Vec::new();
        for l2 in -shift..=shift {
            for k in 0..=spread {
                out.push(label(l2 + k, l2));
            }
        }
        out
    }

    #[test]
    fn label_validation_and_parsing() {
        assert!(IrrepLabel::new(0, 1).is_err());
        assert_eq!("(2,0)".parse::<IrrepLabel>().unwrap(), label(2, 0));
        assert_eq!("1, -1".parse::<IrrepLabel>().unwrap(), label(1, -1));
        assert!("1".parse::<IrrepLabel>().is_err());
        assert_eq!(label(3, -1).conjugate(), label(1, -3));
        assert_eq!(label(1, -1).minimal_ambient(), (1, 1));
        assert_eq!(label(2, 0).minimal_ambient(), (2, 0));
        assert_eq!(label(0, -2).minimal_ambient(), (0, 2));
        assert_eq!(label(0, 0).degree(), 0);
    }

    #[test]
    fn defining_and_determinant_reps() {
        let g = sample_haar(2, &mut RngStream::new(1, 0)).unwrap();
        let pi = irrep_u2(label(1, 0), &g).unwrap();
        assert!(pi.sub(&g).max_abs() < 1e-15);
        let det = irrep_u2(label(1, 1), &g).unwrap();
        assert_eq!(det.rows(), 1);
        assert!((det[(0, 0)] - g.determinant()).norm() < 1e-14);
    }

    #[test]
    fn sym2_of_diagonal() {
        let a = C64::from_polar(1.0, 0.3);
        let b = C64::from_polar(1.0, -1.1);
        let g = ComplexMatrix::diagonal(&[a, b]);
        let pi = irrep_u2(label(2, 0), &g).unwrap();
        let expected = ComplexMatrix::diagonal(&[a * a, a * b, b * b]);
        assert!(pi.sub(&expected).max_abs() < 1e-15);
    }

    #[test]
    fn sym_power_matches_symmetric_subspace_restriction() {
        // Oracle: restrict g^{⊗k} to explicitly built normalized symmetric states.
        let g = sample_haar(2, &mut RngStream::new(2, 0)).unwrap();
        for k in 1..=4usize {
            let gk = linalg::tensor_power(&g, k).unwrap();
            let states: Vec<Vec<C64>> = (0..=k)
                .map(|j| {
                    let mut v = vec![ZERO; 1 << k];
                    for (x, slot) in v.iter_mut().enumerate() {
                        if (x as u32).count_ones() as usize == j {
                            *slot = ONE;
                        }
                    }
                    let norm = linalg::vec_norm(&v);
                    v.iter().map(|z| z / norm).collect()
                })
                .collect();
            let pi = irrep_u2(label(k as i32, 0), &g).unwrap();
            for i in 0..=k {
                for j in 0..=k {
                    let direct = linalg::inner_product(&states[i], &gk.mat_vec(&states[j]));
                    assert!((direct - pi[(i, j)]).norm() < 1e-13, "k {k} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn homomorphism_and_unitarity() {
        let mut rng = RngStream::new(3, 0);
        for l in labels_up_to(4, 2) {
            for _ in 0..50 {
                let g = sample_haar(2, &mut rng).unwrap();
                let h = sample_haar(2, &mut rng).unwrap();
                let lhs = irrep_u2(l, &(&g * &h)).unwrap();
                let rhs = &irrep_u2(l, &g).unwrap() * &irrep_u2(l, &h).unwrap();
                assert!(lhs.sub(&rhs).max_abs() < 1e-9, "label {l}");
                assert!(irrep_u2(l, &g).unwrap().unitarity_deviation() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_non_unitary_input() {
        let g = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert!(matches!(irrep_u2(label(1, 0), &g), Err(Error::NotUnitary { .. })));
        assert!(irrep_u2(label(1, 0), &ComplexMatrix::identity(3)).is_err());
    }

    #[test]
    fn characters() {
        assert_eq!(character(label(1, 0), &ComplexMatrix::identity(2)).unwrap(), C64::new(2.0, 0.0));
        let g = sample_haar(2, &mut RngStream::new(4, 0)).unwrap();
        assert!((character(label(1, 1), &g).unwrap() - g.determinant()).norm() < 1e-14);
        for l in [label(2, 0), label(1, -1), label(3, 1)] {
            let est = mc_integrate(
                |g| Ok(C64::new(character(l, g)?.norm_sqr(), 0.0)),
                2,
                100_000,
                &RngStream::new(5, l.dim() as u64),
            )
            .unwrap();
            assert!(est.within(ONE, 3.0), "{l}: {est:?}");
        }
    }

    #[test]
    fn schur_orthogonality_for_defining_rep() {
        let rng = RngStream::new(6, 0);
        let dim = 2;
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    for l in 0..dim {
                        let est = mc_integrate(
                            |g| Ok(g[(i, j)].conj() * g[(k, l)]),
                            2,
                            100_000,
                            &rng.split((i * 8 + j * 4 + k * 2 + l) as u64),
                        )
                        .unwrap();
                        let target = if i == k && j == l { 0.5 } else { 0.0 };
                        assert!(est.within(C64::new(target, 0.0), 3.0), "({i}{j},{k}{l}) {est:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn multiplicities_from_weyl_integration() {
        let cases = [
            (label(1, 0), 1, 0, 1.0),
            (label(2, 0), 2, 0, 1.0),
            (label(1, 1), 2, 0, 1.0),
            (label(0, 0), 1, 1, 1.0),
            (label(1, -1), 1, 1, 1.0),
            (label(1, 0), 2, 1, 2.0),
            (label(3, 0), 2, 0, 0.0),
            (label(2, -1), 2, 1, 1.0),
        ];
        for (l, m, mbar, want) in cases {
            let got = isotypic_multiplicity(l, m, mbar);
            assert!((got - want).abs() < 1e-10, "{l} in ({m},{mbar}): {got}");
        }
    }

    #[test]
    fn intertwiner_defining_rep_is_identity() {
        let tw = solve_intertwiner(label(1, 0), 1, 0, &mut RngStream::new(7, 0)).unwrap();
        assert!(tw.map.sub(&ComplexMatrix::identity(2)).max_abs() < 1e-8);
    }

    #[test]
    fn intertwiner_onto_symmetric_subspace() {
        let tw = solve_intertwiner(label(2, 0), 2, 0, &mut RngStream::new(8, 0)).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expected = ComplexMatrix::from_real_rows(&[
            &[1.0, 0.0, 0.0],
            &[0.0, r, 0.0],
            &[0.0, r, 0.0],
            &[0.0, 0.0, 1.0],
        ]);
        assert!(tw.map.sub(&expected).max_abs() < 1e-8, "{:?}", tw.map);
    }

    #[test]
    fn intertwiner_trivial_in_g_gbar_is_maximally_entangled() {
        let tw = solve_intertwiner(label(0, 0), 1, 1, &mut RngStream::new(9, 0)).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expected = ComplexMatrix::from_real_rows(&[&[r], &[0.0], &[0.0], &[r]]);
        assert!(tw.map.sub(&expected).max_abs() < 1e-8, "{:?}", tw.map);
    }

    #[test]
    fn intertwiner_with_multiplicity_two() {
        let mut rng = RngStream::new(10, 0);
        let tw = solve_intertwiner(label(1, 0), 2, 1, &mut rng).unwrap();
        assert!(tw.isometry_residual() < 1e-8);
        let g = sample_haar(2, &mut rng).unwrap();
        assert!(tw.equivariance_residual(&g).unwrap() < 1e-8);
    }

    #[test]
    fn intertwiner_errors() {
        let mut rng = RngStream::new(11, 0);
        assert!(matches!(
            solve_intertwiner(label(3, 0), 2, 0, &mut rng),
            Err(Error::EmptyIsotypic { .. })
        ));
        assert!(matches!(
            solve_intertwiner(label(1, 0), 5, 2, &mut rng),
            Err(Error::Unsupported(_))
        ));
    }
}
