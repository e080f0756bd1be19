//! Index bookkeeping between the circuit registers and the direct sum
//! `⊕_{0≤n,n'≤m} g^{⊗n} ⊗ g^{*⊗n'} ⊗ I_E`.
//!
//! The circuit operator is `(I⊕g*)_{AB}^{⊗m} ⊗ (I⊕g)_{CD}^{⊗m} ⊗ I_E`. It is
//! block diagonal over the qubit registers A and C, so each direct-sum block
//! sits on a coordinate subspace: C fixed to `1ⁿ0^{m-n}` with the first `n`
//! D digits free (g-powers), A fixed to `1^{n'}0^{m-n'}` with the first `n'`
//! B digits free (conjugate powers), every remaining qudit pinned to `|0>`.
//! The map `W` is therefore a pure index permutation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::ExponentPair;
use crate::linalg::{self, ComplexMatrix, C64, DEFAULT_AXIS_CAP, ZERO};

/// Largest side of a materialized direct-sum operator.
pub const DENSE_CAP: usize = 4096;

/// One `g^{⊗n} ⊗ g^{*⊗n'} ⊗ I_E` block of the direct sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BlockIndex {
    pub n: usize,
    pub nbar: usize,
    pub offset: usize,
    pub size: usize,
}

/// `(A₁B₁…A_mB_m, C₁D₁…C_mD_m, E)` dimension, `(2d)^{2m} · dimE`.
pub fn register_dim(m: usize, d: usize, dim_e: usize) -> Result<usize> {
    let half = (2 * d)
        .checked_pow(m as u32)
        .ok_or(Error::DimensionCap { requested: usize::MAX, cap: DEFAULT_AXIS_CAP })?;
    let total = half
        .checked_mul(half)
        .and_then(|x| x.checked_mul(dim_e))
        .unwrap_or(usize::MAX);
    if total > DEFAULT_AXIS_CAP {
        return Err(Error::DimensionCap { requested: total, cap: DEFAULT_AXIS_CAP });
    }
    Ok(total)
}

/// Blocks of the direct sum in lexicographic `(n, n')` order.
pub fn direct_sum_blocks(m: usize, d: usize, dim_e: usize) -> Vec<BlockIndex> {
    let mut blocks = Vec::with_capacity((m + 1) * (m + 1));
    let mut offset = 0;
    for n in 0..=m {
        for nbar in 0..=m {
            let size = d.pow((n + nbar) as u32) * dim_e;
            blocks.push(BlockIndex { n, nbar, offset, size });
            offset += size;
        }
    }
    blocks
}

/// Dimension of `⊕_{0≤n,n'≤m} g^{⊗n} ⊗ g^{*⊗n'} ⊗ I_E`.
pub fn direct_sum_dim(m: usize, d: usize, dim_e: usize) -> usize {
    let s: usize = (0..=m).map(|n| d.pow(n as u32)).sum();
    s * s * dim_e
}

/// Positions inside the `(2d)^m`-dimensional `A₁B₁…A_mB_m` space of the
/// block of `(I⊕g)^{⊗m}` selected by the qubit bitstring `bits`.
///
/// The block is `⊗_k (bits_k ? g : I_d)`, so all `d^m` qudit indices are
/// kept; entry `b` (big-endian qudit digits) maps to the register index with
/// each pair contributing the base-`2d` digit `bits_k·d + b_k`.
pub fn block_for_bits(bits: &[bool], d: usize) -> Vec<usize> {
    let m = bits.len();
    let count = d.pow(m as u32);
    (0..count)
        .map(|b| {
            let mut idx = 0;
            for (k, &bit) in bits.iter().enumerate() {
                let digit = (b / d.pow((m - 1 - k) as u32)) % d;
                idx = idx * 2 * d + usize::from(bit) * d + digit;
            }
            idx
        })
        .collect()
}

/// The permutation `W` for a given `(m, d, dimE)`.
///
/// `permutation[k]` is the register index holding direct-sum coordinate `k`
/// for `k < useful_dim`; the remaining (Garbage) indices follow in
/// ascending order.
#[derive(Clone, Debug)]
pub struct EmbeddingMap {
    pub m: usize,
    pub d: usize,
    pub dim_e: usize,
    pub blocks: Vec<BlockIndex>,
    pub permutation: Vec<usize>,
    pub useful_dim: usize,
}

impl EmbeddingMap {
    pub fn total_dim(&self) -> usize {
        self.permutation.len()
    }

    pub fn block(&self, n: usize, nbar: usize) -> Option<&BlockIndex> {
        if n > self.m || nbar > self.m {
            return None;
        }
        self.blocks.get(n * (self.m + 1) + nbar)
    }

    /// `W(φ̃ ⊕ 0)`.
    pub fn embed_state(&self, tilde: &[C64]) -> Result<Vec<C64>> {
        if tilde.len() != self.useful_dim {
            return Err(Error::Shape(format!(
                "state of length {} does not match direct-sum dimension {}",
                tilde.len(),
                self.useful_dim
            )));
        }
        let mut out = vec![ZERO; self.total_dim()];
        for (k, &z) in tilde.iter().enumerate() {
            out[self.permutation[k]] = z;
        }
        Ok(out)
    }

    /// `W*` restricted to the useful block: reads `φ̃` back out of `φ`.
    pub fn extract_state(&self, full: &[C64]) -> Vec<C64> {
        self.permutation[..self.useful_dim].iter().map(|&k| full[k]).collect()
    }
}

fn digits(mut x: usize, base: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = x % base;
        x /= base;
    }
    out
}

/// Register index of a pair register `X₁Y₁…X_mY_m` whose first `ones`
/// qubits are `1` carrying the qudit digits `free`, the rest pinned to `|0>`.
fn pair_register_index(m: usize, d: usize, ones: usize, free: &[usize]) -> usize {
    let mut idx = 0;
    for k in 0..m {
        let (bit, digit) = if k < ones { (1, free[k]) } else { (0, 0) };
        idx = idx * 2 * d + bit * d + digit;
    }
    idx
}

pub fn build_embedding(m: usize, d: usize, dim_e: usize) -> Result<EmbeddingMap> {
    if d == 0 || dim_e == 0 {
        return Err(Error::InvalidArgument("d and dimE must be positive".into()));
    }
    let total = register_dim(m, d, dim_e)?;
    let half = (2 * d).pow(m as u32);
    let blocks = direct_sum_blocks(m, d, dim_e);
    let useful_dim = direct_sum_dim(m, d, dim_e);

    let mut permutation = Vec::with_capacity(total);
    let mut used = vec![false; total];
    for b in &blocks {
        for local in 0..b.size {
            let e = local % dim_e;
            let qudits = digits(local / dim_e, d, b.n + b.nbar);
            // Local order is (g-slots, g*-slots, e); g rides on CD, g* on AB.
            let cd = pair_register_index(m, d, b.n, &qudits[..b.n]);
            let ab = pair_register_index(m, d, b.nbar, &qudits[b.n..]);
            let full = (ab * half + cd) * dim_e + e;
            used[full] = true;
            permutation.push(full);
        }
    }
    permutation.extend((0..total).filter(|&k| !used[k]));
    debug_assert_eq!(permutation.len(), total);

    Ok(EmbeddingMap {
        m,
        d,
        dim_e,
        blocks,
        permutation,
        useful_dim,
    })
}

/// `g^{⊗n} ⊗ g^{*⊗n'} ⊗ I_E` for one block.
pub fn block_operator(g: &ComplexMatrix, n: usize, nbar: usize, dim_e: usize) -> Result<ComplexMatrix> {
    let holo = linalg::tensor_power(g, n)?;
    let anti = linalg::tensor_power(&g.adjoint(), nbar)?;
    let blk = linalg::tensor(&holo, &anti)?;
    if dim_e == 1 {
        Ok(blk)
    } else {
        linalg::tensor(&blk, &ComplexMatrix::identity(dim_e))
    }
}

/// `⊕_{0≤n,n'≤m} g^{⊗n} ⊗ g^{*⊗n'} ⊗ I_E`, materialized densely.
pub fn direct_sum_operator(g: &ComplexMatrix, m: usize, dim_e: usize) -> Result<ComplexMatrix> {
    let d = g.rows();
    let total = direct_sum_dim(m, d, dim_e);
    if total > DENSE_CAP {
        return Err(Error::DimensionCap { requested: total, cap: DENSE_CAP });
    }
    let mut out = ComplexMatrix::zeros(total, total);
    for b in direct_sum_blocks(m, d, dim_e) {
        let blk = block_operator(g, b.n, b.nbar, dim_e)?;
        for r in 0..b.size {
            for c in 0..b.size {
                out[(b.offset + r, b.offset + c)] = blk[(r, c)];
            }
        }
    }
    Ok(out)
}

/// Location of a monomial inside the direct sum (with `dimE = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MonomialEntry {
    pub block: (usize, usize),
    pub local: (usize, usize),
    pub global: (usize, usize),
}

/// An entry of `⊕_{0≤n,n'≤m} g^{⊗n} ⊗ g^{*⊗n'}` equal to `g^α ḡ^{α'}`.
///
/// The `g_ij` factors, in lexicographic order, occupy the g-slots left to
/// right with row digit `i` and column digit `j`; each `ḡ_ij` factor
/// occupies a g*-slot with row digit `j` and column digit `i`, since
/// `(g*)_{ji} = ḡ_ij`.
pub fn monomial_entry(pair: &ExponentPair, m: usize, d: usize) -> Result<MonomialEntry> {
    if pair.d() != d {
        return Err(Error::Shape(format!("monomial is over U({}), expected U({d})", pair.d())));
    }
    let (n, nbar) = (pair.holomorphic_degree(), pair.antiholomorphic_degree());
    if n > m || nbar > m {
        return Err(Error::InvalidArgument(format!(
            "monomial of bidegree ({n}, {nbar}) does not fit truncation {m}"
        )));
    }
    let (mut row, mut col) = (0, 0);
    for (i, j) in pair.holomorphic_factors() {
        row = row * d + i;
        col = col * d + j;
    }
    for (i, j) in pair.antiholomorphic_factors() {
        row = row * d + j;
        col = col * d + i;
    }
    let offset = direct_sum_blocks(m, d, 1)[n * (m + 1) + nbar].offset;
    Ok(MonomialEntry {
        block: (n, nbar),
        local: (row, col),
        global: (offset + row, offset + col),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::{sample_haar, RngStream};
    use crate::linalg::ONE;

    fn c_plus(g: &ComplexMatrix) -> ComplexMatrix {
        linalg::direct_sum(&ComplexMatrix::identity(g.rows()), g).unwrap()
    }

    /// `(I⊕g*)^{⊗m} ⊗ (I⊕g)^{⊗m} ⊗ I_E`, materialized.
    fn circuit_operator(g: &ComplexMatrix, m: usize, dim_e: usize) -> ComplexMatrix {
        let ab = linalg::tensor_power(&c_plus(&g.adjoint()), m).unwrap();
        let cd = linalg::tensor_power(&c_plus(g), m).unwrap();
        let abcd = linalg::tensor(&ab, &cd).unwrap();
        linalg::tensor(&abcd, &ComplexMatrix::identity(dim_e)).unwrap()
    }

    fn check_conjugation(g: &ComplexMatrix, m: usize, dim_e: usize) {
        let d = g.rows();
        let w = build_embedding(m, d, dim_e).unwrap();
        let op = circuit_operator(g, m, dim_e);
        let target = direct_sum_operator(g, m, dim_e).unwrap();
        let u = w.useful_dim;
        let p = &w.permutation;
        for r in 0..w.total_dim() {
            for c in 0..w.total_dim() {
                let v = op[(p[r], p[c])];
                if r < u && c < u {
                    assert!((v - target[(r, c)]).norm() < 1e-10, "d {d} m {m} ({r},{c})");
                } else if (r < u) != (c < u) {
                    assert!(v.norm() < 1e-10, "useful/garbage coupling at ({r},{c})");
                }
            }
        }
    }

    #[test]
    fn block_layout_small() {
        let w = build_embedding(1, 2, 1).unwrap();
        assert_eq!(w.useful_dim, 9);
        let offsets: Vec<_> = w.blocks.iter().map(|b| (b.n, b.nbar, b.offset, b.size)).collect();
        assert_eq!(offsets, vec![(0, 0, 0, 1), (0, 1, 1, 2), (1, 0, 3, 2), (1, 1, 5, 4)]);
        assert_eq!(w.total_dim(), 16);
        linalg::check_permutation(&w.permutation, 16).unwrap();
        assert_eq!(direct_sum_dim(2, 3, 2), 13 * 13 * 2);
    }

    #[test]
    fn block_for_bits_examples() {
        assert_eq!(block_for_bits(&[true], 2), vec![2, 3]);
        assert_eq!(block_for_bits(&[false], 2), vec![0, 1]);
        let rng = &mut RngStream::new(20, 0);
        let g = sample_haar(2, rng).unwrap();
        let full = linalg::tensor_power(&c_plus(&g), 2).unwrap();
        let idx = block_for_bits(&[true, false], 2);
        let expected = linalg::tensor(&g, &ComplexMatrix::identity(2)).unwrap();
        for (r, &ir) in idx.iter().enumerate() {
            for (c, &ic) in idx.iter().enumerate() {
                assert!((full[(ir, ic)] - expected[(r, c)]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn conjugation_at_identity() {
        let w = build_embedding(2, 2, 1).unwrap();
        let op = circuit_operator(&ComplexMatrix::identity(2), 2, 1);
        for r in 0..w.useful_dim {
            for c in 0..w.useful_dim {
                let want = if r == c { ONE } else { ZERO };
                assert_eq!(op[(w.permutation[r], w.permutation[c])], want);
            }
        }
    }

    #[test]
    fn conjugation_identity_random_g() {
        let mut rng = RngStream::new(21, 0);
        for d in [2, 3] {
            for m in [1, 2] {
                for _ in 0..10 {
                    let g = sample_haar(d, &mut rng).unwrap();
                    check_conjugation(&g, m, 1);
                }
            }
        }
        let g = sample_haar(2, &mut rng).unwrap();
        check_conjugation(&g, 1, 3);
    }

    #[test]
    fn embedding_composes_across_truncations() {
        for (m, d, dim_e) in [(2, 2, 1), (2, 3, 1), (3, 2, 2)] {
            let big = build_embedding(m, d, dim_e).unwrap();
            let small = build_embedding(m - 1, d, dim_e).unwrap();
            let half_small = (2 * d).pow((m - 1) as u32);
            for sb in &small.blocks {
                let bb = big.block(sb.n, sb.nbar).unwrap();
                assert_eq!(bb.size, sb.size);
                for l in 0..sb.size {
                    let full = small.permutation[sb.offset + l];
                    let e = full % dim_e;
                    let rest = full / dim_e;
                    let (ab, cd) = (rest / half_small, rest % half_small);
                    let half_big = half_small * 2 * d;
                    let included = ((ab * 2 * d) * half_big + cd * 2 * d) * dim_e + e;
                    assert_eq!(big.permutation[bb.offset + l], included);
                }
            }
        }
    }

    #[test]
    fn embed_and_extract_round_trip() {
        let w = build_embedding(1, 3, 2).unwrap();
        let tilde: Vec<C64> = (0..w.useful_dim).map(|k| C64::new(k as f64, -(k as f64))).collect();
        let full = w.embed_state(&tilde).unwrap();
        assert_eq!(w.extract_state(&full), tilde);
        assert!(w.embed_state(&tilde[1..]).is_err());
    }

    #[test]
    fn monomial_entry_examples() {
        let g11 = ExponentPair::entry_power(2, 0, 0, 1);
        let e = monomial_entry(&g11, 1, 2).unwrap();
        assert_eq!(e.block, (1, 0));
        assert_eq!(e.local, (0, 0));
        assert_eq!(e.global, (3, 3));

        let gbar12 = ExponentPair::new(2, vec![0; 4], vec![0, 1, 0, 0]).unwrap();
        let e = monomial_entry(&gbar12, 1, 2).unwrap();
        assert_eq!(e.block, (0, 1));
        assert_eq!(e.local, (1, 0));

        let mixed = ExponentPair::new(2, vec![0, 1, 0, 0], vec![0, 0, 0, 1]).unwrap();
        let e = monomial_entry(&mixed, 1, 2).unwrap();
        assert_eq!(e.block, (1, 1));
        let mut rng = RngStream::new(22, 0);
        for _ in 0..20 {
            let g = sample_haar(2, &mut rng).unwrap();
            let sum = direct_sum_operator(&g, 1, 1).unwrap();
            assert!((sum[e.global] - g[(0, 1)] * g[(1, 1)].conj()).norm() < 1e-12);
        }

        assert!(monomial_entry(&ExponentPair::entry_power(2, 0, 0, 2), 1, 2).is_err());
        assert!(monomial_entry(&g11, 1, 3).is_err());
    }

    fn random_pair(d: usize, m: usize, rng: &mut RngStream) -> ExponentPair {
        let mut alpha = vec![0u32; d * d];
        let mut alpha_bar = vec![0u32; d * d];
        let n = (rng.uniform() * (m + 1) as f64) as usize;
        let nbar = (rng.uniform() * (m + 1) as f64) as usize;
        for _ in 0..n {
            alpha[(rng.uniform() * (d * d) as f64) as usize] += 1;
        }
        for _ in 0..nbar {
            alpha_bar[(rng.uniform() * (d * d) as f64) as usize] += 1;
        }
        ExponentPair::new(d, alpha, alpha_bar).unwrap()
    }

    #[test]
    fn monomial_entries_match_direct_sum_operator() {
        let mut rng = RngStream::new(23, 0);
        for (d, m) in [(2, 1), (2, 2), (3, 1), (3, 2)] {
            let gs: Vec<ComplexMatrix> = (0..10).map(|_| sample_haar(d, &mut rng).unwrap()).collect();
            let sums: Vec<ComplexMatrix> = gs.iter().map(|g| direct_sum_operator(g, m, 1).unwrap()).collect();
            for _ in 0..25 {
                let pair = random_pair(d, m, &mut rng);
                let e = monomial_entry(&pair, m, d).unwrap();
                for (g, sum) in gs.iter().zip(&sums) {
                    assert!((sum[e.global] - pair.eval(g)).norm() < 1e-12, "{pair:?}");
                }
            }
        }
    }
}
