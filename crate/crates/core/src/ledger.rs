//! Block-encoding resource ledger.
//!
//! A [`BlockEncodingDescriptor`] tracks normalization `alpha`, ancilla count, error
//! `eps` and per-oracle query counters, together with the operator it encodes
//! (`payload`, stored un-normalized). Composition rules mirror the usual product,
//! LCU, multiplexed-shift and QSVT-inverse lemmas; the payload is computed
//! numerically alongside so every ledger entry can be checked against a registered
//! target.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::gaussian;
use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;

/// Constant `c_q` in the QSVT query multiplier.
pub const C_Q: f64 = 1.0;
/// Ancillas added by one QSVT inverse.
pub const QSVT_ANCILLAS: usize = 2;
/// Selector ancilla of a multiplexed shift gadget.
pub const MUX_ANCILLAS: usize = 1;
/// Ancilla of a diagonal contraction.
pub const CONTRACTION_ANCILLAS: usize = 1;

const UNIT_TOL: f64 = 1e-12;

/// Operator carried by a descriptor: dense, or a direct sum over an index register.
#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Dense(ComplexMatrix),
    BlockDiag(Vec<ComplexMatrix>),
}

impl Payload {
    pub fn block_count(&self) -> usize {
        match self {
            Payload::Dense(_) => 1,
            Payload::BlockDiag(b) => b.len(),
        }
    }

    /// Shape of one block (the whole matrix when dense).
    pub fn block_shape(&self) -> (usize, usize) {
        match self {
            Payload::Dense(m) => (m.rows(), m.cols()),
            Payload::BlockDiag(b) => (b[0].rows(), b[0].cols()),
        }
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        match self {
            Payload::Dense(m) => std::slice::from_ref(m),
            Payload::BlockDiag(b) => b,
        }
    }

    /// Operator norm (maximum over blocks for a direct sum).
    pub fn norm(&self) -> f64 {
        self.blocks().par_iter().map(|b| b.operator_norm()).reduce(|| 0.0, f64::max)
    }

    /// Operator-norm distance to another payload of the same layout.
    pub fn distance(&self, other: &Payload) -> Result<f64> {
        if self.block_count() != other.block_count() || self.block_shape() != other.block_shape() {
            return Err(Error::Dimension("payload layouts differ".into()));
        }
        Ok(self
            .blocks()
            .par_iter()
            .zip(other.blocks().par_iter())
            .map(|(a, b)| (a - b).operator_norm())
            .reduce(|| 0.0, f64::max))
    }

    /// Dense matrix; a direct sum is expanded block-diagonally.
    pub fn to_dense(&self) -> ComplexMatrix {
        match self {
            Payload::Dense(m) => m.clone(),
            Payload::BlockDiag(blocks) => {
                let (r, c) = self.block_shape();
                let n = blocks.len();
                let mut out = ComplexMatrix::zeros(r * n, c * n);
                for (j, b) in blocks.iter().enumerate() {
                    for p in 0..r {
                        for q in 0..c {
                            out[(j * r + p, j * c + q)] = b[(p, q)];
                        }
                    }
                }
                out
            }
        }
    }

    fn scale(&self, z: Complex64) -> Payload {
        match self {
            Payload::Dense(m) => Payload::Dense(m.scale(z)),
            Payload::BlockDiag(b) => Payload::BlockDiag(b.iter().map(|m| m.scale(z)).collect()),
        }
    }

    fn mul(&self, rhs: &Payload) -> Result<Payload> {
        match (self, rhs) {
            (Payload::Dense(a), Payload::Dense(b)) => {
                if a.cols() != b.rows() {
                    return Err(Error::Dimension(format!("product of {}x{} and {}x{}", a.rows(), a.cols(), b.rows(), b.cols())));
                }
                Ok(Payload::Dense(a * b))
            }
            (Payload::BlockDiag(a), Payload::BlockDiag(b)) => {
                if a.len() != b.len() || a[0].cols() != b[0].rows() {
                    return Err(Error::Dimension("direct-sum product layout mismatch".into()));
                }
                Ok(Payload::BlockDiag(a.par_iter().zip(b.par_iter()).map(|(x, y)| x * y).collect()))
            }
            _ => Err(Error::Dimension("cannot multiply a dense payload with a direct sum".into())),
        }
    }
}

/// Block-encoding descriptor `(alpha, ancillas, eps)` with query counters.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockEncodingDescriptor {
    pub alpha: f64,
    pub ancillas: usize,
    pub eps: f64,
    pub payload: Payload,
    pub queries: BTreeMap<String, u64>,
    /// Upper bound on the norm of the encoded target, used for error propagation.
    pub target_norm: f64,
    /// Operator the descriptor claims to approximate within `eps`.
    pub target: Option<Payload>,
}

/// JSON form embedded in reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub alpha: f64,
    pub ancillas: usize,
    pub eps: f64,
    pub queries: BTreeMap<String, u64>,
}

fn merge_queries(a: &BTreeMap<String, u64>, b: &BTreeMap<String, u64>) -> BTreeMap<String, u64> {
    let mut out = a.clone();
    for (k, v) in b {
        *out.entry(k.clone()).or_insert(0) += v;
    }
    out
}

fn index_ancillas(n: usize) -> usize {
    (usize::BITS - (n.max(1) - 1).leading_zeros()) as usize + 1
}

/// `⌈c_q · norm_inv · ln(max(e, 2 norm_inv / eps_inv))⌉`.
pub fn qsvt_query_multiplier(norm_inv: f64, eps_inv: f64, c_q: f64) -> u64 {
    let arg = (2.0 * norm_inv / eps_inv).max(std::f64::consts::E);
    (c_q * norm_inv * arg.ln()).ceil() as u64
}

/// Node coefficients `(α_j, β_j)` of a multiplexed shift `α_j T + β_j I` (or `α_j T + β_j U`).
pub type ShiftCoefficients = Vec<(Complex64, Complex64)>;

/// The three multiplexed gadgets.
#[derive(Clone, Debug)]
pub enum MuxShift<'a> {
    OneMatrix { t: &'a BlockEncodingDescriptor, coeffs: ShiftCoefficients },
    TwoMatrix { t: &'a BlockEncodingDescriptor, u: &'a BlockEncodingDescriptor, coeffs: ShiftCoefficients },
    DiagContraction { dim: usize, deltas: Vec<f64> },
}

impl BlockEncodingDescriptor {
    /// Unit block-encoding of an input matrix with `||m|| <= 1`, one query per use.
    pub fn oracle(name: &str, m: &ComplexMatrix, ancillas: usize) -> Result<Self> {
        let mut q = BTreeMap::new();
        q.insert(name.to_string(), 1);
        Self::oracle_with_queries(m, ancillas, q)
    }

    /// Unit block-encoding whose single use costs the given query counts.
    pub fn oracle_with_queries(m: &ComplexMatrix, ancillas: usize, queries: BTreeMap<String, u64>) -> Result<Self> {
        let norm = m.operator_norm();
        if norm > 1.0 + UNIT_TOL {
            return Err(Error::Ledger(format!("input oracle has norm {norm} > 1")));
        }
        Ok(Self {
            alpha: 1.0,
            ancillas,
            eps: 0.0,
            payload: Payload::Dense(m.clone()),
            queries,
            target_norm: norm,
            target: Some(Payload::Dense(m.clone())),
        })
    }

    /// Exact identity, no queries.
    pub fn identity(n: usize) -> Self {
        let id = ComplexMatrix::identity(n);
        Self {
            alpha: 1.0,
            ancillas: 0,
            eps: 0.0,
            payload: Payload::Dense(id.clone()),
            queries: BTreeMap::new(),
            target_norm: 1.0,
            target: Some(Payload::Dense(id)),
        }
    }

    pub fn summary(&self) -> LedgerSummary {
        LedgerSummary { alpha: self.alpha, ancillas: self.ancillas, eps: self.eps, queries: self.queries.clone() }
    }

    pub fn query(&self, name: &str) -> u64 {
        self.queries.get(name).copied().unwrap_or(0)
    }

    /// `||target - payload||` when a target is registered.
    pub fn target_residual(&self) -> Option<f64> {
        self.target.as_ref().map(|t| t.distance(&self.payload).expect("target layout matches payload"))
    }

    /// Attaches a verification target (e.g. an oracle solution).
    pub fn with_target(mut self, target: ComplexMatrix) -> Result<Self> {
        let t = Payload::Dense(target);
        t.distance(&self.payload)?;
        self.target = Some(t);
        Ok(self)
    }

    pub fn without_target(mut self) -> Self {
        self.target = None;
        self
    }

    /// Same circuit, re-read as encoding `factor · target` with normalization `factor · alpha`.
    pub fn rescale(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::Ledger("rescale factor must be positive".into()));
        }
        let z = Complex64::new(factor, 0.0);
        Ok(Self {
            alpha: self.alpha * factor,
            ancillas: self.ancillas,
            eps: self.eps * factor,
            payload: self.payload.scale(z),
            queries: self.queries.clone(),
            target_norm: self.target_norm * factor,
            target: self.target.as_ref().map(|t| t.scale(z)),
        })
    }

    /// Treats the current payload as the exact target (the circuit encodes it exactly).
    pub fn rebase_exact(&self) -> Self {
        Self {
            eps: 0.0,
            target_norm: self.payload.norm(),
            target: Some(self.payload.clone()),
            ..self.clone()
        }
    }

    /// Re-targets the descriptor at an operator within `extra` of the current target.
    pub fn add_error(&self, extra: f64) -> Result<Self> {
        if !(extra >= 0.0) {
            return Err(Error::Ledger("extra error must be nonnegative".into()));
        }
        Ok(Self { eps: self.eps + extra, target_norm: self.target_norm + extra, target: None, ..self.clone() })
    }

    /// Compression onto a sub-block of a dense payload.
    pub fn sub_block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Result<Self> {
        let take = |p: &Payload| match p {
            Payload::Dense(m) if r0 + nr <= m.rows() && c0 + nc <= m.cols() => Ok(Payload::Dense(m.block(r0, c0, nr, nc))),
            _ => Err(Error::Ledger("sub_block needs a dense payload containing the block".into())),
        };
        Ok(Self {
            payload: take(&self.payload)?,
            target: self.target.as_ref().map(take).transpose()?,
            ..self.clone()
        })
    }

    /// `I_copies ⊗ self`: the same encoding applied on every index-register branch.
    pub fn lift(&self, copies: usize) -> Result<Self> {
        let rep = |p: &Payload| match p {
            Payload::Dense(m) => Ok(Payload::BlockDiag(vec![m.clone(); copies])),
            Payload::BlockDiag(_) => Err(Error::Ledger("lift needs a dense payload".into())),
        };
        Ok(Self { payload: rep(&self.payload)?, target: self.target.as_ref().map(rep).transpose()?, ..self.clone() })
    }
}

/// Product rule with the approximate-product error propagation.
pub fn product(x: &BlockEncodingDescriptor, y: &BlockEncodingDescriptor) -> Result<BlockEncodingDescriptor> {
    let payload = x.payload.mul(&y.payload)?;
    let target = match (&x.target, &y.target) {
        (Some(a), Some(b)) => Some(a.mul(b)?),
        _ => None,
    };
    Ok(BlockEncodingDescriptor {
        alpha: x.alpha * y.alpha,
        ancillas: x.ancillas + y.ancillas,
        eps: x.eps * y.target_norm + x.target_norm * y.eps + x.eps * y.eps,
        payload,
        queries: merge_queries(&x.queries, &y.queries),
        target_norm: x.target_norm * y.target_norm,
        target,
    })
}

/// Linear combination `Σ c_i x_i` prepared on an index register of `⌈log₂ n⌉ + 1` qubits.
pub fn lcu(coeffs: &[Complex64], parts: &[BlockEncodingDescriptor]) -> Result<BlockEncodingDescriptor> {
    if parts.is_empty() || coeffs.len() != parts.len() {
        return Err(Error::Ledger("lcu needs matching nonempty coefficient and part lists".into()));
    }
    let layout = (parts[0].payload.block_count(), parts[0].payload.block_shape());
    if parts.iter().any(|p| (p.payload.block_count(), p.payload.block_shape()) != layout) {
        return Err(Error::Dimension("lcu parts have different layouts".into()));
    }
    let combine = |get: &dyn Fn(&BlockEncodingDescriptor) -> Option<&Payload>| -> Option<Payload> {
        let mut acc: Option<Payload> = None;
        for (c, p) in coeffs.iter().zip(parts) {
            let term = get(p)?.scale(*c);
            acc = Some(match acc {
                None => term,
                Some(Payload::Dense(a)) => match term {
                    Payload::Dense(b) => Payload::Dense(a + b),
                    _ => unreachable!(),
                },
                Some(Payload::BlockDiag(a)) => match term {
                    Payload::BlockDiag(b) => Payload::BlockDiag(a.into_iter().zip(b).map(|(x, y)| x + y).collect()),
                    _ => unreachable!(),
                },
            });
        }
        acc
    };
    let payload = combine(&|p| Some(&p.payload)).expect("payloads present");
    let target = combine(&|p| p.target.as_ref());
    let mut queries = BTreeMap::new();
    for p in parts {
        queries = merge_queries(&queries, &p.queries);
    }
    Ok(BlockEncodingDescriptor {
        alpha: coeffs.iter().zip(parts).map(|(c, p)| c.norm() * p.alpha).sum(),
        ancillas: parts.iter().map(|p| p.ancillas).max().unwrap_or(0) + index_ancillas(parts.len()),
        eps: coeffs.iter().zip(parts).map(|(c, p)| c.norm() * p.eps).sum(),
        payload,
        queries,
        target_norm: coeffs.iter().zip(parts).map(|(c, p)| c.norm() * p.target_norm).sum(),
        target,
    })
}

/// Linear combination over the index register of a direct sum: `Σ_j c_j X_j`.
///
/// The direct sum is applied once (controlled on the index register), so query
/// counters are unchanged.
pub fn index_lcu(x: &BlockEncodingDescriptor, coeffs: &[f64]) -> Result<BlockEncodingDescriptor> {
    let blocks = match &x.payload {
        Payload::BlockDiag(b) => b,
        Payload::Dense(_) => return Err(Error::Ledger("index_lcu needs a direct-sum payload".into())),
    };
    if coeffs.len() != blocks.len() {
        return Err(Error::Ledger(format!("{} coefficients for {} blocks", coeffs.len(), blocks.len())));
    }
    let contract = |bs: &[ComplexMatrix]| {
        let mut acc = bs[0].scale_real(coeffs[0]);
        for (c, b) in coeffs.iter().zip(bs).skip(1) {
            acc += &b.scale_real(*c);
        }
        Payload::Dense(acc)
    };
    let weight: f64 = coeffs.iter().map(|c| c.abs()).sum();
    Ok(BlockEncodingDescriptor {
        alpha: x.alpha * weight,
        ancillas: x.ancillas + index_ancillas(blocks.len()),
        eps: x.eps * weight,
        payload: contract(blocks),
        queries: x.queries.clone(),
        target_norm: x.target_norm * weight,
        target: x.target.as_ref().map(|t| contract(t.blocks())),
    })
}

/// Seeded rank-one perturbation `eps · u v*` with unit `u`, `v`; its norm is exactly `eps`.
pub fn rank_one_perturbation(rng: &mut impl Rng, rows: usize, cols: usize, eps: f64) -> ComplexMatrix {
    let mut unit = |n: usize| {
        let v = ComplexMatrix::from_fn(n, 1, |_, _| gaussian(rng));
        v.scale_real(1.0 / v.frobenius_norm())
    };
    let u = unit(rows);
    let v = unit(cols);
    (&u * &v.adjoint()).scale_real(eps)
}

/// QSVT inverse of a unit, exact block-encoding: `(2 norm_inv, a + 2, eps_inv)`.
///
/// The payload is the exact inverse plus a seeded perturbation of norm `eps_inv` on
/// every block, emulating the polynomial approximation error.
pub fn qsvt_inverse(
    x: &BlockEncodingDescriptor,
    norm_inv: f64,
    eps_inv: f64,
    rng: &mut impl Rng,
) -> Result<BlockEncodingDescriptor> {
    qsvt_inverse_with(x, norm_inv, eps_inv, C_Q, rng)
}

pub fn qsvt_inverse_with(
    x: &BlockEncodingDescriptor,
    norm_inv: f64,
    eps_inv: f64,
    c_q: f64,
    rng: &mut impl Rng,
) -> Result<BlockEncodingDescriptor> {
    if (x.alpha - 1.0).abs() > UNIT_TOL {
        return Err(Error::Ledger(format!("qsvt_inverse needs a unit encoding, got alpha = {}", x.alpha)));
    }
    if x.eps != 0.0 {
        return Err(Error::Ledger(format!("qsvt_inverse needs an exact encoding, got eps = {:e}", x.eps)));
    }
    if !(norm_inv > 0.0 && eps_inv > 0.0) {
        return Err(Error::Ledger("norm_inv and eps_inv must be positive".into()));
    }
    let blocks = x.payload.blocks();
    let inverses: Vec<ComplexMatrix> = blocks
        .par_iter()
        .enumerate()
        .map(|(j, b)| {
            b.inverse().map_err(|e| match e {
                Error::SingularShift { sigma_min } => Error::SingularNode { node: j as i64, sigma_min },
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    let worst = inverses.par_iter().map(|m| m.operator_norm()).reduce(|| 0.0, f64::max);
    if worst > norm_inv * (1.0 + 1e-10) {
        return Err(Error::Ledger(format!("norm_inv = {norm_inv:e} below actual inverse norm {worst:e}")));
    }
    let (r, c) = x.payload.block_shape();
    let perturbations: Vec<ComplexMatrix> = (0..inverses.len()).map(|_| rank_one_perturbation(rng, c, r, eps_inv)).collect();
    let perturbed: Vec<ComplexMatrix> = inverses.iter().zip(&perturbations).map(|(m, p)| m + p).collect();
    let wrap = |v: Vec<ComplexMatrix>| match x.payload {
        Payload::Dense(_) => Payload::Dense(v.into_iter().next().expect("one block")),
        Payload::BlockDiag(_) => Payload::BlockDiag(v),
    };
    let mult = qsvt_query_multiplier(norm_inv, eps_inv, c_q);
    Ok(BlockEncodingDescriptor {
        alpha: 2.0 * norm_inv,
        ancillas: x.ancillas + QSVT_ANCILLAS,
        eps: eps_inv,
        payload: wrap(perturbed),
        queries: x.queries.iter().map(|(k, v)| (k.clone(), v * mult)).collect(),
        target_norm: norm_inv,
        target: Some(wrap(inverses)),
    })
}

/// Multiplexed shift gadgets producing unit encodings of direct sums.
pub fn mux_shift(kind: MuxShift<'_>) -> Result<BlockEncodingDescriptor> {
    let check_unit_exact = |d: &BlockEncodingDescriptor| {
        if (d.alpha - 1.0).abs() > UNIT_TOL || d.eps != 0.0 {
            Err(Error::Ledger("mux inputs must be unit, exact encodings".into()))
        } else {
            Ok(())
        }
    };
    let check_budget = |coeffs: &ShiftCoefficients| {
        for (j, (a, b)) in coeffs.iter().enumerate() {
            let s = a.norm() + b.norm();
            if s > 1.0 + UNIT_TOL {
                return Err(Error::Ledger(format!("coefficient budget |α|+|β| = {s} > 1 at index {j}")));
            }
        }
        Ok(())
    };
    let dense = |d: &BlockEncodingDescriptor| match &d.payload {
        Payload::Dense(m) => Ok(m.clone()),
        _ => Err(Error::Ledger("mux inputs must be dense".into())),
    };
    match kind {
        MuxShift::OneMatrix { t, coeffs } => {
            check_unit_exact(t)?;
            check_budget(&coeffs)?;
            let tm = dense(t)?;
            t.ensure_square_payload()?;
            let blocks: Vec<ComplexMatrix> = coeffs.par_iter().map(|(a, b)| tm.scale(*a).shifted(*b)).collect();
            let bound = coeffs.iter().map(|(a, b)| a.norm() * t.target_norm + b.norm()).fold(0.0, f64::max);
            Ok(BlockEncodingDescriptor {
                alpha: 1.0,
                ancillas: t.ancillas + MUX_ANCILLAS,
                eps: 0.0,
                target: Some(Payload::BlockDiag(blocks.clone())),
                payload: Payload::BlockDiag(blocks),
                queries: t.queries.clone(),
                target_norm: bound,
            })
        }
        MuxShift::TwoMatrix { t, u, coeffs } => {
            check_unit_exact(t)?;
            check_unit_exact(u)?;
            check_budget(&coeffs)?;
            let (tm, um) = (dense(t)?, dense(u)?);
            if (tm.rows(), tm.cols()) != (um.rows(), um.cols()) {
                return Err(Error::Dimension("two-matrix mux inputs differ in shape".into()));
            }
            let blocks: Vec<ComplexMatrix> = coeffs.par_iter().map(|(a, b)| tm.scale(*a) + um.scale(*b)).collect();
            let bound = coeffs.iter().map(|(a, b)| a.norm() * t.target_norm + b.norm() * u.target_norm).fold(0.0, f64::max);
            Ok(BlockEncodingDescriptor {
                alpha: 1.0,
                ancillas: t.ancillas + u.ancillas + MUX_ANCILLAS,
                eps: 0.0,
                target: Some(Payload::BlockDiag(blocks.clone())),
                payload: Payload::BlockDiag(blocks),
                queries: merge_queries(&t.queries, &u.queries),
                target_norm: bound,
            })
        }
        MuxShift::DiagContraction { dim, deltas } => {
            if let Some(j) = deltas.iter().position(|d| !(0.0..=1.0).contains(d)) {
                return Err(Error::Ledger(format!("contraction entry {} outside [0, 1] at index {j}", deltas[j])));
            }
            let blocks: Vec<ComplexMatrix> = deltas.iter().map(|d| ComplexMatrix::identity(dim).scale_real(*d)).collect();
            Ok(BlockEncodingDescriptor {
                alpha: 1.0,
                ancillas: CONTRACTION_ANCILLAS,
                eps: 0.0,
                target: Some(Payload::BlockDiag(blocks.clone())),
                payload: Payload::BlockDiag(blocks),
                queries: BTreeMap::new(),
                target_norm: deltas.iter().copied().fold(0.0, f64::max),
            })
        }
    }
}

impl BlockEncodingDescriptor {
    fn ensure_square_payload(&self) -> Result<()> {
        let (r, c) = self.payload.block_shape();
        if r != c {
            return Err(Error::NotSquare { rows: r, cols: c });
        }
        Ok(())
    }
}
