//! Dense pointwise tensors with per-slot variance.
//!
//! [`Tensor`] is generic over its component type so the same contraction and
//! index-moving code serves plain values (`f64`) and jet-valued fields
//! ([`Jet`]) whose components still carry derivatives.

use std::fmt::Debug;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::jets::Jet;

/// Largest supported rank.
pub const MAX_RANK: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Variance {
    Lower,
    Upper,
}

impl Variance {
    pub fn flip(self) -> Variance {
        match self {
            Variance::Lower => Variance::Upper,
            Variance::Upper => Variance::Lower,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Alternating (or plain) sum divided by `k!`.
    Weighted,
    /// Bare sum over permutations.
    Sum,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("slots {0} and {1} have the same variance")]
    VarianceMismatch(usize, usize),
    #[error("slot {slot} out of range for rank {rank}")]
    SlotOutOfRange { slot: usize, rank: usize },
    #[error("slots must be distinct")]
    RepeatedSlot,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("singular metric (|det| = {0:e})")]
    SingularMetric(f64),
}

/// Arithmetic needed by generic tensor code.
pub trait Scalar: Clone + Debug + Send + Sync {
    fn zero_like(&self) -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn minus(&self, other: &Self) -> Self;
    fn times(&self, other: &Self) -> Self;
    fn scaled(&self, s: f64) -> Self;
    fn value(&self) -> f64;
}

impl Scalar for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn scaled(&self, s: f64) -> Self {
        self * s
    }
    fn value(&self) -> f64 {
        *self
    }
}

impl Scalar for Jet {
    fn zero_like(&self) -> Self {
        Jet::constant(0.0, self.dim(), self.order())
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn scaled(&self, s: f64) -> Self {
        self.scale(s)
    }
    fn value(&self) -> f64 {
        Jet::value(self)
    }
}

/// Sum of an iterator of scalars, seeded with `zero`.
pub fn sum_scalars<T: Scalar>(zero: T, items: impl IntoIterator<Item = T>) -> T {
    items.into_iter().fold(zero, |acc, x| acc.plus(&x))
}

/// Iterates all index tuples of a given rank in row-major order.
pub fn for_each_index(dim: usize, rank: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; rank];
    let total = dim.pow(rank as u32);
    for _ in 0..total {
        f(&idx);
        for s in (0..rank).rev() {
            idx[s] += 1;
            if idx[s] < dim {
                break;
            }
            idx[s] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f64> {
    dim: usize,
    variance: Vec<Variance>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn from_fn(dim: usize, variance: &[Variance], mut f: impl FnMut(&[usize]) -> T) -> Self {
        assert!(variance.len() <= MAX_RANK, "rank exceeds {MAX_RANK}");
        let mut data = Vec::with_capacity(dim.pow(variance.len() as u32));
        for_each_index(dim, variance.len(), |idx| data.push(f(idx)));
        Tensor {
            dim,
            variance: variance.to_vec(),
            data,
        }
    }

    pub fn from_vec(dim: usize, variance: &[Variance], data: Vec<T>) -> Self {
        assert_eq!(data.len(), dim.pow(variance.len() as u32), "component count");
        Tensor {
            dim,
            variance: variance.to_vec(),
            data,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> &T {
        &self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: T) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Tensor<U> {
        Tensor {
            dim: self.dim,
            variance: self.variance.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Component values (drops derivative information for jets).
    pub fn values(&self) -> Tensor<f64> {
        self.map(|x| x.value())
    }

    pub fn with_variance(mut self, variance: &[Variance]) -> Self {
        assert_eq!(variance.len(), self.rank());
        self.variance = variance.to_vec();
        self
    }

    fn check_slot(&self, slot: usize) -> Result<(), TensorError> {
        if slot < self.rank() {
            Ok(())
        } else {
            Err(TensorError::SlotOutOfRange {
                slot,
                rank: self.rank(),
            })
        }
    }

    /// Trace over two slots of opposite variance.
    pub fn contract(&self, slot_a: usize, slot_b: usize) -> Result<Tensor<T>, TensorError> {
        self.check_slot(slot_a)?;
        self.check_slot(slot_b)?;
        if slot_a == slot_b {
            return Err(TensorError::RepeatedSlot);
        }
        if self.variance[slot_a] == self.variance[slot_b] {
            return Err(TensorError::VarianceMismatch(slot_a, slot_b));
        }
        Ok(self.trace_unchecked(slot_a, slot_b))
    }

    fn trace_unchecked(&self, slot_a: usize, slot_b: usize) -> Tensor<T> {
        let keep: Vec<usize> = (0..self.rank()).filter(|&s| s != slot_a && s != slot_b).collect();
        let variance: Vec<Variance> = keep.iter().map(|&s| self.variance[s]).collect();
        let zero = self.data[0].zero_like();
        let mut full = vec![0usize; self.rank()];
        Tensor::from_fn(self.dim, &variance, |idx| {
            for (k, &s) in keep.iter().enumerate() {
                full[s] = idx[k];
            }
            let mut acc = zero.clone();
            for d in 0..self.dim {
                full[slot_a] = d;
                full[slot_b] = d;
                acc = acc.plus(self.get(&full));
            }
            acc
        })
    }

    /// Applies a matrix to one slot: `out[.., a, ..] = Σ_b m[a][b] · self[.., b, ..]`.
    pub fn transform_slot(&self, slot: usize, m: &Tensor<T>, variance: Variance) -> Tensor<T> {
        let mut var = self.variance.clone();
        var[slot] = variance;
        let zero = self.data[0].zero_like();
        let mut src = vec![0usize; self.rank()];
        Tensor::from_fn(self.dim, &var, |idx| {
            src.copy_from_slice(idx);
            let mut acc = zero.clone();
            for b in 0..self.dim {
                src[slot] = b;
                acc = acc.plus(&m.get(&[idx[slot], b]).times(self.get(&src)));
            }
            acc
        })
    }

    pub fn outer(&self, other: &Tensor<T>) -> Tensor<T> {
        assert_eq!(self.dim, other.dim);
        let r = self.rank();
        let variance: Vec<Variance> = self.variance.iter().chain(&other.variance).copied().collect();
        Tensor::from_fn(self.dim, &variance, |idx| {
            self.get(&idx[..r]).times(other.get(&idx[r..]))
        })
    }

    /// Reorders slots: slot `k` of the result is slot `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Tensor<T> {
        assert_eq!(perm.len(), self.rank());
        let variance: Vec<Variance> = perm.iter().map(|&p| self.variance[p]).collect();
        let mut src = vec![0usize; self.rank()];
        Tensor::from_fn(self.dim, &variance, |idx| {
            for (k, &p) in perm.iter().enumerate() {
                src[p] = idx[k];
            }
            self.get(&src).clone()
        })
    }

    pub fn add(&self, other: &Tensor<T>) -> Tensor<T> {
        self.zip_with(other, |a, b| a.plus(b))
    }

    pub fn sub(&self, other: &Tensor<T>) -> Tensor<T> {
        self.zip_with(other, |a, b| a.minus(b))
    }

    pub fn scale(&self, s: f64) -> Tensor<T> {
        self.map(|x| x.scaled(s))
    }

    fn zip_with(&self, other: &Tensor<T>, f: impl Fn(&T, &T) -> T) -> Tensor<T> {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        assert_eq!(self.rank(), other.rank(), "rank mismatch");
        Tensor {
            dim: self.dim,
            variance: self.variance.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect(),
        }
    }
}

impl Tensor<f64> {
    pub fn zeros(dim: usize, variance: &[Variance]) -> Self {
        Tensor::from_fn(dim, variance, |_| 0.0)
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            dim: 1,
            variance: Vec::new(),
            data: vec![value],
        }
    }

    /// Kronecker delta as a (1,1) tensor.
    pub fn identity(dim: usize) -> Self {
        Tensor::from_fn(dim, &[Variance::Upper, Variance::Lower], |i| {
            if i[0] == i[1] {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn vector(components: &[f64], variance: Variance) -> Self {
        Tensor::from_vec(components.len(), &[variance], components.to_vec())
    }

    /// ∞-norm of the components.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Raises or lowers one slot with the metric, flipping its variance.
    pub fn raise_lower(&self, slot: usize, metric: &MetricAtPoint) -> Result<Tensor, TensorError> {
        self.check_slot(slot)?;
        if metric.dim() != self.dim {
            return Err(TensorError::DimensionMismatch(metric.dim(), self.dim));
        }
        Ok(match self.variance[slot] {
            Variance::Lower => self.transform_slot(slot, &metric.g_inv, Variance::Upper),
            Variance::Upper => self.transform_slot(slot, &metric.g, Variance::Lower),
        })
    }

    fn permuted_sum(&self, slots: &[usize], norm: Normalization, alternating: bool) -> Result<Tensor, TensorError> {
        for &s in slots {
            self.check_slot(s)?;
        }
        for (k, s) in slots.iter().enumerate() {
            if slots[..k].contains(s) {
                return Err(TensorError::RepeatedSlot);
            }
        }
        let perms = permutations(slots.len());
        let factor = match norm {
            Normalization::Weighted => 1.0 / perms.len() as f64,
            Normalization::Sum => 1.0,
        };
        let mut src = vec![0usize; self.rank()];
        Ok(Tensor::from_fn(self.dim, &self.variance.clone(), |idx| {
            let mut acc = 0.0;
            for (perm, sign) in &perms {
                src.copy_from_slice(idx);
                for (k, &p) in perm.iter().enumerate() {
                    src[slots[k]] = idx[slots[p]];
                }
                let term = *self.get(&src);
                acc += if alternating { *sign * term } else { term };
            }
            acc * factor
        }))
    }

    /// Alternating sum over the given slots.
    pub fn antisymmetrize(&self, slots: &[usize], norm: Normalization) -> Result<Tensor, TensorError> {
        self.permuted_sum(slots, norm, true)
    }

    pub fn symmetrize(&self, slots: &[usize], norm: Normalization) -> Result<Tensor, TensorError> {
        self.permuted_sum(slots, norm, false)
    }
}

/// All permutations of `0..k` with their signs, in lexicographic order.
pub fn permutations(k: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out.into_iter()
        .map(|p| {
            let inversions = (0..k)
                .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
                .filter(|&(i, j)| p[i] > p[j])
                .count();
            let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
            (p, sign)
        })
        .collect()
}

/// Metric data at one point.
#[derive(Debug, Clone)]
pub struct MetricAtPoint {
    pub g: Tensor,
    pub g_inv: Tensor,
    pub det: f64,
    /// `g_jets[i][j]` is the jet of `g_ij`.
    pub g_jets: Vec<Vec<Jet>>,
    /// Signs of the eigenvalues of `g`, in ascending eigenvalue order.
    pub signature: Vec<i8>,
}

impl MetricAtPoint {
    pub fn from_jets(g_jets: Vec<Vec<Jet>>) -> Result<Self, TensorError> {
        let n = g_jets.len();
        let m = DMatrix::from_fn(n, n, |i, j| g_jets[i][j].value());
        let det = m.determinant();
        if !det.is_finite() || det.abs() <= 1e-12 {
            return Err(TensorError::SingularMetric(det));
        }
        let inv = m.clone().try_inverse().ok_or(TensorError::SingularMetric(det))?;
        let g = Tensor::from_fn(n, &[Variance::Lower, Variance::Lower], |i| m[(i[0], i[1])]);
        let g_inv = Tensor::from_fn(n, &[Variance::Upper, Variance::Upper], |i| {
            // symmetrize away roundoff
            0.5 * (inv[(i[0], i[1])] + inv[(i[1], i[0])])
        });
        let mut eig: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| a.total_cmp(b));
        let signature = eig.iter().map(|&e| if e < 0.0 { -1 } else { 1 }).collect();
        Ok(MetricAtPoint {
            g,
            g_inv,
            det,
            g_jets,
            signature,
        })
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    /// Exactly one eigenvalue sign differs from the others.
    pub fn is_lorentzian(&self) -> bool {
        let neg = self.signature.iter().filter(|&&s| s < 0).count();
        let n = self.signature.len();
        neg == 1 || neg == n - 1
    }

    /// `g_ij a^i b^j` for upper-index vectors.
    pub fn dot_upper(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.dim();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| self.g.get(&[i, j]) * a[i] * b[j])
            .sum()
    }

    /// `g^ij a_i b_j` for lower-index vectors.
    pub fn dot_lower(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.dim();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| self.g_inv.get(&[i, j]) * a[i] * b[j])
            .sum()
    }

    pub fn raise_vector(&self, a: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.g_inv.get(&[i, j]) * a[j]).sum())
            .collect()
    }

    pub fn lower_vector(&self, a: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.g.get(&[i, j]) * a[j]).sum())
            .collect()
    }
}

/// Inverse of a jet-valued matrix by Gauss-Jordan elimination with
/// partial pivoting on the point values.
pub fn invert_jet_matrix(m: &[Vec<Jet>]) -> Result<Vec<Vec<Jet>>, TensorError> {
    let n = m.len();
    let dim = m[0][0].dim();
    let order = m.iter().flatten().map(|j| j.order()).min().unwrap_or(0);
    let mut a: Vec<Vec<Jet>> = m.iter().map(|r| r.iter().map(|j| j.truncate(order)).collect()).collect();
    let mut inv: Vec<Vec<Jet>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Jet::constant(if i == j { 1.0 } else { 0.0 }, dim, order))
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].value().abs().total_cmp(&a[y][col].value().abs()))
            .expect("non-empty");
        if a[pivot][col].value().abs() < 1e-300 {
            return Err(TensorError::SingularMetric(0.0));
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].recip().map_err(|_| TensorError::SingularMetric(0.0))?;
        for j in 0..n {
            a[col][j] = &a[col][j] * &p;
            inv[col][j] = &inv[col][j] * &p;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col].clone();
            if factor.coefficients().iter().all(|c| *c == 0.0) {
                continue;
            }
            for j in 0..n {
                a[row][j] = &a[row][j] - &(&factor * &a[col][j]);
                inv[row][j] = &inv[row][j] - &(&factor * &inv[col][j]);
            }
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Variance::{Lower as L, Upper as U};

    fn seeded(dim: usize, variance: &[Variance], seed: u64) -> Tensor {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        Tensor::from_fn(dim, variance, |_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    fn minkowski() -> MetricAtPoint {
        let g: Vec<Vec<Jet>> = (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| {
                        let v = if i != j { 0.0 } else if i == 0 { -1.0 } else { 1.0 };
                        Jet::constant(v, 4, 1)
                    })
                    .collect()
            })
            .collect();
        MetricAtPoint::from_jets(g).unwrap()
    }

    #[test]
    fn trace_of_identity() {
        let t = Tensor::identity(4).contract(0, 1).unwrap();
        assert_eq!(t.rank(), 0);
        assert_eq!(*t.get(&[]), 4.0);
    }

    #[test]
    fn metric_inverse_contraction_is_identity() {
        let m = minkowski();
        let prod = m.g_inv.outer(&m.g).contract(1, 2).unwrap();
        assert_eq!(prod.variance(), &[U, L]);
        assert!(prod.sub(&Tensor::identity(4)).max_abs() < 1e-15);
    }

    #[test]
    fn contraction_matches_loop_reference() {
        let t = seeded(4, &[U, L, L, L], 3);
        let c = t.contract(0, 1).unwrap();
        for k in 0..4 {
            for l in 0..4 {
                let mut s = 0.0;
                for a in 0..4 {
                    s += t.get(&[a, a, k, l]);
                }
                assert!((c.get(&[k, l]) - s).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn contraction_needs_opposite_variance() {
        let t = seeded(3, &[L, L], 1);
        assert_eq!(t.contract(0, 1), Err(TensorError::VarianceMismatch(0, 1)));
        assert!(matches!(t.contract(0, 2), Err(TensorError::SlotOutOfRange { .. })));
        assert_eq!(t.contract(1, 1), Err(TensorError::RepeatedSlot));
    }

    #[test]
    fn lower_then_raise_round_trips() {
        let m = minkowski();
        let t = seeded(4, &[U, L, U], 5);
        let back = t.raise_lower(0, &m).unwrap().raise_lower(0, &m).unwrap();
        assert_eq!(back.variance(), t.variance());
        assert!(back.sub(&t).max_abs() < 1e-13);
    }

    #[test]
    fn antisymmetrizing_symmetric_gives_zero() {
        let t = seeded(4, &[L, L], 9);
        let s = t.add(&t.permute(&[1, 0]));
        assert!(s.antisymmetrize(&[0, 1], Normalization::Weighted).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn weighted_antisymmetrizer_is_idempotent() {
        let t = seeded(4, &[L, L, L], 11);
        let once = t.antisymmetrize(&[0, 1, 2], Normalization::Weighted).unwrap();
        let twice = once.antisymmetrize(&[0, 1, 2], Normalization::Weighted).unwrap();
        assert!(once.sub(&twice).max_abs() < 1e-15);
        // brute-force reference for one component
        let (i, j, k) = (0, 1, 3);
        let idx = [i, j, k];
        let mut expect = 0.0;
        for (p, sign) in permutations(3) {
            expect += sign * t.get(&[idx[p[0]], idx[p[1]], idx[p[2]]]);
        }
        assert!((once.get(&[i, j, k]) - expect / 6.0).abs() < 1e-15);
        let sum = t.antisymmetrize(&[0, 1, 2], Normalization::Sum).unwrap();
        assert!((sum.get(&[i, j, k]) - expect).abs() < 1e-15);
    }

    #[test]
    fn symmetrized_antisymmetrizer_vanishes() {
        let t = seeded(3, &[L, L, L], 13);
        let a = t.antisymmetrize(&[0, 2], Normalization::Weighted).unwrap();
        assert!(a.symmetrize(&[0, 2], Normalization::Weighted).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn permutation_signs() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], (vec![0, 1, 2], 1.0));
        assert_eq!(p[1], (vec![0, 2, 1], -1.0));
        assert_eq!(p.iter().map(|x| x.1).sum::<f64>(), 0.0);
    }

    #[test]
    fn singular_metric_detected() {
        let g: Vec<Vec<Jet>> = (0..3)
            .map(|i| (0..3).map(|j| Jet::constant(if i == j && i < 2 { 1.0 } else { 0.0 }, 3, 1)).collect())
            .collect();
        assert!(matches!(
            MetricAtPoint::from_jets(g),
            Err(TensorError::SingularMetric(_))
        ));
    }

    #[test]
    fn jet_matrix_inverse() {
        // [[1+x, y], [y, 2]] at (0.3, 0.2)
        let x = Jet::variable(0, 0.3, 2, 3);
        let y = Jet::variable(1, 0.2, 2, 3);
        let m = vec![vec![x.add_constant(1.0), y.clone()], vec![y.clone(), Jet::constant(2.0, 2, 3)]];
        let inv = invert_jet_matrix(&m).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut s = Jet::constant(0.0, 2, 3);
                for k in 0..2 {
                    s = &s + &(&m[i][k] * &inv[k][j]);
                }
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((s.value() - target).abs() < 1e-14);
                assert!(s.coefficients()[1..].iter().all(|c| c.abs() < 1e-13));
            }
        }
    }

    #[test]
    fn signature_of_minkowski() {
        let m = minkowski();
        assert_eq!(m.signature, vec![-1, 1, 1, 1]);
        assert!(m.is_lorentzian());
        assert!((m.dot_upper(&[1.0, 1.0, 0.0, 0.0], &[1.0, 1.0, 0.0, 0.0])).abs() < 1e-15);
    }
}
