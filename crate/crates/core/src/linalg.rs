//! Random orthonormal bases and the scaled block mappings carved from them.
//!
//! A family splits one random basis of `ℝ^{d'}` into `d'/k` blocks of `k`
//! consecutive rows, each scaled by `√(d'/k)`. Because the basis is an
//! isometry, `(k/d')·Σᵢ‖Aᵢx‖² = ‖x‖²`, so at least one block never expands
//! a given vector. When `k ∤ d`, inputs are padded with zeros up to
//! `d' = k·⌈d/k⌉`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Purpose};
use crate::scalar::{dot, Scalar};

/// A point with finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector<T>(Vec<T>);

impl<T: Scalar> Vector<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        check_finite(&coords)?;
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![T::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn norm(&self) -> T {
        crate::scalar::norm(&self.0)
    }
}

impl<T> AsRef<[T]> for Vector<T> {
    fn as_ref(&self) -> &[T] {
        &self.0
    }
}

pub(crate) fn check_finite<T: Scalar>(coords: &[T]) -> Result<()> {
    match coords.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Smallest multiple of `k` that is at least `dim`.
pub fn padded_dim(dim: usize, k: usize) -> usize {
    dim.div_ceil(k) * k
}

/// Orthonormal basis of `ℝ^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis<T> {
    dim: usize,
    rows: Vec<T>,
    seed: u64,
}

impl<T: Scalar> OrthonormalBasis<T> {
    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("basis dimension must be positive".into()));
        }
        let mut rows = vec![T::zero(); dim * dim];
        for i in 0..dim {
            rows[i * dim + i] = T::one();
        }
        Ok(Self { dim, rows, seed: 0 })
    }

    /// Wraps explicit rows after checking orthonormality to `tol` per entry of `B·Bᵀ − I`.
    pub fn from_rows(dim: usize, rows: Vec<T>, tol: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("basis dimension must be positive".into()));
        }
        if rows.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: rows.len() });
        }
        check_finite(&rows)?;
        let basis = Self { dim, rows, seed: 0 };
        let dev = basis.max_gram_deviation();
        if dev > tol {
            return Err(Error::InvalidArgument(format!(
                "rows are not orthonormal: max |B·Bᵀ − I| = {dev:e}"
            )));
        }
        Ok(basis)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.rows.chunks_exact(self.dim)
    }

    /// `B·x`, the coordinates of `x` in this basis.
    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(self.rows().map(|r| dot(r, x)).collect())
    }

    /// Largest entry of `|B·Bᵀ − I|`.
    pub fn max_gram_deviation(&self) -> f64 {
        gram_deviation(&self.rows, self.dim, self.dim)
    }
}

fn gram_deviation<T: Scalar>(rows: &[T], count: usize, dim: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..count {
        let ri = &rows[i * dim..(i + 1) * dim];
        for j in i..count {
            let rj = &rows[j * dim..(j + 1) * dim];
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(ri, rj).as_f64() - target).abs());
        }
    }
    worst
}

/// Haar-distributed orthonormal basis of `ℝ^dim`, deterministic in `seed`.
pub fn random_orthonormal_basis<T: Scalar>(dim: usize, seed: u64) -> Result<OrthonormalBasis<T>> {
    let rows = random_orthonormal_frame(dim, dim, seed)?;
    Ok(OrthonormalBasis { dim, rows, seed })
}

/// First `count` rows of [`random_orthonormal_basis`]`(dim, seed)`, row-major.
///
/// Rows are Gaussian draws orthonormalized in order (Gram-Schmidt with a second
/// projection pass), so every prefix of the basis only depends on the draws
/// before it.
pub fn random_orthonormal_frame<T: Scalar>(dim: usize, count: usize, seed: u64) -> Result<Vec<T>> {
    if dim == 0 {
        return Err(Error::InvalidDimension("basis dimension must be positive".into()));
    }
    if count > dim {
        return Err(Error::InvalidArgument(format!("cannot draw {count} orthonormal rows in dimension {dim}")));
    }
    let mut rng = stream_rng(seed, Purpose::Basis, 0);
    orthonormal_rows(dim, count, &mut rng)
}

pub(crate) fn orthonormal_rows<T: Scalar, R: Rng + ?Sized>(dim: usize, count: usize, rng: &mut R) -> Result<Vec<T>> {
    let mut rows: Vec<T> = Vec::with_capacity(dim * count);
    let mut v = vec![T::zero(); dim];
    for r in 0..count {
        loop {
            for x in v.iter_mut() {
                *x = T::of(rng.sample::<f64, _>(StandardNormal));
            }
            let before = crate::scalar::norm(&v);
            for _pass in 0..2 {
                for prev in rows.chunks_exact(dim) {
                    let p = dot(prev, &v);
                    for (x, &u) in v.iter_mut().zip(prev) {
                        *x = *x - p * u;
                    }
                }
            }
            let after = crate::scalar::norm(&v);
            // a draw (numerically) inside the span of earlier rows is redrawn
            if after > before * T::of(1e-6) && after > T::zero() {
                rows.extend(v.iter().map(|&x| x / after));
                break;
            }
            debug_assert!(r < dim);
        }
    }
    Ok(rows)
}

/// `k×d` block of a basis scaled by `√(d'/k)`; rows live in the padded space `ℝ^{d'}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMapping<T> {
    in_dim: usize,
    padded_dim: usize,
    out_dim: usize,
    rows: Vec<T>,
    family_index: usize,
    block_index: usize,
}

impl<T: Scalar> BlockMapping<T> {
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn padded_dim(&self) -> usize {
        self.padded_dim
    }

    pub fn family_index(&self) -> usize {
        self.family_index
    }

    pub fn block_index(&self) -> usize {
        self.block_index
    }

    /// Scaled row `t`, including the padded coordinates.
    pub fn row(&self, t: usize) -> &[T] {
        &self.rows[t * self.padded_dim..(t + 1) * self.padded_dim]
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.out_dim];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, x: &[T], out: &mut [T]) -> Result<()> {
        if x.len() != self.in_dim {
            return Err(Error::DimensionMismatch { expected: self.in_dim, got: x.len() });
        }
        if out.len() != self.out_dim {
            return Err(Error::DimensionMismatch { expected: self.out_dim, got: out.len() });
        }
        for (o, row) in out.iter_mut().zip(self.rows.chunks_exact(self.padded_dim)) {
            // padded input coordinates are zero
            *o = dot(&row[..self.in_dim], x);
        }
        Ok(())
    }
}

/// Applies `m` to `x`.
pub fn apply_mapping<T: Scalar>(m: &BlockMapping<T>, x: &[T]) -> Result<Vec<T>> {
    m.apply(x)
}

/// The `⌈d/k⌉` block mappings cut from one basis.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingFamily<T> {
    k: usize,
    in_dim: usize,
    padded_dim: usize,
    family_index: usize,
    blocks: Vec<BlockMapping<T>>,
}

impl<T: Scalar> MappingFamily<T> {
    /// Family `family_index` drawn from `seed` for inputs of dimension `in_dim`.
    ///
    /// The basis lives in the padded dimension and uses its own random stream, so
    /// families with different indices are independent.
    pub fn random(in_dim: usize, k: usize, seed: u64, family_index: usize) -> Result<Self> {
        check_block_size(in_dim, k)?;
        let padded = padded_dim(in_dim, k);
        let mut rng = stream_rng(seed, Purpose::Basis, family_index as u64 + 1);
        let rows = orthonormal_rows::<T, _>(padded, padded, &mut rng)?;
        Ok(Self::from_padded_rows(rows, padded, in_dim, k, family_index))
    }

    fn from_padded_rows(rows: Vec<T>, padded: usize, in_dim: usize, k: usize, family_index: usize) -> Self {
        let scale = T::of((padded as f64 / k as f64).sqrt());
        let blocks = rows
            .chunks_exact(padded * k)
            .enumerate()
            .map(|(block_index, chunk)| BlockMapping {
                in_dim,
                padded_dim: padded,
                out_dim: k,
                rows: chunk.iter().map(|&v| v * scale).collect(),
                family_index,
                block_index,
            })
            .collect();
        Self { k, in_dim, padded_dim: padded, family_index, blocks }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn padded_dim(&self) -> usize {
        self.padded_dim
    }

    pub fn family_index(&self) -> usize {
        self.family_index
    }

    pub fn blocks(&self) -> &[BlockMapping<T>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Images of `x` under every block, in block order.
    pub fn apply_all(&self, x: &[T]) -> Result<Vec<Vec<T>>> {
        self.blocks.iter().map(|b| b.apply(x)).collect()
    }
}

fn check_block_size(dim: usize, k: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidDimension("input dimension must be positive".into()));
    }
    if k == 0 || k > dim {
        return Err(Error::InvalidBlockSize { k, dim });
    }
    Ok(())
}

/// Cuts `basis` into blocks of `k` rows scaled by `√(d'/k)`.
///
/// If `k ∤ dim` the basis is extended block-diagonally with the identity on the
/// padded coordinates; inputs keep dimension `dim`.
pub fn make_family<T: Scalar>(basis: &OrthonormalBasis<T>, k: usize) -> Result<MappingFamily<T>> {
    let dim = basis.dim();
    check_block_size(dim, k)?;
    let padded = padded_dim(dim, k);
    let mut rows = vec![T::zero(); padded * padded];
    for i in 0..dim {
        rows[i * padded..i * padded + dim].copy_from_slice(basis.row(i));
    }
    for i in dim..padded {
        rows[i * padded + i] = T::one();
    }
    Ok(MappingFamily::from_padded_rows(rows, padded, dim, k, 0))
}
