//! LSH index for the max-l₂ problem over `(ℝᵏ)ᴸ`.
//!
//! A scalar hash is `h(x) = ⌊⟨u, x⟩⌋` for a uniform unit vector `u`. Since
//! `|⟨u, x − y⟩| ≤ ‖x − y‖`, two points closer than 1 never get hashes more
//! than one apart. The key of a product point concatenates `w` such hashes
//! per part, `w·L` digits in total. At insert time every point is written to
//! all `3^{wL}` keys within l∞ distance 1 of its own key, so a query only
//! reads the single bucket under its own key and still sees every point that
//! is within 1 in every part.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, DefaultHasher};

use rand::Rng;
use rand_distr::StandardNormal;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

/// Largest `3^{wL}` accepted by default.
pub const DEFAULT_EXPANSION_BUDGET: u64 = 100_000_000;

/// A point of `(ℝᵏ)ᴸ`, stored as `L` consecutive parts of length `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductPoint<T> {
    id: u32,
    k: usize,
    coords: Vec<T>,
}

impl<T: Scalar> ProductPoint<T> {
    pub fn new(id: u32, parts: Vec<Vec<T>>) -> Result<Self> {
        let k = parts.first().map(Vec::len).unwrap_or(0);
        if k == 0 {
            return Err(Error::ShapeMismatch { expected: "at least one non-empty part".into(), got: format!("{} parts", parts.len()) });
        }
        if let Some(bad) = parts.iter().find(|p| p.len() != k) {
            return Err(Error::ShapeMismatch { expected: format!("parts of dimension {k}"), got: format!("part of dimension {}", bad.len()) });
        }
        Ok(Self { id, k, coords: parts.concat() })
    }

    /// Builds a point from `coords` laid out part after part.
    pub fn from_flat(id: u32, k: usize, coords: Vec<T>) -> Result<Self> {
        if k == 0 || coords.is_empty() || !coords.len().is_multiple_of(k) {
            return Err(Error::ShapeMismatch { expected: format!("a positive multiple of {k} coordinates"), got: coords.len().to_string() });
        }
        Ok(Self { id, k, coords })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn part_dim(&self) -> usize {
        self.k
    }

    pub fn part_count(&self) -> usize {
        self.coords.len() / self.k
    }

    pub fn part(&self, i: usize) -> &[T] {
        &self.coords[i * self.k..(i + 1) * self.k]
    }

    pub fn parts(&self) -> impl Iterator<Item = &[T]> {
        self.coords.chunks_exact(self.k)
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }
}

/// `maxᵢ ‖aᵢ − bᵢ‖₂` for points of the same shape.
pub fn max_l2_distance<T: Scalar>(a: &ProductPoint<T>, b: &ProductPoint<T>) -> T {
    a.parts().zip(b.parts()).map(|(x, y)| crate::scalar::distance(x, y)).fold(T::zero(), T::max)
}

/// Concatenated scalar hashes, `w·L` digits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HashKey(SmallVec<[i32; 8]>);

impl HashKey {
    pub fn new(digits: impl IntoIterator<Item = i32>) -> Self {
        Self(digits.into_iter().collect())
    }

    pub fn digits(&self) -> &[i32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Canonical encoding: each digit as a little-endian `i32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 * self.0.len());
        encode_digits(&self.0, &mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if !bytes.len().is_multiple_of(4) {
            return Err(Error::InvalidArgument(format!("key encoding has {} bytes, not a multiple of 4", bytes.len())));
        }
        Ok(Self(bytes.chunks_exact(4).map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect()))
    }
}

type KeyBytes = SmallVec<[u8; 32]>;

fn encode_digits<E: Extend<u8>>(digits: &[i32], out: &mut E) {
    for d in digits {
        out.extend(d.to_le_bytes());
    }
}

/// Parameters of one max-l₂ index.
#[derive(Debug, Clone, PartialEq)]
pub struct LshParams {
    /// Part dimension.
    pub k: usize,
    /// Number of parts.
    pub parts: usize,
    /// Scalar hashes per part.
    pub w: usize,
    /// Approximation factor of the leaf problem.
    pub c: f64,
    /// `2√k`.
    pub tau: f64,
    /// Collision bound `τ/c` for points farther than `c`.
    pub p_fp: f64,
    pub a: f64,
    pub b: f64,
    enforce_bound: bool,
}

impl LshParams {
    /// Parameters for which the false-positive analysis holds: requires `c > 2√k`.
    pub fn new(k: usize, parts: usize, w: usize, c: f64) -> Result<Self> {
        let params = Self::relaxed(k, parts, w, c)?;
        if c <= params.tau {
            return Err(Error::ConstraintViolated { c, tau: params.tau });
        }
        Ok(Self { enforce_bound: true, ..params })
    }

    /// Same as [`LshParams::new`] without the `c > 2√k` requirement.
    ///
    /// Queries stay complete; only the false-positive rate loses its bound.
    pub fn relaxed(k: usize, parts: usize, w: usize, c: f64) -> Result<Self> {
        if k == 0 || parts == 0 {
            return Err(Error::InvalidDimension(format!("k = {k}, L = {parts}")));
        }
        if w == 0 {
            return Err(Error::InvalidArgument("w must be at least 1".into()));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidArgument(format!("approximation factor {c} must be positive")));
        }
        let tau = 2.0 * (k as f64).sqrt();
        let p_fp = tau / c;
        Ok(Self { k, parts, w, c, tau, p_fp, a: -p_fp.ln(), b: 3f64.ln(), enforce_bound: false })
    }

    pub fn enforces_bound(&self) -> bool {
        self.enforce_bound
    }

    /// Key length `w·L`.
    pub fn digits(&self) -> usize {
        self.w * self.parts
    }

    /// Buckets per stored point, `3^{wL}`, saturating.
    pub fn expansion(&self) -> u64 {
        expansion_count(self.digits())
    }
}

pub fn expansion_count(digits: usize) -> u64 {
    u32::try_from(digits).ok().and_then(|d| 3u64.checked_pow(d)).unwrap_or(u64::MAX)
}

/// Uniform draw from the unit sphere `𝕊^{k−1}`.
pub fn sample_unit_vector<T: Scalar, R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<Vec<T>> {
    if k == 0 {
        return Err(Error::InvalidDimension("unit vectors need k >= 1".into()));
    }
    loop {
        let g: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-150 {
            return Ok(g.into_iter().map(|v| T::of(v / n)).collect());
        }
    }
}

/// `⌊⟨u, x⟩⌋`.
pub fn hash_scalar<T: Scalar>(u: &[T], x: &[T]) -> Result<i64> {
    if u.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), got: x.len() });
    }
    let v = dot(u, x).floor().as_f64();
    if !v.is_finite() || v.abs() >= 9.0e15 {
        return Err(Error::HashOverflow { value: v });
    }
    Ok(v as i64)
}

// digits stay strictly inside the i32 range so that ±1 neighbors never overflow
fn to_digit(v: i64) -> Result<i32> {
    if v <= i32::MIN as i64 || v >= i32::MAX as i64 {
        return Err(Error::HashOverflow { value: v as f64 });
    }
    Ok(v as i32)
}

/// All keys within l∞ distance 1 of `key`, `3^{len}` of them, `key` included.
pub fn expand_neighbors(key: &HashKey) -> Vec<HashKey> {
    let mut out = Vec::with_capacity(expansion_count(key.len()).min(1 << 20) as usize);
    for_each_neighbor(key.digits(), |digits| out.push(HashKey::new(digits.iter().copied())));
    out
}

fn for_each_neighbor(base: &[i32], mut f: impl FnMut(&[i32])) {
    let mut offsets = vec![-1i32; base.len()];
    let mut digits: SmallVec<[i32; 8]> = base.iter().map(|&d| d.saturating_sub(1)).collect();
    loop {
        f(&digits);
        // odometer over {-1, 0, 1}^len
        let mut pos = 0;
        loop {
            if pos == base.len() {
                return;
            }
            if offsets[pos] < 1 {
                offsets[pos] += 1;
                digits[pos] = base[pos].saturating_add(offsets[pos]);
                break;
            }
            offsets[pos] = -1;
            digits[pos] = base[pos].saturating_sub(1);
            pos += 1;
        }
    }
}

/// `w = ⌈ln(n·a/k) / (a·L)⌉` with `a = −ln(2√k / c)`, at least 1.
pub fn optimal_w(n: usize, k: usize, c: f64, parts: usize) -> Result<usize> {
    let params = LshParams::new(k, parts, 1, c)?;
    let a = params.a;
    let value = (n as f64 * a / k as f64).ln() / a / parts as f64;
    if !value.is_finite() || value <= 1.0 {
        return Ok(1);
    }
    Ok(value.ceil() as usize)
}

type Buckets = HashMap<KeyBytes, Vec<u32>, BuildHasherDefault<DefaultHasher>>;

/// Bucket map of one max-l₂ instance.
#[derive(Debug, Clone)]
pub struct MaxL2Index<T> {
    params: LshParams,
    /// `w·L` unit vectors; digit `i·w + t` hashes part `i` with vector `i·w + t`.
    hash_vectors: Vec<T>,
    /// Buckets hold positions into `points`.
    buckets: Buckets,
    points: Vec<ProductPoint<T>>,
}

impl<T: Scalar> MaxL2Index<T> {
    /// Algorithm 1 of the construction: each point goes into all `3^{wL}` buckets around its key.
    pub fn build<R: Rng + ?Sized>(points: Vec<ProductPoint<T>>, params: LshParams, rng: &mut R) -> Result<Self> {
        Self::build_with_budget(points, params, rng, DEFAULT_EXPANSION_BUDGET)
    }

    pub fn build_with_budget<R: Rng + ?Sized>(
        points: Vec<ProductPoint<T>>,
        params: LshParams,
        rng: &mut R,
        expansion_budget: u64,
    ) -> Result<Self> {
        if params.enforces_bound() && params.c <= params.tau {
            return Err(Error::ConstraintViolated { c: params.c, tau: params.tau });
        }
        let expansion = params.expansion();
        if expansion > expansion_budget {
            return Err(Error::Budget { what: "3^(wL) buckets per point", required: expansion as u128, limit: expansion_budget as u128 });
        }
        if points.len() > u32::MAX as usize {
            return Err(Error::InvalidArgument("more than 2^32 points".into()));
        }
        let digits = params.digits();
        let mut hash_vectors = Vec::with_capacity(digits * params.k);
        for _ in 0..digits {
            hash_vectors.extend(sample_unit_vector::<T, _>(params.k, rng)?);
        }
        let mut index = Self { params, hash_vectors, buckets: Buckets::default(), points: Vec::new() };

        let mut key = Vec::with_capacity(digits);
        let mut bytes = KeyBytes::new();
        for (slot, p) in points.iter().enumerate() {
            index.key_into(p, &mut key)?;
            for_each_neighbor(&key, |nb| {
                bytes.clear();
                encode_digits(nb, &mut bytes);
                match index.buckets.get_mut(bytes.as_slice()) {
                    Some(b) => b.push(slot as u32),
                    None => {
                        index.buckets.insert(bytes.clone(), vec![slot as u32]);
                    }
                }
            });
        }
        index.points = points;
        Ok(index)
    }

    pub fn params(&self) -> &LshParams {
        &self.params
    }

    pub fn hash_vector(&self, digit: usize) -> &[T] {
        &self.hash_vectors[digit * self.params.k..(digit + 1) * self.params.k]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[ProductPoint<T>] {
        &self.points
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn total_bucket_entries(&self) -> usize {
        self.buckets.values().map(Vec::len).sum()
    }

    /// Ids stored under `key`, in insertion order.
    pub fn bucket(&self, key: &HashKey) -> Vec<u32> {
        self.bucket_slots(&key.to_bytes()).iter().map(|&s| self.points[s as usize].id()).collect()
    }

    /// Every bucket as `(key, ids)`, sorted by key.
    pub fn sorted_buckets(&self) -> Vec<(HashKey, Vec<u32>)> {
        let mut all: Vec<_> = self
            .buckets
            .iter()
            .map(|(k, v)| (HashKey::from_bytes(k).expect("keys are encoded digits"), v.iter().map(|&s| self.points[s as usize].id()).collect()))
            .collect();
        all.sort();
        all
    }

    fn bucket_slots(&self, bytes: &[u8]) -> &[u32] {
        self.buckets.get(bytes).map(Vec::as_slice).unwrap_or(&[])
    }

    fn check_shape(&self, p: &ProductPoint<T>) -> Result<()> {
        if p.part_dim() != self.params.k || p.part_count() != self.params.parts {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parts of dimension {}", self.params.parts, self.params.k),
                got: format!("{} parts of dimension {}", p.part_count(), p.part_dim()),
            });
        }
        Ok(())
    }

    fn key_into(&self, p: &ProductPoint<T>, key: &mut Vec<i32>) -> Result<()> {
        self.check_shape(p)?;
        key.clear();
        let w = self.params.w;
        for (i, part) in p.parts().enumerate() {
            for t in 0..w {
                key.push(to_digit(hash_scalar(self.hash_vector(i * w + t), part)?)?);
            }
        }
        Ok(())
    }

    /// The key `g(p)`.
    pub fn hash_g(&self, p: &ProductPoint<T>) -> Result<HashKey> {
        let mut key = Vec::with_capacity(self.params.digits());
        self.key_into(p, &mut key)?;
        Ok(HashKey::new(key))
    }

    /// Raw bucket contents for `q`'s key, as ids, duplicates kept.
    pub fn candidates(&self, q: &ProductPoint<T>) -> Result<Vec<u32>> {
        let key = self.hash_g(q)?;
        Ok(self.bucket(&key))
    }

    /// Ids in `q`'s bucket with max-l₂ distance at most `cap`, sorted and deduplicated.
    ///
    /// Every stored point within `radius` of `q` in every part is included.
    pub fn query(&self, q: &ProductPoint<T>, radius: f64, cap: f64) -> Result<Vec<u32>> {
        Ok(self.query_counted(q, radius, cap)?.0)
    }

    /// Like [`MaxL2Index::query`], also returning the raw bucket size.
    pub fn query_counted(&self, q: &ProductPoint<T>, radius: f64, cap: f64) -> Result<(Vec<u32>, usize)> {
        if !(radius >= 0.0 && radius <= cap) {
            return Err(Error::InvalidArgument(format!("need 0 <= radius ({radius}) <= cap ({cap})")));
        }
        if self.points.is_empty() {
            self.check_shape(q)?;
            return Ok((Vec::new(), 0));
        }
        let key = self.hash_g(q)?;
        let slots = self.bucket_slots(&key.to_bytes());
        let raw = slots.len();
        let mut slots = slots.to_vec();
        slots.sort_unstable();
        slots.dedup();
        let cap_t = T::of(cap);
        let mut ids: Vec<u32> = slots
            .into_iter()
            .map(|s| &self.points[s as usize])
            .filter(|x| max_l2_distance(q, x) <= cap_t)
            .map(ProductPoint::id)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        Ok((ids, raw))
    }

    /// Removes a point from every bucket. Exists to inject faults in verification tests.
    #[doc(hidden)]
    pub fn drop_from_buckets(&mut self, id: u32) -> usize {
        let Some(slot) = self.points.iter().position(|p| p.id() == id) else { return 0 };
        let mut removed = 0;
        for bucket in self.buckets.values_mut() {
            let before = bucket.len();
            bucket.retain(|&s| s as usize != slot);
            removed += before - bucket.len();
        }
        removed
    }
}

/// Builds a max-l₂ index, see [`MaxL2Index::build`].
pub fn build_maxl2<T: Scalar, R: Rng + ?Sized>(points: Vec<ProductPoint<T>>, params: LshParams, rng: &mut R) -> Result<MaxL2Index<T>> {
    MaxL2Index::build(points, params, rng)
}

/// Queries a max-l₂ index, see [`MaxL2Index::query`].
pub fn query_maxl2<T: Scalar>(index: &MaxL2Index<T>, q: &ProductPoint<T>, radius: f64, cap: f64) -> Result<Vec<u32>> {
    index.query(q, radius, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Purpose};
    use proptest::prelude::*;
    use rand::Rng;
    use std::collections::BTreeSet;

    fn rng(i: u64) -> crate::rng::StreamRng {
        stream_rng(1234, Purpose::HashVectors, i)
    }

    fn random_point(id: u32, k: usize, parts: usize, scale: f64, r: &mut impl Rng) -> ProductPoint<f64> {
        ProductPoint::from_flat(id, k, (0..k * parts).map(|_| r.random_range(-scale..scale)).collect()).unwrap()
    }

    #[test]
    fn unit_vectors() {
        let mut r = rng(0);
        for _ in 0..20 {
            let u = sample_unit_vector::<f64, _>(1, &mut r).unwrap();
            assert!(u[0] == 1.0 || u[0] == -1.0);
            let u = sample_unit_vector::<f64, _>(5, &mut r).unwrap();
            assert!((crate::scalar::norm(&u) - 1.0).abs() <= 1e-12);
        }
        assert!(matches!(sample_unit_vector::<f64, _>(0, &mut r), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn unit_vector_mean_is_centered_k2() {
        let mut r = rng(1);
        let trials = 100_000;
        let mut sum = [0.0f64; 2];
        for _ in 0..trials {
            let u = sample_unit_vector::<f64, _>(2, &mut r).unwrap();
            sum[0] += u[0];
            sum[1] += u[1];
        }
        let tol = 3.0 * (1.0 / 2f64.sqrt()) / (trials as f64).sqrt();
        for s in sum {
            assert!((s / trials as f64).abs() <= tol, "mean {}", s / trials as f64);
        }
    }

    #[test]
    fn scalar_hash_examples() {
        assert_eq!(hash_scalar(&[1.0, 0.0], &[2.5, 9.0]).unwrap(), 2);
        assert_eq!(hash_scalar(&[0.6, 0.8], &[0.0, 0.0]).unwrap(), 0);
        assert_eq!(hash_scalar(&[1.0, 0.0], &[-0.5, 0.0]).unwrap(), -1);
        let hx = hash_scalar(&[1.0, 0.0], &[0.9, 0.0]).unwrap();
        let hy = hash_scalar(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(hx - hy, 0);
        assert_eq!(hash_scalar(&[1.0], &[1.0, 2.0]).unwrap_err(), Error::DimensionMismatch { expected: 1, got: 2 });
    }

    #[test]
    fn neighbor_expansion_sizes() {
        let one = expand_neighbors(&HashKey::new([0]));
        assert_eq!(one, vec![HashKey::new([-1]), HashKey::new([0]), HashKey::new([1])]);
        assert_eq!(expand_neighbors(&HashKey::new([0, 0])).len(), 9);
        let key = HashKey::new([5, -3, 12]);
        let set: BTreeSet<_> = expand_neighbors(&key).into_iter().collect();
        assert_eq!(set.len(), 27);
        assert!(set.contains(&key));
        for k in &set {
            assert!(k.digits().iter().zip(key.digits()).all(|(a, b)| (a - b).abs() <= 1));
        }
    }

    #[test]
    fn key_bytes_are_little_endian_i32() {
        let key = HashKey::new([1, -1]);
        assert_eq!(key.to_bytes(), vec![1, 0, 0, 0, 0xff, 0xff, 0xff, 0xff]);
        assert_eq!(HashKey::from_bytes(&key.to_bytes()).unwrap(), key);
        assert!(HashKey::from_bytes(&[1, 2, 3]).is_err());
    }

    #[test]
    fn optimal_w_substitutions() {
        let c = 4.0 * std::f64::consts::E;
        assert_eq!(optimal_w(1000, 4, c, 1).unwrap(), 6);
        assert_eq!(optimal_w(1000, 4, c, 2).unwrap(), 3);
        assert_eq!(optimal_w(2, 4, c, 1).unwrap(), 1);
        assert_eq!(optimal_w(0, 4, c, 1).unwrap(), 1);
        assert!(matches!(optimal_w(1000, 4, 4.0, 1), Err(Error::ConstraintViolated { .. })));
    }

    #[test]
    fn params_constraint() {
        assert!(matches!(LshParams::new(16, 1, 1, 8.0), Err(Error::ConstraintViolated { .. })));
        let p = LshParams::new(4, 2, 3, 4.0 * std::f64::consts::E).unwrap();
        assert!((p.a - 1.0).abs() < 1e-12);
        assert_eq!(p.digits(), 6);
        assert_eq!(p.expansion(), 729);
        assert!(LshParams::relaxed(16, 1, 1, 8.0).is_ok());
        assert!(LshParams::relaxed(16, 1, 0, 8.0).is_err());
    }

    #[test]
    fn hash_g_single_digit_and_zero_point() {
        let params = LshParams::relaxed(3, 1, 1, 10.0).unwrap();
        let p = ProductPoint::from_flat(0, 3, vec![1.5, -2.0, 0.25]).unwrap();
        let idx = MaxL2Index::build(vec![p.clone()], params, &mut rng(2)).unwrap();
        let key = idx.hash_g(&p).unwrap();
        assert_eq!(key.digits(), &[hash_scalar(idx.hash_vector(0), p.part(0)).unwrap() as i32]);
        let zero = ProductPoint::from_flat(1, 3, vec![0.0; 3]).unwrap();
        assert_eq!(idx.hash_g(&zero).unwrap().digits(), &[0]);
    }

    #[test]
    fn hash_g_digit_layout_w2_l2() {
        let params = LshParams::relaxed(3, 2, 2, 10.0).unwrap();
        let mut r = rng(3);
        let p = random_point(0, 3, 2, 5.0, &mut r);
        let idx = MaxL2Index::build(vec![], params, &mut r).unwrap();
        let key = idx.hash_g(&p).unwrap();
        assert_eq!(key.len(), 4);
        for i in 0..2 {
            for t in 0..2 {
                let u = idx.hash_vector(i * 2 + t);
                let expected = (u.iter().zip(p.part(i)).map(|(a, b)| a * b).sum::<f64>()).floor() as i32;
                assert_eq!(key.digits()[i * 2 + t], expected);
            }
        }
    }

    #[test]
    fn shape_mismatch_errors() {
        let params = LshParams::relaxed(3, 2, 1, 10.0).unwrap();
        let bad = ProductPoint::from_flat(0, 2, vec![0.0; 4]).unwrap();
        assert!(matches!(MaxL2Index::build(vec![bad.clone()], params.clone(), &mut rng(4)), Err(Error::ShapeMismatch { .. })));
        let idx = MaxL2Index::<f64>::build(vec![], params, &mut rng(4)).unwrap();
        assert!(matches!(idx.query(&bad, 1.0, 2.0), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn build_rejects_infeasible_and_over_budget() {
        let mut r = rng(5);
        let p = LshParams { enforce_bound: true, ..LshParams::relaxed(16, 1, 1, 8.0).unwrap() };
        assert!(matches!(MaxL2Index::<f64>::build(vec![], p, &mut r), Err(Error::ConstraintViolated { .. })));
        let p = LshParams::relaxed(2, 3, 6, 100.0).unwrap();
        assert!(matches!(MaxL2Index::<f64>::build(vec![], p, &mut r), Err(Error::Budget { .. })));
    }

    #[test]
    fn empty_index() {
        let params = LshParams::relaxed(2, 1, 1, 5.0).unwrap();
        let idx = MaxL2Index::<f64>::build(vec![], params, &mut rng(6)).unwrap();
        assert_eq!(idx.bucket_count(), 0);
        let q = ProductPoint::from_flat(0, 2, vec![0.1, 0.2]).unwrap();
        assert!(idx.query(&q, 1.0, 5.0).unwrap().is_empty());
    }

    #[test]
    fn bucket_entry_counts() {
        let params = LshParams::relaxed(2, 2, 1, 5.0).unwrap();
        let p = ProductPoint::from_flat(7, 2, vec![0.3, 0.4, 1.0, -1.0]).unwrap();
        let idx = MaxL2Index::build(vec![p], params, &mut rng(7)).unwrap();
        assert_eq!(idx.total_bucket_entries(), 9);
        assert_eq!(idx.bucket_count(), 9);

        let mut r = rng(8);
        let pts: Vec<_> = (0..100).map(|i| random_point(i, 4, 3, 10.0, &mut r)).collect();
        let params = LshParams::relaxed(4, 3, 1, 5.0).unwrap();
        let idx = MaxL2Index::build(pts, params, &mut r).unwrap();
        assert_eq!(idx.total_bucket_entries(), 100 * 27);
    }

    #[test]
    fn query_returns_exact_match() {
        let mut r = rng(9);
        let pts: Vec<_> = (0..50).map(|i| random_point(i, 3, 2, 20.0, &mut r)).collect();
        let q = ProductPoint::from_flat(999, 3, pts[17].coords().to_vec()).unwrap();
        let idx = MaxL2Index::build(pts, LshParams::relaxed(3, 2, 2, 4.0).unwrap(), &mut r).unwrap();
        assert!(idx.query(&q, 1.0, 4.0).unwrap().contains(&17));
        assert!(idx.query(&q, 2.0, 1.0).is_err());
    }

    #[test]
    fn planted_three_point_instance() {
        // parts of dimension 2, L = 2, cap 4
        let q = ProductPoint::from_flat(100, 2, vec![0.0, 0.0, 0.0, 0.0]).unwrap();
        let near = ProductPoint::from_flat(0, 2, vec![0.3, 0.4, -0.5, 0.0]).unwrap();
        let far_one_part = ProductPoint::from_flat(1, 2, vec![0.1, 0.0, 4.5, 0.0]).unwrap();
        let far = ProductPoint::from_flat(2, 2, vec![6.0, 0.0, 0.0, 6.0]).unwrap();
        let pts = vec![near, far_one_part, far];
        // brute force max-l2 scan
        let oracle: Vec<u32> = pts.iter().filter(|p| max_l2_distance(&q, p) <= 4.0).map(|p| p.id()).collect();
        assert_eq!(oracle, vec![0]);
        for seed in 0..20 {
            let idx = MaxL2Index::build(pts.clone(), LshParams::relaxed(2, 2, 2, 4.0).unwrap(), &mut rng(100 + seed)).unwrap();
            assert_eq!(idx.query(&q, 1.0, 4.0).unwrap(), oracle);
        }
    }

    #[test]
    fn dropped_point_disappears() {
        let mut r = rng(10);
        let pts: Vec<_> = (0..10).map(|i| random_point(i, 2, 1, 3.0, &mut r)).collect();
        let q = ProductPoint::from_flat(99, 2, pts[3].coords().to_vec()).unwrap();
        let mut idx = MaxL2Index::build(pts, LshParams::relaxed(2, 1, 1, 4.0).unwrap(), &mut r).unwrap();
        assert_eq!(idx.drop_from_buckets(3), 3);
        assert!(!idx.query(&q, 1.0, 4.0).unwrap().contains(&3));
    }

    #[test]
    fn sorted_buckets_report_ids() {
        let p = ProductPoint::from_flat(42, 1, vec![0.5]).unwrap();
        let idx = MaxL2Index::build(vec![p], LshParams::relaxed(1, 1, 1, 4.0).unwrap(), &mut rng(11)).unwrap();
        let all = idx.sorted_buckets();
        assert_eq!(all.len(), 3);
        assert!(all.iter().all(|(_, ids)| ids == &vec![42]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn close_points_have_close_hashes(k in 1usize..12, seed in any::<u64>(),
                                          x in proptest::collection::vec(-50.0f64..50.0, 12),
                                          dir in proptest::collection::vec(-1.0f64..1.0, 12),
                                          len in 0.0f64..0.999) {
            let mut r = stream_rng(seed, Purpose::HashVectors, 0);
            let u = sample_unit_vector::<f64, _>(k, &mut r).unwrap();
            let x = &x[..k];
            let dn = crate::scalar::norm(&dir[..k]);
            prop_assume!(dn > 1e-6);
            let y: Vec<f64> = x.iter().zip(&dir[..k]).map(|(a, d)| a + d / dn * len).collect();
            let diff = hash_scalar(&u, x).unwrap() - hash_scalar(&u, &y).unwrap();
            prop_assert!(diff.abs() <= 1);
        }

        #[test]
        fn no_false_negatives_inside_index(seed in any::<u64>(), k in 1usize..5, parts in 1usize..3, w in 1usize..3) {
            let mut r = stream_rng(seed, Purpose::Workload, 0);
            let pts: Vec<_> = (0..40).map(|i| random_point(i, k, parts, 3.0, &mut r)).collect();
            let q = random_point(1000, k, parts, 3.0, &mut r);
            let idx = MaxL2Index::build(pts.clone(), LshParams::relaxed(k, parts, w, 2.0).unwrap(), &mut r).unwrap();
            let got = idx.query(&q, 1.0, 2.0).unwrap();
            for p in &pts {
                let d = max_l2_distance(&q, p);
                if d <= 1.0 {
                    prop_assert!(got.contains(&p.id()));
                }
            }
            for id in &got {
                prop_assert!(max_l2_distance(&q, &pts[*id as usize]) <= 2.0);
            }
        }
    }
}
