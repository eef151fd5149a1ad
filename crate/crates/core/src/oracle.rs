//! Exact linear-scan radius search, the ground truth for every guarantee.

use crate::error::{Error, Result};
use crate::reduction::QueryResult;
use crate::scalar::Scalar;

fn euclidean<T: Scalar>(x: &[T], q: &[T]) -> T {
    let mut acc = T::zero();
    for (a, b) in x.iter().zip(q) {
        acc = acc + (*a - *b) * (*a - *b);
    }
    acc.sqrt()
}

fn scan<T: Scalar, P: AsRef<[T]>>(points: &[P], q: &[T], radius: f64) -> Result<Vec<(u32, T)>> {
    if radius.is_nan() || radius < 0.0 {
        return Err(Error::InvalidArgument(format!("radius {radius} must be >= 0")));
    }
    let r = T::of(radius);
    let mut out = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch { expected: q.len(), got: p.len() });
        }
        let d = euclidean(p, q);
        if d <= r {
            out.push((i as u32, d));
        }
    }
    Ok(out)
}

/// Ids `i` with `‖xᵢ − q‖ ≤ radius`, ascending.
pub fn exact_radius_search<T: Scalar, P: AsRef<[T]>>(points: &[P], q: &[T], radius: f64) -> Result<Vec<u32>> {
    Ok(scan(points, q, radius)?.into_iter().map(|(i, _)| i).collect())
}

/// Exact neighbor sets at both radii, with distances.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<T> {
    pub within_r: Vec<(u32, T)>,
    pub within_cr: Vec<(u32, T)>,
}

impl<T: Scalar> OracleResult<T> {
    pub fn compute<P: AsRef<[T]>>(points: &[P], q: &[T], radius: f64, c: f64) -> Result<Self> {
        let within_cr = scan(points, q, c * radius)?;
        let r = T::of(radius);
        let within_r = within_cr.iter().copied().filter(|&(_, d)| d <= r).collect();
        Ok(Self { within_r, within_cr })
    }

    pub fn ids_within_r(&self) -> Vec<u32> {
        self.within_r.iter().map(|&(i, _)| i).collect()
    }

    pub fn ids_within_cr(&self) -> Vec<u32> {
        self.within_cr.iter().map(|&(i, _)| i).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// A point within `R` is missing from the result.
    FalseNegative,
    /// A returned point lies beyond `cR`.
    Soundness,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Offender {
    pub id: u32,
    pub distance: f64,
    pub kind: Violation,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SandwichReport {
    pub offenders: Vec<Offender>,
}

impl SandwichReport {
    pub fn passed(&self) -> bool {
        self.offenders.is_empty()
    }

    pub fn false_negatives(&self) -> usize {
        self.offenders.iter().filter(|o| o.kind == Violation::FalseNegative).count()
    }

    pub fn soundness_violations(&self) -> usize {
        self.offenders.iter().filter(|o| o.kind == Violation::Soundness).count()
    }
}

/// Checks `oracle(R) ⊆ result ⊆ oracle(cR)`.
pub fn sandwich_check<T: Scalar>(result: &QueryResult<T>, oracle: &OracleResult<T>) -> SandwichReport {
    let mut offenders = Vec::new();
    for &(id, d) in &oracle.within_r {
        if !result.ids.contains(&id) {
            offenders.push(Offender { id, distance: d.as_f64(), kind: Violation::FalseNegative });
        }
    }
    for (i, &id) in result.ids.iter().enumerate() {
        if !oracle.within_cr.iter().any(|&(j, _)| j == id) {
            let distance = result.distances.get(i).map_or(f64::NAN, |d| d.as_f64());
            offenders.push(Offender { id, distance, kind: Violation::Soundness });
        }
    }
    SandwichReport { offenders }
}
