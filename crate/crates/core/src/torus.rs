//! The discrete torus `Z_m^n`, its points, sign vectors and metric quantities.
//!
//! # Index encoding
//!
//! Points are stored as canonical residues in `[0, m)`. Dense tables use a
//! row-major encoding with the first coordinate varying slowest:
//!
//! ```text
//! index(x) = x_0 * m^(n-1) + x_1 * m^(n-2) + ... + x_(n-1)
//! ```
//!
//! Axes are zero-based throughout the API (axis `0` is the first coordinate).
//!
//! # Hypercube identification
//!
//! Functions on `{-1, 1}^n` are tables over `Z_2^n` with residue `0` standing
//! for the sign `+1` and residue `1` for `-1`. Under this identification
//! flipping coordinate `j` is translation by `e_j`, and `-eps` is translation
//! by the all-ones point.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// `min(z, m - z)` for a residue `z` in `[0, m)`.
#[inline]
pub fn residue_abs(z: usize, m: usize) -> usize {
    debug_assert!(z < m);
    z.min(m - z)
}

/// `+1` when `z` equals its absolute residue, `-1` otherwise.
pub fn sgn(z: usize, m: usize) -> Result<i8> {
    if z == 0 {
        return Err(LabError::SignOfZero);
    }
    if z >= m {
        return Err(LabError::IndexBounds(format!("residue {z} not below m={m}")));
    }
    Ok(if z == residue_abs(z, m) { 1 } else { -1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry")]
pub struct TorusGeometry {
    n: usize,
    m: usize,
}

#[derive(Deserialize)]
struct RawGeometry {
    n: usize,
    m: usize,
}

impl TryFrom<RawGeometry> for TorusGeometry {
    type Error = LabError;

    fn try_from(raw: RawGeometry) -> Result<Self> {
        TorusGeometry::new(raw.n, raw.m)
    }
}

/// Largest grid the crate will allocate a dense table for.
pub const MAX_POINTS: usize = 1 << 26;

impl TorusGeometry {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 {
            return Err(LabError::InvalidGeometry("dimension n must be positive".into()));
        }
        if n > 30 {
            return Err(LabError::InvalidGeometry(format!("dimension n={n} exceeds 30")));
        }
        if m < 2 || !m.is_multiple_of(2) {
            return Err(LabError::InvalidGeometry(format!("m={m} must be even and >= 2")));
        }
        let count = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if count > MAX_POINTS as u128 {
            return Err(LabError::TooLarge(format!("m^n = {m}^{n} points")));
        }
        Ok(Self { n, m })
    }

    /// `{-1, 1}^n` realized as `Z_2^n`.
    pub fn hypercube(n: usize) -> Result<Self> {
        Self::new(n, 2)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_hypercube(&self) -> bool {
        self.m == 2
    }

    pub fn point_count(&self) -> usize {
        self.m.pow(self.n as u32)
    }

    /// Flat-index stride of `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.m.pow((self.n - 1 - axis) as u32)
    }

    pub fn check_axis(&self, axis: usize) -> Result<()> {
        if axis < self.n {
            Ok(())
        } else {
            Err(LabError::AxisOutOfRange { axis, n: self.n })
        }
    }

    pub fn check_point(&self, x: &TorusPoint) -> Result<()> {
        if x.coords.len() != self.n {
            return Err(LabError::GeometryMismatch(format!(
                "point has {} coordinates, geometry has n={}",
                x.coords.len(),
                self.n
            )));
        }
        if let Some(c) = x.coords.iter().find(|&&c| c >= self.m) {
            return Err(LabError::GeometryMismatch(format!("coordinate {c} not below m={}", self.m)));
        }
        Ok(())
    }

    pub fn encode(&self, x: &TorusPoint) -> usize {
        x.coords.iter().fold(0, |acc, &c| acc * self.m + c)
    }

    pub fn decode(&self, mut index: usize) -> TorusPoint {
        let mut coords = vec![0; self.n];
        for c in coords.iter_mut().rev() {
            *c = index % self.m;
            index /= self.m;
        }
        TorusPoint { coords }
    }

    pub fn origin(&self) -> TorusPoint {
        TorusPoint { coords: vec![0; self.n] }
    }

    /// The standard basis vector `e_axis`.
    pub fn basis(&self, axis: usize) -> Result<TorusPoint> {
        self.check_axis(axis)?;
        let mut coords = vec![0; self.n];
        coords[axis] = 1 % self.m;
        Ok(TorusPoint { coords })
    }

    /// Reduces signed integer coordinates mod `m`.
    pub fn point_from_signed(&self, coords: &[i64]) -> Result<TorusPoint> {
        if coords.len() != self.n {
            return Err(LabError::GeometryMismatch(format!(
                "{} coordinates given, geometry has n={}",
                coords.len(),
                self.n
            )));
        }
        let m = self.m as i64;
        Ok(TorusPoint {
            coords: coords.iter().map(|&c| c.rem_euclid(m) as usize).collect(),
        })
    }

    pub fn point(&self, coords: &[usize]) -> Result<TorusPoint> {
        let p = TorusPoint { coords: coords.to_vec() };
        self.check_point(&p)?;
        Ok(p)
    }

    pub fn add(&self, x: &TorusPoint, z: &TorusPoint) -> TorusPoint {
        TorusPoint {
            coords: x.coords.iter().zip(&z.coords).map(|(&a, &b)| (a + b) % self.m).collect(),
        }
    }

    pub fn neg(&self, x: &TorusPoint) -> TorusPoint {
        TorusPoint {
            coords: x.coords.iter().map(|&c| (self.m - c) % self.m).collect(),
        }
    }

    /// Embeds a sign vector scaled by `scale` as the point `scale * eps mod m`.
    pub fn embed_signs(&self, eps: &SignVector, scale: usize) -> TorusPoint {
        let s = scale % self.m;
        TorusPoint {
            coords: eps
                .signs()
                .iter()
                .map(|&e| if e > 0 { s } else { (self.m - s) % self.m })
                .collect(),
        }
    }

    /// `||z|| = sum_j |z_j|`.
    pub fn ell1_length(&self, z: &TorusPoint) -> Result<usize> {
        self.check_point(z)?;
        Ok(z.coords.iter().map(|&c| residue_abs(c, self.m)).sum())
    }

    /// The ℓ∞ torus metric `max_j |x_j - y_j|`.
    pub fn linf_dist(&self, x: &TorusPoint, y: &TorusPoint) -> Result<usize> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(x.coords
            .iter()
            .zip(&y.coords)
            .map(|(&a, &b)| residue_abs((a + self.m - b) % self.m, self.m))
            .max()
            .unwrap_or(0))
    }

    /// Flat index map `x -> index(x + z)` over every point of the grid.
    pub fn translation_map(&self, z: &TorusPoint) -> Vec<usize> {
        let total = self.point_count();
        let mut out = Vec::with_capacity(total);
        let mut coords = vec![0usize; self.n];
        let strides: Vec<usize> = (0..self.n).map(|a| self.stride(a)).collect();
        for _ in 0..total {
            let target = coords
                .iter()
                .zip(&z.coords)
                .zip(&strides)
                .map(|((&c, &s), &st)| ((c + s) % self.m) * st)
                .sum();
            out.push(target);
            for a in (0..self.n).rev() {
                coords[a] += 1;
                if coords[a] < self.m {
                    break;
                }
                coords[a] = 0;
            }
        }
        out
    }

    pub fn points(&self) -> impl Iterator<Item = TorusPoint> + '_ {
        (0..self.point_count()).map(move |i| self.decode(i))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TorusPoint {
    coords: Vec<usize>,
}

impl TorusPoint {
    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignVector {
    signs: Vec<i8>,
}

impl SignVector {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.is_empty() {
            return Err(LabError::Empty("sign vector"));
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(LabError::IndexBounds("sign entries must be +1 or -1".into()));
        }
        Ok(Self { signs })
    }

    /// The sign vector whose bit `n-1-j` of `bits` set means `eps_j = -1`,
    /// matching the hypercube table encoding.
    pub fn from_index(bits: usize, n: usize) -> Self {
        let signs = (0..n)
            .map(|j| if (bits >> (n - 1 - j)) & 1 == 1 { -1 } else { 1 })
            .collect();
        Self { signs }
    }

    pub fn index(&self) -> usize {
        self.signs.iter().fold(0, |acc, &s| (acc << 1) | usize::from(s < 0))
    }

    /// All `2^n` sign vectors in index order.
    pub fn all(n: usize) -> impl Iterator<Item = SignVector> {
        (0..1usize << n).map(move |b| SignVector::from_index(b, n))
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    /// `eps^(j)`: coordinate `axis` negated.
    pub fn flip(&self, axis: usize) -> Result<SignVector> {
        if axis >= self.signs.len() {
            return Err(LabError::AxisOutOfRange { axis, n: self.signs.len() });
        }
        let mut signs = self.signs.clone();
        signs[axis] = -signs[axis];
        Ok(SignVector { signs })
    }

    pub fn negated(&self) -> SignVector {
        SignVector { signs: self.signs.iter().map(|&s| -s).collect() }
    }
}

/// A subset of the axes `{0, .., n-1}` stored as a bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct AxisSet(u32);

impl AxisSet {
    pub fn empty() -> Self {
        AxisSet(0)
    }

    pub fn full(n: usize) -> Self {
        AxisSet(((1u64 << n) - 1) as u32)
    }

    pub fn from_mask(mask: u32) -> Self {
        AxisSet(mask)
    }

    pub fn from_axes(axes: &[usize]) -> Self {
        AxisSet(axes.iter().fold(0, |acc, &a| acc | (1 << a)))
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn contains(self, axis: usize) -> bool {
        axis < 32 && (self.0 >> axis) & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn complement(self, n: usize) -> Self {
        AxisSet(!self.0 & AxisSet::full(n).0)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&a| self.contains(a))
    }

    /// Every subset of `[n]` with exactly `size` elements, in increasing mask order.
    pub fn subsets_of_size(n: usize, size: usize) -> impl Iterator<Item = AxisSet> {
        (0..1u32 << n).filter(move |m| m.count_ones() as usize == size).map(AxisSet)
    }

    pub fn check(self, n: usize) -> Result<()> {
        if self.0 & !AxisSet::full(n).0 != 0 {
            return Err(LabError::AxisOutOfRange { axis: 31 - self.0.leading_zeros() as usize, n });
        }
        Ok(())
    }
}
