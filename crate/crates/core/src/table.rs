//! Dense `R^d`-valued function tables over `Z_m^n`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::torus::{SignVector, TorusGeometry, TorusPoint};

/// Samples of `f: Z_m^n -> R^d`, point-major in the row-major index order
/// of [`TorusGeometry`], vector components innermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRecord", into = "TableRecord")]
pub struct FunctionTable {
    geometry: TorusGeometry,
    d: usize,
    values: Vec<f64>,
}

/// Flat serialized form `{n, m, d, values}`.
#[derive(Serialize, Deserialize)]
struct TableRecord {
    n: usize,
    m: usize,
    d: usize,
    values: Vec<f64>,
}

impl TryFrom<TableRecord> for FunctionTable {
    type Error = LabError;

    fn try_from(r: TableRecord) -> Result<Self> {
        FunctionTable::from_values(TorusGeometry::new(r.n, r.m)?, r.d, r.values)
    }
}

impl From<FunctionTable> for TableRecord {
    fn from(t: FunctionTable) -> Self {
        TableRecord { n: t.geometry.n(), m: t.geometry.m(), d: t.d, values: t.values }
    }
}

impl FunctionTable {
    pub fn from_values(geometry: TorusGeometry, d: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(LabError::InvalidGeometry("target dimension d must be positive".into()));
        }
        let expected = geometry.point_count() * d;
        if values.len() != expected {
            return Err(LabError::GeometryMismatch(format!(
                "table has {} values, expected m^n * d = {expected}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::NonFinite(i));
        }
        Ok(Self { geometry, d, values })
    }

    pub fn zeros(geometry: TorusGeometry, d: usize) -> Result<Self> {
        Self::from_values(geometry, d, vec![0.0; geometry.point_count() * d])
    }

    pub fn constant(geometry: TorusGeometry, value: &[f64]) -> Result<Self> {
        let values = value.iter().copied().cycle().take(geometry.point_count() * value.len()).collect();
        Self::from_values(geometry, value.len(), values)
    }

    pub fn from_fn(geometry: TorusGeometry, d: usize, mut f: impl FnMut(&TorusPoint) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(geometry.point_count() * d);
        for x in geometry.points() {
            let v = f(&x);
            if v.len() != d {
                return Err(LabError::GeometryMismatch(format!("closure returned {} components, expected {d}", v.len())));
            }
            values.extend(v);
        }
        Self::from_values(geometry, d, values)
    }

    /// Scalar indicator of a single point.
    pub fn indicator(geometry: TorusGeometry, at: &TorusPoint) -> Result<Self> {
        geometry.check_point(at)?;
        let mut t = Self::zeros(geometry, 1)?;
        let i = geometry.encode(at);
        t.values[i] = 1.0;
        Ok(t)
    }

    /// I.i.d. standard Gaussian entries.
    pub fn random_gaussian<R: Rng + ?Sized>(geometry: TorusGeometry, d: usize, rng: &mut R) -> Result<Self> {
        let values = (0..geometry.point_count() * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Self::from_values(geometry, d, values)
    }

    /// `g(eps) = sum_j eps_j x_j` on the hypercube.
    pub fn hypercube_linear(vectors: &[Vec<f64>]) -> Result<Self> {
        let n = vectors.len();
        let d = vectors.first().ok_or(LabError::Empty("vector list"))?.len();
        let geometry = TorusGeometry::hypercube(n)?;
        let mut values = Vec::with_capacity(geometry.point_count() * d);
        for eps in SignVector::all(n) {
            for c in 0..d {
                values.push(vectors.iter().zip(eps.signs()).map(|(v, &s)| f64::from(s) * v[c]).sum());
            }
        }
        Self::from_values(geometry, d, values)
    }

    pub fn geometry(&self) -> TorusGeometry {
        self.geometry
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at_index(&self, index: usize) -> &[f64] {
        &self.values[index * self.d..(index + 1) * self.d]
    }

    pub fn value_at(&self, x: &TorusPoint) -> Result<&[f64]> {
        self.geometry.check_point(x)?;
        Ok(self.at_index(self.geometry.encode(x)))
    }

    /// Value on the hypercube at `eps`.
    pub fn value_at_signs(&self, eps: &SignVector) -> Result<&[f64]> {
        self.require_hypercube()?;
        if eps.len() != self.geometry.n() {
            return Err(LabError::GeometryMismatch("sign vector length differs from n".into()));
        }
        Ok(self.at_index(eps.index()))
    }

    /// `f(x + z)`.
    pub fn shift_eval(&self, x: &TorusPoint, z: &TorusPoint) -> Result<&[f64]> {
        self.geometry.check_point(x)?;
        self.geometry.check_point(z)?;
        Ok(self.at_index(self.geometry.encode(&self.geometry.add(x, z))))
    }

    /// The table `x -> f(x + z)`.
    pub fn translate(&self, z: &TorusPoint) -> Result<FunctionTable> {
        self.geometry.check_point(z)?;
        let map = self.geometry.translation_map(z);
        let mut values = Vec::with_capacity(self.values.len());
        for &t in &map {
            values.extend_from_slice(self.at_index(t));
        }
        Ok(FunctionTable { geometry: self.geometry, d: self.d, values })
    }

    /// `x -> f(x + e_axis) - f(x)`.
    pub fn discrete_derivative(&self, axis: usize) -> Result<FunctionTable> {
        let e = self.geometry.basis(axis)?;
        let map = self.geometry.translation_map(&e);
        let mut values = Vec::with_capacity(self.values.len());
        for (i, &t) in map.iter().enumerate() {
            let (a, b) = (self.at_index(t), self.at_index(i));
            values.extend(a.iter().zip(b).map(|(u, v)| u - v));
        }
        Ok(FunctionTable { geometry: self.geometry, d: self.d, values })
    }

    pub fn check_same_shape(&self, other: &FunctionTable) -> Result<()> {
        if self.geometry != other.geometry || self.d != other.d {
            return Err(LabError::GeometryMismatch(format!(
                "tables over (n={}, m={}, d={}) and (n={}, m={}, d={})",
                self.geometry.n(),
                self.geometry.m(),
                self.d,
                other.geometry.n(),
                other.geometry.m(),
                other.d
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &FunctionTable) -> Result<FunctionTable> {
        self.check_same_shape(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(FunctionTable { geometry: self.geometry, d: self.d, values })
    }

    pub fn sub(&self, other: &FunctionTable) -> Result<FunctionTable> {
        self.check_same_shape(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(FunctionTable { geometry: self.geometry, d: self.d, values })
    }

    pub fn scaled(&self, c: f64) -> FunctionTable {
        FunctionTable { geometry: self.geometry, d: self.d, values: self.values.iter().map(|v| c * v).collect() }
    }

    /// Per-component mean over the grid.
    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.d];
        for chunk in self.values.chunks_exact(self.d) {
            for (a, v) in acc.iter_mut().zip(chunk) {
                *a += v;
            }
        }
        let count = self.geometry.point_count() as f64;
        acc.iter_mut().for_each(|a| *a /= count);
        acc
    }

    /// Removes the per-component mean in place.
    pub fn project_out_mean(&mut self) {
        let mean = self.mean();
        for chunk in self.values.chunks_exact_mut(self.d) {
            for (v, m) in chunk.iter_mut().zip(&mean) {
                *v -= m;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    pub fn require_hypercube(&self) -> Result<()> {
        if self.geometry.is_hypercube() {
            Ok(())
        } else {
            Err(LabError::NotHypercube { m: self.geometry.m() })
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tables with finite values always serialize")
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}
