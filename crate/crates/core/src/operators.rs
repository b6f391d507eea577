//! Uniform measures on even boxes and parity shells, and the averaging
//! operators `Δ_B` and `E_j` built from them.
//!
//! Every support shipped here is symmetric under negation, so averaging
//! `f(x + y)` over the support equals the convolution `f * ν` written with
//! `f(x - y)`. The symmetry is checked when a [`SupportSet`] is built.
//!
//! The box `L_B` and the shell `S(j, k)` are both coordinate products of
//! stride-2 windows. [`convolve_box_separable`] and [`ej_average`] exploit
//! this with one sliding-sum pass per axis over each parity class, so their
//! cost does not depend on `k`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::table::FunctionTable;
use crate::torus::{AxisSet, TorusGeometry, TorusPoint};

/// Odd radius `k` with `k < m/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct SmoothingRadius(usize);

impl SmoothingRadius {
    pub fn new(k: usize, geometry: &TorusGeometry) -> Result<Self> {
        let m = geometry.m();
        if k == 0 || k.is_multiple_of(2) {
            return Err(LabError::InvalidRadius { k, m, reason: "k must be an odd positive integer" });
        }
        if 2 * k >= m {
            return Err(LabError::InvalidRadius { k, m, reason: "k must be below m/2" });
        }
        Ok(Self(k))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// One axis of a product support: offsets `start, start + 2, ..`, `len` of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct AxisWindow {
    start: i64,
    len: usize,
}

impl AxisWindow {
    const ZERO: AxisWindow = AxisWindow { start: 0, len: 1 };

    /// Even offsets with `|y| < k`.
    fn even_box(k: usize) -> Self {
        AxisWindow { start: -(k as i64 - 1), len: k }
    }

    /// Odd offsets with `|y| <= k`.
    fn odd_shell(k: usize) -> Self {
        AxisWindow { start: -(k as i64), len: k + 1 }
    }

    fn offsets(self) -> impl Iterator<Item = i64> {
        (0..self.len as i64).map(move |s| self.start + 2 * s)
    }

    fn is_identity(self) -> bool {
        self == AxisWindow::ZERO
    }
}

/// Offsets carrying the uniform probability measure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    geometry: TorusGeometry,
    offsets: Vec<TorusPoint>,
}

#[derive(Serialize, Deserialize)]
struct SupportRecord {
    n: usize,
    m: usize,
    offsets: Vec<Vec<usize>>,
}

impl SupportSet {
    /// Builds a support, rejecting duplicates and asymmetric offset sets.
    pub fn new(geometry: TorusGeometry, offsets: Vec<TorusPoint>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(LabError::Empty("support offsets"));
        }
        for y in &offsets {
            geometry.check_point(y)?;
        }
        let set: BTreeSet<&TorusPoint> = offsets.iter().collect();
        if set.len() != offsets.len() {
            return Err(LabError::InvalidGeometry("support offsets are not distinct".into()));
        }
        if let Some(y) = offsets.iter().find(|y| !set.contains(&geometry.neg(y))) {
            return Err(LabError::InvalidGeometry(format!("support not symmetric: -{:?} missing", y.coords())));
        }
        Ok(Self { geometry, offsets })
    }

    fn from_windows(geometry: TorusGeometry, windows: &[AxisWindow]) -> Result<Self> {
        let mut offsets = vec![Vec::with_capacity(geometry.n())];
        for w in windows {
            offsets = offsets
                .into_iter()
                .flat_map(|prefix| {
                    w.offsets().map(move |o| {
                        let mut next = prefix.clone();
                        next.push(o);
                        next
                    })
                })
                .collect();
        }
        let points = offsets
            .iter()
            .map(|c| geometry.point_from_signed(c))
            .collect::<Result<Vec<_>>>()?;
        Self::new(geometry, points)
    }

    pub fn geometry(&self) -> TorusGeometry {
        self.geometry
    }

    pub fn offsets(&self) -> &[TorusPoint] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Mass of each offset, `1 / |offsets|`.
    pub fn weight(&self) -> f64 {
        1.0 / self.offsets.len() as f64
    }

    /// JSON dump `{n, m, offsets: [[..], ..]}`.
    pub fn to_json(&self) -> String {
        let rec = SupportRecord {
            n: self.geometry.n(),
            m: self.geometry.m(),
            offsets: self.offsets.iter().map(|p| p.coords().to_vec()).collect(),
        };
        serde_json::to_string(&rec).expect("support record serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: SupportRecord =
            serde_json::from_str(s).map_err(|e| LabError::InvalidGeometry(format!("bad support record: {e}")))?;
        let geometry = TorusGeometry::new(rec.n, rec.m)?;
        let offsets = rec.offsets.iter().map(|c| geometry.point(c)).collect::<Result<Vec<_>>>()?;
        Self::new(geometry, offsets)
    }
}

fn box_windows(n: usize, axes: AxisSet, k: SmoothingRadius) -> Vec<AxisWindow> {
    (0..n)
        .map(|a| if axes.contains(a) { AxisWindow::even_box(k.get()) } else { AxisWindow::ZERO })
        .collect()
}

fn shell_windows(n: usize, axis: usize, k: SmoothingRadius) -> Vec<AxisWindow> {
    (0..n)
        .map(|a| if a == axis { AxisWindow::even_box(k.get()) } else { AxisWindow::odd_shell(k.get()) })
        .collect()
}

/// `L_B`: even offsets supported on `B` with ℓ∞ length below `k`.
pub fn build_l_box(geometry: TorusGeometry, axes: AxisSet, k: SmoothingRadius) -> Result<SupportSet> {
    axes.check(geometry.n())?;
    SmoothingRadius::new(k.get(), &geometry)?;
    SupportSet::from_windows(geometry, &box_windows(geometry.n(), axes, k))
}

/// `S(j, k)`: coordinate `axis` even, all others odd, ℓ∞ length at most `k`.
pub fn build_parity_shell(geometry: TorusGeometry, axis: usize, k: SmoothingRadius) -> Result<SupportSet> {
    geometry.check_axis(axis)?;
    SmoothingRadius::new(k.get(), &geometry)?;
    SupportSet::from_windows(geometry, &shell_windows(geometry.n(), axis, k))
}

/// `x -> mean over y in s of f(x + y)`, evaluated tap by tap.
pub fn convolve(f: &FunctionTable, s: &SupportSet) -> Result<FunctionTable> {
    let geometry = f.geometry();
    if geometry != s.geometry() {
        return Err(LabError::GeometryMismatch("table and support live on different tori".into()));
    }
    let (n, m, d) = (geometry.n(), geometry.m(), f.d());
    let strides: Vec<usize> = (0..n).map(|a| geometry.stride(a)).collect();
    let count = s.len() as f64;
    let mut out = Vec::with_capacity(f.values().len());
    let mut acc = vec![0.0; d];
    for x in geometry.points() {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for y in s.offsets() {
            let idx: usize = x
                .coords()
                .iter()
                .zip(y.coords())
                .zip(&strides)
                .map(|((&a, &b), &st)| ((a + b) % m) * st)
                .sum();
            for (a, v) in acc.iter_mut().zip(f.at_index(idx)) {
                *a += v;
            }
        }
        out.extend(acc.iter().map(|a| a / count));
    }
    FunctionTable::from_values(geometry, d, out)
}

/// Replaces every line along `axis` by its windowed sums.
fn sliding_pass(values: &[f64], geometry: &TorusGeometry, d: usize, axis: usize, w: AxisWindow) -> Vec<f64> {
    let m = geometry.m();
    let half = m / 2;
    let stride = geometry.stride(axis);
    let outer = geometry.point_count() / (m * stride);
    let shift = w.start.rem_euclid(m as i64) as usize;
    let mut out = vec![0.0; values.len()];
    let mut line = vec![0.0; m];
    let mut sums = [vec![0.0; half], vec![0.0; half]];
    for o in 0..outer {
        for i in 0..stride {
            let base = o * m * stride + i;
            for c in 0..d {
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = values[(base + t * stride) * d + c];
                }
                // window sums on each parity cycle t -> r + 2t
                for (r, cycle_sums) in sums.iter_mut().enumerate() {
                    let cyc = |s: usize| line[r + 2 * (s % half)];
                    let mut running: f64 = (0..w.len).map(cyc).sum();
                    cycle_sums[0] = running;
                    for s in 1..half {
                        running += cyc(s - 1 + w.len) - cyc(s - 1);
                        cycle_sums[s] = running;
                    }
                }
                for x in 0..m {
                    let y = (x + shift) % m;
                    out[(base + x * stride) * d + c] = sums[y % 2][y / 2];
                }
            }
        }
    }
    out
}

fn convolve_product(f: &FunctionTable, windows: &[AxisWindow]) -> Result<FunctionTable> {
    let geometry = f.geometry();
    let mut values = f.values().to_vec();
    let mut mass = 1usize;
    for (axis, &w) in windows.iter().enumerate() {
        if w.is_identity() {
            continue;
        }
        values = sliding_pass(&values, &geometry, f.d(), axis, w);
        mass *= w.len;
    }
    if mass > 1 {
        let norm = mass as f64;
        values.iter_mut().for_each(|v| *v /= norm);
    }
    FunctionTable::from_values(geometry, f.d(), values)
}

/// `Δ_B f` through per-axis sliding sums, renormalized once by `k^|B|`.
pub fn convolve_box_separable(f: &FunctionTable, axes: AxisSet, k: SmoothingRadius) -> Result<FunctionTable> {
    let geometry = f.geometry();
    axes.check(geometry.n())?;
    SmoothingRadius::new(k.get(), &geometry)?;
    convolve_product(f, &box_windows(geometry.n(), axes, k))
}

/// `Δ_B f(x)`: the average of `f(x + y)` over `y` in `L_B`.
pub fn delta(f: &FunctionTable, axes: AxisSet, k: SmoothingRadius) -> Result<FunctionTable> {
    if axes.len() >= 2 {
        convolve_box_separable(f, axes, k)
    } else {
        convolve(f, &build_l_box(f.geometry(), axes, k)?)
    }
}

/// `E_j f(x)`: the average of `f(x + y)` over `y` in `S(j, k)`.
pub fn ej_average(f: &FunctionTable, axis: usize, k: SmoothingRadius) -> Result<FunctionTable> {
    let geometry = f.geometry();
    geometry.check_axis(axis)?;
    SmoothingRadius::new(k.get(), &geometry)?;
    convolve_product(f, &shell_windows(geometry.n(), axis, k))
}
