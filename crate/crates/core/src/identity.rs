//! The `R_{i,l}` operators and the decomposition
//!
//! ```text
//! Σ_j ε_j [E_j f(x + e_j) - E_j f(x - e_j)]
//!     = Σ_{i=0}^{n} Σ_{l=0}^{i} h_{i,l} · k^(n-i-1) / (k+1)^(n-1) · R_{i,l} f(x, ε)
//! ```
//!
//! The scalars `h_{i,l}` are not available in closed form, so they are
//! recovered by least squares: both sides are linear in `f`, and random
//! `(f, x, ε)` samples give an overdetermined, exactly satisfiable system.
//! Coefficients outside the row space of the feature matrix (for instance
//! every `h_{n,l}`, since `R_{n,l} ≡ 0`) are reported as unidentifiable
//! instead of being regularized to a value.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::inequalities::{edge_energy, noise_floor, Echo, RatioReport};
use crate::norm::{Exponent, NormSpec};
use crate::operators::{delta, ej_average, SmoothingRadius};
use crate::rng::stream;
use crate::table::FunctionTable;
use crate::torus::{AxisSet, SignVector, TorusGeometry, TorusPoint};

/// Held-out `(f, x, ε)` samples drawn after every fit.
pub const HELDOUT_SAMPLES: usize = 200;

/// Relative eigenvalue cutoff (of `AᵀA`) for the rank decision.
const RANK_RTOL: f64 = 1e-10;

/// Null-space weight below which a coefficient counts as identifiable.
const IDENTIFIABLE_TOL: f64 = 1e-6;

const FIT_STREAM: u64 = 0x66_69_74;
const HELDOUT_STREAM: u64 = 0x686f_6c64;

/// A sign pattern `δ` on a subset `S` of the axes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedSubsetShift {
    subset: AxisSet,
    /// Signs in increasing axis order of `subset`.
    signs: Vec<i8>,
}

impl SignedSubsetShift {
    pub fn subset(&self) -> AxisSet {
        self.subset
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// `⟨δ_S, ε_S⟩`.
    pub fn inner(&self, eps: &SignVector) -> i64 {
        self.subset.iter().zip(&self.signs).map(|(a, &s)| i64::from(s * eps.signs()[a])).sum()
    }

    /// The point with `k δ_a` on `S` and `0` elsewhere.
    pub fn offset(&self, geometry: &TorusGeometry, k: usize) -> TorusPoint {
        let mut coords = vec![0i64; geometry.n()];
        for (a, &s) in self.subset.iter().zip(&self.signs) {
            coords[a] = i64::from(s) * k as i64;
        }
        geometry.point_from_signed(&coords).expect("length n")
    }

    /// Every `δ ∈ {-1,1}^S` with `⟨δ_S, ε_S⟩ = |S| - 2 l`.
    pub fn with_agreement(subset: AxisSet, eps: &SignVector, l: usize) -> Vec<SignedSubsetShift> {
        let i = subset.len();
        let target = i as i64 - 2 * l as i64;
        (0..1usize << i)
            .map(|bits| SignedSubsetShift {
                subset,
                signs: (0..i).map(|b| if (bits >> b) & 1 == 1 { -1 } else { 1 }).collect(),
            })
            .filter(|d| d.inner(eps) == target)
            .collect()
    }
}

/// `ε` restricted to `axes` and embedded as a torus point (zero elsewhere).
fn restricted_signs(geometry: &TorusGeometry, eps: &SignVector, axes: AxisSet) -> TorusPoint {
    let coords: Vec<i64> =
        (0..geometry.n()).map(|a| if axes.contains(a) { i64::from(eps.signs()[a]) } else { 0 }).collect();
    geometry.point_from_signed(&coords).expect("length n")
}

/// `k^(n-i-1) / (k+1)^(n-1)`.
pub fn identity_scale(n: usize, i: usize, k: usize) -> f64 {
    (k as f64).powi(n as i32 - i as i32 - 1) / ((k + 1) as f64).powi(n as i32 - 1)
}

/// Precomputed `Δ_B f` for every `B ⊆ [n]` and `E_j f` for every `j`.
pub struct IdentityWorkspace<'a> {
    f: &'a FunctionTable,
    k: SmoothingRadius,
    deltas: Vec<FunctionTable>,
    shells: Vec<FunctionTable>,
}

impl<'a> IdentityWorkspace<'a> {
    pub fn new(f: &'a FunctionTable, k: usize) -> Result<Self> {
        let g = f.geometry();
        if g.n() > 12 {
            return Err(LabError::TooLarge(format!("2^{} averaging operators", g.n())));
        }
        let k = SmoothingRadius::new(k, &g)?;
        let deltas = (0..1u32 << g.n()).map(|mask| delta(f, AxisSet::from_mask(mask), k)).collect::<Result<_>>()?;
        let shells = (0..g.n()).map(|j| ej_average(f, j, k)).collect::<Result<_>>()?;
        Ok(Self { f, k, deltas, shells })
    }

    pub fn table(&self) -> &FunctionTable {
        self.f
    }

    fn check_args(&self, x: &TorusPoint, eps: &SignVector) -> Result<()> {
        let g = self.f.geometry();
        g.check_point(x)?;
        if eps.len() != g.n() {
            return Err(LabError::GeometryMismatch(format!("sign vector of length {} for n={}", eps.len(), g.n())));
        }
        Ok(())
    }

    fn check_indices(&self, i: usize, l: usize) -> Result<()> {
        let n = self.f.geometry().n();
        if l > i || i > n {
            return Err(LabError::IndexBounds(format!("need 0 <= l <= i <= n, got i={i}, l={l}, n={n}")));
        }
        Ok(())
    }

    /// `R_{i,l} f(x, ε)`.
    pub fn r_value(&self, i: usize, l: usize, x: &TorusPoint, eps: &SignVector) -> Result<Vec<f64>> {
        self.check_indices(i, l)?;
        self.check_args(x, eps)?;
        let g = self.f.geometry();
        let n = g.n();
        let mut acc = vec![0.0; self.f.d()];
        for subset in AxisSet::subsets_of_size(n, i) {
            let rest = subset.complement(n);
            let table = &self.deltas[rest.mask() as usize];
            let e_rest = restricted_signs(&g, eps, rest);
            let neg_rest = g.neg(&e_rest);
            for shift in SignedSubsetShift::with_agreement(subset, eps, l) {
                let base = g.add(x, &shift.offset(&g, self.k.get()));
                let plus = table.at_index(g.encode(&g.add(&base, &e_rest)));
                let minus = table.at_index(g.encode(&g.add(&base, &neg_rest)));
                for ((a, u), v) in acc.iter_mut().zip(plus).zip(minus) {
                    *a += u - v;
                }
            }
        }
        Ok(acc)
    }

    /// `x -> R_{i,l} f(x, ε)` for a fixed `ε`, flattened like a table.
    pub fn r_table(&self, i: usize, l: usize, eps: &SignVector) -> Result<Vec<f64>> {
        self.check_indices(i, l)?;
        let g = self.f.geometry();
        let n = g.n();
        let d = self.f.d();
        let mut out = vec![0.0; g.point_count() * d];
        for subset in AxisSet::subsets_of_size(n, i) {
            let rest = subset.complement(n);
            if rest.is_empty() {
                continue;
            }
            let table = &self.deltas[rest.mask() as usize];
            let e_rest = restricted_signs(&g, eps, rest);
            let neg_rest = g.neg(&e_rest);
            for shift in SignedSubsetShift::with_agreement(subset, eps, l) {
                let off = shift.offset(&g, self.k.get());
                let plus = g.translation_map(&g.add(&off, &e_rest));
                let minus = g.translation_map(&g.add(&off, &neg_rest));
                for (x, (&a, &b)) in plus.iter().zip(&minus).enumerate() {
                    for ((o, u), v) in out[x * d..(x + 1) * d].iter_mut().zip(table.at_index(a)).zip(table.at_index(b)) {
                        *o += u - v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `Σ_j ε_j [E_j f(x + e_j) - E_j f(x - e_j)]`.
    pub fn lhs(&self, x: &TorusPoint, eps: &SignVector) -> Result<Vec<f64>> {
        self.check_args(x, eps)?;
        let g = self.f.geometry();
        let mut acc = vec![0.0; self.f.d()];
        for (j, shell) in self.shells.iter().enumerate() {
            let e = g.basis(j)?;
            let plus = shell.at_index(g.encode(&g.add(x, &e)));
            let minus = shell.at_index(g.encode(&g.add(x, &g.neg(&e))));
            let s = f64::from(eps.signs()[j]);
            for ((a, u), v) in acc.iter_mut().zip(plus).zip(minus) {
                *a += s * (u - v);
            }
        }
        Ok(acc)
    }

    /// Scaled features `identity_scale(n, i, k) · R_{i,l} f(x, ε)`, one per
    /// unknown in [`coefficient_index`] order, for component `c`.
    fn features(&self, x: &TorusPoint, eps: &SignVector, c: usize) -> Result<Vec<f64>> {
        let n = self.f.geometry().n();
        let mut row = Vec::with_capacity(unknown_count(n));
        for i in 0..=n {
            for l in 0..=i {
                row.push(identity_scale(n, i, self.k.get()) * self.r_value(i, l, x, eps)?[c]);
            }
        }
        Ok(row)
    }
}

/// `R_{i,l} f(x, ε)`.
pub fn r_operator(
    f: &FunctionTable,
    i: usize,
    l: usize,
    k: usize,
    x: &TorusPoint,
    eps: &SignVector,
) -> Result<Vec<f64>> {
    IdentityWorkspace::new(f, k)?.r_value(i, l, x, eps)
}

/// `Σ_j ε_j [E_j f(x + e_j) - E_j f(x - e_j)]`.
pub fn identity_lhs(f: &FunctionTable, k: usize, x: &TorusPoint, eps: &SignVector) -> Result<Vec<f64>> {
    IdentityWorkspace::new(f, k)?.lhs(x, eps)
}

pub fn unknown_count(n: usize) -> usize {
    (n + 1) * (n + 2) / 2
}

/// Position of `h_{i,l}` in the flattened unknown vector.
pub fn coefficient_index(i: usize, l: usize) -> usize {
    i * (i + 1) / 2 + l
}

/// `(i - l)! l! / 2^i`.
pub fn decay_shape(i: usize, l: usize) -> f64 {
    let fact = |t: usize| (1..=t).map(|v| v as f64).product::<f64>();
    fact(i - l) * fact(l) / 2f64.powi(i as i32)
}

/// Fitted coefficients of the decomposition identity for one `(n, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HCoefficients {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    /// Row `i` holds `h_{i,0} ..= h_{i,i}` (minimum-norm solution).
    pub h: Vec<Vec<f64>>,
    pub identifiable: Vec<Vec<bool>>,
    /// Euclidean norm of the training residual.
    pub residual: f64,
    /// Max absolute residual over fresh held-out samples.
    pub heldout_residual: f64,
    pub heldout_samples: usize,
    /// `max |h_{i,l}| / ((i-l)! l! / 2^i)` over identifiable entries.
    pub c_fit: f64,
    pub rank: usize,
    /// `h_{0,0}` was fixed to 1 because the samples cannot determine it
    /// (this happens at `k = 1`, where `R_{0,0}` is a combination of the
    /// `R_{1,l}`); identifiability of the rest is relative to that choice.
    pub h00_pinned: bool,
    pub seed: u64,
    pub budget: usize,
}

impl HCoefficients {
    pub fn get(&self, i: usize, l: usize) -> f64 {
        self.h[i][l]
    }

    pub fn is_identifiable(&self, i: usize, l: usize) -> bool {
        self.identifiable[i][l]
    }

    fn flat(&self) -> Vec<f64> {
        self.h.iter().flatten().copied().collect()
    }

    /// `Σ h_{i,l} · scale · R_{i,l} f(x, ε)`.
    pub fn rhs(&self, ws: &IdentityWorkspace<'_>, x: &TorusPoint, eps: &SignVector) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; ws.table().d()];
        for i in 0..=self.n {
            let scale = identity_scale(self.n, i, self.k);
            for l in 0..=i {
                let r = ws.r_value(i, l, x, eps)?;
                for (a, v) in acc.iter_mut().zip(r) {
                    *a += self.h[i][l] * scale * v;
                }
            }
        }
        Ok(acc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("coefficients serialize")
    }
}

struct LeastSquares {
    solution: DVector<f64>,
    /// Norm of each coordinate's component in the numerical null space.
    null_weight: Vec<f64>,
    rank: usize,
}

/// Minimum-norm least squares through the eigendecomposition of `AᵀA`.
/// The feature matrices here are well conditioned apart from exact linear
/// relations, which this resolves more reliably than a bidiagonal SVD.
fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<LeastSquares> {
    let eig = (a.transpose() * a).symmetric_eigen();
    let top = eig.eigenvalues.max();
    if !(top > 0.0) {
        return Err(LabError::RankZero);
    }
    let cutoff = top * RANK_RTOL;
    let atb = a.transpose() * b;
    let cols = a.ncols();
    let mut solution = DVector::zeros(cols);
    let mut null_sq = vec![0.0; cols];
    let mut rank = 0;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(j);
        if lambda > cutoff {
            solution += v * (v.dot(&atb) / lambda);
            rank += 1;
        } else {
            for (w, x) in null_sq.iter_mut().zip(v.iter()) {
                *w += x * x;
            }
        }
    }
    Ok(LeastSquares { solution, null_weight: null_sq.into_iter().map(f64::sqrt).collect(), rank })
}

struct Sample {
    features: Vec<f64>,
    target: f64,
}

fn draw_sample(geometry: TorusGeometry, k: usize, seed: u64, tags: &[u64]) -> Result<Sample> {
    let mut rng = stream(seed, tags);
    let f = FunctionTable::random_gaussian(geometry, 1, &mut rng)?;
    let x = geometry.decode(rng.random_range(0..geometry.point_count()));
    let eps = SignVector::from_index(rng.random_range(0..1usize << geometry.n()), geometry.n());
    let ws = IdentityWorkspace::new(&f, k)?;
    Ok(Sample { features: ws.features(&x, &eps, 0)?, target: ws.lhs(&x, &eps)?[0] })
}

fn draw_samples(geometry: TorusGeometry, k: usize, seed: u64, tag: u64, count: usize) -> Result<Vec<Sample>> {
    (0..count as u64).into_par_iter().map(|s| draw_sample(geometry, k, seed, &[tag, s])).collect()
}

/// Solves for `h_{i,l}` from `sample_budget` random scalar `(f, x, ε)` samples
/// and scores the fit on [`HELDOUT_SAMPLES`] fresh ones.
pub fn fit_h_coefficients(geometry: TorusGeometry, k: usize, sample_budget: usize, seed: u64) -> Result<HCoefficients> {
    SmoothingRadius::new(k, &geometry)?;
    let n = geometry.n();
    let unknowns = unknown_count(n);
    let need = 4 * unknowns;
    if sample_budget < need {
        return Err(LabError::InsufficientSamples { got: sample_budget, need });
    }
    let samples = draw_samples(geometry, k, seed, FIT_STREAM, sample_budget)?;
    let a = DMatrix::from_fn(sample_budget, unknowns, |r, c| samples[r].features[c]);
    let b = DVector::from_iterator(sample_budget, samples.iter().map(|s| s.target));

    let mut fit = min_norm_solve(&a, &b)?;
    let mut h00_pinned = false;
    if fit.null_weight[0] >= IDENTIFIABLE_TOL {
        // h_{0,0} = 1 is part of the identity's normalization; impose it and
        // solve for the remaining coefficients.
        let rest = a.columns(1, unknowns - 1).into_owned();
        let shifted = &b - a.column(0);
        let sub = min_norm_solve(&rest, &shifted)?;
        let mut solution = DVector::zeros(unknowns);
        solution[0] = 1.0;
        solution.rows_mut(1, unknowns - 1).copy_from(&sub.solution);
        let mut null_weight = vec![0.0];
        null_weight.extend(sub.null_weight);
        fit = LeastSquares { solution, null_weight, rank: sub.rank + 1 };
        h00_pinned = true;
    }
    let solution = fit.solution;
    let residual = (&a * &solution - &b).norm();

    let mut h = Vec::with_capacity(n + 1);
    let mut identifiable = Vec::with_capacity(n + 1);
    let mut c_fit: f64 = 0.0;
    for i in 0..=n {
        let mut row = Vec::with_capacity(i + 1);
        let mut mask = Vec::with_capacity(i + 1);
        for l in 0..=i {
            let idx = coefficient_index(i, l);
            let ok = fit.null_weight[idx] < IDENTIFIABLE_TOL;
            if ok {
                c_fit = c_fit.max(solution[idx].abs() / decay_shape(i, l));
            }
            row.push(solution[idx]);
            mask.push(ok);
        }
        h.push(row);
        identifiable.push(mask);
    }
    let rank = fit.rank;
    let mut fitted = HCoefficients {
        n,
        k,
        m: geometry.m(),
        h,
        identifiable,
        residual,
        heldout_residual: f64::NAN,
        heldout_samples: HELDOUT_SAMPLES,
        c_fit,
        rank,
        h00_pinned,
        seed,
        budget: sample_budget,
    };
    fitted.heldout_residual = heldout_residual(&fitted, HELDOUT_SAMPLES, seed)?;
    Ok(fitted)
}

/// Max absolute identity residual over `count` fresh random `(f, x, ε)`.
pub fn heldout_residual(h: &HCoefficients, count: usize, seed: u64) -> Result<f64> {
    let geometry = TorusGeometry::new(h.n, h.m)?;
    let samples = draw_samples(geometry, h.k, seed, HELDOUT_STREAM, count)?;
    let coeffs = h.flat();
    Ok(samples
        .iter()
        .map(|s| (s.target - s.features.iter().zip(&coeffs).map(|(a, c)| a * c).sum::<f64>()).abs())
        .fold(0.0, f64::max))
}

/// Outcome of checking the identity on every `(x, ε)` for one table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub max_residual: f64,
    pub points_checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Exhaustive identity check for `f` over all `x` and `ε`.
pub fn verify_identity(h: &HCoefficients, f: &FunctionTable, k: usize, tolerance: f64) -> Result<IdentityCheck> {
    let g = f.geometry();
    if g.n() != h.n || k != h.k {
        return Err(LabError::GeometryMismatch(format!(
            "coefficients fitted for (n={}, k={}), table has n={} and k={k}",
            h.n,
            h.k,
            g.n()
        )));
    }
    let ws = IdentityWorkspace::new(f, k)?;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for x in g.points() {
        for eps in SignVector::all(g.n()) {
            let lhs = ws.lhs(&x, &eps)?;
            let rhs = h.rhs(&ws, &x, &eps)?;
            worst = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
            count += 1;
        }
    }
    Ok(IdentityCheck { max_residual: worst, points_checked: count, tolerance, passed: worst < tolerance })
}

fn binomial(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, t| acc * (n - t) as f64 / (t + 1) as f64)
}

/// `E_{x,ε} ‖R_{i,l} f(x, ε)‖^p` against
/// `(log n)^p C(n,i)^p C(i,l)^p` times the edge energy. Needs `n >= 2`.
pub fn r_moment(f: &FunctionTable, i: usize, l: usize, k: usize, norm: NormSpec, p: Exponent) -> Result<RatioReport> {
    let ws = IdentityWorkspace::new(f, k)?;
    r_moment_with(&ws, i, l, norm, p)
}

/// [`r_moment`] reusing a prepared workspace.
pub fn r_moment_with(ws: &IdentityWorkspace<'_>, i: usize, l: usize, norm: NormSpec, p: Exponent) -> Result<RatioReport> {
    let f = ws.table();
    let g = f.geometry();
    let n = g.n();
    if n < 2 {
        return Err(LabError::IndexBounds(format!("R-moment bound needs n >= 2 (log n > 0), got n={n}")));
    }
    ws.check_indices(i, l)?;
    let d = f.d();
    let mut total = 0.0;
    for eps in SignVector::all(n) {
        let table = ws.r_table(i, l, &eps)?;
        total += table.chunks_exact(d).map(|v| norm.norm_pow(v, p)).sum::<f64>();
    }
    let lhs = total / (g.point_count() as f64 * (1u64 << n) as f64);
    let pv = p.value();
    let rhs = ((n as f64).ln() * binomial(n, i) * binomial(i, l)).powf(pv) * edge_energy(f, norm, p);
    let echo = Echo::of("r_moment", f, Some(ws.k.get()), norm, p);
    RatioReport::classify(echo, lhs, rhs, noise_floor(f.max_abs(), p))
}
