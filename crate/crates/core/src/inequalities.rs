//! Exact evaluators for both sides of the type inequalities.
//!
//! Every expectation is a full sum over the grid (and over all sign vectors
//! where one appears). Results come back as [`RatioReport`]s.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::norm::{Exponent, NormSpec};
use crate::operators::{delta, SmoothingRadius};
use crate::table::FunctionTable;
use crate::torus::{AxisSet, SignVector, TorusGeometry};

/// Values below `(NOISE_REL * sup|f|)^p` count as numerically zero when
/// deciding degeneracy. Averaging a constant table does not reproduce the
/// constant bit for bit, so exact-zero tests would misfire.
pub const NOISE_REL: f64 = 1e-12;

/// Largest hypercube dimension for which the `4^n`-term Pisier sum is evaluated.
pub const PISIER_MAX_N: usize = 8;

/// Largest `n` for the `2^n`-term Rademacher average.
pub const RADEMACHER_MAX_N: usize = 24;

/// One evaluation of an inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub evaluator: String,
    pub n: usize,
    pub m: usize,
    pub k: Option<usize>,
    pub p: f64,
    pub q: NormSpec,
    pub d: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; `None` exactly when the report is degenerate.
    pub ratio: Option<f64>,
    pub degenerate: bool,
    pub seed: Option<u64>,
}

/// Stable column order for CSV output.
pub const REPORT_COLUMNS: [&str; 12] =
    ["evaluator", "n", "m", "k", "p", "q", "d", "lhs", "rhs", "ratio", "degenerate", "seed"];

#[derive(Debug, Clone)]
pub(crate) struct Echo {
    pub evaluator: &'static str,
    pub n: usize,
    pub m: usize,
    pub k: Option<usize>,
    pub p: Exponent,
    pub q: NormSpec,
    pub d: usize,
}

impl Echo {
    pub(crate) fn of(evaluator: &'static str, f: &FunctionTable, k: Option<usize>, norm: NormSpec, p: Exponent) -> Self {
        let g = f.geometry();
        Echo { evaluator, n: g.n(), m: g.m(), k, p, q: norm, d: f.d() }
    }
}

impl RatioReport {
    /// Classifies `(lhs, rhs)`: a ratio when `rhs` is above the noise floor,
    /// degenerate when both sides are, and an error when only `rhs` is.
    pub(crate) fn classify(echo: Echo, lhs: f64, rhs: f64, noise_floor: f64) -> Result<Self> {
        let lhs_zero = lhs <= noise_floor;
        let rhs_zero = rhs <= noise_floor;
        let (ratio, degenerate) = match (lhs_zero, rhs_zero) {
            (_, false) => (Some(lhs / rhs), false),
            (true, true) => (None, true),
            (false, true) => {
                return Err(LabError::InvariantViolation { evaluator: echo.evaluator.to_string(), lhs });
            }
        };
        Ok(RatioReport {
            evaluator: echo.evaluator.to_string(),
            n: echo.n,
            m: echo.m,
            k: echo.k,
            p: echo.p.value(),
            q: echo.q,
            d: echo.d,
            lhs,
            rhs,
            ratio,
            degenerate,
            seed: None,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// `rhs - lhs`; nonnegative whenever the inequality holds with constant 1.
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }

    /// `lhs <= rhs` up to a relative tolerance.
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.lhs <= self.rhs * (1.0 + rel_tol) || self.degenerate
    }

    /// Fields in [`REPORT_COLUMNS`] order; absent values are empty strings.
    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.evaluator.clone(),
            self.n.to_string(),
            self.m.to_string(),
            self.k.map(|k| k.to_string()).unwrap_or_default(),
            self.p.to_string(),
            self.q.to_string(),
            self.d.to_string(),
            self.lhs.to_string(),
            self.rhs.to_string(),
            self.ratio.map(|r| r.to_string()).unwrap_or_default(),
            self.degenerate.to_string(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
        ]
    }
}

pub(crate) fn noise_floor(scale: f64, p: Exponent) -> f64 {
    (NOISE_REL * scale).powf(p.value())
}

/// `sum_x ‖f(plus[x]) - f(minus[x])‖^p`, with `minus` defaulting to the identity.
pub(crate) fn pair_energy(
    f: &FunctionTable,
    plus: &[usize],
    minus: Option<&[usize]>,
    norm: NormSpec,
    p: Exponent,
) -> f64 {
    let d = f.d();
    let mut buf = vec![0.0; d];
    let mut total = 0.0;
    for (x, &a) in plus.iter().enumerate() {
        let b = minus.map_or(x, |mm| mm[x]);
        for ((o, u), v) in buf.iter_mut().zip(f.at_index(a)).zip(f.at_index(b)) {
            *o = u - v;
        }
        total += norm.norm_pow(&buf, p);
    }
    total
}

/// `sum_x ‖a(x) - b(x)‖^p` for two tables of the same shape.
pub(crate) fn table_distance_pow(a: &FunctionTable, b: &FunctionTable, norm: NormSpec, p: Exponent) -> f64 {
    let d = a.d();
    let mut buf = vec![0.0; d];
    a.values()
        .chunks_exact(d)
        .zip(b.values().chunks_exact(d))
        .map(|(u, v)| {
            for ((o, x), y) in buf.iter_mut().zip(u).zip(v) {
                *o = x - y;
            }
            norm.norm_pow(&buf, p)
        })
        .sum()
}

/// `E_ε ‖Σ ε_j x_j‖^p` against `Σ ‖x_j‖^p`.
pub fn rademacher_ratio(vectors: &[Vec<f64>], norm: NormSpec, p: Exponent) -> Result<RatioReport> {
    let n = vectors.len();
    let d = vectors.first().ok_or(LabError::Empty("vector list"))?.len();
    if d == 0 {
        return Err(LabError::Empty("vector components"));
    }
    if vectors.iter().any(|v| v.len() != d) {
        return Err(LabError::GeometryMismatch("vectors have different lengths".into()));
    }
    if vectors.iter().flatten().any(|v| !v.is_finite()) {
        return Err(LabError::NonFinite(0));
    }
    if n > RADEMACHER_MAX_N {
        return Err(LabError::TooLarge(format!("2^{n} sign patterns")));
    }
    let mut sum = vec![0.0; d];
    let mut lhs = 0.0;
    for eps in SignVector::all(n) {
        sum.iter_mut().for_each(|s| *s = 0.0);
        for (v, &e) in vectors.iter().zip(eps.signs()) {
            let e = f64::from(e);
            for (s, x) in sum.iter_mut().zip(v) {
                *s += e * x;
            }
        }
        lhs += norm.norm_pow(&sum, p);
    }
    lhs /= (1u64 << n) as f64;
    let rhs: f64 = vectors.iter().map(|v| norm.norm_pow(v, p)).sum();
    let scale = vectors.iter().flatten().fold(0.0, |acc: f64, v| acc.max(v.abs()));
    let echo = Echo { evaluator: "rademacher", n, m: 2, k: None, p, q: norm, d };
    RatioReport::classify(echo, lhs, rhs, noise_floor(scale, p))
}

/// `E_ε ‖f(ε) - f(-ε)‖^p` against `Σ_j E_ε ‖f(ε) - f(ε^(j))‖^p` on the hypercube.
pub fn enflo_ratio(f: &FunctionTable, norm: NormSpec, p: Exponent) -> Result<RatioReport> {
    f.require_hypercube()?;
    let n = f.geometry().n();
    let count = 1usize << n;
    let all = count - 1;
    let antipode: Vec<usize> = (0..count).map(|i| i ^ all).collect();
    let lhs = pair_energy(f, &antipode, None, norm, p) / count as f64;
    let rhs: f64 = (0..n)
        .map(|j| {
            let bit = 1 << (n - 1 - j);
            let flipped: Vec<usize> = (0..count).map(|i| i ^ bit).collect();
            pair_energy(f, &flipped, None, norm, p) / count as f64
        })
        .sum();
    RatioReport::classify(Echo::of("enflo", f, None, norm, p), lhs, rhs, noise_floor(f.max_abs(), p))
}

/// `Σ_j E_x ‖f(x + e_j) - f(x)‖^p`.
pub fn edge_energy(f: &FunctionTable, norm: NormSpec, p: Exponent) -> f64 {
    let g = f.geometry();
    let count = g.point_count() as f64;
    (0..g.n())
        .map(|j| {
            let e = g.basis(j).expect("axis below n");
            pair_energy(f, &g.translation_map(&e), None, norm, p) / count
        })
        .sum()
}

/// `E_{x,ε} ‖f(x + (m/2)ε) - f(x)‖^p` over all `m^n · 2^n` terms.
fn antipodal_energy(f: &FunctionTable, norm: NormSpec, p: Exponent) -> f64 {
    let g = f.geometry();
    let n = g.n();
    let total: f64 = SignVector::all(n)
        .map(|eps| pair_energy(f, &g.translation_map(&g.embed_signs(&eps, g.m() / 2)), None, norm, p))
        .sum();
    total / (g.point_count() as f64 * (1u64 << n) as f64)
}

/// `E_{x,ε} ‖g(x + ε) - g(x - ε)‖^p`.
pub(crate) fn diagonal_energy(g_table: &FunctionTable, norm: NormSpec, p: Exponent) -> f64 {
    let g = g_table.geometry();
    let n = g.n();
    let total: f64 = SignVector::all(n)
        .map(|eps| {
            let plus = g.translation_map(&g.embed_signs(&eps, 1));
            let minus = g.translation_map(&g.embed_signs(&eps.negated(), 1));
            pair_energy(g_table, &plus, Some(&minus), norm, p)
        })
        .sum();
    total / (g.point_count() as f64 * (1u64 << n) as f64)
}

fn check_m_even(g: &TorusGeometry) -> Result<()> {
    if !g.m().is_multiple_of(2) {
        return Err(LabError::InvalidGeometry(format!("m={} must be even", g.m())));
    }
    Ok(())
}

/// Scaled Enflo ratio: antipodal energy against `m^p` times the edge energy.
pub fn scaled_enflo_ratio(f: &FunctionTable, norm: NormSpec, p: Exponent) -> Result<RatioReport> {
    let g = f.geometry();
    check_m_even(&g)?;
    let lhs = antipodal_energy(f, norm, p);
    let rhs = (g.m() as f64).powf(p.value()) * edge_energy(f, norm, p);
    RatioReport::classify(Echo::of("scaled_enflo", f, None, norm, p), lhs, rhs, noise_floor(f.max_abs(), p))
}

/// `E_x ‖Δ_[n] f - f‖^p` against `(k-1)^p n^(p-1)` times the edge energy.
pub fn approximation_ratio(f: &FunctionTable, k: usize, norm: NormSpec, p: Exponent) -> Result<RatioReport> {
    let g = f.geometry();
    let radius = SmoothingRadius::new(k, &g)?;
    let smoothed = delta(f, AxisSet::full(g.n()), radius)?;
    let lhs = table_distance_pow(&smoothed, f, norm, p) / g.point_count() as f64;
    let pv = p.value();
    let rhs = ((k - 1) as f64).powf(pv) * (g.n() as f64).powf(pv - 1.0) * edge_energy(f, norm, p);
    RatioReport::classify(Echo::of("approximation", f, Some(k), norm, p), lhs, rhs, noise_floor(f.max_abs(), p))
}

/// `E_{x,ε} ‖Δ_[n] f(x + ε) - Δ_[n] f(x - ε)‖^p` against the edge energy.
pub fn smoothing_ratio(f: &FunctionTable, k: usize, norm: NormSpec, p: Exponent) -> Result<RatioReport> {
    let g = f.geometry();
    let radius = SmoothingRadius::new(k, &g)?;
    let smoothed = delta(f, AxisSet::full(g.n()), radius)?;
    let lhs = diagonal_energy(&smoothed, norm, p);
    let rhs = edge_energy(f, norm, p);
    RatioReport::classify(Echo::of("smoothing", f, Some(k), norm, p), lhs, rhs, noise_floor(f.max_abs(), p))
}

/// Pisier's inequality on the hypercube with the `(e log n)^p` constant.
pub fn pisier_ratio(g: &FunctionTable, norm: NormSpec, p: Exponent) -> Result<RatioReport> {
    g.require_hypercube()?;
    let n = g.geometry().n();
    if n < 2 {
        return Err(LabError::IndexBounds(format!("Pisier evaluator needs n >= 2, got n={n}")));
    }
    if n > PISIER_MAX_N {
        return Err(LabError::TooLarge(format!("4^{n} sign pairs exceed the exact-evaluation limit n <= {PISIER_MAX_N}")));
    }
    let d = g.d();
    let count = 1usize << n;
    let mean = g.mean();
    let mut buf = vec![0.0; d];
    let mut lhs = 0.0;
    for x in g.values().chunks_exact(d) {
        for ((o, v), mu) in buf.iter_mut().zip(x).zip(&mean) {
            *o = v - mu;
        }
        lhs += norm.norm_pow(&buf, p);
    }
    lhs /= count as f64;

    // For each ε the inner average over ε' runs through a Gray code on
    // ε'_1..ε'_{n-1} with ε'_0 = +1; ε' and -ε' give equal norms.
    let mut diffs = vec![0.0; n * d];
    let mut inner_total = 0.0;
    let half = count / 2;
    for eps in 0..count {
        let base = g.at_index(eps);
        for j in 0..n {
            let flipped = g.at_index(eps ^ (1 << (n - 1 - j)));
            for c in 0..d {
                diffs[j * d + c] = flipped[c] - base[c];
            }
        }
        let mut signs = vec![1.0f64; n];
        for (c, o) in buf.iter_mut().enumerate() {
            *o = (0..n).map(|j| diffs[j * d + c]).sum();
        }
        let mut acc = norm.norm_pow(&buf, p);
        for t in 1..half {
            let j = t.trailing_zeros() as usize + 1;
            let old = signs[j];
            signs[j] = -old;
            for (c, o) in buf.iter_mut().enumerate() {
                *o -= 2.0 * old * diffs[j * d + c];
            }
            acc += norm.norm_pow(&buf, p);
        }
        inner_total += acc / half as f64;
    }
    let inner = inner_total / count as f64;
    let constant = (std::f64::consts::E * (n as f64).ln()).powf(p.value());
    let rhs = constant * inner;
    RatioReport::classify(Echo::of("pisier", g, None, norm, p), lhs, rhs, noise_floor(g.max_abs(), p))
}

/// Explicit constant in front of `A + m^p S` implied by the convexity split
/// and the Hölder telescope: `2 · 3^(p-1)`.
pub fn composite_constant(p: Exponent) -> f64 {
    2.0 * 3f64.powf(p.value() - 1.0)
}

/// Checks the smoothing-and-approximation chain with explicit constants:
///
/// ```text
/// E‖f(x + (m/2)ε) - f(x)‖^p <= 3^(p-1) [ 2 A + (m/4)^p S ]
/// ```
///
/// where `A = E‖Δf - f‖^p` and `S = E‖Δf(x+ε) - Δf(x-ε)‖^p`. The reported
/// rhs is this chain bound, which is at most
/// `composite_constant(p) · (A + m^p S)`.
pub fn scheme_composite_check(f: &FunctionTable, k: usize, norm: NormSpec, p: Exponent) -> Result<RatioReport> {
    let g = f.geometry();
    if !g.m().is_multiple_of(4) {
        return Err(LabError::InvalidGeometry(format!("m={} must be divisible by 4", g.m())));
    }
    let radius = SmoothingRadius::new(k, &g)?;
    let smoothed = delta(f, AxisSet::full(g.n()), radius)?;
    let approx = table_distance_pow(&smoothed, f, norm, p) / g.point_count() as f64;
    let smooth = diagonal_energy(&smoothed, norm, p);
    let lhs = antipodal_energy(f, norm, p);
    let pv = p.value();
    let rhs = 3f64.powf(pv - 1.0) * (2.0 * approx + (g.m() as f64 / 4.0).powf(pv) * smooth);
    RatioReport::classify(Echo::of("scheme_composite", f, Some(k), norm, p), lhs, rhs, noise_floor(f.max_abs(), p))
}
