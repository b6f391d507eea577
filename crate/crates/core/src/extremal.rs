//! Ratio maximization over function tables.
//!
//! Every supported inequality is written as `L(f) / R(f)` where each side is
//! a weighted sum of `‖Σ_t c_t (Tf)(σ_t x)‖^p` over the grid, with `T` one
//! of a few self-adjoint linear transforms and `σ_t` index maps. Ascent runs
//! on `log L - log R` with smoothed norms; the winning table is re-scored by
//! the exact evaluators in [`crate::inequalities`].

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::inequalities::{
    approximation_ratio, enflo_ratio, pisier_ratio, scaled_enflo_ratio, smoothing_ratio, RatioReport, PISIER_MAX_N,
};
use crate::norm::{Exponent, NormSpec};
use crate::operators::{delta, SmoothingRadius};
use crate::rng::{derive_seed, stream};
use crate::table::FunctionTable;
use crate::torus::{AxisSet, SignVector, TorusGeometry};

/// Exponent standing in for `q = ∞` inside the smoothed surrogate.
pub const LINF_SURROGATE_Q: f64 = 32.0;

const BACKTRACK_LIMIT: usize = 40;
const STEP_GROWTH: f64 = 1.25;
const GRADIENT_CHECK_COORDS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Objective {
    ScaledEnflo,
    Smoothing { k: usize },
    Approximation { k: usize },
    Pisier,
    Enflo,
}

impl Objective {
    pub const NAMES: [&'static str; 5] = ["scaled_enflo", "smoothing", "approximation", "pisier", "enflo"];

    /// Parses an objective name; `k` is required by the averaging objectives.
    pub fn parse(name: &str, k: Option<usize>) -> Result<Self> {
        let need_k = || k.ok_or_else(|| LabError::InvalidConfig(format!("objective {name} needs k")));
        Ok(match name {
            "scaled_enflo" => Objective::ScaledEnflo,
            "smoothing" => Objective::Smoothing { k: need_k()? },
            "approximation" => Objective::Approximation { k: need_k()? },
            "pisier" => Objective::Pisier,
            "enflo" => Objective::Enflo,
            other => return Err(LabError::InvalidConfig(format!("unknown objective {other:?}"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Objective::ScaledEnflo => "scaled_enflo",
            Objective::Smoothing { .. } => "smoothing",
            Objective::Approximation { .. } => "approximation",
            Objective::Pisier => "pisier",
            Objective::Enflo => "enflo",
        }
    }

    pub fn k(&self) -> Option<usize> {
        match *self {
            Objective::Smoothing { k } | Objective::Approximation { k } => Some(k),
            _ => None,
        }
    }

    /// Exact evaluation through the inequalities module.
    pub fn evaluate(&self, f: &FunctionTable, norm: NormSpec, p: Exponent) -> Result<RatioReport> {
        match *self {
            Objective::ScaledEnflo => scaled_enflo_ratio(f, norm, p),
            Objective::Smoothing { k } => smoothing_ratio(f, k, norm, p),
            Objective::Approximation { k } => approximation_ratio(f, k, norm, p),
            Objective::Pisier => pisier_ratio(f, norm, p),
            Objective::Enflo => enflo_ratio(f, norm, p),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationConfig {
    pub restarts: usize,
    pub iterations: usize,
    /// Initial step, relative to the table's Euclidean norm.
    pub step: f64,
    pub seed: u64,
    pub smoothing_eps: f64,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        OptimizationConfig { restarts: 4, iterations: 200, step: 0.1, seed: 0, smoothing_eps: 1e-9 }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(LabError::InvalidConfig("restarts must be >= 1".into()));
        }
        if self.iterations == 0 {
            return Err(LabError::InvalidConfig("iterations must be >= 1".into()));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(LabError::InvalidConfig(format!("step must be positive, got {}", self.step)));
        }
        if !(self.smoothing_eps > 0.0 && self.smoothing_eps.is_finite()) {
            return Err(LabError::InvalidConfig(format!("smoothing_eps must be positive, got {}", self.smoothing_eps)));
        }
        Ok(())
    }
}

/// `v -> (Σ (v_i² + η²)^(q/2))^(p/q)`.
#[derive(Debug, Clone, Copy)]
struct SmoothNorm {
    q: f64,
    p: f64,
    eta2: f64,
}

impl SmoothNorm {
    fn new(norm: NormSpec, p: Exponent, eta: f64) -> Self {
        let q = if norm.q().is_infinite() { LINF_SURROGATE_Q } else { norm.q() };
        SmoothNorm { q, p: p.value(), eta2: eta * eta }
    }

    /// Value, and the gradient written into `grad` when given.
    fn eval(&self, v: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let big = v.iter().map(|x| (x * x + self.eta2).sqrt()).fold(0.0, f64::max);
        let sum: f64 = v.iter().map(|x| ((x * x + self.eta2).sqrt() / big).powf(self.q)).sum();
        let s = big * sum.powf(1.0 / self.q);
        if let Some(grad) = grad {
            let outer = self.p * s.powf(self.p - 1.0);
            for (g, x) in grad.iter_mut().zip(v) {
                let a = (x * x + self.eta2).sqrt();
                *g = outer * (a / s).powf(self.q - 1.0) * x / a;
            }
        }
        s.powf(self.p)
    }
}

#[derive(Debug, Clone, Copy)]
enum Transform {
    Identity,
    Delta(SmoothingRadius),
    DeltaMinusIdentity(SmoothingRadius),
    Centered,
}

impl Transform {
    /// Every variant is self-adjoint, so this also applies the adjoint.
    fn apply(&self, f: &FunctionTable) -> Result<FunctionTable> {
        let n = f.geometry().n();
        Ok(match *self {
            Transform::Identity => f.clone(),
            Transform::Delta(k) => delta(f, AxisSet::full(n), k)?,
            Transform::DeltaMinusIdentity(k) => delta(f, AxisSet::full(n), k)?.sub(f)?,
            Transform::Centered => {
                let mut g = f.clone();
                g.project_out_mean();
                g
            }
        })
    }
}

/// `weight · Σ_x φ(Σ_t c_t g(map_t[x]))`.
struct Term {
    parts: Vec<(f64, Vec<usize>)>,
    weight: f64,
}

struct Side {
    transform: Transform,
    terms: Vec<Term>,
}

impl Side {
    fn value(&self, f: &FunctionTable, phi: &SmoothNorm, grad: Option<&mut Vec<f64>>) -> Result<f64> {
        let g = self.transform.apply(f)?;
        let d = f.d();
        let mut v = vec![0.0; d];
        let mut dv = vec![0.0; d];
        let want = grad.is_some();
        let mut grad_g = if want { vec![0.0; g.values().len()] } else { Vec::new() };
        let mut total = 0.0;
        for term in &self.terms {
            let mut acc = 0.0;
            for x in 0..term.parts[0].1.len() {
                v.iter_mut().for_each(|e| *e = 0.0);
                for (c, map) in &term.parts {
                    for (e, u) in v.iter_mut().zip(g.at_index(map[x])) {
                        *e += c * u;
                    }
                }
                acc += phi.eval(&v, if want { Some(&mut dv) } else { None });
                if want {
                    for (c, map) in &term.parts {
                        let base = map[x] * d;
                        for (gg, dd) in grad_g[base..base + d].iter_mut().zip(&dv) {
                            *gg += term.weight * c * dd;
                        }
                    }
                }
            }
            total += term.weight * acc;
        }
        if let Some(out) = grad {
            let gt = FunctionTable::from_values(f.geometry(), d, grad_g)?;
            *out = self.transform.apply(&gt)?.into_values();
        }
        Ok(total)
    }

    /// Smallest exact `q`-norm among all term vectors.
    fn min_vector_norm(&self, f: &FunctionTable, norm: NormSpec) -> Result<f64> {
        let g = self.transform.apply(f)?;
        let mut v = vec![0.0; f.d()];
        let mut best = f64::INFINITY;
        for term in &self.terms {
            for x in 0..term.parts[0].1.len() {
                v.iter_mut().for_each(|e| *e = 0.0);
                for (c, map) in &term.parts {
                    for (e, u) in v.iter_mut().zip(g.at_index(map[x])) {
                        *e += c * u;
                    }
                }
                best = best.min(norm.norm(&v));
            }
        }
        Ok(best)
    }
}

fn identity_map(g: &TorusGeometry) -> Vec<usize> {
    (0..g.point_count()).collect()
}

fn difference(plus: Vec<usize>, minus: Vec<usize>, weight: f64) -> Term {
    Term { parts: vec![(1.0, plus), (-1.0, minus)], weight }
}

fn edge_side(g: &TorusGeometry, scale: f64) -> Side {
    let count = g.point_count() as f64;
    let terms = (0..g.n())
        .map(|j| difference(g.translation_map(&g.basis(j).expect("axis below n")), identity_map(g), scale / count))
        .collect();
    Side { transform: Transform::Identity, terms }
}

fn hypercube_flip(n: usize, j: usize) -> Vec<usize> {
    (0..1usize << n).map(|i| i ^ (1 << (n - 1 - j))).collect()
}

/// The differentiable form of one objective at a fixed geometry.
struct Surrogate {
    lhs: Side,
    rhs: Side,
    phi: SmoothNorm,
}

impl Surrogate {
    fn new(objective: Objective, g: &TorusGeometry, norm: NormSpec, p: Exponent, eta: f64) -> Result<Self> {
        let n = g.n();
        let count = g.point_count() as f64;
        let pv = p.value();
        let signs = (1u64 << n) as f64;
        let (lhs, rhs) = match objective {
            Objective::ScaledEnflo => {
                if !g.m().is_multiple_of(2) {
                    return Err(LabError::InvalidGeometry(format!("m={} must be even", g.m())));
                }
                let terms = SignVector::all(n)
                    .map(|eps| {
                        difference(g.translation_map(&g.embed_signs(&eps, g.m() / 2)), identity_map(g), 1.0 / (count * signs))
                    })
                    .collect();
                (Side { transform: Transform::Identity, terms }, edge_side(g, (g.m() as f64).powf(pv)))
            }
            Objective::Smoothing { k } => {
                let k = SmoothingRadius::new(k, g)?;
                let terms = SignVector::all(n)
                    .map(|eps| {
                        difference(
                            g.translation_map(&g.embed_signs(&eps, 1)),
                            g.translation_map(&g.embed_signs(&eps.negated(), 1)),
                            1.0 / (count * signs),
                        )
                    })
                    .collect();
                (Side { transform: Transform::Delta(k), terms }, edge_side(g, 1.0))
            }
            Objective::Approximation { k } => {
                let radius = SmoothingRadius::new(k, g)?;
                let terms = vec![Term { parts: vec![(1.0, identity_map(g))], weight: 1.0 / count }];
                let scale = ((k - 1) as f64).powf(pv) * (n as f64).powf(pv - 1.0);
                (Side { transform: Transform::DeltaMinusIdentity(radius), terms }, edge_side(g, scale))
            }
            Objective::Enflo => {
                if !g.is_hypercube() {
                    return Err(LabError::NotHypercube { m: g.m() });
                }
                let all = (1usize << n) - 1;
                let antipode = (0..=all).map(|i| i ^ all).collect();
                let lhs = Side {
                    transform: Transform::Identity,
                    terms: vec![difference(antipode, identity_map(g), 1.0 / signs)],
                };
                let terms = (0..n).map(|j| difference(hypercube_flip(n, j), identity_map(g), 1.0 / signs)).collect();
                (lhs, Side { transform: Transform::Identity, terms })
            }
            Objective::Pisier => {
                if !g.is_hypercube() {
                    return Err(LabError::NotHypercube { m: g.m() });
                }
                if !(2..=PISIER_MAX_N).contains(&n) {
                    return Err(LabError::IndexBounds(format!("Pisier objective needs 2 <= n <= {PISIER_MAX_N}, got {n}")));
                }
                let lhs = Side {
                    transform: Transform::Centered,
                    terms: vec![Term { parts: vec![(1.0, identity_map(g))], weight: 1.0 / signs }],
                };
                // ε' and -ε' give equal norms, so ε'_0 = +1 is fixed.
                let half = 1usize << (n - 1);
                let constant = (std::f64::consts::E * (n as f64).ln()).powf(pv);
                let terms = (0..half)
                    .map(|bits| {
                        let sig: Vec<f64> =
                            (0..n).map(|j| if j > 0 && (bits >> (j - 1)) & 1 == 1 { -1.0 } else { 1.0 }).collect();
                        let mut parts: Vec<(f64, Vec<usize>)> =
                            (0..n).map(|j| (sig[j], hypercube_flip(n, j))).collect();
                        parts.push((-sig.iter().sum::<f64>(), identity_map(g)));
                        Term { parts, weight: constant / (signs * half as f64) }
                    })
                    .collect();
                (lhs, Side { transform: Transform::Identity, terms })
            }
        };
        Ok(Surrogate { lhs, rhs, phi: SmoothNorm::new(norm, p, eta) })
    }

    /// `log L - log R` and optionally its gradient.
    fn objective(&self, f: &FunctionTable, grad: Option<&mut Vec<f64>>) -> Result<f64> {
        match grad {
            None => {
                let l = self.lhs.value(f, &self.phi, None)?;
                let r = self.rhs.value(f, &self.phi, None)?;
                Ok(l.ln() - r.ln())
            }
            Some(out) => {
                let mut gl = Vec::new();
                let mut gr = Vec::new();
                let l = self.lhs.value(f, &self.phi, Some(&mut gl))?;
                let r = self.rhs.value(f, &self.phi, Some(&mut gr))?;
                *out = gl.iter().zip(&gr).map(|(a, b)| a / l - b / r).collect();
                Ok(l.ln() - r.ln())
            }
        }
    }
}

fn project_components(values: &mut [f64], d: usize) {
    let count = (values.len() / d) as f64;
    for c in 0..d {
        let mean = values.iter().skip(c).step_by(d).sum::<f64>() / count;
        values.iter_mut().skip(c).step_by(d).for_each(|v| *v -= mean);
    }
}

fn euclid(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Mean-free, unit-RMS copy; `None` for (numerically) constant tables.
fn normalized(f: &FunctionTable) -> Option<FunctionTable> {
    let mut g = f.clone();
    g.project_out_mean();
    let rms = euclid(g.values()) / (g.values().len() as f64).sqrt();
    if !(rms > 1e-12 * f.max_abs().max(f64::MIN_POSITIVE)) || !rms.is_finite() {
        return None;
    }
    Some(g.scaled(1.0 / rms))
}

/// One ascent run.
#[derive(Debug, Clone)]
pub struct RestartOutcome {
    pub restart: usize,
    pub seed: u64,
    pub table: FunctionTable,
    pub report: RatioReport,
    /// Surrogate objective after every accepted step, starting point first.
    pub trace: Vec<f64>,
    pub iterations: usize,
}

/// Result of [`maximize_ratio_detailed`].
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub table: FunctionTable,
    pub report: RatioReport,
    pub best_restart: usize,
    pub best_seed: u64,
    pub iterations_used: usize,
    pub restarts: Vec<RestartOutcome>,
}

fn ascend(
    surrogate: &Surrogate,
    objective: Objective,
    start: FunctionTable,
    norm: NormSpec,
    p: Exponent,
    cfg: &OptimizationConfig,
    restart: usize,
    seed: u64,
) -> Result<Option<RestartOutcome>> {
    let Some(mut f) = normalized(&start) else { return Ok(None) };
    let start_report = objective.evaluate(&f, norm, p)?;
    let d = f.d();
    let mut grad = Vec::new();
    let mut value = surrogate.objective(&f, Some(&mut grad))?;
    let mut trace = vec![value];
    let mut step = cfg.step;
    let mut used = 0;
    for _ in 0..cfg.iterations {
        project_components(&mut grad, d);
        let gnorm = euclid(&grad);
        if !(gnorm > 0.0) || !gnorm.is_finite() {
            break;
        }
        let scale = euclid(f.values()) / gnorm;
        let mut accepted = None;
        for _ in 0..BACKTRACK_LIMIT {
            let moved: Vec<f64> = f.values().iter().zip(&grad).map(|(v, g)| v + step * scale * g).collect();
            if let Some(cand) = normalized(&FunctionTable::from_values(f.geometry(), d, moved)?) {
                let cv = surrogate.objective(&cand, None)?;
                if cv.is_finite() && cv >= value {
                    accepted = Some((cand, cv));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((cand, cv)) = accepted else { break };
        used += 1;
        let improved = cv > value;
        f = cand;
        value = surrogate.objective(&f, Some(&mut grad))?;
        debug_assert!((value - cv).abs() <= 1e-9 * cv.abs().max(1.0));
        trace.push(value);
        step *= STEP_GROWTH;
        if !improved {
            break;
        }
    }
    let report = objective.evaluate(&f, norm, p)?;
    // The surrogate can disagree with the exact ratio; keep the better end.
    let (table, report) = match (report.ratio, start_report.ratio) {
        (Some(a), Some(b)) if b > a => (start, start_report),
        (None, Some(_)) => (start, start_report),
        _ => (f, report),
    };
    if report.degenerate {
        return Ok(None);
    }
    Ok(Some(RestartOutcome { restart, seed, table, report, trace, iterations: used }))
}

/// Best-found table and exact report for `objective`.
pub fn maximize_ratio(
    objective: Objective,
    geometry: TorusGeometry,
    d: usize,
    norm: NormSpec,
    p: Exponent,
    cfg: &OptimizationConfig,
) -> Result<(FunctionTable, RatioReport)> {
    let out = maximize_ratio_detailed(objective, geometry, d, norm, p, cfg)?;
    Ok((out.table, out.report))
}

/// Like [`maximize_ratio`], keeping every restart. Restart 0 starts from the
/// point indicator; restarts `1..=cfg.restarts` from Gaussian tables drawn
/// from `derive_seed(cfg.seed, [r])`.
pub fn maximize_ratio_detailed(
    objective: Objective,
    geometry: TorusGeometry,
    d: usize,
    norm: NormSpec,
    p: Exponent,
    cfg: &OptimizationConfig,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    if d == 0 {
        return Err(LabError::Empty("table components"));
    }
    let surrogate = Surrogate::new(objective, &geometry, norm, p, cfg.smoothing_eps)?;
    let runs: Vec<Option<RestartOutcome>> = (0..=cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(cfg.seed, &[r as u64]);
            let start = if r == 0 {
                let mut values = vec![0.0; geometry.point_count() * d];
                values[..d].iter_mut().for_each(|v| *v = 1.0);
                FunctionTable::from_values(geometry, d, values)?
            } else {
                FunctionTable::random_gaussian(geometry, d, &mut stream(seed, &[]))?
            };
            ascend(&surrogate, objective, start, norm, p, cfg, r, seed)
        })
        .collect::<Result<_>>()?;
    let restarts: Vec<RestartOutcome> = runs.into_iter().flatten().collect();
    let best = restarts
        .iter()
        .fold(None::<&RestartOutcome>, |acc, r| match acc {
            Some(b) if b.report.ratio >= r.report.ratio => Some(b),
            _ => Some(r),
        })
        .ok_or(LabError::AllStartsDegenerate)?;
    Ok(SearchOutcome {
        table: best.table.clone(),
        report: best.report.clone().with_seed(best.seed),
        best_restart: best.restart,
        best_seed: best.seed,
        iterations_used: restarts.iter().map(|r| r.iterations).sum(),
        restarts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub coordinates: Vec<usize>,
    /// Some norm argument is within `10 · smoothing_eps` of zero.
    pub near_kink: bool,
}

/// Analytic surrogate gradient vs central differences with step `h` on
/// [`GRADIENT_CHECK_COORDS`] coordinates drawn from `seed`. Relative errors
/// are taken against `max(|analytic|, |numeric|, 1e-3 · max|∇|)`.
pub fn gradient_check(
    objective: Objective,
    f: &FunctionTable,
    norm: NormSpec,
    p: Exponent,
    h: f64,
    smoothing_eps: f64,
    seed: u64,
) -> Result<GradientCheck> {
    if p.value() <= 1.0 {
        return Err(LabError::InvalidConfig("gradient check needs p > 1".into()));
    }
    let g = f.geometry();
    let surrogate = Surrogate::new(objective, &g, norm, p, smoothing_eps)?;
    let near_kink = surrogate.lhs.min_vector_norm(f, norm)?.min(surrogate.rhs.min_vector_norm(f, norm)?)
        < 10.0 * smoothing_eps;
    let mut grad = Vec::new();
    surrogate.objective(f, Some(&mut grad))?;
    let floor = 1e-3 * grad.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut rng = stream(seed, &[]);
    let total = f.values().len();
    let coordinates: Vec<usize> = (0..GRADIENT_CHECK_COORDS.min(total)).map(|_| rng.random_range(0..total)).collect();
    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    for &c in &coordinates {
        let mut plus = f.clone();
        plus.values_mut()[c] += h;
        let mut minus = f.clone();
        minus.values_mut()[c] -= h;
        let numeric = (surrogate.objective(&plus, None)? - surrogate.objective(&minus, None)?) / (2.0 * h);
        let err = (grad[c] - numeric).abs();
        max_abs = max_abs.max(err);
        max_rel = max_rel.max(err / grad[c].abs().max(numeric.abs()).max(floor).max(f64::MIN_POSITIVE));
    }
    Ok(GradientCheck { max_relative_error: max_rel, max_absolute_error: max_abs, coordinates, near_kink })
}

/// Surrogate objective gradient (exposed for diagnostics).
pub fn surrogate_gradient(
    objective: Objective,
    f: &FunctionTable,
    norm: NormSpec,
    p: Exponent,
    smoothing_eps: f64,
) -> Result<(f64, Vec<f64>)> {
    let surrogate = Surrogate::new(objective, &f.geometry(), norm, p, smoothing_eps)?;
    let mut grad = Vec::new();
    let v = surrogate.objective(f, Some(&mut grad))?;
    Ok((v, grad))
}

/// How `k` is chosen per scan cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KRule {
    /// Largest odd `k <= min(m/2 - 1, ceil(n log n))`, with `log 1` read as 1.
    Default,
    Fixed(usize),
}

/// `(k, capped)` under the default rule; `capped` when `m/2 - 1` binds.
pub fn default_k(n: usize, m: usize) -> Result<(usize, bool)> {
    let target = if n == 1 { 1 } else { (n as f64 * (n as f64).ln()).ceil() as usize };
    let cap = (m / 2).saturating_sub(1);
    let bound = target.min(cap);
    if bound == 0 {
        return Err(LabError::InvalidRadius { k: 0, m, reason: "no odd k below m/2" });
    }
    let k = if bound % 2 == 1 { bound } else { bound - 1 };
    Ok((k, cap < target))
}

impl KRule {
    pub fn pick(&self, n: usize, m: usize) -> Result<(usize, bool)> {
        match *self {
            KRule::Default => default_k(n, m),
            KRule::Fixed(k) => {
                SmoothingRadius::new(k, &TorusGeometry::new(n, m)?)?;
                Ok((k, false))
            }
        }
    }
}

pub const SCAN_COLUMNS: [&str; 13] =
    ["objective", "n", "m", "k", "p", "q", "d", "empirical_theta", "lhs", "rhs", "restarts", "iterations", "seed"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub objective: String,
    pub n: usize,
    pub m: usize,
    pub k: Option<usize>,
    pub k_capped: bool,
    pub p: f64,
    pub q: NormSpec,
    pub d: usize,
    /// `ratio^(1/p)` of the best table found.
    pub empirical_theta: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub restarts: usize,
    pub iterations: usize,
    /// Seed of the winning restart.
    pub seed: u64,
}

impl ScanRow {
    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.objective.clone(),
            self.n.to_string(),
            self.m.to_string(),
            self.k.map(|k| k.to_string()).unwrap_or_default(),
            self.p.to_string(),
            self.q.to_string(),
            self.d.to_string(),
            self.empirical_theta.to_string(),
            self.lhs.to_string(),
            self.rhs.to_string(),
            self.restarts.to_string(),
            self.iterations.to_string(),
            self.seed.to_string(),
        ]
    }
}

/// Scaled Enflo search over every `(n, m)` cell, rows in `n`-major order.
/// The per-cell seed is `derive_seed(cfg.seed, [n, m])`.
pub fn scan_m(
    n_values: &[usize],
    m_values: &[usize],
    k_rule: KRule,
    p: Exponent,
    norm: NormSpec,
    d: usize,
    cfg: &OptimizationConfig,
) -> Result<Vec<ScanRow>> {
    cfg.validate()?;
    if let Some(&m) = m_values.iter().find(|&&m| m == 0 || m % 4 != 0) {
        return Err(LabError::InvalidGeometry(format!("scan needs m divisible by 4, got {m}")));
    }
    let mut rows = Vec::new();
    for &n in n_values {
        for &m in m_values {
            let geometry = TorusGeometry::new(n, m)?;
            let (k, k_capped) = k_rule.pick(n, m)?;
            let cell = OptimizationConfig { seed: derive_seed(cfg.seed, &[n as u64, m as u64]), ..cfg.clone() };
            let out = maximize_ratio_detailed(Objective::ScaledEnflo, geometry, d, norm, p, &cell)?;
            let ratio = out.report.ratio.expect("search never returns degenerate reports");
            rows.push(ScanRow {
                objective: Objective::ScaledEnflo.name().to_string(),
                n,
                m,
                k: Some(k),
                k_capped,
                p: p.value(),
                q: norm,
                d,
                empirical_theta: ratio.powf(1.0 / p.value()),
                lhs: out.report.lhs,
                rhs: out.report.rhs,
                restarts: cfg.restarts,
                iterations: out.iterations_used,
                seed: out.best_seed,
            });
        }
    }
    Ok(rows)
}
