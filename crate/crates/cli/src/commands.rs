use anyhow::{Context, Result};
use enflo_lab::extremal::{maximize_ratio_detailed, scan_m, KRule, Objective, ScanRow, SCAN_COLUMNS};
use enflo_lab::identity::{decay_shape, fit_h_coefficients, r_moment_with, verify_identity, HCoefficients, IdentityWorkspace};
use enflo_lab::inequalities::{approximation_ratio, scheme_composite_check, smoothing_ratio, REPORT_COLUMNS};
use enflo_lab::rng::{derive_seed, stream};
use enflo_lab::{FunctionTable, RatioReport, TorusGeometry};
use rayon::prelude::*;

use crate::config::{Command, ExperimentConfig};

/// Everything a run produces, held in memory until the run has finished.
pub struct RunOutput {
    pub files: Vec<(String, Vec<u8>)>,
    /// Human-readable descriptions of asserted invariants that failed.
    pub violations: Vec<String>,
    /// Advisory remarks recorded in the manifest.
    pub notes: Vec<String>,
}

// Stream tags keep each command's random draws apart.
const TAG_TABLE: u64 = 1;
const TAG_FIT: u64 = 2;
const TAG_SEARCH: u64 = 3;
const TAG_SCAN: u64 = 4;

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    match cfg.command {
        Command::VerifyIdentity => verify_identity_cmd(cfg),
        Command::FitH => fit_h_cmd(cfg),
        Command::CheckLemmas => check_lemmas_cmd(cfg),
        Command::EstimateConstants => estimate_constants_cmd(cfg),
        Command::Scan => scan_cmd(cfg),
    }
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner().context("flushing CSV buffer")
}

fn table_for(cfg: &ExperimentConfig, n: usize, m: usize, k: usize, d: usize, sample: usize) -> Result<(FunctionTable, u64)> {
    let seed = derive_seed(cfg.seed, &[TAG_TABLE, n as u64, m as u64, k as u64, d as u64, sample as u64]);
    let table = FunctionTable::random_gaussian(TorusGeometry::new(n, m)?, d, &mut stream(seed, &[]))?;
    Ok((table, seed))
}

/// One fit per `(n, k)`, on the smallest `m` of the grid.
fn fits(cfg: &ExperimentConfig) -> Result<Vec<HCoefficients>> {
    let m0 = *cfg.grid.m.iter().min().expect("validated non-empty");
    let cells: Vec<(usize, usize)> =
        cfg.grid.n.iter().flat_map(|&n| cfg.grid.k.iter().map(move |&k| (n, k))).collect();
    cells
        .into_iter()
        .map(|(n, k)| {
            let seed = derive_seed(cfg.seed, &[TAG_FIT, n as u64, k as u64]);
            fit_h_coefficients(TorusGeometry::new(n, m0)?, k, cfg.fit_budget, seed)
                .with_context(|| format!("fitting coefficients for n={n}, k={k}"))
        })
        .collect()
}

fn fit_files(fitted: &[HCoefficients], cfg: &ExperimentConfig, violations: &mut Vec<String>) -> Vec<(String, Vec<u8>)> {
    fitted
        .iter()
        .map(|h| {
            if !(h.heldout_residual < cfg.tolerances.heldout) {
                violations.push(format!(
                    "held-out identity residual {:e} >= {:e} at n={}, k={}",
                    h.heldout_residual, cfg.tolerances.heldout, h.n, h.k
                ));
            }
            let mut text = h.to_json();
            text.push('\n');
            (format!("h_coeffs_{}_{}.json", h.n, h.k), text.into_bytes())
        })
        .collect()
}

const IDENTITY_COLUMNS: [&str; 10] =
    ["n", "m", "k", "d", "sample", "seed", "max_residual", "points_checked", "tolerance", "passed"];

fn verify_identity_cmd(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let fitted = fits(cfg)?;
    let mut violations = Vec::new();
    let mut files = fit_files(&fitted, cfg, &mut violations);
    let mut jobs = Vec::new();
    for h in &fitted {
        for &m in &cfg.grid.m {
            for &d in &cfg.grid.d {
                for s in 0..cfg.samples {
                    jobs.push((h, m, d, s));
                }
            }
        }
    }
    let rows: Vec<Vec<String>> = jobs
        .par_iter()
        .map(|&(h, m, d, s)| -> Result<Vec<String>> {
            let (f, seed) = table_for(cfg, h.n, m, h.k, d, s)?;
            let check = verify_identity(h, &f, h.k, cfg.tolerances.identity)?;
            Ok(vec![
                h.n.to_string(),
                m.to_string(),
                h.k.to_string(),
                d.to_string(),
                s.to_string(),
                seed.to_string(),
                check.max_residual.to_string(),
                check.points_checked.to_string(),
                check.tolerance.to_string(),
                check.passed.to_string(),
            ])
        })
        .collect::<Result<_>>()?;
    for r in rows.iter().filter(|r| r[9] == "false") {
        violations.push(format!("identity residual {} over tolerance at n={}, m={}, k={}, sample {}", r[6], r[0], r[1], r[2], r[4]));
    }
    files.insert(0, ("report.csv".into(), csv_bytes(&IDENTITY_COLUMNS, rows)?));
    Ok(RunOutput { files, violations, notes: Vec::new() })
}

const FIT_COLUMNS: [&str; 12] = [
    "n", "k", "m", "i", "l", "h", "identifiable", "decay_shape", "rank", "residual", "heldout_residual", "c_fit",
];

fn fit_h_cmd(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let fitted = fits(cfg)?;
    let mut violations = Vec::new();
    let mut files = fit_files(&fitted, cfg, &mut violations);
    let mut rows = Vec::new();
    for h in &fitted {
        for i in 0..=h.n {
            for l in 0..=i {
                rows.push(vec![
                    h.n.to_string(),
                    h.k.to_string(),
                    h.m.to_string(),
                    i.to_string(),
                    l.to_string(),
                    h.get(i, l).to_string(),
                    h.is_identifiable(i, l).to_string(),
                    decay_shape(i, l).to_string(),
                    h.rank.to_string(),
                    h.residual.to_string(),
                    h.heldout_residual.to_string(),
                    h.c_fit.to_string(),
                ]);
            }
        }
    }
    files.insert(0, ("report.csv".into(), csv_bytes(&FIT_COLUMNS, rows)?));
    Ok(RunOutput { files, violations, notes: Vec::new() })
}

fn report_columns() -> Vec<&'static str> {
    let mut cols = REPORT_COLUMNS.to_vec();
    cols.extend(["asserted", "holds"]);
    cols
}

fn report_row(r: &RatioReport, asserted: bool, tol: f64) -> Vec<String> {
    let mut row = r.csv_record();
    row.push(asserted.to_string());
    row.push(r.holds(tol).to_string());
    row
}

fn check_lemmas_cmd(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let g = &cfg.grid;
    let tol = cfg.tolerances.inequality;
    let exps = cfg.exponents();
    let mut jobs = Vec::new();
    for &n in &g.n {
        for &m in &g.m {
            for &k in &g.k {
                for &d in &g.d {
                    for s in 0..cfg.samples {
                        jobs.push((n, m, k, d, s));
                    }
                }
            }
        }
    }
    let blocks: Vec<Vec<(RatioReport, bool)>> = jobs
        .par_iter()
        .map(|&(n, m, k, d, s)| -> Result<Vec<(RatioReport, bool)>> {
            let (f, seed) = table_for(cfg, n, m, k, d, s)?;
            let ws = IdentityWorkspace::new(&f, k)?;
            let mut out = Vec::new();
            for &p in &exps {
                for &q in &g.q {
                    out.push((approximation_ratio(&f, k, q, p)?, true));
                    out.push((smoothing_ratio(&f, k, q, p)?, false));
                    if m % 4 == 0 {
                        out.push((scheme_composite_check(&f, k, q, p)?, true));
                    }
                    if n >= 2 {
                        for i in 0..n {
                            for l in 0..=i {
                                out.push((r_moment_with(&ws, i, l, q, p)?, false));
                            }
                        }
                    }
                }
            }
            Ok(out.into_iter().map(|(r, a)| (r.with_seed(seed), a)).collect())
        })
        .collect::<Result<_>>()?;
    let mut violations = Vec::new();
    let mut rows = Vec::new();
    for (r, asserted) in blocks.iter().flatten() {
        if *asserted && !r.holds(tol) {
            violations.push(format!(
                "{} violated at n={}, m={}, k={:?}, p={}, q={}, d={}, seed={:?}: lhs={} rhs={}",
                r.evaluator, r.n, r.m, r.k, r.p, r.q, r.d, r.seed, r.lhs, r.rhs
            ));
        }
        rows.push(report_row(r, *asserted, tol));
    }
    let files = vec![("report.csv".into(), csv_bytes(&report_columns(), rows)?)];
    Ok(RunOutput { files, violations, notes: Vec::new() })
}

fn search_row(objective: Objective, out: &enflo_lab::extremal::SearchOutcome, restarts: usize) -> ScanRow {
    let r = &out.report;
    ScanRow {
        objective: objective.name().to_string(),
        n: r.n,
        m: r.m,
        k: objective.k(),
        k_capped: false,
        p: r.p,
        q: r.q,
        d: r.d,
        empirical_theta: r.ratio.expect("search never returns degenerate reports").powf(1.0 / r.p),
        lhs: r.lhs,
        rhs: r.rhs,
        restarts,
        iterations: out.iterations_used,
        seed: out.best_seed,
    }
}

fn estimate_constants_cmd(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let g = &cfg.grid;
    let tol = cfg.tolerances.inequality;
    let exps = cfg.exponents();
    // (objective, geometry, p index, q index, d)
    let mut jobs = Vec::new();
    for &n in &g.n {
        for (mi, &m) in g.m.iter().enumerate() {
            for (ki, &k) in g.k.iter().enumerate() {
                for obj in cfg.parsed_objectives(k)? {
                    let hypercube = matches!(obj, Objective::Pisier | Objective::Enflo);
                    let k_free = obj.k().is_none();
                    // Objectives that ignore m or k run once per remaining cell.
                    if (hypercube && mi > 0) || (k_free && ki > 0) {
                        continue;
                    }
                    let geometry = TorusGeometry::new(n, if hypercube { 2 } else { m })?;
                    for pi in 0..exps.len() {
                        for qi in 0..g.q.len() {
                            for &d in &g.d {
                                jobs.push((obj, geometry, pi, qi, d));
                            }
                        }
                    }
                }
            }
        }
    }
    let rows: Vec<ScanRow> = jobs
        .iter()
        .enumerate()
        .map(|(idx, &(obj, geometry, pi, qi, d))| -> Result<ScanRow> {
            let seed = derive_seed(cfg.seed, &[TAG_SEARCH, idx as u64]);
            let out = maximize_ratio_detailed(obj, geometry, d, g.q[qi], exps[pi], &cfg.optimizer.with_seed(seed))
                .with_context(|| format!("maximizing {obj} at n={}, m={}", geometry.n(), geometry.m()))?;
            Ok(search_row(obj, &out, cfg.optimizer.restarts))
        })
        .collect::<Result<_>>()?;
    let mut violations = Vec::new();
    for r in &rows {
        let ratio = r.empirical_theta.powf(r.p);
        let proven = match r.objective.as_str() {
            "approximation" => true,
            "pisier" => r.n >= 4,
            _ => false,
        };
        if proven && ratio > 1.0 + tol {
            violations.push(format!("{} search exceeded the proven bound at n={}, m={}: ratio {ratio}", r.objective, r.n, r.m));
        }
    }
    let csv = csv_bytes(&SCAN_COLUMNS, rows.iter().map(ScanRow::csv_record))?;
    Ok(RunOutput { files: vec![("report.csv".into(), csv)], violations, notes: Vec::new() })
}

fn scan_cmd(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let g = &cfg.grid;
    let rule = g.k.first().map_or(KRule::Default, |&k| KRule::Fixed(k));
    let mut rows = Vec::new();
    for (pi, &p) in cfg.exponents().iter().enumerate() {
        for (qi, &q) in g.q.iter().enumerate() {
            for &d in &g.d {
                let seed = derive_seed(cfg.seed, &[TAG_SCAN, pi as u64, qi as u64, d as u64]);
                rows.extend(scan_m(&g.n, &g.m, rule, p, q, d, &cfg.optimizer.with_seed(seed))?);
            }
        }
    }
    let mut notes: Vec<String> = rows
        .iter()
        .filter(|r| r.k_capped)
        .map(|r| format!("k={} capped by m/2 at n={}, m={}", r.k.unwrap_or_default(), r.n, r.m))
        .collect();
    notes.dedup();
    let csv = csv_bytes(&SCAN_COLUMNS, rows.iter().map(ScanRow::csv_record))?;
    Ok(RunOutput { files: vec![("report.csv".into(), csv)], violations: Vec::new(), notes })
}
