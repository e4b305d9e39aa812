use lrl_core::angular_basis::{
    channel_basis, quadrature_lambda, quadrature_s_dot_n, reduce_lambda, reduce_s_dot_n, spin32_lambda_closed, SphereQuadrature,
};
use lrl_core::operator_calculus::{
    casimir_residual, identity_normalization, random_fields, sample_points, scalar_identity_residual, symmetry_pairs,
    CasimirSign, OperatorContext, OperatorTag, ScalarIdentity,
};
use lrl_core::parallel::{self, ExecMode};
use lrl_core::radial_solver::{build_system, solve_bound_states_with, Grid, Units};
use lrl_core::so4_spectrum::{spectrum, SpectrumEntry};
use lrl_core::special_functions::{spin1_cutoff, spin1_eigenfunction_grid};
use lrl_core::spin_algebra::{
    algebra_residuals, build_spin_matrices, max_abs, multipole_identity_residual, nonlinear_field_residual,
    quadrupole_darwin_potential, quadrupole_potential, Direction, MultipoleForm,
};
use lrl_core::{Error, SpinValue};
use serde::Serialize;

use crate::config::{Format, RunConfig, Suite};
use crate::output::{csv_table, float, json_document, opt_float};
use crate::{CliError, Report};

pub const EXIT_FAILED_VERIFY: i32 = 1;
pub const EXIT_EMPTY: i32 = 4;

pub const ALGEBRA_TOL: f64 = 1e-12;
pub const COMMUTATOR_TOL: f64 = 1e-9;
pub const CASIMIR_TOL: f64 = 1e-10;
pub const MULTIPOLE_TOL: f64 = 1e-12;
pub const REDUCTION_TOL: f64 = 1e-10;

/// Largest `j` swept by the reduction suite when no `--j` is given.
const REDUCTION_J_MAX: f64 = 4.5;

fn spin_label(s: SpinValue) -> String {
    s.to_string()
}

#[derive(Serialize)]
struct SpectrumRow {
    branch: &'static str,
    #[serde(rename = "N")]
    principal: f64,
    k: f64,
    #[serde(rename = "E")]
    energy: f64,
    rep_l0: f64,
    rep_l1: f64,
    degeneracy: u64,
    j_values: Vec<f64>,
}

#[derive(Serialize)]
struct SpectrumBody {
    twice_s: u32,
    spin: String,
    mass: f64,
    alpha: f64,
    normalization: &'static str,
    flags: Vec<String>,
    entries: Vec<SpectrumRow>,
}

fn row(e: &SpectrumEntry) -> SpectrumRow {
    SpectrumRow {
        branch: e.branch.tag(),
        principal: e.principal,
        k: e.k,
        energy: e.energy,
        rep_l0: e.rep.0,
        rep_l1: e.rep.1,
        degeneracy: e.degeneracy,
        j_values: e.j_values.clone(),
    }
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Report, CliError> {
    let (body, code) = if cfg.alpha <= 0.0 {
        if cfg.spin.twice_s > 3 {
            return Err(Error::NotDerived(format!("closed-form spectrum for s = {}", cfg.spin)).into());
        }
        // no bound states for a repulsive or vanishing coupling
        let body = SpectrumBody {
            twice_s: cfg.spin.twice_s,
            spin: spin_label(cfg.spin),
            mass: cfg.mass,
            alpha: cfg.alpha,
            normalization: "section",
            flags: vec![],
            entries: vec![],
        };
        (body, EXIT_EMPTY)
    } else {
        let t = spectrum(cfg.spin, cfg.mass, cfg.alpha, cfg.levels)?;
        let body = SpectrumBody {
            twice_s: t.twice_s,
            spin: spin_label(cfg.spin),
            mass: t.mass,
            alpha: t.alpha,
            normalization: t.normalization,
            flags: t.flags.clone(),
            entries: t.entries.iter().map(row).collect(),
        };
        (body, 0)
    };
    let text = match cfg.format {
        Format::Json => json_document("spectrum", &body),
        Format::Csv => {
            let header = ["branch", "N", "k", "E", "rep_l0", "rep_l1", "degeneracy"].map(String::from);
            let rows: Vec<Vec<String>> = body
                .entries
                .iter()
                .map(|r| {
                    vec![
                        r.branch.to_string(),
                        float(r.principal),
                        float(r.k),
                        float(r.energy),
                        float(r.rep_l0),
                        float(r.rep_l1),
                        r.degeneracy.to_string(),
                    ]
                })
                .collect();
            csv_table(&header, &rows)
        }
    };
    Ok(Report { text, code })
}

#[derive(Serialize)]
struct Check {
    name: String,
    residual: f64,
    tolerance: f64,
    pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            residual,
            tolerance,
            pass: residual < tolerance,
        }
    }
}

#[derive(Serialize)]
struct VerifyBody {
    suite: &'static str,
    twice_s: u32,
    spin: String,
    seed: u64,
    pass: bool,
    checks: Vec<Check>,
}

fn tag_name(t: OperatorTag) -> String {
    let axis = |a: usize| ["1", "2", "3"][a];
    match t {
        OperatorTag::H => "H".into(),
        OperatorTag::J(a) => format!("J{}", axis(a)),
        OperatorTag::K(a) => format!("K{}", axis(a)),
        OperatorTag::L(a) => format!("L{}", axis(a)),
        OperatorTag::S(a) => format!("S{}", axis(a)),
        OperatorTag::P(a) => format!("P{}", axis(a)),
        other => format!("{other:?}"),
    }
}

/// Unit directions from the seeded sample points.
fn directions(count: usize, seed: u64) -> Vec<Direction> {
    sample_points(count, seed)
        .into_iter()
        .map(|x| Direction::from_point(x).expect("sample points avoid the origin"))
        .collect()
}

fn algebra_checks(s: SpinValue, seed: u64) -> Result<Vec<Check>, Error> {
    let rep = build_spin_matrices(s);
    let dirs = directions(100, seed);
    let all = parallel::map(ExecMode::Parallel, &dirs, |n| algebra_residuals(&rep, n));
    let mut worst = [0.0f64; 9];
    for r in all {
        let r = r?;
        let v = [
            r.commutation,
            r.casimir,
            r.hermiticity,
            r.idempotence,
            r.completeness,
            r.spectral,
            r.projector_hermiticity,
            r.trace,
            r.lambda_identity,
        ];
        for (w, x) in worst.iter_mut().zip(v) {
            *w = w.max(if x.is_nan() { f64::INFINITY } else { x });
        }
    }
    let names = [
        "commutation",
        "casimir",
        "hermiticity",
        "idempotence",
        "completeness",
        "spectral",
        "projector_hermiticity",
        "trace",
        "lambda_identity",
    ];
    Ok(names.iter().zip(worst).map(|(n, w)| Check::new(*n, w, ALGEBRA_TOL)).collect())
}

fn commutator_checks(cfg: &RunConfig) -> Result<Vec<Check>, Error> {
    let s = cfg.spin;
    let ctx = OperatorContext::new(s, cfg.alpha, cfg.mass, identity_normalization(s))?;
    let fields = random_fields(s, 4, cfg.seed);
    let pts = sample_points(12, cfg.seed.wrapping_add(1));
    let pairs = symmetry_pairs();
    let results = parallel::map(ExecMode::Parallel, &pairs, |&(a, b)| -> Result<f64, Error> {
        let mut worst: f64 = 0.0;
        for f in &fields {
            let r = ctx.commutator_residual(a, b, f, &pts)?;
            worst = worst.max(if r.is_nan() { f64::INFINITY } else { r });
        }
        Ok(worst)
    });
    pairs
        .iter()
        .zip(results)
        .map(|(&(a, b), r)| r.map(|w| Check::new(format!("[{},{}]", tag_name(a), tag_name(b)), w, COMMUTATOR_TOL)))
        .collect()
}

fn casimir_checks(cfg: &RunConfig) -> Result<Vec<Check>, Error> {
    let s = cfg.spin;
    let fields = random_fields(s, 3, cfg.seed);
    let pts = sample_points(12, cfg.seed.wrapping_add(1));
    let energy = -0.35;
    let mut out = Vec::new();
    for (sign, tag) in [(CasimirSign::Plus, "plus"), (CasimirSign::Minus, "minus")] {
        let mut worst: f64 = 0.0;
        let mut diff: f64 = 0.0;
        for f in &fields {
            let c = casimir_residual(s, cfg.alpha, cfg.mass, energy, sign, f, &pts)?;
            worst = worst.max(c.construction);
            diff = diff.max(c.difference);
        }
        out.push(Check::new(format!("casimir_{tag}_construction"), worst, CASIMIR_TOL));
        if sign == CasimirSign::Plus {
            out.push(Check::new("casimir_difference", diff, CASIMIR_TOL));
        }
    }
    let mut scalar = vec![ScalarIdentity::JDotK];
    match s.twice_s {
        0 => scalar.push(ScalarIdentity::K2Hydrogen),
        1 => scalar.push(ScalarIdentity::K2SpinHalf),
        _ => {}
    }
    for which in scalar {
        let mut worst: f64 = 0.0;
        for f in &fields {
            worst = worst.max(scalar_identity_residual(s, cfg.alpha, cfg.mass, which, f, &pts)?);
        }
        let name = match which {
            ScalarIdentity::JDotK => "j_dot_k",
            ScalarIdentity::K2Hydrogen => "k2_hydrogen",
            ScalarIdentity::K2SpinHalf => "k2_spin_half",
        };
        out.push(Check::new(name, worst, CASIMIR_TOL));
    }
    Ok(out)
}

fn multipole_checks(cfg: &RunConfig) -> Result<Vec<Check>, Error> {
    let rep = build_spin_matrices(cfg.spin);
    let pts = sample_points(50, cfg.seed);
    let alpha = cfg.alpha;
    let form = match cfg.spin.twice_s {
        2 => MultipoleForm::Quadrupole,
        3 => MultipoleForm::Octupole,
        _ => {
            return Err(Error::NotDerived(format!(
                "multipole forms for s = {} (covered: 1, 3/2)",
                cfg.spin
            )))
        }
    };
    let (mut form_res, mut nonlinear, mut darwin) = (0.0f64, 0.0f64, 0.0f64);
    for &x in &pts {
        form_res = form_res.max(multipole_identity_residual(&rep, x, form, alpha)?);
        nonlinear = nonlinear.max(nonlinear_field_residual(&rep, x, alpha)?);
        if form == MultipoleForm::Quadrupole {
            darwin = darwin.max(max_abs(&(quadrupole_potential(&rep, x, alpha) - quadrupole_darwin_potential(&rep, x, alpha))));
        }
    }
    let mut out = vec![
        Check::new(
            match form {
                MultipoleForm::Quadrupole => "quadrupole_form",
                MultipoleForm::Octupole => "octupole_form",
            },
            form_res,
            MULTIPOLE_TOL,
        ),
        Check::new("nonlinear_field_form", nonlinear, MULTIPOLE_TOL),
    ];
    if form == MultipoleForm::Quadrupole {
        out.push(Check::new("quadrupole_plus_darwin", darwin, MULTIPOLE_TOL));
    }
    Ok(out)
}

fn reduction_checks(cfg: &RunConfig) -> Result<Vec<Check>, Error> {
    let s = cfg.spin;
    let quad = SphereQuadrature::standard();
    let norm = identity_normalization(s);
    let js: Vec<f64> = match cfg.j {
        Some(j) => vec![j],
        None => {
            let mut v = Vec::new();
            let mut j = if s.is_integer() { 0.0 } else { 0.5 };
            while j <= REDUCTION_J_MAX {
                v.push(j);
                j += 1.0;
            }
            v
        }
    };
    let mut out = Vec::new();
    for j in js {
        let formula = reduce_s_dot_n(s, j)?.matrix;
        let q = quadrature_s_dot_n(s, j, j, &quad)?;
        let lam = reduce_lambda(s, j, norm)?.matrix;
        let ql = quadrature_lambda(s, j, j, norm, &quad)?;
        let (mut w_sn, mut w_lam) = (0.0f64, 0.0f64);
        for a in 0..formula.nrows() {
            for b in 0..formula.ncols() {
                w_sn = w_sn.max((formula[(a, b)] - q[(a, b)].re).abs()).max(q[(a, b)].im.abs());
                w_lam = w_lam.max((lam[(a, b)] - ql[(a, b)].re).abs()).max(ql[(a, b)].im.abs());
            }
        }
        out.push(Check::new(format!("s_dot_n j={j}"), w_sn, REDUCTION_TOL));
        out.push(Check::new(format!("lambda_{} j={j}", norm.tag()), w_lam, REDUCTION_TOL));
        if s.twice_s == 3 && j >= 1.5 {
            let closed = spin32_lambda_closed(j);
            let pq = channel_basis(s, j)?.transform_complex(&ql);
            let mut w: f64 = 0.0;
            for a in 0..closed.nrows() {
                for b in 0..closed.ncols() {
                    w = w.max((closed[(a, b)] - pq[(a, b)].re).abs()).max(pq[(a, b)].im.abs());
                }
            }
            out.push(Check::new(format!("spin32_lambda_closed j={j}"), w, REDUCTION_TOL));
        }
    }
    Ok(out)
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Report, CliError> {
    let suite = cfg.suite.ok_or_else(|| CliError::invalid("verify needs --suite"))?;
    let checks = match suite {
        Suite::Algebra => algebra_checks(cfg.spin, cfg.seed)?,
        Suite::Commutators => commutator_checks(cfg)?,
        Suite::Casimir => casimir_checks(cfg)?,
        Suite::Multipole => multipole_checks(cfg)?,
        Suite::Reduction => reduction_checks(cfg)?,
    };
    let pass = checks.iter().all(|c| c.pass);
    let body = VerifyBody {
        suite: suite.tag(),
        twice_s: cfg.spin.twice_s,
        spin: spin_label(cfg.spin),
        seed: cfg.seed,
        pass,
        checks,
    };
    let text = match cfg.format {
        Format::Json => json_document("verify", &body),
        Format::Csv => {
            let header = ["check", "residual", "tolerance", "pass"].map(String::from);
            let rows: Vec<Vec<String>> = body
                .checks
                .iter()
                .map(|c| vec![c.name.clone(), float(c.residual), float(c.tolerance), c.pass.to_string()])
                .collect();
            csv_table(&header, &rows)
        }
    };
    Ok(Report {
        text,
        code: if pass { 0 } else { EXIT_FAILED_VERIFY },
    })
}

/// Algebraic levels of the `j` channel, ascending in energy.
fn predicted_levels(cfg: &RunConfig, j: f64, count: usize) -> Result<Vec<SpectrumEntry>, Error> {
    if cfg.alpha <= 0.0 {
        return Ok(Vec::new());
    }
    let want = 4 * count + 2 * j as usize + 4;
    let table = spectrum(cfg.spin, cfg.mass, cfg.alpha, want)?;
    let mut v: Vec<SpectrumEntry> = table
        .entries
        .into_iter()
        .filter(|e| e.branch.tag() != "trivial" && e.j_values.iter().any(|&x| (x - j).abs() < 1e-9))
        .collect();
    v.truncate(count);
    Ok(v)
}

fn default_grid(cfg: &RunConfig, predicted: &[SpectrumEntry]) -> Result<Grid, Error> {
    if let Some(r) = cfg.r_max {
        return Grid::new(r, cfg.points);
    }
    match predicted.iter().map(|e| e.k).reduce(f64::max) {
        Some(k) => Grid::for_levels(k, cfg.mass, cfg.alpha.abs(), cfg.points),
        None => Grid::new(100.0, cfg.points),
    }
}

#[derive(Serialize)]
struct SolvedLevel {
    index: usize,
    energy: f64,
    k: Option<f64>,
    error_estimate: Option<f64>,
    coarse_energy: Option<f64>,
    predicted_energy: Option<f64>,
    branch: Option<&'static str>,
}

#[derive(Serialize)]
struct SolveBody {
    twice_s: u32,
    spin: String,
    j: f64,
    mass: f64,
    alpha: f64,
    scheme: lrl_core::radial_solver::Scheme,
    grid: Grid,
    bound_count: usize,
    levels: Vec<SolvedLevel>,
}

/// Pairs each numeric level with the closest unused algebraic level.
fn assign(energies: &[f64], predicted: &[SpectrumEntry]) -> Vec<Option<usize>> {
    let mut used = vec![false; predicted.len()];
    energies
        .iter()
        .map(|&e| {
            let best = predicted
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .min_by(|a, b| (a.1.energy - e).abs().total_cmp(&(b.1.energy - e).abs()))
                .map(|(i, _)| i);
            if let Some(i) = best {
                used[i] = true;
            }
            best
        })
        .collect()
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<Report, CliError> {
    let j = cfg.require_j()?;
    let sys = build_system(cfg.spin, j, Units::Physical { mass: cfg.mass, alpha: cfg.alpha })?;
    let predicted = predicted_levels(cfg, j, cfg.levels)?;
    let grid = default_grid(cfg, &predicted)?;
    let out = solve_bound_states_with(&sys, grid, cfg.levels, cfg.scheme)?;
    let energies = out.energies();
    let matches = assign(&energies, &predicted);
    let k_of = |e: f64| (e < 0.0).then(|| cfg.alpha * (cfg.mass / (-2.0 * e)).sqrt());
    let levels: Vec<SolvedLevel> = out
        .levels
        .iter()
        .zip(&matches)
        .enumerate()
        .map(|(i, (l, m))| SolvedLevel {
            index: i,
            energy: l.energy,
            k: k_of(l.energy),
            error_estimate: l.error_estimate,
            coarse_energy: l.coarse_energy,
            predicted_energy: m.map(|m| predicted[m].energy),
            branch: m.map(|m| predicted[m].branch.tag()),
        })
        .collect();
    let code = if levels.is_empty() { EXIT_EMPTY } else { 0 };
    let body = SolveBody {
        twice_s: cfg.spin.twice_s,
        spin: spin_label(cfg.spin),
        j,
        mass: cfg.mass,
        alpha: cfg.alpha,
        scheme: out.scheme,
        grid,
        bound_count: out.bound_count,
        levels,
    };
    let text = match cfg.format {
        Format::Json => json_document("solve", &body),
        Format::Csv => {
            let header = ["index", "energy", "k", "error_estimate", "predicted_energy", "branch"].map(String::from);
            let rows: Vec<Vec<String>> = body
                .levels
                .iter()
                .map(|l| {
                    vec![
                        l.index.to_string(),
                        float(l.energy),
                        opt_float(l.k),
                        opt_float(l.error_estimate),
                        opt_float(l.predicted_energy),
                        l.branch.unwrap_or_default().to_string(),
                    ]
                })
                .collect();
            csv_table(&header, &rows)
        }
    };
    Ok(Report { text, code })
}

#[derive(Serialize)]
struct EigenfunctionBody {
    twice_s: u32,
    spin: String,
    j: f64,
    n: u32,
    method: &'static str,
    energy: f64,
    orbital: Vec<i64>,
    r: Vec<f64>,
    channels: Vec<Vec<f64>>,
}

pub fn cmd_eigenfunction(cfg: &RunConfig) -> Result<Report, CliError> {
    let j = cfg.require_j()?;
    let sys = build_system(cfg.spin, j, Units::Physical { mass: cfg.mass, alpha: cfg.alpha })?;
    let n = cfg.n;
    let predicted = predicted_levels(cfg, j, n as usize + 1)?;
    let body = if cfg.spin.twice_s == 2 && cfg.alpha > 0.0 {
        // spin 1: normalized closed form in r' = (mα/k) r, rescaled to unit norm in r
        let jn = j as u32;
        let k = (jn + 1 + n) as f64;
        let scale = cfg.mass * cfg.alpha / k;
        let grid = match cfg.r_max {
            Some(r) => Grid::new(r, cfg.points)?,
            None => Grid::new(spin1_cutoff(jn, n) / scale, cfg.points)?,
        };
        let r = grid.radii();
        let rescaled: Vec<f64> = r.iter().map(|x| x * scale).collect();
        let vals = spin1_eigenfunction_grid(jn, n, &rescaled)?;
        let amp = scale.sqrt();
        let channels = (0..3).map(|c| vals.iter().map(|v| v[c] * amp).collect()).collect();
        EigenfunctionBody {
            twice_s: 2,
            spin: spin_label(cfg.spin),
            j,
            n,
            method: "closed-form",
            energy: -cfg.mass * cfg.alpha * cfg.alpha / (2.0 * k * k),
            orbital: sys.orbital.clone(),
            r,
            channels,
        }
    } else {
        let grid = default_grid(cfg, &predicted)?;
        let out = solve_bound_states_with(&sys, grid, n as usize + 1, cfg.scheme)?;
        let Some(level) = out.levels.get(n as usize) else {
            let body = EigenfunctionBody {
                twice_s: cfg.spin.twice_s,
                spin: spin_label(cfg.spin),
                j,
                n,
                method: "finite-difference",
                energy: f64::NAN,
                orbital: sys.orbital.clone(),
                r: vec![],
                channels: vec![],
            };
            return Ok(Report {
                text: render_eigenfunction(cfg.format, &body, sys.channels()),
                code: EXIT_EMPTY,
            });
        };
        EigenfunctionBody {
            twice_s: cfg.spin.twice_s,
            spin: spin_label(cfg.spin),
            j,
            n,
            method: "finite-difference",
            energy: level.energy,
            orbital: sys.orbital.clone(),
            r: grid.radii(),
            channels: level.channels.clone(),
        }
    };
    Ok(Report {
        text: render_eigenfunction(cfg.format, &body, sys.channels()),
        code: 0,
    })
}

fn render_eigenfunction(format: Format, body: &EigenfunctionBody, channels: usize) -> String {
    match format {
        Format::Json => json_document("eigenfunction", body),
        Format::Csv => {
            let mut header = vec!["r".to_string()];
            header.extend((0..channels).map(|c| format!("channel_{c}")));
            let rows: Vec<Vec<String>> = body
                .r
                .iter()
                .enumerate()
                .map(|(i, &r)| {
                    let mut row = vec![float(r)];
                    row.extend(body.channels.iter().map(|c| float(c[i])));
                    row
                })
                .collect();
            csv_table(&header, &rows)
        }
    }
}
