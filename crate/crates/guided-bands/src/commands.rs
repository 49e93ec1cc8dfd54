//! One function per subcommand, each building a deterministic report.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{Number, Value};

use guided_spectra::asymptotics::{convergence_study, guide_eigenvalue_bounds, ConvergenceReport};
use guided_spectra::builtin::{builtin_example, builtin_names};
use guided_spectra::cylinder::guide_laplacian;
use guided_spectra::document::{load_spec, serialize_spec};
use guided_spectra::feshbach::{
    exact_bands, exact_below_bands, guided_spectrum_exact, q_potential, AcBand, ContactPotential,
};
use guided_spectra::floquet::unperturbed_bands;
use guided_spectra::graph::{bridge_stats, combined_kappa_plus};
use guided_spectra::guided::{
    certificate_inputs, flat_band_criterion_notes, flat_bands, flat_vector_residual,
    guided_spectrum, guided_spectrum_with_trace, BranchBand, Certificate, GuidedSpectrum,
};
use guided_spectra::tolerances as tol;
use guided_spectra::{Error, GuideSpec, PeriodicGraphSpec, Result};

use crate::output::{csv_cell, fmt9, interval, margin_value, num, write_output};
use crate::{Command, FormatArg, InputArgs, OutputArgs, SolverArgs, ToleranceArgs};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate { input } => cmd_validate(&input),
        Command::Bands { input, solver, tolerances, output } => {
            cmd_bands(&input, &solver, &tolerances, &output)
        }
        Command::Feshbach { input, solver, tolerances, output } => {
            cmd_feshbach(&input, &solver, &tolerances, &output)
        }
        Command::FlatBands { input, solver, tolerances, output } => {
            cmd_flat_bands(&input, &solver, &tolerances, &output)
        }
        Command::Estimates { input, solver, tolerances, output } => {
            cmd_estimates(&input, &solver, &tolerances, &output)
        }
        Command::Asymptotics { input, solver, tolerances, output, t_list } => {
            cmd_asymptotics(&input, &solver, &tolerances, &output, &t_list)
        }
        Command::Example { input, out } => cmd_example(&input, &out),
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

#[derive(Serialize, Clone)]
struct InputEcho {
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    example: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<BTreeMap<String, i64>>,
}

impl InputEcho {
    fn describe(&self) -> String {
        match (&self.path, &self.example) {
            (Some(p), _) => format!("path {p}"),
            (None, Some(e)) => {
                let mut s = format!("example {e}");
                if let Some(params) = &self.params {
                    for (k, v) in params {
                        s.push_str(&format!(" {k}={v}"));
                    }
                }
                s
            }
            _ => "none".into(),
        }
    }
}

struct Loaded {
    spec: PeriodicGraphSpec,
    guide: GuideSpec,
    echo: InputEcho,
}

fn load(input: &InputArgs) -> Result<Loaded> {
    match (&input.input, &input.example) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)?;
            let (spec, guide) = load_spec(&text)?;
            Ok(Loaded {
                spec,
                guide,
                echo: InputEcho {
                    path: Some(path.display().to_string()),
                    example: None,
                    params: None,
                },
            })
        }
        (None, Some(name)) => {
            let params: BTreeMap<String, i64> = input.param.iter().cloned().collect();
            let (spec, guide) = builtin_example(name, &params)?;
            Ok(Loaded {
                spec,
                guide,
                echo: InputEcho {
                    path: None,
                    example: Some(name.clone()),
                    params: Some(params),
                },
            })
        }
        _ => Err(Error::Validation(
            "exactly one of --input or --example is required".into(),
        )),
    }
}

fn check_config(solver: &SolverArgs, tols: &ToleranceArgs) -> Result<()> {
    if solver.grid == 0 {
        return Err(Error::Validation("grid must be positive".into()));
    }
    if solver.window < 1 {
        return Err(Error::Validation("window must be positive".into()));
    }
    for (name, v) in [
        ("tol-ess", tols.tol_ess),
        ("tol-flat", tols.tol_flat),
        ("eig-tol", tols.eig_tol),
    ] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Validation(format!(
                "{name} must lie in (0, 1), got {v}"
            )));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Artifact {
    name: &'static str,
    version: &'static str,
}

const ARTIFACT: Artifact = Artifact {
    name: env!("CARGO_PKG_NAME"),
    version: env!("CARGO_PKG_VERSION"),
};

#[derive(Serialize)]
struct TolEcho {
    tol_ess: Number,
    tol_flat: Number,
    eig_tol: Number,
}

#[derive(Serialize)]
struct ConfigEcho {
    command: &'static str,
    input: InputEcho,
    grid: usize,
    window: i64,
    boundary: &'static str,
    format: &'static str,
    tolerances: TolEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_list: Option<Vec<u64>>,
}

fn config_echo(
    command: &'static str,
    echo: InputEcho,
    solver: &SolverArgs,
    tols: &ToleranceArgs,
    output: &OutputArgs,
    t_list: Option<Vec<u64>>,
) -> ConfigEcho {
    ConfigEcho {
        command,
        input: echo,
        grid: solver.grid,
        window: solver.window,
        boundary: solver.boundary.name(),
        format: output.format.name(),
        tolerances: TolEcho {
            tol_ess: num(tols.tol_ess),
            tol_flat: num(tols.tol_flat),
            eig_tol: num(tols.eig_tol),
        },
        t_list,
    }
}

#[derive(Serialize)]
struct Envelope<T: Serialize> {
    artifact: Artifact,
    config: ConfigEcho,
    report: T,
}

fn render_json<T: Serialize>(config: ConfigEcho, report: T) -> String {
    let envelope = Envelope { artifact: ARTIFACT, config, report };
    let mut s = serde_json::to_string_pretty(&envelope).expect("report serialization");
    s.push('\n');
    s
}

fn csv_preamble(config: &ConfigEcho) -> String {
    let mut s = format!(
        "# {} {} report: {}\n# input: {}\n# grid: {}  window: {}  boundary: {}\n",
        ARTIFACT.name,
        ARTIFACT.version,
        config.command,
        config.input.describe(),
        config.grid,
        config.window,
        config.boundary,
    );
    s.push_str(&format!(
        "# tolerances: tol_ess={} tol_flat={} eig_tol={}\n",
        config.tolerances.tol_ess, config.tolerances.tol_flat, config.tolerances.eig_tol,
    ));
    if let Some(tl) = &config.t_list {
        let parts: Vec<String> = tl.iter().map(u64::to_string).collect();
        s.push_str(&format!("# t_list: {}\n", parts.join(",")));
    }
    s
}

// ---------------------------------------------------------------------------
// Report rows shared between commands
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CertOut {
    name: String,
    passed: bool,
    margin: Value,
    detail: String,
}

/// Residual certificates are re-evaluated against the configured
/// eigenvector tolerance; everything else passes through.
fn cert_out(c: &Certificate, tols: &ToleranceArgs) -> CertOut {
    if c.name.contains("residual") && c.margin.is_finite() {
        let residual = tol::EIGENVECTOR_RESIDUAL - c.margin;
        let margin = tols.eig_tol - residual;
        CertOut {
            name: c.name.clone(),
            passed: margin >= 0.0,
            margin: margin_value(margin),
            detail: c.detail.clone(),
        }
    } else {
        CertOut {
            name: c.name.clone(),
            passed: c.passed,
            margin: margin_value(c.margin),
            detail: c.detail.clone(),
        }
    }
}

fn csv_certificates(certs: &[CertOut]) -> String {
    let mut s = String::new();
    for c in certs {
        s.push_str(&format!(
            "# certificate: {} | passed={} | margin={} | {}\n",
            c.name,
            c.passed,
            match &c.margin {
                Value::Number(n) => n.to_string(),
                other => other.as_str().unwrap_or("?").to_string(),
            },
            c.detail,
        ));
    }
    s
}

#[derive(Serialize)]
struct BranchOut {
    index: usize,
    lo: Number,
    hi: Number,
    width: Number,
    flat: bool,
    support: usize,
    above_rho: bool,
}

fn branch_out(b: &BranchBand, rho: f64, tols: &ToleranceArgs) -> BranchOut {
    BranchOut {
        index: b.index,
        lo: num(b.lo),
        hi: num(b.hi),
        width: num(b.width()),
        flat: b.flat || b.width() < tols.tol_flat,
        support: b.support,
        above_rho: b.hi > rho + tols.tol_ess,
    }
}

#[derive(Serialize)]
struct FlatOut {
    value: Number,
    multiplicity: usize,
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

fn cmd_validate(input: &InputArgs) -> Result<()> {
    let loaded = load(input)?;
    let gl = guide_laplacian(&loaded.guide);
    let stats = bridge_stats(&loaded.spec, &loaded.guide);
    let mut s = String::new();
    s.push_str(&format!("document = {}\n", loaded.echo.describe()));
    s.push_str("valid = true\n");
    s.push_str(&format!("dim_total = {}\n", loaded.spec.dim_total));
    s.push_str(&format!("dim_guide = {}\n", loaded.guide.dim_guide));
    s.push_str(&format!("nu = {}\n", loaded.spec.nu()));
    s.push_str(&format!("nu_1 = {}\n", loaded.guide.nu1()));
    s.push_str(&format!("p = {}\n", gl.p()));
    s.push_str(&format!("c = {}\n", gl.components));
    s.push_str(&format!("beta_plus = {}\n", stats.beta_plus));
    s.push_str(&format!("beta_01 = {}\n", stats.beta_01));
    s.push_str(&format!("kappa_plus = {}\n", loaded.spec.kappa_plus()));
    s.push_str(&format!(
        "kappa_plus_combined = {}\n",
        combined_kappa_plus(&loaded.spec, &loaded.guide)
    ));
    write_output(&None, &s)
}

// ---------------------------------------------------------------------------
// bands
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct UnperturbedOut {
    bands: Vec<[Number; 2]>,
    rho: Number,
}

#[derive(Serialize)]
struct GuidedOut {
    bands: Vec<[Number; 2]>,
    branches: Vec<BranchOut>,
    below_branches: Vec<BranchOut>,
    flat_bands: Vec<FlatOut>,
}

#[derive(Serialize)]
struct DispersionOut {
    theta: Vec<Vec<Number>>,
    lambda: Vec<Vec<Number>>,
    below: Vec<Vec<Number>>,
}

#[derive(Serialize)]
struct BandsReport {
    unperturbed: UnperturbedOut,
    guided: GuidedOut,
    dispersion: DispersionOut,
    certificates: Vec<CertOut>,
    notes: Vec<String>,
}

fn guided_out(spectrum: &GuidedSpectrum, rho: f64, tols: &ToleranceArgs) -> GuidedOut {
    GuidedOut {
        bands: spectrum.bands.bands.iter().map(|b| interval(b.lo, b.hi)).collect(),
        branches: spectrum.branch_bands.iter().map(|b| branch_out(b, rho, tols)).collect(),
        below_branches: spectrum.below_bands.iter().map(|b| branch_out(b, rho, tols)).collect(),
        flat_bands: spectrum
            .flat_bands
            .iter()
            .map(|&(v, m)| FlatOut { value: num(v), multiplicity: m })
            .collect(),
    }
}

fn csv_guided_comments(spectrum: &GuidedSpectrum, rho: f64, tols: &ToleranceArgs) -> String {
    let mut s = format!("# rho = {}\n", fmt9(rho));
    for b in &spectrum.branch_bands {
        s.push_str(&format!(
            "# guided band {}: [{}, {}] flat={} support={}\n",
            b.index,
            fmt9(b.lo),
            fmt9(b.hi),
            b.flat || b.width() < tols.tol_flat,
            b.support,
        ));
    }
    for b in &spectrum.below_bands {
        s.push_str(&format!(
            "# below band {}: [{}, {}] support={}\n",
            b.index,
            fmt9(b.lo),
            fmt9(b.hi),
            b.support,
        ));
    }
    for &(v, m) in &spectrum.flat_bands {
        s.push_str(&format!("# flat band: value={} multiplicity={m}\n", fmt9(v)));
    }
    for n in &spectrum.notes {
        s.push_str(&format!("# note: {n}\n"));
    }
    s
}

fn cmd_bands(
    input: &InputArgs,
    solver: &SolverArgs,
    tols: &ToleranceArgs,
    output: &OutputArgs,
) -> Result<()> {
    check_config(solver, tols)?;
    let loaded = load(input)?;
    let (bands0, rho) = unperturbed_bands(&loaded.spec, 128);
    let (spectrum, trace) =
        guided_spectrum_with_trace(&loaded.spec, &loaded.guide, solver.grid, solver.window())?;
    let certs: Vec<CertOut> = spectrum.certificates.iter().map(|c| cert_out(c, tols)).collect();
    let config = config_echo("bands", loaded.echo, solver, tols, output, None);

    let content = match output.format {
        FormatArg::Json => {
            let report = BandsReport {
                unperturbed: UnperturbedOut {
                    bands: bands0.bands.iter().map(|b| interval(b.lo, b.hi)).collect(),
                    rho: num(rho),
                },
                guided: guided_out(&spectrum, rho, tols),
                dispersion: DispersionOut {
                    theta: trace
                        .theta_grid
                        .iter()
                        .map(|pt| pt.iter().copied().map(num).collect())
                        .collect(),
                    lambda: trace
                        .eigenvalues
                        .iter()
                        .map(|vals| vals.iter().copied().map(num).collect())
                        .collect(),
                    below: trace
                        .below
                        .iter()
                        .map(|vals| vals.iter().copied().map(num).collect())
                        .collect(),
                },
                certificates: certs,
                notes: spectrum.notes.clone(),
            };
            render_json(config, report)
        }
        FormatArg::Csv => {
            let mut s = csv_preamble(&config);
            for b in &bands0.bands {
                s.push_str(&format!(
                    "# unperturbed band: [{}, {}]\n",
                    fmt9(b.lo),
                    fmt9(b.hi)
                ));
            }
            s.push_str(&csv_guided_comments(&spectrum, rho, tols));
            s.push_str(&csv_certificates(&certs));
            let d = loaded.guide.dim_guide;
            let n = trace.max_count();
            let m = trace.max_below_count();
            let mut header: Vec<String> = (1..=d).map(|k| format!("theta_{k}")).collect();
            header.extend((1..=n).map(|k| format!("lambda_{k}")));
            header.extend((1..=m).map(|k| format!("below_{k}")));
            s.push_str(&header.join(","));
            s.push('\n');
            for (i, pt) in trace.theta_grid.iter().enumerate() {
                let mut row: Vec<String> = pt.iter().map(|&x| fmt9(x)).collect();
                for k in 0..n {
                    row.push(trace.eigenvalues[i].get(k).map(|&x| fmt9(x)).unwrap_or_default());
                }
                for k in 0..m {
                    row.push(trace.below[i].get(k).map(|&x| fmt9(x)).unwrap_or_default());
                }
                s.push_str(&row.join(","));
                s.push('\n');
            }
            s
        }
    };
    write_output(&output.out, &content)
}

// ---------------------------------------------------------------------------
// feshbach
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ExactBandOut {
    index: usize,
    lo: Number,
    hi: Number,
    top_attained: bool,
    segment: [Number; 2],
}

#[derive(Serialize)]
struct QRow {
    lambda: Number,
    q: Number,
}

#[derive(Serialize)]
struct CompareRow {
    band: usize,
    exact: [Number; 2],
    sweep: [Number; 2],
    delta_lo: Number,
    delta_hi: Number,
}

#[derive(Serialize)]
struct FeshbachReport {
    exact_bands: Vec<ExactBandOut>,
    exact_below_bands: Vec<ExactBandOut>,
    flat_bands: Vec<FlatOut>,
    q_samples: Vec<QRow>,
    sweep_comparison: Vec<CompareRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_note: Option<String>,
    certificates: Vec<CertOut>,
    notes: Vec<String>,
}

fn exact_band_out(bands: &[AcBand]) -> Vec<ExactBandOut> {
    bands
        .iter()
        .enumerate()
        .map(|(i, b)| ExactBandOut {
            index: i + 1,
            lo: num(b.lo),
            hi: num(b.hi),
            top_attained: b.top_attained,
            segment: interval(b.segment.0, b.segment.1),
        })
        .collect()
}

/// Sample Q at nine interior points of every band (band interiors are
/// pole-free), ascending in lambda.
fn q_samples(q: &ContactPotential, bands: &[AcBand], below: &[AcBand]) -> Result<Vec<QRow>> {
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for band in bands.iter().chain(below) {
        let n = 9;
        for k in 0..n {
            let frac = (k as f64 + 0.5) / n as f64;
            let lambda = band.lo + frac * (band.hi - band.lo);
            rows.push((lambda, q.eval(lambda)?));
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(rows
        .into_iter()
        .map(|(l, v)| QRow { lambda: num(l), q: num(v) })
        .collect())
}

/// Pair every exact band with the closest sweep branch by endpoint drift.
fn compare_with_sweep(ac: &[AcBand], swept: &GuidedSpectrum) -> Vec<CompareRow> {
    let candidates: Vec<&BranchBand> =
        swept.branch_bands.iter().filter(|b| !b.flat && b.support > 0).collect();
    let mut rows = Vec::new();
    for (k, band) in ac.iter().enumerate() {
        let best = candidates.iter().min_by(|a, b| {
            let da = (a.lo - band.lo).abs() + (a.hi - band.hi).abs();
            let db = (b.lo - band.lo).abs() + (b.hi - band.hi).abs();
            da.total_cmp(&db)
        });
        if let Some(s) = best {
            rows.push(CompareRow {
                band: k + 1,
                exact: interval(band.lo, band.hi),
                sweep: interval(s.lo, s.hi),
                delta_lo: num(s.lo - band.lo),
                delta_hi: num(s.hi - band.hi),
            });
        }
    }
    rows
}

fn cmd_feshbach(
    input: &InputArgs,
    solver: &SolverArgs,
    tols: &ToleranceArgs,
    output: &OutputArgs,
) -> Result<()> {
    check_config(solver, tols)?;
    let loaded = load(input)?;
    let spectrum = guided_spectrum_exact(&loaded.spec, &loaded.guide, solver.grid)?;
    let q = q_potential(&loaded.guide, 0)?;
    let ac = exact_bands(&q)?;
    let below_ac = exact_below_bands(&q)?;
    let samples = q_samples(&q, &ac, &below_ac)?;
    let (comparison, sweep_note) =
        match guided_spectrum(&loaded.spec, &loaded.guide, solver.grid, solver.window()) {
            Ok(swept) => (compare_with_sweep(&ac, &swept), None),
            Err(e) => (Vec::new(), Some(format!("sweep comparison skipped: {e}"))),
        };
    let certs: Vec<CertOut> = spectrum.certificates.iter().map(|c| cert_out(c, tols)).collect();
    let config = config_echo("feshbach", loaded.echo, solver, tols, output, None);

    let content = match output.format {
        FormatArg::Json => {
            let report = FeshbachReport {
                exact_bands: exact_band_out(&ac),
                exact_below_bands: exact_band_out(&below_ac),
                flat_bands: spectrum
                    .flat_bands
                    .iter()
                    .map(|&(v, m)| FlatOut { value: num(v), multiplicity: m })
                    .collect(),
                q_samples: samples,
                sweep_comparison: comparison,
                sweep_note,
                certificates: certs,
                notes: spectrum.notes.clone(),
            };
            render_json(config, report)
        }
        FormatArg::Csv => {
            let mut s = csv_preamble(&config);
            for (i, b) in ac.iter().enumerate() {
                s.push_str(&format!(
                    "# exact band {}: [{}, {}] attained={} segment=[{}, {}]\n",
                    i + 1,
                    fmt9(b.lo),
                    fmt9(b.hi),
                    b.top_attained,
                    fmt9(b.segment.0),
                    fmt9(b.segment.1),
                ));
            }
            for (i, b) in below_ac.iter().enumerate() {
                s.push_str(&format!(
                    "# exact below band {}: [{}, {}] attained={}\n",
                    i + 1,
                    fmt9(b.lo),
                    fmt9(b.hi),
                    b.top_attained,
                ));
            }
            for &(v, m) in &spectrum.flat_bands {
                s.push_str(&format!("# flat band: value={} multiplicity={m}\n", fmt9(v)));
            }
            for row in &comparison {
                s.push_str(&format!(
                    "# comparison band {}: exact=[{}, {}] sweep=[{}, {}] delta_lo={} delta_hi={}\n",
                    row.band, row.exact[0], row.exact[1], row.sweep[0], row.sweep[1],
                    row.delta_lo, row.delta_hi,
                ));
            }
            if let Some(note) = &sweep_note {
                s.push_str(&format!("# note: {note}\n"));
            }
            for n in &spectrum.notes {
                s.push_str(&format!("# note: {n}\n"));
            }
            s.push_str(&csv_certificates(&certs));
            s.push_str("lambda,q\n");
            for row in &samples {
                s.push_str(&format!("{},{}\n", row.lambda, row.q));
            }
            s
        }
    };
    write_output(&output.out, &content)
}

// ---------------------------------------------------------------------------
// flat-bands
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct FlatDetailOut {
    value: Number,
    multiplicity: usize,
    residuals: Vec<Number>,
    certified: bool,
}

#[derive(Serialize)]
struct FlatBandsReport {
    flat_bands: Vec<FlatDetailOut>,
    notes: Vec<String>,
}

fn cmd_flat_bands(
    input: &InputArgs,
    solver: &SolverArgs,
    tols: &ToleranceArgs,
    output: &OutputArgs,
) -> Result<()> {
    check_config(solver, tols)?;
    let loaded = load(input)?;
    let gl = guide_laplacian(&loaded.guide);
    let flats = flat_bands(&gl);
    let notes = flat_band_criterion_notes(&gl, &flats);
    let mut rows = Vec::new();
    for fb in &flats {
        let mut residuals = Vec::new();
        for v in &fb.vectors {
            residuals.push(flat_vector_residual(
                &loaded.spec,
                &loaded.guide,
                solver.window(),
                fb.value,
                v,
            )?);
        }
        rows.push(FlatDetailOut {
            value: num(fb.value),
            multiplicity: fb.multiplicity,
            certified: residuals.iter().all(|&r| r < tols.eig_tol),
            residuals: residuals.into_iter().map(num).collect(),
        });
    }
    let config = config_echo("flat-bands", loaded.echo, solver, tols, output, None);

    let content = match output.format {
        FormatArg::Json => render_json(config, FlatBandsReport { flat_bands: rows, notes }),
        FormatArg::Csv => {
            let mut s = csv_preamble(&config);
            for n in &notes {
                s.push_str(&format!("# note: {n}\n"));
            }
            s.push_str("value,multiplicity,max_residual,certified\n");
            for r in &rows {
                let max_res = r
                    .residuals
                    .iter()
                    .map(|n| n.as_f64().unwrap_or(f64::NAN))
                    .fold(0.0f64, f64::max);
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    r.value,
                    r.multiplicity,
                    fmt9(max_res),
                    r.certified
                ));
            }
            s
        }
    };
    write_output(&output.out, &content)
}

// ---------------------------------------------------------------------------
// estimates
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct EnclosureOut {
    j: usize,
    zeta_interval: [Number; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    mu_interval: Option<[Number; 2]>,
}

#[derive(Serialize)]
struct EstimatesReport {
    rho: Number,
    p: usize,
    components: usize,
    beta_plus: u64,
    beta_01: u64,
    kappa_plus: u64,
    zeta: Vec<Number>,
    mu: Vec<Number>,
    width_bound: Number,
    bands_above_rho_at_least: usize,
    enclosures: Vec<EnclosureOut>,
    guide_bounds: Vec<CertOut>,
}

fn cmd_estimates(
    input: &InputArgs,
    solver: &SolverArgs,
    tols: &ToleranceArgs,
    output: &OutputArgs,
) -> Result<()> {
    check_config(solver, tols)?;
    let loaded = load(input)?;
    let inputs = certificate_inputs(&loaded.spec, &loaded.guide, solver.window())?;
    let gl = guide_laplacian(&loaded.guide);
    let bounds: Vec<CertOut> =
        guide_eigenvalue_bounds(&loaded.guide).iter().map(|c| cert_out(c, tols)).collect();
    let enclosures: Vec<EnclosureOut> = inputs
        .zeta
        .iter()
        .enumerate()
        .map(|(i, &z)| EnclosureOut {
            j: i + 1,
            zeta_interval: interval(z, z + inputs.rho),
            mu_interval: inputs
                .mu
                .get(i)
                .map(|&m| interval(m, m + 2.0 * inputs.beta_plus as f64)),
        })
        .collect();
    let report = EstimatesReport {
        rho: num(inputs.rho),
        p: gl.p(),
        components: gl.components,
        beta_plus: inputs.beta_plus,
        beta_01: inputs.beta_01,
        kappa_plus: combined_kappa_plus(&loaded.spec, &loaded.guide),
        zeta: inputs.zeta.iter().copied().map(num).collect(),
        mu: inputs.mu.iter().copied().map(num).collect(),
        width_bound: num(2.0 * inputs.beta_plus as f64),
        bands_above_rho_at_least: inputs.zeta.iter().filter(|&&z| z > inputs.rho).count(),
        enclosures,
        guide_bounds: bounds,
    };
    let config = config_echo("estimates", loaded.echo, solver, tols, output, None);

    let content = match output.format {
        FormatArg::Json => render_json(config, report),
        FormatArg::Csv => {
            let mut s = csv_preamble(&config);
            s.push_str(&format!(
                "# rho={} p={} c={} beta_plus={} beta_01={} kappa_plus={}\n",
                report.rho, report.p, report.components, report.beta_plus, report.beta_01,
                report.kappa_plus,
            ));
            s.push_str(&format!(
                "# width_bound={} bands_above_rho_at_least={}\n",
                report.width_bound, report.bands_above_rho_at_least,
            ));
            s.push_str(&csv_certificates(&report.guide_bounds));
            s.push_str("j,zeta_lo,zeta_hi,mu_lo,mu_hi\n");
            for e in &report.enclosures {
                let (mu_lo, mu_hi) = match &e.mu_interval {
                    Some([lo, hi]) => (lo.to_string(), hi.to_string()),
                    None => (String::new(), String::new()),
                };
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    e.j, e.zeta_interval[0], e.zeta_interval[1], mu_lo, mu_hi,
                ));
            }
            s
        }
    };
    write_output(&output.out, &content)
}

// ---------------------------------------------------------------------------
// asymptotics
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ConvergenceRowOut {
    t: u64,
    measured: [Number; 2],
    predicted: [Number; 2],
    residual: [Number; 2],
    width: Number,
}

#[derive(Serialize)]
struct ConvergenceOut {
    j: usize,
    zeta: Number,
    flat: bool,
    w_minus: Number,
    w_plus: Number,
    w_dot: Number,
    beta01_bound_holds: bool,
    beta01_margin: Number,
    rows: Vec<ConvergenceRowOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lo_slope: Option<Number>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hi_slope: Option<Number>,
}

#[derive(Serialize)]
struct SkippedOut {
    j: usize,
    reason: String,
}

#[derive(Serialize)]
struct AsymptoticsReport {
    reports: Vec<ConvergenceOut>,
    skipped: Vec<SkippedOut>,
}

fn convergence_out(report: &ConvergenceReport, beta_01: u64) -> ConvergenceOut {
    let w_dot = report.w_plus - report.w_minus;
    let beta01_margin = 2.0 * beta_01 as f64 - w_dot;
    ConvergenceOut {
        j: report.j,
        zeta: num(report.zeta),
        flat: report.flat,
        w_minus: num(report.w_minus),
        w_plus: num(report.w_plus),
        w_dot: num(w_dot),
        beta01_bound_holds: beta01_margin >= 0.0,
        beta01_margin: num(beta01_margin),
        rows: report
            .rows
            .iter()
            .map(|r| ConvergenceRowOut {
                t: r.t,
                measured: interval(r.measured.0, r.measured.1),
                predicted: interval(r.predicted.0, r.predicted.1),
                residual: [num(r.residual.0), num(r.residual.1)],
                width: num(r.width),
            })
            .collect(),
        lo_slope: report.lo_slope.map(num),
        hi_slope: report.hi_slope.map(num),
    }
}

fn cmd_asymptotics(
    input: &InputArgs,
    solver: &SolverArgs,
    tols: &ToleranceArgs,
    output: &OutputArgs,
    t_list: &[u64],
) -> Result<()> {
    check_config(solver, tols)?;
    let loaded = load(input)?;
    let gl = guide_laplacian(&loaded.guide);
    let stats = bridge_stats(&loaded.spec, &loaded.guide);
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for j in 1..=gl.p() {
        match convergence_study(&loaded.spec, &loaded.guide, j, t_list, solver.grid, solver.window())
        {
            Ok(report) => reports.push(convergence_out(&report, stats.beta_01)),
            Err(Error::Degenerate(reason)) => skipped.push(SkippedOut { j, reason }),
            Err(e) => return Err(e),
        }
    }
    let config =
        config_echo("asymptotics", loaded.echo, solver, tols, output, Some(t_list.to_vec()));

    let content = match output.format {
        FormatArg::Json => render_json(config, AsymptoticsReport { reports, skipped }),
        FormatArg::Csv => {
            let mut s = csv_preamble(&config);
            for r in &reports {
                s.push_str(&format!(
                    "# branch {}: zeta={} flat={} w_minus={} w_plus={} w_dot={} \
                     beta01_bound_holds={} beta01_margin={}\n",
                    r.j, r.zeta, r.flat, r.w_minus, r.w_plus, r.w_dot, r.beta01_bound_holds,
                    r.beta01_margin,
                ));
                if let (Some(lo), Some(hi)) = (&r.lo_slope, &r.hi_slope) {
                    s.push_str(&format!("# branch {}: lo_slope={} hi_slope={}\n", r.j, lo, hi));
                }
            }
            for sk in &skipped {
                s.push_str(&format!("# skipped branch {}: {}\n", sk.j, csv_cell(&sk.reason)));
            }
            s.push_str(
                "j,t,measured_lo,measured_hi,predicted_lo,predicted_hi,residual_lo,residual_hi,width\n",
            );
            for r in &reports {
                for row in &r.rows {
                    s.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{}\n",
                        r.j,
                        row.t,
                        row.measured[0],
                        row.measured[1],
                        row.predicted[0],
                        row.predicted[1],
                        row.residual[0],
                        row.residual[1],
                        row.width,
                    ));
                }
            }
            s
        }
    };
    write_output(&output.out, &content)
}

// ---------------------------------------------------------------------------
// example
// ---------------------------------------------------------------------------

fn cmd_example(input: &InputArgs, out: &Option<PathBuf>) -> Result<()> {
    let Some(name) = &input.example else {
        let names: Vec<String> = builtin_names()
            .iter()
            .map(|(n, key)| format!("{n}({key})"))
            .collect();
        return Err(Error::Validation(format!(
            "example requires --example NAME; builtins: {}",
            names.join(", ")
        )));
    };
    if input.input.is_some() {
        return Err(Error::Validation(
            "example emits a builtin; --input cannot be combined with it".into(),
        ));
    }
    let params: BTreeMap<String, i64> = input.param.iter().cloned().collect();
    let (spec, guide) = builtin_example(name, &params)?;
    let mut doc = serialize_spec(&spec, &guide);
    doc.push('\n');
    write_output(out, &doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_certificates_follow_the_configured_tolerance() {
        let base = Certificate {
            name: "flat band 3.000000000 vector 1 residual".into(),
            passed: true,
            margin: tol::EIGENVECTOR_RESIDUAL - 1e-10, // residual 1e-10
            detail: "residual 1.0e-10 per unit norm".into(),
        };
        let strict = ToleranceArgs { tol_ess: 1e-6, tol_flat: 1e-6, eig_tol: 1e-11 };
        assert!(!cert_out(&base, &strict).passed);
        let loose = ToleranceArgs { tol_ess: 1e-6, tol_flat: 1e-6, eig_tol: 1e-9 };
        assert!(cert_out(&base, &loose).passed);
    }

    #[test]
    fn nearest_branch_matching_prefers_endpoint_agreement() {
        let mk = |index, lo, hi| BranchBand {
            index,
            lo,
            hi,
            flat: false,
            support: 10,
            below: false,
        };
        let swept = GuidedSpectrum {
            branch_bands: vec![mk(1, 9.5, 11.4), mk(2, 4.6, 6.0)],
            ..GuidedSpectrum::default()
        };
        let ac = vec![
            AcBand { lo: 4.62, hi: 6.0, top_attained: false, segment: (4.0, 6.0) },
            AcBand { lo: 9.51, hi: 11.44, top_attained: true, segment: (9.0, 12.0) },
        ];
        let rows = compare_with_sweep(&ac, &swept);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].band, 1);
        assert!((rows[0].sweep[0].as_f64().unwrap() - 4.6).abs() < 1e-12);
        assert!((rows[1].sweep[1].as_f64().unwrap() - 11.4).abs() < 1e-12);
    }
}
