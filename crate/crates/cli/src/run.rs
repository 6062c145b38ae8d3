//! Scenario dispatch and report assembly.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Map, Value};

use qmetro::bayes::{asymptotic_check_observed, default_resolution, write_posterior_csv, AsymptoticConfig};
use qmetro::bounds::{
    best_combination, classical_fim, qfim, qfim_pure, qfim_pure_fock, saturation_checks, scalar_bound, weak_qcrb,
    weight_matrix_analysis, FisherMatrix,
};
use qmetro::dqs::{self, build_probe, closed_form_sensitivity, gain, ProbeFamily, DENSE_CHECK_CAP};
use qmetro::estimation::{saturation_report, write_trials_csv, SaturationConfig, DEFAULT_RESOLUTION};
use qmetro::fock::{density_from_pure, Sector};
use qmetro::holevo::{bound_chain_report, hb_sandwich, holevo_bound};
use qmetro::model::ParametricModel;
use qmetro::tolerance::ToleranceTable;
use qmetro::{Error, Hermitian, Weight};

use crate::config::{parse_config, Kind, ScenarioConfig};
use crate::error::{CliError, EXIT_OK};

pub const REPORT_SCHEMA: &str = include_str!("../schemas/report.schema.json");
pub const REPORT_SCHEMA_VERSION: &str = "1.0.0";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory receiving `report.json` and any CSV/state artifacts.
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub strict: bool,
    pub threads: Option<usize>,
    pub quiet: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Overrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub strict: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: &'static str,
    pub tool: Tool,
    pub kind: Kind,
    pub status: &'static str,
    pub inputs: ScenarioConfig,
    pub overrides: Overrides,
    pub results: Map<String, Value>,
    pub diagnostics: Map<String, Value>,
    pub tolerances: ToleranceTable,
    pub timing_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<CliError>,
}

/// A file produced next to the report.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub role: &'static str,
    pub path: PathBuf,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub results: Map<String, Value>,
    pub diagnostics: Map<String, Value>,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    fn put(&mut self, key: &str, v: impl Serialize) {
        self.results.insert(key.into(), to_value(v));
    }

    fn note(&mut self, key: &str, v: impl Serialize) {
        self.diagnostics.insert(key.into(), to_value(v));
    }
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("report values serialise")
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn complex_rows(h: &Hermitian) -> Vec<Vec<[f64; 2]>> {
    let m = h.matrix();
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn engine<T>(r: qmetro::Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::from_engine)
}

/// Where each artifact goes: `--out DIR` wins over the config's paths.
struct Paths {
    report: Option<PathBuf>,
    csv: Option<PathBuf>,
    state: Option<PathBuf>,
}

fn resolve_paths(cfg: &ScenarioConfig, opts: &RunOptions) -> Paths {
    let out = cfg.output.clone().unwrap_or_default();
    match &opts.out {
        Some(dir) => Paths {
            report: Some(dir.join("report.json")),
            csv: Some(dir.join(match cfg.kind {
                Kind::Bayes => "posterior.csv",
                _ => "trials.csv",
            })),
            state: Some(dir.join("state.json")),
        },
        None => Paths {
            report: out.report.map(PathBuf::from),
            csv: out.csv.map(PathBuf::from),
            state: out.state.map(PathBuf::from),
        },
    }
}

/// Parses, validates and runs one scenario file. Returns the exit code.
pub fn run_file(path: &Path, opts: &RunOptions) -> i32 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let err = CliError::validation(format!("cannot read {}: {e}", path.display()));
            eprintln!("{err}");
            return err.code;
        }
    };
    run_text(&text, opts)
}

pub fn run_text(text: &str, opts: &RunOptions) -> i32 {
    let cfg = match parse_config(text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return e.code;
        }
    };
    if let Some(n) = opts.threads {
        // Only the first pool request in a process takes effect.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let paths = resolve_paths(&cfg, opts);
    let start = Instant::now();
    let outcome = execute(&cfg, opts, &paths);
    let timing_ms = start.elapsed().as_secs_f64() * 1e3;

    let (status, outcome, error) = match outcome {
        Ok(o) => ("ok", o, None),
        // Invalid inputs never leave a partial report behind.
        Err(e) if e.is_validation() => {
            eprintln!("{e}");
            return e.code;
        }
        Err(e) => ("error", Outcome::default(), Some(e)),
    };
    let report = Report {
        schema_version: REPORT_SCHEMA_VERSION,
        tool: Tool {
            name: "qmetro",
            version: env!("CARGO_PKG_VERSION"),
        },
        kind: cfg.kind,
        status,
        inputs: cfg.clone(),
        overrides: Overrides {
            seed: opts.seed,
            strict: opts.strict,
            threads: opts.threads,
        },
        results: outcome.results,
        diagnostics: outcome.diagnostics,
        tolerances: ToleranceTable::default(),
        timing_ms,
        error: error.clone(),
    };
    let text = serde_json::to_string_pretty(&report).expect("report serialises") + "\n";
    let write = |path: &Path, bytes: &[u8]| -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
        }
        std::fs::write(path, bytes).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
    };
    let written = (|| {
        for a in &outcome.artifacts {
            write(&a.path, &a.bytes)?;
        }
        match &paths.report {
            Some(p) => write(p, text.as_bytes()),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    })();
    if let Err(e) = written {
        eprintln!("{e}");
        return e.code;
    }
    if let Some(e) = error {
        eprintln!("{e}");
        return e.code;
    }
    if !opts.quiet {
        if let Some(p) = &paths.report {
            eprintln!(
                "{:?} scenario finished in {timing_ms:.1} ms; report at {}",
                cfg.kind,
                p.display()
            );
        }
    }
    EXIT_OK
}

fn execute(cfg: &ScenarioConfig, opts: &RunOptions, paths: &Paths) -> Result<Outcome, CliError> {
    match cfg.kind {
        Kind::Bounds if cfg.probe.is_some() => probe_bounds(cfg, opts),
        Kind::Bounds => model_bounds(cfg, opts),
        Kind::Holevo => holevo(cfg, opts),
        Kind::Dqs => dqs_run(cfg, opts, paths),
        Kind::Simulate => simulate(cfg, opts, paths),
        Kind::Bayes => bayes(cfg, opts, paths),
    }
}

fn theta_for(cfg: &ScenarioConfig, d: usize) -> Result<Vec<f64>, CliError> {
    let theta = cfg.theta.clone().unwrap_or_default();
    if theta.len() != d {
        return Err(CliError::validation(format!(
            "theta has {} entries, the model has {d} parameters",
            theta.len()
        )));
    }
    Ok(theta)
}

fn check_m(cfg: &ScenarioConfig) -> Result<usize, CliError> {
    let m = cfg.repetitions();
    if m == 0 {
        return Err(CliError::validation("m must be at least 1"));
    }
    Ok(m)
}

/// Per-direction QCRB entries; inestimable directions fail under `--strict`.
fn direction_entries(f: &FisherMatrix<f64>, dirs: &[Vec<f64>], m: usize, strict: bool) -> Result<Vec<Value>, CliError> {
    dirs.iter()
        .map(|nu| {
            let g = engine(gain(nu))?;
            match weak_qcrb(nu, f, m) {
                Ok(wb) => {
                    if wb.inestimable && strict {
                        return Err(CliError::from_engine(Error::Inestimable));
                    }
                    Ok(json!({
                        "nu": nu,
                        "qcrb": if wb.inestimable { Value::Null } else { to_value(wb.exact) },
                        "weak": wb.weak,
                        "gap": if wb.inestimable { Value::Null } else { to_value(wb.gap) },
                        "inestimable": wb.inestimable,
                        "gain": g,
                    }))
                }
                Err(Error::Unbounded) if !strict => Ok(json!({
                    "nu": nu,
                    "qcrb": Value::Null,
                    "weak": Value::Null,
                    "gap": Value::Null,
                    "inestimable": true,
                    "gain": g,
                })),
                Err(Error::Unbounded) => Err(CliError::from_engine(Error::Inestimable)),
                Err(e) => Err(CliError::from_engine(e)),
            }
        })
        .collect()
}

fn scalar_entry(f: &FisherMatrix<f64>, w: &Weight, m: usize, strict: bool) -> Result<Value, CliError> {
    let b = engine(scalar_bound(f, w, m, strict))?;
    Ok(json!({
        "value": if b.inestimable { Value::Null } else { to_value(b.value) },
        "pinv_value": b.value,
        "inestimable": b.inestimable,
    }))
}

fn fisher_common(
    out: &mut Outcome,
    f: &FisherMatrix<f64>,
    cfg: &ScenarioConfig,
    opts: &RunOptions,
) -> Result<(), CliError> {
    let d = f.dim();
    let m = check_m(cfg)?;
    let w = cfg.build_weight(d)?;
    out.put("qfim", rows(f.matrix()));
    out.put("qfim_rank", f.rank());
    out.put("qcrb", scalar_entry(f, &w, m, opts.strict)?);
    let dirs = cfg.directions(d)?;
    out.put("directions", direction_entries(f, &dirs, m, opts.strict)?);
    let gains = dirs.iter().map(|nu| engine(gain(nu))).collect::<Result<Vec<_>, _>>()?;
    out.put("gains", gains);
    match best_combination(f) {
        Ok((v, value)) => out.put("best_combination", json!({ "nu": v.as_slice(), "fisher": value })),
        Err(e) => out.note("best_combination", e.to_string()),
    }
    if !dirs.is_empty() && f.is_full_rank() {
        let pairs: Vec<(f64, Vec<f64>)> = dirs.iter().map(|nu| (1.0, nu.clone())).collect();
        match weight_matrix_analysis(f, &pairs, m) {
            Ok(a) => out.put("weight_analysis", a),
            Err(e) => out.note("weight_analysis", e.to_string()),
        }
    }
    Ok(())
}

fn model_bounds(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let model = cfg.build_model()?;
    let d = model.params();
    let theta = theta_for(cfg, d)?;
    let m = check_m(cfg)?;
    let w = cfg.build_weight(d)?;
    let mut out = Outcome::default();

    let q = engine(qfim(&model, &theta))?;
    fisher_common(&mut out, &q.qfim, cfg, opts)?;
    out.put("g_q", rows(&q.g_q));
    out.put("r", q.r_measure);
    out.note("r_unclipped", q.r_unclipped);
    out.put("saturation", engine(saturation_checks(&model, &theta))?.summary());

    if let Some(povm) = cfg.build_povm(model.dim())? {
        let f = engine(classical_fim(&model, &povm, &theta))?;
        out.put("fim", rows(f.matrix()));
        out.put("crb", scalar_entry(&f, &w, m, opts.strict)?);
        match bound_chain_report(
            &model,
            &povm,
            &theta,
            &w,
            m,
            cfg.label.as_deref().unwrap_or("single copy"),
        ) {
            Ok(c) => out.put("chain", c),
            Err(e) => out.note("chain", e.to_string()),
        }
    }
    match holevo_bound(&model, &theta, &w) {
        Ok(sol) => {
            out.put("hb", sol.value / m as f64);
            out.note("holevo", sol.diagnostics);
        }
        Err(e) => out.note("hb", e.to_string()),
    }
    Ok(out)
}

/// Largest probe support given the full SLD/commutator saturation checks;
/// up to [`DENSE_CHECK_CAP`] only the pure-state `G_Q` is evaluated.
const FULL_SATURATION_MAX: usize = 128;

fn probe_bounds(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let spec = cfg.probe.as_ref().expect("checked by config");
    let state = engine(build_probe(spec))?;
    let f = engine(qfim_pure_fock(&state, &spec.network.generators()))?;
    let mut out = Outcome::default();
    fisher_common(&mut out, &f, cfg, opts)?;
    let support = state.support_len();
    out.put("support_size", support);
    let theta = vec![0.0; spec.network.sensors];
    if support <= DENSE_CHECK_CAP {
        let sector = engine(density_from_pure(&state, Sector::Spanned))?;
        let gens = sector.generators(&spec.network.generators());
        if support <= FULL_SATURATION_MAX {
            let model = engine(ParametricModel::unitary(sector.density.clone(), gens))?;
            let sat = engine(saturation_checks(&model, &theta))?;
            out.put("g_q", rows(&sat.qfim.g_q));
            out.put("r", sat.qfim.r_measure);
            out.put("saturation", sat.summary());
        } else {
            let pure = engine(qfim_pure(&sector.vector, &gens, &theta))?;
            let g_max = 4.0 * pure.imaginary.amax();
            out.put(
                "saturation",
                json!({
                    "g_q_max": g_max,
                    "weak_commutativity": g_max <= qmetro::tolerance::SATURATION,
                    "method": "pure-state covariance",
                }),
            );
        }
    } else {
        out.note(
            "saturation",
            format!("support {support} exceeds {DENSE_CHECK_CAP}; dense checks skipped"),
        );
    }
    let m = check_m(cfg)?;
    let dirs = cfg.directions(spec.network.sensors)?;
    let mut closed = Vec::new();
    let mut deviations = Vec::new();
    for nu in &dirs {
        let exact = weak_qcrb(nu, &f, m).ok().filter(|b| !b.inestimable).map(|b| b.exact);
        match (closed_form_sensitivity(spec, nu, m), exact) {
            (Ok(c), Some(x)) => {
                closed.push(to_value(c));
                deviations.push(to_value((x - c).abs() / c));
            }
            (Ok(c), None) => {
                closed.push(to_value(c));
                deviations.push(Value::Null);
            }
            (Err(_), _) => {
                closed.push(Value::Null);
                deviations.push(Value::Null);
            }
        }
    }
    out.put("closed_form", closed);
    out.put("deviations", deviations);
    Ok(out)
}

fn holevo(cfg: &ScenarioConfig, _opts: &RunOptions) -> Result<Outcome, CliError> {
    let model = cfg.build_model()?;
    let d = model.params();
    let theta = theta_for(cfg, d)?;
    let m = check_m(cfg)?;
    let w = cfg.build_weight(d)?;
    let mut out = Outcome::default();
    let sol = engine(holevo_bound(&model, &theta, &w))?;
    out.put("hb", sol.value / m as f64);
    out.put("hb_single_copy", sol.value);
    out.put("x_opt", sol.x_opt.iter().map(complex_rows).collect::<Vec<_>>());
    out.put("v_opt", rows(&sol.v_opt));
    out.put("sandwich", engine(hb_sandwich(&model, &theta, &w))?);
    if let Some(povm) = cfg.build_povm(model.dim())? {
        out.put(
            "chain",
            engine(bound_chain_report(
                &model,
                &povm,
                &theta,
                &w,
                m,
                cfg.label.as_deref().unwrap_or("single copy"),
            ))?,
        );
    }
    out.note("holevo", sol.diagnostics);
    Ok(out)
}

fn dqs_run(cfg: &ScenarioConfig, opts: &RunOptions, paths: &Paths) -> Result<Outcome, CliError> {
    let spec = cfg.probe.as_ref().expect("checked by config");
    let m = check_m(cfg)?;
    let state = engine(build_probe(spec))?;
    let f = engine(qfim_pure_fock(&state, &spec.network.generators()))?;
    let mut out = Outcome::default();
    out.put("modes", spec.network.modes());
    out.put("total_particles", spec.network.total_particles());
    out.put("support_size", state.support_len());
    out.put("qfim", rows(f.matrix()));
    out.put("qfim_rank", f.rank());

    let mut checks = Vec::new();
    if spec.family == ProbeFamily::GeneralizedNoon {
        checks.push(to_value(engine(dqs::verify_probe(spec, &[], m))?));
    } else {
        for nu in cfg.directions(spec.network.sensors)? {
            let entry = match dqs::verify_probe(spec, &nu, m) {
                Ok(v) => to_value(v),
                Err(Error::Inestimable) if !opts.strict => json!({ "nu": nu, "inestimable": true }),
                // No closed form for this direction: report the QFIM value alone.
                Err(Error::Unsupported(_)) => {
                    let wb = weak_qcrb(&nu, &f, m);
                    json!({
                        "nu": nu,
                        "closed_form": Value::Null,
                        "numeric": wb.as_ref().ok().filter(|b| !b.inestimable).map(|b| b.exact),
                        "inestimable": wb.map(|b| b.inestimable).unwrap_or(true),
                    })
                }
                Err(e) => return Err(CliError::from_engine(e)),
            };
            checks.push(entry);
        }
        let gains = cfg
            .directions(spec.network.sensors)?
            .iter()
            .map(|nu| engine(gain(nu)))
            .collect::<Result<Vec<_>, _>>()?;
        out.put("gains", gains);
    }
    out.put("verification", checks);
    if let Some(p) = &paths.state {
        out.artifacts.push(Artifact {
            role: "state",
            path: p.clone(),
            bytes: (dqs::export_json(&state) + "\n").into_bytes(),
        });
    }
    Ok(out)
}

fn seed_for(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<u64, CliError> {
    opts.seed
        .or(cfg.seed)
        .ok_or_else(|| CliError::validation("a seed is required (config 'seed' or --seed)"))
}

fn simulate(cfg: &ScenarioConfig, opts: &RunOptions, paths: &Paths) -> Result<Outcome, CliError> {
    let model = cfg.build_model()?;
    let theta = theta_for(cfg, model.params())?;
    let povm = cfg.build_povm(model.dim())?.expect("checked by config");
    let domain = cfg.domain_box();
    let seed = seed_for(cfg, opts)?;
    let run = engine(saturation_report(&SaturationConfig {
        model: &model,
        povm: &povm,
        theta: &theta,
        m: check_m(cfg)?,
        trials: cfg.trials.expect("checked by config"),
        seed,
        domain: &domain,
        resolution: cfg.resolution.unwrap_or(DEFAULT_RESOLUTION),
    }))?;
    let mut out = Outcome::default();
    if let Some(p) = &paths.csv {
        let mut bytes = Vec::new();
        write_trials_csv(&mut bytes, &run.rows).expect("writing to memory");
        out.artifacts.push(Artifact {
            role: "csv",
            path: p.clone(),
            bytes,
        });
    }
    out.put("saturation", &run);
    out.note("seed", seed);
    Ok(out)
}

fn bayes(cfg: &ScenarioConfig, opts: &RunOptions, paths: &Paths) -> Result<Outcome, CliError> {
    let model = cfg.build_model()?;
    let d = model.params();
    let theta = theta_for(cfg, d)?;
    let povm = cfg.build_povm(model.dim())?.expect("checked by config");
    let domain = cfg.domain_box();
    let seed = seed_for(cfg, opts)?;
    let m = cfg.m.expect("checked by config");
    let resolution = match cfg.resolution {
        Some(r) => r,
        None => engine(default_resolution(d))?,
    };
    let snapshots = cfg.snapshots.clone().unwrap_or_else(|| vec![m]);
    if let Some(s) = snapshots.iter().find(|&&s| s > m) {
        return Err(CliError::validation(format!("snapshot step {s} exceeds m = {m}")));
    }
    let mut csv = Vec::new();
    let mut first = true;
    let (report, _) = engine(asymptotic_check_observed(
        &AsymptoticConfig {
            model: &model,
            povm: &povm,
            theta: &theta,
            m,
            seed,
            domain: &domain,
            resolution,
        },
        &mut |step, post| {
            if snapshots.contains(&step) {
                write_posterior_csv(&mut csv, step, post, first).expect("writing to memory");
                first = false;
            }
            Ok(())
        },
    ))?;
    let mut out = Outcome::default();
    if let Some(p) = &paths.csv {
        out.artifacts.push(Artifact {
            role: "csv",
            path: p.clone(),
            bytes: csv,
        });
    }
    out.put("bayes", &report);
    out.note("seed", seed);
    out.note("snapshots", snapshots);
    Ok(out)
}

/// Checks a report against the shipped output schema.
pub fn validate_report(report: &Value) -> Result<(), CliError> {
    crate::config::validate_against(REPORT_SCHEMA, report)
}
