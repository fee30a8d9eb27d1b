use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::json;

use vecsparch::ingest::{load_panel, to_returns, write_long, IngestOptions, PanelSchema};
use vecsparch::presets::{fig1_params, fig1_simulate, fig1_weights, FIG1_CROSS, FIG1_SIDE};
use vecsparch::{
    builtin_design, check_stability, emit_tables, fit, fit_csv, fit_document, read_panel, run_design, simulate,
    validate_assumptions, validate_weights, write_panel, AMode, ATilde, BuiltinModel, Contiguity, Dimensions,
    ErrorDist, FitOptions, Markers, McDesign, McReport, McSize, ModelConfig, ParamSet64, SimOptions,
    SpatialWeights64, TableFormat, WeightsFormat,
};

use crate::config::{parse_grid, parse_list, FitArgs, McArgs, SimulateArgs, WeightsArgs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

/// Collects the files a run writes and refuses to overwrite its inputs.
pub struct Outputs {
    dir: PathBuf,
    inputs: Vec<PathBuf>,
    written: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path, inputs: &[&PathBuf]) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        let inputs = inputs.iter().filter_map(|p| fs::canonicalize(p).ok()).collect();
        Ok(Self { dir: dir.to_path_buf(), inputs, written: Vec::new() })
    }

    /// Path for a new output file, checked against the inputs.
    pub fn path(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Ok(canon) = fs::canonicalize(&path) {
            if self.inputs.contains(&canon) {
                bail!("refusing to overwrite input file {}", path.display());
            }
        }
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.path(name)?;
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    pub fn manifest(&mut self, command: &str, config: &impl Serialize, details: serde_json::Value, exit_code: i32) -> Result<()> {
        self.written.push("manifest.json".into());
        let m = json!({
            "tool": "vecsparch",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": config,
            "out": self.dir,
            "outputs": self.written,
            "exit_code": exit_code,
            "details": details,
        });
        let path = self.dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&m)?).with_context(|| format!("writing {}", path.display()))
    }
}

fn weights_format(name: &str) -> Result<WeightsFormat> {
    match name {
        "coordinate" => Ok(WeightsFormat::CoordinateList),
        "dense" => Ok(WeightsFormat::DenseCsv),
        other => bail!("unknown weights format '{other}' (expected coordinate or dense)"),
    }
}

fn load_weights(path: &Path) -> Result<SpatialWeights64> {
    SpatialWeights64::load_auto(path).with_context(|| format!("loading weights {}", path.display()))
}

fn grid_weights(grid: &str, scheme: &str) -> Result<SpatialWeights64> {
    let (rows, cols) = parse_grid(grid)?;
    let scheme: Contiguity = scheme.parse()?;
    Ok(SpatialWeights64::grid_contiguity(rows, cols, scheme)?)
}

pub fn weights(args: WeightsArgs, out: &Path) -> Result<i32> {
    let inputs: Vec<&PathBuf> = args.load.iter().collect();
    let mut outputs = Outputs::new(out, &inputs)?;
    let w = match (&args.load, &args.grid) {
        (Some(path), _) => load_weights(path)?,
        (None, Some(grid)) => grid_weights(grid, args.scheme.as_deref().unwrap_or("queen"))?,
        (None, None) => bail!("weights needs --grid or --load"),
    };
    let w = if args.standardize { w.row_standardize()? } else { w };
    let format = weights_format(args.format.as_deref().unwrap_or("coordinate"))?;
    let report = validate_weights(&w, args.bound.unwrap_or(1.0));

    let name = args.output.clone().unwrap_or_else(|| "weights.txt".into());
    let path = outputs.path(&name)?;
    w.save(&path, format)?;
    outputs.write("validation.txt", &report.to_text())?;
    let code = if args.validate && !report.passes() { EXIT_VALIDATION } else { EXIT_OK };
    print!("{}", report.to_text());
    outputs.manifest("weights", &args, json!({ "n": w.n(), "nonzeros": w.nnz(), "validation": report }), code)?;
    Ok(code)
}

fn grid_text(values: &[f64], rows: usize, cols: usize) -> String {
    let mut s = String::new();
    for r in 0..rows {
        let line: Vec<String> = (0..cols).map(|c| format!("{:.16e}", values[r * cols + c])).collect();
        let _ = writeln!(s, "{}", line.join(","));
    }
    s
}

fn params_json(p: &ParamSet64) -> serde_json::Value {
    let rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>();
    let a_tilde = match &p.a_tilde {
        ATilde::Constant(v) => json!(v.as_slice()),
        ATilde::Free(m) => json!(rows(m)),
    };
    json!({ "a_tilde": a_tilde, "psi": rows(&p.psi), "pi": rows(&p.pi), "sigma2_u": p.sigma2_u })
}

fn fig1(args: &SimulateArgs, outputs: &mut Outputs) -> Result<(serde_json::Value, i32)> {
    let seed = args.seed.unwrap_or(0);
    let w = Arc::new(fig1_weights());
    let n = FIG1_SIDE * FIG1_SIDE;
    let mut settings = Vec::new();
    for cross in FIG1_CROSS {
        let sim = fig1_simulate(&w, cross, seed)?;
        let slice = sim.panel.slice(1);
        for var in 0..2 {
            let name = format!("fig1_cross{cross}_y{}.csv", var + 1);
            outputs.write(&name, &grid_text(&slice[var * n..(var + 1) * n], FIG1_SIDE, FIG1_SIDE))?;
        }
        settings.push(json!({ "cross": cross, "params": params_json(&fig1_params(cross)?) }));
    }
    println!("wrote four {FIG1_SIDE}x{FIG1_SIDE} fields (seed {seed})");
    let details = json!({ "weights": "row-standardised rook contiguity, 30x30", "seed": seed, "settings": settings });
    Ok((details, EXIT_OK))
}

pub fn simulate_cmd(args: SimulateArgs, out: &Path) -> Result<i32> {
    let inputs: Vec<&PathBuf> = args.weights.iter().collect();
    let mut outputs = Outputs::new(out, &inputs)?;
    let (details, code) = if args.fig1 { fig1(&args, &mut outputs)? } else { panel_simulation(&args, &mut outputs)? };
    outputs.manifest("simulate", &args, details, code)?;
    Ok(code)
}

fn panel_simulation(args: &SimulateArgs, outputs: &mut Outputs) -> Result<(serde_json::Value, i32)> {
    let preset = args.model.as_deref().map(|m| m.parse::<BuiltinModel>().map(builtin_design)).transpose()?;
    let a = match (&args.a, &preset) {
        (Some(s), _) => parse_list(s, "--a")?,
        (None, Some(d)) => d.a.clone(),
        (None, None) => bail!("simulate needs --model or --a, --psi and --pi"),
    };
    let p = a.len();
    let matrix = |flag: &Option<String>, name: &str, from: Option<&Vec<Vec<f64>>>| -> Result<DMatrix<f64>> {
        let vals = match (flag, from) {
            (Some(s), _) => parse_list(s, name)?,
            (None, Some(rows)) => rows.concat(),
            (None, None) => bail!("missing {name}"),
        };
        if vals.len() != p * p {
            bail!("{name} needs {} values for p = {p}, got {}", p * p, vals.len());
        }
        Ok(DMatrix::from_row_slice(p, p, &vals))
    };
    let psi = matrix(&args.psi, "--psi", preset.as_ref().map(|d| &d.psi))?;
    let pi = matrix(&args.pi, "--pi", preset.as_ref().map(|d| &d.pi))?;
    let dist = ErrorDist::parse(args.dist.as_deref().unwrap_or("normal"))?;
    let params = ParamSet64::from_a(ATilde::Constant(DVector::from_vec(a)), psi, pi, &dist)?;

    let w = match (&args.weights, &args.grid) {
        (Some(path), _) => load_weights(path)?,
        (None, Some(grid)) => grid_weights(grid, args.scheme.as_deref().unwrap_or("queen"))?.row_standardize()?,
        (None, None) => bail!("simulate needs --grid or --weights"),
    };
    let stability = check_stability(&params, &w)?;
    let mut details = json!({ "params": params_json(&params), "stability": stability, "error_dist": dist.label() });
    if !stability.stable {
        eprintln!(
            "error: parameters are not stable: spectral radius {:.10} (S invertible: {})",
            stability.spectral_radius, stability.s_invertible
        );
        return Ok((details, EXIT_VALIDATION));
    }

    let dims = Dimensions::new(w.n(), p, args.t_len.unwrap_or(30))?;
    let seed = args.seed.unwrap_or(0);
    let cfg = ModelConfig::new(dims, Arc::new(w), dist, AMode::ConstantAcrossSpace, seed)?;
    let opts = SimOptions { burn_in: args.burn_in.unwrap_or(50), ..SimOptions::default() };
    let sim = simulate(&cfg, &params, opts)?;
    let panel = &sim.panel;
    write_panel(panel, outputs.path("panel.csv")?, None)?;
    outputs.written.push("panel.csv.manifest.json".into());
    let log_h = outputs.path("log_h.csv")?;
    write_long(log_h, dims, &panel.location_ids, &panel.variable_names, &panel.time_labels, &sim.log_h)?;
    println!(
        "simulated n = {}, p = {}, T = {} ({} slices), spectral radius {:.6}",
        dims.n,
        dims.p,
        dims.t_len,
        dims.slices(),
        stability.spectral_radius
    );
    details["dims"] = json!({ "n": dims.n, "p": dims.p, "t_len": dims.t_len, "slices": dims.slices() });
    Ok((details, EXIT_OK))
}

pub fn fit_cmd(args: FitArgs, out: &Path) -> Result<i32> {
    let panel_path = args.panel.clone().ok_or_else(|| anyhow!("fit needs --panel"))?;
    let weights_path = args.weights.clone().ok_or_else(|| anyhow!("fit needs --weights"))?;
    let mut outputs = Outputs::new(out, &[&panel_path, &weights_path])?;
    let delimiter = args.delimiter.unwrap_or(',');
    if !delimiter.is_ascii() {
        bail!("delimiter must be a single ASCII character");
    }
    let schema = PanelSchema {
        location: args.location_col.clone().unwrap_or_else(|| "location".into()),
        variable: args.variable_col.clone().unwrap_or_else(|| "variable".into()),
        time: args.time_col.clone().unwrap_or_else(|| "time".into()),
        value: args.value_col.clone().unwrap_or_else(|| "value".into()),
        delimiter: delimiter as u8,
    };
    let ingest = IngestOptions {
        jitter_sd: args.jitter_sd.unwrap_or(1e-4),
        jitter_seed: args.jitter_seed.unwrap_or(0),
        ..IngestOptions::default()
    };
    let panel = if args.prices {
        let records = load_panel(&panel_path, &schema).with_context(|| format!("reading {}", panel_path.display()))?;
        to_returns(&records, &ingest)?
    } else {
        read_panel(&panel_path, &schema).with_context(|| format!("reading {}", panel_path.display()))?
    };
    let w = load_weights(&weights_path)?;
    if w.n() != panel.dims.n {
        bail!("weights are {0}x{0} but the panel has {1} locations", w.n(), panel.dims.n);
    }
    if args.prices {
        write_panel(&panel, outputs.path("returns.csv")?, Some(&ingest))?;
        outputs.written.push("returns.csv.manifest.json".into());
    }

    let dist = ErrorDist::parse(args.dist.as_deref().unwrap_or("normal"))?;
    let mode = match args.a_mode.as_deref().unwrap_or("constant") {
        "constant" => AMode::ConstantAcrossSpace,
        "free" => AMode::FreePerLocation,
        other => bail!("unknown intercept mode '{other}' (expected constant or free)"),
    };
    let opts = FitOptions {
        max_iterations: args.max_iter.unwrap_or(500),
        multistart_count: args.multistart.unwrap_or(0),
        seed: args.seed.unwrap_or(0),
        sigma2_u: args.sigma2u,
        ..FitOptions::default()
    };
    let result = fit(&panel, &w, &dist, mode, &opts)?;
    let assumptions = validate_assumptions(&panel, &w, &result);
    let markers = if args.conventional { Markers::CONVENTIONAL } else { Markers::TABLE };
    let document = fit_document(&result, &panel, Some(&assumptions), markers);
    outputs.write("fit.txt", &document)?;
    outputs.write("fit.csv", &fit_csv(&result, &panel, markers))?;
    print!("{document}");

    let code = if result.converged { EXIT_OK } else { EXIT_NOT_CONVERGED };
    if code != EXIT_OK {
        eprintln!("warning: optimiser did not converge after {} iterations", result.iterations);
    }
    let details = json!({
        "dims": { "n": panel.dims.n, "p": panel.dims.p, "t_len": panel.dims.t_len },
        "sigma2_u": result.params.sigma2_u,
        "error_dist": dist.label(),
        "log_likelihood": result.log_lik,
        "converged": result.converged,
        "iterations": result.iterations,
        "gradient_norm": result.gradient_norm,
        "spectral_radius": result.spectral_radius_at_solution,
        "theta": result.theta.as_slice(),
        "std_errors": result.std_errors,
        "assumptions": assumptions,
    });
    outputs.manifest("fit", &args, details, code)?;
    Ok(code)
}

fn parse_sizes(s: &str) -> Result<Vec<McSize>> {
    s.split(',')
        .map(|item| {
            let parts: Vec<&str> = item.trim().split(['x', 'X']).collect();
            let [r, c, t] = parts[..] else { bail!("size '{item}' is not of the form ROWSxCOLSxT") };
            let num = |v: &str| v.trim().parse::<usize>().with_context(|| format!("bad number in size '{item}'"));
            Ok(McSize { rows: num(r)?, cols: num(c)?, t_len: num(t)? })
        })
        .collect()
}

fn designs(args: &McArgs) -> Result<Vec<McDesign>> {
    let mut base: Vec<McDesign> = if let Some(path) = &args.design {
        let text = fs::read_to_string(path).with_context(|| format!("reading design {}", path.display()))?;
        vec![toml::from_str(&text).with_context(|| format!("parsing design {}", path.display()))?]
    } else if args.paper_ladder {
        [BuiltinModel::A, BuiltinModel::B, BuiltinModel::C].into_iter().map(builtin_design).collect()
    } else {
        vec![builtin_design(args.model.as_deref().unwrap_or("A").parse()?)]
    };
    for d in &mut base {
        if let Some(dist) = &args.dist {
            d.error_dists = dist.split(',').map(|s| s.trim().to_string()).collect();
        }
        if let Some(reps) = args.reps {
            d.replications = reps;
        }
        if let Some(seed) = args.seed {
            d.seed = seed;
        }
        if let Some(sizes) = &args.sizes {
            d.sizes = parse_sizes(sizes)?;
        }
    }
    Ok(base)
}

pub fn mc_cmd(args: McArgs, out: &Path) -> Result<i32> {
    let inputs: Vec<&PathBuf> = args.design.iter().collect();
    let mut outputs = Outputs::new(out, &inputs)?;
    let designs = designs(&args)?;
    for d in &designs {
        d.validate().map_err(|e| anyhow!("design '{}' is invalid: {e}", d.model_id))?;
    }
    let workers = args.workers.unwrap_or(1).max(1);
    let mut reports = Vec::new();
    for d in &designs {
        reports.push(run_design(d, workers)?);
    }
    let report = McReport::merge(reports)?;
    let text = emit_tables(&report, TableFormat::AlignedText);
    outputs.write("mc_tables.txt", &text)?;
    outputs.write("mc_tables.csv", &emit_tables(&report, TableFormat::Csv))?;
    let stored = if args.raw { report.clone() } else { report.without_raw() };
    outputs.write("mc_report.json", &serde_json::to_string_pretty(&stored)?)?;
    print!("{text}");
    for c in report.cells.iter().filter(|c| c.flagged) {
        eprintln!(
            "warning: model {} ({}) n = {}, T = {}: {} of {} replications failed",
            c.model_id, c.error_dist, c.n, c.t_len, c.failures, c.replications
        );
    }
    outputs.manifest("mc", &args, json!({ "designs": designs, "workers": workers }), EXIT_OK)?;
    Ok(EXIT_OK)
}
