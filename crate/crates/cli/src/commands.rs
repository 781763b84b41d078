use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use spatial_bss::dataio::{
    self, read_bundle, read_matrix_csv, read_table_csv, write_json, write_matrix_csv,
    write_table_csv, RunMeta, SCORES_FILE,
};
use spatial_bss::kernels::decile_boundaries;
use spatial_bss::metrics::{
    abs_corr_match, align_columns, d_index, gamma_diagnostics, gap_report, suggest_blocks,
    trace_summary, BlockStructure,
};
use spatial_bss::montecarlo::{
    run_study, summarize, write_study_csv, write_summary_csv, StudyGrid, StudyOptions,
};
use spatial_bss::{
    estimate, gen_dataset, ic_scores, Error, FieldSample, KernelBank, Matrix, Result,
    ScenarioConfig, DEFAULT_KERNELS,
};

use crate::args::{DiagnoseArgs, EstimateArgs, ReplicateArgs, SimulateArgs};

pub const THREADS_ENV: &str = "SPATIAL_BSS_THREADS";

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serialises")
}

/// JSON cannot hold ∞; an unbounded last ring is written as `null`.
fn boundaries_value(bank: &KernelBank) -> Value {
    Value::Array(
        bank.boundaries()
            .iter()
            .map(|&c| if c.is_finite() { json!(c) } else { Value::Null })
            .collect(),
    )
}

fn hcat(left: &Matrix, right: &Matrix) -> Matrix {
    Matrix::from_fn(left.rows(), left.cols() + right.cols(), |i, j| {
        if j < left.cols() {
            left[(i, j)]
        } else {
            right[(i, j - left.cols())]
        }
    })
}

fn coords_matrix(data: &FieldSample) -> Matrix {
    let locs = data.locs();
    Matrix::from_vec(locs.len(), locs.dim(), locs.coords().to_vec()).expect("n × d coordinates")
}

fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::from_json(&read_text(path)?)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut cfg = load_scenario(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(p) = args.p {
        cfg.p = p;
    }
    cfg.validate()?;
    let sim = gen_dataset(&cfg)?;
    create_dir(&args.out)?;

    let coords = coords_matrix(&sim.data);
    let names = |prefix: &str| -> Vec<String> {
        ["x", "y"]
            .iter()
            .map(|s| s.to_string())
            .chain((1..=cfg.p).map(|j| format!("{prefix}{j}")))
            .collect()
    };
    let files = ["data.csv", "truth_omega.csv", "truth_z.csv", "meta.json"];
    let path = |f: &str| args.out.join(f);
    write_table_csv(&path(files[0]), &names("X"), &hcat(&coords, sim.data.values()))?;
    write_matrix_csv(&path(files[1]), &sim.truth_omega)?;
    write_table_csv(&path(files[2]), &names("Z"), &hcat(&coords, &sim.truth_z))?;

    let mut meta = RunMeta::new("simulate", Some(cfg.seed), to_value(&cfg));
    meta.extra = json!({
        "n": cfg.n,
        "p": cfg.p,
        "matern_used": sim.matern_used,
        "cholesky_jitter": sim.jitter,
    });
    meta.files = files.iter().map(|s| s.to_string()).collect();
    write_json(&path(files[3]), &meta)?;
    println!("wrote {} sites x {} fields to {}", cfg.n, cfg.p, args.out.display());
    Ok(())
}

/// Options of `estimate` that may also come from `--config`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single_kernel: Option<usize>,
    #[serde(default)]
    pub ilr: bool,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl EstimateConfig {
    fn resolve(args: &EstimateArgs) -> Result<Self> {
        let file: EstimateConfig = match &args.config {
            Some(path) => serde_json::from_str(&read_text(path)?)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?,
            None => EstimateConfig::default(),
        };
        let (data, simulate) = if args.data.is_some() || args.simulate.is_some() {
            (args.data.clone(), args.simulate.clone())
        } else {
            (file.data, file.simulate)
        };
        let cfg = EstimateConfig {
            data,
            simulate,
            coords: args.coords.clone().or(file.coords),
            values: args.values.clone().or(file.values),
            kernels: Some(args.kernels.or(file.kernels).unwrap_or(DEFAULT_KERNELS)),
            single_kernel: args.single_kernel.or(file.single_kernel),
            ilr: args.ilr || file.ilr,
            standardize: args.standardize || file.standardize,
            seed: args.seed.or(file.seed),
        };
        match (&cfg.data, &cfg.simulate) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(
                    "data: give either a CSV file or a simulation scenario, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::InvalidConfig(
                    "data: an input is required (--data or --simulate)".into(),
                ))
            }
            _ => {}
        }
        let k = cfg.kernels.unwrap();
        if k == 0 {
            return Err(Error::InvalidConfig("kernels: must be at least 1".into()));
        }
        if let Some(h) = cfg.single_kernel {
            if h == 0 || h > k {
                return Err(Error::InvalidConfig(format!(
                    "single_kernel: {h} is outside 1..={k}"
                )));
            }
        }
        if cfg.seed.is_some() && cfg.simulate.is_none() {
            return Err(Error::InvalidConfig("seed: only applies to --simulate".into()));
        }
        Ok(cfg)
    }
}

struct Input {
    data: FieldSample,
    coord_names: Vec<String>,
    value_names: Vec<String>,
    seed: Option<u64>,
    scenario: Option<ScenarioConfig>,
}

fn load_input(cfg: &EstimateConfig) -> Result<Input> {
    if let Some(path) = &cfg.simulate {
        let mut scenario = load_scenario(path)?;
        if let Some(seed) = cfg.seed {
            scenario.seed = seed;
        }
        let sim = gen_dataset(&scenario)?;
        return Ok(Input {
            data: sim.data,
            coord_names: vec!["x".into(), "y".into()],
            value_names: (1..=scenario.p).map(|j| format!("X{j}")).collect(),
            seed: Some(scenario.seed),
            scenario: Some(scenario),
        });
    }
    let path = cfg.data.as_ref().expect("resolved input");
    let coord_names = cfg.coords.clone().unwrap_or_else(|| vec!["x".into(), "y".into()]);
    let value_names = match &cfg.values {
        Some(v) => v.clone(),
        None => {
            dataio::read_header(path)?.into_iter().filter(|h| !coord_names.contains(h)).collect()
        }
    };
    let c: Vec<&str> = coord_names.iter().map(String::as_str).collect();
    let v: Vec<&str> = value_names.iter().map(String::as_str).collect();
    let table = dataio::read_csv(path, &c, &v)?;
    Ok(Input {
        data: table.to_sample()?,
        coord_names,
        value_names,
        seed: None,
        scenario: None,
    })
}

pub fn estimate_cmd(args: &EstimateArgs) -> Result<()> {
    let cfg = EstimateConfig::resolve(args)?;
    let mut input = load_input(&cfg)?;
    if cfg.ilr {
        let values = dataio::ilr_transform(input.data.values())?;
        input.value_names = (1..=values.cols()).map(|j| format!("ilr{j}")).collect();
        input.data = FieldSample::new(input.data.locs().clone(), values)?;
    }
    if cfg.standardize {
        input.data = dataio::standardize(&input.data)?;
    }
    let k = cfg.kernels.unwrap();
    let full_bank = decile_boundaries(input.data.locs(), k)?;
    let bank = match cfg.single_kernel {
        Some(h) => full_bank.single(h)?,
        None => full_bank,
    };
    let est = estimate(&input.data, &bank)?;
    let scores = ic_scores(&est, &input.data)?;

    let mut meta = RunMeta::new("estimate", input.seed, to_value(&cfg));
    meta.extra = json!({
        "n": input.data.n(),
        "p": input.data.p(),
        "value_columns": input.value_names,
        "kernel_boundaries": boundaries_value(&est.kernel_bank),
        "degenerate_eigenvalues": est.degenerate,
        "scenario": input.scenario,
    });
    let bundle = dataio::ResultBundle::new(&est, &input.data, scores, input.coord_names, meta)?;
    dataio::write_results(&bundle, &args.out)?;
    if est.degenerate {
        eprintln!("warning: W has (nearly) tied eigenvalues; the matching components are not identified");
    }
    println!(
        "estimated {} components from {} sites with {} kernel(s); results in {}",
        est.p(),
        input.data.n(),
        est.kernel_bank.k(),
        args.out.display()
    );
    Ok(())
}

/// Worker count: the request (or all cores), capped by `SPATIAL_BSS_THREADS`.
pub fn resolve_workers(requested: Option<usize>) -> Result<usize> {
    let cap = match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(v) if v >= 1 => Some(v),
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "{THREADS_ENV}: expected a positive integer, got \"{s}\""
                )))
            }
        },
        Err(_) => None,
    };
    if requested == Some(0) {
        return Err(Error::InvalidConfig("workers: must be at least 1".into()));
    }
    let cores = std::thread::available_parallelism().map_or(1, |c| c.get());
    let w = requested.unwrap_or(cores);
    Ok(cap.map_or(w, |c| w.min(c)))
}

pub fn replicate(args: &ReplicateArgs) -> Result<()> {
    let mut grid = match (&args.grid, args.full) {
        (Some(path), _) => StudyGrid::from_json(&read_text(path)?)?,
        (None, true) => StudyGrid::full(),
        (None, false) => StudyGrid::desk(),
    };
    if let Some(seed) = args.seed {
        grid.base_seed = seed;
    }
    if let Some(r) = args.replications {
        grid.replications = r;
    }
    grid.validate()?;
    let workers = resolve_workers(args.workers)?;
    create_dir(&args.out)?;

    let scale = if args.full {
        "full"
    } else if args.grid.is_some() {
        "custom"
    } else {
        "desk"
    };
    let mut meta = RunMeta::new("replicate", Some(grid.base_seed), to_value(&grid));
    meta.extra = json!({ "scale": scale, "rows": grid.row_count(), "dry_run": args.dry_run });
    if args.dry_run {
        meta.files = vec!["meta.json".into()];
        write_json(&args.out.join("meta.json"), &meta)?;
        println!(
            "{scale} grid: {} rows ({} scenarios x {} sizes x {} replications x {} methods); nothing run",
            grid.row_count(),
            grid.scenarios.len(),
            grid.n_values.len(),
            grid.replications,
            grid.methods.len()
        );
        return Ok(());
    }

    let rows = run_study(
        &grid,
        &StudyOptions {
            workers,
            record_time: args.record_time,
        },
    )?;
    let cells = summarize(&rows);
    write_study_csv(&args.out.join("study.csv"), &rows)?;
    write_summary_csv(&args.out.join("summary.csv"), &cells)?;
    meta.files = vec!["study.csv".into(), "summary.csv".into(), "meta.json".into()];
    write_json(&args.out.join("meta.json"), &meta)?;

    let failures: usize = cells.iter().map(|c| c.failures).sum();
    println!("{:<16} {:>6} {:<10} {:>9} {:>9}", "scenario", "n", "method", "median D", "failures");
    for c in &cells {
        let med = c.median.map_or("-".to_string(), |m| format!("{m:.4}"));
        println!(
            "{:<16} {:>6} {:<10} {:>9} {:>9}",
            c.scenario_id,
            c.n,
            c.method.to_string(),
            med,
            c.failures
        );
    }
    println!("{} rows, {failures} failed replicate(s); results in {}", rows.len(), args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct DiagnoseReport {
    p: usize,
    gaps: Vec<f64>,
    v_gap: Option<f64>,
    blocks: Option<Vec<usize>>,
    blocks_suggested: bool,
    trace_total: Option<f64>,
    trace_blocks: Option<Vec<f64>>,
    d_index: Option<f64>,
    gamma_block_norms: Option<Vec<Vec<f64>>>,
    gamma_diag_deviation: Option<Vec<f64>>,
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<()> {
    let bundle = read_bundle(&args.bundle)?;
    let p = bundle.lambda_hat.len();
    let report = gap_report(&bundle.lambda_hat)?;

    println!("eigenvalues of W ({p}):");
    for (i, l) in bundle.lambda_hat.iter().enumerate() {
        match i {
            0 => println!("  {:>3}  {l:>14.6e}", i + 1),
            _ => println!("  {:>3}  {l:>14.6e}  gap {:>12.6e}", i + 1, report.gaps[i - 1]),
        }
    }
    let mut out = DiagnoseReport {
        p,
        gaps: report.gaps.clone(),
        v_gap: report.v_gap,
        blocks: None,
        blocks_suggested: false,
        trace_total: None,
        trace_blocks: None,
        d_index: None,
        gamma_block_norms: None,
        gamma_diag_deviation: None,
    };
    match report.v_gap {
        None => println!("no gaps: a single component"),
        Some(v) => println!("v_gap (smallest gap) = {v:.6e}"),
    }

    let blocks = match (&args.blocks, p) {
        (Some(cuts), _) => Some(BlockStructure::new(cuts.clone(), p)?),
        (None, 1) => None,
        (None, _) => {
            out.blocks_suggested = true;
            Some(suggest_blocks(&report, 2)?)
        }
    };
    if let Some(b) = &blocks {
        out.blocks = Some(b.cuts().to_vec());
        let tr = trace_summary(&bundle.omega_hat, b)?;
        let note = if out.blocks_suggested { " (split at the largest gap)" } else { "" };
        println!("blocks {:?}{note}", b.cuts());
        println!("tr(Omega_hat' Omega_hat) = {:.6}", tr.total);
        for (i, t) in tr.blocks.iter().enumerate() {
            println!("  block {} trace = {t:.6} ({:.1}%)", i + 1, 100.0 * t / tr.total);
        }
        out.trace_total = Some(tr.total);
        out.trace_blocks = Some(tr.blocks);
    }

    if let Some(path) = &args.truth {
        let omega = read_matrix_csv(path)?;
        if omega.rows() != p || omega.cols() != p {
            return Err(Error::DimensionMismatch(format!(
                "{}: {}x{} matrix for a bundle with p = {p}",
                path.display(),
                omega.rows(),
                omega.cols()
            )));
        }
        let d = d_index(&omega, &bundle.omega_hat)?;
        println!("D(Omega, Omega_hat) = {d:.6}");
        out.d_index = Some(d);
        let aligned = align_columns(&omega, &bundle.omega_hat)?;
        let b = match &blocks {
            Some(b) => b.clone(),
            None => BlockStructure::singletons(p)?,
        };
        let g = gamma_diagnostics(&omega, &aligned, &b)?;
        println!("block norms of Omega_hat^-1 Omega (columns aligned to the truth):");
        for row in &g.block_norms {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:10.4e}")).collect();
            println!("  {}", cells.join("  "));
        }
        let devs: Vec<String> = g.diag_deviation.iter().map(|v| format!("{v:.4e}")).collect();
        println!("diagonal block deviation from I: {}", devs.join(", "));
        out.gamma_block_norms = Some(g.block_norms);
        out.gamma_diag_deviation = Some(g.diag_deviation);
    }

    let corr = match &args.compare {
        Some(path) => Some(compare_scores(&args.bundle, path, p)?),
        None => None,
    };

    if let Some(dir) = &args.out {
        create_dir(dir)?;
        write_json(&dir.join("diagnose.json"), &out)?;
        if let Some(c) = &corr {
            write_matrix_csv(&dir.join("abs_corr.csv"), c)?;
        }
    }
    Ok(())
}

/// `|corr|` between the bundle's IC scores and the non-coordinate columns of
/// another score table.
fn compare_scores(bundle: &Path, other: &Path, p: usize) -> Result<Matrix> {
    let (header, scores) = read_table_csv(&bundle.join(SCORES_FILE))?;
    let d = header.len().checked_sub(p).ok_or_else(|| Error::Parse {
        path: bundle.join(SCORES_FILE),
        message: format!("expected at least {p} columns"),
    })?;
    let coord_names = &header[..d];
    let ics = scores.select_cols(&(d..header.len()).collect::<Vec<_>>());
    let (other_header, other_table) = read_table_csv(other)?;
    let keep: Vec<usize> = (0..other_header.len())
        .filter(|&j| !coord_names.contains(&other_header[j]))
        .collect();
    let other_scores = other_table.select_cols(&keep);
    let corr = abs_corr_match(&ics, &other_scores)?;
    println!("|correlation| of IC scores (rows) with {} (columns):", other.display());
    let names: Vec<&str> = keep.iter().map(|&j| other_header[j].as_str()).collect();
    println!("       {}", names.iter().map(|n| format!("{n:>8}")).collect::<String>());
    for i in 0..corr.rows() {
        let cells: String = corr.row(i).iter().map(|v| format!("{v:>8.3}")).collect();
        println!("  ic{:<3}{cells}", i + 1);
    }
    Ok(corr)
}
