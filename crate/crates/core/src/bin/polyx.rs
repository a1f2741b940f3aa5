use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use polyx::bench::{run_benchmark_with, BenchConfig, BenchMode, GeneratorModel};
use polyx::io::{self, Dtype, StoredDensity};
use polyx::unmix::{rmse, run_unmix, ClassifierKind, UnmixConfig, UnmixMode};
use polyx::{MinNormSolver, PolyxError, Result, SolverConfig};

#[derive(Parser)]
#[command(name = "polyx", version, about = "Nearest points in polyhedra and polyhedral density maps")]
struct Cli {
    /// Worker threads for pixel-parallel loops (POLYX_THREADS overrides).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Nearest point of a polyhedron and signed distance to its frontier.
    Minnorm {
        #[arg(long)]
        polyhedron: PathBuf,
        /// Query point, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Minimum H-description of a polyhedron file.
    Reduce {
        #[arg(long)]
        polyhedron: PathBuf,
        /// Keep every halfspace whose boundary touches the polyhedron instead.
        #[arg(long)]
        support_only: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact solver against the ADMM baseline on random polyhedra.
    Bench(BenchArgs),
    /// Abundance or probability maps of a spectral image.
    Unmix(UnmixArgs),
    /// Root mean squared error between two pixel x class matrices.
    Rmse {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        permute: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    FixedN,
    NEqK,
}

#[derive(Clone, Copy, ValueEnum)]
enum GeneratorArg {
    Gaussian,
    UnitSphere,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Values of k: `a..b` (inclusive), `a..b:step` or a comma list.
    #[arg(long, default_value = "1..100")]
    k: String,
    /// Dimension in fixed-n mode.
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Per-solve time budget of the exact solver, in seconds.
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    generator: GeneratorArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierArg {
    Kmeans,
    GmmSvm,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnmixModeArg {
    Abundance,
    Probability,
}

#[derive(Clone, Copy, ValueEnum)]
enum DtypeArg {
    F32,
    F64,
}

#[derive(Args)]
struct UnmixArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long, value_enum)]
    classifier: ClassifierArg,
    #[arg(long)]
    classes: usize,
    #[arg(long, value_enum)]
    mode: UnmixModeArg,
    /// First seed; run i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long)]
    basis_change: bool,
    #[arg(long)]
    clip_abundances: bool,
    /// GMM training subsample ratio.
    #[arg(long, default_value_t = 0.2)]
    subsample: f64,
    /// Ground-truth abundances (image header, density header or CSV).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Also write one 8-bit PGM per class.
    #[arg(long)]
    pgm: bool,
    #[arg(long, value_enum, default_value = "f32")]
    dtype: DtypeArg,
    #[arg(long)]
    out: PathBuf,
}

fn parse_k_values(text: &str) -> Result<Vec<usize>> {
    let bad = || PolyxError::InvalidInput(format!("bad k specification {text:?}"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    if let Some((lo, rest)) = text.split_once("..") {
        let (hi, step) = match rest.split_once(':') {
            Some((hi, step)) => (num(hi)?, num(step)?),
            None => (num(rest)?, 1),
        };
        let lo = num(lo)?;
        if step == 0 || lo > hi {
            return Err(bad());
        }
        Ok((lo..=hi).step_by(step).collect())
    } else {
        text.split(',').map(num).collect()
    }
}

fn configure_threads(flag: Option<usize>) -> Result<usize> {
    let env = std::env::var("POLYX_THREADS").ok();
    let n = match env {
        Some(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| PolyxError::InvalidInput(format!("POLYX_THREADS={v:?} is not a count")))?,
        None => flag.unwrap_or(0),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| PolyxError::InvalidInput(e.to_string()))?;
    Ok(rayon::current_num_threads())
}

fn print_json(value: &impl Serialize) -> Result<()> {
    println!("{}", io::to_json_pretty(value)?);
    Ok(())
}

fn cmd_minnorm(polyhedron: &Path, point: &str, tol: f64) -> Result<()> {
    let p = io::read_polyhedron(polyhedron)?;
    let x = io::parse_point(point)?;
    let solver = MinNormSolver::new(SolverConfig {
        tol,
        ..SolverConfig::default()
    });
    print_json(&solver.solve(&p, &x)?)
}

fn cmd_reduce(polyhedron: &Path, support_only: bool, out: Option<&Path>) -> Result<()> {
    let p = io::read_polyhedron(polyhedron)?;
    let kept = if support_only {
        p.support_indices()?
    } else {
        p.min_h_indices()?
    };
    eprintln!("kept {} of {} halfspaces: {:?}", kept.len(), p.len(), kept);
    let reduced = p.select(&kept)?;
    match out {
        Some(path) => io::write_polyhedron(path, &reduced),
        None => {
            print!("{}", io::polyhedron_to_json(&reduced));
            Ok(())
        }
    }
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    if !(a.timeout > 0.0 && a.timeout.is_finite()) {
        return Err(PolyxError::InvalidInput("timeout must be positive".into()));
    }
    let mode = match a.mode {
        ModeArg::FixedN => BenchMode::FixedN,
        ModeArg::NEqK => BenchMode::NEqK,
    };
    let mut cfg = BenchConfig::new(mode, parse_k_values(&a.k)?);
    cfg.n_fixed = a.n;
    cfg.reps = a.reps;
    cfg.seed = a.seed;
    cfg.time_budget_per_solve = Duration::from_secs_f64(a.timeout);
    cfg.model = match a.generator {
        GeneratorArg::Gaussian => GeneratorModel::Gaussian,
        GeneratorArg::UnitSphere => GeneratorModel::UnitSphere,
    };
    let table = run_benchmark_with(&cfg, |s| {
        eprintln!(
            "k={:<4} n={:<4} exact={:>12.0}ns approx={:>12.0}ns error={:.3e} (sd {:.3e}) truncated={}",
            s.k, s.n, s.mean_exact_ns, s.mean_approx_ns, s.mean_error, s.std_error, s.truncated
        );
    })?;
    let file = std::fs::File::create(&a.out).map_err(|e| PolyxError::io(&a.out, e))?;
    table.write_csv(std::io::BufWriter::new(file))?;
    let (mean, sd) = table.error_stats();
    print_json(&json!({
        "mode": mode.as_str(),
        "generator": cfg.model.as_str(),
        "rows": table.records.len(),
        "mean_error": mean,
        "std_error": sd,
        "out": a.out,
    }))
}

#[derive(Serialize)]
struct RunEntry {
    seed: u64,
    dir: String,
    fit_ms: f64,
    distances_ms: f64,
    density_ms: f64,
    total_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    endmember_pixels: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    permutation: Option<Vec<usize>>,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn cmd_unmix(a: &UnmixArgs, threads: usize) -> Result<()> {
    if a.runs == 0 {
        return Err(PolyxError::InvalidInput("runs must be at least 1".into()));
    }
    let img = io::load_image(&a.image)?;
    let truth = a.truth.as_deref().map(io::load_matrix).transpose()?;
    let classifier = match a.classifier {
        ClassifierArg::Kmeans => ClassifierKind::Kmeans,
        ClassifierArg::GmmSvm => ClassifierKind::GmmSvm,
    };
    let mode = match a.mode {
        UnmixModeArg::Abundance => UnmixMode::Abundance,
        UnmixModeArg::Probability => UnmixMode::Probability,
    };
    let dtype = match a.dtype {
        DtypeArg::F32 => Dtype::F32,
        DtypeArg::F64 => Dtype::F64,
    };
    let mut cfg = UnmixConfig::new(classifier, a.classes, mode);
    cfg.alpha = a.alpha;
    cfg.basis_change = a.basis_change;
    cfg.clip_abundances = a.clip_abundances;
    cfg.gmm.subsample_ratio = a.subsample;

    std::fs::create_dir_all(&a.out).map_err(|e| PolyxError::io(&a.out, e))?;
    let stem = match mode {
        UnmixMode::Abundance => "abundance",
        UnmixMode::Probability => "probability",
    };
    let mut entries = Vec::with_capacity(a.runs);
    let mut rmse_rows = Vec::new();
    for i in 0..a.runs {
        let seed = a.seed.wrapping_add(i as u64);
        let started = Instant::now();
        let run = run_unmix(&img, &cfg, seed)?;
        let total = started.elapsed();
        let (dir_name, dir) = if a.runs == 1 {
            (".".to_string(), a.out.clone())
        } else {
            let name = format!("run_{i:03}");
            (name.clone(), a.out.join(name))
        };
        std::fs::create_dir_all(&dir).map_err(|e| PolyxError::io(&dir, e))?;
        let stored = StoredDensity {
            width: img.width(),
            height: img.height(),
            map: run.densities,
        };
        io::save_density(&dir, stem, &stored, dtype)?;
        if a.pgm {
            for c in 0..stored.map.classes() {
                io::write_pgm(&dir.join(format!("{stem}_class{c}.pgm")), &stored, c)?;
            }
        }
        if let Some(m) = &run.endmembers {
            let header: Vec<String> = (0..m.spectra.cols()).map(|b| format!("band_{b}")).collect();
            io::write_csv_matrix(&dir.join("endmembers.csv"), &m.spectra, Some(&header))?;
        }
        io::write_json(&dir.join("partition.json"), &run.partition)?;
        let scored = truth
            .as_ref()
            .map(|t| rmse(&stored.map.values, t, true))
            .transpose()?;
        if let Some((e, perm)) = &scored {
            rmse_rows.push(format!(
                "{i},{seed},{e:e},{}",
                perm.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
            ));
            eprintln!("run {i} seed {seed}: rmse {e:.4} in {:.2}s", total.as_secs_f64());
        } else {
            eprintln!("run {i} seed {seed}: {:.2}s", total.as_secs_f64());
        }
        entries.push(RunEntry {
            seed,
            dir: dir_name,
            fit_ms: ms(run.times.fit),
            distances_ms: ms(run.times.distances),
            density_ms: ms(run.times.density),
            total_ms: ms(total),
            endmember_pixels: run.endmembers.as_ref().map(|m| m.source_pixel.clone()),
            rmse: scored.as_ref().map(|s| s.0),
            permutation: scored.map(|s| s.1),
        });
    }
    let mut summary = serde_json::Map::new();
    if !rmse_rows.is_empty() {
        let path = a.out.join("rmse.csv");
        let text = format!("run,seed,rmse,permutation\n{}\n", rmse_rows.join("\n"));
        std::fs::write(&path, text).map_err(|e| PolyxError::io(&path, e))?;
        let v: Vec<f64> = entries.iter().filter_map(|e| e.rmse).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        summary.insert("mean_rmse".into(), json!(mean));
        summary.insert("std_rmse".into(), json!(sd));
    }
    let manifest = json!({
        "tool": "polyx",
        "version": env!("CARGO_PKG_VERSION"),
        "command": std::env::args().collect::<Vec<_>>(),
        "image": a.image,
        "width": img.width(),
        "height": img.height(),
        "bands": img.bands(),
        "truth": a.truth,
        "config": cfg,
        "dtype": dtype.as_str(),
        "threads": threads,
        "seeds": entries.iter().map(|e| e.seed).collect::<Vec<_>>(),
        "runs": entries,
        "summary": summary,
    });
    io::write_json(&a.out.join("manifest.json"), &manifest)?;
    print_json(&json!({ "out": a.out, "runs": a.runs, "summary": manifest["summary"] }))
}

fn cmd_rmse(est: &Path, truth: &Path, permute: bool) -> Result<()> {
    let (e, perm) = rmse(&io::load_matrix(est)?, &io::load_matrix(truth)?, permute)?;
    print_json(&json!({ "rmse": e, "permutation": perm }))
}

fn run(cli: Cli) -> Result<()> {
    let threads = configure_threads(cli.threads)?;
    match &cli.command {
        Command::Minnorm { polyhedron, point, tol } => cmd_minnorm(polyhedron, point, *tol),
        Command::Reduce {
            polyhedron,
            support_only,
            out,
        } => cmd_reduce(polyhedron, *support_only, out.as_deref()),
        Command::Bench(a) => cmd_bench(a),
        Command::Unmix(a) => cmd_unmix(a, threads),
        Command::Rmse { est, truth, permute } => cmd_rmse(est, truth, *permute),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = json!({
                "error": {
                    "category": e.category(),
                    "message": e.to_string(),
                    "exit_code": e.exit_code(),
                }
            });
            eprintln!("{report}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
