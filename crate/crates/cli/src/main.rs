use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use asfcov::benchmarks::{convex_projection, spice, toeplitz_psd, ProjectionOptions, SpiceOptions};
use asfcov::channel::{
    asf_covariance, draw_samples, noise_power_for_snr, random_mixed_asf, read_asf_file, sample_covariance_h,
    sample_covariance_y, two_spike_two_rect_scene, write_asf_file, Asf, MixedAsfParams, SampleBatch,
};
use asfcov::dictionary::{assemble_design, Dictionary};
use asfcov::harness::{run_experiment, BatchContext, DictionaryKind, ExperimentConfig, Method, PipelineSettings};
use asfcov::linalg::cmx::{read_cmx_file, write_cmx_file};
use asfcov::linalg::ComplexMatrix;
use asfcov::metrics::{err_frobenius, err_nmse, power_efficiency};
use asfcov::spikes::{detect_spikes, MusicOptions};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "asfcov", version, about = "Channel covariance estimation from few uplink snapshots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// CSV destination; overrides the config `output`, `-` for stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the true covariance of a scene at carrier ratio `nu`.
    Truth {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(short = 'M', long = "M")]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        nu: f64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Draw a noisy snapshot batch from a scene.
    Simulate {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(short = 'M', long = "M")]
        m: usize,
        #[arg(short = 'N', long = "N")]
        n: usize,
        #[arg(long, default_value_t = 10.0)]
        snr_db: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
        /// Also write the scene itself as TOML.
        #[arg(long)]
        save_asf: Option<PathBuf>,
    },
    /// Detect spikes (MDL order, MUSIC locations) and print them as CSV.
    Spikes {
        /// A snapshot batch, or a CMX1 sample covariance together with `--n`.
        input: PathBuf,
        #[arg(short = 'N', long = "N")]
        n: Option<usize>,
        #[arg(long, default_value_t = 4096)]
        grid_size: usize,
        #[arg(long)]
        no_refine: bool,
        /// Write `xi,eta` pairs of the pseudo-spectrum here.
        #[arg(long)]
        dump_spectrum: Option<PathBuf>,
    },
    /// Fit the parametric model to a snapshot batch.
    Estimate {
        batch: PathBuf,
        #[arg(long, value_enum)]
        method: EstimateMethod,
        #[arg(long = "dict", value_enum, default_value_t = DictArg::Dirac)]
        dict: DictArg,
        #[arg(long = "G")]
        g: usize,
        #[arg(long)]
        no_music: bool,
        #[command(flatten)]
        common: OutputArgs,
    },
    /// Run a competitor estimator on a snapshot batch.
    Benchmark {
        batch: PathBuf,
        #[arg(long, value_enum)]
        method: BenchmarkMethod,
        /// Dirac grid size for SPICE; `2M` when absent.
        #[arg(long = "G")]
        g: Option<usize>,
        #[command(flatten)]
        common: OutputArgs,
    },
    /// Compare an estimate with the true covariance; prints `metric,value`.
    Metrics {
        truth: PathBuf,
        estimate: PathBuf,
        #[arg(long)]
        n0: f64,
        /// Power-efficiency subspace dimension; `max(1, M/8)` when absent.
        #[arg(short, long)]
        p: Option<usize>,
    },
}

#[derive(Args)]
struct SceneArgs {
    /// Scene file in TOML.
    #[arg(long, conflicts_with_all = ["builtin", "random"])]
    asf: Option<PathBuf>,
    /// Built-in two-rect, two-spike scene.
    #[arg(long)]
    builtin: bool,
    /// Seed of a synthetic mixed scene with default generator ranges.
    #[arg(long)]
    random: Option<u64>,
}

impl SceneArgs {
    fn load(&self) -> Result<Asf> {
        Ok(match (&self.asf, self.builtin, self.random) {
            (Some(p), false, None) => read_asf_file(p).with_context(|| format!("reading {}", p.display()))?,
            (None, true, None) => two_spike_two_rect_scene(),
            (None, false, Some(s)) => random_mixed_asf(&MixedAsfParams::default(), s)?,
            _ => bail!("give exactly one of --asf, --builtin, --random"),
        })
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Output prefix: writes `<prefix>.report.toml`, `<prefix>.ul.cmx` and,
    /// when available, `<prefix>.dl.cmx`.
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.9)]
    f_ul_ghz: f64,
    #[arg(long, default_value_t = 2.1)]
    f_dl_ghz: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimateMethod {
    Nnls,
    Qp,
    Em,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchmarkMethod {
    ToeplitzPsd,
    Spice,
    Projection,
}

#[derive(Clone, Copy, ValueEnum)]
enum DictArg {
    Dirac,
    Gauss,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn fmt_list(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", items.join(", "))
}

fn read_batch(path: &Path) -> Result<SampleBatch> {
    SampleBatch::read(path).with_context(|| format!("reading batch {}", path.display()))
}

fn write_outputs(out: &OutputArgs, report: &str, ul: &ComplexMatrix, dl: Option<&ComplexMatrix>, nu: f64) -> Result<()> {
    std::fs::write(with_suffix(&out.out, ".report.toml"), report)?;
    write_cmx_file(with_suffix(&out.out, ".ul.cmx"), ul, &["nu=1".to_string()])?;
    if let Some(dl) = dl {
        write_cmx_file(with_suffix(&out.out, ".dl.cmx"), dl, &[format!("nu={nu:?}")])?;
    }
    Ok(())
}

fn cmd_run(config: &Path, output: Option<PathBuf>) -> Result<ExitCode> {
    let cfg = ExperimentConfig::from_file(config).with_context(|| format!("loading {}", config.display()))?;
    let table = run_experiment(&cfg)?;
    match output.or(cfg.output.clone()) {
        Some(p) if p.as_os_str() != "-" => {
            table.write_csv_file(&p).with_context(|| format!("writing {}", p.display()))?;
            eprintln!("wrote {} rows to {}", table.rows.len(), p.display());
        }
        _ => table.write_csv(std::io::stdout().lock())?,
    }
    for ((method, n, g, nu, metric), (mean, count)) in table.summary() {
        eprintln!("{method:>14} N={n:<5} G={g:<5} nu={:<8.4} {metric:<5} mean={mean:.6} ({count} trials)", f64::from_bits(nu));
    }
    let failed = table.rows.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        eprintln!("{failed} rows failed");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_spikes(input: &Path, n: Option<usize>, grid_size: usize, refine: bool, dump: Option<PathBuf>) -> Result<()> {
    let (matrix, meta) = read_cmx_file(input).with_context(|| format!("reading {}", input.display()))?;
    let is_batch = meta.iter().any(|l| l.contains("N0="));
    let (sigma_y, n) = if is_batch {
        let batch = read_batch(input)?;
        (sample_covariance_y(&batch), n.unwrap_or(batch.n()))
    } else {
        let Some(n) = n else { bail!("a covariance input needs --N") };
        (matrix, n)
    };
    let opts = MusicOptions { grid_size, refine, keep_spectrum: dump.is_some() };
    let est = detect_spikes(&sigma_y, n, &opts)?;
    println!("kind,value");
    println!("order,{}", est.order);
    for x in &est.locations {
        println!("location,{x:?}");
    }
    if let Some(path) = dump {
        let mut text = String::from("xi,eta\n");
        if let Some((grid, eta)) = &est.pseudo_spectrum {
            for (x, e) in grid.iter().zip(eta) {
                let _ = writeln!(text, "{x:?},{e:?}");
            }
        }
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_estimate(batch: &Path, method: EstimateMethod, dict: DictArg, g: usize, no_music: bool, out: &OutputArgs) -> Result<()> {
    let batch = read_batch(batch)?;
    let nu = out.f_dl_ghz / out.f_ul_ghz;
    let kind = match dict {
        DictArg::Dirac => DictionaryKind::Dirac,
        DictArg::Gauss => DictionaryKind::Gauss,
    };
    let method = match (method, no_music) {
        (EstimateMethod::Nnls, false) => Method::Nnls,
        (EstimateMethod::Nnls, true) => Method::NnlsNoMusic,
        (EstimateMethod::Em, false) => Method::Em,
        (EstimateMethod::Em, true) => Method::EmNoMusic,
        (EstimateMethod::Qp, false) => Method::Qp,
        (EstimateMethod::Qp, true) => bail!("--no-music is available for nnls and em"),
    };
    if matches!(method, Method::Em | Method::EmNoMusic) && matches!(dict, DictArg::Gauss) {
        log::warn!("EM always fits a Dirac grid; --dict gauss is ignored");
    }
    let settings = PipelineSettings::new(kind, g, nu);
    let res = BatchContext::new(&batch).run(&settings, method)?;
    let spikes = res.spikes.clone().unwrap_or_else(asfcov::spikes::SpikeEstimate::none);
    let mut report = String::new();
    let _ = writeln!(report, "method = \"{method}\"");
    let _ = writeln!(report, "dictionary = \"{}\"", if matches!(dict, DictArg::Gauss) { "gauss" } else { "dirac" });
    let _ = writeln!(report, "G = {g}");
    let _ = writeln!(report, "M = {}\nN = {}", batch.m(), batch.n());
    let _ = writeln!(report, "nu_dl = {nu:?}");
    let _ = writeln!(report, "spike_order = {}", spikes.order);
    let _ = writeln!(report, "spike_locations = {}", fmt_list(&spikes.locations));
    let _ = writeln!(report, "iterations = {}\nconverged = {}", res.iterations, res.converged);
    let _ = writeln!(report, "u = {}", fmt_list(res.u.as_deref().unwrap_or(&[])));
    write_outputs(out, &report, &res.ul, res.dl.as_ref(), nu)?;
    println!("{method}: {} spikes, {} iterations, converged = {}", spikes.order, res.iterations, res.converged);
    Ok(())
}

fn cmd_benchmark(batch: &Path, method: BenchmarkMethod, g: Option<usize>, out: &OutputArgs) -> Result<()> {
    let batch = read_batch(batch)?;
    let nu = out.f_dl_ghz / out.f_ul_ghz;
    let sigma_h = sample_covariance_h(&batch);
    let rep = match method {
        BenchmarkMethod::ToeplitzPsd => toeplitz_psd(&sigma_h, 1e-8, 500)?,
        BenchmarkMethod::Projection => convex_projection(&sigma_h, &ProjectionOptions::default())?,
        BenchmarkMethod::Spice => {
            let sigma_y = sample_covariance_y(&batch);
            let g = g.unwrap_or(2 * batch.m());
            let system = assemble_design(std::sync::Arc::new(Dictionary::dirac(g)), &[], &sigma_y, 1.0)?;
            spice(&sigma_y, &system, batch.n(), &SpiceOptions::default())?
        }
    };
    let dl = rep.measure.as_ref().map(|m| m.covariance(batch.m(), nu)).transpose()?;
    let mut report = String::new();
    let _ = writeln!(report, "method = \"{}\"", rep.method);
    let _ = writeln!(report, "M = {}\nN = {}", batch.m(), batch.n());
    let _ = writeln!(report, "iterations = {}\nconverged = {}", rep.iterations, rep.converged);
    let _ = writeln!(report, "residual = {:?}", rep.residual);
    let flags: Vec<String> = rep.flags.iter().map(|f| format!("\"{f}\"")).collect();
    let _ = writeln!(report, "flags = [{}]", flags.join(", "));
    if dl.is_some() {
        let _ = writeln!(report, "nu_dl = {nu:?}");
    }
    write_outputs(out, &report, &rep.covariance, dl.as_ref(), nu)?;
    println!("{}: {} iterations, converged = {}", rep.method, rep.iterations, rep.converged);
    Ok(())
}

fn cmd_metrics(truth: &Path, estimate: &Path, n0: f64, p: Option<usize>) -> Result<()> {
    let (t, _) = read_cmx_file(truth).with_context(|| format!("reading {}", truth.display()))?;
    let (e, _) = read_cmx_file(estimate).with_context(|| format!("reading {}", estimate.display()))?;
    let p = p.unwrap_or((t.rows() / 8).max(1));
    println!("metric,value");
    println!("nf,{}", err_frobenius(&t, &e)?);
    println!("nmse,{}", err_nmse(&t, &e, n0)?);
    println!("pe,{}", power_efficiency(&t, &e, p)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, output } => cmd_run(&config, output),
        Command::Truth { scene, m, nu, out } => (|| {
            let asf = scene.load()?;
            let cov = asf_covariance(&asf, m, nu)?;
            write_cmx_file(&out, &cov, &[format!("nu={nu:?}")])?;
            Ok(ExitCode::SUCCESS)
        })(),
        Command::Simulate { scene, m, n, snr_db, seed, out, save_asf } => (|| {
            let asf = scene.load()?;
            let cov = asf_covariance(&asf, m, 1.0)?;
            let n0 = noise_power_for_snr(asf.total_mass(), snr_db);
            draw_samples(&cov, n0, n, seed)?.write(&out)?;
            if let Some(p) = save_asf {
                write_asf_file(p, &asf)?;
            }
            Ok(ExitCode::SUCCESS)
        })(),
        Command::Spikes { input, n, grid_size, no_refine, dump_spectrum } => {
            cmd_spikes(&input, n, grid_size, !no_refine, dump_spectrum).map(|_| ExitCode::SUCCESS)
        }
        Command::Estimate { batch, method, dict, g, no_music, common } => {
            cmd_estimate(&batch, method, dict, g, no_music, &common).map(|_| ExitCode::SUCCESS)
        }
        Command::Benchmark { batch, method, g, common } => {
            cmd_benchmark(&batch, method, g, &common).map(|_| ExitCode::SUCCESS)
        }
        Command::Metrics { truth, estimate, n0, p } => cmd_metrics(&truth, &estimate, n0, p).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
