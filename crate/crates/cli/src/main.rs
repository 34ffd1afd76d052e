use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use tomocouple::coupling::coupling_matrix;
use tomocouple::experiments::{
    emit_report, generate_dataset, parse_matrix, reference_image, run_matrix, shipped_config, DatasetPreset,
    MatrixOptions, PresetName, ResultsTable,
};
use tomocouple::fbp::{fbp_reconstruct, FilterKind};
use tomocouple::io::{read_sinogram_raw, write_image_pgm, write_image_raw, write_sinogram_raw};
use tomocouple::metrics::psnr;
use tomocouple::noise::{add_poisson_noise, add_poisson_noise_at, counts_per_unit};
use tomocouple::solvers::{poisson_weights, reconstruct, Algorithm};
use tomocouple::{reconstruction_circle_mask, Geometry, ProjectorKind, ProjectorPair, SeededRng};

/// Parallel-beam projector/backprojector coupling laboratory.
#[derive(Parser)]
#[command(name = "tomocouple", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for noise, audit vectors and noisy presets.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterize the Shepp-Logan phantom.
    Phantom {
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, default_value = "phantom.raw")]
        out: PathBuf,
        /// Also write a 16-bit PGM preview.
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
    /// Make a sinogram from a preset, or by projecting the phantom.
    Sinogram {
        /// Dataset preset (sl-full, sl-under, sl-noise, sl-uconstr, fig4a..c).
        #[arg(long, default_value = "sl-full")]
        preset: PresetName,
        /// Grid size the preset is scaled to.
        #[arg(long, default_value_t = 256)]
        size: usize,
        /// Override the view count.
        #[arg(long)]
        views: Option<usize>,
        /// Project the rasterized phantom with this kind instead.
        #[arg(long)]
        kind: Option<ProjectorKind>,
        #[arg(long, default_value = "sinogram.raw")]
        out: PathBuf,
    },
    /// Add Poisson noise to a sinogram.
    Noise {
        #[arg(long)]
        input: PathBuf,
        /// Standard deviation as a fraction of the reference mean.
        #[arg(long, default_value_t = 0.03)]
        sigma: f64,
        /// Mean that sets the noise level (default: the input's own mean).
        #[arg(long)]
        reference_mean: Option<f64>,
        #[arg(long, default_value = "noisy.raw")]
        out: PathBuf,
    },
    /// Inner-product coupling audit of all forward/adjoint pairings.
    Audit {
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, default_value_t = 402)]
        views: usize,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value = "coupling.csv")]
        out: PathBuf,
    },
    /// Filtered backprojection.
    Fbp {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "pd")]
        adjoint: ProjectorKind,
        #[arg(long, default_value = "ramp")]
        filter: FilterKind,
        #[arg(long, default_value = "fbp.raw")]
        out: PathBuf,
    },
    /// Iterative reconstruction with any forward/adjoint pairing.
    Recon(Recon),
    /// Run an experiment matrix file.
    Matrix {
        /// Matrix file, one block of `key=value` tokens per line.
        #[arg(long)]
        spec: PathBuf,
        /// Grid size the presets are scaled to.
        #[arg(long, default_value_t = 256)]
        size: usize,
        /// Also write thumbnails, convergence tables and the summary.
        #[arg(long)]
        report: bool,
    },
    /// Summarize a results directory written by `matrix`.
    Report {
        /// Results directory (default: the output directory).
        #[arg(long)]
        results: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Recon {
    #[arg(long)]
    algo: Algorithm,
    #[arg(long)]
    fwd: ProjectorKind,
    /// Adjoint kind (default: matched).
    #[arg(long)]
    adj: Option<ProjectorKind>,
    /// A preset name or a raw sinogram file.
    #[arg(long, default_value = "sl-full")]
    data: String,
    /// Grid size presets are scaled to.
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    cg_iters: Option<usize>,
    /// Disable the nonnegativity and support constraints.
    #[arg(long)]
    no_constraints: bool,
    /// Convergence trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value = "recon.raw")]
    out: PathBuf,
}

fn resolve(g: &Global, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        g.out_dir.join(p)
    }
}

fn preset(name: PresetName, size: usize, seed: u64) -> Result<DatasetPreset> {
    let mut p = DatasetPreset::named(name).scaled(size)?;
    p.seed = seed;
    Ok(p)
}

fn recon(g: &Global, r: &Recon) -> Result<()> {
    let adj_kind = r.adj.unwrap_or(r.fwd);
    let (s, reference, weights_counts, mut cfg) = match r.data.parse::<PresetName>() {
        Ok(name) => {
            let p = preset(name, r.size, g.seed)?;
            (generate_dataset(&p)?, Some(reference_image(r.size)?), p.counts_per_unit()?, shipped_config(name, r.algo)?)
        }
        Err(_) => {
            let s = read_sinogram_raw(Path::new(&r.data)).with_context(|| format!("reading {}", r.data))?;
            (s, None, None, tomocouple::solvers::SolverConfig::new(r.algo))
        }
    };
    let mut overrides = BTreeMap::new();
    let mut set = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            overrides.insert(k.to_string(), v);
        }
    };
    set("iterations", r.iters.map(|v| v.to_string()));
    set("lambda", r.lambda.map(|v| v.to_string()));
    set("rho", r.rho.map(|v| v.to_string()));
    set("beta", r.beta.map(|v| v.to_string()));
    set("delta", r.delta.map(|v| v.to_string()));
    set("cg_iters", r.cg_iters.map(|v| v.to_string()));
    if r.no_constraints {
        set("constraints", Some("false".into()));
    }
    cfg.apply_overrides(&overrides)?;

    let geom = s.geometry().clone();
    let mut fwd = ProjectorPair::new(r.fwd, &geom)?;
    fwd.precompute_weights();
    let mut adj_store = None;
    if adj_kind != r.fwd {
        let mut a = ProjectorPair::new(adj_kind, &geom)?;
        a.precompute_weights();
        adj_store = Some(a);
    }
    let adj = adj_store.as_ref().unwrap_or(&fwd);
    let weights = match weights_counts {
        Some(c) if r.algo == Algorithm::Pwls => Some(poisson_weights(&s, c)?),
        _ => None,
    };
    let (img, trace) = reconstruct(&s, &fwd, adj, &cfg, weights.as_ref(), reference.as_ref())?;
    write_image_raw(&resolve(g, &r.out), &img)?;
    if let Some(t) = &r.trace {
        fs::write(resolve(g, t), trace.to_csv()).with_context(|| format!("writing {}", t.display()))?;
    }
    let score = match &reference {
        Some(reference) if reference.width() == img.width() => {
            format!(" psnr={:.2}", psnr(&img, reference, Some(&reconstruction_circle_mask(img.width())))?)
        }
        _ => String::new(),
    };
    println!(
        "{} fwd={} adj={} iters={} final_cost={:.6e} diverged={}{score}",
        cfg.algorithm,
        r.fwd,
        adj_kind,
        trace.iterations(),
        trace.final_cost(),
        trace.diverged
    );
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    fs::create_dir_all(&g.out_dir).with_context(|| format!("creating {}", g.out_dir.display()))?;
    match &cli.command {
        Command::Phantom { size, out, pgm } => {
            let img = reference_image(*size)?;
            write_image_raw(&resolve(g, out), &img)?;
            if let Some(p) = pgm {
                write_image_pgm(&resolve(g, p), &img)?;
            }
        }
        Command::Sinogram { preset: name, size, views, kind, out } => {
            let mut p = preset(*name, *size, g.seed)?;
            if let Some(v) = views {
                p.views = *v;
            }
            let s = match kind {
                Some(k) => ProjectorPair::new(*k, &p.geometry()?)?.forward(&reference_image(*size)?)?,
                None => generate_dataset(&p)?,
            };
            write_sinogram_raw(&resolve(g, out), &s)?;
            println!("{}: {} views x {} cells", p.name, p.views, p.cells);
        }
        Command::Noise { input, sigma, reference_mean, out } => {
            let s = read_sinogram_raw(input).with_context(|| format!("reading {}", input.display()))?;
            let mut rng = SeededRng::new(g.seed);
            let noisy = match reference_mean {
                Some(m) => add_poisson_noise_at(&s, *sigma, *m, &mut rng)?,
                None => add_poisson_noise(&s, *sigma, &mut rng)?,
            };
            write_sinogram_raw(&resolve(g, out), &noisy)?;
            let m = reference_mean.unwrap_or_else(|| s.mean());
            println!("counts per unit: {:.6e}", counts_per_unit(*sigma, m));
        }
        Command::Audit { size, views, seeds, out } => {
            let geom = Geometry::new(*views, *size)?;
            let seeds: Vec<u64> = (0..*seeds).map(|i| g.seed.wrapping_add(i)).collect();
            let m = coupling_matrix(&geom, &seeds)?;
            let csv = m.to_csv();
            fs::write(resolve(g, out), &csv).with_context(|| format!("writing {}", out.display()))?;
            print!("{csv}");
            let dominant = m.dominant_diagonal();
            println!("dominant diagonal: {}/{}", dominant.len(), ProjectorKind::ALL.len());
        }
        Command::Fbp { input, adjoint, filter, out } => {
            let s = read_sinogram_raw(input).with_context(|| format!("reading {}", input.display()))?;
            let pair = ProjectorPair::new(*adjoint, s.geometry())?;
            write_image_raw(&resolve(g, out), &fbp_reconstruct(&s, &pair, *filter)?)?;
        }
        Command::Recon(r) => recon(g, r)?,
        Command::Matrix { spec, size, report } => {
            let text = fs::read_to_string(spec).with_context(|| format!("reading {}", spec.display()))?;
            let mut specs = parse_matrix(&text)?;
            for s in &mut specs {
                if s.dataset.sigma_fraction.is_some() {
                    s.dataset.seed = g.seed;
                }
            }
            let opts = MatrixOptions { size: *size, out_dir: Some(g.out_dir.clone()), ..MatrixOptions::default() };
            let table = run_matrix(&specs, &opts)?;
            for r in table.rows.iter().filter(|r| r.error.is_some()) {
                eprintln!("cell {} {} {} {}: {}", r.dataset, r.algo, r.fwd, r.adj, r.error.as_deref().unwrap_or(""));
            }
            if *report {
                print!("{}", emit_report(&table, &g.out_dir)?.text);
            }
            println!("{} cells, {} errored; results in {}", table.rows.len(), table.errored(), g.out_dir.display());
            if table.errored() > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Report { results } => {
            let dir = results.clone().unwrap_or_else(|| g.out_dir.clone());
            let table = ResultsTable::load(&dir)?;
            print!("{}", emit_report(&table, &dir)?.text);
            if table.errored() > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
