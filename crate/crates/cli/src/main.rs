//! `fp`: batch front end for the cavity–molecule simulator.

mod config;

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use fp_core::levels::{min_gap, trace_levels};
use fp_core::observables::{
    default_spectrum_grid, emission_flux, emission_spectrum, excitation_number, transition_graph,
};
use fp_core::sweeps::{converge_truncation, map_nu_omega, sweep_nu, write_sweep_csv, SweepOptions};
use fp_core::{assemble_liouvillian, build_operators, steady_state, ElasticRatePolicy, LevelLabel};
use serde_json::json;

use config::{linear_grid, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "fp", version, about = "Driven cavity-molecule strong-coupling simulator")]
#[command(propagate_version = true)]
struct Cli {
    /// JSON config: parameter keys plus an optional `command` block.
    #[arg(long, global = true, allow_negative_numbers = true)]
    config: Option<PathBuf>,
    /// Output CSV path; a `.meta.json` sidecar is written next to it.
    #[arg(long, global = true, allow_negative_numbers = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps (default: available cores).
    #[arg(long, global = true, env = "FP_WORKERS")]
    workers: Option<usize>,
    #[command(flatten)]
    params: ParamFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ParamFlags {
    #[arg(long, global = true, allow_negative_numbers = true)]
    nu: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    omega: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    omega_r: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    gamma_a: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    gamma_d: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    gamma_ph: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    temperature: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    n_max: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    delta_secular: Option<f64>,
    /// `bare` or `scaled:<omega_ref>`.
    #[arg(long, global = true, allow_negative_numbers = true)]
    elastic_rate_policy: Option<ElasticRatePolicy>,
}

#[derive(Args, Debug, Default)]
struct NuGrid {
    #[arg(long)]
    nu_min: Option<f64>,
    #[arg(long)]
    nu_max: Option<f64>,
    #[arg(long)]
    nu_step: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct SweepFlags {
    /// Also compute the emission spectrum width at every point.
    #[arg(long)]
    with_spectra: bool,
    /// Keep the configured n_max instead of converging it at the largest ν.
    #[arg(long)]
    no_auto_converge: bool,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Stationary state at one parameter point.
    Steady {
        /// Also write the dressed-level transition graph here.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Sweep the drive amplitude.
    SweepNu {
        #[command(flatten)]
        grid: NuGrid,
        #[command(flatten)]
        sweep: SweepFlags,
    },
    /// Drive amplitude × drive frequency map.
    Map {
        #[command(flatten)]
        grid: NuGrid,
        #[arg(long)]
        omega_min: Option<f64>,
        #[arg(long)]
        omega_max: Option<f64>,
        #[arg(long)]
        omega_step: Option<f64>,
        #[command(flatten)]
        sweep: SweepFlags,
    },
    /// Cavity emission spectrum at one parameter point.
    Spectrum {
        #[arg(long)]
        omega_s_min: Option<f64>,
        #[arg(long)]
        omega_s_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Track dressed levels from ν = 0.
    Levels {
        #[arg(long)]
        nu_max: Option<f64>,
        #[arg(long)]
        nu_step: Option<f64>,
    },
    /// Minimum gap between two tracked levels.
    Gap {
        /// Level pair such as `LP1:UP4`.
        #[arg(long)]
        pair: Option<String>,
        #[arg(long)]
        nu_max: Option<f64>,
        #[arg(long)]
        nu_step: Option<f64>,
    },
    /// Smallest converged photon-number truncation at the configured point.
    Converge {
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Dump the jump channels.
    Channels,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Steady { .. } => "steady",
            Command::SweepNu { .. } => "sweep-nu",
            Command::Map { .. } => "map",
            Command::Spectrum { .. } => "spectrum",
            Command::Levels { .. } => "levels",
            Command::Gap { .. } => "gap",
            Command::Converge { .. } => "converge",
            Command::Channels => "channels",
        }
    }
}

enum Failure {
    Usage(String),
    Solver(String),
}

impl From<fp_core::Error> for Failure {
    fn from(e: fp_core::Error) -> Self {
        if e.is_validation() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Solver(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(format!("output: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Defaults, then the config file, then flags.
fn resolve(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(Failure::Usage)?,
        None => RunConfig::default(),
    };
    let p = &mut cfg.params;
    let f = &cli.params;
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = f.$field { p.$field = v; } )* };
    }
    set!(nu, omega, omega_r, gamma_a, gamma_d, gamma_ph, temperature, n_max, delta_secular, elastic_rate_policy);

    let c = &mut cfg.command;
    let grid = |c: &mut config::CommandBlock, g: &NuGrid| {
        if let Some(v) = g.nu_min {
            c.nu_min = v;
        }
        if let Some(v) = g.nu_max {
            c.nu_max = v;
        }
        if let Some(v) = g.nu_step {
            c.nu_step = v;
        }
    };
    let sweep = |c: &mut config::CommandBlock, s: &SweepFlags| {
        c.with_spectra |= s.with_spectra;
        if s.no_auto_converge {
            c.auto_converge = false;
        }
        if let Some(t) = s.tol {
            c.converge_tol = t;
        }
    };
    match &cli.command {
        Command::Steady { graph } => {
            if let Some(g) = graph {
                c.graph_out = Some(g.display().to_string());
            }
        }
        Command::SweepNu { grid: g, sweep: s } => {
            grid(c, g);
            sweep(c, s);
        }
        Command::Map { grid: g, omega_min, omega_max, omega_step, sweep: s } => {
            grid(c, g);
            sweep(c, s);
            c.omega_min = omega_min.or(c.omega_min);
            c.omega_max = omega_max.or(c.omega_max);
            if let Some(v) = omega_step {
                c.omega_step = *v;
            }
        }
        Command::Spectrum { omega_s_min, omega_s_max, points } => {
            c.omega_s_min = omega_s_min.or(c.omega_s_min);
            c.omega_s_max = omega_s_max.or(c.omega_s_max);
            if let Some(v) = points {
                c.omega_s_points = *v;
            }
        }
        Command::Levels { nu_max, nu_step } => {
            if let Some(v) = nu_max {
                c.nu_max = *v;
            }
            if let Some(v) = nu_step {
                c.levels_nu_step = *v;
            }
        }
        Command::Gap { pair, nu_max, nu_step } => {
            if let Some(v) = pair {
                c.pair = v.clone();
            }
            if let Some(v) = nu_max {
                c.nu_max = *v;
            }
            if let Some(v) = nu_step {
                c.levels_nu_step = *v;
            }
        }
        Command::Converge { tol } => {
            if let Some(t) = tol {
                c.converge_tol = *t;
            }
        }
        Command::Channels => {}
    }
    if let Some(out) = &cli.out {
        c.out = Some(out.display().to_string());
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    cfg.params.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<File, Failure> {
    File::create(path).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = resolve(&cli)?;
    if let Some(n) = cfg.workers {
        if n == 0 {
            return Err(Failure::Usage("workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Solver(format!("thread pool: {e}")))?;
    }
    fp_core::use_sequential_kernels();

    let name = cli.command.name();
    let out = PathBuf::from(cfg.command.out.clone().unwrap_or_else(|| format!("{name}.csv")));
    let started = Instant::now();
    let summary = execute(&cli.command, &cfg, &out)?;
    let meta = json!({
        "tool": "fp",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": name,
        "config": cfg.to_value(),
        "wall_time_s": started.elapsed().as_secs_f64(),
        "summary": summary,
    });
    let meta_path = PathBuf::from(format!("{}.meta.json", out.display()));
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    std::fs::write(&meta_path, text + "\n")
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", meta_path.display())))?;
    Ok(())
}

fn options(cfg: &RunConfig) -> SweepOptions {
    SweepOptions {
        with_spectra: cfg.command.with_spectra,
        spectrum_grid: None,
        auto_converge: cfg.command.auto_converge.then_some(cfg.command.converge_tol),
    }
}

fn parse_pair(s: &str) -> Result<(LevelLabel, LevelLabel), Failure> {
    let (a, b) = s.split_once(':').ok_or_else(|| Failure::Usage(format!("pair '{s}' must look like LP1:UP4")))?;
    Ok((a.parse().map_err(Failure::Usage)?, b.parse().map_err(Failure::Usage)?))
}

fn execute(command: &Command, cfg: &RunConfig, out: &Path) -> Result<serde_json::Value, Failure> {
    let p = &cfg.params;
    let c = &cfg.command;
    match command {
        Command::Steady { .. } => {
            let (l, channels, eig) = assemble_liouvillian(p)?;
            let ss = steady_state(&l)?;
            let ops = build_operators(l.space());
            let n_st = excitation_number(&ss.rho, &ops)?;
            let flux = emission_flux(&ss.rho, &channels)?;
            let trace = ss.rho.trace().re;
            println!("n_st = {n_st:.10e}");
            println!("photon_rate = {:.10e}", flux.photon_rate);
            println!("energy_flux = {:.10e}", flux.energy_flux);
            println!("residual = {:.3e}  min_eigenvalue = {:.3e}  method = {:?}", ss.residual, ss.min_eigenvalue, ss.method);
            let mut w = fp_core::io::CsvWriter::new(create(out)?, &["quantity", "value"])?;
            for (k, v) in [
                ("n_st", n_st),
                ("photon_rate", flux.photon_rate),
                ("energy_flux", flux.energy_flux),
                ("trace", trace),
                ("residual", ss.residual),
                ("min_eigenvalue", ss.min_eigenvalue),
                ("liouvillian_norm", l.norm()),
            ] {
                w.row(&[k.to_string(), fp_core::io::fmt_f64(v)])?;
            }
            w.finish()?;
            if let Some(g) = &c.graph_out {
                transition_graph(&ss.rho, &channels, &eig)?.write_csv(create(Path::new(g))?)?;
            }
            Ok(json!({"n_st": n_st, "photon_rate": flux.photon_rate, "energy_flux": flux.energy_flux, "residual": ss.residual}))
        }
        Command::SweepNu { .. } => {
            let grid = linear_grid("nu", c.nu_min, c.nu_max, c.nu_step).map_err(Failure::Usage)?;
            let rows = sweep_nu(p, &grid, &options(cfg))?;
            write_sweep_csv(&rows, create(out)?)?;
            let failed = rows.iter().filter(|r| !r.status.is_ok()).count();
            let n_max = rows.first().map(|r| r.n_max_used);
            println!("{} points, {failed} failed, n_max = {}", rows.len(), n_max.unwrap_or(p.n_max));
            Ok(json!({"points": rows.len(), "failed": failed, "n_max_used": n_max}))
        }
        Command::Map { .. } => {
            let nus = linear_grid("nu", c.nu_min, c.nu_max, c.nu_step).map_err(Failure::Usage)?;
            let centre = p.omega0 + p.omega_r;
            let omegas = linear_grid(
                "omega",
                c.omega_min.unwrap_or(centre - 2e-3),
                c.omega_max.unwrap_or(centre + 2e-3),
                c.omega_step,
            )
            .map_err(Failure::Usage)?;
            let rows = map_nu_omega(p, &nus, &omegas, &options(cfg))?;
            write_sweep_csv(&rows, create(out)?)?;
            let failed = rows.iter().filter(|r| !r.status.is_ok()).count();
            println!("{} x {} points, {failed} failed", omegas.len(), nus.len());
            Ok(json!({"points": rows.len(), "failed": failed}))
        }
        Command::Spectrum { .. } => {
            let grid = match (c.omega_s_min, c.omega_s_max) {
                (Some(lo), Some(hi)) => {
                    if c.omega_s_points < 2 || !(hi > lo) {
                        return Err(Failure::Usage("spectrum window needs max > min and at least 2 points".into()));
                    }
                    let n = c.omega_s_points - 1;
                    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
                }
                (None, None) => default_spectrum_grid(p),
                _ => return Err(Failure::Usage("give both omega_s_min and omega_s_max or neither".into())),
            };
            let (l, _, _) = assemble_liouvillian(p)?;
            let ss = steady_state(&l)?;
            let ops = build_operators(l.space());
            let s = emission_spectrum(&l, &ss, &ops, p, &grid)?;
            s.write_csv(create(out)?)?;
            let width = fp_core::observables::spectral_width(&s).ok();
            let (peak_at, _) = s.peak();
            println!("integral = {:.10e}  width = {width:?}  peak at {peak_at:.8}", s.integral());
            Ok(json!({"integral": s.integral(), "equivalent_width": width, "peak_at": peak_at}))
        }
        Command::Levels { .. } => {
            let grid = linear_grid("nu", 0.0, c.nu_max, c.levels_nu_step).map_err(Failure::Usage)?;
            let trace = trace_levels(p, &grid)?;
            trace.write_csv(create(out)?)?;
            println!("{} levels over {} points, min overlap {:.3}", trace.labels.len(), grid.len(), trace.min_overlap());
            Ok(json!({"levels": trace.labels.len(), "min_overlap": trace.min_overlap()}))
        }
        Command::Gap { .. } => {
            let (a, b) = parse_pair(&c.pair)?;
            let grid = linear_grid("nu", 0.0, c.nu_max, c.levels_nu_step).map_err(Failure::Usage)?;
            let trace = trace_levels(p, &grid)?;
            let g = min_gap(&trace, a, b)?;
            println!("nu_star = {:.6e}", g.nu_star);
            println!("gap_min = {:.6e}", g.gap_min);
            println!("width_at_twice = {:.6e}", g.width_at_twice);
            let mut w = fp_core::io::CsvWriter::new(
                create(out)?,
                &["level_a", "level_b", "nu_star", "gap_min", "width_at_twice", "interval_lo", "interval_hi"],
            )?;
            let f = fp_core::io::fmt_f64;
            w.row(&[
                a.to_string(),
                b.to_string(),
                f(g.nu_star),
                f(g.gap_min),
                f(g.width_at_twice),
                f(g.interval.0),
                f(g.interval.1),
            ])?;
            w.finish()?;
            Ok(json!({"nu_star": g.nu_star, "gap_min": g.gap_min, "width_at_twice": g.width_at_twice}))
        }
        Command::Converge { .. } => {
            let n = converge_truncation(p, c.converge_tol)?;
            println!("n_max = {n}");
            let f = fp_core::io::fmt_f64;
            let mut w = fp_core::io::CsvWriter::new(create(out)?, &["nu", "omega", "tol", "n_max"])?;
            w.row(&[f(p.nu), f(p.omega), f(c.converge_tol), n.to_string()])?;
            w.finish()?;
            Ok(json!({"n_max": n}))
        }
        Command::Channels => {
            let (_, channels, _) = assemble_liouvillian(p)?;
            channels.write_csv(create(out)?)?;
            println!("{} channels", channels.channels.len());
            Ok(json!({"channels": channels.channels.len()}))
        }
    }
}
