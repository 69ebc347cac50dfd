//! Scenario runner: each experiment is a subcommand that ingests a TOML
//! scenario config (file or named preset) and emits CSV/JSON plus a run
//! manifest into the output directory.

use clap::{Parser, Subcommand};
use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use vlcsim::config::{preset, ScenarioConfig, PRESET_NAMES};
use vlcsim::error::{Error, Result};
use vlcsim::geometry::{build_bulb, BulbDesign, RoomSpec};
use vlcsim::metrics::{sinr_cdf, three_region_surface, write_cdf_csv, SinrScenario};
use vlcsim::metrics::ClusterLayout;
use vlcsim::optimizer::{divergence_sweep, evaluate_design, power_sweep, Objective};
use vlcsim::protocol::{handover_stats, run_simulation, Event};

#[derive(Parser)]
#[command(
    name = "vlcsim",
    about = "Multi-element VLC simulation and optimization toolkit",
    version
)]
struct Cli {
    /// Path to a TOML scenario config.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset (fig3a, fig3b, fig4, fig5, fig6, protocol).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Overrides the config's RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Rayon thread count (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Mean SIR versus square floor dimension at fixed per-board power.
    SweepRoom,
    /// Power-averaged mean SIR versus divergence angle in a fixed room.
    SweepDivergence,
    /// Mean SIR binned by the two receivers' distances from room center.
    ThreeRegion,
    /// Power-budget sweep of the bulb design search (both objectives).
    Optimize,
    /// SINR CDFs per cluster layout and scenario.
    SinrCdf,
    /// Round-based association protocol run: event log and stats.
    ProtocolSim,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::SweepRoom => "sweep-room",
            Command::SweepDivergence => "sweep-divergence",
            Command::ThreeRegion => "three-region",
            Command::Optimize => "optimize",
            Command::SinrCdf => "sinr-cdf",
            Command::ProtocolSim => "protocol-sim",
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: --threads: {e}");
            std::process::exit(1);
        }
    }
    match run(&cli) {
        Ok(outputs) => {
            for p in &outputs {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let (mut cfg, source) = load_config(cli)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    std::fs::create_dir_all(&cli.out)?;

    let mut written: Vec<PathBuf> = Vec::new();
    let result = dispatch(cli.command, &cfg, &cli.out, &mut written).and_then(|()| {
        let manifest = cli.out.join("manifest.json");
        write_manifest(&manifest, cli.command.name(), &source, &cfg, &written)?;
        written.push(manifest);
        Ok(())
    });
    match result {
        Ok(()) => Ok(written),
        Err(e) => {
            // All-or-nothing: remove partial outputs on failure.
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            Err(e)
        }
    }
}

fn load_config(cli: &Cli) -> Result<(ScenarioConfig, String)> {
    match (&cli.config, &cli.preset) {
        (Some(path), None) => Ok((
            ScenarioConfig::from_file(path)?,
            path.display().to_string(),
        )),
        (None, Some(name)) => Ok((preset(name)?, format!("preset:{name}"))),
        _ => Err(Error::invalid(
            "config",
            &format!(
                "exactly one of --config or --preset is required (presets: {})",
                PRESET_NAMES.join(", ")
            ),
        )),
    }
}

fn dispatch(
    command: Command,
    cfg: &ScenarioConfig,
    out: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    match command {
        Command::SweepRoom => cmd_sweep_room(cfg, out, written),
        Command::SweepDivergence => cmd_sweep_divergence(cfg, out, written),
        Command::ThreeRegion => cmd_three_region(cfg, out, written),
        Command::Optimize => cmd_optimize(cfg, out, written),
        Command::SinrCdf => cmd_sinr_cdf(cfg, out, written),
        Command::ProtocolSim => cmd_protocol_sim(cfg, out, written),
    }
}

fn create_output(out: &Path, name: &str, written: &mut Vec<PathBuf>) -> Result<File> {
    let path = out.join(name);
    let f = File::create(&path)?;
    written.push(path);
    Ok(f)
}

fn write_manifest(
    path: &Path,
    command: &str,
    source: &str,
    cfg: &ScenarioConfig,
    outputs: &[PathBuf],
) -> Result<()> {
    let manifest = serde_json::json!({
        "command": command,
        "config_source": source,
        "seed": cfg.seed,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "config": cfg,
    });
    let mut f = File::create(path)?;
    writeln!(f, "{}", serde_json::to_string_pretty(&manifest).unwrap())?;
    Ok(())
}

fn cmd_sweep_room(cfg: &ScenarioConfig, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let sweep = cfg
        .sweep_room
        .as_ref()
        .ok_or_else(|| Error::invalid("sweep_room", "scenario requires a [sweep_room] section"))?;
    let bulb = cfg
        .bulb
        .as_ref()
        .ok_or_else(|| Error::invalid("bulb", "scenario requires a [bulb] section"))?;
    let protocol = cfg.eval_protocol();
    let mut f = create_output(out, "sweep_room.csv", written)?;
    writeln!(f, "floor_dim_m,mean_sir_db")?;
    for &dim in &sweep.floor_dims {
        let room = RoomSpec {
            width: dim,
            depth: dim,
            ..cfg.room_spec()?
        };
        room.validate()?;
        let design = bulb.to_design(&room)?;
        let eval = evaluate_design(&design, &room, &protocol)?;
        writeln!(f, "{dim},{:.4}", eval.mean_sir_db)?;
    }
    Ok(())
}

fn cmd_sweep_divergence(
    cfg: &ScenarioConfig,
    out: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    let sweep = cfg.sweep_divergence.as_ref().ok_or_else(|| {
        Error::invalid(
            "sweep_divergence",
            "scenario requires a [sweep_divergence] section",
        )
    })?;
    let room = cfg.room_spec()?;
    let template = cfg.bulb_design(&room)?;
    let rows = divergence_sweep(
        &template,
        &sweep.angles(),
        &sweep.total_powers_w,
        &room,
        &cfg.eval_protocol(),
    )?;
    let mut f = create_output(out, "sweep_divergence.csv", written)?;
    writeln!(f, "divergence_deg,mean_sir_db")?;
    for (angle, sir) in rows {
        writeln!(f, "{angle},{sir:.4}")?;
    }
    Ok(())
}

fn cmd_three_region(cfg: &ScenarioConfig, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let tr = cfg.three_region.as_ref().ok_or_else(|| {
        Error::invalid("three_region", "scenario requires a [three_region] section")
    })?;
    let room = cfg.room_spec()?;
    let boards = build_bulb(&cfg.bulb_design(&room)?)?;
    let bins = three_region_surface(
        &room,
        &boards,
        tr.n_samples,
        cfg.seed,
        tr.bin_width,
        cfg.eval.clamp,
    );
    let mut f = create_output(out, "three_region.csv", written)?;
    writeln!(f, "d1_m,d2_m,mean_sir_db")?;
    for b in bins {
        writeln!(f, "{},{},{:.4}", b.d1, b.d2, b.mean_sir_db)?;
    }
    Ok(())
}

fn cmd_optimize(cfg: &ScenarioConfig, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let opt = cfg
        .optimize
        .as_ref()
        .ok_or_else(|| Error::invalid("optimize", "scenario requires an [optimize] section"))?;
    let room = cfg.room_spec()?;
    let template = BulbDesign {
        power_per_board: opt.per_board_power,
        ..cfg.bulb_design(&room)?
    };
    let space = opt.to_space(f64::INFINITY, Objective::SirOnly);
    let rows = power_sweep(&space, &template, &opt.budgets_w, &room, &cfg.eval_protocol())?;
    let mut f = create_output(out, "frontier.csv", written)?;
    writeln!(
        f,
        "budget_w,sir_unconstrained_db,sir_constrained_db,illum_variance,objective_value"
    )?;
    for r in &rows {
        writeln!(
            f,
            "{},{:.4},{:.4},{:.6e},{:.6e}",
            r.budget_w,
            r.sir_unconstrained_db,
            r.sir_constrained_db,
            r.illum_variance,
            r.objective_value
        )?;
    }
    let mut j = create_output(out, "frontier.json", written)?;
    writeln!(j, "{}", serde_json::to_string_pretty(&rows).unwrap())?;
    Ok(())
}

fn cmd_sinr_cdf(cfg: &ScenarioConfig, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let sinr = cfg
        .sinr
        .as_ref()
        .ok_or_else(|| Error::invalid("sinr", "scenario requires a [sinr] section"))?;
    let room = cfg.room_spec()?;
    for layout_cfg in &sinr.layouts {
        let specs: Vec<_> = layout_cfg
            .clusters
            .iter()
            .map(|c| c.to_spec(&room))
            .collect();
        let layout = ClusterLayout::build(&specs)?;
        for scenario in [
            SinrScenario::S1,
            SinrScenario::S2,
            SinrScenario::S2Combined,
        ] {
            let cdf = sinr_cdf(&room, &layout, scenario, &sinr.noise, &sinr.options);
            let tag = match scenario {
                SinrScenario::S1 => "s1",
                SinrScenario::S2 => "s2",
                SinrScenario::S2Combined => "s2_combined",
            };
            let mut f = create_output(
                out,
                &format!("cdf_{}_{}.csv", layout_cfg.name, tag),
                written,
            )?;
            write_cdf_csv(&mut f, &cdf)?;
        }
    }
    Ok(())
}

fn cmd_protocol_sim(cfg: &ScenarioConfig, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let section = cfg
        .protocol
        .as_ref()
        .ok_or_else(|| Error::invalid("protocol", "scenario requires a [protocol] section"))?;
    let room = cfg.room_spec()?;
    let boards = build_bulb(&cfg.bulb_design(&room)?)?;
    let traces: Vec<_> = section.traces.iter().map(|t| t.to_trace()).collect();
    let sim = run_simulation(&traces, &boards, &room, &section.config)?;
    let mut f = create_output(out, "events.log", written)?;
    for e in &sim.events {
        writeln!(f, "{}", Event::to_line(e))?;
    }
    let stats = handover_stats(&sim.events);
    let mut j = create_output(out, "protocol_stats.json", written)?;
    writeln!(j, "{}", serde_json::to_string_pretty(&stats).unwrap())?;
    Ok(())
}
