use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::{info, LevelFilter};

use mmwave_sc::config::{Extent, SimulationConfig, BS_POSITION};
use mmwave_sc::field::{build_map_pair, GridSpec};
use mmwave_sc::los::{LosModel, LosStateMap};
use mmwave_sc::output::write_map_file;
use mmwave_sc::rng::{stream, Stream};
use mmwave_sc::trajectory::Trajectory;
use mmwave_sc::{run_simulation, write_outputs};

#[derive(Parser)]
#[command(
    version,
    about = "Spatially consistent mmWave CIR simulator for a moving UT"
)]
struct Cli {
    /// Only print errors.
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// More log output (repeat for trace).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation and write CSV outputs plus a manifest.
    Simulate(SimulateArgs),
    /// Export uncorrelated/correlated LOS and shadowing maps.
    MakeMaps(MakeMapsArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config file; defaults are used for anything it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// `section.key=value`, applied after the file (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
    /// Also write every map used by the run.
    #[arg(long)]
    maps: bool,
    /// Independent runs with seeds seed, seed+1, ... written to out/run_XXX.
    #[arg(long, default_value_t = 1)]
    runs: u64,
}

#[derive(Args)]
struct MakeMapsArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
    /// Grid resolution in meters (default: maps.map_resolution_m).
    #[arg(long)]
    resolution: Option<f64>,
    /// LOS map size in meters, centered on the BS.
    #[arg(long, num_args = 2, value_names = ["WIDTH", "HEIGHT"], default_values_t = [500.0, 500.0])]
    los_extent: Vec<f64>,
}

fn load_config(args: &ConfigArgs) -> anyhow::Result<SimulationConfig> {
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("rng_seed={seed}"));
    }
    let text = match &args.config {
        Some(path) => {
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => {
            if args.seed.is_none()
                && !args
                    .overrides
                    .iter()
                    .any(|o| o.trim_start().starts_with("rng_seed"))
            {
                bail!("no seed given: pass --config with rng_seed or --seed");
            }
            String::new()
        }
    };
    let config = SimulationConfig::from_toml_with_overrides(&text, &overrides)?;
    Ok(config.validated()?)
}

fn simulate_one(config: &SimulationConfig, out: &Path, maps: bool) -> anyhow::Result<()> {
    let run = run_simulation(config)?;
    let mut manifest = run.manifest;
    let env = maps.then_some(&run.environment);
    write_outputs(&run.snapshots, &mut manifest, out, env)?;
    info!(
        "seed {}: {} snapshots written to {}",
        manifest.rng_seed,
        run.snapshots.len(),
        out.display()
    );
    Ok(())
}

fn simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let config = load_config(&args.config)?;
    if args.runs == 0 {
        bail!("--runs must be at least 1");
    }
    if args.runs == 1 {
        return simulate_one(&config, &args.out, args.maps);
    }
    let results: Vec<anyhow::Result<()>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..args.runs)
            .map(|i| {
                let mut cfg = config.clone();
                cfg.rng_seed = config.rng_seed.wrapping_add(i);
                let dir = args.out.join(format!("run_{i:03}"));
                scope.spawn(move || simulate_one(&cfg, &dir, args.maps))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| bail!("worker thread panicked")))
            .collect()
    });
    for (i, r) in results.into_iter().enumerate() {
        r.with_context(|| format!("run {i}"))?;
    }
    Ok(())
}

fn make_maps(args: &MakeMapsArgs) -> anyhow::Result<()> {
    let config = load_config(&args.config)?;
    let seed = config.rng_seed;
    let res = args.resolution.unwrap_or(config.maps.map_resolution_m);
    if res.is_nan() || res <= 0.0 {
        bail!("--resolution must be positive");
    }
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;

    let los_extent = Extent::centered(BS_POSITION, args.los_extent[0], args.los_extent[1]);
    let los_grid = GridSpec::covering(&los_extent, res)?;
    let (los_iid, los_corr) = build_map_pair(
        &los_grid,
        config.maps.correlation_distance_los_m,
        &mut stream(seed, Stream::LosMap),
    );
    let model = LosModel {
        scenario: config.scenario.kind,
        ut_height: config.geometry.ut_height_m,
    };
    write_map_file(
        &args.out,
        "los_uncorrelated.csv",
        &LosStateMap::from_gaussian(&los_iid, &model, BS_POSITION).underlying,
    )?;
    write_map_file(
        &args.out,
        "los_correlated.csv",
        &LosStateMap::from_gaussian(&los_corr, &model, BS_POSITION).underlying,
    )?;

    let trajectory = Trajectory::generate(&config);
    let sf_grid = GridSpec::covering(&config.sf_map_extent(&trajectory), res)?;
    let mut rng = stream(seed, Stream::ShadowingMaps);
    for (name, sigma) in [
        ("sigma_z", config.drop.cluster_sf_sigma_db),
        ("sigma_u", config.drop.subpath_sf_sigma_db),
    ] {
        let (mut iid, mut corr) =
            build_map_pair(&sf_grid, config.maps.correlation_distance_sf_m, &mut rng);
        for m in [&mut iid, &mut corr] {
            m.values.iter_mut().for_each(|v| *v *= sigma);
        }
        write_map_file(&args.out, &format!("{name}_uncorrelated.csv"), &iid)?;
        write_map_file(&args.out, &format!("{name}_correlated.csv"), &corr)?;
    }
    info!("maps written to {}", args.out.display());
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let level = if cli.quiet {
        LevelFilter::Error
    } else {
        match cli.verbose {
            0 => LevelFilter::Warn,
            1 => LevelFilter::Info,
            2 => LevelFilter::Debug,
            _ => LevelFilter::Trace,
        }
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::MakeMaps(args) => make_maps(args),
    }
}
