//! End-to-end run: trajectory, maps, anchor drop, then one evolution step per
//! remaining trajectory point.

use std::time::{SystemTime, UNIX_EPOCH};

use log::{debug, info, warn};

use crate::config::{SimulationConfig, BS_POSITION};
use crate::drop::{generate_initial_drop, ChannelSnapshot, PowerDecay};
use crate::error::{Error, Result};
use crate::evolution::{apply_environment, step, Environment, EvolutionState};
use crate::field::build_correlated_map;
use crate::geometry::LinkGeometry;
use crate::los::LosModel;
use crate::output::{RunManifest, WarningCountsRecord};
use crate::rng::{stream, Stream};
use crate::shadowing::build_sf_maps;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub snapshots: Vec<ChannelSnapshot>,
    pub manifest: RunManifest,
    pub environment: Environment,
    pub trajectory: Trajectory,
    pub state: EvolutionState,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn at_step(step: usize, position: crate::geometry::Vec2) -> impl FnOnce(Error) -> Error {
    move |e| Error::Step {
        step,
        position,
        source: Box::new(e),
    }
}

pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationRun> {
    let start_time = unix_now();
    let config = config.clone().validated()?;
    let seed = config.rng_seed;
    let trajectory = Trajectory::generate(&config);
    info!("seed {seed}: {} trajectory points", trajectory.len());

    let maps = &config.maps;
    let los_map = build_correlated_map(
        &config.los_map_extent(&trajectory),
        maps.map_resolution_m,
        maps.correlation_distance_los_m,
        &mut stream(seed, Stream::LosMap),
    )?;
    let sf_extent = config.sf_map_extent(&trajectory);
    let large_scale_sf = build_correlated_map(
        &sf_extent,
        maps.map_resolution_m,
        maps.correlation_distance_sf_m,
        &mut stream(seed, Stream::LargeScaleFading),
    )?;
    let los_model = LosModel {
        scenario: config.scenario.kind,
        ut_height: config.geometry.ut_height_m,
    };

    let first = trajectory.points[0];
    let link = LinkGeometry {
        bs_position: BS_POSITION,
        ut_position: first.position,
        bs_height: config.geometry.bs_height_m,
        ut_height: config.geometry.ut_height_m,
    };
    // the shadowing maps need the drop's cluster layout, so they come after it
    let mut environment = Environment {
        los_map,
        los_model,
        los_override: config.scenario.los_override,
        large_scale_sf,
        shadowing: crate::shadowing::ShadowingMaps {
            cluster: Vec::new(),
            subpath: Vec::new(),
        },
    };
    let anchor: Result<_> = (|| {
        let los_state = environment.los_state(first.position)?;
        let mut drop =
            generate_initial_drop(&config, &link, los_state, &mut stream(seed, Stream::Drop))?;
        drop.heading = first.heading;
        environment.shadowing = build_sf_maps(
            &drop.layout(),
            &sf_extent,
            maps.map_resolution_m,
            maps.correlation_distance_sf_m,
            &mut stream(seed, Stream::ShadowingMaps),
        )?;
        let state = EvolutionState::new(
            &drop,
            PowerDecay::for_state(&config, los_state),
            &mut stream(seed, Stream::ReflectionAngles),
        );
        apply_environment(&mut drop, &state, &environment, &config)?;
        Ok((drop, state))
    })();
    let (drop, mut state) = anchor.map_err(at_step(0, first.position))?;
    debug!(
        "anchor drop: {} {} clusters, {} subpaths",
        drop.los_state,
        drop.clusters.len(),
        drop.subpath_count()
    );

    let mut snapshots = Vec::with_capacity(trajectory.len());
    snapshots.push(drop);
    for (k, point) in trajectory.points.iter().enumerate().skip(1) {
        let previous = snapshots.last().expect("anchor snapshot");
        let next = step(previous, &mut state, point, k, &environment, &config)
            .map_err(at_step(k, point.position))?;
        snapshots.push(next);
    }

    let c = state.counters;
    if c.delay_clamps > 0 {
        warn!(
            "seed {seed}: {} negative excess delays clamped to 0",
            c.delay_clamps
        );
    }
    debug!(
        "seed {seed}: {} azimuth wraps, {} zenith reflections, {} LOS transitions",
        c.azimuth_wraps, c.zenith_reflections, c.los_transitions
    );
    let manifest = RunManifest {
        software: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        rng_seed: seed,
        config,
        start_time_unix_s: start_time,
        end_time_unix_s: unix_now(),
        snapshots: snapshots.len(),
        warnings: WarningCountsRecord::from(c),
        outputs: Vec::new(),
    };
    Ok(SimulationRun {
        snapshots,
        manifest,
        environment,
        trajectory,
        state,
    })
}
