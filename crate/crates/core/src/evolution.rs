//! Time evolution of a channel snapshot along the UT track.
//!
//! Each step moves the UT from trajectory point k-1 to k and:
//!
//! 1. looks up the LOS state at the new position,
//! 2. recomputes path loss with the correlated large-scale shadowing,
//! 3. advances every subpath's absolute delay by `-(r̂_rx · v) Δt / c`, using
//!    the arrival direction at t_{k-1},
//! 4. re-anchors the angle slopes at t_{k-1} and advances the angles linearly
//!    to t_k,
//! 5. advances the phases by the matching Doppler term,
//! 6. adds or removes the direct path if the LOS state flipped (clusters
//!    themselves persist), re-references excess delays, and
//! 7. reallocates powers from the correlated Z/U maps at the new position.
//!
//! Powers do not depend on angles, so doing them last is equivalent to doing
//! them before the angle update.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::Serialize;

use crate::config::{LosOverride, SimulationConfig, ZenithSlope, BS_POSITION};
use crate::drop::{
    allocate_powers, dbm_to_mw, large_scale_sigma_db, los_component, path_loss_db,
    path_loss_exponent, ChannelSnapshot, PowerDecay, ZENITH_MARGIN,
};
use crate::error::{Error, Result};
use crate::field::CorrelatedGridMap;
use crate::geometry::{direction_vector, wrap_pi, wrap_two_pi, LinkGeometry, Vec2, SPEED_OF_LIGHT};
use crate::los::{assign_los_state, LosModel, LosState};
use crate::rng::uniform_left_open;
use crate::shadowing::ShadowingMaps;
use crate::trajectory::TrajectoryPoint;

pub const AOD: usize = 0;
pub const ZOD: usize = 1;
pub const AOA: usize = 2;
pub const ZOA: usize = 3;

/// Frozen per-run maps: the simulated environment.
#[derive(Debug, Clone)]
pub struct Environment {
    pub los_map: CorrelatedGridMap,
    pub los_model: LosModel,
    pub los_override: LosOverride,
    pub large_scale_sf: CorrelatedGridMap,
    pub shadowing: ShadowingMaps,
}

impl Environment {
    pub fn los_state(&self, position: Vec2) -> Result<LosState> {
        match self.los_override {
            LosOverride::Los => Ok(LosState::Los),
            LosOverride::Nlos => Ok(LosState::Nlos),
            LosOverride::Auto => {
                assign_los_state(&self.los_map, &self.los_model, BS_POSITION, position)
            }
        }
    }
}

/// Linear-motion parameters of one subpath.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubpathMotion {
    /// Reflection-surface angles ψ, `[AOD, ZOD, AOA, ZOA]`.
    pub psi: [f64; 4],
    /// rad/s, `[AOD, ZOD, AOA, ZOA]`.
    pub slopes: [f64; 4],
    pub anchor_time: f64,
    pub anchor_angles: [f64; 4],
}

impl SubpathMotion {
    fn fixed(psi: [f64; 4], time: f64, angles: [f64; 4]) -> Self {
        Self {
            psi,
            slopes: [0.0; 4],
            anchor_time: time,
            anchor_angles: angles,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct WarningCounters {
    /// Excess delays that came out negative and were clamped to 0.
    pub delay_clamps: u64,
    /// Azimuths wrapped across ±π.
    pub azimuth_wraps: u64,
    /// Zeniths reflected at a pole.
    pub zenith_reflections: u64,
    pub los_transitions: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    /// Keyed by `(cluster id, subpath id)`.
    pub motion: BTreeMap<(usize, usize), SubpathMotion>,
    pub last_los_state: LosState,
    pub last_heading: f64,
    pub decay: PowerDecay,
    pub counters: WarningCounters,
    /// Subpaths whose zenith was reflected during the latest step.
    pub reflected: Vec<(usize, usize)>,
}

impl EvolutionState {
    /// Draws ψ once per subpath: azimuth ψ ~ U(-π, π], zenith ψ ~ U(-π/2, π/2];
    /// the direct path gets ψ = 0.
    pub fn new<R: Rng + ?Sized>(
        snapshot: &ChannelSnapshot,
        decay: PowerDecay,
        rng: &mut R,
    ) -> Self {
        let mut motion = BTreeMap::new();
        for (c, s) in snapshot.subpaths() {
            let psi = if s.is_los_component {
                [0.0; 4]
            } else {
                let aod = uniform_left_open(rng, -PI, PI);
                let zod = uniform_left_open(rng, -PI / 2.0, PI / 2.0);
                let aoa = uniform_left_open(rng, -PI, PI);
                let zoa = uniform_left_open(rng, -PI / 2.0, PI / 2.0);
                [aod, zod, aoa, zoa]
            };
            motion.insert(
                (c.id, s.id),
                SubpathMotion::fixed(psi, snapshot.time, s.angles()),
            );
        }
        Self {
            motion,
            last_los_state: snapshot.los_state,
            last_heading: snapshot.heading,
            decay,
            counters: WarningCounters::default(),
            reflected: Vec::new(),
        }
    }
}

/// Angle slopes `[S_AOD, S_ZOD, S_AOA, S_ZOA]` in rad/s for a UT moving at
/// `speed` along `heading`, with angles taken at the anchor time.
pub fn compute_slopes(
    angles: [f64; 4],
    psi: [f64; 4],
    speed: f64,
    heading: f64,
    d_2d: f64,
    d_3d: f64,
    zenith_law: ZenithSlope,
) -> Result<[f64; 4]> {
    if !(d_2d > 0.0 && d_3d > 0.0) {
        return Err(Error::DegenerateGeometry);
    }
    let s_aod = speed * (heading - angles[AOD] + psi[AOD]).sin() / d_2d;
    let s_aoa = -speed * (heading - angles[AOA] + psi[AOA]).sin() / d_2d;
    let mut s_zod = -speed * (heading - angles[AOD] + psi[ZOD]).cos() / d_3d;
    let mut s_zoa = -speed * (heading - angles[AOA] + psi[ZOA]).cos() / d_3d;
    if zenith_law == ZenithSlope::Projected {
        s_zod *= -angles[ZOD].cos();
        s_zoa *= angles[ZOA].cos();
    }
    Ok([s_aod, s_zod, s_aoa, s_zoa])
}

/// Outcome flags of one angle update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AngleEvents {
    pub azimuth_wraps: u32,
    pub zenith_reflections: u32,
}

/// `θ(t) = θ(t0) + S (t - t0)`, then azimuths wrapped into (-π, π] and
/// zeniths reflected back into (0, π) (flipping the paired azimuth by π).
pub fn update_angles(motion: &SubpathMotion, t: f64) -> ([f64; 4], AngleEvents) {
    let dt = t - motion.anchor_time;
    let mut raw = motion.anchor_angles;
    for (a, s) in raw.iter_mut().zip(motion.slopes) {
        *a += s * dt;
    }
    let mut events = AngleEvents::default();
    for (az, zen) in [(AOD, ZOD), (AOA, ZOA)] {
        let mut z = raw[zen];
        let mut a = raw[az];
        // at most a couple of reflections for any sane step
        while !(z > 0.0 && z < PI) {
            if z <= 0.0 {
                z = -z;
            } else {
                z = TAU - z;
            }
            a += PI;
            events.zenith_reflections += 1;
            if z == 0.0 || z == PI {
                break;
            }
        }
        raw[zen] = z.clamp(ZENITH_MARGIN, PI - ZENITH_MARGIN);
        let wrapped = wrap_pi(a);
        if events.zenith_reflections == 0 && wrapped != a {
            events.azimuth_wraps += 1;
        }
        raw[az] = wrapped;
    }
    (raw, events)
}

/// Per-subpath absolute delay change in ns: `-(r̂_rx · v) Δt / c`, with r̂_rx
/// built from the arrival angles at the previous time.
pub fn delay_increment_ns(aoa_az: f64, zoa: f64, velocity: Vec2, dt: f64) -> f64 {
    -radial_speed(aoa_az, zoa, velocity) * dt / SPEED_OF_LIGHT * 1e9
}

/// Phase change `-2π (f/c) (r̂_rx · v) Δt`.
pub fn phase_increment(aoa_az: f64, zoa: f64, velocity: Vec2, dt: f64, frequency_hz: f64) -> f64 {
    -TAU * frequency_hz / SPEED_OF_LIGHT * radial_speed(aoa_az, zoa, velocity) * dt
}

fn radial_speed(aoa_az: f64, zoa: f64, velocity: Vec2) -> f64 {
    let r = direction_vector(aoa_az, zoa);
    r[0] * velocity.x + r[1] * velocity.y
}

/// Turns absolute delays (`reference_delay_ns` = 0) back into excess delays
/// relative to the direct path, or to the earliest subpath without one, and
/// keeps each cluster sorted by delay. Returns the number of negative excess
/// delays clamped to 0.
fn rereference_delays(snapshot: &mut ChannelSnapshot) -> u64 {
    let los = snapshot
        .subpaths()
        .find(|(_, s)| s.is_los_component)
        .map(|(_, s)| s.excess_delay_ns);
    let earliest = snapshot
        .subpaths()
        .map(|(_, s)| s.excess_delay_ns)
        .fold(f64::INFINITY, f64::min);
    let shift = los.unwrap_or(earliest);
    let mut clamps = 0;
    for c in &mut snapshot.clusters {
        for s in &mut c.subpaths {
            s.excess_delay_ns -= shift;
            if s.is_los_component {
                s.excess_delay_ns = 0.0;
            } else if s.excess_delay_ns < 0.0 {
                s.excess_delay_ns = 0.0;
                clamps += 1;
            }
        }
        c.subpaths.sort_by(|a, b| {
            a.excess_delay_ns
                .total_cmp(&b.excess_delay_ns)
                .then(b.is_los_component.cmp(&a.is_los_component))
                .then(a.id.cmp(&b.id))
        });
    }
    snapshot.reference_delay_ns += shift;
    clamps
}

/// Recomputes shadow fading, path loss and total received power at the
/// snapshot's position and LOS state.
pub fn update_path_loss(
    snapshot: &mut ChannelSnapshot,
    env: &Environment,
    config: &SimulationConfig,
) -> Result<()> {
    let sigma = large_scale_sigma_db(config, snapshot.los_state);
    snapshot.shadow_fading_db = sigma * env.large_scale_sf.sample(snapshot.ut_position)?;
    snapshot.path_loss_db = path_loss_db(
        config.scenario.carrier_frequency_hz,
        snapshot.d_3d,
        path_loss_exponent(config, snapshot.los_state),
        snapshot.shadow_fading_db,
    )?;
    snapshot.total_received_power_mw =
        dbm_to_mw(config.scenario.tx_power_dbm - snapshot.path_loss_db);
    Ok(())
}

/// Samples Z_n and U from the correlated maps at the snapshot position and
/// reallocates `total_received_power_mw`. The direct path has U = 0 dB.
pub fn update_powers(
    snapshot: &mut ChannelSnapshot,
    maps: &ShadowingMaps,
    sigma_z_db: f64,
    sigma_u_db: f64,
    decay: PowerDecay,
) -> Result<()> {
    let values = maps.sample(snapshot.ut_position, sigma_z_db, sigma_u_db)?;
    let u: Vec<Vec<f64>> = snapshot
        .clusters
        .iter()
        .map(|c| {
            c.subpaths
                .iter()
                .map(|s| {
                    if s.is_los_component {
                        0.0
                    } else {
                        values.subpath_db[c.id][s.id - 1]
                    }
                })
                .collect()
        })
        .collect();
    let z: Vec<f64> = snapshot
        .clusters
        .iter()
        .map(|c| values.cluster_db[c.id])
        .collect();
    let total = snapshot.total_received_power_mw;
    allocate_powers(&mut snapshot.clusters, total, &z, &u, decay)
}

/// Replaces the i.i.d. shadowing of a fresh drop with correlated map samples.
pub fn apply_environment(
    snapshot: &mut ChannelSnapshot,
    state: &EvolutionState,
    env: &Environment,
    config: &SimulationConfig,
) -> Result<()> {
    update_path_loss(snapshot, env, config)?;
    update_powers(
        snapshot,
        &env.shadowing,
        config.drop.cluster_sf_sigma_db,
        config.drop.subpath_sf_sigma_db,
        state.decay,
    )
}

fn link_at(config: &SimulationConfig, position: Vec2) -> LinkGeometry {
    LinkGeometry {
        bs_position: BS_POSITION,
        ut_position: position,
        bs_height: config.geometry.bs_height_m,
        ut_height: config.geometry.ut_height_m,
    }
}

/// Advances `previous` (at t_{k-1}) to trajectory point `point` (t_k).
pub fn step(
    previous: &ChannelSnapshot,
    state: &mut EvolutionState,
    point: &TrajectoryPoint,
    step_index: usize,
    env: &Environment,
    config: &SimulationConfig,
) -> Result<ChannelSnapshot> {
    let dt = point.time - previous.time;
    debug_assert!(dt > 0.0);
    let displacement = point.position - previous.ut_position;
    let velocity = displacement * (1.0 / dt);
    let speed = velocity.norm();
    let heading = if speed > 0.0 {
        velocity.heading()
    } else {
        point.heading
    };
    let prev_link = link_at(config, previous.ut_position);
    let link = link_at(config, point.position);

    let mut next = previous.clone();
    next.step = step_index;
    next.time = point.time;
    next.ut_position = point.position;
    next.heading = point.heading;
    next.d_2d = link.d_2d();
    next.d_3d = link.d_3d();

    // (1) propagation condition
    let los_state = env.los_state(point.position)?;
    next.los_state = los_state;

    // (3) delays from the t_{k-1} arrival directions; stay absolute until the
    // direct path is settled below
    let reference = previous.reference_delay_ns;
    for c in &mut next.clusters {
        for s in &mut c.subpaths {
            s.excess_delay_ns += reference + delay_increment_ns(s.aoa_az, s.zoa, velocity, dt);
        }
    }
    next.reference_delay_ns = 0.0;

    // (4) slopes re-anchored at t_{k-1}, angles advanced to t_k; (5) phases
    state.reflected.clear();
    let frequency = config.scenario.carrier_frequency_hz;
    for c in &mut next.clusters {
        for s in &mut c.subpaths {
            let motion = state
                .motion
                .get_mut(&(c.id, s.id))
                .expect("motion entry for every subpath");
            let anchor = s.angles();
            motion.slopes = compute_slopes(
                anchor,
                motion.psi,
                speed,
                heading,
                prev_link.d_2d(),
                prev_link.d_3d(),
                config.evolution.zenith_slope,
            )?;
            motion.anchor_time = previous.time;
            motion.anchor_angles = anchor;
            let (angles, events) = update_angles(motion, point.time);
            state.counters.azimuth_wraps += u64::from(events.azimuth_wraps);
            state.counters.zenith_reflections += u64::from(events.zenith_reflections);
            if events.zenith_reflections > 0 {
                state.reflected.push((c.id, s.id));
            }
            s.phase_rad = wrap_two_pi(
                s.phase_rad + phase_increment(anchor[AOA], anchor[ZOA], velocity, dt, frequency),
            );
            s.set_angles(angles);
        }
    }

    // (6) LOS transitions keep the clusters; only the direct path comes or goes
    let has_los = next.has_los_component();
    if los_state.is_los() && !has_los {
        let earliest = next
            .subpaths()
            .map(|(_, s)| s.excess_delay_ns)
            .fold(f64::INFINITY, f64::min);
        let direct = link.d_3d() / SPEED_OF_LIGHT * 1e9;
        let mut los = los_component(
            &link,
            wrap_two_pi(-TAU * frequency * link.d_3d() / SPEED_OF_LIGHT),
        );
        los.excess_delay_ns = direct.min(earliest - config.drop.subpath_spacing_ns);
        state.motion.insert(
            (next.clusters[0].id, 0),
            SubpathMotion::fixed([0.0; 4], point.time, los.angles()),
        );
        next.clusters[0].subpaths.insert(0, los);
        state.counters.los_transitions += 1;
    } else if !los_state.is_los() && has_los {
        for c in &mut next.clusters {
            c.subpaths.retain(|s| !s.is_los_component);
        }
        state.motion.retain(|&(_, id), _| id != 0);
        state.counters.los_transitions += 1;
    }
    state.counters.delay_clamps += rereference_delays(&mut next);

    // (2) path loss, (7) powers
    update_path_loss(&mut next, env, config)?;
    update_powers(
        &mut next,
        &env.shadowing,
        config.drop.cluster_sf_sigma_db,
        config.drop.subpath_sf_sigma_db,
        state.decay,
    )?;

    state.last_los_state = los_state;
    state.last_heading = heading;
    Ok(next)
}
