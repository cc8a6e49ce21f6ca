//! Anchor (t = 0) channel drop in the time-cluster/spatial-lobe style, plus
//! the close-in path-loss model and power allocation.
//!
//! Subpath ids: id 0 of cluster 0 is reserved for the direct (LOS) path;
//! every other subpath of cluster `c` has an id in `1..=n_c` that it keeps for
//! the whole run, whatever its delay ordering becomes.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::Serialize;

use crate::config::SimulationConfig;
use crate::error::{Error, Result};
use crate::geometry::{wrap_pi, LinkGeometry, Vec2, SPEED_OF_LIGHT};
use crate::los::LosState;
use crate::rng::{laplace, uniform_left_open};
use crate::shadowing::{ClusterLayout, ShadowingValues};

/// Smallest distance zeniths keep from the poles.
pub const ZENITH_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subpath {
    pub id: usize,
    pub excess_delay_ns: f64,
    pub power_mw: f64,
    /// [0, 2π)
    pub phase_rad: f64,
    /// (-π, π]
    pub aod_az: f64,
    /// (0, π)
    pub zod: f64,
    pub aoa_az: f64,
    pub zoa: f64,
    pub is_los_component: bool,
}

impl Subpath {
    /// `[AOD, ZOD, AOA, ZOA]`.
    pub fn angles(&self) -> [f64; 4] {
        [self.aod_az, self.zod, self.aoa_az, self.zoa]
    }

    pub fn set_angles(&mut self, a: [f64; 4]) {
        [self.aod_az, self.zod, self.aoa_az, self.zoa] = a;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeCluster {
    pub id: usize,
    /// Ordered by excess delay.
    pub subpaths: Vec<Subpath>,
    /// Cluster shadowing Z_n, dB.
    pub shadowing_db: f64,
}

impl TimeCluster {
    pub fn excess_delay_ns(&self) -> f64 {
        self.subpaths[0].excess_delay_ns
    }

    pub fn power_mw(&self) -> f64 {
        self.subpaths.iter().map(|s| s.power_mw).sum()
    }
}

/// The omnidirectional CIR at one trajectory point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelSnapshot {
    pub step: usize,
    pub time: f64,
    pub ut_position: Vec2,
    pub heading: f64,
    pub los_state: LosState,
    pub d_2d: f64,
    pub d_3d: f64,
    /// Includes `shadow_fading_db`.
    pub path_loss_db: f64,
    pub shadow_fading_db: f64,
    pub total_received_power_mw: f64,
    /// Absolute propagation delay of excess delay 0.
    pub reference_delay_ns: f64,
    pub clusters: Vec<TimeCluster>,
}

impl ChannelSnapshot {
    pub fn subpaths(&self) -> impl Iterator<Item = (&TimeCluster, &Subpath)> {
        self.clusters
            .iter()
            .flat_map(|c| c.subpaths.iter().map(move |s| (c, s)))
    }

    pub fn subpath_count(&self) -> usize {
        self.clusters.iter().map(|c| c.subpaths.len()).sum()
    }

    pub fn power_sum_mw(&self) -> f64 {
        self.subpaths().map(|(_, s)| s.power_mw).sum()
    }

    pub fn rx_power_dbm(&self) -> f64 {
        10.0 * self.total_received_power_mw.log10()
    }

    pub fn has_los_component(&self) -> bool {
        self.subpaths().any(|(_, s)| s.is_los_component)
    }

    /// Non-direct subpath count per cluster.
    pub fn layout(&self) -> ClusterLayout {
        self.clusters
            .iter()
            .map(|c| c.subpaths.iter().filter(|s| !s.is_los_component).count())
            .collect()
    }
}

/// Free-space loss at the 1 m reference distance, dB.
pub fn fspl_1m_db(frequency_hz: f64) -> f64 {
    20.0 * (4.0 * PI * frequency_hz / SPEED_OF_LIGHT).log10()
}

/// Close-in reference-distance path loss.
pub fn path_loss_db(frequency_hz: f64, d_3d: f64, exponent: f64, sf_db: f64) -> Result<f64> {
    if !(d_3d >= 1.0) {
        return Err(Error::DistanceBelowReference(d_3d));
    }
    Ok(fspl_1m_db(frequency_hz) + 10.0 * exponent * d_3d.log10() + sf_db)
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Power-delay decay constants in use for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerDecay {
    pub cluster_ns: f64,
    pub subpath_ns: f64,
}

impl PowerDecay {
    pub fn for_state(config: &SimulationConfig, state: LosState) -> Self {
        let d = &config.drop;
        match state {
            LosState::Los => Self {
                cluster_ns: d.cluster_decay_los_ns,
                subpath_ns: d.subpath_decay_los_ns,
            },
            LosState::Nlos => Self {
                cluster_ns: d.cluster_decay_nlos_ns,
                subpath_ns: d.subpath_decay_nlos_ns,
            },
        }
    }
}

pub fn path_loss_exponent(config: &SimulationConfig, state: LosState) -> f64 {
    match state {
        LosState::Los => config.path_loss.exponent_los,
        LosState::Nlos => config.path_loss.exponent_nlos,
    }
}

pub fn large_scale_sigma_db(config: &SimulationConfig, state: LosState) -> f64 {
    match state {
        LosState::Los => config.path_loss.sf_sigma_los_db,
        LosState::Nlos => config.path_loss.sf_sigma_nlos_db,
    }
}

/// Splits `total_power_mw` over clusters and subpaths.
///
/// Cluster share ∝ exp(-τ_n / Γ) 10^(Z_n / 10) with τ_n the cluster excess
/// delay; subpath share within a cluster ∝ exp(-(τ - τ_n) / γ) 10^(U / 10).
/// `subpath_u_db[c]` is positional, aligned with `clusters[c].subpaths`.
pub fn allocate_powers(
    clusters: &mut [TimeCluster],
    total_power_mw: f64,
    cluster_z_db: &[f64],
    subpath_u_db: &[Vec<f64>],
    decay: PowerDecay,
) -> Result<()> {
    if !(total_power_mw > 0.0 && total_power_mw.is_finite()) {
        return Err(Error::NonPositiveTotalPower(total_power_mw));
    }
    // Weights are formed relative to the earliest cluster to keep exp() in range.
    let t0 = clusters
        .iter()
        .map(TimeCluster::excess_delay_ns)
        .fold(f64::INFINITY, f64::min);
    let cluster_w: Vec<f64> = clusters
        .iter()
        .zip(cluster_z_db)
        .map(|(c, z)| (-(c.excess_delay_ns() - t0) / decay.cluster_ns).exp() * 10f64.powf(z / 10.0))
        .collect();
    let cluster_sum: f64 = cluster_w.iter().sum();

    for ((cluster, cw), (z, u)) in clusters
        .iter_mut()
        .zip(&cluster_w)
        .zip(cluster_z_db.iter().zip(subpath_u_db))
    {
        cluster.shadowing_db = *z;
        let start = cluster.excess_delay_ns();
        let w: Vec<f64> = cluster
            .subpaths
            .iter()
            .zip(u)
            .map(|(s, u)| {
                (-(s.excess_delay_ns - start) / decay.subpath_ns).exp() * 10f64.powf(u / 10.0)
            })
            .collect();
        let sum: f64 = w.iter().sum();
        let cluster_power = total_power_mw * cw / cluster_sum;
        for (s, w) in cluster.subpaths.iter_mut().zip(w) {
            s.power_mw = cluster_power * w / sum;
        }
    }
    Ok(())
}

/// Direct-path subpath for the given link.
pub fn los_component(link: &LinkGeometry, phase_rad: f64) -> Subpath {
    Subpath {
        id: 0,
        excess_delay_ns: 0.0,
        power_mw: 0.0,
        phase_rad,
        aod_az: link.los_aod(),
        zod: link.los_zod(),
        aoa_az: link.los_aoa(),
        zoa: link.los_zoa(),
        is_los_component: true,
    }
}

fn zenith_about_horizon<R: Rng + ?Sized>(rng: &mut R, spread: f64) -> f64 {
    (FRAC_PI_2 + laplace(rng, spread)).clamp(ZENITH_MARGIN, PI - ZENITH_MARGIN)
}

/// Draws the anchor CIR at the start position.
///
/// Shadowing (large-scale, Z_n and U) is drawn i.i.d. from `rng` here; the
/// runner replaces it with correlated map samples before the first output.
pub fn generate_initial_drop<R: Rng + ?Sized>(
    config: &SimulationConfig,
    link: &LinkGeometry,
    los_state: LosState,
    rng: &mut R,
) -> Result<ChannelSnapshot> {
    let d = &config.drop;
    let is_los = los_state.is_los();
    let mean_delay = if is_los {
        d.mean_cluster_delay_los_ns
    } else {
        d.mean_cluster_delay_nlos_ns
    };
    let gap = Exp::new(1.0 / mean_delay).expect("positive mean delay");

    let n_clusters = rng.random_range(1..=d.max_clusters);
    let mut clusters = Vec::with_capacity(n_clusters);
    let mut cluster_start = 0.0;
    for c in 0..n_clusters {
        if c > 0 {
            let prev_end = clusters
                .last()
                .map(|p: &TimeCluster| p.subpaths.last().unwrap().excess_delay_ns)
                .unwrap();
            // the void keeps clusters apart even for a zero-length gap draw
            cluster_start = prev_end + d.inter_cluster_void_ns + gap.sample(rng);
        }
        let n_sub = rng.random_range(1..=d.max_subpaths);
        let x = rng.random::<f64>() * d.subpath_delay_exponent_max;
        let lobe_aod = uniform_left_open(rng, -PI, PI);
        let lobe_aoa = uniform_left_open(rng, -PI, PI);
        // the direct path takes offset 0 of the first cluster
        let first_slot = usize::from(is_los && c == 0);
        let subpaths = (0..n_sub)
            .map(|m| {
                let slot = (m + first_slot) as f64;
                Subpath {
                    id: m + 1,
                    excess_delay_ns: cluster_start + (slot * d.subpath_spacing_ns).powf(1.0 + x),
                    power_mw: 0.0,
                    phase_rad: rng.random::<f64>() * TAU,
                    aod_az: wrap_pi(lobe_aod + laplace(rng, d.lobe_azimuth_spread_rad)),
                    zod: zenith_about_horizon(rng, d.zenith_spread_rad),
                    aoa_az: wrap_pi(lobe_aoa + laplace(rng, d.lobe_azimuth_spread_rad)),
                    zoa: zenith_about_horizon(rng, d.zenith_spread_rad),
                    is_los_component: false,
                }
            })
            .collect();
        clusters.push(TimeCluster {
            id: c,
            subpaths,
            shadowing_db: 0.0,
        });
    }
    if is_los {
        let phase = rng.random::<f64>() * TAU;
        clusters[0].subpaths.insert(0, los_component(link, phase));
    }

    let sigma_sf = large_scale_sigma_db(config, los_state);
    let sf_db = if sigma_sf > 0.0 {
        Normal::new(0.0, sigma_sf).unwrap().sample(rng)
    } else {
        0.0
    };
    let z = Normal::new(0.0, d.cluster_sf_sigma_db.max(0.0)).unwrap();
    let u = Normal::new(0.0, d.subpath_sf_sigma_db.max(0.0)).unwrap();
    let shadowing = ShadowingValues {
        cluster_db: clusters.iter().map(|_| z.sample(rng)).collect(),
        subpath_db: clusters
            .iter()
            .map(|c| {
                c.subpaths
                    .iter()
                    .map(|s| {
                        if s.is_los_component {
                            0.0
                        } else {
                            u.sample(rng)
                        }
                    })
                    .collect()
            })
            .collect(),
    };

    let d_3d = link.d_3d();
    let path_loss = path_loss_db(
        config.scenario.carrier_frequency_hz,
        d_3d,
        path_loss_exponent(config, los_state),
        sf_db,
    )?;
    let total = dbm_to_mw(config.scenario.tx_power_dbm - path_loss);
    allocate_powers(
        &mut clusters,
        total,
        &shadowing.cluster_db,
        &shadowing.subpath_db,
        PowerDecay::for_state(config, los_state),
    )?;

    Ok(ChannelSnapshot {
        step: 0,
        time: 0.0,
        ut_position: link.ut_position,
        heading: 0.0,
        los_state,
        d_2d: link.d_2d(),
        d_3d,
        path_loss_db: path_loss,
        shadow_fading_db: sf_db,
        total_received_power_mw: total,
        reference_delay_ns: d_3d / SPEED_OF_LIGHT * 1e9,
        clusters,
    })
}
