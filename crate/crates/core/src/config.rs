//! Run configuration.
//!
//! A [`SimulationConfig`] is the single source of truth for a run. On disk it
//! is a TOML file with one flat table per subsystem; every key except
//! `rng_seed` has a default:
//!
//! ```toml
//! rng_seed = 7
//!
//! [scenario]
//! kind = "UMi"                 # UMi | UMa | RMa
//! carrier_frequency_hz = 73e9
//! tx_power_dbm = 30.0
//! los_override = "auto"        # auto | los | nlos
//!
//! [geometry]
//! tr_separation_2d_m = 50.0
//! bs_height_m = 10.0
//! ut_height_m = 1.5
//!
//! [motion]
//! ut_speed_mps = 1.0
//! track = "half_hexagon"       # half_hexagon | linear
//! heading_rad = 1.5707963      # linear tracks only
//! turn = "left"                # half_hexagon only: left | right
//! track_length_m = 20.0
//! update_distance_m = 0.25
//! ```
//!
//! plus `[maps]`, `[path_loss]`, `[drop]` and `[evolution]` tables, see the
//! field docs below and `README.md`.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::trajectory::Trajectory;

/// Propagation scenario; selects the LOS-probability law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    UMi,
    UMa,
    RMa,
}

/// Forces the propagation condition instead of reading the correlated LOS map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LosOverride {
    Auto,
    Los,
    Nlos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackKind {
    Linear,
    HalfHexagon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnDirection {
    Left,
    Right,
}

/// Zenith slope law used by the angle evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZenithSlope {
    /// Radial speed over 3-D distance, scaled by the cosine of the current
    /// zenith (exact for the direct path).
    Projected,
    /// Radial speed over 3-D distance with no zenith factor.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: Scenario,
    pub carrier_frequency_hz: f64,
    pub tx_power_dbm: f64,
    pub los_override: LosOverride,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            kind: Scenario::UMi,
            carrier_frequency_hz: 73e9,
            tx_power_dbm: 30.0,
            los_override: LosOverride::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    /// Horizontal BS-UT distance at the start of the track.
    pub tr_separation_2d_m: f64,
    pub bs_height_m: f64,
    pub ut_height_m: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            tr_separation_2d_m: 50.0,
            bs_height_m: 10.0,
            ut_height_m: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionSection {
    pub ut_speed_mps: f64,
    pub track: TrackKind,
    /// Heading of a linear track, radians from +x (BS at origin, UT starts on +x).
    pub heading_rad: f64,
    pub turn: TurnDirection,
    pub track_length_m: f64,
    pub update_distance_m: f64,
}

impl Default for MotionSection {
    fn default() -> Self {
        Self {
            ut_speed_mps: 1.0,
            track: TrackKind::HalfHexagon,
            heading_rad: std::f64::consts::FRAC_PI_2,
            turn: TurnDirection::Left,
            track_length_m: 20.0,
            update_distance_m: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapsSection {
    pub correlation_distance_los_m: f64,
    pub correlation_distance_sf_m: f64,
    pub map_resolution_m: f64,
    /// Width/height of the LOS map. When absent the map covers the BS and the
    /// whole track plus one LOS correlation distance on every side.
    pub los_map_extent_m: Option<[f64; 2]>,
    /// Width/height of the shadow-fading maps, centered on the track.
    pub sf_map_extent_m: [f64; 2],
}

impl Default for MapsSection {
    fn default() -> Self {
        Self {
            correlation_distance_los_m: 50.0,
            correlation_distance_sf_m: 15.0,
            map_resolution_m: 1.0,
            los_map_extent_m: None,
            sf_map_extent_m: [50.0, 50.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossSection {
    pub exponent_los: f64,
    pub exponent_nlos: f64,
    pub sf_sigma_los_db: f64,
    pub sf_sigma_nlos_db: f64,
}

impl Default for PathLossSection {
    fn default() -> Self {
        Self {
            exponent_los: 2.0,
            exponent_nlos: 3.2,
            sf_sigma_los_db: 4.0,
            sf_sigma_nlos_db: 7.0,
        }
    }
}

/// Distribution parameters of the anchor (t = 0) drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DropSection {
    /// Cluster count is uniform on 1..=max_clusters.
    pub max_clusters: usize,
    /// Subpaths per cluster are uniform on 1..=max_subpaths.
    pub max_subpaths: usize,
    pub mean_cluster_delay_los_ns: f64,
    pub mean_cluster_delay_nlos_ns: f64,
    /// Minimum gap between the end of one cluster and the start of the next.
    pub inter_cluster_void_ns: f64,
    /// Base intra-cluster subpath spacing (1 / baseband bandwidth).
    pub subpath_spacing_ns: f64,
    /// Intra-cluster offsets are (m * spacing)^(1 + X), X ~ U(0, this).
    pub subpath_delay_exponent_max: f64,
    pub cluster_decay_los_ns: f64,
    pub cluster_decay_nlos_ns: f64,
    pub subpath_decay_los_ns: f64,
    pub subpath_decay_nlos_ns: f64,
    /// sigma_Z, cluster shadowing.
    pub cluster_sf_sigma_db: f64,
    /// sigma_U, subpath shadowing.
    pub subpath_sf_sigma_db: f64,
    /// Laplacian scale of subpath azimuths about their lobe center.
    pub lobe_azimuth_spread_rad: f64,
    /// Laplacian scale of zeniths about the horizon.
    pub zenith_spread_rad: f64,
}

impl Default for DropSection {
    fn default() -> Self {
        Self {
            max_clusters: 6,
            max_subpaths: 30,
            mean_cluster_delay_los_ns: 123.0,
            mean_cluster_delay_nlos_ns: 83.0,
            inter_cluster_void_ns: 25.0,
            subpath_spacing_ns: 1.25,
            subpath_delay_exponent_max: 0.43,
            cluster_decay_los_ns: 25.9,
            cluster_decay_nlos_ns: 51.0,
            subpath_decay_los_ns: 16.9,
            subpath_decay_nlos_ns: 15.5,
            cluster_sf_sigma_db: 3.0,
            subpath_sf_sigma_db: 3.0,
            lobe_azimuth_spread_rad: 0.15,
            zenith_spread_rad: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionSection {
    pub zenith_slope: ZenithSlope,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        Self {
            zenith_slope: ZenithSlope::Projected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub rng_seed: u64,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub motion: MotionSection,
    #[serde(default)]
    pub maps: MapsSection,
    #[serde(default)]
    pub path_loss: PathLossSection,
    #[serde(default)]
    pub drop: DropSection,
    #[serde(default)]
    pub evolution: EvolutionSection,
}

/// One failed configuration constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

/// Axis-aligned rectangle in the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub min: Vec2,
    pub max: Vec2,
}

impl Extent {
    pub fn centered(center: Vec2, width: f64, height: f64) -> Self {
        let half = Vec2::new(width / 2.0, height / 2.0);
        Self {
            min: center - half,
            max: center + half,
        }
    }

    pub fn bounding(points: impl IntoIterator<Item = Vec2>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut e = Extent {
            min: first,
            max: first,
        };
        for p in it {
            e.min.x = e.min.x.min(p.x);
            e.min.y = e.min.y.min(p.y);
            e.max.x = e.max.x.max(p.x);
            e.max.y = e.max.y.max(p.y);
        }
        Some(e)
    }

    pub fn grow(self, margin: f64) -> Self {
        let m = Vec2::new(margin, margin);
        Self {
            min: self.min - m,
            max: self.max + m,
        }
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    /// True when `p` lies inside with at least `margin` to every edge.
    pub fn contains_with_margin(&self, p: Vec2, margin: f64) -> bool {
        let eps = 1e-9;
        p.x - self.min.x >= margin - eps
            && self.max.x - p.x >= margin - eps
            && p.y - self.min.y >= margin - eps
            && self.max.y - p.y >= margin - eps
    }
}

/// The BS sits at the origin for every run.
pub const BS_POSITION: Vec2 = Vec2::ZERO;

impl SimulationConfig {
    /// Defaults for every key, with the given seed.
    pub fn with_seed(rng_seed: u64) -> Self {
        Self {
            rng_seed,
            scenario: ScenarioSection::default(),
            geometry: GeometrySection::default(),
            motion: MotionSection::default(),
            maps: MapsSection::default(),
            path_loss: PathLossSection::default(),
            drop: DropSection::default(),
            evolution: EvolutionSection::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        // every field is a plain scalar/array; serialization cannot fail
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Reads a config file and applies `section.key=value` overrides in order.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
        for ov in overrides {
            apply_override(&mut doc, ov)?;
        }
        toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))
    }

    /// Time between trajectory updates.
    pub fn update_interval_s(&self) -> f64 {
        self.motion.update_distance_m / self.motion.ut_speed_mps
    }

    /// Initial UT position: on +x at the configured T-R separation.
    pub fn start_position(&self) -> Vec2 {
        Vec2::new(self.geometry.tr_separation_2d_m, 0.0)
    }

    /// Extent of the correlated LOS map.
    pub fn los_map_extent(&self, trajectory: &Trajectory) -> Extent {
        let bbox = Extent::bounding(
            std::iter::once(BS_POSITION).chain(trajectory.points.iter().map(|p| p.position)),
        )
        .expect("bounding box of at least the BS");
        match self.maps.los_map_extent_m {
            Some([w, h]) => Extent::centered(bbox.center(), w, h),
            None => bbox.grow(self.maps.correlation_distance_los_m),
        }
    }

    /// Extent of the shadow-fading maps: centered on the track's bounding box.
    pub fn sf_map_extent(&self, trajectory: &Trajectory) -> Extent {
        let [w, h] = self.maps.sf_map_extent_m;
        Extent::centered(trajectory.bounding_box().center(), w, h)
    }

    /// Checks every constraint and reports all violations, not just the first.
    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let mut v = Vec::new();
        let mut bad = |field: &str, reason: String| {
            v.push(Violation {
                field: field.to_string(),
                reason,
            })
        };

        let f = self.scenario.carrier_frequency_hz;
        if !(0.8e9..=100e9).contains(&f) {
            bad(
                "scenario.carrier_frequency_hz",
                format!("{f} Hz outside 0.8-100 GHz"),
            );
        }
        if !self.scenario.tx_power_dbm.is_finite() {
            bad("scenario.tx_power_dbm", "must be finite".into());
        }

        let g = &self.geometry;
        if !(g.tr_separation_2d_m > 0.0) {
            bad("geometry.tr_separation_2d_m", "must be positive".into());
        }
        if !(g.bs_height_m > 0.0) {
            bad("geometry.bs_height_m", "must be positive".into());
        }
        if !(g.ut_height_m > 0.0) {
            bad("geometry.ut_height_m", "must be positive".into());
        }

        let m = &self.motion;
        let motion_ok = m.ut_speed_mps > 0.0
            && m.track_length_m > 0.0
            && m.update_distance_m > 0.0
            && m.update_distance_m <= 1.0
            && m.heading_rad.is_finite();
        if !(m.ut_speed_mps > 0.0) {
            bad("motion.ut_speed_mps", "must be positive".into());
        }
        if !(m.track_length_m > 0.0) {
            bad("motion.track_length_m", "must be positive".into());
        }
        if !(m.update_distance_m > 0.0) {
            bad("motion.update_distance_m", "must be positive".into());
        } else if m.update_distance_m > 1.0 {
            bad(
                "motion.update_distance_m",
                format!("{} m exceeds 1 m", m.update_distance_m),
            );
        } else if m.track_length_m > 0.0 && m.track_length_m < m.update_distance_m - 1e-12 {
            bad(
                "motion.track_length_m",
                "shorter than one update distance".into(),
            );
        }
        if !m.heading_rad.is_finite() {
            bad("motion.heading_rad", "must be finite".into());
        }
        if m.track == TrackKind::HalfHexagon
            && g.tr_separation_2d_m > 0.0
            && m.track_length_m / 3.0 >= g.tr_separation_2d_m
        {
            bad(
                "motion.track_length_m",
                "half-hexagon side must be shorter than the T-R separation".into(),
            );
        }

        let mp = &self.maps;
        if !(mp.correlation_distance_los_m > 0.0) {
            bad("maps.correlation_distance_los_m", "must be positive".into());
        }
        if !(mp.correlation_distance_sf_m > 0.0) {
            bad("maps.correlation_distance_sf_m", "must be positive".into());
        }
        if !(mp.map_resolution_m > 0.0) {
            bad("maps.map_resolution_m", "must be positive".into());
        }
        if let Some([w, h]) = mp.los_map_extent_m {
            if !(w > 0.0 && h > 0.0) {
                bad("maps.los_map_extent_m", "must be positive".into());
            }
        }
        if !(mp.sf_map_extent_m[0] > 0.0 && mp.sf_map_extent_m[1] > 0.0) {
            bad("maps.sf_map_extent_m", "must be positive".into());
        }

        let pl = &self.path_loss;
        for (name, val) in [
            ("path_loss.exponent_los", pl.exponent_los),
            ("path_loss.exponent_nlos", pl.exponent_nlos),
        ] {
            if !(val > 0.0) {
                bad(name, "must be positive".into());
            }
        }
        for (name, val) in [
            ("path_loss.sf_sigma_los_db", pl.sf_sigma_los_db),
            ("path_loss.sf_sigma_nlos_db", pl.sf_sigma_nlos_db),
        ] {
            if !(val >= 0.0) {
                bad(name, "must be non-negative".into());
            }
        }

        let d = &self.drop;
        if d.max_clusters == 0 {
            bad("drop.max_clusters", "must be at least 1".into());
        }
        if d.max_subpaths == 0 {
            bad("drop.max_subpaths", "must be at least 1".into());
        }
        for (name, val) in [
            (
                "drop.mean_cluster_delay_los_ns",
                d.mean_cluster_delay_los_ns,
            ),
            (
                "drop.mean_cluster_delay_nlos_ns",
                d.mean_cluster_delay_nlos_ns,
            ),
            ("drop.subpath_spacing_ns", d.subpath_spacing_ns),
            ("drop.cluster_decay_los_ns", d.cluster_decay_los_ns),
            ("drop.cluster_decay_nlos_ns", d.cluster_decay_nlos_ns),
            ("drop.subpath_decay_los_ns", d.subpath_decay_los_ns),
            ("drop.subpath_decay_nlos_ns", d.subpath_decay_nlos_ns),
        ] {
            if !(val > 0.0) {
                bad(name, "must be positive".into());
            }
        }
        for (name, val) in [
            ("drop.inter_cluster_void_ns", d.inter_cluster_void_ns),
            (
                "drop.subpath_delay_exponent_max",
                d.subpath_delay_exponent_max,
            ),
            ("drop.cluster_sf_sigma_db", d.cluster_sf_sigma_db),
            ("drop.subpath_sf_sigma_db", d.subpath_sf_sigma_db),
            ("drop.lobe_azimuth_spread_rad", d.lobe_azimuth_spread_rad),
            ("drop.zenith_spread_rad", d.zenith_spread_rad),
        ] {
            if !(val >= 0.0 && val.is_finite()) {
                bad(name, "must be non-negative".into());
            }
        }

        // Checks that need the track itself.
        if v.is_empty() && motion_ok {
            let traj = Trajectory::generate(self);
            let bs_margin = traj
                .points
                .iter()
                .map(|p| {
                    p.position
                        .distance(BS_POSITION)
                        .hypot(g.bs_height_m - g.ut_height_m)
                })
                .fold(f64::INFINITY, f64::min);
            if bs_margin < 1.0 {
                v.push(Violation {
                    field: "motion".into(),
                    reason: "track passes within 1 m (3-D) of the BS".into(),
                });
            }
            let los_extent = self.los_map_extent(&traj);
            let dd = mp.correlation_distance_los_m;
            let inside = std::iter::once(BS_POSITION)
                .chain(traj.points.iter().map(|p| p.position))
                .all(|p| los_extent.contains_with_margin(p, dd));
            if !inside {
                v.push(Violation {
                    field: "maps.los_map_extent_m".into(),
                    reason: format!("must contain the BS and the track with a {dd} m margin"),
                });
            }
            let sf_extent = self.sf_map_extent(&traj);
            let dd = mp.correlation_distance_sf_m;
            if !traj
                .points
                .iter()
                .all(|p| sf_extent.contains_with_margin(p.position, dd))
            {
                v.push(Violation {
                    field: "maps.sf_map_extent_m".into(),
                    reason: format!("must contain the track with a {dd} m margin"),
                });
            }
        }

        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    /// `validate` as an [`Error`].
    pub fn validated(self) -> Result<Self> {
        match self.validate() {
            Ok(()) => Ok(self),
            Err(v) => Err(Error::InvalidConfig(v)),
        }
    }
}

fn apply_override(doc: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::ConfigParse(format!("override `{item}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    // Parse the value as a TOML expression; fall back to a bare string so
    // `scenario.kind=UMa` works without quoting.
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::ConfigParse(format!("override `{item}` has an empty key")))?;
    let mut table = doc;
    for part in parts {
        table = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                Error::ConfigParse(format!("override `{item}`: `{part}` is not a table"))
            })?;
    }
    table.insert(leaf.to_string(), value);
    Ok(())
}
