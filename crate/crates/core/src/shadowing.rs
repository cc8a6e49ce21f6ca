//! Correlated shadowing maps for cluster (Z) and subpath (U) power factors.
//!
//! Each cluster and each non-direct subpath owns an independent Gaussian-unit
//! map; sampling a map at the UT position and scaling by σ_Z (σ_U) gives the
//! shadowing in dB.

use rand::Rng;

use crate::config::Extent;
use crate::error::Result;
use crate::field::{build_map_pair, CorrelatedGridMap, GridSpec};
use crate::geometry::Vec2;

/// Number of non-direct subpaths per cluster; cluster `c` has subpath ids
/// `1..=counts[c]`.
pub type ClusterLayout = Vec<usize>;

#[derive(Debug, Clone, PartialEq)]
pub struct ShadowingMaps {
    pub cluster: Vec<CorrelatedGridMap>,
    /// `subpath[c][id - 1]`.
    pub subpath: Vec<Vec<CorrelatedGridMap>>,
}

/// Shadowing draws in dB, laid out like [`ShadowingMaps`].
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowingValues {
    pub cluster_db: Vec<f64>,
    pub subpath_db: Vec<Vec<f64>>,
}

pub fn build_sf_maps<R: Rng + ?Sized>(
    layout: &ClusterLayout,
    extent: &Extent,
    resolution: f64,
    correlation_distance: f64,
    rng: &mut R,
) -> Result<ShadowingMaps> {
    let grid = GridSpec::covering(extent, resolution)?;
    let mut build = || build_map_pair(&grid, correlation_distance, rng).1;
    let cluster = layout.iter().map(|_| build()).collect();
    let subpath = layout
        .iter()
        .map(|&count| (0..count).map(|_| build()).collect())
        .collect();
    Ok(ShadowingMaps { cluster, subpath })
}

impl ShadowingMaps {
    /// Maps holding the same value everywhere; handy for isolating other effects.
    pub fn constant(layout: &ClusterLayout, grid: GridSpec, value: f64) -> Self {
        let map = CorrelatedGridMap::constant(grid, value);
        Self {
            cluster: layout.iter().map(|_| map.clone()).collect(),
            subpath: layout.iter().map(|&n| vec![map.clone(); n]).collect(),
        }
    }

    pub fn sample(
        &self,
        position: Vec2,
        sigma_z_db: f64,
        sigma_u_db: f64,
    ) -> Result<ShadowingValues> {
        let cluster_db = self
            .cluster
            .iter()
            .map(|m| Ok(sigma_z_db * m.sample(position)?))
            .collect::<Result<_>>()?;
        let subpath_db = self
            .subpath
            .iter()
            .map(|maps| {
                maps.iter()
                    .map(|m| Ok(sigma_u_db * m.sample(position)?))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(ShadowingValues {
            cluster_db,
            subpath_db,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn one_map_per_cluster_and_subpath() {
        let extent = Extent::centered(Vec2::new(50.0, 5.0), 20.0, 20.0);
        let layout = vec![3, 1, 2];
        let maps = build_sf_maps(
            &layout,
            &extent,
            1.0,
            3.0,
            &mut stream(1, Stream::ShadowingMaps),
        )
        .unwrap();
        assert_eq!(maps.cluster.len(), 3);
        assert_eq!(
            maps.subpath.iter().map(Vec::len).collect::<Vec<_>>(),
            layout
        );
        assert_ne!(maps.cluster[0].values, maps.cluster[1].values);
        let v = maps.sample(Vec2::new(50.0, 5.0), 3.0, 2.0).unwrap();
        assert_eq!(v.cluster_db.len(), 3);
        assert!(
            (v.cluster_db[0] - 3.0 * maps.cluster[0].sample(Vec2::new(50.0, 5.0)).unwrap()).abs()
                < 1e-15
        );
    }

    #[test]
    fn nearby_samples_are_close() {
        // 0.25 m apart on a 15 m correlation-distance field
        let extent = Extent::centered(Vec2::ZERO, 50.0, 50.0);
        let maps = build_sf_maps(
            &vec![1],
            &extent,
            1.0,
            15.0,
            &mut stream(2, Stream::ShadowingMaps),
        )
        .unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..40 {
            let p = Vec2::new(-5.0 + 0.25 * k as f64, 1.3);
            let q = p + Vec2::new(0.25, 0.0);
            let a = maps.cluster[0].sample(p).unwrap();
            let b = maps.cluster[0].sample(q).unwrap();
            worst = worst.max((a - b).abs());
        }
        assert!(worst < 0.25, "largest 0.25 m change {worst}");
    }
}
