use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::segment::segment;
use super::{SegmentParams, SpectralError};
use crate::mesh::{remesh, RemeshParams, TriangleMesh};

/// Resolutions (faces) of the reference sweep.
pub const SWEEP_RESOLUTIONS: [usize; 5] = [15_000, 20_000, 25_000, 30_000, 35_000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub resolution: usize,
    pub face_count: usize,
    pub predicted_k: usize,
    pub wall_time_secs: f64,
}

/// Remesh to each resolution and segment with the predicted k.
pub fn stability_sweep(
    mesh: &TriangleMesh,
    resolutions: &[usize],
    remesh_params: &RemeshParams,
    params: &SegmentParams,
) -> Result<Vec<SweepPoint>, SpectralError> {
    if resolutions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SpectralError::InvalidParams("resolutions must be strictly ascending".into()));
    }
    resolutions
        .iter()
        .map(|&resolution| {
            let start = Instant::now();
            let p = RemeshParams {
                target_resolution: resolution,
                ..*remesh_params
            };
            let remeshed = remesh(mesh, &p)?;
            let seg = segment(&remeshed, None, params)?;
            Ok(SweepPoint {
                resolution,
                face_count: remeshed.face_count(),
                predicted_k: seg.predicted_k,
                wall_time_secs: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

/// Lowest resolution `r` such that the predicted k is identical at every
/// sweep point at or above `r`. `None` only for an empty sweep.
///
/// The last point always qualifies, so pair this with
/// [`stable_run_length`] when a settled k should span several points.
pub fn stabilization_resolution(points: &[SweepPoint]) -> Option<usize> {
    let n = stable_run_length(points);
    (n > 0).then(|| points[points.len() - n].resolution)
}

/// Number of trailing sweep points sharing the final predicted k.
pub fn stable_run_length(points: &[SweepPoint]) -> usize {
    let Some(last) = points.last() else {
        return 0;
    };
    points.iter().rev().take_while(|p| p.predicted_k == last.predicted_k).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(ks: &[usize]) -> Vec<SweepPoint> {
        ks.iter()
            .enumerate()
            .map(|(i, &k)| SweepPoint {
                resolution: SWEEP_RESOLUTIONS[i],
                face_count: SWEEP_RESOLUTIONS[i],
                predicted_k: k,
                wall_time_secs: 0.0,
            })
            .collect()
    }

    #[test]
    fn constant_k_stabilizes_at_first() {
        assert_eq!(stabilization_resolution(&pts(&[4, 4, 4, 4, 4])), Some(15_000));
    }

    #[test]
    fn settles_midway() {
        assert_eq!(stabilization_resolution(&pts(&[3, 5, 4, 4, 4])), Some(25_000));
        assert_eq!(stabilization_resolution(&pts(&[3, 5, 4, 6, 6])), Some(30_000));
    }

    #[test]
    fn change_at_the_end_settles_on_the_last_point() {
        let p = pts(&[4, 4, 4, 4, 5]);
        assert_eq!(stabilization_resolution(&p), Some(35_000));
        assert_eq!(stable_run_length(&p), 1);
        assert_eq!(stable_run_length(&pts(&[3, 5, 4, 4, 4])), 3);
        assert_eq!(stabilization_resolution(&[]), None);
        assert_eq!(stable_run_length(&[]), 0);
    }

    #[test]
    fn rejects_unsorted() {
        let mesh = crate::primitives::unit_cube();
        let r = stability_sweep(&mesh, &[200, 100], &RemeshParams::default(), &SegmentParams::default());
        assert!(matches!(r, Err(SpectralError::InvalidParams(_))));
    }

    #[test]
    fn small_sweep_runs() {
        let mesh = crate::primitives::cylinder(1.0, 4.0, 16, 0.5);
        let out = stability_sweep(&mesh, &[600, 900], &RemeshParams::default(), &SegmentParams::default()).unwrap();
        assert_eq!(out.len(), 2);
        for p in &out {
            assert!((p.face_count as f64 - p.resolution as f64).abs() <= 0.02 * p.resolution as f64);
        }
    }
}
