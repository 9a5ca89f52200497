use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autolabel::types::{LidarPoint, Side, Trajectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterParams {
    pub intensity_min: f64,
    pub ground_tol_m: f64,
    pub lat_min: f64,
    pub lat_max: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            intensity_min: 120.0,
            ground_tol_m: 0.3,
            lat_min: 1.4,
            lat_max: 2.2,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lat_min >= 0.0 && self.lat_min < self.lat_max && self.ground_tol_m >= 0.0) {
            return Err(Error::config(format!("invalid point filter {self:?}")));
        }
        Ok(())
    }

    /// Side of a point given its intensity, height above ground and signed
    /// lateral distance (negative left), or `None` if it is rejected.
    pub fn classify(&self, intensity: f64, height: f64, d: f64) -> Option<Side> {
        let keep = intensity >= self.intensity_min
            && height.abs() <= self.ground_tol_m
            && d.abs() > self.lat_min
            && d.abs() < self.lat_max;
        match keep {
            false => None,
            true if d < 0.0 => Some(Side::Left),
            true => Some(Side::Right),
        }
    }
}

/// A retained point with its trajectory coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub point: LidarPoint,
    pub s: f64,
    pub d: f64,
    /// Height above the local ground.
    pub h: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Candidates {
    pub left: Vec<BoundaryPoint>,
    pub right: Vec<BoundaryPoint>,
}

impl Candidates {
    pub fn side(&self, side: Side) -> &[BoundaryPoint] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

/// Splits the paint candidates of a cloud into left and right sets.
///
/// Points whose projection falls beyond either end of the trajectory are
/// ignored. An empty side is reported as [`Error::BoundaryNotFound`].
pub fn filter_points(cloud: &[LidarPoint], traj: &Trajectory, params: &FilterParams) -> Result<Candidates> {
    let tagged: Vec<(Side, BoundaryPoint)> = cloud
        .par_iter()
        .filter(|p| p.intensity >= params.intensity_min)
        .filter_map(|p| {
            let pr = traj.project(p.x, p.y);
            let h = p.z - pr.ground_z;
            let side = params.classify(p.intensity, h, pr.d).filter(|_| pr.covered)?;
            Some((
                side,
                BoundaryPoint {
                    point: *p,
                    s: pr.s,
                    d: pr.d,
                    h,
                },
            ))
        })
        .collect();
    let mut out = Candidates::default();
    for (side, bp) in tagged {
        match side {
            Side::Left => out.left.push(bp),
            Side::Right => out.right.push(bp),
        }
    }
    if out.left.is_empty() {
        return Err(Error::BoundaryNotFound("left"));
    }
    if out.right.is_empty() {
        return Err(Error::BoundaryNotFound("right"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autolabel::types::Pose;

    fn traj() -> Trajectory {
        Trajectory::new(
            (0..=10)
                .map(|i| Pose {
                    t: i as f64,
                    x: i as f64 * 10.0,
                    y: 0.0,
                    z: 0.0,
                    heading: 0.0,
                })
                .collect(),
        )
        .unwrap()
    }

    fn pt(x: f64, y: f64, z: f64, intensity: f64) -> LidarPoint {
        LidarPoint { x, y, z, intensity }
    }

    #[test]
    fn quoted_examples() {
        let f = FilterParams::default();
        // +y is left of travel, so lateral -1.8 is y = +1.8
        assert_eq!(f.classify(200.0, 0.01, -1.8), Some(Side::Left));
        assert_eq!(f.classify(200.0, 0.01, -1.0), None);
        assert_eq!(f.classify(200.0, 1.5, 1.8), None);
        assert_eq!(f.classify(200.0, 0.0, 1.8), Some(Side::Right));
    }

    #[test]
    fn lateral_limits_are_strict() {
        let f = FilterParams::default();
        for d in [1.4, 2.2, -1.4, -2.2] {
            assert_eq!(f.classify(255.0, 0.0, d), None, "{d}");
        }
        assert!(f.classify(255.0, 0.0, 1.4 + 1e-9).is_some());
        assert!(f.classify(255.0, 0.0, -2.2 + 1e-9).is_some());
    }

    #[test]
    fn cloud_split_and_missing_side() {
        let t = traj();
        let cloud = [pt(20.0, 1.8, 0.0, 200.0), pt(30.0, -1.7, 0.05, 150.0), pt(40.0, -1.7, 0.0, 50.0)];
        let c = filter_points(&cloud, &t, &FilterParams::default()).unwrap();
        assert_eq!(c.left.len(), 1);
        assert_eq!(c.right.len(), 1);
        let only_left = [pt(20.0, 1.8, 0.0, 200.0)];
        assert!(matches!(
            filter_points(&only_left, &t, &FilterParams::default()),
            Err(Error::BoundaryNotFound("right"))
        ));
    }
}
