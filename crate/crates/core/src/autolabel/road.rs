use serde::{Deserialize, Serialize};

/// Constant-curvature road centerline in the map ground plane.
///
/// `curvature > 0` turns left. Lateral offsets are positive to the right of
/// the direction of travel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub origin: [f64; 2],
    pub heading: f64,
    pub curvature: f64,
}

impl Road {
    fn straight(&self) -> bool {
        self.curvature.abs() < 1e-12
    }

    /// Center of the turning circle.
    fn center(&self) -> [f64; 2] {
        let r = 1.0 / self.curvature;
        let (s, c) = self.heading.sin_cos();
        [self.origin[0] - r * s, self.origin[1] + r * c]
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        self.heading + self.curvature * s
    }

    /// Point at arc length `s` and lateral offset `d`.
    pub fn point(&self, s: f64, d: f64) -> [f64; 2] {
        let h = self.heading_at(s);
        let c = if self.straight() {
            let (sh, ch) = self.heading.sin_cos();
            [self.origin[0] + s * ch, self.origin[1] + s * sh]
        } else {
            let k = self.curvature;
            let (s0, c0) = self.heading.sin_cos();
            [
                self.origin[0] + ((h.sin() - s0) / k),
                self.origin[1] - ((h.cos() - c0) / k),
            ]
        };
        let (sh, ch) = h.sin_cos();
        [c[0] + d * sh, c[1] - d * ch]
    }

    /// Inverse of [`Road::point`]: `(s, d)` of a ground-plane point.
    pub fn frenet(&self, x: f64, y: f64) -> (f64, f64) {
        if self.straight() {
            let (sh, ch) = self.heading.sin_cos();
            let (dx, dy) = (x - self.origin[0], y - self.origin[1]);
            return (dx * ch + dy * sh, dx * sh - dy * ch);
        }
        let k = self.curvature;
        let c = self.center();
        let (dx, dy) = (x - c[0], y - c[1]);
        let r = dx.hypot(dy);
        let d = k.signum() * (r - 1.0 / k.abs());
        let phi0 = (self.origin[1] - c[1]).atan2(self.origin[0] - c[0]);
        let mut dphi = dy.atan2(dx) - phi0;
        while dphi > std::f64::consts::PI {
            dphi -= 2.0 * std::f64::consts::PI;
        }
        while dphi <= -std::f64::consts::PI {
            dphi += 2.0 * std::f64::consts::PI;
        }
        (dphi / k, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frenet_inverts_point() {
        for k in [0.0, 1.0 / 400.0, -1.0 / 300.0] {
            let road = Road {
                origin: [5.0, -3.0],
                heading: 0.4,
                curvature: k,
            };
            for (s, d) in [(0.0, 0.0), (37.5, 1.8), (150.0, -5.4), (220.0, 3.0)] {
                let p = road.point(s, d);
                let (s2, d2) = road.frenet(p[0], p[1]);
                assert!((s - s2).abs() < 1e-9 && (d - d2).abs() < 1e-9, "k={k} {s},{d} -> {s2},{d2}");
            }
        }
    }

    #[test]
    fn right_is_positive() {
        let road = Road {
            origin: [0.0, 0.0],
            heading: 0.0,
            curvature: 0.0,
        };
        assert_eq!(road.point(10.0, 2.0), [10.0, -2.0]);
    }
}
