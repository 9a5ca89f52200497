mod common;

use hpk_core::autolabel::{filter_points, FilterParams, FrameLabels, LidarPoint, Pose, Side, Trajectory};
use hpk_core::detector::types::{LanePolyline, VehicleBox, LANE, VEHICLE};
use hpk_core::detector::{rasterize_labels, shrink_box, RasterParams};
use hpk_core::geometry::GridGeometry;
use hpk_core::pipeline::augment::{warp_image, warp_labels, Homography};
use hpk_core::postprocess::camera::{ipm_to_3d, CameraModel};
use hpk_core::postprocess::dbscan::{dbscan_segments, segment_distance, DbscanParams, Segment3, SegmentMetric};
use hpk_core::postprocess::merge::{merge_boxes, similar, MergeParams};
use hpk_core::rect::Rect;
use image::{Rgb, RgbImage};
use proptest::prelude::*;

fn rect() -> impl Strategy<Value = Rect> {
    (0.0..300.0f64, 0.0..200.0f64, 4.0..80.0f64, 4.0..60.0f64).prop_map(|(x, y, w, h)| Rect::new(x, y, x + w, y + h))
}

fn vehicle() -> impl Strategy<Value = VehicleBox> {
    (rect(), 3.0..90.0f64, 0.0..1.0f64).prop_map(|(rect, depth, score)| VehicleBox { rect, depth, score })
}

fn point3(r: f64) -> impl Strategy<Value = [f64; 3]> {
    [-r..r, -r..r, -r..r]
}

fn segment() -> impl Strategy<Value = Segment3> {
    (point3(10.0), point3(1.5)).prop_map(|(a, d)| Segment3 {
        a,
        b: [a[0] + d[0], a[1] + d[1], a[2] + d[2]],
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn merge_output_is_a_fixpoint(boxes in prop::collection::vec(vehicle(), 0..40), eps in 0.05..0.4f64) {
        let p = MergeParams { eps, min_group: 2 };
        let once = merge_boxes(&boxes, &p);
        for (i, a) in once.iter().enumerate() {
            for b in &once[i + 1..] {
                prop_assert!(!similar(&a.rect, &b.rect, eps));
            }
        }
        let again = merge_boxes(&once, &MergeParams { eps, min_group: 1 });
        prop_assert_eq!(again, once);
    }

    #[test]
    fn merge_is_invariant_to_duplicating_singletons(b in vehicle()) {
        let out = merge_boxes(&[b, b, b], &MergeParams::default());
        prop_assert_eq!(out.len(), 1);
        let (r, q) = (out[0].rect.as_array(), b.rect.as_array());
        prop_assert!(r.iter().zip(q).all(|(x, y)| (x - y).abs() <= 1e-12 * y.abs().max(1.0)));
        prop_assert!(merge_boxes(&[b], &MergeParams::default()).is_empty());
    }

    #[test]
    fn segment_distance_is_the_closest_approach(p in segment(), q in segment()) {
        let d = segment_distance(&p, &q);
        prop_assert!((d - segment_distance(&q, &p)).abs() < 1e-9);
        let n = 200;
        let at = |s: &Segment3, t: f64| [0, 1, 2].map(|k| s.a[k] + t * (s.b[k] - s.a[k]));
        let mut sampled = f64::INFINITY;
        for i in 0..=n {
            for j in 0..=n {
                let (x, y) = (at(&p, i as f64 / n as f64), at(&q, j as f64 / n as f64));
                sampled = sampled.min(((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt());
            }
        }
        // the grid minimum overestimates by at most one sampling step per segment
        let slack = (p.half_length() + q.half_length()) * 2.0 / n as f64;
        prop_assert!(d <= sampled + 1e-9);
        prop_assert!(d >= sampled - slack - 1e-9);
    }

    #[test]
    fn dbscan_matches_brute_force(
        segs in prop::collection::vec(segment(), 1..60),
        eps in 0.5..3.0f64,
        min_pts in 1..5usize,
        seg_metric in any::<bool>(),
    ) {
        let metric = if seg_metric { SegmentMetric::Segment } else { SegmentMetric::Midpoint };
        let got = dbscan_segments(&segs, &DbscanParams { eps_m: eps, min_pts, metric });
        let want = common::brute_dbscan(segs.len(), eps, min_pts, |i, j| match metric {
            SegmentMetric::Segment => segment_distance(&segs[i], &segs[j]),
            SegmentMetric::Midpoint => {
                let (a, b) = (segs[i].midpoint(), segs[j].midpoint());
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
            }
        });
        prop_assert!(common::same_partition(&got, &want), "{got:?} vs {want:?}");
    }

    #[test]
    fn ipm_inverts_projection(p in (2.0..120.0f64, -20.0..20.0f64, -2.0..4.0f64), pitch in -0.1..0.1f64) {
        let cam = CameraModel { focal: 800.0, cx: 320.0, cy: 240.0, height: 1.5, pitch };
        let p = [p.0, p.1, p.2];
        let (u, v, depth) = cam.project(p).unwrap();
        let q = ipm_to_3d([u, v], depth, &cam).unwrap();
        let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        for k in 0..3 {
            prop_assert!((q[k] - p[k]).abs() <= 1e-9 * norm.max(1.0));
        }
    }

    #[test]
    fn lateral_filter_keeps_exactly_the_band(
        pts in prop::collection::vec((1.0..99.0f64, -4.0..4.0f64, -0.6..0.6f64, 0.0..255.0f64), 1..200),
    ) {
        let traj = Trajectory::new((0..=10).map(|i| Pose { t: i as f64, x: 10.0 * i as f64, y: 0.0, z: 0.0, heading: 0.0 }).collect()).unwrap();
        let params = FilterParams::default();
        // right of travel along +x is -y
        let cloud: Vec<LidarPoint> = pts.iter().map(|&(x, y, z, intensity)| LidarPoint { x, y, z, intensity }).collect();
        let expect = |side: Side| -> Vec<LidarPoint> {
            cloud
                .iter()
                .copied()
                .filter(|p| {
                    let d = -p.y;
                    p.intensity >= params.intensity_min
                        && p.z.abs() <= params.ground_tol_m
                        && d.abs() > params.lat_min
                        && d.abs() < params.lat_max
                        && (d < 0.0) == (side == Side::Left)
                })
                .collect()
        };
        let (left, right) = (expect(Side::Left), expect(Side::Right));
        match filter_points(&cloud, &traj, &params) {
            Ok(c) => {
                prop_assert_eq!(c.left.iter().map(|b| b.point).collect::<Vec<_>>(), left);
                prop_assert_eq!(c.right.iter().map(|b| b.point).collect::<Vec<_>>(), right);
            }
            Err(_) => prop_assert!(left.is_empty() || right.is_empty()),
        }
    }

    #[test]
    fn vehicle_cells_lie_inside_their_shrunk_box(boxes in prop::collection::vec(vehicle(), 0..6)) {
        let g = GridGeometry::new(320, 240, 10, 8, 32, 4).unwrap();
        let params = RasterParams::default();
        let (label, stats) = rasterize_labels(&boxes, &[], &g, &params);
        prop_assert_eq!(label.count(VEHICLE), stats.vehicle_cells);
        prop_assert_eq!(label.count(LANE), 0);
        for i in 0..g.cell_count() {
            let cell = g.cell_at(i);
            let (x0, y0, x1, y1) = cell.pixel_rect();
            if label.cell_class[i] != VEHICLE {
                prop_assert!(!label.reg_mask[i]);
                continue;
            }
            prop_assert!(label.reg_mask[i] && x1 <= 320 && y1 <= 240);
            let t = label.vehicle_targets[i];
            let owner = boxes.iter().find(|b| {
                [b.rect.x1, b.rect.y1, b.rect.x2, b.rect.y2, b.depth].iter().zip(t).all(|(a, b)| *a as f32 == b)
            });
            prop_assert!(owner.is_some());
            let s = shrink_box(&owner.unwrap().rect, params.shrink);
            let cell_rect = Rect::new(x0 as f64, y0 as f64, x1 as f64, y1 as f64);
            prop_assert!(s.contains_rect(&cell_rect));
        }
    }

    #[test]
    fn warped_labels_follow_the_homography(
        corners in prop::collection::vec(-12.0..12.0f64, 8),
        knots in prop::collection::vec((0.0..320.0f64, 0.0..240.0f64, 1.0..80.0f64), 2..8),
        boxes in prop::collection::vec(vehicle(), 0..4),
    ) {
        let (w, h) = (320.0, 240.0);
        let src = [[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]];
        let mut dst = src;
        for (k, c) in dst.iter_mut().enumerate() {
            c[0] += corners[2 * k];
            c[1] += corners[2 * k + 1];
        }
        let hm = Homography::from_corners(&src, &dst).unwrap();
        let labels = FrameLabels {
            vehicles: boxes.clone(),
            lanes: vec![LanePolyline { boundary: 1, knots: knots.iter().map(|&(u, v, d)| [u, v, d]).collect(), occluded: Vec::new() }],
        };
        let out = warp_labels(&labels, &hm, 320, 240);
        for (k, q) in labels.lanes[0].knots.iter().zip(&out.lanes[0].knots) {
            let m = hm.apply([k[0], k[1]]);
            prop_assert_eq!([m[0], m[1], k[2]], *q);
            let back = hm.apply_inverse([q[0], q[1]]);
            prop_assert!((back[0] - k[0]).abs() < 1e-6 && (back[1] - k[1]).abs() < 1e-6);
        }
        for v in &out.vehicles {
            prop_assert!(v.rect.x1 >= 0.0 && v.rect.y1 >= 0.0 && v.rect.x2 <= w && v.rect.y2 <= h);
        }
        // every source box corner that stays in the image is inside its warped box
        let mut it = out.vehicles.iter();
        for b in &boxes {
            let mapped = b.rect.corners().map(|c| hm.apply(c));
            let lo = [mapped.iter().map(|c| c[0]).fold(f64::INFINITY, f64::min).max(0.0), mapped.iter().map(|c| c[1]).fold(f64::INFINITY, f64::min).max(0.0)];
            let hi = [mapped.iter().map(|c| c[0]).fold(f64::NEG_INFINITY, f64::max).min(w), mapped.iter().map(|c| c[1]).fold(f64::NEG_INFINITY, f64::max).min(h)];
            if lo[0] < hi[0] && lo[1] < hi[1] {
                let v = it.next().unwrap();
                prop_assert_eq!(v.rect, Rect::new(lo[0], lo[1], hi[0], hi[1]));
                prop_assert_eq!(v.depth, b.depth);
            }
        }
        prop_assert!(it.next().is_none());
    }

    #[test]
    fn integer_translation_moves_pixels_and_labels_together(dx in -16i32..=16, dy in -16i32..=16, seed in any::<u64>()) {
        let img = RgbImage::from_fn(48, 40, |x, y| {
            let v = (x as u64 * 31 + y as u64 * 17).wrapping_mul(seed | 1);
            Rgb([(v >> 8) as u8, (v >> 16) as u8, (v >> 24) as u8])
        });
        let hm = Homography::translation(dx as f64, dy as f64);
        let out = warp_image(&img, &hm);
        for y in 0..40i32 {
            for x in 0..48i32 {
                let (sx, sy) = (x - dx, y - dy);
                let want = if (0..48).contains(&sx) && (0..40).contains(&sy) { *img.get_pixel(sx as u32, sy as u32) } else { Rgb([0, 0, 0]) };
                prop_assert_eq!(*out.get_pixel(x as u32, y as u32), want);
            }
        }
        let m = hm.apply([10.0, 12.0]);
        prop_assert_eq!(m, [10.0 + dx as f64, 12.0 + dy as f64]);
    }
}
