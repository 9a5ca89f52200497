//! Scoring protocols: IOU matching for vehicles, per-position lateral
//! matching for lanes, depth error statistics and the radar baseline.

pub mod counts;
pub mod lanes;
pub mod radar;
pub mod report;
pub mod vehicles;

pub use counts::{BinRecord, Counts};
pub use lanes::{lane_eval, lateral_at, LaneEvalGrid, DISTANCES, SLOTS};
pub use radar::{radar_baseline, radar_match, RadarReturn, TargetPosition};
pub use report::{build_report, evaluate_frame, EvalParams, EvalReport, FrameEval, FrameInput};
pub use vehicles::{depth_error_stats, iou, match_vehicles, vehicle_report_by_depth, DepthBin, Outcome, Scored, VehicleMatches};
