//! Mask-grid detector: label rasterization, head layout, loss and decoding.

pub mod codec;
pub mod head;
pub mod label;
pub mod loss;
pub mod types;

pub use codec::RegressionCodec;
pub use head::{channel_index, decode_output, forward_detect, head_channels};
pub use label::{rasterize_labels, shrink_box, RasterParams, RasterStats};
pub use loss::{detection_loss, perfect_output, DetectionLoss, LossParams};
pub use types::{
    CellPrediction, DetectionGrid, GridLabel, LanePolyline, LaneSegmentDet, VehicleBox, BACKGROUND,
    CHANNELS_PER_CELL, LANE, LANE_REG, NUM_CLASSES, VEHICLE, VEHICLE_REG,
};
