use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dense_output_grid, receptive_field};
use crate::nn::layer::LayerSpec;

/// One 4×4-pixel (by default) region predicted by a single softmax classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskCell {
    pub grid_x: usize,
    pub grid_y: usize,
    pub x0: usize,
    pub y0: usize,
    pub size: usize,
}

impl MaskCell {
    /// `[x0, x0+size) × [y0, y0+size)` as `(x0, y0, x1, y1)`.
    pub fn pixel_rect(&self) -> (usize, usize, usize, usize) {
        (self.x0, self.y0, self.x0 + self.size, self.y0 + self.size)
    }

    pub fn center(&self) -> (f64, f64) {
        let h = self.size as f64 / 2.0;
        (self.x0 as f64 + h, self.y0 as f64 + h)
    }

    pub fn contains_pixel(&self, x: usize, y: usize) -> bool {
        (self.x0..self.x0 + self.size).contains(&x) && (self.y0..self.y0 + self.size).contains(&y)
    }
}

/// Layout of the mask grid: each final feature owns a `subgrid × subgrid`
/// block of cells covering its `stride × stride` pixel tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub image_width: usize,
    pub image_height: usize,
    pub features_x: usize,
    pub features_y: usize,
    pub stride: usize,
    pub cell: usize,
}

impl GridGeometry {
    pub fn new(
        image_width: usize,
        image_height: usize,
        features_x: usize,
        features_y: usize,
        stride: usize,
        cell: usize,
    ) -> Result<Self> {
        if cell == 0 || stride % cell != 0 {
            return Err(Error::config(format!(
                "cell size {cell} must divide the feature stride {stride}"
            )));
        }
        if features_x * stride < image_width || features_y * stride < image_height {
            return Err(Error::config(format!(
                "{features_x}×{features_y} features at stride {stride} do not cover {image_width}×{image_height}"
            )));
        }
        Ok(Self {
            image_width,
            image_height,
            features_x,
            features_y,
            stride,
            cell,
        })
    }

    /// Geometry for a network and input size.
    pub fn for_network(layers: &[LayerSpec], width: usize, height: usize, cell: usize) -> Result<Self> {
        let rf = receptive_field(layers);
        let (fx, fy) = dense_output_grid(width, height, layers)?;
        Self::new(width, height, fx, fy, rf.stride, cell)
    }

    pub fn subgrid(&self) -> usize {
        self.stride / self.cell
    }

    pub fn cells_x(&self) -> usize {
        self.features_x * self.subgrid()
    }

    pub fn cells_y(&self) -> usize {
        self.features_y * self.subgrid()
    }

    pub fn cell_count(&self) -> usize {
        self.cells_x() * self.cells_y()
    }

    pub fn index(&self, gx: usize, gy: usize) -> usize {
        gy * self.cells_x() + gx
    }

    pub fn cell(&self, gx: usize, gy: usize) -> MaskCell {
        MaskCell {
            grid_x: gx,
            grid_y: gy,
            x0: gx * self.cell,
            y0: gy * self.cell,
            size: self.cell,
        }
    }

    pub fn cell_at(&self, index: usize) -> MaskCell {
        self.cell(index % self.cells_x(), index / self.cells_x())
    }

    /// Cell `(sub_x, sub_y)` of feature `(feature_x, feature_y)`.
    pub fn cell_pixel_region(
        &self,
        feature_x: usize,
        feature_y: usize,
        sub_x: usize,
        sub_y: usize,
    ) -> Result<MaskCell> {
        let s = self.subgrid();
        if feature_x >= self.features_x || feature_y >= self.features_y || sub_x >= s || sub_y >= s {
            return Err(Error::config(format!(
                "cell ({feature_x},{feature_y},{sub_x},{sub_y}) outside {}×{} features with {s}×{s} cells",
                self.features_x, self.features_y
            )));
        }
        Ok(self.cell(feature_x * s + sub_x, feature_y * s + sub_y))
    }

    /// Whether the cell lies entirely inside the image.
    pub fn in_image(&self, cell: &MaskCell) -> bool {
        cell.x0 + cell.size <= self.image_width && cell.y0 + cell.size <= self.image_height
    }

    pub fn cell_of_pixel(&self, x: usize, y: usize) -> Option<MaskCell> {
        (x < self.image_width && y < self.image_height).then(|| self.cell(x / self.cell, y / self.cell))
    }

    /// Feature and sub-cell coordinates of a grid cell.
    pub fn owner(&self, gx: usize, gy: usize) -> (usize, usize, usize, usize) {
        let s = self.subgrid();
        (gx / s, gy / s, gx % s, gy % s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::reference_architecture;

    fn reference() -> GridGeometry {
        GridGeometry::for_network(&reference_architecture(896), 640, 480, 4).unwrap()
    }

    #[test]
    fn reference_grid_is_160_by_120() {
        let g = reference();
        assert_eq!((g.features_x, g.features_y), (20, 15));
        assert_eq!(g.subgrid(), 8);
        assert_eq!((g.cells_x(), g.cells_y()), (160, 120));
        assert_eq!(g.subgrid() * g.cell, g.stride);
    }

    #[test]
    fn cell_regions() {
        let g = reference();
        assert_eq!(g.cell_pixel_region(0, 0, 0, 0).unwrap().pixel_rect(), (0, 0, 4, 4));
        assert_eq!(g.cell_pixel_region(0, 0, 7, 7).unwrap().pixel_rect(), (28, 28, 32, 32));
        assert_eq!(g.cell_pixel_region(19, 14, 7, 7).unwrap().pixel_rect(), (636, 476, 640, 480));
        assert!(g.cell_pixel_region(20, 0, 0, 0).is_err());
        assert!(g.cell_pixel_region(0, 0, 8, 0).is_err());
    }

    #[test]
    fn cells_partition_the_image() {
        let g = reference();
        let mut hits = vec![0u8; 640 * 480];
        for fy in 0..g.features_y {
            for fx in 0..g.features_x {
                for sy in 0..8 {
                    for sx in 0..8 {
                        let c = g.cell_pixel_region(fx, fy, sx, sy).unwrap();
                        assert!(g.in_image(&c));
                        for y in c.y0..c.y0 + 4 {
                            for x in c.x0..c.x0 + 4 {
                                hits[y * 640 + x] += 1;
                            }
                        }
                    }
                }
            }
        }
        assert!(hits.iter().all(|&h| h == 1));
    }

    #[test]
    fn non_dividing_cell_rejected() {
        assert!(GridGeometry::new(64, 64, 2, 2, 32, 5).is_err());
        assert!(GridGeometry::new(64, 64, 1, 2, 32, 4).is_err());
    }
}
