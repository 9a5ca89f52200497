use serde::{Deserialize, Serialize};

/// Axis-aligned pixel rectangle `[x1, x2) × [y1, y2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl Rect {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// Strictly positive width and height, all coordinates finite.
    pub fn is_valid(&self) -> bool {
        [self.x1, self.y1, self.x2, self.y2].iter().all(|v| v.is_finite())
            && self.x1 < self.x2
            && self.y1 < self.y2
    }

    pub fn intersection(&self, other: &Rect) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        w.max(0.0) * h.max(0.0)
    }

    /// Intersection over union, in `[0, 1]`; zero when both areas vanish.
    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersection(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            (inter / union).clamp(0.0, 1.0)
        }
    }

    pub fn contains_rect(&self, inner: &Rect) -> bool {
        inner.x1 >= self.x1 && inner.y1 >= self.y1 && inner.x2 <= self.x2 && inner.y2 <= self.y2
    }

    /// Scales width and height to `1 - factor` of their size about the center.
    pub fn shrink(&self, factor: f64) -> Rect {
        let (cx, cy) = self.center();
        let keep = 1.0 - factor;
        let hw = self.width() * keep / 2.0;
        let hh = self.height() * keep / 2.0;
        Rect::new(cx - hw, cy - hh, cx + hw, cy + hh)
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        [
            [self.x1, self.y1],
            [self.x2, self.y1],
            [self.x2, self.y2],
            [self.x1, self.y2],
        ]
    }

    /// Smallest rectangle containing all points.
    pub fn bounding(points: impl IntoIterator<Item = [f64; 2]>) -> Option<Rect> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut r = Rect::new(first[0], first[1], first[0], first[1]);
        for p in it {
            r.x1 = r.x1.min(p[0]);
            r.y1 = r.y1.min(p[1]);
            r.x2 = r.x2.max(p[0]);
            r.y2 = r.y2.max(p[1]);
        }
        Some(r)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}
