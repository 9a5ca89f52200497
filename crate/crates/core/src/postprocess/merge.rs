use serde::{Deserialize, Serialize};

use crate::detector::types::VehicleBox;
use crate::error::{Error, Result};
use crate::rect::Rect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeParams {
    pub eps: f64,
    pub min_group: usize,
}

impl Default for MergeParams {
    fn default() -> Self {
        Self { eps: 0.2, min_group: 2 }
    }
}

impl MergeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps.is_finite() && self.eps >= 0.0) || self.min_group == 0 {
            return Err(Error::config(format!("invalid merge parameters {self:?}")));
        }
        Ok(())
    }
}

/// Two rectangles are similar when every corner coordinate differs by at most
/// `eps` times the mean of their smaller width and smaller height.
pub fn similar(a: &Rect, b: &Rect, eps: f64) -> bool {
    let delta = eps * 0.5 * (a.width().min(b.width()) + a.height().min(b.height()));
    (a.x1 - b.x1).abs() <= delta
        && (a.y1 - b.y1).abs() <= delta
        && (a.x2 - b.x2).abs() <= delta
        && (a.y2 - b.y2).abs() <= delta
}

#[derive(Debug, Clone, Copy)]
struct Cluster {
    sum: [f64; 5],
    score: f64,
    count: usize,
}

impl Cluster {
    fn mean(&self) -> VehicleBox {
        let n = self.count as f64;
        VehicleBox {
            rect: Rect::new(self.sum[0] / n, self.sum[1] / n, self.sum[2] / n, self.sum[3] / n),
            depth: self.sum[4] / n,
            score: self.score,
        }
    }

    fn absorb(&mut self, other: &Cluster) {
        for (s, o) in self.sum.iter_mut().zip(other.sum) {
            *s += o;
        }
        self.score = self.score.max(other.score);
        self.count += other.count;
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Similarity clustering of vehicle candidates.
///
/// Boxes are grouped by the transitive closure of [`similar`]; each group is
/// replaced by the mean of its members (depth averaged, score maxed). Groups
/// whose means are still similar are merged again until no pair is, so the
/// output is a fixpoint. Groups with fewer than `min_group` members are
/// dropped. Output order follows each group's first member.
pub fn merge_boxes(boxes: &[VehicleBox], params: &MergeParams) -> Vec<VehicleBox> {
    let mut clusters: Vec<Cluster> = boxes
        .iter()
        .map(|b| Cluster {
            sum: [b.rect.x1, b.rect.y1, b.rect.x2, b.rect.y2, b.depth],
            score: b.score,
            count: 1,
        })
        .collect();
    loop {
        let means: Vec<Rect> = clusters.iter().map(|c| c.mean().rect).collect();
        let mut parent: Vec<usize> = (0..clusters.len()).collect();
        let mut joined = false;
        for i in 0..means.len() {
            for j in i + 1..means.len() {
                if similar(&means[i], &means[j], params.eps) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.max(rj)] = ri.min(rj);
                        joined = true;
                    }
                }
            }
        }
        if !joined {
            break;
        }
        let mut next: Vec<Cluster> = Vec::new();
        let mut slot = vec![usize::MAX; clusters.len()];
        for i in 0..clusters.len() {
            let r = find(&mut parent, i);
            if slot[r] == usize::MAX {
                slot[r] = next.len();
                next.push(clusters[i]);
            } else {
                next[slot[r]].absorb(&clusters[i]);
            }
        }
        clusters = next;
    }
    clusters
        .iter()
        .filter(|c| c.count >= params.min_group)
        .map(Cluster::mean)
        .collect()
}
