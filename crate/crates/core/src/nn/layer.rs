use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    Conv,
    Maxpool,
    Relu,
    /// Terminal marker: the preceding conv emits per-cell logits and regressions.
    SoftmaxGrid,
}

/// Spatial padding of a conv or pool layer.
///
/// `Same` resolves per input so that the output extent is `ceil(input / stride)`;
/// when the required total is odd the extra pixel goes after the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Pixels(usize),
    Same,
}

impl Serialize for Padding {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Padding::Pixels(p) => s.serialize_u64(*p as u64),
            Padding::Same => s.serialize_str("same"),
        }
    }
}

impl<'de> Deserialize<'de> for Padding {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Pixels(usize),
            Named(String),
        }
        match Repr::deserialize(d)? {
            Repr::Pixels(p) => Ok(Padding::Pixels(p)),
            Repr::Named(s) if s == "same" => Ok(Padding::Same),
            Repr::Named(s) => Err(serde::de::Error::custom(format!(
                "padding must be a pixel count or \"same\", got {s:?}"
            ))),
        }
    }
}

impl Default for Padding {
    fn default() -> Self {
        Padding::Pixels(0)
    }
}

/// Padding resolved against a concrete input extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolved {
    pub output: usize,
    pub pad_before: usize,
    pub pad_after: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub kind: LayerKind,
    #[serde(default = "one")]
    pub kernel: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub padding: Padding,
    #[serde(default)]
    pub out_channels: usize,
}

fn one() -> usize {
    1
}

impl LayerSpec {
    pub fn conv(kernel: usize, stride: usize, padding: Padding, out_channels: usize) -> Self {
        Self {
            kind: LayerKind::Conv,
            kernel,
            stride,
            padding,
            out_channels,
        }
    }

    pub fn maxpool(kernel: usize, stride: usize, padding: Padding) -> Self {
        Self {
            kind: LayerKind::Maxpool,
            kernel,
            stride,
            padding,
            out_channels: 0,
        }
    }

    pub fn relu() -> Self {
        Self {
            kind: LayerKind::Relu,
            kernel: 1,
            stride: 1,
            padding: Padding::Pixels(0),
            out_channels: 0,
        }
    }

    pub fn softmax_grid() -> Self {
        Self {
            kind: LayerKind::SoftmaxGrid,
            ..Self::relu()
        }
    }

    /// True for layers that change spatial extent (conv and pool).
    pub fn is_spatial(&self) -> bool {
        matches!(self.kind, LayerKind::Conv | LayerKind::Maxpool)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.stride == 0 {
            return Err(Error::config(format!(
                "layer {:?}: kernel and stride must be at least 1",
                self.kind
            )));
        }
        match self.kind {
            LayerKind::Conv if self.out_channels == 0 => Err(Error::config(
                "conv layer needs out_channels >= 1",
            )),
            LayerKind::Maxpool => match self.padding {
                Padding::Pixels(p) if p >= self.kernel => Err(Error::config(format!(
                    "maxpool padding {p} must be smaller than kernel {}",
                    self.kernel
                ))),
                _ => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// Output extent and padding along one spatial axis.
    pub fn resolve(&self, input: usize) -> Result<Resolved> {
        if !self.is_spatial() {
            return Ok(Resolved {
                output: input,
                pad_before: 0,
                pad_after: 0,
            });
        }
        let (k, s) = (self.kernel, self.stride);
        match self.padding {
            Padding::Pixels(p) => {
                let padded = input + 2 * p;
                if padded < k {
                    return Err(Error::config(format!(
                        "{:?} kernel {k} larger than padded input {padded}",
                        self.kind
                    )));
                }
                Ok(Resolved {
                    output: (padded - k) / s + 1,
                    pad_before: p,
                    pad_after: p,
                })
            }
            Padding::Same => {
                let output = input.div_ceil(s);
                let total = ((output - 1) * s + k).saturating_sub(input);
                Ok(Resolved {
                    output,
                    pad_before: total / 2,
                    pad_after: total - total / 2,
                })
            }
        }
    }
}
