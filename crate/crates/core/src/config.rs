//! Architecture configs and the built-in example networks.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analyzer::LayerShapeSpec;
use crate::error::{Error, Result};
use crate::group::GroupKind;
use crate::layers::{LayerKind, Network, WeightInit};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

fn one() -> usize {
    1
}

/// Input side, either a single number or `[height, width]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputSize {
    Side(usize),
    Dims([usize; 2]),
}

impl InputSize {
    pub fn side(self) -> Result<usize> {
        match self {
            InputSize::Side(n) => Ok(n),
            InputSize::Dims([h, w]) if h == w => Ok(h),
            InputSize::Dims([h, w]) => Err(Error::Config(format!(
                "input_size: only square inputs are supported, got {h}×{w}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub name: String,
    pub group: GroupKind,
    pub input_size: InputSize,
    #[serde(default = "one")]
    pub input_channels: usize,
    pub layers: Vec<LayerShapeSpec>,
}

impl ArchitectureConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let side = self.input_size.side()?;
        if side == 0 {
            return Err(Error::Config("input_size must be at least 1".into()));
        }
        if self.input_channels == 0 {
            return Err(Error::Config("input_channels must be at least 1".into()));
        }
        for (j, layer) in self.layers.iter().enumerate() {
            layer
                .validate()
                .map_err(|e| Error::Config(format!("layers[{j}]: {e}")))?;
            if self.group == GroupKind::Z2 && matches!(layer.kind, LayerKind::GconvLift | LayerKind::Gconv) {
                return Err(Error::Config(format!(
                    "layers[{j}]: {} needs group p4 or p4m",
                    layer.kind
                )));
            }
        }
        Ok(())
    }

    pub fn side(&self) -> usize {
        self.input_size.side().expect("validated config")
    }

    pub fn with_input_size(mut self, side: usize) -> Self {
        self.input_size = InputSize::Side(side);
        self
    }

    /// SHA-256 over the compact JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let compact = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&compact).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn build(&self, init: WeightInit) -> Result<Network> {
        self.validate()?;
        Network::from_specs(self.group, self.side(), self.input_channels, &self.layers, init)
    }
}

fn w(kind: LayerKind, k: usize, s: usize, p: usize, out: usize) -> LayerShapeSpec {
    LayerShapeSpec::windowed(kind, k, s, p, out)
}

fn pw(kind: LayerKind) -> LayerShapeSpec {
    LayerShapeSpec::pointwise(kind)
}

/// Six 3×3 convolutions with a stride-2 max pool after the second, then a
/// 4×4 convolution. ReLU after every convolution. The 4×4 layer is padded by
/// one so inputs of 27 (which reach it at 3×3) still fit.
fn mnist_stack(first: LayerKind, rest: LayerKind, channels: usize) -> Vec<LayerShapeSpec> {
    let mut layers = vec![
        w(first, 3, 1, 0, channels),
        pw(LayerKind::Relu),
        w(rest, 3, 1, 0, channels),
        pw(LayerKind::Relu),
        w(LayerKind::MaxPool, 2, 2, 0, 0),
    ];
    for _ in 0..4 {
        layers.push(w(rest, 3, 1, 0, channels));
        layers.push(pw(LayerKind::Relu));
    }
    layers.push(w(rest, 4, 1, 1, channels));
    layers.push(pw(LayerKind::Relu));
    layers
}

pub const BUILTIN_NAMES: [&str; 4] = ["toy41", "p4cnn", "z2cnn", "fig1-maxpool"];

pub fn builtin(name: &str) -> Option<ArchitectureConfig> {
    let cfg = |name: &str, group, side, layers| ArchitectureConfig {
        schema_version: CONFIG_SCHEMA_VERSION,
        name: name.to_string(),
        group,
        input_size: InputSize::Side(side),
        input_channels: 1,
        layers,
    };
    match name {
        // lifting conv k=3 s=2 p=1 with one channel, spatial mean, coset max, two logits
        "toy41" => Some(cfg(
            name,
            GroupKind::P4,
            33,
            vec![
                w(LayerKind::GconvLift, 3, 2, 1, 1),
                pw(LayerKind::GlobalAvgPool),
                pw(LayerKind::CosetMaxPool),
                LayerShapeSpec::dense(2),
            ],
        )),
        "p4cnn" => {
            let mut layers = mnist_stack(LayerKind::GconvLift, LayerKind::Gconv, 10);
            layers.push(pw(LayerKind::GlobalAvgPool));
            layers.push(pw(LayerKind::CosetMaxPool));
            layers.push(LayerShapeSpec::dense(10));
            Some(cfg(name, GroupKind::P4, 28, layers))
        }
        "z2cnn" => {
            let mut layers = mnist_stack(LayerKind::Conv2d, LayerKind::Conv2d, 20);
            layers.push(pw(LayerKind::GlobalAvgPool));
            layers.push(LayerShapeSpec::dense(10));
            Some(cfg(name, GroupKind::Z2, 28, layers))
        }
        "fig1-maxpool" => Some(cfg(name, GroupKind::Z2, 5, vec![w(LayerKind::MaxPool, 2, 2, 0, 0)])),
        _ => None,
    }
}

pub fn builtins() -> Vec<ArchitectureConfig> {
    BUILTIN_NAMES.iter().filter_map(|n| builtin(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::analyze;

    #[test]
    fn builtins_round_trip() {
        for cfg in builtins() {
            cfg.validate().unwrap();
            let back = ArchitectureConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.digest(), cfg.digest());
        }
    }

    #[test]
    fn builtin_exactness() {
        let p4 = builtin("p4cnn").unwrap();
        assert!(analyze(&p4.layers, 28).unwrap().exact);
        let r27 = analyze(&p4.layers, 27).unwrap();
        assert_eq!(r27.violations.len(), 1);
        assert_eq!(p4.layers[r27.violations[0]].kind, LayerKind::MaxPool);
        assert!(analyze(&builtin("toy41").unwrap().layers, 33).unwrap().exact);
        assert!(!analyze(&builtin("toy41").unwrap().layers, 32).unwrap().exact);
        assert!(!analyze(&builtin("fig1-maxpool").unwrap().layers, 5).unwrap().exact);
        assert!(analyze(&builtin("z2cnn").unwrap().layers, 28).unwrap().exact);
    }

    #[test]
    fn builtins_build() {
        for cfg in builtins() {
            let net = cfg.build(WeightInit { seed: 1, integer_valued: true }).unwrap();
            assert_eq!(net.layers().len(), cfg.layers.len());
        }
        let p4 = builtin("p4cnn").unwrap();
        assert_eq!(p4.layers.iter().filter(|l| l.kind.is_windowed() && l.kind != LayerKind::MaxPool).count(), 7);
    }

    #[test]
    fn parse_errors() {
        let bad_kind = r#"{"name":"x","group":"p4","input_size":9,"layers":[{"kind":"gconv9","k":3}]}"#;
        let err = ArchitectureConfig::from_json(bad_kind).unwrap_err().to_string();
        assert!(err.contains("gconv9") && err.contains("line"), "{err}");

        let rect = r#"{"name":"x","group":"p4","input_size":[9,8],"layers":[]}"#;
        assert!(ArchitectureConfig::from_json(rect).unwrap_err().to_string().contains("square"));

        let z2_gconv = r#"{"name":"x","group":"z2","input_size":9,"layers":[{"kind":"gconv_lift","k":3,"out_channels":1}]}"#;
        assert!(ArchitectureConfig::from_json(z2_gconv).is_err());

        let zero_stride = r#"{"name":"x","group":"p4","input_size":9,"layers":[{"kind":"maxpool","k":2,"s":0}]}"#;
        assert!(ArchitectureConfig::from_json(zero_stride).unwrap_err().to_string().contains("layers[0]"));

        let extra = r#"{"name":"x","group":"p4","input_size":9,"layers":[],"colour":1}"#;
        assert!(ArchitectureConfig::from_json(extra).is_err());

        let square = r#"{"name":"x","group":"p4m","input_size":[9,9],"layers":[]}"#;
        assert_eq!(ArchitectureConfig::from_json(square).unwrap().side(), 9);
    }
}
