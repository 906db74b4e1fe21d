//! Static exactness analysis.
//!
//! A strided window layer with input side `i`, kernel `k`, stride `s` and
//! symmetric padding `p` samples the same input indices before and after a
//! quarter turn (or a mirror) iff `(i + 2p - k) mod s == 0`. This module
//! pushes sizes through a sequential architecture and checks that condition at
//! every windowed layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::LayerKind;

fn default_one() -> usize {
    1
}

/// A layer as far as size propagation is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerShapeSpec {
    pub kind: LayerKind,
    #[serde(default = "default_one")]
    pub k: usize,
    #[serde(default = "default_one")]
    pub s: usize,
    #[serde(default)]
    pub p: usize,
    #[serde(default)]
    pub out_channels: usize,
}

impl LayerShapeSpec {
    pub fn windowed(kind: LayerKind, k: usize, s: usize, p: usize, out_channels: usize) -> Self {
        Self {
            kind,
            k,
            s,
            p,
            out_channels,
        }
    }

    pub fn pointwise(kind: LayerKind) -> Self {
        Self::windowed(kind, 1, 1, 0, 0)
    }

    pub fn dense(out_features: usize) -> Self {
        Self::windowed(LayerKind::Dense, 1, 1, 0, out_features)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.is_windowed() {
            if self.k == 0 {
                return Err(Error::Config(format!("{} needs k ≥ 1", self.kind)));
            }
            if self.s == 0 {
                return Err(Error::Config(format!("{} needs s ≥ 1", self.kind)));
            }
        }
        if self.kind.has_weights() && self.out_channels == 0 {
            return Err(Error::Config(format!("{} needs out_channels ≥ 1", self.kind)));
        }
        Ok(())
    }
}

/// Output side of a window layer: `⌊(i + 2p - k) / s⌋ + 1`.
pub fn output_size(i: usize, k: usize, s: usize, p: usize) -> Result<usize> {
    if k == 0 || s == 0 {
        return Err(Error::Dimension(format!("kernel and stride must be positive (k={k}, s={s})")));
    }
    let padded = i + 2 * p;
    if padded < k {
        return Err(Error::Shape(format!("kernel {k} exceeds padded input {padded}")));
    }
    Ok((padded - k) / s + 1)
}

/// Whether a window layer commutes with the p4m actions at this size.
pub fn check_layer(i: usize, k: usize, s: usize, p: usize) -> Result<bool> {
    output_size(i, k, s, p)?;
    Ok((i + 2 * p - k).is_multiple_of(s))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerTrace {
    pub layer: usize,
    pub kind: LayerKind,
    pub input: usize,
    pub padded: usize,
    pub output: usize,
    pub condition_ok: bool,
    /// Why a layer without a strided window is always fine.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SizeTrace {
    pub layers: Vec<LayerTrace>,
}

impl SizeTrace {
    pub fn output_size(&self) -> Option<usize> {
        self.layers.last().map(|l| l.output)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub input_size: usize,
    pub trace: SizeTrace,
    pub exact: bool,
    pub violations: Vec<usize>,
    /// Inclusive `[lo, hi]` range searched for `suggested_sizes`.
    pub search_window: (usize, usize),
    pub suggested_sizes: Vec<usize>,
}

/// Half-width of the window `analyze` searches for exact alternatives.
pub const DEFAULT_SEARCH_RADIUS: usize = 8;

fn always_ok_note(kind: LayerKind) -> &'static str {
    match kind {
        LayerKind::Relu => "pointwise",
        LayerKind::CosetMaxPool => "pools the group axis only",
        LayerKind::GlobalAvgPool => "global spatial pooling",
        LayerKind::CircleCrop => "mask is p4m-symmetric",
        LayerKind::Dense => "no spatial extent",
        _ => "",
    }
}

/// Size trace without the suggestion search.
pub fn trace(arch: &[LayerShapeSpec], input_size: usize) -> Result<SizeTrace> {
    if input_size == 0 {
        return Err(Error::Dimension("input size must be at least 1".into()));
    }
    let mut i = input_size;
    let mut layers = Vec::with_capacity(arch.len());
    for (j, spec) in arch.iter().enumerate() {
        spec.validate().map_err(|e| e.at_layer(j))?;
        let entry = if spec.kind.is_windowed() {
            let output = output_size(i, spec.k, spec.s, spec.p).map_err(|e| e.at_layer(j))?;
            LayerTrace {
                layer: j,
                kind: spec.kind,
                input: i,
                padded: i + 2 * spec.p,
                output,
                condition_ok: (i + 2 * spec.p - spec.k).is_multiple_of(spec.s),
                note: None,
            }
        } else {
            let output = match spec.kind {
                LayerKind::GlobalAvgPool | LayerKind::Dense => 1,
                _ => i,
            };
            LayerTrace {
                layer: j,
                kind: spec.kind,
                input: i,
                padded: i,
                output,
                condition_ok: true,
                note: Some(always_ok_note(spec.kind).to_string()),
            }
        };
        i = entry.output;
        layers.push(entry);
    }
    Ok(SizeTrace { layers })
}

fn is_exact(arch: &[LayerShapeSpec], input_size: usize) -> bool {
    trace(arch, input_size).is_ok_and(|t| t.layers.iter().all(|l| l.condition_ok))
}

/// Full report, with suggestions searched within ±[`DEFAULT_SEARCH_RADIUS`].
pub fn analyze(arch: &[LayerShapeSpec], input_size: usize) -> Result<AnalysisReport> {
    let lo = input_size.saturating_sub(DEFAULT_SEARCH_RADIUS).max(1);
    analyze_with_window(arch, input_size, lo, input_size + DEFAULT_SEARCH_RADIUS)
}

pub fn analyze_with_window(arch: &[LayerShapeSpec], input_size: usize, lo: usize, hi: usize) -> Result<AnalysisReport> {
    let trace = trace(arch, input_size)?;
    let violations: Vec<usize> = trace.layers.iter().filter(|l| !l.condition_ok).map(|l| l.layer).collect();
    Ok(AnalysisReport {
        input_size,
        exact: violations.is_empty(),
        violations,
        search_window: (lo, hi),
        suggested_sizes: suggest_input_sizes(arch, lo, hi),
        trace,
    })
}

/// Rejects non-square inputs before analysing.
pub fn analyze_dims(arch: &[LayerShapeSpec], height: usize, width: usize) -> Result<AnalysisReport> {
    if height != width {
        return Err(Error::Shape(format!(
            "only square inputs are supported, got {height}×{width}"
        )));
    }
    analyze(arch, height)
}

/// Every input side in `[lo, hi]` for which the whole architecture is exact.
/// Sizes that underflow somewhere are skipped.
pub fn suggest_input_sizes(arch: &[LayerShapeSpec], lo: usize, hi: usize) -> Vec<usize> {
    (lo.max(1)..=hi).filter(|&i| is_exact(arch, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(k: usize, s: usize, p: usize) -> LayerShapeSpec {
        LayerShapeSpec::windowed(LayerKind::Conv2d, k, s, p, 4)
    }

    fn pool(k: usize, s: usize) -> LayerShapeSpec {
        LayerShapeSpec::windowed(LayerKind::MaxPool, k, s, 0, 0)
    }

    fn p4cnn_shape() -> Vec<LayerShapeSpec> {
        let mut v = vec![conv(3, 1, 0), conv(3, 1, 0), pool(2, 2)];
        v.extend(std::iter::repeat_n(conv(3, 1, 0), 4));
        v.push(conv(4, 1, 1));
        v
    }

    #[test]
    fn output_size_examples() {
        assert_eq!(output_size(5, 2, 2, 0).unwrap(), 2);
        assert_eq!(output_size(28, 3, 1, 0).unwrap(), 26);
        assert_eq!(output_size(33, 3, 2, 1).unwrap(), 17);
        assert!(matches!(output_size(2, 5, 1, 1), Err(Error::Shape(_))));
        assert!(output_size(5, 2, 0, 0).is_err());
    }

    #[test]
    fn check_layer_examples() {
        assert!(check_layer(33, 3, 2, 1).unwrap());
        assert!(!check_layer(32, 3, 2, 1).unwrap());
        assert!(!check_layer(5, 2, 2, 0).unwrap());
        assert!(check_layer(1, 3, 2, 0).is_err());
    }

    #[test]
    fn p4cnn_sizes() {
        let arch = p4cnn_shape();
        let r28 = analyze(&arch, 28).unwrap();
        assert!(r28.exact);
        assert_eq!(r28.trace.output_size(), Some(3));
        let outs: Vec<_> = r28.trace.layers.iter().map(|l| l.output).collect();
        assert_eq!(outs, vec![26, 24, 12, 10, 8, 6, 4, 3]);

        let r27 = analyze(&arch, 27).unwrap();
        assert!(!r27.exact);
        assert_eq!(r27.violations, vec![2]);
        assert_eq!(r27.trace.layers[2].input, 23);

        let r29 = analyze(&arch, 29).unwrap();
        assert_eq!(r29.violations, vec![2]);
        assert!(r27.suggested_sizes.contains(&28));
    }

    #[test]
    fn underflow_cites_layer() {
        let err = analyze(&p4cnn_shape(), 9).unwrap_err();
        assert!(matches!(err, Error::Layer { .. }), "{err:?}");
    }

    #[test]
    fn suggestions() {
        let arch = p4cnn_shape();
        let s = suggest_input_sizes(&arch, 26, 30);
        assert!(s.contains(&28));
        assert!(!s.contains(&27) && !s.contains(&29));

        // brute-force enumeration of the single-layer condition
        let single = [pool(2, 2)];
        let expected: Vec<usize> = (2..=9).filter(|&i| check_layer(i, 2, 2, 0).unwrap()).collect();
        assert_eq!(expected, vec![2, 4, 6, 8]);
        assert_eq!(suggest_input_sizes(&single, 2, 9), expected);

        let unit = [conv(3, 1, 0), conv(5, 1, 1)];
        assert_eq!(suggest_input_sizes(&unit, 1, 12), (5..=12).collect::<Vec<_>>());
        assert!(suggest_input_sizes(&arch, 5, 4).is_empty());
    }

    #[test]
    fn stride_one_never_violates() {
        for i in 5..40 {
            let report = analyze(&[conv(3, 1, 0), conv(2, 1, 1), pool(3, 1)], i).unwrap();
            assert!(report.violations.is_empty());
        }
    }

    #[test]
    fn pass_through_layers() {
        let arch = [
            conv(3, 2, 1),
            LayerShapeSpec::pointwise(LayerKind::Relu),
            LayerShapeSpec::pointwise(LayerKind::CircleCrop),
            LayerShapeSpec::pointwise(LayerKind::GlobalAvgPool),
            LayerShapeSpec::pointwise(LayerKind::CosetMaxPool),
            LayerShapeSpec::dense(2),
        ];
        let t = trace(&arch, 33).unwrap();
        let outs: Vec<_> = t.layers.iter().map(|l| l.output).collect();
        assert_eq!(outs, vec![17, 17, 17, 1, 1, 1]);
        assert!(t.layers[1..].iter().all(|l| l.condition_ok && l.note.is_some()));
    }

    #[test]
    fn non_square_rejected() {
        assert!(matches!(analyze_dims(&[conv(3, 1, 0)], 8, 9), Err(Error::Shape(_))));
        assert!(analyze_dims(&[conv(3, 1, 0)], 9, 9).unwrap().exact);
    }

    #[test]
    fn invalid_spec_rejected() {
        let bad = [LayerShapeSpec::windowed(LayerKind::MaxPool, 2, 0, 0, 0)];
        assert!(trace(&bad, 8).is_err());
        let bad = [LayerShapeSpec::windowed(LayerKind::Conv2d, 3, 1, 0, 0)];
        assert!(trace(&bad, 8).is_err());
    }
}
