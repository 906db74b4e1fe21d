//! Forward-only layers and a sequential network container.
//!
//! Convolutions are cross-correlations with symmetric zero padding. Every
//! output cell is accumulated in the same order: input channel, then group
//! slot, then kernel row, then kernel column.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analyzer::{output_size, LayerShapeSpec};
use crate::error::{Error, Result};
use crate::group::{transform_plane, GroupElement, GroupKind};
use crate::tensor::{random_values, FeatureMap, FilterBank};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    GconvLift,
    Gconv,
    Conv2d,
    #[serde(rename = "maxpool")]
    MaxPool,
    Relu,
    #[serde(rename = "coset_maxpool")]
    CosetMaxPool,
    GlobalAvgPool,
    CircleCrop,
    Dense,
}

impl LayerKind {
    pub const ALL: [LayerKind; 9] = [
        LayerKind::GconvLift,
        LayerKind::Gconv,
        LayerKind::Conv2d,
        LayerKind::MaxPool,
        LayerKind::Relu,
        LayerKind::CosetMaxPool,
        LayerKind::GlobalAvgPool,
        LayerKind::CircleCrop,
        LayerKind::Dense,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::GconvLift => "gconv_lift",
            LayerKind::Gconv => "gconv",
            LayerKind::Conv2d => "conv2d",
            LayerKind::MaxPool => "maxpool",
            LayerKind::Relu => "relu",
            LayerKind::CosetMaxPool => "coset_maxpool",
            LayerKind::GlobalAvgPool => "global_avg_pool",
            LayerKind::CircleCrop => "circle_crop",
            LayerKind::Dense => "dense",
        }
    }

    /// Layers that slide a `k × k` window with a stride.
    pub fn is_windowed(self) -> bool {
        matches!(
            self,
            LayerKind::GconvLift | LayerKind::Gconv | LayerKind::Conv2d | LayerKind::MaxPool
        )
    }

    pub fn has_weights(self) -> bool {
        matches!(
            self,
            LayerKind::GconvLift | LayerKind::Gconv | LayerKind::Conv2d | LayerKind::Dense
        )
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LayerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown layer kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseWeights {
    out_features: usize,
    in_features: usize,
    values: Vec<f64>,
}

impl DenseWeights {
    pub fn new(out_features: usize, in_features: usize, values: Vec<f64>) -> Result<Self> {
        if out_features == 0 || in_features == 0 {
            return Err(Error::Dimension("dense layer needs at least one input and output".into()));
        }
        if values.len() != out_features * in_features {
            return Err(Error::Shape(format!(
                "dense weights need {} values, got {}",
                out_features * in_features,
                values.len()
            )));
        }
        Ok(Self {
            out_features,
            in_features,
            values,
        })
    }

    pub fn out_features(&self) -> usize {
        self.out_features
    }

    pub fn in_features(&self) -> usize {
        self.in_features
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    None,
    Filters(FilterBank),
    Dense(DenseWeights),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerShapeSpec,
    pub weights: Weights,
}

impl Layer {
    pub fn kind(&self) -> LayerKind {
        self.spec.kind
    }

    pub fn forward(&self, fm: &FeatureMap, group: GroupKind) -> Result<FeatureMap> {
        let LayerShapeSpec { kind, k, s, p, .. } = self.spec;
        match (kind, &self.weights) {
            (LayerKind::GconvLift, Weights::Filters(f)) => gconv_lift(fm, f, s, p, group),
            (LayerKind::Gconv, Weights::Filters(f)) => gconv(fm, f, s, p, group),
            (LayerKind::Conv2d, Weights::Filters(f)) => conv2d(fm, f, s, p),
            (LayerKind::Dense, Weights::Dense(w)) => dense(fm, w),
            (LayerKind::MaxPool, _) => maxpool_padded(fm, k, s, p),
            (LayerKind::Relu, _) => Ok(relu(fm)),
            (LayerKind::CosetMaxPool, _) => coset_maxpool(fm),
            (LayerKind::GlobalAvgPool, _) => Ok(global_avg_pool(fm)),
            (LayerKind::CircleCrop, _) => circle_crop(fm),
            (kind, _) => Err(Error::Config(format!("{kind} layer is missing its weights"))),
        }
    }
}

fn check_window(i: usize, k: usize, s: usize, p: usize) -> Result<usize> {
    if s == 0 {
        return Err(Error::Dimension("stride must be at least 1".into()));
    }
    output_size(i, k, s, p)
}

/// Accumulates `kernels[o][c][h]` correlated against every input plane into
/// one output slot. `kernel(o, c, h)` returns a `k × k` slice.
fn correlate_slot<'a>(
    input: &FeatureMap,
    out: &mut FeatureMap,
    slot: usize,
    k: usize,
    s: usize,
    p: usize,
    kernel: impl Fn(usize, usize, usize) -> &'a [f64],
) {
    let n = input.height();
    let o_side = out.height();
    for oc in 0..out.channels() {
        let mut acc = vec![0.0; o_side * o_side];
        for c in 0..input.channels() {
            for h in 0..input.group_size() {
                let src = input.plane(c, h);
                let ker = kernel(oc, c, h);
                for orow in 0..o_side {
                    for ocol in 0..o_side {
                        let mut sum = acc[orow * o_side + ocol];
                        for kr in 0..k {
                            let Some(r) = (orow * s + kr).checked_sub(p).filter(|&r| r < n) else {
                                continue;
                            };
                            let row = &src[r * n..(r + 1) * n];
                            let krow = &ker[kr * k..(kr + 1) * k];
                            for (kc, &w) in krow.iter().enumerate() {
                                if let Some(col) = (ocol * s + kc).checked_sub(p).filter(|&col| col < n) {
                                    sum += w * row[col];
                                }
                            }
                        }
                        acc[orow * o_side + ocol] = sum;
                    }
                }
            }
        }
        out.plane_mut(oc, slot).copy_from_slice(&acc);
    }
}

fn require_square(fm: &FeatureMap, what: &str) -> Result<usize> {
    if fm.is_square() {
        Ok(fm.height())
    } else {
        Err(Error::Shape(format!(
            "{what} needs a square map, got {}×{}",
            fm.height(),
            fm.width()
        )))
    }
}

/// Plain strided cross-correlation. The input group axis is summed over,
/// so `filters.in_group_size()` must match it.
pub fn conv2d(fm: &FeatureMap, filters: &FilterBank, s: usize, p: usize) -> Result<FeatureMap> {
    let n = require_square(fm, "conv2d")?;
    if filters.in_channels() != fm.channels() || filters.in_group_size() != fm.group_size() {
        return Err(Error::Shape(format!(
            "filters expect {} channels × {} slots, map has {} × {}",
            filters.in_channels(),
            filters.in_group_size(),
            fm.channels(),
            fm.group_size()
        )));
    }
    let k = filters.k();
    let o = check_window(n, k, s, p)?;
    let mut out = FeatureMap::new(filters.out_channels(), 1, o, o, 0.0)?;
    correlate_slot(fm, &mut out, 0, k, s, p, |oc, c, h| filters.kernel(oc, c, h));
    Ok(out)
}

/// The filter bank used for output slot `g`: every kernel spatially
/// transformed by `g`, and for group-valued inputs the input-slot axis
/// re-indexed so that slot `h` reads the kernel stored at `g⁻¹h`.
pub fn transformed_filters(filters: &FilterBank, g: GroupElement, kind: GroupKind) -> Result<FilterBank> {
    let k = filters.k();
    let mut out = filters.clone();
    let lifting = filters.in_group_size() == 1;
    if !lifting && filters.in_group_size() != kind.size() {
        return Err(Error::Shape(format!(
            "filters have {} input slots, {kind} needs {}",
            filters.in_group_size(),
            kind.size()
        )));
    }
    let g_inv = g.inverse();
    for o in 0..filters.out_channels() {
        for c in 0..filters.in_channels() {
            for h in 0..filters.in_group_size() {
                let src_slot = if lifting {
                    0
                } else {
                    let h_el = GroupElement::from_slot(h).expect("slot within group");
                    g_inv.compose(h_el).slot()
                };
                transform_plane(g, k, filters.kernel(o, c, src_slot), out.kernel_mut(o, c, h));
            }
        }
    }
    Ok(out)
}

fn check_group_kind(kind: GroupKind) -> Result<()> {
    if kind == GroupKind::Z2 {
        Err(Error::UnsupportedKind("group convolutions need p4 or p4m".into()))
    } else {
        Ok(())
    }
}

/// Lifting convolution: plain map in, one output slot per group element.
pub fn gconv_lift(fm: &FeatureMap, filters: &FilterBank, s: usize, p: usize, kind: GroupKind) -> Result<FeatureMap> {
    check_group_kind(kind)?;
    if fm.group_size() != 1 {
        return Err(Error::Shape(format!(
            "lifting convolution needs a plain map, got group size {}",
            fm.group_size()
        )));
    }
    group_correlate(fm, filters, s, p, kind)
}

/// Group convolution on a group-valued map.
pub fn gconv(fm: &FeatureMap, filters: &FilterBank, s: usize, p: usize, kind: GroupKind) -> Result<FeatureMap> {
    check_group_kind(kind)?;
    if fm.group_size() != kind.size() {
        return Err(Error::Shape(format!(
            "{kind} convolution needs group size {}, got {}",
            kind.size(),
            fm.group_size()
        )));
    }
    group_correlate(fm, filters, s, p, kind)
}

fn group_correlate(fm: &FeatureMap, filters: &FilterBank, s: usize, p: usize, kind: GroupKind) -> Result<FeatureMap> {
    let n = require_square(fm, "group convolution")?;
    if filters.in_channels() != fm.channels() || filters.in_group_size() != fm.group_size() {
        return Err(Error::Shape(format!(
            "filters expect {} channels × {} slots, map has {} × {}",
            filters.in_channels(),
            filters.in_group_size(),
            fm.channels(),
            fm.group_size()
        )));
    }
    let k = filters.k();
    let o = check_window(n, k, s, p)?;
    let mut out = FeatureMap::new(filters.out_channels(), kind.size(), o, o, 0.0)?;
    for g in kind.elements() {
        let bank = transformed_filters(filters, g, kind)?;
        correlate_slot(fm, &mut out, g.slot(), k, s, p, |oc, c, h| bank.kernel(oc, c, h));
    }
    Ok(out)
}

/// Max pooling with no padding.
pub fn maxpool(fm: &FeatureMap, k: usize, s: usize) -> Result<FeatureMap> {
    maxpool_padded(fm, k, s, 0)
}

/// Max pooling; padded cells never win (they are skipped, not zero).
pub fn maxpool_padded(fm: &FeatureMap, k: usize, s: usize, p: usize) -> Result<FeatureMap> {
    let n = require_square(fm, "maxpool")?;
    if k == 0 {
        return Err(Error::Dimension("pool kernel must be at least 1".into()));
    }
    if p >= k {
        return Err(Error::Shape(format!("pool padding {p} must be smaller than kernel {k}")));
    }
    let o = check_window(n, k, s, p)?;
    let mut out = FeatureMap::new(fm.channels(), fm.group_size(), o, o, 0.0)?;
    for c in 0..fm.channels() {
        for h in 0..fm.group_size() {
            let src = fm.plane(c, h);
            let dst = out.plane_mut(c, h);
            for orow in 0..o {
                for ocol in 0..o {
                    let mut best = f64::NEG_INFINITY;
                    for kr in 0..k {
                        let Some(r) = (orow * s + kr).checked_sub(p).filter(|&r| r < n) else {
                            continue;
                        };
                        for kc in 0..k {
                            if let Some(col) = (ocol * s + kc).checked_sub(p).filter(|&col| col < n) {
                                best = best.max(src[r * n + col]);
                            }
                        }
                    }
                    dst[orow * o + ocol] = best;
                }
            }
        }
    }
    Ok(out)
}

/// Max over the group axis.
pub fn coset_maxpool(fm: &FeatureMap) -> Result<FeatureMap> {
    if fm.group_size() == 1 {
        return Err(Error::Shape("coset pooling needs a group axis".into()));
    }
    let mut out = FeatureMap::new(fm.channels(), 1, fm.height(), fm.width(), 0.0)?;
    for c in 0..fm.channels() {
        let dst = out.plane_mut(c, 0);
        dst.copy_from_slice(fm.plane(c, 0));
        for h in 1..fm.group_size() {
            for (d, &v) in dst.iter_mut().zip(fm.plane(c, h)) {
                *d = d.max(v);
            }
        }
    }
    Ok(out)
}

/// Spatial mean per (channel, slot); the result is a `1 × 1` map.
///
/// Values are summed in ascending order, so the mean does not depend on where
/// each value sits on the grid and spatial permutations leave it bit-identical.
pub fn global_avg_pool(fm: &FeatureMap) -> FeatureMap {
    let area = (fm.height() * fm.width()) as f64;
    let mut out = FeatureMap::new(fm.channels(), fm.group_size(), 1, 1, 0.0).expect("dims come from a valid map");
    let mut scratch = Vec::with_capacity(fm.height() * fm.width());
    for c in 0..fm.channels() {
        for h in 0..fm.group_size() {
            scratch.clear();
            scratch.extend_from_slice(fm.plane(c, h));
            scratch.sort_by(f64::total_cmp);
            let sum: f64 = scratch.iter().sum();
            out.set(c, h, 0, 0, sum / area);
        }
    }
    out
}

pub fn relu(fm: &FeatureMap) -> FeatureMap {
    fm.map(|v| v.max(0.0))
}

/// True when pixel `(x, y)` of an `n × n` grid lies in the inscribed disk
/// centred at `((n-1)/2, (n-1)/2)` with radius `n/2`, boundary included.
pub fn in_inscribed_circle(n: usize, x: usize, y: usize) -> bool {
    // doubled coordinates keep everything integral
    let d = |v: usize| (2 * v as i64 - (n as i64 - 1)).pow(2);
    d(x) + d(y) <= (n as i64).pow(2)
}

/// Zeroes every value outside the inscribed circle.
pub fn circle_crop(fm: &FeatureMap) -> Result<FeatureMap> {
    let n = require_square(fm, "circle_crop")?;
    let mut out = fm.clone();
    for c in 0..fm.channels() {
        for h in 0..fm.group_size() {
            let plane = out.plane_mut(c, h);
            for y in 0..n {
                for x in 0..n {
                    if !in_inscribed_circle(n, x, y) {
                        plane[y * n + x] = 0.0;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Fully connected layer over the flattened map; returns `(out, 1, 1, 1)`.
pub fn dense(fm: &FeatureMap, w: &DenseWeights) -> Result<FeatureMap> {
    let input = fm.values();
    if input.len() != w.in_features {
        return Err(Error::Shape(format!(
            "dense layer expects {} inputs, got {}",
            w.in_features,
            input.len()
        )));
    }
    let values = w
        .values
        .chunks_exact(w.in_features)
        .map(|row| row.iter().zip(input).map(|(a, b)| a * b).sum())
        .collect();
    FeatureMap::from_values(w.out_features, 1, 1, 1, values)
}

/// Shape of an activation as seen by the network builder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActShape {
    pub channels: usize,
    pub group_size: usize,
    pub side: usize,
}

impl ActShape {
    fn numel(self) -> usize {
        self.channels * self.group_size * self.side * self.side
    }
}

/// Output shape of one layer, or the reason it cannot be applied.
pub fn infer_shape(spec: &LayerShapeSpec, input: ActShape, kind: GroupKind) -> Result<ActShape> {
    let ActShape { group_size, side, .. } = input;
    let need = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::Shape(msg)) };
    let conv_out = |groups| -> Result<ActShape> {
        if spec.out_channels == 0 {
            return Err(Error::Dimension(format!("{} needs out_channels ≥ 1", spec.kind)));
        }
        Ok(ActShape {
            channels: spec.out_channels,
            group_size: groups,
            side: check_window(side, spec.k, spec.s, spec.p)?,
        })
    };
    match spec.kind {
        LayerKind::GconvLift => {
            check_group_kind(kind)?;
            need(group_size == 1, format!("gconv_lift needs a plain input, got group size {group_size}"))?;
            conv_out(kind.size())
        }
        LayerKind::Gconv => {
            check_group_kind(kind)?;
            need(
                group_size == kind.size(),
                format!("gconv needs group size {}, got {group_size}", kind.size()),
            )?;
            conv_out(kind.size())
        }
        LayerKind::Conv2d => {
            need(group_size == 1, format!("conv2d needs a plain input, got group size {group_size}"))?;
            conv_out(1)
        }
        LayerKind::MaxPool => {
            if spec.p >= spec.k {
                return Err(Error::Shape(format!("pool padding {} must be smaller than kernel {}", spec.p, spec.k)));
            }
            Ok(ActShape {
                side: check_window(side, spec.k, spec.s, spec.p)?,
                ..input
            })
        }
        LayerKind::Relu | LayerKind::CircleCrop => Ok(input),
        LayerKind::CosetMaxPool => {
            need(group_size > 1, "coset_maxpool needs a group axis".into())?;
            Ok(ActShape { group_size: 1, ..input })
        }
        LayerKind::GlobalAvgPool => Ok(ActShape { side: 1, ..input }),
        LayerKind::Dense => {
            if spec.out_channels == 0 {
                return Err(Error::Dimension("dense needs out_channels ≥ 1".into()));
            }
            Ok(ActShape {
                channels: spec.out_channels,
                group_size: 1,
                side: 1,
            })
        }
    }
}

/// How to draw weights when building a network from shape specs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightInit {
    pub seed: u64,
    pub integer_valued: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    kind: GroupKind,
    input_size: usize,
    input_channels: usize,
    layers: Vec<Layer>,
}

impl Network {
    /// Builds a network with explicit layers, checking that shapes chain.
    pub fn new(kind: GroupKind, input_size: usize, input_channels: usize, layers: Vec<Layer>) -> Result<Self> {
        let net = Self {
            kind,
            input_size,
            input_channels,
            layers,
        };
        let shapes = net.shapes()?;
        for (j, (layer, input)) in net.layers.iter().zip(&shapes).enumerate() {
            let ok = match &layer.weights {
                Weights::None => !layer.kind().has_weights(),
                Weights::Filters(f) => {
                    matches!(layer.kind(), LayerKind::GconvLift | LayerKind::Gconv | LayerKind::Conv2d)
                        && f.k() == layer.spec.k
                        && f.in_channels() == input.channels
                        && f.in_group_size() == input.group_size
                        && f.out_channels() == layer.spec.out_channels
                }
                Weights::Dense(w) => {
                    layer.kind() == LayerKind::Dense
                        && w.in_features == input.numel()
                        && w.out_features == layer.spec.out_channels
                }
            };
            if !ok {
                return Err(Error::Config(format!("weights do not fit a {} layer", layer.kind())).at_layer(j));
            }
        }
        Ok(net)
    }

    /// Builds a network from shape specs, drawing every weight from `init`.
    /// Each layer gets its own sub-seed from a ChaCha stream seeded by
    /// `init.seed`, so adding a layer at the end leaves earlier weights alone.
    pub fn from_specs(
        kind: GroupKind,
        input_size: usize,
        input_channels: usize,
        specs: &[LayerShapeSpec],
        init: WeightInit,
    ) -> Result<Self> {
        let skeleton = Self {
            kind,
            input_size,
            input_channels,
            layers: specs
                .iter()
                .map(|&spec| Layer {
                    spec,
                    weights: Weights::None,
                })
                .collect(),
        };
        let shapes = skeleton.shapes()?;
        let mut seeds = ChaCha8Rng::seed_from_u64(init.seed);
        let mut layers = Vec::with_capacity(specs.len());
        for (j, (spec, input)) in specs.iter().zip(&shapes).enumerate() {
            let layer_seed = seeds.next_u64();
            let weights = match spec.kind {
                LayerKind::GconvLift | LayerKind::Gconv | LayerKind::Conv2d => Weights::Filters(
                    FilterBank::random(
                        layer_seed,
                        spec.out_channels,
                        input.channels,
                        input.group_size,
                        spec.k,
                        init.integer_valued,
                    )
                    .map_err(|e| e.at_layer(j))?,
                ),
                LayerKind::Dense => {
                    let mut rng = ChaCha8Rng::seed_from_u64(layer_seed);
                    let n_in = input.numel();
                    let values = random_values(&mut rng, n_in * spec.out_channels, init.integer_valued);
                    Weights::Dense(DenseWeights::new(spec.out_channels, n_in, values).map_err(|e| e.at_layer(j))?)
                }
                _ => Weights::None,
            };
            layers.push(Layer { spec: *spec, weights });
        }
        Ok(Self { layers, ..skeleton })
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn input_channels(&self) -> usize {
        self.input_channels
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerShapeSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    /// Input shape of every layer, followed by the final output shape.
    pub fn shapes(&self) -> Result<Vec<ActShape>> {
        if self.input_size == 0 || self.input_channels == 0 {
            return Err(Error::Dimension("network input must be at least 1×1 with one channel".into()));
        }
        let mut cur = ActShape {
            channels: self.input_channels,
            group_size: 1,
            side: self.input_size,
        };
        let mut shapes = vec![cur];
        for (j, layer) in self.layers.iter().enumerate() {
            cur = infer_shape(&layer.spec, cur, self.kind).map_err(|e| e.at_layer(j))?;
            shapes.push(cur);
        }
        Ok(shapes)
    }

    /// Random input of the right shape for this network.
    pub fn random_input(&self, seed: u64, integer_valued: bool) -> Result<FeatureMap> {
        FeatureMap::random(seed, self.input_channels, 1, self.input_size, self.input_size, integer_valued)
    }

    /// True when the network ends in a rotation-invariant head: coset pooling
    /// and global average pooling have both been applied, and nothing after the
    /// later of the two has a spatial extent.
    pub fn has_invariant_head(&self) -> bool {
        let last = |k: LayerKind| self.layers.iter().rposition(|l| l.kind() == k);
        match (last(LayerKind::CosetMaxPool), last(LayerKind::GlobalAvgPool)) {
            (Some(a), Some(b)) => self.layers[a.max(b) + 1..]
                .iter()
                .all(|l| matches!(l.kind(), LayerKind::Dense | LayerKind::Relu)),
            _ => false,
        }
    }
}

/// Evaluates the network and returns every activation: index 0 is the input
/// and index `j + 1` is the output of layer `j`.
pub fn forward(net: &Network, fm: &FeatureMap) -> Result<Vec<FeatureMap>> {
    if fm.group_size() != 1
        || fm.channels() != net.input_channels
        || fm.height() != net.input_size
        || fm.width() != net.input_size
    {
        return Err(Error::Shape(format!(
            "network expects a {}-channel {}×{} plain input, got {:?}",
            net.input_channels,
            net.input_size,
            net.input_size,
            fm.shape()
        )));
    }
    let mut acts = Vec::with_capacity(net.layers.len() + 1);
    acts.push(fm.clone());
    for (j, layer) in net.layers.iter().enumerate() {
        let next = layer
            .forward(acts.last().expect("non-empty"), net.kind)
            .map_err(|e| e.at_layer(j))?;
        acts.push(next);
    }
    Ok(acts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{act_full, act_spatial};
    use crate::tensor::{max_abs_diff, random_feature_map};

    fn spec(kind: LayerKind, k: usize, s: usize, p: usize, out: usize) -> LayerShapeSpec {
        LayerShapeSpec {
            kind,
            k,
            s,
            p,
            out_channels: out,
        }
    }

    #[test]
    fn conv2d_sizes_and_values() {
        let fm = random_feature_map(1, 1, 1, 5, 5, false).unwrap();
        let f = FilterBank::random(2, 1, 1, 1, 2, false).unwrap();
        let out = conv2d(&fm, &f, 2, 0).unwrap();
        assert_eq!((out.height(), out.width()), (2, 2));

        let id = FilterBank::from_values(1, 1, 1, 1, vec![1.0]).unwrap();
        assert_eq!(conv2d(&fm, &id, 1, 0).unwrap(), fm);

        let ones = FeatureMap::new(1, 1, 3, 3, 1.0).unwrap();
        let f = FilterBank::new(1, 1, 1, 3, 1.0).unwrap();
        assert_eq!(conv2d(&ones, &f, 1, 0).unwrap().values(), &[9.0]);

        let big = FilterBank::new(1, 1, 1, 4, 1.0).unwrap();
        assert!(matches!(conv2d(&ones, &big, 1, 0), Err(Error::Shape(_))));
    }

    #[test]
    fn conv2d_matches_hand_sums() {
        let fm = FeatureMap::from_values(1, 1, 3, 3, (1..=9).map(f64::from).collect()).unwrap();
        let f = FilterBank::from_values(1, 1, 1, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(conv2d(&fm, &f, 1, 0).unwrap().values(), &[12.0, 16.0, 24.0, 28.0]);
        // padding 1, stride 2 over the 3×3: windows centred on the corners
        let f = FilterBank::new(1, 1, 1, 3, 1.0).unwrap();
        let out = conv2d(&fm, &f, 2, 1).unwrap();
        assert_eq!(out.values(), &[12.0, 16.0, 24.0, 28.0]);
    }

    #[test]
    fn lift_identity_slot_is_plain_conv() {
        let fm = random_feature_map(3, 1, 1, 7, 7, true).unwrap();
        let f = FilterBank::random(4, 2, 1, 1, 3, true).unwrap();
        let lifted = gconv_lift(&fm, &f, 1, 0, GroupKind::P4).unwrap();
        let plain = conv2d(&fm, &f, 1, 0).unwrap();
        for c in 0..2 {
            assert_eq!(lifted.plane(c, 0), plain.plane(c, 0));
        }
        assert!(matches!(
            gconv_lift(&lifted, &f, 1, 0, GroupKind::P4),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn symmetric_filter_gives_equal_slots() {
        let fm = random_feature_map(5, 1, 1, 6, 6, false).unwrap();
        let f = FilterBank::new(1, 1, 1, 3, 0.5).unwrap();
        let lifted = gconv_lift(&fm, &f, 1, 1, GroupKind::P4).unwrap();
        for g in 1..4 {
            assert_eq!(lifted.plane(0, g), lifted.plane(0, 0));
        }
    }

    #[test]
    fn gconv_delta_kernel_is_identity() {
        let fm = random_feature_map(8, 1, 4, 5, 5, false).unwrap();
        let mut f = FilterBank::new(1, 1, 4, 3, 0.0).unwrap();
        f.set(0, 0, 0, 1, 1, 1.0);
        let out = gconv(&fm, &f, 1, 1, GroupKind::P4).unwrap();
        assert_eq!(out, fm);
    }

    #[test]
    fn lift_equivariance_exact_sizes() {
        for (i, s, p) in [(7, 1, 0), (9, 2, 0), (33, 2, 1)] {
            let x = random_feature_map(12, 1, 1, i, i, true).unwrap();
            let f = FilterBank::random(13, 2, 1, 1, 3, true).unwrap();
            let y = gconv_lift(&x, &f, s, p, GroupKind::P4).unwrap();
            for g in GroupKind::P4.elements() {
                let lhs = gconv_lift(&act_spatial(g, &x).unwrap(), &f, s, p, GroupKind::P4).unwrap();
                assert_eq!(lhs, act_full(g, &y, GroupKind::P4).unwrap(), "i={i} g={g}");
            }
        }
    }

    #[test]
    fn gconv_p4m_equivariance() {
        let x = random_feature_map(21, 2, 8, 9, 9, true).unwrap();
        let f = FilterBank::random(22, 3, 2, 8, 3, true).unwrap();
        let y = gconv(&x, &f, 2, 1, GroupKind::P4m).unwrap();
        for g in GroupKind::P4m.elements() {
            let lhs = gconv(&act_full(g, &x, GroupKind::P4m).unwrap(), &f, 2, 1, GroupKind::P4m).unwrap();
            assert_eq!(lhs, act_full(g, &y, GroupKind::P4m).unwrap(), "g={g}");
        }
    }

    #[test]
    fn gconv_breaks_at_even_size() {
        let f = FilterBank::random(30, 1, 1, 4, 3, true).unwrap();
        let broken = (0..10).any(|seed| {
            let x = random_feature_map(seed, 1, 4, 32, 32, true).unwrap();
            let y = gconv(&x, &f, 2, 1, GroupKind::P4).unwrap();
            let rx = act_full(GroupElement::R, &x, GroupKind::P4).unwrap();
            let lhs = gconv(&rx, &f, 2, 1, GroupKind::P4).unwrap();
            max_abs_diff(&lhs, &act_full(GroupElement::R, &y, GroupKind::P4).unwrap()).unwrap() > 0.0
        });
        assert!(broken);
    }

    #[test]
    fn maxpool_examples() {
        let c = FeatureMap::new(1, 4, 6, 6, 3.5).unwrap();
        let out = maxpool(&c, 2, 2).unwrap();
        assert!(out.values().iter().all(|&v| v == 3.5));
        assert_eq!(out.height(), 3);
        let fm = FeatureMap::from_values(1, 1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(maxpool(&fm, 2, 2).unwrap().values(), &[4.0]);
        assert!(matches!(maxpool(&fm, 3, 1), Err(Error::Shape(_))));
    }

    #[test]
    fn strided_maxpool_on_odd_side_breaks() {
        // 1..25 has a unique max in every window, so rotated sampling shows up
        let x = FeatureMap::from_values(1, 1, 5, 5, (1..=25).map(f64::from).collect()).unwrap();
        let pooled = maxpool(&x, 2, 2).unwrap();
        let lhs = maxpool(&act_spatial(GroupElement::R, &x).unwrap(), 2, 2).unwrap();
        let rhs = act_spatial(GroupElement::R, &pooled).unwrap();
        assert!(max_abs_diff(&lhs, &rhs).unwrap() > 0.0);

        let x = FeatureMap::from_values(1, 1, 4, 4, (1..=16).map(f64::from).collect()).unwrap();
        let lhs = maxpool(&act_spatial(GroupElement::R, &x).unwrap(), 2, 2).unwrap();
        let rhs = act_spatial(GroupElement::R, &maxpool(&x, 2, 2).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn coset_pool_examples() {
        let fm = FeatureMap::from_values(1, 4, 1, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(coset_maxpool(&fm).unwrap().values(), &[4.0]);
        let same = FeatureMap::new(2, 4, 3, 3, -1.0).unwrap();
        assert_eq!(coset_maxpool(&same).unwrap(), FeatureMap::new(2, 1, 3, 3, -1.0).unwrap());
        assert!(coset_maxpool(&FeatureMap::new(1, 1, 2, 2, 0.0).unwrap()).is_err());
    }

    #[test]
    fn global_avg_pool_examples() {
        let c = FeatureMap::new(1, 1, 4, 4, 2.25).unwrap();
        assert_eq!(global_avg_pool(&c).values(), &[2.25]);
        let fm = FeatureMap::from_values(1, 1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(global_avg_pool(&fm).values(), &[2.5]);
    }

    #[test]
    fn global_avg_pool_invariant_for_real_values() {
        let x = random_feature_map(44, 3, 4, 11, 11, false).unwrap();
        let base = global_avg_pool(&x);
        for g in GroupKind::P4m.elements() {
            assert_eq!(global_avg_pool(&act_spatial(g, &x).unwrap()), base);
        }
    }

    #[test]
    fn relu_examples() {
        let fm = FeatureMap::from_values(1, 1, 1, 3, vec![0.0, -3.0, 2.0]).unwrap();
        // 1×3 is fine for pointwise ops
        assert_eq!(relu(&fm).values(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn circle_crop_small_maps() {
        let one = FeatureMap::new(1, 1, 1, 1, 7.0).unwrap();
        assert_eq!(circle_crop(&one).unwrap(), one);
        let two = FeatureMap::from_values(1, 1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(circle_crop(&two).unwrap(), two);
        // 3×3: corners at distance √2 > 1.5? no, √2 ≈ 1.414 ≤ 1.5, kept
        let three = FeatureMap::new(1, 1, 3, 3, 1.0).unwrap();
        assert_eq!(circle_crop(&three).unwrap(), three);
        // 4×4: corners at distance √4.5 ≈ 2.12 > 2, dropped
        let four = circle_crop(&FeatureMap::new(1, 1, 4, 4, 1.0).unwrap()).unwrap();
        assert_eq!(four.get(0, 0, 0, 0), 0.0);
        assert_eq!(four.get(0, 0, 3, 3), 0.0);
        assert_eq!(four.get(0, 0, 0, 1), 1.0);
        assert_eq!(four.values().iter().sum::<f64>(), 12.0);
        let rect = FeatureMap::new(1, 1, 2, 3, 1.0).unwrap();
        assert!(matches!(circle_crop(&rect), Err(Error::Shape(_))));
    }

    #[test]
    fn circle_crop_idempotent_and_symmetric() {
        for n in 1..=17 {
            let x = random_feature_map(n as u64, 1, 1, n, n, true).unwrap();
            let once = circle_crop(&x).unwrap();
            assert_eq!(circle_crop(&once).unwrap(), once);
            for g in GroupKind::P4m.elements() {
                assert_eq!(
                    circle_crop(&act_spatial(g, &x).unwrap()).unwrap(),
                    act_spatial(g, &once).unwrap()
                );
            }
        }
    }

    #[test]
    fn dense_layer() {
        let fm = FeatureMap::from_values(2, 1, 1, 1, vec![1.0, 2.0]).unwrap();
        let w = DenseWeights::new(2, 2, vec![1.0, 1.0, -1.0, 3.0]).unwrap();
        assert_eq!(dense(&fm, &w).unwrap().values(), &[3.0, 5.0]);
        let wrong = DenseWeights::new(1, 3, vec![0.0; 3]).unwrap();
        assert!(dense(&fm, &wrong).is_err());
    }

    fn toy(i: usize) -> Network {
        let specs = [
            spec(LayerKind::GconvLift, 3, 2, 1, 1),
            spec(LayerKind::GlobalAvgPool, 0, 1, 0, 0),
            spec(LayerKind::CosetMaxPool, 0, 1, 0, 0),
            spec(LayerKind::Dense, 0, 1, 0, 2),
        ];
        Network::from_specs(
            GroupKind::P4,
            i,
            1,
            &specs,
            WeightInit {
                seed: 3,
                integer_valued: true,
            },
        )
        .unwrap()
    }

    #[test]
    fn forward_toy_network() {
        let net = toy(33);
        let x = net.random_input(9, true).unwrap();
        let acts = forward(&net, &x).unwrap();
        assert_eq!(acts.len(), net.layers().len() + 1);
        assert_eq!(acts[1].shape(), [1, 4, 17, 17]);
        assert_eq!(acts.last().unwrap().shape(), [2, 1, 1, 1]);
        assert!(net.has_invariant_head());
    }

    #[test]
    fn forward_empty_and_errors() {
        let net = Network::new(GroupKind::P4, 4, 1, vec![]).unwrap();
        let x = net.random_input(1, false).unwrap();
        assert_eq!(forward(&net, &x).unwrap(), vec![x.clone()]);
        let wrong = FeatureMap::new(1, 1, 5, 5, 0.0).unwrap();
        assert!(matches!(forward(&net, &wrong), Err(Error::Shape(_))));
    }

    #[test]
    fn builder_reports_failing_layer() {
        let specs = [
            spec(LayerKind::Conv2d, 3, 1, 0, 2),
            spec(LayerKind::MaxPool, 2, 2, 0, 0),
            spec(LayerKind::Conv2d, 5, 1, 0, 2),
        ];
        let err = Network::from_specs(GroupKind::Z2, 8, 1, &specs, WeightInit { seed: 0, integer_valued: true })
            .unwrap_err();
        assert!(matches!(err, Error::Layer { layer: 2, .. }), "{err:?}");

        let specs = [spec(LayerKind::Gconv, 3, 1, 0, 2)];
        let err = Network::from_specs(GroupKind::P4, 8, 1, &specs, WeightInit { seed: 0, integer_valued: true })
            .unwrap_err();
        assert!(matches!(err, Error::Layer { layer: 0, .. }));
    }

    #[test]
    fn weights_are_seeded() {
        assert_eq!(toy(33), toy(33));
        let other = Network::from_specs(
            GroupKind::P4,
            33,
            1,
            &toy(33).specs(),
            WeightInit {
                seed: 4,
                integer_valued: true,
            },
        )
        .unwrap();
        assert_ne!(other, toy(33));
    }
}
