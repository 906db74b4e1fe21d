//! Empirical and brute-force checks.
//!
//! * The commutation oracle enumerates every output index of a strided window
//!   layer and compares "sample then transform" against "transform then
//!   sample" patch by patch.
//! * The equivariance error compares `f(T x)` against `T'(f(x))` at each depth.
//! * The invariance sweep rotates the input by arbitrary angles with bilinear
//!   interpolation and compares final network outputs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analyzer::{check_layer, output_size};
use crate::error::{Error, Result};
pub use crate::group::IndexPatch;
use crate::group::{act, act_spatial, mirror_index, mirror_patch, rotate_index, rotate_patch, GroupElement, GroupKind};
use crate::layers::{circle_crop, forward, LayerKind, Network};
use crate::tensor::{max_abs_diff, FeatureMap};

/// Offset between a profile seed and the seed its input map is drawn from,
/// so weights and input never share a stream.
pub const INPUT_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

/// Input indices read by output cell `(x, y)` of a window layer.
pub fn index_patch(x: usize, y: usize, k: usize, s: usize) -> IndexPatch {
    IndexPatch::new((s * x, s * y), (s * x + k - 1, s * y + k - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symmetry {
    #[serde(rename = "rot")]
    Rotation,
    #[serde(rename = "mirror")]
    Mirror,
}

impl FromStr for Symmetry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rot" | "rotation" => Ok(Symmetry::Rotation),
            "mirror" => Ok(Symmetry::Mirror),
            other => Err(Error::Config(format!("unknown symmetry '{other}' (expected rot or mirror)"))),
        }
    }
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symmetry::Rotation => "rot",
            Symmetry::Mirror => "mirror",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    /// Output index `(x, y)` where the two routes disagree.
    pub output_index: (usize, usize),
    /// Patch sampled at the transformed output index.
    pub transform_then_sample: IndexPatch,
    /// Transformed patch sampled at the original output index.
    pub sample_then_transform: IndexPatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommutationVerdict {
    pub holds: bool,
    pub counterexample: Option<Counterexample>,
}

fn commutation(
    i: usize,
    k: usize,
    s: usize,
    index_map: fn(usize, usize, usize) -> Result<(usize, usize)>,
    patch_map: fn(usize, IndexPatch) -> Result<IndexPatch>,
) -> Result<CommutationVerdict> {
    if k > i {
        return Err(Error::Shape(format!("kernel {k} larger than input {i}")));
    }
    let o = output_size(i, k, s, 0)?;
    for y in 0..o {
        for x in 0..o {
            let (tx, ty) = index_map(o, x, y)?;
            let lhs = index_patch(tx, ty, k, s);
            let rhs = patch_map(i, index_patch(x, y, k, s))?;
            if lhs != rhs {
                return Ok(CommutationVerdict {
                    holds: false,
                    counterexample: Some(Counterexample {
                        output_index: (x, y),
                        transform_then_sample: lhs,
                        sample_then_transform: rhs,
                    }),
                });
            }
        }
    }
    Ok(CommutationVerdict {
        holds: true,
        counterexample: None,
    })
}

/// Checks `index(R_o(x, y)) == R_i(index(x, y))` for every output index.
pub fn rotation_commutation(i: usize, k: usize, s: usize) -> Result<CommutationVerdict> {
    commutation(i, k, s, rotate_index, rotate_patch)
}

/// Mirror counterpart of [`rotation_commutation`].
pub fn mirror_commutation(i: usize, k: usize, s: usize) -> Result<CommutationVerdict> {
    commutation(i, k, s, mirror_index, mirror_patch)
}

pub fn commutation_for(symmetry: Symmetry, i: usize, k: usize, s: usize) -> Result<CommutationVerdict> {
    match symmetry {
        Symmetry::Rotation => rotation_commutation(i, k, s),
        Symmetry::Mirror => mirror_commutation(i, k, s),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCell {
    pub i: usize,
    pub k: usize,
    pub s: usize,
    pub verdict: CommutationVerdict,
    /// What `check_layer` predicts for the same cell.
    pub predicted: bool,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommutationGrid {
    pub symmetry: Symmetry,
    pub cells: Vec<GridCell>,
    pub agreeing: usize,
}

impl CommutationGrid {
    pub fn all_agree(&self) -> bool {
        self.agreeing == self.cells.len()
    }
}

/// Runs the oracle on every `(i, k, s)` with `k ≤ i` in the given inclusive
/// ranges, in `i`, then `k`, then `s` order.
pub fn commutation_grid(
    symmetry: Symmetry,
    i_range: (usize, usize),
    k_range: (usize, usize),
    s_range: (usize, usize),
) -> Result<CommutationGrid> {
    let ranges = [("i", i_range), ("k", k_range), ("s", s_range)];
    for (name, (lo, hi)) in ranges {
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("degenerate {name} range {lo}..={hi}")));
        }
    }
    let mut cells = Vec::new();
    for i in i_range.0..=i_range.1 {
        for k in k_range.0..=k_range.1.min(i) {
            for s in s_range.0..=s_range.1 {
                let verdict = commutation_for(symmetry, i, k, s)?;
                let predicted = check_layer(i, k, s, 0)?;
                cells.push(GridCell {
                    i,
                    k,
                    s,
                    verdict,
                    predicted,
                    agrees: verdict.holds == predicted,
                });
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::Config("ranges contain no cell with k ≤ i".into()));
    }
    let agreeing = cells.iter().filter(|c| c.agrees).count();
    Ok(CommutationGrid {
        symmetry,
        cells,
        agreeing,
    })
}

/// `ε = sqrt(Σ |a - b|²) / (C·K·I·J)`: the root of the summed squared
/// difference, divided by the number of entries. The channel axis is folded
/// into both the sum and the count.
pub fn equivariance_error(a: &FeatureMap, b: &FeatureMap) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("cannot compare {:?} with {:?}", a.shape(), b.shape())));
    }
    let sq: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sq.sqrt() / a.values().len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    /// Index of the layer whose output is compared.
    pub layer: usize,
    pub kind: LayerKind,
    pub element: GroupElement,
    /// Whether the compared activation carries a group axis.
    pub group_valued: bool,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceProfile {
    pub network: String,
    pub seed: u64,
    pub integer_valued: bool,
    pub entries: Vec<ProfileEntry>,
}

impl EquivarianceProfile {
    pub fn max_error(&self) -> f64 {
        self.entries.iter().map(|e| e.error).fold(0.0, f64::max)
    }

    pub fn all_zero(&self) -> bool {
        self.entries.iter().all(|e| e.error == 0.0)
    }
}

fn check_elements(net: &Network, elements: &[GroupElement]) -> Result<()> {
    for &g in elements {
        if net.kind() != GroupKind::Z2 && !net.kind().contains(g) {
            return Err(Error::UnsupportedKind(format!("{g} is not an element of {}", net.kind())));
        }
    }
    Ok(())
}

/// Compares `forward(g·x)` against `g·forward(x)` after every layer, for each
/// element. Group-valued activations use the full action; plain ones the
/// spatial action only.
pub fn profile_input(net: &Network, x: &FeatureMap, elements: &[GroupElement]) -> Result<Vec<ProfileEntry>> {
    check_elements(net, elements)?;
    let base = forward(net, x)?;
    let mut entries = Vec::with_capacity(elements.len() * net.layers().len());
    for &g in elements {
        let moved = forward(net, &act_spatial(g, x)?)?;
        for (j, (lhs, plain)) in moved.iter().zip(&base).skip(1).enumerate() {
            let rhs = act(g, plain, net.kind()).map_err(|e| e.at_layer(j))?;
            entries.push(ProfileEntry {
                layer: j,
                kind: net.layers()[j].kind(),
                element: g,
                group_valued: plain.group_size() > 1,
                error: equivariance_error(lhs, &rhs)?,
            });
        }
    }
    Ok(entries)
}

/// Per-depth equivariance errors on an input drawn from `seed`. The caller
/// builds `net` (normally from the same seed) so weights and input are both
/// reproducible.
pub fn profile_equivariance(
    net: &Network,
    name: &str,
    seed: u64,
    elements: &[GroupElement],
    integer_valued: bool,
) -> Result<EquivarianceProfile> {
    let x = net.random_input(seed.wrapping_add(INPUT_SEED_OFFSET), integer_valued)?;
    Ok(EquivarianceProfile {
        network: name.to_string(),
        seed,
        integer_valued,
        entries: profile_input(net, &x, elements)?,
    })
}

/// `(cos, sin)` of an angle in degrees, exact at multiples of 90°.
fn cos_sin_degrees(angle: f64) -> (f64, f64) {
    let a = angle.rem_euclid(360.0);
    if a % 90.0 == 0.0 {
        match (a / 90.0) as u32 {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    } else {
        let (s, c) = a.to_radians().sin_cos();
        (c, s)
    }
}

/// Counterclockwise rotation about the map centre with bilinear sampling.
///
/// Each target pixel centre is mapped back into the source by the inverse
/// rotation; the four surrounding source pixels are blended by their
/// axis-aligned fractional offsets, and pixels outside the map read as 0.
/// At multiples of 90° this reproduces `act_spatial` exactly.
pub fn rotate_bilinear(fm: &FeatureMap, angle_degrees: f64) -> Result<FeatureMap> {
    if !fm.is_square() {
        return Err(Error::Shape(format!(
            "bilinear rotation needs a square map, got {}×{}",
            fm.height(),
            fm.width()
        )));
    }
    if !angle_degrees.is_finite() {
        return Err(Error::Config(format!("angle must be finite, got {angle_degrees}")));
    }
    let n = fm.height();
    let c = (n as f64 - 1.0) / 2.0;
    let (cos, sin) = cos_sin_degrees(angle_degrees);
    let mut out = fm.clone();
    for ch in 0..fm.channels() {
        for h in 0..fm.group_size() {
            let src = fm.plane(ch, h);
            let read = |x: i64, y: i64| -> f64 {
                if x < 0 || y < 0 || x >= n as i64 || y >= n as i64 {
                    0.0
                } else {
                    src[y as usize * n + x as usize]
                }
            };
            let dst = out.plane_mut(ch, h);
            for ty in 0..n {
                for tx in 0..n {
                    let (u, v) = (tx as f64 - c, ty as f64 - c);
                    let sx = u * cos - v * sin + c;
                    let sy = u * sin + v * cos + c;
                    let (x0, y0) = (sx.floor(), sy.floor());
                    let (fx, fy) = (sx - x0, sy - y0);
                    let (x0, y0) = (x0 as i64, y0 as i64);
                    dst[ty * n + tx] = (1.0 - fx) * (1.0 - fy) * read(x0, y0)
                        + fx * (1.0 - fy) * read(x0 + 1, y0)
                        + (1.0 - fx) * fy * read(x0, y0 + 1)
                        + fx * fy * read(x0 + 1, y0 + 1);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub angle: f64,
    pub discrepancy: f64,
}

/// Output discrepancy between `circle_crop(x)` and
/// `circle_crop(rotate_bilinear(x, angle))` for each angle.
pub fn invariance_sweep_input(net: &Network, x: &FeatureMap, angles: &[f64]) -> Result<Vec<SweepRow>> {
    if !net.has_invariant_head() {
        return Err(Error::Config(
            "invariance sweep needs coset pooling and global average pooling at the end of the network".into(),
        ));
    }
    let run = |input: &FeatureMap| -> Result<FeatureMap> {
        let acts = forward(net, &circle_crop(input)?)?;
        Ok(acts.into_iter().last().expect("forward returns the input at least"))
    };
    let base = run(x)?;
    angles
        .iter()
        .map(|&angle| {
            let out = run(&rotate_bilinear(x, angle)?)?;
            Ok(SweepRow {
                angle,
                discrepancy: max_abs_diff(&base, &out)?,
            })
        })
        .collect()
}

pub fn invariance_sweep(net: &Network, seed: u64, angles: &[f64], integer_valued: bool) -> Result<Vec<SweepRow>> {
    let x = net.random_input(seed.wrapping_add(INPUT_SEED_OFFSET), integer_valued)?;
    invariance_sweep_input(net, &x, angles)
}

/// Multiples of `step` in `[0, 360)`.
pub fn sweep_angles(step: f64) -> Result<Vec<f64>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Config(format!("angle step must be positive, got {step}")));
    }
    Ok((0..).map(|j| j as f64 * step).take_while(|&a| a < 360.0).collect())
}
