//! The p4 and p4m point groups and their actions on feature maps.
//!
//! Coordinates are `(x, y) = (column, row)` everywhere, with `(0, 0)` at the
//! top-left. A rotation `r` is 90° counterclockwise on screen and sends
//! `(x, y)` to `(y, n - 1 - x)`. The mirror `m` flips columns. Elements are
//! kept in the normal form `r^a m^b`, so acting on a map mirrors first and
//! then rotates.
//!
//! Group-axis slots are ordered `[e, r, r², r³, m, rm, r²m, r³m]`; p4 uses the
//! first four.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::FeatureMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GroupElement {
    rotations: u8,
    mirrored: bool,
}

impl GroupElement {
    pub const IDENTITY: Self = Self {
        rotations: 0,
        mirrored: false,
    };
    /// One counterclockwise quarter turn.
    pub const R: Self = Self {
        rotations: 1,
        mirrored: false,
    };
    pub const M: Self = Self {
        rotations: 0,
        mirrored: true,
    };

    pub fn new(rotations: u8, mirrored: bool) -> Self {
        Self {
            rotations: rotations % 4,
            mirrored,
        }
    }

    pub fn rotation(quarter_turns: u8) -> Self {
        Self::new(quarter_turns, false)
    }

    /// A clockwise quarter turn, i.e. the inverse of [`GroupElement::R`].
    pub fn clockwise() -> Self {
        Self::R.inverse()
    }

    pub fn rotations(self) -> u8 {
        self.rotations
    }

    pub fn mirrored(self) -> bool {
        self.mirrored
    }

    pub fn is_identity(self) -> bool {
        self == Self::IDENTITY
    }

    /// `self · other`, acting as "apply `other` first".
    pub fn compose(self, other: Self) -> Self {
        // m r^c = r^{-c} m
        let c = if self.mirrored {
            (4 - other.rotations) % 4
        } else {
            other.rotations
        };
        Self::new(self.rotations + c, self.mirrored ^ other.mirrored)
    }

    pub fn inverse(self) -> Self {
        if self.mirrored {
            self
        } else {
            Self::new(4 - self.rotations, false)
        }
    }

    /// Position of this element on the group axis.
    pub fn slot(self) -> usize {
        usize::from(self.rotations) + if self.mirrored { 4 } else { 0 }
    }

    pub fn from_slot(slot: usize) -> Option<Self> {
        (slot < 8).then(|| Self::new((slot % 4) as u8, slot >= 4))
    }

    /// Where this element sends spatial index `(x, y)` on an `n × n` grid.
    pub fn map_index(self, n: usize, x: usize, y: usize) -> Result<(usize, usize)> {
        let (mut x, mut y) = if self.mirrored {
            mirror_index(n, x, y)?
        } else {
            check_index(n, x, y)?;
            (x, y)
        };
        for _ in 0..self.rotations {
            (x, y) = (y, n - 1 - x);
        }
        Ok((x, y))
    }

    pub fn map_patch(self, n: usize, patch: IndexPatch) -> Result<IndexPatch> {
        let mut p = if self.mirrored {
            mirror_patch(n, patch)?
        } else {
            patch.validate(n)?;
            patch
        };
        for _ in 0..self.rotations {
            p = rotate_patch(n, p)?;
        }
        Ok(p)
    }

    pub fn name(self) -> String {
        let rot = match self.rotations {
            0 => "",
            1 => "r",
            2 => "r2",
            _ => "r3",
        };
        match (rot, self.mirrored) {
            ("", false) => "e".to_string(),
            (r, false) => r.to_string(),
            (r, true) => format!("{r}m"),
        }
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for GroupElement {
    type Err = Error;

    /// Accepts `e`, `r`, `r2`, `r3`, `m`, `rm`, `r2m`, `r3m`, and the
    /// mirror-on-the-left spellings `mr`, `mr2`, `mr3` (read as `m·r^a`).
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let rot = |r: &str| -> Option<u8> {
            match r {
                "" => Some(0),
                "r" | "r1" => Some(1),
                "r2" => Some(2),
                "r3" => Some(3),
                _ => None,
            }
        };
        let parsed = if t == "e" || t == "id" {
            Some(Self::IDENTITY)
        } else if let Some(r) = t.strip_prefix('m') {
            rot(r).map(|a| Self::M.compose(Self::rotation(a)))
        } else if let Some(r) = t.strip_suffix('m') {
            rot(r).map(|a| Self::new(a, true))
        } else {
            rot(&t).filter(|&a| a > 0).map(Self::rotation)
        };
        parsed.ok_or_else(|| Error::Config(format!("unknown group element '{s}'")))
    }
}

impl From<GroupElement> for String {
    fn from(g: GroupElement) -> String {
        g.name()
    }
}

impl TryFrom<String> for GroupElement {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    Z2,
    P4,
    P4m,
}

impl GroupKind {
    pub fn size(self) -> usize {
        match self {
            GroupKind::Z2 => 1,
            GroupKind::P4 => 4,
            GroupKind::P4m => 8,
        }
    }

    /// Elements in slot order.
    pub fn elements(self) -> Vec<GroupElement> {
        match self {
            GroupKind::Z2 => vec![GroupElement::IDENTITY],
            _ => (0..self.size()).filter_map(GroupElement::from_slot).collect(),
        }
    }

    pub fn contains(self, g: GroupElement) -> bool {
        match self {
            GroupKind::Z2 => g.is_identity(),
            GroupKind::P4 => !g.mirrored(),
            GroupKind::P4m => true,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GroupKind::Z2 => "z2",
            GroupKind::P4 => "p4",
            GroupKind::P4m => "p4m",
        }
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GroupKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "z2" => Ok(GroupKind::Z2),
            "p4" => Ok(GroupKind::P4),
            "p4m" => Ok(GroupKind::P4m),
            other => Err(Error::Config(format!("unknown group '{other}'"))),
        }
    }
}

/// Rectangle of sampled indices `[top_left, bottom_right]`, both inclusive,
/// as `(col, row)` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexPatch {
    pub top_left: (usize, usize),
    pub bottom_right: (usize, usize),
}

impl IndexPatch {
    pub fn new(top_left: (usize, usize), bottom_right: (usize, usize)) -> Self {
        Self {
            top_left,
            bottom_right,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let (x1, y1) = self.top_left;
        let (x2, y2) = self.bottom_right;
        if x1 > x2 || y1 > y2 {
            return Err(Error::Patch(format!(
                "top-left {:?} is not above-left of bottom-right {:?}",
                self.top_left, self.bottom_right
            )));
        }
        if x2 >= n || y2 >= n {
            return Err(Error::Patch(format!(
                "corner {:?} outside a {n}×{n} grid",
                self.bottom_right
            )));
        }
        Ok(())
    }

    /// Every sampled `(col, row)` index, row-major.
    pub fn indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (x1, y1) = self.top_left;
        let (x2, y2) = self.bottom_right;
        (y1..=y2).flat_map(move |y| (x1..=x2).map(move |x| (x, y)))
    }

    pub fn len(&self) -> usize {
        (self.bottom_right.0 - self.top_left.0 + 1) * (self.bottom_right.1 - self.top_left.1 + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

fn check_index(n: usize, x: usize, y: usize) -> Result<()> {
    if x >= n || y >= n {
        Err(Error::Index { n, x, y })
    } else {
        Ok(())
    }
}

/// Quarter-turn counterclockwise: `(x, y) -> (y, n - 1 - x)`.
pub fn rotate_index(n: usize, x: usize, y: usize) -> Result<(usize, usize)> {
    check_index(n, x, y)?;
    Ok((y, n - 1 - x))
}

/// Horizontal mirror: `(x, y) -> (n - 1 - x, y)`.
pub fn mirror_index(n: usize, x: usize, y: usize) -> Result<(usize, usize)> {
    check_index(n, x, y)?;
    Ok((n - 1 - x, y))
}

/// Rotates a patch; the top-left corner ends up bottom-left, so the x
/// coordinates trade places.
pub fn rotate_patch(n: usize, patch: IndexPatch) -> Result<IndexPatch> {
    patch.validate(n)?;
    let (x1, y1) = patch.top_left;
    let (x2, y2) = patch.bottom_right;
    Ok(IndexPatch::new((y1, n - 1 - x2), (y2, n - 1 - x1)))
}

pub fn mirror_patch(n: usize, patch: IndexPatch) -> Result<IndexPatch> {
    patch.validate(n)?;
    let (x1, y1) = patch.top_left;
    let (x2, y2) = patch.bottom_right;
    Ok(IndexPatch::new((n - 1 - x2, y1), (n - 1 - x1, y2)))
}

pub fn compose(a: GroupElement, b: GroupElement) -> GroupElement {
    a.compose(b)
}

pub fn inverse(a: GroupElement) -> GroupElement {
    a.inverse()
}

/// Moves every spatial value at `(x, y)` to `g(x, y)` on one square plane.
pub(crate) fn transform_plane(g: GroupElement, n: usize, src: &[f64], dst: &mut [f64]) {
    debug_assert_eq!(src.len(), n * n);
    for y in 0..n {
        for x in 0..n {
            // in range by construction
            let (tx, ty) = g.map_index(n, x, y).expect("index in range");
            dst[ty * n + tx] = src[y * n + x];
        }
    }
}

/// The spatial half of the action: transforms the grid of every
/// (channel, slot) plane and leaves the group axis alone.
pub fn act_spatial(g: GroupElement, fm: &FeatureMap) -> Result<FeatureMap> {
    if !fm.is_square() {
        return Err(Error::Shape(format!(
            "spatial action needs a square map, got {}×{}",
            fm.height(),
            fm.width()
        )));
    }
    let n = fm.height();
    let mut out = fm.clone();
    for c in 0..fm.channels() {
        for h in 0..fm.group_size() {
            transform_plane(g, n, fm.plane(c, h), out.plane_mut(c, h));
        }
    }
    Ok(out)
}

/// `perm[slot(h)] = slot(g·h)` for every element `h` of `kind`.
pub fn group_permutation(g: GroupElement, kind: GroupKind) -> Result<Vec<usize>> {
    if kind == GroupKind::Z2 {
        return Err(Error::UnsupportedKind(
            "z2 has no group axis to permute".into(),
        ));
    }
    if !kind.contains(g) {
        return Err(Error::UnsupportedKind(format!("{g} is not an element of {kind}")));
    }
    Ok(kind.elements().into_iter().map(|h| g.compose(h).slot()).collect())
}

/// The induced action on group-valued maps: spatial transform plus the
/// left-multiplication permutation of the group axis.
pub fn act_full(g: GroupElement, fm: &FeatureMap, kind: GroupKind) -> Result<FeatureMap> {
    if fm.group_size() != kind.size() {
        return Err(Error::Shape(format!(
            "map has group size {}, {kind} needs {}",
            fm.group_size(),
            kind.size()
        )));
    }
    if kind == GroupKind::Z2 {
        return act_spatial(g, fm);
    }
    if !fm.is_square() {
        return Err(Error::Shape(format!(
            "group action needs a square map, got {}×{}",
            fm.height(),
            fm.width()
        )));
    }
    let perm = group_permutation(g, kind)?;
    let n = fm.height();
    let mut out = fm.clone();
    for c in 0..fm.channels() {
        for (h, &target) in perm.iter().enumerate() {
            transform_plane(g, n, fm.plane(c, h), out.plane_mut(c, target));
        }
    }
    Ok(out)
}

/// Acts with `act_full` on group-valued maps and `act_spatial` on plain ones.
pub fn act(g: GroupElement, fm: &FeatureMap, kind: GroupKind) -> Result<FeatureMap> {
    if fm.group_size() == 1 {
        act_spatial(g, fm)
    } else {
        act_full(g, fm, kind)
    }
}
