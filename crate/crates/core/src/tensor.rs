//! Dense feature maps and filter banks.
//!
//! Layout is always `(channel, group, row, col)` flattened row-major, with
//! row 0 at the top and col 0 at the left. Filters are `(out, in, in_group,
//! row, col)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Integer-valued random draws are uniform over `-RANDOM_INT_BOUND..=RANDOM_INT_BOUND`.
pub const RANDOM_INT_BOUND: i32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    group_size: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

fn check_group_size(group_size: usize) -> Result<()> {
    match group_size {
        1 | 4 | 8 => Ok(()),
        other => Err(Error::Dimension(format!(
            "group size must be 1, 4 or 8, got {other}"
        ))),
    }
}

fn check_positive(dims: &[(&str, usize)]) -> Result<()> {
    for (name, v) in dims {
        if *v == 0 {
            return Err(Error::Dimension(format!("{name} must be at least 1")));
        }
    }
    Ok(())
}

pub(crate) fn random_values(rng: &mut ChaCha8Rng, len: usize, integer_valued: bool) -> Vec<f64> {
    if integer_valued {
        (0..len)
            .map(|_| f64::from(rng.gen_range(-RANDOM_INT_BOUND..=RANDOM_INT_BOUND)))
            .collect()
    } else {
        (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect()
    }
}

impl FeatureMap {
    pub fn new(channels: usize, group_size: usize, height: usize, width: usize, fill: f64) -> Result<Self> {
        check_positive(&[
            ("channels", channels),
            ("group_size", group_size),
            ("height", height),
            ("width", width),
        ])?;
        check_group_size(group_size)?;
        Ok(Self {
            channels,
            group_size,
            height,
            width,
            values: vec![fill; channels * group_size * height * width],
        })
    }

    pub fn from_values(
        channels: usize,
        group_size: usize,
        height: usize,
        width: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let mut fm = Self::new(channels, group_size, height, width, 0.0)?;
        if values.len() != fm.values.len() {
            return Err(Error::Shape(format!(
                "expected {} values, got {}",
                fm.values.len(),
                values.len()
            )));
        }
        fm.values = values;
        Ok(fm)
    }

    /// Deterministic random map. Integer mode draws from `{-4, ..., 4}` so
    /// downstream sums of products stay exact in double precision.
    pub fn random(
        seed: u64,
        channels: usize,
        group_size: usize,
        height: usize,
        width: usize,
        integer_valued: bool,
    ) -> Result<Self> {
        let mut fm = Self::new(channels, group_size, height, width, 0.0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        fm.values = random_values(&mut rng, fm.values.len(), integer_valued);
        Ok(fm)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.channels, self.group_size, self.height, self.width]
    }

    pub fn is_square(&self) -> bool {
        self.height == self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn offset(&self, c: usize, g: usize, row: usize, col: usize) -> usize {
        ((c * self.group_size + g) * self.height + row) * self.width + col
    }

    #[inline]
    pub fn get(&self, c: usize, g: usize, row: usize, col: usize) -> f64 {
        self.values[self.offset(c, g, row, col)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, g: usize, row: usize, col: usize, v: f64) {
        let o = self.offset(c, g, row, col);
        self.values[o] = v;
    }

    /// The `height * width` plane for one (channel, group slot).
    pub fn plane(&self, c: usize, g: usize) -> &[f64] {
        let start = self.offset(c, g, 0, 0);
        &self.values[start..start + self.height * self.width]
    }

    pub fn plane_mut(&mut self, c: usize, g: usize) -> &mut [f64] {
        let start = self.offset(c, g, 0, 0);
        let len = self.height * self.width;
        &mut self.values[start..start + len]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// All values sorted ascending; handy for checking that an action is a
    /// pure permutation of entries.
    pub fn sorted_values(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

pub fn make_feature_map(
    channels: usize,
    group_size: usize,
    height: usize,
    width: usize,
    fill: f64,
) -> Result<FeatureMap> {
    FeatureMap::new(channels, group_size, height, width, fill)
}

pub fn random_feature_map(
    seed: u64,
    channels: usize,
    group_size: usize,
    height: usize,
    width: usize,
    integer_valued: bool,
) -> Result<FeatureMap> {
    FeatureMap::random(seed, channels, group_size, height, width, integer_valued)
}

/// Largest absolute elementwise difference between two maps of the same shape.
pub fn max_abs_diff(a: &FeatureMap, b: &FeatureMap) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "cannot compare {:?} with {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    out_channels: usize,
    in_channels: usize,
    in_group_size: usize,
    k: usize,
    values: Vec<f64>,
}

impl FilterBank {
    pub fn new(out_channels: usize, in_channels: usize, in_group_size: usize, k: usize, fill: f64) -> Result<Self> {
        check_positive(&[
            ("out_channels", out_channels),
            ("in_channels", in_channels),
            ("in_group_size", in_group_size),
            ("k", k),
        ])?;
        check_group_size(in_group_size)?;
        Ok(Self {
            out_channels,
            in_channels,
            in_group_size,
            k,
            values: vec![fill; out_channels * in_channels * in_group_size * k * k],
        })
    }

    pub fn from_values(
        out_channels: usize,
        in_channels: usize,
        in_group_size: usize,
        k: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let mut fb = Self::new(out_channels, in_channels, in_group_size, k, 0.0)?;
        if values.len() != fb.values.len() {
            return Err(Error::Shape(format!(
                "expected {} filter values, got {}",
                fb.values.len(),
                values.len()
            )));
        }
        fb.values = values;
        Ok(fb)
    }

    pub fn random(
        seed: u64,
        out_channels: usize,
        in_channels: usize,
        in_group_size: usize,
        k: usize,
        integer_valued: bool,
    ) -> Result<Self> {
        let mut fb = Self::new(out_channels, in_channels, in_group_size, k, 0.0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        fb.values = random_values(&mut rng, fb.values.len(), integer_valued);
        Ok(fb)
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn in_group_size(&self) -> usize {
        self.in_group_size
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn offset(&self, o: usize, c: usize, g: usize, row: usize, col: usize) -> usize {
        (((o * self.in_channels + c) * self.in_group_size + g) * self.k + row) * self.k + col
    }

    #[inline]
    pub fn get(&self, o: usize, c: usize, g: usize, row: usize, col: usize) -> f64 {
        self.values[self.offset(o, c, g, row, col)]
    }

    #[inline]
    pub fn set(&mut self, o: usize, c: usize, g: usize, row: usize, col: usize, v: f64) {
        let off = self.offset(o, c, g, row, col);
        self.values[off] = v;
    }

    /// The `k * k` kernel for one (out, in, in_group) triple.
    pub fn kernel(&self, o: usize, c: usize, g: usize) -> &[f64] {
        let start = self.offset(o, c, g, 0, 0);
        &self.values[start..start + self.k * self.k]
    }

    pub(crate) fn kernel_mut(&mut self, o: usize, c: usize, g: usize) -> &mut [f64] {
        let start = self.offset(o, c, g, 0, 0);
        let len = self.k * self.k;
        &mut self.values[start..start + len]
    }
}
