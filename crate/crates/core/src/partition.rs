//! Dyadic region algebra over `[0, 1)^p` and the two-group datasets that live on it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DmmtError, Result};

/// Maximum number of cuts along a single dimension.
pub const MAX_DIM_DEPTH: usize = 63;

const QUANT_SCALE: f64 = (1u64 << 63) as f64;
const RESCALE_SLACK: f64 = 1e-9;

/// Left/right address of a dyadic interval along one dimension: the low
/// `len` bits of `bits` are the successive cut choices, most significant first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct DimCode {
    bits: u64,
    len: u8,
}

/// Canonical identifier of a region reachable by dimensionwise dyadic cuts.
///
/// Two cut sequences that produce the same hyperrectangle produce the same key,
/// whatever order the dimensions were cut in.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionKey {
    codes: Box<[DimCode]>,
}

/// Half-open interval `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn intersects_open(&self, lo: f64, hi: f64) -> bool {
        self.lo < hi && lo < self.hi
    }
}

impl RegionKey {
    /// The whole space `[0, 1)^dims`.
    pub fn root(dims: usize) -> Result<Self> {
        if dims == 0 {
            return Err(DmmtError::ZeroDimensions);
        }
        Ok(RegionKey {
            codes: vec![DimCode::default(); dims].into_boxed_slice(),
        })
    }

    pub fn dims(&self) -> usize {
        self.codes.len()
    }

    /// Total number of cuts, summed over dimensions.
    pub fn level(&self) -> usize {
        self.codes.iter().map(|c| c.len as usize).sum()
    }

    /// Number of cuts made along dimension `j`.
    pub fn depth_in(&self, j: usize) -> usize {
        self.codes[j].len as usize
    }

    /// Cut choices along dimension `j` as a `0`/`1` string.
    pub fn bit_string(&self, j: usize) -> String {
        let c = self.codes[j];
        (0..c.len)
            .map(|i| {
                if (c.bits >> (c.len - 1 - i)) & 1 == 1 {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }

    /// Build a key from one bit string per dimension.
    pub fn from_bit_strings<S: AsRef<str>>(strings: &[S]) -> Result<Self> {
        if strings.is_empty() {
            return Err(DmmtError::ZeroDimensions);
        }
        let mut codes = Vec::with_capacity(strings.len());
        for s in strings {
            let s = s.as_ref();
            if s.len() > MAX_DIM_DEPTH {
                return Err(DmmtError::KeyTooDeep { max: MAX_DIM_DEPTH });
            }
            let mut bits = 0u64;
            for ch in s.chars() {
                bits = match ch {
                    '0' => bits << 1,
                    '1' => (bits << 1) | 1,
                    _ => return Err(DmmtError::InvalidKey(s.to_string())),
                };
            }
            codes.push(DimCode {
                bits,
                len: s.len() as u8,
            });
        }
        Ok(RegionKey {
            codes: codes.into_boxed_slice(),
        })
    }

    fn check_dim(&self, j: usize) -> Result<()> {
        if j >= self.dims() {
            return Err(DmmtError::DimensionOutOfRange {
                index: j,
                dims: self.dims(),
            });
        }
        Ok(())
    }

    fn child(&self, j: usize, right: bool) -> RegionKey {
        let mut codes = self.codes.clone();
        let c = &mut codes[j];
        c.bits = (c.bits << 1) | right as u64;
        c.len += 1;
        RegionKey { codes }
    }

    /// Left and right halves of the region cut at the midpoint of dimension `j`
    /// (0-based).
    pub fn split(&self, j: usize) -> Result<(RegionKey, RegionKey)> {
        self.check_dim(j)?;
        if self.depth_in(j) >= MAX_DIM_DEPTH {
            return Err(DmmtError::KeyTooDeep { max: MAX_DIM_DEPTH });
        }
        Ok((self.child(j, false), self.child(j, true)))
    }

    /// The enclosing region one cut up, with the dimension that was cut.
    /// `None` at the root; a region generally has several parents, this picks
    /// the lowest-indexed cut dimension.
    pub fn parent(&self) -> Option<(RegionKey, usize)> {
        let j = self.codes.iter().position(|c| c.len > 0)?;
        let mut codes = self.codes.clone();
        codes[j].bits >>= 1;
        codes[j].len -= 1;
        Some((RegionKey { codes }, j))
    }

    pub fn interval(&self, j: usize) -> Interval {
        let c = self.codes[j];
        let width = (-(c.len as f64)).exp2();
        let lo = c.bits as f64 * width;
        Interval { lo, hi: lo + width }
    }

    pub fn bounds(&self) -> Vec<Interval> {
        (0..self.dims()).map(|j| self.interval(j)).collect()
    }

    /// Mass of the region under the uniform baseline, `2^-level`.
    pub fn baseline_volume(&self) -> f64 {
        (-(self.level() as f64)).exp2()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dims()
            && point.iter().enumerate().all(|(j, &x)| {
                let iv = self.interval(j);
                iv.lo <= x && x < iv.hi
            })
    }

    /// Membership test on quantized coordinates (see [`quantize`]).
    #[inline]
    pub(crate) fn contains_quantized(&self, q: &[u64]) -> bool {
        self.codes
            .iter()
            .zip(q)
            .all(|(c, &x)| c.len == 0 || (x >> (63 - c.len as u32)) == c.bits)
    }

    /// True when a point with quantized coordinate `x` along `j` falls in the
    /// right half of this region's `j`-interval.
    #[inline]
    pub(crate) fn goes_right(&self, j: usize, x: u64) -> bool {
        let depth = self.codes[j].len as u32;
        (x >> (62 - depth)) & 1 == 1
    }
}

impl fmt::Display for RegionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.dims() {
            if j > 0 {
                f.write_str(";")?;
            }
            if self.codes[j].len == 0 {
                f.write_str("-")?;
            } else {
                f.write_str(&self.bit_string(j))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for RegionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RegionKey({self})")
    }
}

impl FromStr for RegionKey {
    type Err = DmmtError;

    fn from_str(s: &str) -> Result<Self> {
        if s.split(';').any(str::is_empty) {
            return Err(DmmtError::InvalidKey(s.to_string()));
        }
        let parts: Vec<&str> = s
            .split(';')
            .map(|p| if p == "-" { "" } else { p })
            .collect();
        RegionKey::from_bit_strings(&parts).map_err(|_| DmmtError::InvalidKey(s.to_string()))
    }
}

impl Serialize for RegionKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Map a coordinate in `[0, 1)` to its 63-bit dyadic expansion.
#[inline]
pub(crate) fn quantize(x: f64) -> u64 {
    (x * QUANT_SCALE) as u64
}

/// Per-dimension affine map that sent the raw coordinates into `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rescaling {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Rescaling {
    fn scale(&self, j: usize) -> f64 {
        (self.max[j] - self.min[j]) * (1.0 + RESCALE_SLACK)
    }

    pub fn to_unit(&self, j: usize, raw: f64) -> f64 {
        (raw - self.min[j]) / self.scale(j)
    }

    pub fn to_raw(&self, j: usize, unit: f64) -> f64 {
        self.min[j] + unit * self.scale(j)
    }
}

/// Two groups of points in `[0, 1)^dims`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dims: usize,
    group1: Vec<f64>,
    group2: Vec<f64>,
    provenance: Option<Rescaling>,
}

impl Dataset {
    /// Build from flattened row-major coordinates already in `[0, 1)`.
    /// Either group may be empty.
    pub fn new(dims: usize, group1: Vec<f64>, group2: Vec<f64>) -> Result<Self> {
        if dims == 0 {
            return Err(DmmtError::ZeroDimensions);
        }
        for (g, coords) in [&group1, &group2].into_iter().enumerate() {
            if coords.len() % dims != 0 {
                return Err(DmmtError::DimensionMismatch {
                    expected: dims,
                    found: coords.len() % dims,
                });
            }
            for (i, &x) in coords.iter().enumerate() {
                if !x.is_finite() {
                    return Err(DmmtError::NonFinite {
                        group: g + 1,
                        index: i / dims,
                    });
                }
                if !(0.0..1.0).contains(&x) {
                    return Err(DmmtError::OutOfUnitCube {
                        group: g + 1,
                        index: i / dims,
                        value: x,
                    });
                }
            }
        }
        Ok(Dataset {
            dims,
            group1,
            group2,
            provenance: None,
        })
    }

    pub fn from_rows(dims: usize, group1: &[Vec<f64>], group2: &[Vec<f64>]) -> Result<Self> {
        Dataset::new(dims, flatten(dims, group1)?, flatten(dims, group2)?)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn n1(&self) -> usize {
        self.group1.len() / self.dims
    }

    pub fn n2(&self) -> usize {
        self.group2.len() / self.dims
    }

    pub fn len(&self) -> usize {
        self.n1() + self.n2()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn provenance(&self) -> Option<&Rescaling> {
        self.provenance.as_ref()
    }

    /// Coordinates of group `group` (1 or 2), flattened row-major.
    pub fn coords(&self, group: usize) -> &[f64] {
        match group {
            1 => &self.group1,
            2 => &self.group2,
            _ => panic!("group must be 1 or 2"),
        }
    }

    pub fn point(&self, group: usize, index: usize) -> &[f64] {
        let c = self.coords(group);
        &c[index * self.dims..(index + 1) * self.dims]
    }

    /// Exchange the two groups.
    pub fn swapped(&self) -> Dataset {
        Dataset {
            dims: self.dims,
            group1: self.group2.clone(),
            group2: self.group1.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Number of points of each group inside `key`.
    pub fn counts_in(&self, key: &RegionKey) -> (usize, usize) {
        let count = |g: usize| {
            self.coords(g)
                .chunks_exact(self.dims)
                .filter(|p| key.contains(p))
                .count()
        };
        (count(1), count(2))
    }

    /// Split the indexed points of `group` lying in `key` by the midpoint cut
    /// along dimension `j`. A point exactly on the midpoint goes right.
    pub fn partition_points(
        &self,
        group: usize,
        indices: &[usize],
        key: &RegionKey,
        j: usize,
    ) -> Result<(Vec<usize>, Vec<usize>)> {
        if key.dims() != self.dims {
            return Err(DmmtError::DimensionMismatch {
                expected: self.dims,
                found: key.dims(),
            });
        }
        key.check_dim(j)?;
        if key.depth_in(j) >= MAX_DIM_DEPTH {
            return Err(DmmtError::KeyTooDeep { max: MAX_DIM_DEPTH });
        }
        let mid = {
            let iv = key.interval(j);
            0.5 * (iv.lo + iv.hi)
        };
        let mut left = Vec::new();
        let mut right = Vec::new();
        for &i in indices {
            let p = self.point(group, i);
            if !key.contains(p) {
                return Err(DmmtError::PointOutsideRegion {
                    group,
                    index: i,
                    key: key.to_string(),
                });
            }
            if p[j] < mid {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        Ok((left, right))
    }
}

fn flatten(dims: usize, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(rows.len() * dims);
    for r in rows {
        if r.len() != dims {
            return Err(DmmtError::DimensionMismatch {
                expected: dims,
                found: r.len(),
            });
        }
        out.extend_from_slice(r);
    }
    Ok(out)
}

/// Affinely map both raw groups into `[0, 1)^p` using the pooled per-dimension
/// range: `x -> (x - min) / ((max - min) * (1 + 1e-9))`.
pub fn rescale(raw_group1: &[Vec<f64>], raw_group2: &[Vec<f64>]) -> Result<Dataset> {
    let dims = raw_group1
        .first()
        .or_else(|| raw_group2.first())
        .map(Vec::len)
        .ok_or(DmmtError::EmptyData)?;
    if dims == 0 {
        return Err(DmmtError::ZeroDimensions);
    }
    let mut min = vec![f64::INFINITY; dims];
    let mut max = vec![f64::NEG_INFINITY; dims];
    for (g, rows) in [raw_group1, raw_group2].into_iter().enumerate() {
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dims {
                return Err(DmmtError::DimensionMismatch {
                    expected: dims,
                    found: r.len(),
                });
            }
            for (j, &x) in r.iter().enumerate() {
                if !x.is_finite() {
                    return Err(DmmtError::NonFinite {
                        group: g + 1,
                        index: i,
                    });
                }
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
    }
    if let Some(j) = (0..dims).find(|&j| max[j] <= min[j]) {
        return Err(DmmtError::ConstantDimension(j));
    }
    let scaling = Rescaling { min, max };
    let map = |rows: &[Vec<f64>]| -> Vec<f64> {
        rows.iter()
            .flat_map(|r| {
                r.iter()
                    .enumerate()
                    .map(|(j, &x)| scaling.to_unit(j, x).clamp(0.0, 1.0 - f64::EPSILON))
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    let mut data = Dataset::new(dims, map(raw_group1), map(raw_group2))?;
    data.provenance = Some(scaling);
    Ok(data)
}
