//! Chain-structured mixed-variable search spaces.
//!
//! Every hyperparameter is carried as an integer code. Categorical choices are
//! encoded as consecutive integers and treated ordinally when distances are
//! taken (the surrogate works on [`normalize`]d codes).

use std::ops::Range;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    IntegerRange,
    Categorical,
}

/// A single hyperparameter with an inclusive integer code range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparameterSpec {
    pub name: String,
    pub kind: ParamKind,
    pub lo: i64,
    pub hi: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl HyperparameterSpec {
    pub fn integer(name: impl Into<String>, lo: i64, hi: i64) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            kind: ParamKind::IntegerRange,
            lo,
            hi,
            labels: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Categorical parameter coded `0..labels.len()`.
    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        labels: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidLayout(
                "categorical parameter without labels".into(),
            ));
        }
        let spec = Self {
            name: name.into(),
            kind: ParamKind::Categorical,
            lo: 0,
            hi: labels.len() as i64 - 1,
            labels: Some(labels),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo > self.hi {
            return Err(Error::InvalidLayout(format!(
                "`{}`: lo {} > hi {}",
                self.name, self.lo, self.hi
            )));
        }
        if self.kind == ParamKind::Categorical {
            let expected = (self.hi - self.lo + 1) as usize;
            match &self.labels {
                Some(labels) if labels.len() == expected => {}
                Some(labels) => {
                    return Err(Error::InvalidLayout(format!(
                        "`{}`: {} labels for {} codes",
                        self.name,
                        labels.len(),
                        expected
                    )))
                }
                None => {
                    return Err(Error::InvalidLayout(format!(
                        "`{}`: categorical parameter without labels",
                        self.name
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, code: i64) -> bool {
        (self.lo..=self.hi).contains(&code)
    }

    /// Number of distinct codes.
    pub fn cardinality(&self) -> u64 {
        (self.hi - self.lo) as u64 + 1
    }

    pub fn label(&self, code: i64) -> Option<&str> {
        let labels = self.labels.as_ref()?;
        labels.get((code - self.lo) as usize).map(String::as_str)
    }

    pub fn normalize(&self, code: i64) -> f64 {
        if self.hi == self.lo {
            0.0
        } else {
            (code - self.lo) as f64 / (self.hi - self.lo) as f64
        }
    }

    pub fn denormalize(&self, t: f64) -> i64 {
        self.repair_real(self.lo as f64 + t * (self.hi - self.lo) as f64)
    }

    /// Round half away from zero, then clamp into `[lo, hi]`.
    pub fn repair_real(&self, gene: f64) -> i64 {
        if gene.is_nan() {
            return self.lo;
        }
        let rounded = gene.round();
        if rounded <= self.lo as f64 {
            self.lo
        } else if rounded >= self.hi as f64 {
            self.hi
        } else {
            rounded as i64
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        rng.gen_range(self.lo..=self.hi)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayoutDoc {
    blocks: Vec<Vec<HyperparameterSpec>>,
}

/// Ordered blocks of hyperparameters. Global dimension indices run over the
/// concatenation of all blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayoutDoc", into = "LayoutDoc")]
pub struct SpaceLayout {
    blocks: Vec<Vec<HyperparameterSpec>>,
    offsets: Vec<usize>,
}

impl TryFrom<LayoutDoc> for SpaceLayout {
    type Error = Error;

    fn try_from(doc: LayoutDoc) -> Result<Self> {
        Self::new(doc.blocks)
    }
}

impl From<SpaceLayout> for LayoutDoc {
    fn from(layout: SpaceLayout) -> Self {
        LayoutDoc {
            blocks: layout.blocks,
        }
    }
}

impl SpaceLayout {
    pub fn new(blocks: Vec<Vec<HyperparameterSpec>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidLayout("layout has no blocks".into()));
        }
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        offsets.push(0);
        for (i, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidLayout(format!("block {i} is empty")));
            }
            for spec in block {
                spec.validate()?;
            }
            offsets.push(offsets[i] + block.len());
        }
        Ok(Self { blocks, offsets })
    }

    /// `n_blocks` copies of the same block.
    pub fn uniform(n_blocks: usize, block: Vec<HyperparameterSpec>) -> Result<Self> {
        Self::new(vec![block; n_blocks])
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serializes")
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_dims(&self) -> usize {
        self.offsets[self.blocks.len()]
    }

    pub fn blocks(&self) -> &[Vec<HyperparameterSpec>] {
        &self.blocks
    }

    pub fn block_len(&self, block: usize) -> usize {
        self.blocks[block].len()
    }

    pub fn dims_per_block(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// Global dimension indices of `block`.
    pub fn block_dims(&self, block: usize) -> Range<usize> {
        self.offsets[block]..self.offsets[block + 1]
    }

    /// Global dimension indices of the inclusive block range `[first, last]`.
    pub fn block_range_dims(&self, first: usize, last: usize) -> Range<usize> {
        self.offsets[first]..self.offsets[last + 1]
    }

    pub fn block_of(&self, dim: usize) -> Option<usize> {
        if dim >= self.total_dims() {
            return None;
        }
        // offsets is sorted; the block is the last offset <= dim
        Some(self.offsets.partition_point(|&o| o <= dim) - 1)
    }

    pub fn spec(&self, dim: usize) -> Option<&HyperparameterSpec> {
        let block = self.block_of(dim)?;
        self.blocks[block].get(dim - self.offsets[block])
    }

    fn spec_checked(&self, dim: usize) -> Result<&HyperparameterSpec> {
        self.spec(dim).ok_or_else(|| {
            Error::InvalidSubVector(format!(
                "dimension {dim} out of range (total {})",
                self.total_dims()
            ))
        })
    }

    pub fn all_dims(&self) -> Vec<usize> {
        (0..self.total_dims()).collect()
    }

    pub fn random_solution<R: Rng + ?Sized>(&self, rng: &mut R) -> SolutionVector {
        let codes = (0..self.total_dims())
            .map(|d| self.spec(d).expect("in range").sample(rng))
            .collect();
        SolutionVector(codes)
    }

    /// Size of the full code space, saturating at `u64::MAX`.
    pub fn cardinality(&self, dims: &[usize]) -> u64 {
        dims.iter()
            .filter_map(|&d| self.spec(d))
            .fold(1u64, |acc, s| acc.saturating_mul(s.cardinality()))
    }
}

/// A complete assignment of codes, one per global dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SolutionVector(pub Vec<i64>);

impl SolutionVector {
    pub fn codes(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, layout: &SpaceLayout) -> Result<()> {
        if self.0.len() != layout.total_dims() {
            return Err(Error::DimensionMismatch {
                expected: layout.total_dims(),
                got: self.0.len(),
            });
        }
        for (d, &code) in self.0.iter().enumerate() {
            let spec = layout.spec_checked(d)?;
            if !spec.contains(code) {
                return Err(Error::InvalidSubVector(format!(
                    "code {code} outside [{}, {}] at dimension {d}",
                    spec.lo, spec.hi
                )));
            }
        }
        Ok(())
    }

    /// Extract the codes at `dims`.
    pub fn project(&self, dims: &[usize]) -> SubVector {
        SubVector {
            dims: dims.to_vec(),
            codes: dims.iter().map(|&d| self.0[d]).collect(),
        }
    }

    /// Overwrite the positions covered by `sub`.
    pub fn splice(&mut self, sub: &SubVector) {
        for (&d, &c) in sub.dims.iter().zip(&sub.codes) {
            self.0[d] = c;
        }
    }

    pub fn with_spliced(&self, sub: &SubVector) -> Self {
        let mut out = self.clone();
        out.splice(sub);
        out
    }
}

/// Codes over a sorted subset of global dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubVector {
    pub dims: Vec<usize>,
    pub codes: Vec<i64>,
}

impl SubVector {
    pub fn new(dims: Vec<usize>, codes: Vec<i64>) -> Result<Self> {
        if dims.len() != codes.len() {
            return Err(Error::DimensionMismatch {
                expected: dims.len(),
                got: codes.len(),
            });
        }
        if dims.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSubVector(
                "dimension indices must be strictly increasing".into(),
            ));
        }
        Ok(Self { dims, codes })
    }

    pub fn empty() -> Self {
        Self {
            dims: Vec::new(),
            codes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn validate(&self, layout: &SpaceLayout) -> Result<()> {
        if self.dims.len() != self.codes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                got: self.codes.len(),
            });
        }
        if self.dims.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSubVector(
                "dimension indices must be strictly increasing".into(),
            ));
        }
        for (&d, &code) in self.dims.iter().zip(&self.codes) {
            let spec = layout.spec_checked(d)?;
            if !spec.contains(code) {
                return Err(Error::InvalidSubVector(format!(
                    "code {code} outside [{}, {}] at dimension {d}",
                    spec.lo, spec.hi
                )));
            }
        }
        Ok(())
    }

    /// Code at global dimension `dim`, if covered.
    pub fn get(&self, dim: usize) -> Option<i64> {
        self.dims.binary_search(&dim).ok().map(|i| self.codes[i])
    }
}

/// Map codes to `[0, 1]` per dimension; degenerate ranges map to 0.
pub fn normalize(sub: &SubVector, layout: &SpaceLayout) -> Result<Vec<f64>> {
    if sub.dims.len() != sub.codes.len() {
        return Err(Error::DimensionMismatch {
            expected: sub.dims.len(),
            got: sub.codes.len(),
        });
    }
    sub.dims
        .iter()
        .zip(&sub.codes)
        .map(|(&d, &c)| Ok(layout.spec_checked(d)?.normalize(c)))
        .collect()
}

/// Inverse of [`normalize`] up to rounding: `round(lo + t (hi - lo))`, clamped.
pub fn denormalize(dims: &[usize], point: &[f64], layout: &SpaceLayout) -> Result<SubVector> {
    if dims.len() != point.len() {
        return Err(Error::DimensionMismatch {
            expected: dims.len(),
            got: point.len(),
        });
    }
    let codes = dims
        .iter()
        .zip(point)
        .map(|(&d, &t)| Ok(layout.spec_checked(d)?.denormalize(t)))
        .collect::<Result<Vec<_>>>()?;
    SubVector::new(dims.to_vec(), codes)
}

/// Uniform sample over the code ranges of `dims`.
pub fn random_sample<R: Rng + ?Sized>(
    dims: &[usize],
    layout: &SpaceLayout,
    rng: &mut R,
) -> Result<SubVector> {
    let codes = dims
        .iter()
        .map(|&d| Ok(layout.spec_checked(d)?.sample(rng)))
        .collect::<Result<Vec<_>>>()?;
    SubVector::new(dims.to_vec(), codes)
}

/// Clamp integer codes into range.
pub fn repair(sub: &SubVector, layout: &SpaceLayout) -> SubVector {
    let codes = sub
        .dims
        .iter()
        .zip(&sub.codes)
        .map(|(&d, &c)| match layout.spec(d) {
            Some(spec) => c.clamp(spec.lo, spec.hi),
            None => c,
        })
        .collect();
    SubVector {
        dims: sub.dims.clone(),
        codes,
    }
}

/// Round (half away from zero) and clamp real-valued genes into codes.
pub fn repair_genes(dims: &[usize], genes: &[f64], layout: &SpaceLayout) -> Result<SubVector> {
    if dims.len() != genes.len() {
        return Err(Error::DimensionMismatch {
            expected: dims.len(),
            got: genes.len(),
        });
    }
    let codes = dims
        .iter()
        .zip(genes)
        .map(|(&d, &g)| Ok(layout.spec_checked(d)?.repair_real(g)))
        .collect::<Result<Vec<_>>>()?;
    SubVector::new(dims.to_vec(), codes)
}
