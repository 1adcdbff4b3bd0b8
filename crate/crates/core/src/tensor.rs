//! Named tensor maps.
//!
//! A [`ParameterSet`] keeps its tensors in a `BTreeMap`, so every traversal
//! (flattening, serialization, arithmetic) runs in lexicographic name order no
//! matter how the set was built.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const ENCODER_PREFIX: &str = "encoder.";
pub const HEAD_PREFIX: &str = "head.";

/// Meta keys written by the toy lab and the interpolation routines.
pub mod meta_keys {
    pub const ARCH: &str = "arch";
    pub const SEED: &str = "seed";
    pub const ROLE: &str = "role";
    pub const ALPHA: &str = "alpha";
    pub const ALPHA2: &str = "alpha2";
    pub const ENDPOINTS: &str = "endpoints";
}

/// A dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::invalid(format!(
                "tensor dimensions must be positive, got {shape:?}"
            )));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::invalid(format!(
                "shape {shape:?} needs {numel} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let numel = shape.iter().product();
        Self::new(shape, vec![T::zero(); numel])
    }

    /// Convenience constructor for a rank-1 tensor.
    pub fn vector(data: Vec<T>) -> Result<Self> {
        Self::new(vec![data.len()], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: vec![T::zero(); self.data.len()],
        }
    }

    /// Elementwise combination with a same-shaped tensor.
    pub(crate) fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&a| f(a)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| U::of(v.widen())).collect(),
        }
    }
}

/// Which tensor group an operation touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsetFilter {
    #[default]
    All,
    Encoder,
    Head,
}

impl SubsetFilter {
    pub fn selects(self, name: &str) -> bool {
        match self {
            SubsetFilter::All => true,
            SubsetFilter::Encoder => name.starts_with(ENCODER_PREFIX),
            SubsetFilter::Head => name.starts_with(HEAD_PREFIX),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SubsetFilter::All => "all",
            SubsetFilter::Encoder => "encoder",
            SubsetFilter::Head => "head",
        }
    }
}

impl fmt::Display for SubsetFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SubsetFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(SubsetFilter::All),
            "encoder" => Ok(SubsetFilter::Encoder),
            "head" => Ok(SubsetFilter::Head),
            other => Err(Error::invalid(format!(
                "unknown subset `{other}` (expected all, encoder or head)"
            ))),
        }
    }
}

/// Named tensors plus string metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet<T> {
    tensors: BTreeMap<String, Tensor<T>>,
    meta: BTreeMap<String, String>,
}

impl<T> Default for ParameterSet<T> {
    fn default() -> Self {
        Self {
            tensors: BTreeMap::new(),
            meta: BTreeMap::new(),
        }
    }
}

impl<T: Scalar> ParameterSet<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set from `(name, tensor)` pairs, rejecting empty or repeated names.
    pub fn from_tensors<I, S>(tensors: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Tensor<T>)>,
        S: Into<String>,
    {
        let mut ps = Self::new();
        for (name, t) in tensors {
            ps.insert(name, t)?;
        }
        Ok(ps)
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> Result<()> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::invalid("tensor name must be non-empty"));
        }
        if self.tensors.contains_key(&name) {
            return Err(Error::invalid(format!("duplicate tensor name `{name}`")));
        }
        self.tensors.insert(name, tensor);
        Ok(())
    }

    /// Replaces an existing tensor of the same shape.
    pub fn replace(&mut self, name: &str, tensor: Tensor<T>) -> Result<()> {
        match self.tensors.get_mut(name) {
            Some(slot) if slot.shape == tensor.shape => {
                *slot = tensor;
                Ok(())
            }
            Some(slot) => Err(Error::ShapeMismatch {
                name: name.to_string(),
                left: slot.shape.clone(),
                right: tensor.shape,
            }),
            None => Err(Error::invalid(format!("no tensor named `{name}`"))),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors.get_mut(name)
    }

    /// Looks up a tensor that must exist, with an error naming it otherwise.
    pub fn require(&self, name: &str) -> Result<&Tensor<T>> {
        self.get(name)
            .ok_or_else(|| Error::invalid(format!("missing tensor `{name}`")))
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor<T>> {
        self.tensors.remove(name)
    }

    /// Tensors in lexicographic name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_params(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.meta
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.meta.insert(key.into(), value.into());
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.set_meta(key, value);
        self
    }

    /// Checks that every tensor belongs to the `encoder.` or `head.` group.
    pub fn validate_groups(&self) -> Result<()> {
        match self
            .names()
            .find(|n| !n.starts_with(ENCODER_PREFIX) && !n.starts_with(HEAD_PREFIX))
        {
            Some(bad) => Err(Error::invalid(format!(
                "tensor `{bad}` is outside the `encoder.`/`head.` groups"
            ))),
            None => Ok(()),
        }
    }

    /// Same names and shapes, all values zero; meta is dropped.
    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .map(|(k, t)| (k.clone(), t.zeros_like()))
                .collect(),
            meta: BTreeMap::new(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParameterSet<U> {
        ParameterSet {
            tensors: self
                .tensors
                .iter()
                .map(|(k, t)| (k.clone(), t.cast()))
                .collect(),
            meta: self.meta.clone(),
        }
    }

    /// Global L2 norm over the selected tensors, accumulated in `f64`.
    pub fn l2_norm(&self, filter: SubsetFilter) -> f64 {
        self.iter()
            .filter(|(n, _)| filter.selects(n))
            .flat_map(|(_, t)| t.data.iter())
            .map(|v| {
                let w = v.widen();
                w * w
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Builds a new set by combining matching tensors of two compatible sets.
    ///
    /// Callers must have run [`validate_compatibility`] first. Meta is empty.
    pub(crate) fn zip_with(
        &self,
        other: &Self,
        mut f: impl FnMut(&str, &Tensor<T>, &Tensor<T>) -> Tensor<T>,
    ) -> Self {
        let tensors = self
            .tensors
            .iter()
            .zip(&other.tensors)
            .map(|((name, a), (_, b))| (name.clone(), f(name, a, b)))
            .collect();
        Self {
            tensors,
            meta: BTreeMap::new(),
        }
    }
}

/// Succeeds iff both sets have the same names with the same shapes.
pub fn validate_compatibility<T: Scalar>(a: &ParameterSet<T>, b: &ParameterSet<T>) -> Result<()> {
    let left: BTreeSet<&str> = a.names().collect();
    let right: BTreeSet<&str> = b.names().collect();
    if left != right {
        return Err(Error::MissingNames {
            only_left: left.difference(&right).map(|s| s.to_string()).collect(),
            only_right: right.difference(&left).map(|s| s.to_string()).collect(),
        });
    }
    for (name, ta) in a.iter() {
        let tb = &b.tensors[name];
        if ta.shape != tb.shape {
            return Err(Error::ShapeMismatch {
                name: name.to_string(),
                left: ta.shape.clone(),
                right: tb.shape.clone(),
            });
        }
    }
    Ok(())
}

/// `full` with the tensors selected by `filter` taken from `partial`.
pub fn apply_subset_filter<T: Scalar>(
    full: &ParameterSet<T>,
    partial: &ParameterSet<T>,
    filter: SubsetFilter,
) -> Result<ParameterSet<T>> {
    validate_compatibility(full, partial)?;
    if filter == SubsetFilter::All {
        return Ok(partial.clone());
    }
    let mut out = full.zip_with(partial, |name, f, p| {
        if filter.selects(name) {
            p.clone()
        } else {
            f.clone()
        }
    });
    out.meta = full.meta.clone();
    Ok(out)
}

/// Concatenates the selected tensors' data in name order.
pub fn flatten<T: Scalar>(ps: &ParameterSet<T>, filter: SubsetFilter) -> Vec<T> {
    ps.iter()
        .filter(|(n, _)| filter.selects(n))
        .flat_map(|(_, t)| t.data.iter().copied())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(entries: &[(&str, Vec<usize>, Vec<f32>)]) -> ParameterSet<f32> {
        ParameterSet::from_tensors(
            entries
                .iter()
                .map(|(n, s, d)| (*n, Tensor::new(s.clone(), d.clone()).unwrap())),
        )
        .unwrap()
    }

    #[test]
    fn tensor_rejects_bad_lengths() {
        assert!(Tensor::<f32>::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::<f32>::new(vec![0], vec![]).is_err());
        assert!(Tensor::<f32>::new(vec![2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn duplicate_and_empty_names_rejected() {
        let mut p = ParameterSet::<f32>::new();
        p.insert("a", Tensor::vector(vec![1.0]).unwrap()).unwrap();
        assert!(p.insert("a", Tensor::vector(vec![1.0]).unwrap()).is_err());
        assert!(p.insert("", Tensor::vector(vec![1.0]).unwrap()).is_err());
    }

    #[test]
    fn compatibility_identity() {
        let a = ps(&[("encoder.w", vec![2, 2], vec![0.0; 4])]);
        validate_compatibility(&a, &a).unwrap();
    }

    #[test]
    fn compatibility_shape_mismatch_names_tensor() {
        let a = ps(&[("encoder.w", vec![2, 2], vec![0.0; 4])]);
        let b = ps(&[("encoder.w", vec![2, 3], vec![0.0; 6])]);
        match validate_compatibility(&a, &b) {
            Err(Error::ShapeMismatch { name, left, right }) => {
                assert_eq!(name, "encoder.w");
                assert_eq!(left, vec![2, 2]);
                assert_eq!(right, vec![2, 3]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn compatibility_missing_name_reported() {
        let a = ps(&[
            ("encoder.w", vec![1], vec![0.0]),
            ("head.b", vec![1], vec![0.0]),
        ]);
        let b = ps(&[("encoder.w", vec![1], vec![0.0])]);
        let err = validate_compatibility(&a, &b).unwrap_err();
        match &err {
            Error::MissingNames {
                only_left,
                only_right,
            } => {
                assert_eq!(only_left, &vec!["head.b".to_string()]);
                assert!(only_right.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("head.b"));
    }

    #[test]
    fn subset_filter_modes() {
        let full = ps(&[
            ("encoder.w", vec![1], vec![1.0]),
            ("head.w", vec![1], vec![2.0]),
        ]);
        let partial = ps(&[
            ("encoder.w", vec![1], vec![10.0]),
            ("head.w", vec![1], vec![20.0]),
        ]);
        assert_eq!(
            apply_subset_filter(&full, &partial, SubsetFilter::All).unwrap(),
            partial
        );
        let enc = apply_subset_filter(&full, &partial, SubsetFilter::Encoder).unwrap();
        assert_eq!(enc.get("encoder.w").unwrap().data(), &[10.0]);
        assert_eq!(enc.get("head.w").unwrap().data(), &[2.0]);
        assert_eq!(
            apply_subset_filter(&full, &full, SubsetFilter::Head).unwrap(),
            full
        );
    }

    #[test]
    fn flatten_examples() {
        let p = ps(&[("b", vec![1], vec![3.0]), ("a", vec![2], vec![1.0, 2.0])]);
        assert_eq!(flatten(&p, SubsetFilter::All), vec![1.0, 2.0, 3.0]);
        assert!(flatten(&p, SubsetFilter::Encoder).is_empty());
        let q = ps(&[
            ("encoder.w", vec![1], vec![5.0]),
            ("head.w", vec![1], vec![7.0]),
        ]);
        assert_eq!(flatten(&q, SubsetFilter::Encoder), vec![5.0]);
    }

    #[test]
    fn group_validation() {
        let good = ps(&[
            ("encoder.w", vec![1], vec![0.0]),
            ("head.w", vec![1], vec![0.0]),
        ]);
        good.validate_groups().unwrap();
        let bad = ps(&[("decoder.w", vec![1], vec![0.0])]);
        assert!(bad.validate_groups().is_err());
    }

    #[test]
    fn filter_parses() {
        assert_eq!(
            "encoder".parse::<SubsetFilter>().unwrap(),
            SubsetFilter::Encoder
        );
        assert!("enc".parse::<SubsetFilter>().is_err());
    }
}
