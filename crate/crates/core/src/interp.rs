//! Weight-space arithmetic between checkpoints.
//!
//! Mixing is evaluated in `f64` and rounded once to the storage type, so
//! `lerp_pair` at `alpha = 0` or `1` reproduces the endpoints exactly and the
//! origin of the plane is the reference checkpoint itself.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{
    flatten, meta_keys, validate_compatibility, ParameterSet, SubsetFilter, Tensor, ENCODER_PREFIX,
};

/// `theta_a - theta_ref`, with the same names and shapes as its endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Delta<T> {
    inner: ParameterSet<T>,
}

impl<T: Scalar> Delta<T> {
    /// Wraps an arbitrary tensor map as a direction.
    pub fn from_parameters(ps: ParameterSet<T>) -> Self {
        Self { inner: ps }
    }

    pub fn zeros_like(ps: &ParameterSet<T>) -> Self {
        Self {
            inner: ps.zeros_like(),
        }
    }

    pub fn as_parameters(&self) -> &ParameterSet<T> {
        &self.inner
    }

    pub fn into_parameters(self) -> ParameterSet<T> {
        self.inner
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.inner.get(name)
    }

    pub fn norm(&self, filter: SubsetFilter) -> f64 {
        self.inner.l2_norm(filter)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut inner = self.inner.clone();
        for (_, t) in inner.iter_mut() {
            for v in t.data_mut() {
                *v = T::of(v.widen() * c);
            }
        }
        Self { inner }
    }

    /// Rescales each filter (row of a matrix, or a whole vector) to the norm of
    /// the matching filter in `reference`.
    ///
    /// Off by default everywhere: the two monolingual deltas come out with
    /// near-identical norms, so raw directions are used unless a caller asks.
    pub fn filter_normalized(&self, reference: &ParameterSet<T>) -> Result<Self> {
        validate_compatibility(&self.inner, reference)?;
        let inner = self.inner.zip_with(reference, |_, d, r| {
            let row = if d.shape().len() >= 2 {
                d.shape()[1..].iter().product()
            } else {
                d.numel()
            };
            let mut out = d.clone();
            for (drow, rrow) in out.data_mut().chunks_mut(row).zip(r.data().chunks(row)) {
                let dn = drow.iter().map(|v| v.widen().powi(2)).sum::<f64>().sqrt();
                if dn == 0.0 {
                    continue;
                }
                let rn = rrow.iter().map(|v| v.widen().powi(2)).sum::<f64>().sqrt();
                let c = rn / dn;
                for v in drow.iter_mut() {
                    *v = T::of(v.widen() * c);
                }
            }
            out
        });
        Ok(Self { inner })
    }
}

fn check_alpha(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {v}")))
    }
}

fn endpoint_label<T>(ps: &ParameterSet<T>) -> String
where
    T: Scalar,
{
    let role = ps
        .meta()
        .get(meta_keys::ROLE)
        .map(String::as_str)
        .unwrap_or("?");
    match ps.meta().get(meta_keys::SEED) {
        Some(seed) => format!("{role}@{seed}"),
        None => role.to_string(),
    }
}

/// `alpha * theta1 + (1 - alpha) * theta0` on the selected tensors.
///
/// Unselected tensors are copied from `theta0`. Any finite `alpha` is accepted,
/// including extrapolation outside `[0, 1]`.
pub fn lerp_pair<T: Scalar>(
    theta0: &ParameterSet<T>,
    theta1: &ParameterSet<T>,
    alpha: f64,
    filter: SubsetFilter,
) -> Result<ParameterSet<T>> {
    check_alpha("alpha", alpha)?;
    validate_compatibility(theta0, theta1)?;
    let beta = 1.0 - alpha;
    let mut out = theta0.zip_with(theta1, |name, a, b| {
        if filter.selects(name) {
            a.zip_map(b, |x, y| T::of(alpha * y.widen() + beta * x.widen()))
        } else {
            a.clone()
        }
    });
    out.set_meta(meta_keys::ALPHA, alpha.to_string());
    out.set_meta(
        meta_keys::ENDPOINTS,
        format!("{}->{}", endpoint_label(theta0), endpoint_label(theta1)),
    );
    Ok(out)
}

/// `theta_a - theta_ref` on the selected tensors; zeros elsewhere.
pub fn compute_delta<T: Scalar>(
    theta_a: &ParameterSet<T>,
    theta_ref: &ParameterSet<T>,
    filter: SubsetFilter,
) -> Result<Delta<T>> {
    validate_compatibility(theta_a, theta_ref)?;
    let inner = theta_a.zip_with(theta_ref, |name, a, r| {
        if filter.selects(name) {
            a.zip_map(r, |x, y| T::of(x.widen() - y.widen()))
        } else {
            a.zeros_like()
        }
    });
    Ok(Delta { inner })
}

/// `theta_ref + alpha1 * d_src + alpha2 * d_tgt`.
pub fn plane_point<T: Scalar>(
    theta_ref: &ParameterSet<T>,
    d_src: &Delta<T>,
    d_tgt: &Delta<T>,
    alpha1: f64,
    alpha2: f64,
) -> Result<ParameterSet<T>> {
    check_alpha("alpha1", alpha1)?;
    check_alpha("alpha2", alpha2)?;
    validate_compatibility(theta_ref, &d_src.inner)?;
    validate_compatibility(theta_ref, &d_tgt.inner)?;
    let mut out = theta_ref.zip_with(&d_src.inner, |name, r, ds| {
        let dt = d_tgt.inner.get(name).expect("validated above");
        let mut t = r.clone();
        for ((v, s), g) in t.data_mut().iter_mut().zip(ds.data()).zip(dt.data()) {
            *v = T::of(v.widen() + alpha1 * s.widen() + alpha2 * g.widen());
        }
        t
    });
    out.set_meta(meta_keys::ALPHA, alpha1.to_string());
    out.set_meta(meta_keys::ALPHA2, alpha2.to_string());
    out.set_meta(meta_keys::ENDPOINTS, endpoint_label(theta_ref));
    Ok(out)
}

/// Norms and angle of two deltas over the selected tensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectionDiagnostics {
    pub norm_a: f64,
    pub norm_b: f64,
    pub norm_ratio: f64,
    pub angle_deg: f64,
}

pub fn direction_diagnostics<T: Scalar>(
    d_src: &Delta<T>,
    d_tgt: &Delta<T>,
    filter: SubsetFilter,
) -> Result<DirectionDiagnostics> {
    validate_compatibility(&d_src.inner, &d_tgt.inner)?;
    let a = flatten(&d_src.inner, filter);
    let b = flatten(&d_tgt.inner, filter);
    let (mut dot, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(&b) {
        let (x, y) = (x.widen(), y.widen());
        dot += x * y;
        aa += x * x;
        bb += y * y;
    }
    let (norm_a, norm_b) = (aa.sqrt(), bb.sqrt());
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(Error::DegenerateDirection(format!(
            "zero-norm delta under filter `{filter}` (norms {norm_a}, {norm_b})"
        )));
    }
    let cos = (dot / (aa * bb).sqrt()).clamp(-1.0, 1.0);
    Ok(DirectionDiagnostics {
        norm_a,
        norm_b,
        norm_ratio: norm_a / norm_b,
        angle_deg: cos.acos().to_degrees(),
    })
}

/// `C + B - A` on encoder tensors, with C's head reused as is.
pub fn model_analogy<T: Scalar>(
    theta_c: &ParameterSet<T>,
    theta_b: &ParameterSet<T>,
    theta_a: &ParameterSet<T>,
) -> Result<ParameterSet<T>> {
    validate_compatibility(theta_c, theta_b)?;
    validate_compatibility(theta_c, theta_a)?;
    validate_compatibility(theta_b, theta_a)?;
    let mut out = theta_c.zip_with(theta_b, |name, c, b| {
        if name.starts_with(ENCODER_PREFIX) {
            let a = theta_a.get(name).expect("validated above");
            let mut t = c.clone();
            for ((v, bv), av) in t.data_mut().iter_mut().zip(b.data()).zip(a.data()) {
                *v = T::of(v.widen() + (bv.widen() - av.widen()));
            }
            t
        } else {
            c.clone()
        }
    });
    *out.meta_mut() = theta_c.meta().clone();
    out.set_meta(
        meta_keys::ENDPOINTS,
        format!(
            "{}+{}-{}",
            endpoint_label(theta_c),
            endpoint_label(theta_b),
            endpoint_label(theta_a)
        ),
    );
    Ok(out)
}
