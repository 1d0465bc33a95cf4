use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::Real;

/// Named, position-indexed parameter vector θ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterVector<S> {
    names: Vec<String>,
    values: Vec<S>,
}

impl<S: Real> ParameterVector<S> {
    /// Names must be unique and values finite. Positivity is enforced where a
    /// rate law or a log-rescaling needs it, not here.
    pub fn new<N: Into<String>>(names: impl IntoIterator<Item = N>, values: Vec<S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() != values.len() {
            return Err(Error::Argument(format!(
                "{} parameter names for {} values",
                names.len(),
                values.len()
            )));
        }
        let mut seen = HashSet::new();
        for (n, v) in names.iter().zip(&values) {
            if !seen.insert(n.as_str()) {
                return Err(Error::Argument(format!("duplicate parameter name `{n}`")));
            }
            if !v.is_finite() {
                return Err(Error::Parameter {
                    name: n.clone(),
                    value: v.as_f64(),
                    reason: "not finite",
                });
            }
        }
        Ok(Self { names, values })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[S] {
        &self.values
    }

    #[inline]
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn set(&mut self, index: usize, value: S) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::Parameter {
                name: self.names[index].clone(),
                value: value.as_f64(),
                reason: "not finite",
            });
        }
        self.values[index] = value;
        Ok(())
    }

    /// Copy of θ with `θ_k` shifted by `delta`.
    pub fn perturbed(&self, k: usize, delta: S) -> Vec<S> {
        let mut v = self.values.clone();
        v[k] += delta;
        v
    }
}
