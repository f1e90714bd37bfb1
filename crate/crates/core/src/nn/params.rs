//! Named, ordered views over every trainable tensor of a model.
//!
//! The visiting order defines the canonical parameter list used by the
//! optimizer, the gradient checker and the checkpoint format.

use super::tensor::{Matrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamRole {
    Weight,
    Bias,
}

#[derive(Debug)]
pub struct ParamView<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub role: ParamRole,
    pub values: &'a [f64],
}

#[derive(Debug)]
pub struct ParamViewMut<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub role: ParamRole,
    pub values: &'a mut [f64],
}

impl<'a> ParamView<'a> {
    pub fn matrix(name: String, m: &'a Matrix, role: ParamRole) -> Self {
        ParamView {
            name,
            rows: m.rows(),
            cols: m.cols(),
            role,
            values: m.as_slice(),
        }
    }

    pub fn vector(name: String, v: &'a Vector, role: ParamRole) -> Self {
        ParamView {
            name,
            rows: v.len(),
            cols: 1,
            role,
            values: v,
        }
    }
}

impl<'a> ParamViewMut<'a> {
    pub fn matrix(name: String, m: &'a mut Matrix, role: ParamRole) -> Self {
        ParamViewMut {
            name,
            rows: m.rows(),
            cols: m.cols(),
            role,
            values: m.as_mut_slice(),
        }
    }

    pub fn vector(name: String, v: &'a mut Vector, role: ParamRole) -> Self {
        ParamViewMut {
            name,
            rows: v.len(),
            cols: 1,
            role,
            values: v,
        }
    }
}

pub trait Parameters {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<ParamView<'a>>);
    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamViewMut<'a>>);

    fn params(&self) -> Vec<ParamView<'_>> {
        let mut out = Vec::new();
        self.visit("", &mut out);
        for p in &mut out {
            trim_leading_dot(&mut p.name);
        }
        out
    }

    fn params_mut(&mut self) -> Vec<ParamViewMut<'_>> {
        let mut out = Vec::new();
        self.visit_mut("", &mut out);
        for p in &mut out {
            trim_leading_dot(&mut p.name);
        }
        out
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.values.len()).sum()
    }

    /// A copy with every parameter set to zero, used as a gradient buffer.
    fn zeros_like(&self) -> Self
    where
        Self: Clone + Sized,
    {
        let mut z = self.clone();
        for p in z.params_mut() {
            p.values.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.values.iter().all(|v| v.is_finite()))
    }
}

fn trim_leading_dot(name: &mut String) {
    if name.starts_with('.') {
        name.remove(0);
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    format!("{prefix}.{name}")
}
