//! Structured verification reports.

use serde::Serialize;

use crate::rational::format_rational;
use crate::scalar::Real;
use crate::Rational;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

/// A point where a check was evaluated, with the offending quantity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub description: String,
    pub point: Vec<f64>,
    pub value: f64,
}

/// `{operation, values, prefactors, tolerance, pass, witnesses}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub operation: String,
    pub values: Vec<NamedValue>,
    /// Exact rational prefactors as `"p/q"`.
    pub prefactors: Vec<String>,
    pub tolerance: f64,
    pub pass: bool,
    pub witnesses: Vec<Witness>,
}

impl Report {
    pub fn new(operation: impl Into<String>, tolerance: f64) -> Self {
        Report { operation: operation.into(), values: Vec::new(), prefactors: Vec::new(), tolerance, pass: true, witnesses: Vec::new() }
    }

    pub fn value(&mut self, name: impl Into<String>, value: impl Real) -> &mut Self {
        self.values.push(NamedValue { name: name.into(), value: value.as_f64() });
        self
    }

    pub fn prefactor(&mut self, r: &Rational) -> &mut Self {
        self.prefactors.push(format_rational(r));
        self
    }

    pub fn witness<T: Real>(&mut self, description: impl Into<String>, point: &[T], value: T) -> &mut Self {
        self.witnesses.push(Witness { description: description.into(), point: crate::scalar::to_f64_vec(point), value: value.as_f64() });
        self
    }

    pub fn fail(&mut self) -> &mut Self {
        self.pass = false;
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|v| v.name == name).map(|v| v.value)
    }
}
