use serde::{Deserialize, Serialize};

use super::VariationalError;
use crate::discretization::{AssembledForms, GridFunction, Terms};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientReport {
    pub p: f64,
    pub lambda: f64,
    pub value: f64,
    pub terms: Terms,
    pub u_descriptor: String,
}

/// `(grad − λ·mass)/hardy` for `u`.
pub fn chi(u: &GridFunction, forms: &AssembledForms) -> Result<QuotientReport, VariationalError> {
    chi_described(u, forms, "grid function")
}

pub fn chi_described(
    u: &GridFunction,
    forms: &AssembledForms,
    descriptor: impl Into<String>,
) -> Result<QuotientReport, VariationalError> {
    let terms = forms.norms(u)?;
    if !(terms.hardy > 0.0) || !terms.hardy.is_finite() {
        return Err(VariationalError::ZeroDenominator(terms.hardy));
    }
    let lambda = forms.lambda();
    Ok(QuotientReport {
        p: forms.p(),
        lambda,
        value: (terms.grad - lambda * terms.mass) / terms.hardy,
        terms,
        u_descriptor: descriptor.into(),
    })
}
