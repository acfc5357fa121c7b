//! Parameter spaces and their sampling rules.

use serde::{Deserialize, Serialize};

use super::rng::RngStream;
use super::GenError;
use crate::twin::ParamAssignment;
use crate::units::Dimension;

/// Redraws allowed for one truncated-normal value before giving up.
pub const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum DistForm {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
    Normal { mu: f64, sigma: f64, lo: f64, hi: f64 },
    Choice { values: Vec<f64>, weights: Option<Vec<f64>> },
}

/// A distribution over canonical values of a single dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub dimension: Dimension,
    #[serde(flatten)]
    pub form: DistForm,
}

impl DistributionSpec {
    pub fn constant(dimension: Dimension, value: f64) -> Self {
        DistributionSpec { dimension, form: DistForm::Constant { value } }
    }

    pub fn uniform(dimension: Dimension, lo: f64, hi: f64) -> Self {
        DistributionSpec { dimension, form: DistForm::Uniform { lo, hi } }
    }

    pub fn normal(dimension: Dimension, mu: f64, sigma: f64, lo: f64, hi: f64) -> Self {
        DistributionSpec { dimension, form: DistForm::Normal { mu, sigma, lo, hi } }
    }

    pub fn choice(dimension: Dimension, values: Vec<f64>, weights: Option<Vec<f64>>) -> Self {
        DistributionSpec { dimension, form: DistForm::Choice { values, weights } }
    }

    /// Returns a description of the first violated constraint, if any.
    pub fn check(&self) -> Result<(), String> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match &self.form {
            DistForm::Constant { value } if !value.is_finite() => Err("constant must be finite".into()),
            DistForm::Constant { .. } => Ok(()),
            DistForm::Uniform { lo, hi } => {
                if !finite(&[*lo, *hi]) {
                    Err("uniform bounds must be finite".into())
                } else if lo >= hi {
                    Err(format!("uniform requires lo < hi, got ({lo}, {hi})"))
                } else {
                    Ok(())
                }
            }
            DistForm::Normal { mu, sigma, lo, hi } => {
                if !finite(&[*mu, *sigma, *lo, *hi]) {
                    Err("normal arguments must be finite".into())
                } else if *sigma <= 0.0 {
                    Err(format!("normal requires sigma > 0, got {sigma}"))
                } else if lo >= hi {
                    Err(format!("normal requires lo < hi, got ({lo}, {hi})"))
                } else {
                    Ok(())
                }
            }
            DistForm::Choice { values, weights } => {
                if values.is_empty() {
                    return Err("choice needs at least one value".into());
                }
                if !finite(values) {
                    return Err("choice values must be finite".into());
                }
                if let Some(w) = weights {
                    if w.len() != values.len() {
                        return Err(format!(
                            "choice has {} values but {} weights",
                            values.len(),
                            w.len()
                        ));
                    }
                    if w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                        return Err("choice weights must be positive".into());
                    }
                }
                Ok(())
            }
        }
    }

    /// Draws one canonical value. Constants consume no randomness; uniform
    /// and choice consume one draw; each normal attempt consumes two.
    pub fn sample(&self, rng: &mut RngStream) -> Result<f64, GenError> {
        match &self.form {
            DistForm::Constant { value } => Ok(*value),
            DistForm::Uniform { lo, hi } => Ok(lo + rng.next_unit() * (hi - lo)),
            DistForm::Normal { mu, sigma, lo, hi } => truncated_normal(rng, *mu, *sigma, *lo, *hi),
            DistForm::Choice { values, weights } => {
                let u = rng.next_unit();
                Ok(match weights {
                    None => {
                        let i = ((u * values.len() as f64) as usize).min(values.len() - 1);
                        values[i]
                    }
                    Some(w) => {
                        let total: f64 = w.iter().sum();
                        let target = u * total;
                        let mut acc = 0.0;
                        let mut picked = values[values.len() - 1];
                        for (v, wi) in values.iter().zip(w) {
                            acc += wi;
                            if target < acc {
                                picked = *v;
                                break;
                            }
                        }
                        picked
                    }
                })
            }
        }
    }
}

/// Normal(mu, sigma) conditioned on `[lo, hi]` by rejection.
pub fn truncated_normal(
    rng: &mut RngStream,
    mu: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
) -> Result<f64, GenError> {
    for _ in 0..=MAX_REJECTIONS {
        let x = rng.next_normal(mu, sigma);
        if (lo..=hi).contains(&x) {
            return Ok(x);
        }
    }
    Err(GenError::RejectionOverflow { mu, sigma, lo, hi })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDim {
    pub name: String,
    pub dist: DistributionSpec,
}

/// Named dimensions in declaration order; the order is part of the
/// reproducibility contract because draws are taken in it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterSpace {
    pub dims: Vec<ParamDim>,
}

impl ParameterSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, dist: DistributionSpec) -> Self {
        self.dims.push(ParamDim { name: name.to_string(), dist });
        self
    }

    pub fn get(&self, name: &str) -> Option<&DistributionSpec> {
        self.dims.iter().find(|d| d.name == name).map(|d| &d.dist)
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }
}

/// Draws one value per dimension in declaration order.
pub fn sample_params(space: &ParameterSpace, rng: &mut RngStream) -> Result<ParamAssignment, GenError> {
    let mut out = ParamAssignment::default();
    for dim in &space.dims {
        let value = dim.dist.sample(rng)?;
        out.push(&dim.name, dim.dist.dimension, value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genvar::derive_rng;

    #[test]
    fn constant_ignores_rng() {
        let space = ParameterSpace::new().with("w", DistributionSpec::constant(Dimension::Length, 42.0));
        for i in 0..10 {
            let mut rng = derive_rng(i, "c", i);
            assert_eq!(sample_params(&space, &mut rng).unwrap().get("w"), Some(42.0));
        }
    }

    #[test]
    fn uniform_mean() {
        let dist = DistributionSpec::uniform(Dimension::Length, 60.0, 200.0);
        let mut rng = derive_rng(0, "uniform", 0);
        let n = 100_000;
        let mean = (0..n).map(|_| dist.sample(&mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((129.3..=130.7).contains(&mean), "mean {mean}");
    }

    #[test]
    fn weighted_choice_frequency() {
        let dist = DistributionSpec::choice(Dimension::Dimensionless, vec![0.0, 1.0], Some(vec![1.0, 3.0]));
        let mut rng = derive_rng(0, "choice", 0);
        let n = 100_000;
        let hits = (0..n).filter(|_| dist.sample(&mut rng).unwrap() == 1.0).count();
        let freq = hits as f64 / n as f64;
        assert!((0.745..=0.755).contains(&freq), "freq {freq}");
    }

    #[test]
    fn unweighted_choice_covers_values() {
        let dist = DistributionSpec::choice(Dimension::Mass, vec![200.0, 300.0, 400.0], None);
        let mut rng = derive_rng(3, "choice", 0);
        let mut seen = [0usize; 3];
        for _ in 0..3000 {
            let v = dist.sample(&mut rng).unwrap();
            seen[((v - 200.0) / 100.0) as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800), "{seen:?}");
    }

    #[test]
    fn truncated_normal_stays_in_bounds() {
        let dist = DistributionSpec::normal(Dimension::Length, 0.0, 1.0, -3.0, 3.0);
        let mut rng = derive_rng(5, "normal", 0);
        for _ in 0..10_000 {
            let v = dist.sample(&mut rng).unwrap();
            assert!((-3.0..=3.0).contains(&v));
        }
    }

    #[test]
    fn degenerate_truncation_overflows() {
        let dist = DistributionSpec::normal(Dimension::Length, 0.0, 1.0, 50.0, 51.0);
        let mut rng = derive_rng(5, "normal", 0);
        let err = dist.sample(&mut rng).unwrap_err();
        assert_eq!(err.code(), "E_REJECTION_OVERFLOW");
    }

    #[test]
    fn check_rejects_bad_forms() {
        assert!(DistributionSpec::uniform(Dimension::Length, 5.0, 5.0).check().is_err());
        assert!(DistributionSpec::normal(Dimension::Length, 0.0, 0.0, -1.0, 1.0).check().is_err());
        assert!(DistributionSpec::normal(Dimension::Length, 0.0, 1.0, 1.0, -1.0).check().is_err());
        assert!(DistributionSpec::choice(Dimension::Length, vec![], None).check().is_err());
        assert!(DistributionSpec::choice(Dimension::Length, vec![1.0], Some(vec![0.0])).check().is_err());
        assert!(DistributionSpec::choice(Dimension::Length, vec![1.0, 2.0], Some(vec![1.0])).check().is_err());
        assert!(DistributionSpec::normal(Dimension::Length, 0.0, 1.0, -3.0, 3.0).check().is_ok());
    }

    #[test]
    fn draws_follow_declaration_order() {
        let a = ParameterSpace::new()
            .with("x", DistributionSpec::uniform(Dimension::Length, 0.0, 1.0))
            .with("y", DistributionSpec::uniform(Dimension::Length, 0.0, 1.0));
        let b = ParameterSpace::new()
            .with("y", DistributionSpec::uniform(Dimension::Length, 0.0, 1.0))
            .with("x", DistributionSpec::uniform(Dimension::Length, 0.0, 1.0));
        let pa = sample_params(&a, &mut derive_rng(0, "s", 0)).unwrap();
        let pb = sample_params(&b, &mut derive_rng(0, "s", 0)).unwrap();
        assert_eq!(pa.get("x"), pb.get("y"));
        assert_eq!(pa.get("y"), pb.get("x"));
    }
}
