use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bounded test functions addressed by id in configs, e.g.
/// `{"type": "indicator_e", "c": 0.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TestFunction {
    /// `1{e'x > c}`.
    IndicatorE { c: f64 },
    /// `1{x_i > c}` with 1-based `i`.
    IndicatorCoord { i: usize, c: f64 },
    /// `tanh(<a, x>)`.
    Tanh { a: Vec<f64> },
    /// Constant function; the CLT experiment flags it as degenerate.
    Constant { value: f64 },
}

impl TestFunction {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            TestFunction::IndicatorCoord { i, .. } if *i == 0 || *i > dim => {
                Err(Error::IndexOutOfRange { index: *i, dim })
            }
            TestFunction::Tanh { a } if a.len() != dim => {
                Err(Error::DimensionMismatch(format!("tanh weights have length {}, model has {dim}", a.len())))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::IndicatorE { c } => f64::from(x.iter().sum::<f64>() > *c),
            TestFunction::IndicatorCoord { i, c } => f64::from(x[i - 1] > *c),
            TestFunction::Tanh { a } => a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>().tanh(),
            TestFunction::Constant { value } => *value,
        }
    }

    /// Short identifier used in reports.
    pub fn id(&self) -> String {
        match self {
            TestFunction::IndicatorE { c } => format!("indicator_e(c={c})"),
            TestFunction::IndicatorCoord { i, c } => format!("indicator_coord(i={i},c={c})"),
            TestFunction::Tanh { a } => format!("tanh(a={a:?})"),
            TestFunction::Constant { value } => format!("constant({value})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_eval() {
        let h: TestFunction = serde_json::from_str(r#"{"type": "indicator_e", "c": 0.0}"#).unwrap();
        assert_eq!(h, TestFunction::IndicatorE { c: 0.0 });
        assert_eq!(h.eval(&[0.5, -0.2]), 1.0);
        assert_eq!(h.eval(&[0.5, -0.7]), 0.0);
        let h: TestFunction = serde_json::from_str(r#"{"type": "indicator_coord", "i": 2, "c": 1.0}"#).unwrap();
        assert_eq!(h.eval(&[0.0, 1.5]), 1.0);
        assert!(h.validate(1).is_err());
        let h = TestFunction::Tanh { a: vec![1.0, 1.0] };
        assert!((h.eval(&[0.2, 0.3]) - 0.5f64.tanh()).abs() < 1e-15);
    }
}
