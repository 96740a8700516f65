//! Numeric literals in config files: plain numbers or short products and
//! quotients such as `"1/256"`, `"2pi/16"`, `"-pi"` or `"h/10"`.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A config value that is either a TOML number or an arithmetic string.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Num {
    Float(f64),
    Int(i64),
    Text(String),
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num::Float(x) => write!(f, "{x}"),
            Num::Int(i) => write!(f, "{i}"),
            Num::Text(s) => write!(f, "\"{s}\""),
        }
    }
}

impl Num {
    /// Evaluates the value; `h` is substituted for the symbol `h` when given.
    pub fn eval(&self, h: Option<f64>) -> Result<f64, String> {
        match self {
            Num::Float(x) => Ok(*x),
            Num::Int(i) => Ok(*i as f64),
            Num::Text(s) => eval_str(s, h),
        }
    }

    pub fn mentions_h(&self) -> bool {
        matches!(self, Num::Text(s) if s.contains('h'))
    }
}

/// `expr := product ('/' product)*`, `product := factor ('*' factor)*`,
/// `factor := number | number? 'pi' | 'h'`, with an optional leading sign.
pub fn eval_str(s: &str, h: Option<f64>) -> Result<f64, String> {
    let text: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let (sign, body) = match text.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, text.strip_prefix('+').unwrap_or(&text)),
    };
    if body.is_empty() {
        return Err(format!("empty expression '{s}'"));
    }
    let mut parts = body.split('/');
    let mut value = product(parts.next().unwrap_or_default(), h, s)?;
    for p in parts {
        let d = product(p, h, s)?;
        if d == 0.0 {
            return Err(format!("division by zero in '{s}'"));
        }
        value /= d;
    }
    Ok(sign * value)
}

fn product(p: &str, h: Option<f64>, whole: &str) -> Result<f64, String> {
    p.split('*')
        .try_fold(1.0, |acc, f| Ok(acc * factor(f, h, whole)?))
}

fn factor(f: &str, h: Option<f64>, whole: &str) -> Result<f64, String> {
    if f == "h" {
        return h.ok_or_else(|| format!("'{whole}' refers to h, which is not defined here"));
    }
    if let Some(coef) = f.strip_suffix("pi") {
        let c = if coef.is_empty() {
            1.0
        } else {
            number(coef, whole)?
        };
        return Ok(c * std::f64::consts::PI);
    }
    number(f, whole)
}

fn number(f: &str, whole: &str) -> Result<f64, String> {
    f.parse::<f64>()
        .map_err(|_| format!("cannot read '{f}' in '{whole}' as a number"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn evaluates_common_forms() {
        assert_eq!(eval_str("1/256", None).unwrap(), 1.0 / 256.0);
        assert_eq!(eval_str("-pi", None).unwrap(), -PI);
        assert_eq!(eval_str("4pi/128", None).unwrap(), 4.0 * PI / 128.0);
        assert_eq!(
            eval_str("2*pi*h/16", Some(0.5)).unwrap(),
            2.0 * PI * 0.5 / 16.0
        );
        assert_eq!(eval_str(" 0.4 / 8192 ", None).unwrap(), 0.4 / 8192.0);
        assert_eq!(eval_str("h/10", Some(1.0 / 256.0)).unwrap(), 1.0 / 2560.0);
    }

    #[test]
    fn rejects_malformed() {
        assert!(eval_str("", None).is_err());
        assert!(eval_str("1/0", None).is_err());
        assert!(eval_str("abc", None).is_err());
        assert!(eval_str("h/10", None).is_err());
        assert!(eval_str("1//2", None).is_err());
    }
}
