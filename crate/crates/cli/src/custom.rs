//! The `custom` preset: potentials and initial data given as expressions in
//! `x, y, z, t`, with `eps` and `pi` predefined.

use std::collections::BTreeMap;
use std::sync::Arc;

use anyhow::{anyhow, bail, Result};
use evalexpr::{Context, DefaultNumericTypes, EvalexprError, EvalexprResult, Node, Value};
use magsplit::advection::DEFAULT_SUBSTEPS;
use magsplit::presets::Experiment;
use magsplit::{AdvectionBackend, Domain, NfftConfig, PotentialSet, SplittingScheme};
use num_complex::Complex64;

use crate::config::ConfigError;

pub const REQUIRED_KEYS: &[&str] = &["dim", "lo", "hi", "N", "T", "steps", "eps", "V", "u0_re"];
pub const OPTIONAL_KEYS: &[&str] = &["ax", "ay", "az", "u0_im"];

const AXES: [&str; 3] = ["x", "y", "z"];

type Ev = Value<DefaultNumericTypes>;

/// Variable bindings for one evaluation.
struct Vars {
    values: [Ev; 6],
}

impl Vars {
    fn new(x: &[f64], t: f64, eps: f64) -> Self {
        let c = |i: usize| Value::Float(x.get(i).copied().unwrap_or(0.0));
        Self { values: [c(0), c(1), c(2), Value::Float(t), Value::Float(eps), Value::Float(std::f64::consts::PI)] }
    }
}

fn unary(name: &str, v: f64) -> Option<f64> {
    Some(match name {
        "sin" => v.sin(),
        "cos" => v.cos(),
        "tan" => v.tan(),
        "sinh" => v.sinh(),
        "cosh" => v.cosh(),
        "tanh" => v.tanh(),
        "asin" => v.asin(),
        "acos" => v.acos(),
        "atan" => v.atan(),
        "exp" => v.exp(),
        "ln" => v.ln(),
        "sqrt" => v.sqrt(),
        "abs" => v.abs(),
        _ => return None,
    })
}

impl Context for Vars {
    type NumericTypes = DefaultNumericTypes;

    fn get_value(&self, identifier: &str) -> Option<&Ev> {
        let i = match identifier {
            "x" => 0,
            "y" => 1,
            "z" => 2,
            "t" => 3,
            "eps" => 4,
            "pi" => 5,
            _ => return None,
        };
        Some(&self.values[i])
    }

    fn call_function(&self, identifier: &str, argument: &Ev) -> EvalexprResult<Ev, DefaultNumericTypes> {
        if identifier == "atan2" {
            let args = argument.as_fixed_len_tuple(2)?;
            return Ok(Value::Float(args[0].as_number()?.atan2(args[1].as_number()?)));
        }
        let v = argument.as_number()?;
        unary(identifier, v)
            .map(Value::Float)
            .ok_or_else(|| EvalexprError::FunctionIdentifierNotFound(identifier.to_string()))
    }

    fn are_builtin_functions_disabled(&self) -> bool {
        false
    }

    fn set_builtin_functions_disabled(&mut self, _: bool) -> EvalexprResult<(), DefaultNumericTypes> {
        Err(EvalexprError::ContextNotMutable)
    }
}

/// Appends `.0` to integer literals so that `1/5` is a float division.
fn promote_integers(src: &str) -> String {
    let b = src.as_bytes();
    let mut out = String::with_capacity(src.len() + 8);
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        let starts_number = c.is_ascii_digit()
            && (i == 0 || !(b[i - 1].is_ascii_alphanumeric() || b[i - 1] == b'_' || b[i - 1] == b'.'));
        if !starts_number {
            out.push(c as char);
            i += 1;
            continue;
        }
        let start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        let mut float = false;
        if i < b.len() && b[i] == b'.' {
            float = true;
            i += 1;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
            let mut j = i + 1;
            if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                j += 1;
            }
            if j < b.len() && b[j].is_ascii_digit() {
                float = true;
                i = j;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
            }
        }
        out.push_str(&src[start..i]);
        if !float {
            out.push_str(".0");
        }
    }
    out
}

/// A compiled real-valued expression.
#[derive(Debug, Clone)]
pub struct Expr {
    source: String,
    node: Arc<Node<DefaultNumericTypes>>,
}

impl Expr {
    pub fn parse(key: &str, source: &str) -> Result<Self> {
        let node = evalexpr::build_operator_tree::<DefaultNumericTypes>(&promote_integers(source))
            .map_err(|e| ConfigError(format!("key '{key}': cannot parse expression '{source}': {e}")))?;
        for id in node.iter_variable_identifiers() {
            if !["x", "y", "z", "t", "eps", "pi"].contains(&id) {
                bail!(ConfigError(format!(
                    "key '{key}': unknown variable '{id}' (available: x, y, z, t, eps, pi)"
                )));
            }
        }
        Ok(Self { source: source.to_string(), node: Arc::new(node) })
    }

    pub fn uses(&self, var: &str) -> bool {
        self.node.iter_variable_identifiers().any(|v| v == var)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: &[f64], t: f64, eps: f64) -> Result<f64> {
        self.node
            .eval_number_with_context(&Vars::new(x, t, eps))
            .map_err(|e| anyhow!("evaluating '{}': {e}", self.source))
    }

    /// Evaluation inside solver callbacks, where errors cannot be returned.
    fn eval_or_nan(&self, x: &[f64], t: f64, eps: f64) -> f64 {
        self.eval(x, t, eps).unwrap_or(f64::NAN)
    }
}

fn get<'a>(map: &'a BTreeMap<String, String>, key: &str) -> &'a str {
    map.get(key).map(String::as_str).expect("required key checked")
}

fn number<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = get(map, key);
    raw.trim()
        .parse()
        .map_err(|e| ConfigError(format!("key '{key}': invalid value '{raw}': {e}")).into())
}

pub fn missing_keys(map: &BTreeMap<String, String>) -> Vec<&'static str> {
    REQUIRED_KEYS.iter().copied().filter(|k| !map.contains_key(*k)).collect()
}

/// Builds the experiment; `map` holds the merged configuration.
pub fn experiment(map: &BTreeMap<String, String>) -> Result<Experiment> {
    let missing = missing_keys(map);
    if !missing.is_empty() {
        bail!(ConfigError(format!(
            "custom preset is missing required keys: {} (optional: {})",
            missing.join(", "),
            OPTIONAL_KEYS.join(", ")
        )));
    }
    let dim: usize = number(map, "dim")?;
    if !(1..=3).contains(&dim) {
        bail!(ConfigError(format!("key 'dim': expected 1, 2 or 3, got {dim}")));
    }
    let lo: f64 = number(map, "lo")?;
    let hi: f64 = number(map, "hi")?;
    let domain = Domain::cube(dim, lo, hi).map_err(|e| ConfigError(format!("keys 'lo'/'hi': {e}")))?;
    let eps: f64 = number(map, "eps")?;
    let v = Expr::parse("V", get(map, "V"))?;
    let a: Vec<Expr> = ["ax", "ay", "az"][..dim]
        .iter()
        .map(|&k| Expr::parse(k, map.get(k).map(String::as_str).unwrap_or("0")))
        .collect::<Result<_>>()?;
    let re = Expr::parse("u0_re", get(map, "u0_re"))?;
    let im = Expr::parse("u0_im", map.get("u0_im").map(String::as_str).unwrap_or("0"))?;
    for (e, key) in [(&re, "u0_re"), (&im, "u0_im")] {
        if e.uses("t") {
            bail!(ConfigError(format!("key '{key}': initial data cannot depend on t")));
        }
    }
    for (i, axis) in AXES.iter().enumerate().skip(dim) {
        for e in std::iter::once(&v).chain(&a).chain([&re, &im]) {
            if e.uses(axis) {
                bail!(ConfigError(format!(
                    "expression '{}' uses '{axis}' but dim = {dim} (axis {i} does not exist)",
                    e.source()
                )));
            }
        }
    }
    // probe once so that bad function names fail here rather than as NaN states
    let probe = vec![lo; dim];
    for e in std::iter::once(&v).chain(&a).chain([&re, &im]) {
        e.eval(&probe, 0.0, eps).map_err(|err| ConfigError(err.to_string()))?;
    }
    let time_dependent = v.uses("t") || a.iter().any(|e| e.uses("t"));
    let potentials = PotentialSet::new(
        dim,
        Arc::new(move |t, x| v.eval_or_nan(x, t, eps)),
        Arc::new(move |t, x, out| {
            for (o, e) in out.iter_mut().zip(&a) {
                *o = e.eval_or_nan(x, t, eps);
            }
        }),
        time_dependent,
    );
    Ok(Experiment {
        name: "custom".into(),
        domain,
        sizes: crate::config::parse_sizes(get(map, "N"), dim)?,
        epsilon: eps,
        final_time: number(map, "T")?,
        steps: number(map, "steps")?,
        potentials,
        initial: Arc::new(move |x| Complex64::new(re.eval_or_nan(x, 0.0, eps), im.eval_or_nan(x, 0.0, eps))),
        backend: AdvectionBackend::Nfft(NfftConfig::default()),
        scheme: SplittingScheme::Lie,
        substeps: DEFAULT_SUBSTEPS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn integer_literals_become_floats() {
        assert_eq!(promote_integers("1/5"), "1.0/5.0");
        assert_eq!(promote_integers("sin(2*pi*x)/5 + 0.2"), "sin(2.0*pi*x)/5.0 + 0.2");
        assert_eq!(promote_integers("1e-3 + 2.5e2 + x1"), "1e-3 + 2.5e2 + x1");
        assert_eq!(promote_integers("3e"), "3.0e");
    }

    #[test]
    fn expressions_evaluate_with_plain_function_names() {
        let e = Expr::parse("V", "cos(2*pi*x)/5 + 4/5").unwrap();
        assert!((e.eval(&[0.0], 0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let e = Expr::parse("V", "atan2(y, x) + eps * t").unwrap();
        assert!((e.eval(&[1.0, 1.0], 2.0, 0.5).unwrap() - (std::f64::consts::FRAC_PI_4 + 1.0)).abs() < 1e-15);
        assert!(e.uses("t") && !e.uses("z"));
    }

    #[test]
    fn unknown_variables_and_functions_are_rejected() {
        assert!(Expr::parse("V", "w + 1").is_err());
        let m = map(&[
            ("dim", "1"), ("lo", "0"), ("hi", "1"), ("N", "16"), ("T", "1"), ("steps", "4"),
            ("eps", "1"), ("V", "sinc(x)"), ("u0_re", "1"),
        ]);
        assert!(experiment(&m).is_err());
    }

    #[test]
    fn empty_config_lists_required_keys() {
        let err = experiment(&BTreeMap::new()).unwrap_err().to_string();
        for k in REQUIRED_KEYS {
            assert!(err.contains(k), "{err}");
        }
    }

    #[test]
    fn builds_a_complete_experiment() {
        let m = map(&[
            ("dim", "2"), ("lo", "-1"), ("hi", "1"), ("N", "8,16"), ("T", "0.5"), ("steps", "10"),
            ("eps", "0.5"), ("V", "x*x + y*y"), ("ax", "sin(pi*y)"), ("u0_re", "exp(-x*x)"),
        ]);
        let e = experiment(&m).unwrap();
        assert_eq!(e.sizes, vec![8, 16]);
        assert!(!e.potentials.is_time_dependent());
        let grid = e.grid().unwrap();
        let u = e.initial_field(&grid).unwrap();
        assert!(u.values().iter().all(|v| v.im == 0.0 && v.re > 0.0));
        let bad = map(&[
            ("dim", "1"), ("lo", "0"), ("hi", "1"), ("N", "8"), ("T", "1"), ("steps", "2"),
            ("eps", "1"), ("V", "y"), ("u0_re", "1"),
        ]);
        assert!(experiment(&bad).is_err());
    }
}
