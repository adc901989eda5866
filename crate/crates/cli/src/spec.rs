//! Statistic and window mini-language.
//!
//! ```text
//! poly:c0,c1,...     Σ c_j r^j on the moduli
//! ind-mod:a,b        indicator of a <= |z| <= b (b may be `inf`)
//! ind-arg:lo,hi      indicator of lo <= arg z <= hi, radians
//! cos:k | sin:k      cos(kθ), sin(kθ)
//! fourier:@path      "k re im" lines
//! ```
//!
//! Any spec may carry a scale prefix, e.g. `2*cos:1`.

use std::fmt;

use ginibre::angular::{ArcWindow, FourierStatistic};
use ginibre::mc::Statistic;
use ginibre::radial::{ModulusWindow, RadialTestFunction};

#[derive(Debug)]
pub struct SpecError(pub String);

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SpecError {}

fn err<T>(msg: impl Into<String>) -> Result<T, SpecError> {
    Err(SpecError(msg.into()))
}

/// A parsed statistic together with the text it came from.
#[derive(Debug, Clone)]
pub struct StatSpec {
    pub text: String,
    pub kind: Spec,
}

#[derive(Debug, Clone)]
pub enum Spec {
    Radial(RadialTestFunction),
    Fourier(FourierStatistic),
    Arc { arc: ArcWindow, scale: f64 },
}

impl StatSpec {
    pub fn is_angular(&self) -> bool {
        !matches!(self.kind, Spec::Radial(_))
    }

    /// The statistic as the Monte Carlo layer sees it. Scaled arcs and
    /// complex Fourier statistics have no sampler counterpart.
    pub fn to_statistic(&self) -> Result<Statistic, SpecError> {
        match &self.kind {
            Spec::Radial(f) => Ok(Statistic::Radial(f.clone())),
            Spec::Fourier(f) if f.is_real() => Ok(Statistic::Angular(f.clone())),
            Spec::Fourier(_) => err(format!("'{}' is complex-valued; only real statistics can be sampled", self.text)),
            Spec::Arc { arc, scale } if *scale == 1.0 => Ok(Statistic::ArcCount(*arc)),
            Spec::Arc { .. } => err(format!("'{}': scaled arc indicators cannot be sampled", self.text)),
        }
    }

    /// Fourier form; arc indicators are truncated at `band`.
    pub fn to_fourier(&self, band: usize) -> Result<FourierStatistic, SpecError> {
        match &self.kind {
            Spec::Fourier(f) => Ok(f.clone()),
            Spec::Arc { arc, scale } => {
                let k = band as i64;
                let coeffs = (-k..=k).map(|j| arc.fourier(j) * scale).collect();
                FourierStatistic::new(coeffs, true).map_err(|e| SpecError(e.to_string()))
            }
            Spec::Radial(_) => err(format!("'{}' is a radial statistic", self.text)),
        }
    }
}

impl std::str::FromStr for StatSpec {
    type Err = SpecError;

    fn from_str(text: &str) -> Result<Self, SpecError> {
        let (scale, body) = match text.split_once('*') {
            Some((s, rest)) => (parse_f64(s, text)?, rest),
            None => (1.0, text),
        };
        let Some((head, args)) = body.split_once(':') else {
            return err(format!("'{text}': expected <kind>:<arguments>"));
        };
        let lib = |e: ginibre::Error| SpecError(format!("'{text}': {e}"));
        let kind = match head {
            "poly" => {
                let coeffs = parse_list(args, text)?.into_iter().map(|c| c * scale).collect();
                Spec::Radial(RadialTestFunction::polynomial(coeffs).map_err(lib)?)
            }
            "ind-mod" => {
                if scale != 1.0 {
                    return err(format!("'{text}': indicators cannot be scaled"));
                }
                let [a, b] = parse_pair(args, text)?;
                Spec::Radial(RadialTestFunction::Indicator(ModulusWindow::new(a, b).map_err(lib)?))
            }
            "ind-arg" => {
                let [lo, hi] = parse_pair(args, text)?;
                Spec::Arc { arc: ArcWindow::new(lo, hi).map_err(lib)?, scale }
            }
            "cos" | "sin" => {
                let k: usize = args.trim().parse().map_err(|_| SpecError(format!("'{text}': frequency must be a non-negative integer")))?;
                let f = if head == "cos" { FourierStatistic::cos(k) } else { FourierStatistic::sin(k) };
                Spec::Fourier(f.map_err(lib)?.scaled(scale))
            }
            "fourier" => {
                let Some(path) = args.strip_prefix('@') else {
                    return err(format!("'{text}': expected fourier:@path"));
                };
                let body = std::fs::read_to_string(path).map_err(|e| SpecError(format!("'{text}': {e}")))?;
                // Real when the coefficients are conjugate-symmetric, complex otherwise.
                let f = FourierStatistic::parse(&body, true).or_else(|_| FourierStatistic::parse(&body, false)).map_err(lib)?;
                Spec::Fourier(f.scaled(scale))
            }
            other => return err(format!("'{text}': unknown statistic kind '{other}'")),
        };
        Ok(StatSpec { text: text.to_string(), kind })
    }
}

fn parse_f64(s: &str, ctx: &str) -> Result<f64, SpecError> {
    let s = s.trim();
    let v = match s {
        "inf" | "+inf" => f64::INFINITY,
        "pi" => std::f64::consts::PI,
        "-pi" => -std::f64::consts::PI,
        _ => s.parse().map_err(|_| SpecError(format!("'{ctx}': '{s}' is not a number")))?,
    };
    if v.is_nan() {
        return err(format!("'{ctx}': NaN is not allowed"));
    }
    Ok(v)
}

pub fn parse_list(s: &str, ctx: &str) -> Result<Vec<f64>, SpecError> {
    s.split(',').map(|x| parse_f64(x, ctx)).collect()
}

fn parse_pair(s: &str, ctx: &str) -> Result<[f64; 2], SpecError> {
    match parse_list(s, ctx)?.as_slice() {
        &[a, b] => Ok([a, b]),
        _ => err(format!("'{ctx}': expected two comma-separated numbers")),
    }
}

/// `a,b` for windows given directly as flags.
#[derive(Debug, Clone, Copy)]
pub struct Pair(pub f64, pub f64);

impl std::str::FromStr for Pair {
    type Err = SpecError;
    fn from_str(s: &str) -> Result<Self, SpecError> {
        let [a, b] = parse_pair(s, s)?;
        Ok(Pair(a, b))
    }
}
