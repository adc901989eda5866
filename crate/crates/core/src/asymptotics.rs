//! Large-N predictors for the exact statistics, the crossover integrals of the
//! critical regimes and the first Edgeworth correction to the gamma density.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angular::{angular_count_var, ArcWindow, FourierStatistic};
use crate::error::{domain, Result};
use crate::radial::{radial_count_var, Ensemble, ModulusWindow, RadialTestFunction};
use crate::specfun::{integrate_adaptive, legendre_rule, std_normal_cdf, std_normal_pdf, std_normal_sf};

/// ½∫₀¹ f′(r) g′(r) r dr, the limiting covariance of smooth radial statistics.
pub fn radial_smooth_limit(f: &RadialTestFunction, g: &RadialTestFunction) -> Result<f64> {
    let probe = |h: &RadialTestFunction| {
        h.derivative(0.5)
            .map(|_| ())
            .ok_or_else(|| crate::Error::Domain("test function has no derivative".into()))
    };
    probe(f)?;
    probe(g)?;
    let integrand = |r: f64| f.derivative(r).unwrap_or(0.0) * g.derivative(r).unwrap_or(0.0) * r;
    let value = match (f, g) {
        (RadialTestFunction::Polynomial(_), RadialTestFunction::Polynomial(_)) => {
            legendre_rule(64, 0.0, 1.0)?.integrate(integrand)
        }
        _ => integrate_adaptive(integrand, 0.0, 1.0, 1e-12)?,
    };
    Ok(0.5 * value)
}

/// Σ_k k² f̂(k) ĝ(−k); the smooth angular covariance grows like (ln N / 4) times this.
pub fn angular_smooth_coeff(f: &FourierStatistic, g: &FourierStatistic) -> Complex64 {
    let band = f.band().min(g.band()) as i64;
    (-band..=band).map(|k| f.coeff(k) * g.coeff(-k) * (k * k) as f64).sum()
}

/// (ln N / 4) Σ k² f̂(k) ĝ(−k).
pub fn angular_smooth_prediction(f: &FourierStatistic, g: &FourierStatistic, n: usize) -> Complex64 {
    angular_smooth_coeff(f, g) * ((n as f64).ln() / 4.0)
}

/// Crossover profile of the critical angular count variance,
/// ∫₀¹ (1 − e^{−β²x})/(2√x) dx + β∫₀¹∫_{β√x}^∞ e^{−θ²} dθ dx,
/// with β = √N times the arc length.
pub fn i_arg(beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return domain(format!("i_arg needs a finite beta > 0, got {beta}"));
    }
    // Both terms integrate in closed form; quadrature misses the jump near x ≈ β⁻² for large β.
    let sqrt_pi = PI.sqrt();
    Ok(1.0 - sqrt_pi / (4.0 * beta) * libm::erf(beta) + 0.5 * sqrt_pi * beta * libm::erfc(beta)
        - 0.5 * (-beta * beta).exp())
}

/// Crossover profile of the critical radial count variance,
/// √π ∫ (G − G²) dx′ with G(x′) = P(x′ ≤ Z ≤ x′ + 2c).
pub fn i_mod(c: f64) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return domain(format!("i_mod needs a finite c > 0, got {c}"));
    }
    let integrand = |x: f64| {
        let inside = if x >= 0.0 {
            std_normal_sf(x) - std_normal_sf(x + 2.0 * c)
        } else if x + 2.0 * c <= 0.0 {
            std_normal_cdf(x + 2.0 * c) - std_normal_cdf(x)
        } else {
            1.0 - std_normal_cdf(x) - std_normal_sf(x + 2.0 * c)
        };
        let outside = std_normal_cdf(x) + std_normal_sf(x + 2.0 * c);
        inside * outside
    };
    let lo = -2.0 * c - 12.0;
    let hi = 12.0;
    // Break points at the two edges; the plateau between them contributes almost nothing.
    let mut cuts = vec![lo, -2.0 * c + 12.0, -12.0, hi];
    cuts.sort_by(f64::total_cmp);
    cuts.retain(|&x| (lo..=hi).contains(&x));
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += integrate_adaptive(integrand, w[0], w[1], 1e-11)?;
    }
    Ok(PI.sqrt() * total)
}

/// Asymptotic regime of a counting window, judged by s = √N · width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Fixed,
    MesoscopicSupercritical,
    Critical,
    Subcritical,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Fixed => "fixed",
            Regime::MesoscopicSupercritical => "mesoscopic-supercritical",
            Regime::Critical => "critical",
            Regime::Subcritical => "subcritical",
        })
    }
}

/// Scaled widths below this are subcritical, above [`SUPERCRITICAL_WIDTH`] supercritical.
pub const SUBCRITICAL_WIDTH: f64 = 0.1;
pub const SUPERCRITICAL_WIDTH: f64 = 10.0;

/// Regime tag for a window of the given width; windows wider than N^{−1/4}
/// are reported as fixed.
pub fn classify(n: usize, width: f64) -> Regime {
    let nf = n as f64;
    let s = nf.sqrt() * width;
    if s < SUBCRITICAL_WIDTH {
        Regime::Subcritical
    } else if s <= SUPERCRITICAL_WIDTH {
        Regime::Critical
    } else if width >= nf.powf(-0.25) {
        Regime::Fixed
    } else {
        Regime::MesoscopicSupercritical
    }
}

/// A counting window: moduli or angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Window {
    Radial(ModulusWindow),
    Angular(ArcWindow),
}

impl Window {
    pub fn width(&self) -> f64 {
        match self {
            Window::Radial(w) => w.width(),
            Window::Angular(a) => a.len(),
        }
    }
}

/// Exact count variance next to its asymptotic prediction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeReport {
    pub n: usize,
    pub window: Window,
    pub regime: Regime,
    pub scaled_width: f64,
    pub predicted: f64,
    pub exact: f64,
    pub ratio: f64,
}

/// Predicted count variance for the regime of `window` at size N (complex ensemble).
pub fn predicted_count_var(n: usize, window: &Window) -> Result<(Regime, f64)> {
    let nf = n as f64;
    let root = nf.sqrt();
    let regime = classify(n, window.width());
    let s = root * window.width();
    let value = match window {
        Window::Angular(arc) => {
            let edge = root / PI.powf(1.5);
            match regime {
                Regime::Subcritical => nf * arc.len() / (2.0 * PI),
                Regime::Critical => edge * i_arg(s)?,
                Regime::Fixed | Regime::MesoscopicSupercritical => edge,
            }
        }
        Window::Radial(w) => {
            if w.b.is_infinite() {
                return domain("predictions need a bounded modulus window");
            }
            match regime {
                Regime::Subcritical => nf * (w.b * w.b - w.a * w.a),
                Regime::Critical => root * w.a / PI.sqrt() * i_mod(s)?,
                Regime::Fixed | Regime::MesoscopicSupercritical => root * (w.a + w.b.min(1.0)) / PI.sqrt(),
            }
        }
    };
    Ok((regime, value))
}

/// Regime tag, prediction and exact value for a count variance.
pub fn count_var_prediction(n: usize, window: &Window) -> Result<RegimeReport> {
    let (regime, predicted) = predicted_count_var(n, window)?;
    let exact = match window {
        Window::Angular(arc) => angular_count_var(n, arc)?,
        Window::Radial(w) => radial_count_var(n, w.a, w.b, Ensemble::Complex)?,
    };
    Ok(RegimeReport {
        n,
        window: *window,
        regime,
        scaled_width: (n as f64).sqrt() * window.width(),
        predicted,
        exact,
        ratio: exact / predicted,
    })
}

/// Standardized Gamma(M) density with its first Edgeworth correction:
/// φ(a)[1 + (a³ − 3a)/(3√M)].
pub fn edgeworth_density(a: f64, m: usize) -> Result<f64> {
    if m < 2 {
        return domain(format!("edgeworth_density needs M >= 2, got {m}"));
    }
    let kappa3 = 2.0;
    Ok(std_normal_pdf(a) * (1.0 + kappa3 / (6.0 * (m as f64).sqrt()) * (a * a * a - 3.0 * a)))
}
