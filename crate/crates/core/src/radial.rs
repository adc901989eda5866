//! Exact finite-N statistics of the eigenvalue moduli.
//!
//! The squared moduli of an N-point Ginibre sample are distributed as a set of
//! independent scaled gamma variables: `s_ℓ / N` with `s_ℓ ~ Gamma(ℓ)` for the
//! complex ensemble and `s_{2ℓ} / 2N` for the quaternion ensemble, ℓ = 1..N.
//! Every radial mean, covariance and count statistic therefore reduces to a
//! sum of one-dimensional gamma expectations.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exec::{compensated_sum, try_map_indexed};
use crate::specfun::{composite_nodes, gamma_interval_split, gamma_pq, ln_gamma_prefactor};

/// Which Ginibre ensemble the moduli are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ensemble {
    Complex,
    Quaternion,
}

impl Ensemble {
    /// The gamma law of the squared modulus at level ℓ (1-based).
    pub(crate) fn law(self, n: usize, level: usize) -> GammaSumLaw {
        match self {
            Ensemble::Complex => GammaSumLaw { shape: level as f64, scale: n as f64 },
            Ensemble::Quaternion => GammaSumLaw { shape: 2.0 * level as f64, scale: 2.0 * n as f64 },
        }
    }

    pub fn tag(self) -> u32 {
        match self {
            Ensemble::Complex => 0,
            Ensemble::Quaternion => 1,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(Ensemble::Complex),
            1 => Some(Ensemble::Quaternion),
            _ => None,
        }
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ensemble::Complex => "complex",
            Ensemble::Quaternion => "quaternion",
        })
    }
}

impl std::str::FromStr for Ensemble {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complex" => Ok(Ensemble::Complex),
            "quaternion" => Ok(Ensemble::Quaternion),
            other => Err(Error::Format(format!("unknown ensemble '{other}'"))),
        }
    }
}

/// A closed interval of moduli [a, b]; `b` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusWindow {
    pub a: f64,
    pub b: f64,
}

impl ModulusWindow {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if a.is_nan() || b.is_nan() || a < 0.0 || a > b || a.is_infinite() {
            return Err(Error::Window(format!("modulus window needs 0 <= a <= b, got [{a}, {b}]")));
        }
        Ok(ModulusWindow { a, b })
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    /// The window in the gamma variable s = scale · r².
    fn in_gamma_units(&self, scale: f64) -> (f64, f64) {
        (scale * self.a * self.a, scale * self.b * self.b)
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied function of the modulus, evaluable on [0, r_max].
#[derive(Clone)]
pub struct Callable {
    f: RealFn,
    derivative: Option<RealFn>,
    r_max: f64,
}

impl fmt::Debug for Callable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Callable")
            .field("r_max", &self.r_max)
            .field("has_derivative", &self.derivative.is_some())
            .finish()
    }
}

/// A real test function of the modulus r ≥ 0.
#[derive(Debug, Clone)]
pub enum RadialTestFunction {
    /// Σ c_j r^j.
    Polynomial(Vec<f64>),
    /// 1 on [a, b], 0 elsewhere.
    Indicator(ModulusWindow),
    Callable(Callable),
}

pub const MAX_POLY_DEGREE: usize = 32;

impl RadialTestFunction {
    /// Polynomial in r with coefficients `coeffs[j]` of r^j.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return domain("polynomial needs at least one coefficient");
        }
        if coeffs.len() > MAX_POLY_DEGREE + 1 {
            return domain(format!("polynomial degree is capped at {MAX_POLY_DEGREE}"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return domain("polynomial coefficients must be finite");
        }
        Ok(RadialTestFunction::Polynomial(coeffs))
    }

    /// The monomial r^power.
    pub fn monomial(power: usize) -> Self {
        let mut c = vec![0.0; power + 1];
        c[power] = 1.0;
        RadialTestFunction::Polynomial(c)
    }

    pub fn constant(c: f64) -> Self {
        RadialTestFunction::Polynomial(vec![c])
    }

    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        Ok(RadialTestFunction::Indicator(ModulusWindow::new(a, b)?))
    }

    pub fn callable(f: impl Fn(f64) -> f64 + Send + Sync + 'static, r_max: f64) -> Result<Self> {
        if !(r_max >= 2.0) {
            return domain(format!("callable domain must extend to r_max >= 2, got {r_max}"));
        }
        Ok(RadialTestFunction::Callable(Callable { f: Arc::new(f), derivative: None, r_max }))
    }

    /// Attaches a derivative to a callable test function.
    pub fn with_derivative(self, d: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        match self {
            RadialTestFunction::Callable(c) => {
                RadialTestFunction::Callable(Callable { derivative: Some(Arc::new(d)), ..c })
            }
            other => other,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            RadialTestFunction::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &cj| acc * r + cj),
            RadialTestFunction::Indicator(w) => (w.a <= r && r <= w.b) as u8 as f64,
            RadialTestFunction::Callable(c) => (c.f)(r),
        }
    }

    /// f′(r) when the derivative is known in closed form or was supplied.
    pub fn derivative(&self, r: f64) -> Option<f64> {
        match self {
            RadialTestFunction::Polynomial(c) => Some(
                c.iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (j, &cj)| acc * r + j as f64 * cj),
            ),
            RadialTestFunction::Indicator(_) => None,
            RadialTestFunction::Callable(c) => c.derivative.as_ref().map(|d| d(r)),
        }
    }

    fn r_max(&self) -> f64 {
        match self {
            RadialTestFunction::Callable(c) => c.r_max,
            _ => f64::INFINITY,
        }
    }
}

/// Gamma(shape) law of s with squared modulus r² = s / scale.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GammaSumLaw {
    pub shape: f64,
    pub scale: f64,
}

/// Quadrature nodes in terms of the modulus, with density-weighted weights.
struct WeightedNodes {
    r: Vec<f64>,
    w: Vec<f64>,
}

impl GammaSumLaw {
    fn ln_density(&self, s: f64) -> f64 {
        ln_gamma_prefactor(self.shape - 1.0, s)
    }

    /// Integration window in s holding all but a negligible fraction of the mass.
    fn window(&self) -> (f64, f64) {
        let k = self.shape;
        let spread = 12.0 * k.sqrt();
        ((k - spread).max(0.0), k + spread + 30.0)
    }

    fn interval(&self, lo: f64, hi: f64) -> Result<(f64, f64)> {
        gamma_interval_split(self.shape, lo, hi)
    }

    /// Gauss–Legendre nodes over [lo, hi] in s, weighted by the gamma density.
    /// Intervals starting at the origin are integrated in u = √s, which keeps
    /// the integrand smooth for odd powers of r.
    fn nodes(&self, lo: f64, hi: f64, max_r: f64) -> Result<WeightedNodes> {
        let (lo, hi) = self.clip_to_domain(lo, hi, max_r)?;
        let sd = self.shape.sqrt();
        let mut r = Vec::new();
        let mut w = Vec::new();
        if hi <= lo {
            return Ok(WeightedNodes { r, w });
        }
        if lo == 0.0 {
            let top = hi.sqrt();
            let panels = ((top / 1.5).ceil() as usize).clamp(4, 4096);
            for (u, wu) in composite_nodes(0.0, top, panels) {
                let s = u * u;
                r.push((s / self.scale).sqrt());
                w.push(wu * 2.0 * u * self.ln_density(s).exp());
            }
        } else {
            let panels = (((hi - lo) / (2.0 * sd)).ceil() as usize).clamp(4, 4096);
            for (s, ws) in composite_nodes(lo, hi, panels) {
                r.push((s / self.scale).sqrt());
                w.push(ws * self.ln_density(s).exp());
            }
        }
        Ok(WeightedNodes { r, w })
    }

    /// Truncates [lo, hi] to the callable domain when the excluded mass is negligible.
    fn clip_to_domain(&self, lo: f64, hi: f64, max_r: f64) -> Result<(f64, f64)> {
        if max_r.is_infinite() {
            return Ok((lo, hi));
        }
        let s_max = self.scale * max_r * max_r;
        if hi <= s_max {
            return Ok((lo, hi));
        }
        let (_, q) = gamma_pq(self.shape, s_max)?;
        if q > 1e-15 {
            return domain(format!(
                "callable domain [0, {max_r}] misses probability {q:.3e} of the gamma law with shape {}",
                self.shape
            ));
        }
        Ok((lo.min(s_max), s_max))
    }

    fn full_nodes(&self, max_r: f64) -> Result<WeightedNodes> {
        let (lo, hi) = self.window();
        self.nodes(lo, hi, max_r)
    }
}

fn dot(values: &[f64], weights: &[f64]) -> f64 {
    compensated_sum(values.iter().zip(weights).map(|(v, w)| v * w))
}

fn expectation(law: &GammaSumLaw, f: &RadialTestFunction) -> Result<f64> {
    match f {
        RadialTestFunction::Indicator(win) => {
            let (lo, hi) = win.in_gamma_units(law.scale);
            Ok(law.interval(lo, hi)?.0)
        }
        _ => {
            let nodes = law.full_nodes(f.r_max())?;
            let vals: Vec<f64> = nodes.r.iter().map(|&r| f.eval(r)).collect();
            let mass = compensated_sum(nodes.w.iter().copied());
            Ok(dot(&vals, &nodes.w) / mass)
        }
    }
}

/// Interval pieces in s units, kept sorted and disjoint.
type Pieces = Vec<(f64, f64)>;

fn intersect(a: (f64, f64), b: (f64, f64)) -> Option<(f64, f64)> {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    (lo < hi).then_some((lo, hi))
}

fn subtract(a: (f64, f64), b: (f64, f64)) -> Pieces {
    let mut out = Vec::new();
    if b.0 > a.0 {
        out.push((a.0, b.0.min(a.1)));
    }
    if b.1 < a.1 {
        out.push((b.1.max(a.0), a.1));
    }
    out.retain(|p| p.0 < p.1);
    out
}

/// Complement of A ∪ B within [0, ∞).
fn complement_of_union(a: (f64, f64), b: (f64, f64)) -> Pieces {
    let (first, second) = if a.0 <= b.0 { (a, b) } else { (b, a) };
    let mut out = vec![(0.0, first.0)];
    if second.0 > first.1 {
        out.push((first.1, second.0));
        out.push((second.1, f64::INFINITY));
    } else {
        out.push((first.1.max(second.1), f64::INFINITY));
    }
    out.retain(|p| p.0 < p.1);
    out
}

fn pieces_prob(law: &GammaSumLaw, pieces: &[(f64, f64)]) -> Result<f64> {
    let mut total = 0.0;
    for &(lo, hi) in pieces {
        total += law.interval(lo, hi)?.0;
    }
    Ok(total)
}

/// Cov(1_A(r), 1_B(r)) under one gamma law, arranged as x·o − y·z so that no
/// two nearly equal probabilities are subtracted.
fn indicator_cov(law: &GammaSumLaw, a: &ModulusWindow, b: &ModulusWindow) -> Result<f64> {
    let ia = a.in_gamma_units(law.scale);
    let ib = b.in_gamma_units(law.scale);
    if ia.0 >= ia.1 || ib.0 >= ib.1 {
        return Ok(0.0);
    }
    let both = intersect(ia, ib).map(|p| vec![p]).unwrap_or_default();
    let x = pieces_prob(law, &both)?;
    let y = pieces_prob(law, &subtract(ia, ib))?;
    let z = pieces_prob(law, &subtract(ib, ia))?;
    let o = pieces_prob(law, &complement_of_union(ia, ib))?;
    Ok(x * o - y * z)
}

/// Cov(1_A(r), g(r)) = ∫_A (g − E g) under one gamma law.
fn mixed_cov(law: &GammaSumLaw, a: &ModulusWindow, g: &RadialTestFunction) -> Result<f64> {
    let full = law.full_nodes(g.r_max())?;
    let mass = compensated_sum(full.w.iter().copied());
    let g_vals: Vec<f64> = full.r.iter().map(|&r| g.eval(r)).collect();
    let mean_g = dot(&g_vals, &full.w) / mass;

    let (wlo, whi) = law.window();
    let (alo, ahi) = a.in_gamma_units(law.scale);
    let (lo, hi) = (alo.max(wlo), ahi.min(whi));
    if lo >= hi {
        return Ok(0.0);
    }
    let part = law.nodes(lo, hi, g.r_max())?;
    let centered: Vec<f64> = part.r.iter().map(|&r| g.eval(r) - mean_g).collect();
    Ok(dot(&centered, &part.w) / mass)
}

fn level_cov(law: &GammaSumLaw, f: &RadialTestFunction, g: &RadialTestFunction) -> Result<f64> {
    use RadialTestFunction::Indicator;
    match (f, g) {
        (Indicator(a), Indicator(b)) => indicator_cov(law, a, b),
        (Indicator(a), other) | (other, Indicator(a)) => mixed_cov(law, a, other),
        _ => {
            let nodes = law.full_nodes(f.r_max().min(g.r_max()))?;
            let mass = compensated_sum(nodes.w.iter().copied());
            let fv: Vec<f64> = nodes.r.iter().map(|&r| f.eval(r)).collect();
            let gv: Vec<f64> = nodes.r.iter().map(|&r| g.eval(r)).collect();
            let mf = dot(&fv, &nodes.w) / mass;
            let mg = dot(&gv, &nodes.w) / mass;
            let prod: Vec<f64> = fv.iter().zip(&gv).map(|(a, b)| (a - mf) * (b - mg)).collect();
            Ok(dot(&prod, &nodes.w) / mass)
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return domain("N must be at least 1");
    }
    Ok(())
}

fn sum_over_levels(n: usize, ens: Ensemble, per_level: impl Fn(&GammaSumLaw) -> Result<f64> + Sync + Send) -> Result<f64> {
    check_n(n)?;
    let terms = try_map_indexed(n, |i| per_level(&ens.law(n, i + 1)))?;
    Ok(compensated_sum(terms))
}

/// E[X(f)] = E Σ_i f(|z_i|).
pub fn radial_mean_exact(f: &RadialTestFunction, n: usize, ens: Ensemble) -> Result<f64> {
    sum_over_levels(n, ens, |law| expectation(law, f))
}

/// Cov(X(f), X(g)) for linear statistics of the moduli.
pub fn radial_cov_exact(f: &RadialTestFunction, g: &RadialTestFunction, n: usize, ens: Ensemble) -> Result<f64> {
    sum_over_levels(n, ens, |law| level_cov(law, f, g))
}

/// Per-level probabilities p_ℓ that the ℓ-th squared modulus falls in the window.
pub fn radial_count_probabilities(n: usize, w: &ModulusWindow, ens: Ensemble) -> Result<Vec<f64>> {
    Ok(radial_count_split(n, w, ens)?.into_iter().map(|(p, _)| p).collect())
}

/// Per-level (p_ℓ, 1 − p_ℓ), with the complement computed directly rather than by subtraction.
pub fn radial_count_split(n: usize, w: &ModulusWindow, ens: Ensemble) -> Result<Vec<(f64, f64)>> {
    check_n(n)?;
    try_map_indexed(n, |i| {
        let law = ens.law(n, i + 1);
        let (lo, hi) = w.in_gamma_units(law.scale);
        if lo >= hi {
            return Ok((0.0, 1.0));
        }
        law.interval(lo, hi)
    })
}

/// Var(#{i : a ≤ |z_i| ≤ b}).
pub fn radial_count_var(n: usize, a: f64, b: f64, ens: Ensemble) -> Result<f64> {
    let w = ModulusWindow::new(a, b)?;
    radial_count_cov(n, &w, &w, ens)
}

/// Cov(#w1, #w2) for two modulus windows.
pub fn radial_count_cov(n: usize, w1: &ModulusWindow, w2: &ModulusWindow, ens: Ensemble) -> Result<f64> {
    sum_over_levels(n, ens, |law| indicator_cov(law, w1, w2))
}

/// ln E[exp(λ X(h))] for the complex ensemble.
pub fn radial_log_mgf(h: &RadialTestFunction, lambda: f64, n: usize) -> Result<f64> {
    check_n(n)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let terms = try_map_indexed(n, |i| level_log_mgf(&Ensemble::Complex.law(n, i + 1), h, lambda, i + 1))?;
    Ok(compensated_sum(terms))
}

fn level_log_mgf(law: &GammaSumLaw, h: &RadialTestFunction, lambda: f64, level: usize) -> Result<f64> {
    if let RadialTestFunction::Indicator(w) = h {
        let (lo, hi) = w.in_gamma_units(law.scale);
        let p = if lo < hi { law.interval(lo, hi)?.0 } else { 0.0 };
        return Ok((p * lambda.exp_m1()).ln_1p());
    }
    let log_integrand = |s: f64| law.ln_density(s) + lambda * h.eval((s / law.scale).sqrt());
    let grid_max = |lo: f64, hi: f64| {
        (0..=512)
            .map(|j| log_integrand(lo + (hi - lo) * (j as f64 + 0.5) / 513.0))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (mut lo, mut hi) = law.window();
    let cap = 1e6 * (law.shape + 30.0);
    let mut peak = grid_max(lo, hi);
    loop {
        let mut grew = false;
        if log_integrand(hi) > peak - 46.0 {
            hi += hi - lo;
            grew = true;
            if hi > cap || !hi.is_finite() {
                return Err(Error::Divergent { k: level });
            }
        }
        if lo > 0.0 && log_integrand(lo) > peak - 46.0 {
            lo = if lo < 1e-6 { 0.0 } else { lo * 0.5 };
            grew = true;
        }
        if !grew {
            break;
        }
        peak = peak.max(grid_max(lo, hi));
    }
    if !peak.is_finite() {
        return Err(Error::Divergent { k: level });
    }
    let nodes = law.nodes(lo, hi, h.r_max())?;
    let tilt: Vec<f64> = nodes.r.iter().map(|&r| lambda * h.eval(r)).collect();
    let shift = tilt.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tilted = compensated_sum(nodes.w.iter().zip(&tilt).map(|(w, t)| w * (t - shift).exp()));
    let base = compensated_sum(nodes.w.iter().copied());
    let value = shift + (tilted / base).ln();
    if !value.is_finite() {
        return Err(Error::Divergent { k: level });
    }
    Ok(value)
}
