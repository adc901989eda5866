//! Exact finite-N statistics of the eigenvalue arguments.
//!
//! Angular test functions are given by Fourier coefficients in the normalized
//! convention f̂(k) = (1/2π)∫ e^{−ikθ} f(θ) dθ. For two statistics the
//! covariance only depends on φ̂(k) = f̂(k)ĝ(−k):
//!
//! Cov(X(f), X(g)) = N·φ(0) − Σ_{j,l<N} Γ((j+l)/2+1)² / (j! l!) · φ̂(j−l).
//!
//! Grouping the double sum along diagonals j − l = d gives weights
//! W_N(d) = N − Σ_l Γ(l+d/2+1)²/(l!(l+d)!), which are computed once per
//! diagonal in log space.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exec::{compensated_sum, map_indexed};
use crate::specfun::{lgamma, ln_gamma_sq_ratio};

/// Largest supported Fourier band.
pub const MAX_BAND: usize = 4096;

const TWO_PI: f64 = 2.0 * PI;

/// A band-limited angular test function.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierStatistic {
    band: usize,
    coeffs: Vec<Complex64>,
    real: bool,
}

impl FourierStatistic {
    /// Builds a statistic from coefficients f̂(−K..=K). When `real` is set the
    /// coefficients must satisfy f̂(−k) = conj f̂(k).
    pub fn new(coeffs: Vec<Complex64>, real: bool) -> Result<Self> {
        if coeffs.len() % 2 == 0 {
            return domain("coefficient vector must have odd length 2K+1");
        }
        let band = coeffs.len() / 2;
        if band > MAX_BAND {
            return domain(format!("band {band} exceeds the supported maximum {MAX_BAND}"));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return domain("Fourier coefficients must be finite");
        }
        let stat = FourierStatistic { band, coeffs, real };
        if real {
            let scale = stat.coeffs.iter().map(|c| c.norm()).fold(1.0, f64::max);
            for k in 0..=band as i64 {
                if (stat.coeff(-k) - stat.coeff(k).conj()).norm() > 1e-12 * scale {
                    return Err(Error::Format(format!(
                        "coefficients at ±{k} are not conjugate, so the statistic is not real-valued"
                    )));
                }
            }
        }
        Ok(stat)
    }

    /// Builds a statistic from (k, f̂(k)) pairs; absent frequencies are zero.
    pub fn from_pairs(pairs: &[(i64, Complex64)], real: bool) -> Result<Self> {
        let band = pairs.iter().map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0);
        if band > MAX_BAND {
            return domain(format!("band {band} exceeds the supported maximum {MAX_BAND}"));
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * band + 1];
        let mut seen = vec![false; 2 * band + 1];
        for &(k, c) in pairs {
            let idx = (k + band as i64) as usize;
            if seen[idx] {
                return Err(Error::Format(format!("frequency {k} given twice")));
            }
            seen[idx] = true;
            coeffs[idx] = c;
        }
        Self::new(coeffs, real)
    }

    pub fn constant(c: f64) -> Self {
        FourierStatistic { band: 0, coeffs: vec![Complex64::new(c, 0.0)], real: true }
    }

    /// 2cos(kθ) has f̂(±k) = 1; this returns cos(kθ) itself.
    pub fn cos(k: usize) -> Result<Self> {
        Self::from_pairs(&[(k as i64, Complex64::new(0.5, 0.0)), (-(k as i64), Complex64::new(0.5, 0.0))], true)
            .map(|s| if k == 0 { Self::constant(1.0) } else { s })
    }

    /// sin(kθ).
    pub fn sin(k: usize) -> Result<Self> {
        if k == 0 {
            return Ok(Self::constant(0.0));
        }
        Self::from_pairs(&[(k as i64, Complex64::new(0.0, -0.5)), (-(k as i64), Complex64::new(0.0, 0.5))], true)
    }

    pub fn scaled(&self, c: f64) -> Self {
        FourierStatistic { band: self.band, coeffs: self.coeffs.iter().map(|z| z * c).collect(), real: self.real }
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    /// f̂(k), zero outside the band.
    pub fn coeff(&self, k: i64) -> Complex64 {
        if k.unsigned_abs() as usize > self.band {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + self.band as i64) as usize]
        }
    }

    pub fn eval(&self, theta: f64) -> Complex64 {
        (-(self.band as i64)..=self.band as i64)
            .map(|k| self.coeff(k) * Complex64::from_polar(1.0, k as f64 * theta))
            .sum()
    }

    /// Real part of the statistic at θ, cheaper than [`Self::eval`] for real statistics.
    pub fn eval_real(&self, theta: f64) -> f64 {
        let mut acc = self.coeff(0).re;
        for k in 1..=self.band as i64 {
            let (s, c) = (k as f64 * theta).sin_cos();
            let (p, m) = (self.coeff(k), self.coeff(-k));
            acc += (p.re + m.re) * c - (p.im - m.im) * s;
        }
        acc
    }

    /// The complex conjugate function θ ↦ conj f(θ).
    pub fn conj(&self) -> Self {
        let k = self.band as i64;
        FourierStatistic {
            band: self.band,
            coeffs: (-k..=k).map(|j| self.coeff(-j).conj()).collect(),
            real: self.real,
        }
    }

    /// Parses "k re im" lines; blank lines and lines starting with '#' are skipped.
    pub fn parse(text: &str, real: bool) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Format(format!("line {}: expected 'k re im', got '{line}'", lineno + 1));
            if fields.len() != 3 {
                return Err(bad());
            }
            let k: i64 = fields[0].parse().map_err(|_| bad())?;
            let re: f64 = fields[1].parse().map_err(|_| bad())?;
            let im: f64 = fields[2].parse().map_err(|_| bad())?;
            pairs.push((k, Complex64::new(re, im)));
        }
        if pairs.is_empty() {
            return Err(Error::Format("no Fourier coefficients found".into()));
        }
        Self::from_pairs(&pairs, real)
    }

    pub fn read_file(path: impl AsRef<Path>, real: bool) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, real)
    }

    /// Writes the coefficients in the format accepted by [`Self::parse`].
    pub fn to_text(&self) -> String {
        let k = self.band as i64;
        (-k..=k)
            .map(|j| {
                let c = self.coeff(j);
                format!("{j} {:e} {:e}\n", c.re, c.im)
            })
            .collect()
    }
}

/// An arc of angles [lo, hi] in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcWindow {
    pub lo: f64,
    pub hi: f64,
}

impl ArcWindow {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        const SLACK: f64 = 1e-12;
        if !(lo < hi) || lo < -PI - SLACK || hi > PI + SLACK {
            return Err(Error::Window(format!("arc needs -π <= lo < hi <= π, got [{lo}, {hi}]")));
        }
        Ok(ArcWindow { lo, hi })
    }

    /// The arc [−len/2, len/2].
    pub fn symmetric(len: f64) -> Result<Self> {
        if !(len > 0.0 && len <= TWO_PI + 1e-12) {
            return Err(Error::Window(format!("arc length must lie in (0, 2π], got {len}")));
        }
        Self::new(-0.5 * len.min(TWO_PI), 0.5 * len.min(TWO_PI))
    }

    pub fn full() -> Self {
        ArcWindow { lo: -PI, hi: PI }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_full(&self) -> bool {
        self.len() >= TWO_PI * (1.0 - 1e-15)
    }

    fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Fourier coefficient of the arc indicator.
    pub fn fourier(&self, n: i64) -> Complex64 {
        if n == 0 {
            return Complex64::new(self.len() / TWO_PI, 0.0);
        }
        if self.is_full() {
            return Complex64::new(0.0, 0.0);
        }
        let nf = n as f64;
        let amp = (0.5 * nf * self.len()).sin() / (PI * nf);
        Complex64::from_polar(1.0, -nf * self.center()) * amp
    }

    /// Length of the intersection of two arcs on the circle.
    pub fn overlap(&self, other: &ArcWindow) -> f64 {
        if self.is_full() {
            return other.len();
        }
        if other.is_full() {
            return self.len();
        }
        [-TWO_PI, 0.0, TWO_PI]
            .iter()
            .map(|shift| (self.hi.min(other.hi + shift) - self.lo.max(other.lo + shift)).max(0.0))
            .sum()
    }

    pub fn contains(&self, theta: f64) -> bool {
        let t = (theta - self.lo).rem_euclid(TWO_PI);
        t <= self.len() || self.is_full()
    }
}

/// Fourier data of φ = f ∗ g̃ with g̃(θ) = g(−θ), which is all a covariance needs.
#[derive(Debug, Clone)]
pub struct ConvolvedStatistic {
    band: usize,
    coeffs: Vec<Complex64>,
    phi_zero: Complex64,
    band_limited: bool,
}

impl ConvolvedStatistic {
    pub fn from_pair(f: &FourierStatistic, g: &FourierStatistic) -> Self {
        let band = f.band.min(g.band);
        let k = band as i64;
        let coeffs: Vec<Complex64> = (-k..=k).map(|j| f.coeff(j) * g.coeff(-j)).collect();
        let phi_zero = complex_sum(coeffs.iter().copied());
        ConvolvedStatistic { band, coeffs, phi_zero, band_limited: true }
    }

    /// Indicator pair for count covariances; coefficients are stored up to `band`
    /// and φ(0) is the exact overlap fraction.
    pub fn from_arcs(a: &ArcWindow, b: &ArcWindow, band: usize) -> Self {
        let k = band as i64;
        let coeffs = (-k..=k).map(|j| a.fourier(j) * b.fourier(-j)).collect();
        let phi_zero = Complex64::new(a.overlap(b) / TWO_PI, 0.0);
        let band_limited = a.is_full() || b.is_full();
        ConvolvedStatistic { band, coeffs, phi_zero, band_limited }
    }

    /// Self-convolution of an arc indicator (the tent function).
    pub fn tent(arc: &ArcWindow, band: usize) -> Self {
        Self::from_arcs(arc, arc, band)
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn phi_zero(&self) -> Complex64 {
        self.phi_zero
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        if k.unsigned_abs() as usize > self.band {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + self.band as i64) as usize]
        }
    }

    /// Σ_{|k| > dmax} φ̂(k).
    fn tail_beyond(&self, dmax: usize) -> Complex64 {
        if self.band_limited {
            let k = self.band as i64;
            let d = dmax as i64;
            complex_sum((-k..=k).filter(|j| j.abs() > d).map(|j| self.coeff(j)))
        } else {
            self.phi_zero - complex_sum(ordered_band(dmax.min(self.band)).map(|j| self.coeff(j)))
        }
    }
}

/// Frequencies 0, 1, −1, 2, −2, … up to ±band: a fixed summation order.
fn ordered_band(band: usize) -> impl Iterator<Item = i64> {
    std::iter::once(0).chain((1..=band as i64).flat_map(|k| [k, -k]))
}

fn complex_sum(values: impl IntoIterator<Item = Complex64>) -> Complex64 {
    let v: Vec<Complex64> = values.into_iter().collect();
    Complex64::new(compensated_sum(v.iter().map(|z| z.re)), compensated_sum(v.iter().map(|z| z.im)))
}

/// W_N(d) = N − Σ_{l=0}^{N−1−d} Γ(l+d/2+1)² / (l!(l+d)!) for 0 ≤ d < N.
///
/// Summands below e^{−40} are counted as exactly zero; the first retained
/// index is located by bisection and the rest follow by a one-step recurrence.
pub(crate) fn diagonal_weight(n: usize, d: usize) -> f64 {
    if d == 0 || d >= n {
        return if d == 0 { 0.0 } else { n as f64 };
    }
    let len = n - d;
    let h = 0.5 * d as f64;
    let ln_term = |l: usize| ln_gamma_sq_ratio(l as f64 + 1.0 + h, h);
    const NEGLIGIBLE: f64 = -40.0;
    if ln_term(len - 1) <= NEGLIGIBLE {
        return n as f64;
    }
    let (mut lo, mut hi) = (0usize, len - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if ln_term(mid) > NEGLIGIBLE {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let d2 = (d * d) as f64;
    let mut ln_t = ln_term(lo);
    let mut sum = (d + lo) as f64;
    let mut comp = 0.0;
    for l in lo..len {
        let v = -ln_t.exp_m1();
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
        ln_t += (d2 / (4.0 * (l + 1) as f64 * (l + d + 1) as f64)).ln_1p();
    }
    sum + comp
}

/// Covariance from the convolved Fourier data.
pub fn cov_from_convolved(phi: &ConvolvedStatistic, n: usize) -> Result<Complex64> {
    if n == 0 {
        return domain("N must be at least 1");
    }
    let dmax = phi.band.min(n - 1);
    let weights = map_indexed(dmax + 1, |d| diagonal_weight(n, d));
    let main = complex_sum(ordered_band(dmax).map(|d| phi.coeff(d) * weights[d.unsigned_abs() as usize]));
    let out = main + phi.tail_beyond(dmax) * n as f64;
    if !(out.re.is_finite() && out.im.is_finite()) {
        return Err(Error::Domain("non-finite angular covariance".into()));
    }
    Ok(out)
}

fn check_bands(f: &FourierStatistic, g: &FourierStatistic) -> Result<()> {
    if f.band > MAX_BAND || g.band > MAX_BAND {
        return domain(format!("bands are capped at {MAX_BAND}"));
    }
    Ok(())
}

/// Cov(X(f), X(g)) (bilinear) for angular statistics X(f) = Σ f(arg z_i).
pub fn angular_cov_exact(f: &FourierStatistic, g: &FourierStatistic, n: usize) -> Result<Complex64> {
    check_bands(f, g)?;
    cov_from_convolved(&ConvolvedStatistic::from_pair(f, g), n)
}

/// Var of a complex statistic: Cov(X(f), conj X(f)).
pub fn angular_var_sesquilinear(f: &FourierStatistic, n: usize) -> Result<f64> {
    Ok(angular_cov_exact(f, &f.conj(), n)?.re)
}

/// E[X(f)] = N f̂(0).
pub fn angular_mean(f: &FourierStatistic, n: usize) -> Complex64 {
    f.coeff(0) * n as f64
}

/// Fourier coefficient Ĉ_ℓ(k) of the smoothing kernel C_ℓ.
pub fn kernel_c_fourier(l: usize, k: i64) -> f64 {
    let k = k.unsigned_abs() as usize;
    if k > 2 * l + 1 {
        return 0.0;
    }
    let lf = l as f64;
    if k % 2 == 0 {
        ln_gamma_sq_ratio(lf + 1.0, (k / 2) as f64).exp()
    } else {
        let m = (k + 1) / 2;
        ln_gamma_sq_ratio(lf + 1.5, m as f64 - 0.5).exp()
    }
}

/// C_ℓ(θ) = a(ℓ)cos^{2ℓ}θ + b(ℓ)cos^{2ℓ+1}θ, normalized to unit mass in dθ/2π.
pub fn kernel_c_eval(l: usize, theta: f64) -> f64 {
    let c = theta.cos();
    let lf = l as f64;
    if c == 0.0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    let ln_c = c.abs().ln();
    let ln_a = 2.0 * lf * 2f64.ln() + 2.0 * lgamma(lf + 1.0) - lgamma(2.0 * lf + 1.0);
    let ln_b = (2.0 * lf + 1.0) * 2f64.ln() + 2.0 * lgamma(lf + 1.5) - lgamma(2.0 * lf + 2.0);
    let even = (ln_a + 2.0 * lf * ln_c).exp();
    let odd = (ln_b + (2.0 * lf + 1.0) * ln_c).exp();
    even + c.signum() * odd
}

/// (C_ℓ ∗ φ)(0) = Σ_k Ĉ_ℓ(k) φ̂(k).
pub fn kernel_smoothing_at_zero(l: usize, phi: &ConvolvedStatistic) -> Complex64 {
    let top = (2 * l + 1).min(phi.band);
    complex_sum(ordered_band(top).map(|k| phi.coeff(k) * kernel_c_fourier(l, k)))
}

/// Splits the covariance into the kernel-smoothing main term and the
/// triangle correction: main = Nφ(0) − Σ_{ℓ<N} (C_ℓ∗φ)(0) and
/// correction = Σ_{ℓ=⌊N/2⌋}^{N−1} Σ_{2N−2ℓ−2 < |k| ≤ 2ℓ+1} Ĉ_ℓ(k)φ̂(k).
pub fn angular_cov_decomposed(f: &FourierStatistic, g: &FourierStatistic, n: usize) -> Result<(Complex64, Complex64)> {
    check_bands(f, g)?;
    decompose(&ConvolvedStatistic::from_pair(f, g), n)
}

/// Decomposition for arbitrary convolved data; indicator data must carry
/// coefficients up to |k| = 2N − 1.
pub fn decompose(phi: &ConvolvedStatistic, n: usize) -> Result<(Complex64, Complex64)> {
    if n == 0 {
        return domain("N must be at least 1");
    }
    if !phi.band_limited && phi.band < 2 * n - 1 {
        return domain(format!("indicator data needs band >= {} for N = {n}", 2 * n - 1));
    }
    let smoothed = map_indexed(n, |l| kernel_smoothing_at_zero(l, phi));
    let main = phi.phi_zero * n as f64 - complex_sum(smoothed.iter().copied());
    let corrections = map_indexed(n - n / 2, |i| {
        let l = n / 2 + i;
        let cutoff = (2 * n - 2 * l - 2) as i64;
        let top = ((2 * l + 1).min(phi.band)) as i64;
        complex_sum(
            (cutoff + 1..=top).flat_map(|k| [k, -k]).map(|k| phi.coeff(k) * kernel_c_fourier(l, k)),
        )
    });
    Ok((main, complex_sum(corrections.iter().copied())))
}

/// Var(#{i : arg z_i ∈ arc}).
pub fn angular_count_var(n: usize, arc: &ArcWindow) -> Result<f64> {
    angular_count_cov(n, arc, arc)
}

/// Cov(#arc1, #arc2).
pub fn angular_count_cov(n: usize, arc1: &ArcWindow, arc2: &ArcWindow) -> Result<f64> {
    if n == 0 {
        return domain("N must be at least 1");
    }
    let phi = ConvolvedStatistic::from_arcs(arc1, arc2, n - 1);
    Ok(cov_from_convolved(&phi, n)?.re)
}

/// E[#arc] = N · |arc| / 2π.
pub fn angular_count_mean(n: usize, arc: &ArcWindow) -> f64 {
    n as f64 * arc.len() / TWO_PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::legendre_rule;
    use proptest::prelude::*;

    fn two_cos() -> FourierStatistic {
        FourierStatistic::cos(1).unwrap().scaled(2.0)
    }

    /// Oracle: the determinantal covariance integral
    /// ∫ f g K(z,z) − ∫∫ f(z) g(w) |K(z,w)|², evaluated by brute-force
    /// quadrature in polar coordinates (Gauss–Legendre in the moduli,
    /// trapezoid in the angles, which is exact for trigonometric polynomials).
    pub(crate) fn covariance_integral_oracle(f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64, n: usize) -> f64 {
        let nf = n as f64;
        let radial = legendre_rule(120, 0.0, 8.0 / nf.sqrt()).unwrap();
        // Exact for trigonometric polynomials of degree < m.
        let m = 16;
        let angles: Vec<f64> = (0..m).map(|j| -PI + TWO_PI * j as f64 / m as f64).collect();
        let dth = TWO_PI / m as f64;
        // K(z,w) = Σ_k N^{k+1}/(π k!) (z w̄)^k e^{−N(|z|²+|w|²)/2}.
        let coef: Vec<f64> = (0..n).map(|k| nf.powi(k as i32 + 1) / (PI * (1..=k).product::<usize>() as f64)).collect();
        let kernel = |r: f64, t: f64, s: f64, u: f64| -> Complex64 {
            let z = Complex64::from_polar(r, t) * Complex64::from_polar(s, -u);
            let mut acc = Complex64::new(0.0, 0.0);
            let mut p = Complex64::new(1.0, 0.0);
            for c in &coef {
                acc += p * c;
                p *= z;
            }
            acc * (-0.5 * nf * (r * r + s * s)).exp()
        };
        let mut one = 0.0;
        let mut two = 0.0;
        for (&r, &wr) in radial.nodes.iter().zip(&radial.weights) {
            for &t in &angles {
                let diag = kernel(r, t, r, t).re;
                one += wr * r * dth * f(t) * g(t) * diag;
                for (&s, &ws) in radial.nodes.iter().zip(&radial.weights) {
                    for &u in &angles {
                        two += wr * r * dth * ws * s * dth * f(t) * g(u) * kernel(r, t, s, u).norm_sqr();
                    }
                }
            }
        }
        one - two
    }

    #[test]
    fn constant_statistic_has_zero_covariance() {
        let c = FourierStatistic::constant(3.0);
        for n in [1, 5, 100] {
            assert_eq!(angular_cov_exact(&c, &c, n).unwrap(), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn two_cos_closed_values() {
        let f = two_cos();
        assert!((angular_cov_exact(&f, &f, 1).unwrap().re - 2.0).abs() < 1e-14);
        assert!((angular_cov_exact(&f, &f, 2).unwrap().re - (4.0 - PI / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn matches_covariance_integral() {
        let f = two_cos();
        let h = |t: f64| 2.0 * t.cos();
        for n in [1, 2, 3] {
            let oracle = covariance_integral_oracle(&h, &h, n);
            let exact = angular_cov_exact(&f, &f, n).unwrap().re;
            assert!((oracle - exact).abs() < 1e-6, "n = {n}: {oracle} vs {exact}");
        }
    }

    #[test]
    fn kernel_values() {
        assert!((kernel_c_eval(0, 0.0) - (1.0 + PI / 2.0)).abs() < 1e-14);
        for l in [1, 5, 40] {
            // cos(π/2) rounds to 6e−17, so the value is only zero to rounding.
            assert!(kernel_c_eval(l, PI / 2.0).abs() < 1e-30);
            assert!((kernel_c_fourier(l, 0) - 1.0).abs() < 1e-14);
            assert_eq!(kernel_c_fourier(l, 2 * l as i64 + 2), 0.0);
            assert_eq!(kernel_c_fourier(l, 3), kernel_c_fourier(l, -3));
        }
        assert!((kernel_c_fourier(1, 1) - 9.0 * PI / 32.0).abs() < 1e-15);
        // Oracle: Ĉ_1(1) by quadrature of ∫ C_1(θ) e^{−iθ} dθ/2π.
        let q = legendre_rule(64, -PI, PI).unwrap();
        let c1 = q.integrate(|t| kernel_c_eval(1, t) * t.cos()) / TWO_PI;
        assert!((c1 - kernel_c_fourier(1, 1)).abs() < 1e-13);
    }

    #[test]
    fn kernel_has_unit_mass_and_matching_coefficients() {
        for l in [1usize, 10, 100] {
            let q = legendre_rule(400, -PI, PI).unwrap();
            let mass = q.integrate(|t| kernel_c_eval(l, t)) / TWO_PI;
            assert!((mass - 1.0).abs() < 1e-12, "l = {l}");
            for k in [1i64, 2, 5] {
                let c = q.integrate(|t| kernel_c_eval(l, t) * (k as f64 * t).cos()) / TWO_PI;
                assert!((c - kernel_c_fourier(l, k)).abs() < 1e-12, "l = {l}, k = {k}");
            }
        }
    }

    #[test]
    fn kernel_concentrates() {
        let eps = 0.3;
        let mut prev = 0.0;
        for l in [4, 16, 64, 256] {
            let q = legendre_rule(200, -eps, eps).unwrap();
            let m = q.integrate(|t| kernel_c_eval(l, t)) / TWO_PI;
            assert!(m > prev);
            prev = m;
        }
        assert!(prev > 1.0 - 1e-9);
    }

    #[test]
    fn decomposition_examples() {
        let f = two_cos();
        let (main, corr) = angular_cov_decomposed(&f, &f, 2).unwrap();
        assert!(((main + corr).re - (4.0 - PI / 2.0)).abs() < 1e-14);
        assert!((corr.re - 9.0 * PI / 16.0).abs() < 1e-14);

        let c = FourierStatistic::constant(2.0);
        for n in [1, 2, 7] {
            let (_, corr) = angular_cov_decomposed(&c, &c, n).unwrap();
            assert_eq!(corr, Complex64::new(0.0, 0.0));
        }

        // Band 1, N = 4: only (ℓ = 3, k = ±1) survives the exclusion.
        let f = FourierStatistic::from_pairs(&[(1, Complex64::new(0.3, 0.2)), (-1, Complex64::new(0.3, -0.2)), (0, Complex64::new(1.0, 0.0))], true).unwrap();
        let g = FourierStatistic::from_pairs(&[(1, Complex64::new(-0.7, 0.1)), (-1, Complex64::new(-0.7, -0.1))], true).unwrap();
        let phi = ConvolvedStatistic::from_pair(&f, &g);
        let mut brute = Complex64::new(0.0, 0.0);
        for l in 0..4usize {
            for k in -9i64..=9 {
                let excluded = l >= 2 && k.abs() > (8 - 2 * l as i64 - 2);
                if excluded {
                    brute += phi.coeff(k) * kernel_c_fourier(l, k);
                }
            }
        }
        let (_, corr) = angular_cov_decomposed(&f, &g, 4).unwrap();
        assert!((corr - brute).norm() < 1e-15);
        assert!((corr - (phi.coeff(1) + phi.coeff(-1)) * kernel_c_fourier(3, 1)).norm() < 1e-15);
    }

    #[test]
    fn decomposition_handles_odd_n_and_indicators() {
        let f = two_cos();
        for n in [1, 3, 5, 9] {
            let (m, c) = angular_cov_decomposed(&f, &f, n).unwrap();
            let exact = angular_cov_exact(&f, &f, n).unwrap();
            assert!(((m + c) - exact).norm() < 1e-12 * exact.norm(), "n = {n}");
        }
        let arc = ArcWindow::symmetric(1.3).unwrap();
        for n in [4, 7, 16] {
            let phi = ConvolvedStatistic::tent(&arc, 2 * n);
            let (m, c) = decompose(&phi, n).unwrap();
            let exact = angular_count_var(n, &arc).unwrap();
            assert!(((m + c).re - exact).abs() < 1e-11 * exact, "n = {n}");
        }
    }

    #[test]
    fn count_variance_examples() {
        assert_eq!(angular_count_var(50, &ArcWindow::full()).unwrap(), 0.0);
        let v = angular_count_var(4096, &ArcWindow::symmetric(PI / 2.0).unwrap()).unwrap();
        let pred = 64.0 / PI.powf(1.5);
        assert!((v - pred).abs() < (4096f64).ln(), "{v} vs {pred}");
        let tiny = ArcWindow::symmetric(1e-3).unwrap();
        let v = angular_count_var(10_000, &tiny).unwrap();
        let mean = angular_count_mean(10_000, &tiny);
        assert!((mean - 1.5915).abs() < 1e-3);
        assert!((v / mean - 1.0).abs() < 0.05, "{v} vs {mean}");
    }

    #[test]
    fn count_cov_consistency() {
        let a = ArcWindow::new(-1.0, 0.5).unwrap();
        let b = ArcWindow::new(0.0, 2.0).unwrap();
        let n = 200;
        assert_eq!(angular_count_cov(n, &a, &a).unwrap(), angular_count_var(n, &a).unwrap());
        let ab = angular_count_cov(n, &a, &b).unwrap();
        let ba = angular_count_cov(n, &b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn sesquilinear_variance() {
        let f = FourierStatistic::from_pairs(&[(1, Complex64::new(1.0, 0.0))], false).unwrap();
        // X(e^{iθ}) has E|X|² − |EX|² = Σ_d |φ̂| weights; bilinear variance vanishes.
        assert!(angular_cov_exact(&f, &f, 10).unwrap().norm() < 1e-15);
        let v = angular_var_sesquilinear(&f, 10).unwrap();
        assert!((v - diagonal_weight(10, 1)).abs() < 1e-13);
    }

    #[test]
    fn coefficient_files_round_trip() {
        let f = FourierStatistic::from_pairs(&[(2, Complex64::new(0.25, -0.5)), (-2, Complex64::new(0.25, 0.5)), (0, Complex64::new(1.0, 0.0))], true).unwrap();
        let g = FourierStatistic::parse(&f.to_text(), true).unwrap();
        assert_eq!(f, g);
        assert!(FourierStatistic::parse("1 0.5 0.1\n-1 0.5 0.1\n", true).is_err());
        assert!(FourierStatistic::parse("1 0.5 0.1\n-1 0.5 0.1\n", false).is_ok());
        assert!(FourierStatistic::parse("# comment\n1 x 0\n", false).is_err());
    }

    #[test]
    fn stirling_central_binomial() {
        for l in [100usize, 10_000] {
            let lf = l as f64;
            let v = (2.0 * lf * 2f64.ln() - (lgamma(2.0 * lf + 1.0) - 2.0 * lgamma(lf + 1.0))).exp();
            let approx = (PI * lf).sqrt() * (1.0 + 1.0 / (8.0 * lf));
            assert!(((v - approx) / v).abs() < 2.0 / (lf * lf));
        }
    }

    #[test]
    fn smooth_kernel_rate() {
        // |(C_ℓ∗h)(0) − h(0) − h″(0)/(4ℓ)| ≤ c ℓ^{−3/2} for h = 2cos.
        let mut worst: f64 = 0.0;
        for p in 4..=12 {
            let l = 1usize << p;
            let lhs = 2.0 * kernel_c_fourier(l, 1);
            let resid = (lhs - 2.0 + 2.0 / (4.0 * l as f64)).abs();
            worst = worst.max(resid * (l as f64).powf(1.5));
        }
        assert!(worst < 1.0, "fitted constant {worst}");
    }

    #[test]
    fn tent_corner_rate() {
        let arc = ArcWindow::symmetric(1.0).unwrap();
        for l in [64usize, 256, 1024] {
            let phi = ConvolvedStatistic::tent(&arc, 2 * l + 1);
            let err = kernel_smoothing_at_zero(l, &phi).re - arc.len() / TWO_PI;
            // The tent has slopes ±1/2π, so the corner gap is 2/2π.
            let lead = -(2.0 / TWO_PI) / (2.0 * (PI * l as f64).sqrt());
            assert!(((err - lead) / lead).abs() < 3.0 / l as f64 + 0.02, "l = {l}: {err} vs {lead}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rotation_invariance(len in 0.05f64..6.0, shift in -1.0f64..1.0, n in 1usize..300) {
            let base = angular_count_var(n, &ArcWindow::symmetric(len).unwrap()).unwrap();
            let room = PI - len / 2.0;
            let c = shift * room;
            let rotated = angular_count_var(n, &ArcWindow::new(c - len / 2.0, c + len / 2.0).unwrap()).unwrap();
            prop_assert!((base - rotated).abs() <= 1e-10 * base.max(1.0));
        }

        #[test]
        fn real_covariance_symmetric(a in prop::collection::vec(-1.0f64..1.0, 3), b in prop::collection::vec(-1.0f64..1.0, 3), n in 1usize..80) {
            let mk = |v: &[f64]| FourierStatistic::from_pairs(&[
                (0, Complex64::new(v[0], 0.0)),
                (1, Complex64::new(v[1], v[2])),
                (-1, Complex64::new(v[1], -v[2])),
            ], true).unwrap();
            let (f, g) = (mk(&a), mk(&b));
            let fg = angular_cov_exact(&f, &g, n).unwrap();
            let gf = angular_cov_exact(&g, &f, n).unwrap();
            prop_assert!((fg - gf).norm() < 1e-12);
            prop_assert!(fg.im.abs() < 1e-12);
            let vf = angular_cov_exact(&f, &f, n).unwrap().re;
            prop_assert!(vf >= -1e-12);
        }
    }
}
