//! Special functions and quadrature primitives.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{domain, Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// ζ(2)..ζ(20); higher orders are summed directly.
const ZETA: [f64; 19] = [
    1.644_934_066_848_226_4,
    1.202_056_903_159_594_3,
    1.082_323_233_711_138_2,
    1.036_927_755_143_369_9,
    1.017_343_061_984_449_1,
    1.008_349_277_381_922_8,
    1.004_077_356_197_944_3,
    1.002_008_392_826_082_2,
    1.000_994_575_127_818_1,
    1.000_494_188_604_119_5,
    1.000_246_086_553_308_0,
    1.000_122_713_347_578_5,
    1.000_061_248_135_058_7,
    1.000_030_588_236_307_0,
    1.000_015_282_259_408_7,
    1.000_007_637_197_637_9,
    1.000_003_817_293_265_0,
    1.000_001_908_212_716_6,
    1.000_000_953_962_033_9,
];

fn zeta_int(k: usize) -> f64 {
    if k <= 20 {
        ZETA[k - 2]
    } else {
        (1..=6).map(|n| (n as f64).powi(-(k as i32))).sum()
    }
}

/// ln Γ(1+z) for |z| ≤ 0.5 from the zeta series.
fn ln_gamma_1p_series(z: f64) -> f64 {
    let mut acc = -EULER_GAMMA * z;
    let mut zk = -z;
    for k in 2..90 {
        zk *= -z;
        let term = zeta_int(k) * zk / k as f64;
        acc += term;
        if term.abs() <= 1e-18 * acc.abs().max(1e-300) {
            break;
        }
    }
    acc
}

/// Stirling remainder lnΓ(x) − [(x−½)ln x − x + ½ln 2π], valid for x ≥ 10.
pub(crate) fn stirling_tail(x: f64) -> f64 {
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let r = 1.0 / x;
    let r2 = r * r;
    let mut acc = 0.0;
    for c in C.iter().rev() {
        acc = acc * r2 + c;
    }
    acc * r
}

/// ln Γ(x) for x > 0 without argument checking.
pub(crate) fn lgamma(x: f64) -> f64 {
    if x < 0.5 {
        lgamma(x + 1.0) - x.ln()
    } else if x <= 1.5 {
        ln_gamma_1p_series(x - 1.0)
    } else if x <= 2.5 {
        let z = x - 2.0;
        z.ln_1p() + ln_gamma_1p_series(z)
    } else if x < 10.0 {
        let mut y = x;
        let mut prod = 1.0;
        while y > 2.5 {
            y -= 1.0;
            prod *= y;
        }
        lgamma(y) + prod.ln()
    } else {
        (x - 0.5) * x.ln() - x + LN_SQRT_2PI + stirling_tail(x)
    }
}

/// 2 lnΓ(x) − lnΓ(x−h) − lnΓ(x+h) for 0 ≤ h < x, the logarithm of the
/// Γ-ratios that appear in every angular weight. For x − h ≥ 10 the Stirling
/// terms are combined analytically so the result keeps full relative accuracy
/// even when it is tiny.
pub(crate) fn ln_gamma_sq_ratio(x: f64, h: f64) -> f64 {
    if h == 0.0 {
        return 0.0;
    }
    if x - h >= 10.0 {
        let u = h / x;
        -(x - 0.5) * (-u * u).ln_1p() - 2.0 * h * u.atanh() + 2.0 * stirling_tail(x)
            - stirling_tail(x - h)
            - stirling_tail(x + h)
    } else {
        2.0 * lgamma(x) - lgamma(x - h) - lgamma(x + h)
    }
}

/// Natural log of the gamma function.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("log_gamma requires a finite x > 0, got {x}"));
    }
    Ok(lgamma(x))
}

/// t − ln(1+t), accurate near t = 0.
pub(crate) fn t_minus_log1p(t: f64) -> f64 {
    if t.abs() < 0.25 {
        let mut acc = 0.0;
        let mut tn = -t;
        for n in 2..60 {
            tn *= -t;
            let term = tn / n as f64;
            acc += term;
            if term.abs() <= 1e-18 * acc.abs() {
                break;
            }
        }
        acc
    } else {
        t - t.ln_1p()
    }
}

/// ln(x^a e^{−x} / Γ(a+1)).
pub(crate) fn ln_gamma_prefactor(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    if a >= 10.0 {
        let t = (x - a) / a;
        -a * t_minus_log1p(t) - 0.5 * (2.0 * PI * a).ln() - stirling_tail(a)
    } else {
        a * x.ln() - x - lgamma(a + 1.0)
    }
}

fn lower_series(a: f64, x: f64) -> Result<f64> {
    let pre = ln_gamma_prefactor(a, x);
    if pre < -745.0 {
        return Ok(0.0);
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut denom = a;
    for _ in 0..1_000_000 {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term < sum * 1e-17 {
            return Ok((pre.exp() * sum).min(1.0));
        }
    }
    Err(Error::NoConvergence { what: "incomplete gamma series", iterations: 1_000_000 })
}

fn upper_fraction(a: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let pre = ln_gamma_prefactor(a, x);
    if pre < -745.0 {
        return Ok(0.0);
    }
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1_000_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            return Ok((pre.exp() * a * h).min(1.0));
        }
    }
    Err(Error::NoConvergence { what: "incomplete gamma continued fraction", iterations: 1_000_000 })
}

/// Returns (P(a,x), Q(a,x)); the smaller-error member is computed directly
/// and the other as its complement.
pub(crate) fn gamma_pq(a: f64, x: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) || !(x >= 0.0) || a.is_infinite() {
        return domain(format!("incomplete gamma requires a > 0 and x >= 0, got a = {a}, x = {x}"));
    }
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x.is_infinite() {
        return Ok((1.0, 0.0));
    }
    if x < a + 1.0 {
        let p = lower_series(a, x)?;
        Ok((p, 1.0 - p))
    } else {
        let q = upper_fraction(a, x)?;
        Ok((1.0 - q, q))
    }
}

/// Regularized lower incomplete gamma function P(k, x).
pub fn regularized_gamma_lower(k: f64, x: f64) -> Result<f64> {
    gamma_pq(k, x).map(|(p, _)| p)
}

/// Regularized upper incomplete gamma function Q(k, x).
pub fn regularized_gamma_upper(k: f64, x: f64) -> Result<f64> {
    gamma_pq(k, x).map(|(_, q)| q)
}

/// Probability that a Gamma(k, 1) variable lies in [lo, hi], together with the
/// complementary probability, each computed without cancellation.
pub fn gamma_interval_split(k: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return domain(format!("interval requires lo <= hi, got [{lo}, {hi}]"));
    }
    if lo < 0.0 {
        return domain(format!("interval must be nonnegative, got lo = {lo}"));
    }
    let (p_lo, q_lo) = gamma_pq(k, lo)?;
    let (p_hi, q_hi) = gamma_pq(k, hi)?;
    let inside = if hi < k + 1.0 {
        p_hi - p_lo
    } else if lo >= k + 1.0 {
        q_lo - q_hi
    } else {
        1.0 - p_lo - q_hi
    };
    let outside = p_lo + q_hi;
    Ok((inside.clamp(0.0, 1.0), outside.clamp(0.0, 1.0)))
}

/// P(lo ≤ s ≤ hi) for s ~ Gamma(k, 1), i.e. a sum of k unit exponentials.
pub fn gamma_interval_prob(k: f64, lo: f64, hi: f64) -> Result<f64> {
    gamma_interval_split(k, lo, hi).map(|(p, _)| p)
}

/// Stirling number of the second kind S(n, k), exact for n ≤ 30.
pub fn stirling2(n: u32, k: u32) -> Result<u128> {
    if n > 30 {
        return Err(Error::Overflow(format!("stirling2 supports n <= 30, got n = {n}")));
    }
    if k > n {
        return Ok(0);
    }
    let n = n as usize;
    let k = k as usize;
    let mut row = vec![0u128; k + 1];
    row[0] = 1;
    for i in 1..=n {
        for j in (1..=k.min(i)).rev() {
            row[j] = j as u128 * row[j] + row[j - 1];
        }
        row[0] = 0;
    }
    Ok(row[k])
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Standard normal distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal survival function 1 − Φ(x).
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// A Gauss–Legendre rule on a finite interval.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub interval: (f64, f64),
}

impl QuadratureRule {
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// The same rule affinely mapped to [lo, hi].
    pub fn mapped(&self, lo: f64, hi: f64) -> QuadratureRule {
        let (a, b) = self.interval;
        let scale = (hi - lo) / (b - a);
        QuadratureRule {
            nodes: self.nodes.iter().map(|&x| lo + (x - a) * scale).collect(),
            weights: self.weights.iter().map(|&w| w * scale).collect(),
            interval: (lo, hi),
        }
    }
}

/// Legendre polynomial P_n(x) and its derivative.
fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

fn legendre_canonical(n: usize) -> QuadratureRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_eval(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_eval(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    QuadratureRule { nodes, weights, interval: (-1.0, 1.0) }
}

/// n-point Gauss–Legendre rule on [lo, hi].
pub fn legendre_rule(n: usize, lo: f64, hi: f64) -> Result<QuadratureRule> {
    if n < 2 {
        return domain(format!("legendre_rule needs at least 2 nodes, got {n}"));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return domain(format!("legendre_rule needs a finite interval lo < hi, got [{lo}, {hi}]"));
    }
    Ok(legendre_canonical(n).mapped(lo, hi))
}

/// Cached 64-point rule on [−1, 1], the panel rule of all composite quadratures.
pub(crate) fn panel_rule() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| legendre_canonical(64))
}

/// Composite 64-point Gauss–Legendre over `panels` equal panels of [lo, hi],
/// returning (node, weight) pairs.
pub(crate) fn composite_nodes(lo: f64, hi: f64, panels: usize) -> Vec<(f64, f64)> {
    let rule = panel_rule();
    let width = (hi - lo) / panels as f64;
    let mut out = Vec::with_capacity(panels * rule.nodes.len());
    for p in 0..panels {
        let a = lo + p as f64 * width;
        let mid = a + 0.5 * width;
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            out.push((mid + 0.5 * width * x, 0.5 * width * w));
        }
    }
    out
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * GK_WEIGHTS[7];
    let mut g = fc * G7_WEIGHTS[3];
    for i in 0..7 {
        let s = f(c - h * GK_NODES[i]) + f(c + h * GK_NODES[i]);
        k += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += G7_WEIGHTS[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss–Kronrod (7/15) integration to an absolute
/// tolerance: the panel with the largest error estimate is bisected until the
/// summed estimate falls below `abs_tol`.
pub fn integrate_adaptive(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    const MAX_PANELS: usize = 4000;
    if !(a.is_finite() && b.is_finite()) {
        return domain("integrate_adaptive requires a finite interval");
    }
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = kronrod15(&mut f, a, b);
    let mut panels = vec![(a, b, v, e)];
    loop {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        let total: f64 = crate::exec::compensated_sum(panels.iter().map(|p| p.2));
        if total_err <= abs_tol || total_err <= 1e-15 * total.abs() {
            return Ok(total);
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::NoConvergence { what: "adaptive quadrature", iterations: panels.len() });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = kronrod15(&mut f, lo, mid);
        let (v2, e2) = kronrod15(&mut f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
}
