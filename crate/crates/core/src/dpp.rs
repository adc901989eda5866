//! Gram operators of the finite-N projection kernel restricted to annuli and
//! sectors, and counting cumulants computed from their traces.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angular::ArcWindow;
use crate::error::{domain, Error, Result};
use crate::exec::{compensated_sum, map_indexed};
use crate::radial::{radial_count_split, Ensemble, ModulusWindow};
use crate::specfun::{ln_gamma_sq_ratio, stirling2};

/// Highest cumulant order supported.
pub const MAX_ORDER: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    Diagonal,
    Sector,
    Dense,
}

#[derive(Debug, Clone)]
enum Entries {
    /// Eigenvalues p together with their complements 1 − p.
    Diagonal { p: Vec<f64>, q: Vec<f64> },
    /// Row-major Hermitian matrix.
    Dense(Vec<Complex64>),
}

/// G_{ℓm} = ∫_A ψ_ℓ conj(ψ_m) for the orthonormal ψ_ℓ ∝ z^ℓ e^{−N|z|²/2}.
#[derive(Debug, Clone)]
pub struct GramOperator {
    dim: usize,
    structure: Structure,
    entries: Entries,
}

impl GramOperator {
    /// Diagonal operator with the given eigenvalues.
    pub fn diagonal(p: Vec<f64>) -> Result<Self> {
        check_probabilities(&p)?;
        let q = p.iter().map(|&x| 1.0 - x).collect();
        Self::diagonal_split(p, q)
    }

    fn diagonal_split(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return domain("Gram operator needs dimension >= 1");
        }
        Ok(Self { dim: p.len(), structure: Structure::Diagonal, entries: Entries::Diagonal { p, q } })
    }

    /// Dense Hermitian operator from row-major entries.
    pub fn dense(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return domain(format!("dense Gram operator needs {dim}x{dim} entries, got {}", entries.len()));
        }
        let scale = entries.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for i in 0..dim {
            for j in 0..=i {
                if (entries[i * dim + j] - entries[j * dim + i].conj()).norm() > 1e-12 * scale {
                    return domain(format!("Gram operator is not Hermitian at ({i}, {j})"));
                }
            }
        }
        Ok(Self { dim, structure: Structure::Dense, entries: Entries::Dense(entries) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        match &self.entries {
            Entries::Diagonal { p, .. } => {
                if i == j {
                    Complex64::new(p[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            Entries::Dense(m) => m[i * self.dim + j],
        }
    }

    /// Row-major copy of the full matrix.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let n = self.dim;
        (0..n * n).map(|idx| self.entry(idx / n, idx % n)).collect()
    }

    pub fn trace(&self) -> f64 {
        match &self.entries {
            Entries::Diagonal { p, .. } => compensated_sum(p.iter().copied()),
            Entries::Dense(m) => compensated_sum((0..self.dim).map(|i| m[i * self.dim + i].re)),
        }
    }

    /// D_j = Tr(G^{j−1}(G − G²)) for j = 1..=count; Tr G^k = Tr G − Σ_{j<k} D_j.
    pub fn trace_defects(&self, count: usize) -> Vec<f64> {
        match &self.entries {
            Entries::Diagonal { p, q } => (0..count)
                .map(|j| compensated_sum(p.iter().zip(q).map(|(&x, &y)| x.powi(j as i32 + 1) * y)))
                .collect(),
            Entries::Dense(g) => {
                let n = self.dim;
                let g2 = hermitian_product(g, g, n);
                let mut m: Vec<Complex64> = g.iter().zip(&g2).map(|(a, b)| a - b).collect();
                let mut out = Vec::with_capacity(count);
                for j in 0..count {
                    if j > 0 {
                        m = hermitian_product(g, &m, n);
                    }
                    out.push(compensated_sum((0..n).map(|i| m[i * n + i].re)));
                }
                out
            }
        }
    }
}

fn check_probabilities(p: &[f64]) -> Result<()> {
    match p.iter().position(|x| !(0.0..=1.0).contains(x)) {
        Some(i) => domain(format!("probability p[{i}] = {} outside [0, 1]", p[i])),
        None => Ok(()),
    }
}

/// a·b for row-major n×n matrices whose product is Hermitian, symmetrized.
fn hermitian_product(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let rows = map_indexed(n, |i| {
        let mut row = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (r, bkj) in row.iter_mut().zip(&b[k * n..(k + 1) * n]) {
                *r += aik * bkj;
            }
        }
        row
    });
    let mut out: Vec<Complex64> = rows.into_iter().flatten().collect();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (out[i * n + j] + out[j * n + i].conj());
            out[i * n + j] = avg;
            out[j * n + i] = avg.conj();
        }
        out[i * n + i].im = 0.0;
    }
    out
}

/// Gram operator of the annulus a ≤ |z| ≤ b: diagonal with the level probabilities.
pub fn gram_annulus(n: usize, a: f64, b: f64) -> Result<GramOperator> {
    let w = ModulusWindow::new(a, b)?;
    let (p, q) = radial_count_split(n, &w, Ensemble::Complex)?.into_iter().unzip();
    GramOperator::diagonal_split(p, q)
}

/// Gram operator of the sector arg z ∈ arc.
pub fn gram_sector(n: usize, arc: &ArcWindow) -> Result<GramOperator> {
    if n == 0 {
        return domain("N must be at least 1");
    }
    if arc.len() <= 0.0 {
        return domain("sector needs a nonempty arc");
    }
    let rows = map_indexed(n, |l| {
        (0..n)
            .map(|m| {
                let d = l.abs_diff(m) as f64;
                let x = 0.5 * (l + m) as f64 + 1.0;
                // Γ((ℓ+m)/2 + 1)/√(ℓ! m!) in log space.
                let radial = (0.5 * ln_gamma_sq_ratio(x, 0.5 * d)).exp();
                arc.fourier(m as i64 - l as i64) * radial
            })
            .collect::<Vec<_>>()
    });
    let entries = rows.into_iter().flatten().collect();
    Ok(GramOperator { dim: n, structure: Structure::Sector, entries: Entries::Dense(entries) })
}

/// Cluster integrals U_k and cumulants C_n of a counting statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantSet {
    pub order: usize,
    /// U_1..U_order.
    pub u: Vec<f64>,
    /// C_1..C_order.
    pub c: Vec<f64>,
}

impl CumulantSet {
    pub fn mean(&self) -> f64 {
        self.c[0]
    }

    pub fn variance(&self) -> Option<f64> {
        self.c.get(1).copied()
    }
}

/// A_{n,j} = Σ_{k>j} S(n,k)(−1)^{k−1}(k−1)!, so that C_n = −Σ_{j<n} A_{n,j} D_j.
fn defect_weights(n: usize) -> Vec<i128> {
    let signed_factorial = |k: usize| {
        let f: i128 = (1..k as i128).product();
        if k % 2 == 1 {
            f
        } else {
            -f
        }
    };
    (1..n)
        .map(|j| {
            (j + 1..=n)
                .map(|k| stirling2(n as u32, k as u32).expect("order is capped") as i128 * signed_factorial(k))
                .sum()
        })
        .collect()
}

fn check_order(n_max: usize) -> Result<()> {
    if n_max == 0 || n_max > MAX_ORDER {
        return domain(format!("cumulant order must be in 1..={MAX_ORDER}, got {n_max}"));
    }
    Ok(())
}

fn assemble(trace: f64, defects: &[f64], n_max: usize) -> CumulantSet {
    let mut u = Vec::with_capacity(n_max);
    let mut power_trace = trace;
    let mut factorial = 1.0;
    for k in 1..=n_max {
        if k > 1 {
            power_trace -= defects[k - 2];
            factorial *= (k - 1) as f64;
        }
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        u.push(sign * factorial * power_trace);
    }
    // Expanding Tr G^k in the defects cancels the Tr G terms for n ≥ 2, which
    // keeps the cumulants accurate when the U_k are large.
    let mut c = vec![trace];
    for n in 2..=n_max {
        let weights = defect_weights(n);
        c.push(-compensated_sum(weights.iter().zip(defects).map(|(&a, &d)| a as f64 * d)));
    }
    CumulantSet { order: n_max, u, c }
}

/// Cumulants of the count of a determinantal field with Gram operator G.
pub fn cumulants_from_gram(g: &GramOperator, n_max: usize) -> Result<CumulantSet> {
    check_order(n_max)?;
    let defects = g.trace_defects(n_max.saturating_sub(1));
    Ok(assemble(g.trace(), &defects, n_max))
}

/// Cumulants of a sum of independent Bernoulli(p_k) variables.
pub fn cumulants_permanental(p: &[f64], n_max: usize) -> Result<CumulantSet> {
    cumulants_from_gram(&GramOperator::diagonal(p.to_vec())?, n_max)
}

/// Cumulants of the annulus count for either ensemble; the moduli are
/// independent, so the count is a Bernoulli sum with the level probabilities.
pub fn radial_count_cumulants(n: usize, a: f64, b: f64, ens: Ensemble, n_max: usize) -> Result<CumulantSet> {
    check_order(n_max)?;
    let w = ModulusWindow::new(a, b)?;
    let (p, q) = radial_count_split(n, &w, ens)?.into_iter().unzip();
    cumulants_from_gram(&GramOperator::diagonal_split(p, q)?, n_max)
}

/// Normalized higher cumulants and the trace-bound witness of a cumulant set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CltReport {
    pub variance: f64,
    /// C_n / C_2^{n/2} for n = 3..=order.
    pub normalized: Vec<f64>,
    /// max_n |C_n| / (C_2 Σ_j |A_{n,j}|); at most 1 whenever 0 ≤ G ≤ 1.
    pub bound_witness: f64,
    pub tolerance: f64,
    pub clt_consistent: bool,
}

/// Checks that the normalized cumulants of order ≥ 3 are below `tolerance`.
pub fn clt_certificate(cs: &CumulantSet, tolerance: f64) -> Result<CltReport> {
    let variance = match cs.variance() {
        Some(v) if v > 0.0 => v,
        Some(v) => return Err(Error::Degenerate(format!("variance {v} is not positive"))),
        None => return domain("CLT certificate needs cumulants up to order >= 2"),
    };
    let normalized: Vec<f64> = (3..=cs.order).map(|n| cs.c[n - 1] / variance.powf(0.5 * n as f64)).collect();
    let bound_witness = (2..=cs.order)
        .map(|n| {
            let total: f64 = defect_weights(n).iter().map(|a| a.unsigned_abs() as f64).sum();
            cs.c[n - 1].abs() / (variance * total)
        })
        .fold(0.0, f64::max);
    Ok(CltReport {
        variance,
        clt_consistent: normalized.iter().all(|x| x.abs() <= tolerance),
        normalized,
        bound_witness,
        tolerance,
    })
}
