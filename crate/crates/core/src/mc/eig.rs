//! Eigenvalues of dense complex matrices: Householder reduction to upper
//! Hessenberg form, then single-shift QR with Givens rotations.

use num_complex::Complex64;

use crate::error::{domain, Error, Result};

/// Largest dimension accepted by [`eig_dense`].
pub const MAX_DIM: usize = 512;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A square complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl SquareMatrix {
    pub fn new(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n * n {
            return domain(format!("expected {} entries for a {n}x{n} matrix, got {}", n * n, data.len()));
        }
        Ok(Self { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![ZERO; n * n] }
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn matmul(&self, other: &SquareMatrix) -> SquareMatrix {
        let n = self.n;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for SquareMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

/// Reduces `a` in place to upper Hessenberg form by unitary similarity.
fn hessenberg(a: &mut SquareMatrix) {
    let n = a.n;
    let mut v = vec![ZERO; n];
    let mut w = vec![ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let norm = (k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let phase = if x0.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        v[k + 1] = x0 - alpha;
        for i in k + 2..n {
            v[i] = a[(i, k)];
        }
        let vnorm = (k + 1..n).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for vi in &mut v[k + 1..n] {
            *vi /= vnorm;
        }
        // Left: rows k+1.. ← (I − 2vv*) rows, accumulated row by row.
        w[k..n].fill(ZERO);
        for i in k + 1..n {
            let vi = v[i].conj();
            let row = &a.data[i * n..(i + 1) * n];
            for (wj, &aij) in w[k..n].iter_mut().zip(&row[k..n]) {
                *wj += vi * aij;
            }
        }
        for i in k + 1..n {
            let vi = v[i] * 2.0;
            let row = &mut a.data[i * n..(i + 1) * n];
            for (aij, &wj) in row[k..n].iter_mut().zip(&w[k..n]) {
                *aij -= vi * wj;
            }
        }
        // Right: columns k+1.. ← columns (I − 2vv*).
        for row in a.data.chunks_exact_mut(n) {
            let tail = &mut row[k + 1..n];
            let dot: Complex64 = tail.iter().zip(&v[k + 1..n]).map(|(x, y)| x * y).sum();
            let s = dot * 2.0;
            for (x, y) in tail.iter_mut().zip(&v[k + 1..n]) {
                *x -= s * y.conj();
            }
        }
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = ZERO;
        }
    }
}

/// Rotation [c s; −s̄ c] mapping (x, y) to (r, 0).
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, ZERO);
    }
    if ax == 0.0 {
        return (0.0, y.conj() / ay);
    }
    let r = ax.hypot(ay);
    (ax / r, (x / ax) * y.conj() / r)
}

/// Wilkinson shift: the eigenvalue of the trailing 2×2 block closer to its last entry.
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mid = (a + d) * 0.5;
    let (l1, l2) = (mid + disc, mid - disc);
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// All eigenvalues of `a`, with multiplicity.
pub fn eig_dense(a: &SquareMatrix) -> Result<Vec<Complex64>> {
    let n = a.n;
    if n == 0 || n > MAX_DIM {
        return domain(format!("eig_dense supports dimensions 1..={MAX_DIM}, got {n}"));
    }
    if a.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return domain("matrix has non-finite entries");
    }
    let mut h = a.clone();
    hessenberg(&mut h);
    let mut eig = vec![ZERO; n];
    let max_sweeps = 30 * n;
    let mut sweeps = 0;
    let mut since_deflation = 0;
    let mut hi = n - 1;
    let mut rot = Vec::with_capacity(n);
    loop {
        if hi == 0 {
            eig[0] = h[(0, 0)];
            break;
        }
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let mut scale = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            if scale == 0.0 {
                scale = 1.0;
            }
            if sub <= f64::EPSILON * scale {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            eig[hi] = h[(hi, hi)];
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        sweeps += 1;
        if sweeps > max_sweeps {
            return Err(Error::NoConvergence { what: "shifted QR", iterations: sweeps });
        }
        since_deflation += 1;
        let mu = if since_deflation % 11 == 0 {
            // Exceptional shift breaks rare cycles.
            h[(hi, hi)] + h[(hi, hi - 1)].norm() * 0.75
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        qr_sweep(&mut h, lo, hi, mu, &mut rot);
    }
    Ok(eig)
}

/// One explicit shifted QR step H − μ = QR, H ← RQ + μ on the block lo..=hi.
fn qr_sweep(h: &mut SquareMatrix, lo: usize, hi: usize, mu: Complex64, rot: &mut Vec<(f64, Complex64)>) {
    let n = h.n;
    for i in lo..=hi {
        h[(i, i)] -= mu;
    }
    rot.clear();
    for k in lo..hi {
        let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
        rot.push((c, s));
        let (upper, lower) = h.data.split_at_mut((k + 1) * n);
        let rk = &mut upper[k * n + k..k * n + hi + 1];
        let rk1 = &mut lower[k..hi + 1];
        for (x, y) in rk.iter_mut().zip(rk1.iter_mut()) {
            let (xv, yv) = (*x, *y);
            *x = xv * c + s * yv;
            *y = yv * c - s.conj() * xv;
        }
        h[(k + 1, k)] = ZERO;
    }
    for (idx, &(c, s)) in rot.iter().enumerate() {
        let k = lo + idx;
        for i in lo..=(k + 1).min(hi) {
            let row = &mut h.data[i * n..(i + 1) * n];
            let (u, v) = (row[k], row[k + 1]);
            row[k] = u * c + v * s.conj();
            row[k + 1] = v * c - u * s;
        }
    }
    for i in lo..=hi {
        h[(i, i)] += mu;
    }
}
