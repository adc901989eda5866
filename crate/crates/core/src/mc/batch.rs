//! Replica batches: evaluation of several statistics on shared samples,
//! exact reference values, and binary/CSV persistence.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{estimate_cov, sample_ginibre_eigenvalues, sample_radial_moduli, RngStream, GENERATOR};
use crate::angular::{angular_count_cov, angular_count_mean, angular_cov_exact, angular_mean, ArcWindow, FourierStatistic};
use crate::error::{domain, Error, Result};
use crate::exec::map_indexed;
use crate::radial::{radial_cov_exact, radial_mean_exact, Ensemble, RadialTestFunction};

pub const BATCH_MAGIC: [u8; 4] = *b"GNBB";
pub const BATCH_VERSION: u32 = 1;

/// A linear statistic evaluated on each replica.
#[derive(Debug, Clone)]
pub enum Statistic {
    /// Σ f(|z_i|).
    Radial(RadialTestFunction),
    /// Σ f(arg z_i) for a real Fourier statistic.
    Angular(FourierStatistic),
    /// #{i : arg z_i ∈ arc}.
    ArcCount(ArcWindow),
}

impl Statistic {
    pub fn needs_angles(&self) -> bool {
        !matches!(self, Statistic::Radial(_))
    }

    pub fn label(&self) -> String {
        match self {
            Statistic::Radial(RadialTestFunction::Polynomial(c)) => {
                let parts: Vec<String> = c.iter().map(|x| x.to_string()).collect();
                format!("poly:{}", parts.join(","))
            }
            Statistic::Radial(RadialTestFunction::Indicator(w)) => format!("ind-mod:{},{}", w.a, w.b),
            Statistic::Radial(RadialTestFunction::Callable(_)) => "callable".into(),
            Statistic::Angular(f) => format!("fourier:band={}", f.band()),
            Statistic::ArcCount(a) => format!("ind-arg:{},{}", a.lo, a.hi),
        }
    }

    fn on_moduli(&self, r: &[f64]) -> f64 {
        match self {
            Statistic::Radial(f) => r.iter().map(|&x| f.eval(x)).sum(),
            _ => unreachable!("angular statistics are evaluated on eigenvalues"),
        }
    }

    fn on_points(&self, z: &[Complex64]) -> f64 {
        match self {
            Statistic::Radial(f) => z.iter().map(|w| f.eval(w.norm())).sum(),
            Statistic::Angular(f) => z.iter().map(|w| f.eval_real(w.arg())).sum(),
            Statistic::ArcCount(a) => z.iter().filter(|w| a.contains(w.arg())).count() as f64,
        }
    }

    /// Exact E[X].
    pub fn exact_mean(&self, n: usize, ens: Ensemble) -> Result<f64> {
        match (self, ens) {
            (Statistic::Radial(f), _) => radial_mean_exact(f, n, ens),
            (Statistic::Angular(f), Ensemble::Complex) => Ok(angular_mean(f, n).re),
            (Statistic::ArcCount(a), Ensemble::Complex) => Ok(angular_count_mean(n, a)),
            _ => domain("angular statistics are only available for the complex ensemble"),
        }
    }

    /// Exact Cov(X, Y). Radial and angular statistics are uncorrelated by rotation invariance.
    pub fn exact_cov(&self, other: &Statistic, n: usize, ens: Ensemble) -> Result<f64> {
        use Statistic::*;
        if ens == Ensemble::Quaternion && (self.needs_angles() || other.needs_angles()) {
            return domain("angular statistics are only available for the complex ensemble");
        }
        match (self, other) {
            (Radial(f), Radial(g)) => radial_cov_exact(f, g, n, ens),
            (Radial(_), _) | (_, Radial(_)) => Ok(0.0),
            (Angular(f), Angular(g)) => Ok(angular_cov_exact(f, g, n)?.re),
            (ArcCount(a), ArcCount(b)) => angular_count_cov(n, a, b),
            (Angular(f), ArcCount(a)) | (ArcCount(a), Angular(f)) => {
                let band = f.band();
                let coeffs = (-(band as i64)..=band as i64).map(|k| a.fourier(k)).collect();
                let arc = FourierStatistic::new(coeffs, true)?;
                Ok(angular_cov_exact(f, &arc, n)?.re)
            }
        }
    }
}

/// Which sampler produces the replicas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Gamma representation unless some statistic needs angles.
    #[default]
    Auto,
    Gamma,
    Matrix,
}

impl Sampler {
    fn tag(self) -> u32 {
        match self {
            Sampler::Auto => 0,
            Sampler::Gamma => 1,
            Sampler::Matrix => 2,
        }
    }

    fn from_tag(tag: u32) -> Option<Self> {
        [Sampler::Auto, Sampler::Gamma, Sampler::Matrix].into_iter().find(|s| s.tag() == tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n: usize,
    pub ensemble: Ensemble,
    pub samples: usize,
    pub seed: u64,
    pub sampler: Sampler,
}

/// Per-replica values of several statistics with the provenance needed to reproduce them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub n: usize,
    pub ensemble: Ensemble,
    pub seed: u64,
    pub samples: usize,
    pub sampler: Sampler,
    pub generator: String,
    pub code_version: String,
    pub labels: Vec<String>,
    /// values[statistic][replica].
    pub values: Vec<Vec<f64>>,
}

/// Draws `config.samples` replicas and evaluates every statistic on each.
/// Replica i uses stream i of the seed, so results do not depend on the
/// thread count.
pub fn run_batch(config: &McConfig, statistics: &[Statistic]) -> Result<SampleBatch> {
    if config.samples == 0 {
        return domain("need at least one replica");
    }
    if statistics.is_empty() {
        return domain("need at least one statistic");
    }
    let angles = statistics.iter().any(Statistic::needs_angles);
    let use_matrix = match config.sampler {
        Sampler::Matrix => true,
        Sampler::Gamma if angles => return domain("the gamma sampler only produces moduli"),
        Sampler::Gamma => false,
        Sampler::Auto => angles,
    };
    if use_matrix && config.ensemble == Ensemble::Quaternion {
        return domain("the matrix sampler covers the complex ensemble only");
    }
    if let Some(f) = statistics.iter().find_map(|s| match s {
        Statistic::Angular(f) if !f.is_real() => Some(f),
        _ => None,
    }) {
        return domain(format!("Monte Carlo needs real angular statistics (band {})", f.band()));
    }
    let n = config.n;
    let rows = map_indexed(config.samples, |replica| -> Result<Vec<f64>> {
        let mut rng = RngStream::new(config.seed, replica as u64).rng();
        if use_matrix {
            let z = sample_ginibre_eigenvalues(n, &mut rng).map_err(|e| Error::Replica {
                seed: config.seed,
                replica: replica as u64,
                source: Box::new(e),
            })?;
            Ok(statistics.iter().map(|s| s.on_points(&z)).collect())
        } else {
            let r = sample_radial_moduli(n, config.ensemble, &mut rng)?;
            Ok(statistics.iter().map(|s| s.on_moduli(&r)).collect())
        }
    });
    let mut values = vec![Vec::with_capacity(config.samples); statistics.len()];
    for row in rows {
        for (col, v) in values.iter_mut().zip(row?) {
            col.push(v);
        }
    }
    Ok(SampleBatch {
        n,
        ensemble: config.ensemble,
        seed: config.seed,
        samples: config.samples,
        sampler: if use_matrix { Sampler::Matrix } else { Sampler::Gamma },
        generator: GENERATOR.into(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        labels: statistics.iter().map(Statistic::label).collect(),
        values,
    })
}

fn put_str(out: &mut impl Write, s: &str) -> io::Result<()> {
    out.write_all(&(s.len() as u32).to_le_bytes())?;
    out.write_all(s.as_bytes())
}

fn get_u32(input: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64(input: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_str(input: &mut impl Read) -> Result<String> {
    let len = get_u32(input)? as usize;
    if len > 1 << 20 {
        return Err(Error::Format(format!("string field of {len} bytes")));
    }
    let mut b = vec![0u8; len];
    input.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|e| Error::Format(e.to_string()))
}

impl SampleBatch {
    pub fn mean(&self, stat: usize) -> Result<(f64, f64)> {
        super::estimate_mean(&self.values[stat])
    }

    pub fn cov(&self, a: usize, b: usize) -> Result<(f64, f64)> {
        estimate_cov(&self.values[a], &self.values[b])
    }

    /// Header (magic, version, N, ensemble tag, seed, S, sampler tag, statistic
    /// count, generator, code version, labels) followed by the values as
    /// little-endian f64, statistic-major.
    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        out.write_all(&BATCH_MAGIC)?;
        out.write_all(&BATCH_VERSION.to_le_bytes())?;
        out.write_all(&(self.n as u64).to_le_bytes())?;
        out.write_all(&self.ensemble.tag().to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        out.write_all(&(self.samples as u64).to_le_bytes())?;
        out.write_all(&self.sampler.tag().to_le_bytes())?;
        out.write_all(&(self.labels.len() as u32).to_le_bytes())?;
        put_str(out, &self.generator)?;
        put_str(out, &self.code_version)?;
        for label in &self.labels {
            put_str(out, label)?;
        }
        for col in &self.values {
            for v in col {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(input: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if magic != BATCH_MAGIC {
            return Err(Error::Format("not a sample batch (bad magic)".into()));
        }
        let version = get_u32(input)?;
        if version != BATCH_VERSION {
            return Err(Error::Format(format!("unsupported batch version {version}")));
        }
        let n = get_u64(input)? as usize;
        let tag = get_u32(input)?;
        let ensemble = Ensemble::from_tag(tag).ok_or_else(|| Error::Format(format!("unknown ensemble tag {tag}")))?;
        let seed = get_u64(input)?;
        let samples = get_u64(input)? as usize;
        let tag = get_u32(input)?;
        let sampler = Sampler::from_tag(tag).ok_or_else(|| Error::Format(format!("unknown sampler tag {tag}")))?;
        let count = get_u32(input)? as usize;
        if samples == 0 || count == 0 {
            return Err(Error::Format("empty batch".into()));
        }
        let generator = get_str(input)?;
        let code_version = get_str(input)?;
        let labels = (0..count).map(|_| get_str(input)).collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(count);
        let mut buf = vec![0u8; 8 * samples];
        for _ in 0..count {
            input.read_exact(&mut buf)?;
            values.push(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect());
        }
        Ok(Self { n, ensemble, seed, samples, sampler, generator, code_version, labels, values })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(&mut io::BufReader::new(fs::File::open(path)?))
    }

    /// One row per replica; labels are quoted since they contain commas.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("replica");
        for label in &self.labels {
            out.push_str(&format!(",\"{}\"", label.replace('"', "\"\"")));
        }
        out.push('\n');
        for i in 0..self.samples {
            out.push_str(&i.to_string());
            for col in &self.values {
                out.push_str(&format!(",{:e}", col[i]));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::run_sequential;

    fn config(n: usize, samples: usize, seed: u64) -> McConfig {
        McConfig { n, ensemble: Ensemble::Complex, samples, seed, sampler: Sampler::Auto }
    }

    #[test]
    fn batches_are_deterministic_across_thread_modes() {
        let stats = [
            Statistic::Radial(RadialTestFunction::monomial(2)),
            Statistic::ArcCount(ArcWindow::symmetric(1.0).unwrap()),
        ];
        let cfg = config(12, 64, 99);
        let par = run_batch(&cfg, &stats).unwrap();
        let seq = run_sequential(|| run_batch(&cfg, &stats).unwrap());
        let mut a = Vec::new();
        let mut b = Vec::new();
        par.write_to(&mut a).unwrap();
        seq.write_to(&mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(par.sampler, Sampler::Matrix);
    }

    #[test]
    fn persistence_round_trip() {
        let stats = [Statistic::Radial(RadialTestFunction::indicator(0.4, 0.8).unwrap())];
        let batch = run_batch(&config(30, 20, 1), &stats).unwrap();
        let mut bytes = Vec::new();
        batch.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"GNBB");
        let back = SampleBatch::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, batch);
        bytes[0] = b'X';
        assert!(matches!(SampleBatch::read_from(&mut bytes.as_slice()), Err(Error::Format(_))));
        let csv = batch.to_csv();
        assert_eq!(csv.lines().count(), 21);
        assert!(csv.starts_with("replica,\"ind-mod:0.4,0.8\""));
    }

    #[test]
    fn sampler_choices() {
        let arc = [Statistic::ArcCount(ArcWindow::symmetric(1.0).unwrap())];
        let gamma = McConfig { sampler: Sampler::Gamma, ..config(4, 2, 0) };
        assert!(run_batch(&gamma, &arc).is_err());
        let quaternion = McConfig { ensemble: Ensemble::Quaternion, ..config(4, 2, 0) };
        assert!(run_batch(&quaternion, &arc).is_err());
        let complex = FourierStatistic::from_pairs(&[(1, Complex64::new(1.0, 0.0))], false).unwrap();
        assert!(run_batch(&config(4, 2, 0), &[Statistic::Angular(complex)]).is_err());
    }

    #[test]
    fn matrix_and_gamma_samplers_agree_on_counts() {
        let stats = [Statistic::Radial(RadialTestFunction::indicator(0.4, 0.8).unwrap())];
        let n = 64;
        let exact = stats[0].exact_mean(n, Ensemble::Complex).unwrap();
        let matrix = run_batch(&McConfig { sampler: Sampler::Matrix, ..config(n, 20_000, 4) }, &stats).unwrap();
        let (mean, se) = matrix.mean(0).unwrap();
        assert!((mean - exact).abs() < 3.0 * se, "{mean} ± {se} vs {exact}");
    }

    #[test]
    fn angular_covariance_against_exact() {
        let f = FourierStatistic::cos(1).unwrap().scaled(2.0);
        let stats = [Statistic::Angular(f.clone())];
        let n = 32;
        let batch = run_batch(&config(n, 20_000, 21), &stats).unwrap();
        let (cov, se) = batch.cov(0, 0).unwrap();
        let exact = stats[0].exact_cov(&stats[0], n, Ensemble::Complex).unwrap();
        assert!((cov - exact).abs() < 3.0 * se, "{cov} ± {se} vs {exact}");
    }

    #[test]
    fn mixed_exact_covariances() {
        let arc = ArcWindow::new(-0.5, 1.0).unwrap();
        let f = FourierStatistic::cos(2).unwrap();
        let n = 9;
        let mixed = Statistic::Angular(f.clone()).exact_cov(&Statistic::ArcCount(arc), n, Ensemble::Complex).unwrap();
        let via_arc = Statistic::ArcCount(arc).exact_cov(&Statistic::Angular(f), n, Ensemble::Complex).unwrap();
        assert!((mixed - via_arc).abs() < 1e-14);
        let radial = Statistic::Radial(RadialTestFunction::monomial(2));
        assert_eq!(radial.exact_cov(&Statistic::ArcCount(arc), n, Ensemble::Complex).unwrap(), 0.0);
    }
}
