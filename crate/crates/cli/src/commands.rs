use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use ginibre::angular::{
    angular_count_cov, angular_count_mean, angular_count_var, angular_cov_decomposed, angular_cov_exact,
    kernel_c_eval, kernel_c_fourier, kernel_smoothing_at_zero, ArcWindow, ConvolvedStatistic, FourierStatistic,
};
use ginibre::asymptotics::{
    angular_smooth_coeff, angular_smooth_prediction, count_var_prediction, edgeworth_density, i_arg, i_mod,
    radial_smooth_limit, Window,
};
use ginibre::dpp::{clt_certificate, cumulants_from_gram, gram_sector, radial_count_cumulants, CumulantSet, GramOperator};
use ginibre::mc::{ks_normal_test, run_batch, McConfig, RngStream, Statistic};
use ginibre::radial::{radial_count_cov, radial_count_var, radial_cov_exact, radial_mean_exact, Ensemble, ModulusWindow, RadialTestFunction};
use ginibre::specfun::log_gamma;
use rand::Rng;

use crate::report::Report;
use crate::row;
use crate::spec::{Pair, Spec, SpecError, StatSpec};
use crate::{
    AsymptoticsCmd, CltCmd, Command, CountCmd, CovCmd, CumulantsArgs, KernelCmd, Kind, McArgs, McCmd, Profile,
    WindowArgs,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(ginibre::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use ginibre::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(E::Domain(_) | E::Window(_) | E::Format(_)) => 2,
            CliError::Lib(E::Io(_)) => 1,
            CliError::Lib(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => e.fmt(f),
        }
    }
}

impl From<ginibre::Error> for CliError {
    fn from(e: ginibre::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<SpecError> for CliError {
    fn from(e: SpecError) -> Self {
        CliError::Usage(e.0)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Usage(msg.into()))
}

pub fn run(command: &Command, report: &mut Report) -> Result<()> {
    match command {
        Command::Cov(CovCmd::Radial { n, f, g, ensemble, compare_asymptotic }) => {
            cov_radial(report, n, f, g.as_ref().unwrap_or(f), (*ensemble).into(), *compare_asymptotic)
        }
        Command::Cov(CovCmd::Angular { n, f, g, decompose, compare_asymptotic }) => {
            cov_angular(report, n, f, g.as_ref().unwrap_or(f), *decompose, *compare_asymptotic)
        }
        Command::Count(CountCmd::Var { n, window, ensemble, compare_asymptotic }) => {
            count_var(report, n, window, (*ensemble).into(), *compare_asymptotic)
        }
        Command::Count(CountCmd::Cov { n, window, window2, arc2, ensemble }) => {
            count_cov(report, n, window, *window2, *arc2, (*ensemble).into())
        }
        Command::Asymptotics(AsymptoticsCmd::Table { n, window, scaled_width, center }) => {
            asymptotics_table(report, n, window, *scaled_width, *center)
        }
        Command::Asymptotics(AsymptoticsCmd::Profile { which, from, to, step }) => profile(report, *which, *from, *to, *step),
        Command::Asymptotics(AsymptoticsCmd::Edgeworth { m, step, range }) => edgeworth(report, m, *step, *range),
        Command::Cumulants(args) => cumulants(report, args),
        Command::Mc(McCmd::Run { mc, statistics, check_exact, save_batch }) => {
            mc_run(report, mc, statistics, *check_exact, save_batch.as_deref())
        }
        Command::Clt(CltCmd::Test { mc, statistic, order, tol, no_jitter }) => clt_test(report, mc, statistic, *order, *tol, !*no_jitter),
        Command::Kernel(KernelCmd::Dump { l, theta_points }) => kernel_dump(report, l, *theta_points),
        Command::Kernel(KernelCmd::Smoothing { l, f, g, tent }) => kernel_smoothing(report, l, f.as_ref(), g.as_ref(), *tent),
    }
}

fn resolve_window(w: &WindowArgs) -> Result<Window> {
    match w.kind {
        Kind::Radial => {
            if w.arc.is_some() || w.arc_frac.is_some() {
                return usage("radial windows take --window a,b");
            }
            let Some(Pair(a, b)) = w.window else {
                return usage("radial windows need --window a,b");
            };
            Ok(Window::Radial(ModulusWindow::new(a, b)?))
        }
        Kind::Angular => resolve_arc(w.window.is_some(), w.arc, w.arc_frac).map(Window::Angular),
    }
}

fn resolve_arc(has_modulus_window: bool, arc: Option<Pair>, frac: Option<f64>) -> Result<ArcWindow> {
    match (has_modulus_window, arc, frac) {
        (false, Some(Pair(lo, hi)), None) => Ok(ArcWindow::new(lo, hi)?),
        (false, None, Some(x)) => Ok(ArcWindow::symmetric(2.0 * PI * x)?),
        _ => usage("angular windows need exactly one of --arc lo,hi or --arc-frac x"),
    }
}

fn complex_only(ens: Ensemble, what: &str) -> Result<()> {
    if ens == Ensemble::Quaternion {
        return usage(format!("{what} is only available for the complex ensemble"));
    }
    Ok(())
}

fn radial_fn(s: &StatSpec) -> Result<&RadialTestFunction> {
    match &s.kind {
        Spec::Radial(f) => Ok(f),
        _ => usage(format!("'{}' is not a radial statistic", s.text)),
    }
}

fn cov_radial(report: &mut Report, ns: &[usize], f: &StatSpec, g: &StatSpec, ens: Ensemble, compare: bool) -> Result<()> {
    report.input("n", ns);
    report.input("f", &f.text);
    report.input("g", &g.text);
    report.input("ensemble", ens);
    let (rf, rg) = (radial_fn(f)?, radial_fn(g)?);
    let limit = if compare {
        complex_only(ens, "the smooth radial limit")?;
        Some(radial_smooth_limit(rf, rg)?)
    } else {
        None
    };
    for &n in ns {
        let value = radial_cov_exact(rf, rg, n, ens)?;
        let mut r = row! {"n" => n, "value" => value};
        if let Some(l) = limit {
            r.insert("limit".into(), l.into());
            r.insert("residual".into(), (value - l).into());
        }
        report.push(r);
    }
    Ok(())
}

/// Cov of two angular specs at size N; arcs are expanded to the other statistic's band.
fn angular_cov(f: &StatSpec, g: &StatSpec, n: usize) -> Result<Complex64> {
    match (&f.kind, &g.kind) {
        (Spec::Arc { arc: a, scale: s }, Spec::Arc { arc: b, scale: t }) => Ok(Complex64::new(angular_count_cov(n, a, b)? * s * t, 0.0)),
        (Spec::Arc { .. }, Spec::Fourier(h)) => Ok(angular_cov_exact(&f.to_fourier(h.band())?, h, n)?),
        (Spec::Fourier(h), Spec::Arc { .. }) => Ok(angular_cov_exact(h, &g.to_fourier(h.band())?, n)?),
        (Spec::Fourier(a), Spec::Fourier(b)) => Ok(angular_cov_exact(a, b, n)?),
        _ => usage("cov angular needs angular statistics (cos, sin, fourier, ind-arg)"),
    }
}

fn fourier_pair(f: &StatSpec, g: &StatSpec, what: &str) -> Result<(FourierStatistic, FourierStatistic)> {
    match (&f.kind, &g.kind) {
        (Spec::Fourier(a), Spec::Fourier(b)) => Ok((a.clone(), b.clone())),
        _ => usage(format!("{what} needs band-limited statistics (cos, sin, fourier)")),
    }
}

fn cov_angular(report: &mut Report, ns: &[usize], f: &StatSpec, g: &StatSpec, decompose: bool, compare: bool) -> Result<()> {
    report.input("n", ns);
    report.input("f", &f.text);
    report.input("g", &g.text);
    let pair = if decompose || compare { Some(fourier_pair(f, g, "--decompose and --compare-asymptotic")?) } else { None };
    for &n in ns {
        let value = angular_cov(f, g, n)?;
        let mut r = row! {"n" => n, "value_re" => value.re, "value_im" => value.im};
        if let Some((a, b)) = &pair {
            if decompose {
                let (main, corr) = angular_cov_decomposed(a, b, n)?;
                r.extend(row! {"main_re" => main.re, "main_im" => main.im, "correction_re" => corr.re, "correction_im" => corr.im});
            }
            if compare {
                let coeff = angular_smooth_coeff(a, b);
                let pred = angular_smooth_prediction(a, b, n);
                r.extend(row! {"sum_k2_re" => coeff.re, "sum_k2_im" => coeff.im, "predicted_re" => pred.re, "offset_re" => value.re - pred.re});
            }
        }
        report.push(r);
    }
    Ok(())
}

fn count_var(report: &mut Report, ns: &[usize], w: &WindowArgs, ens: Ensemble, compare: bool) -> Result<()> {
    let window = resolve_window(w)?;
    report.input("n", ns);
    report.input("window", window);
    report.input("ensemble", ens);
    if compare {
        complex_only(ens, "--compare-asymptotic")?;
    }
    for &n in ns {
        let (mean, var) = match window {
            Window::Radial(m) => (radial_mean_exact(&RadialTestFunction::Indicator(m), n, ens)?, radial_count_var(n, m.a, m.b, ens)?),
            Window::Angular(arc) => {
                complex_only(ens, "angular counting")?;
                (angular_count_mean(n, &arc), angular_count_var(n, &arc)?)
            }
        };
        let mut r = row! {"n" => n, "mean" => mean, "variance" => var};
        if compare {
            let rep = count_var_prediction(n, &window)?;
            r.extend(row! {"regime" => rep.regime, "scaled_width" => rep.scaled_width, "predicted" => rep.predicted, "ratio" => rep.ratio});
        }
        report.push(r);
    }
    Ok(())
}

fn count_cov(report: &mut Report, ns: &[usize], w: &WindowArgs, window2: Option<Pair>, arc2: Option<Pair>, ens: Ensemble) -> Result<()> {
    let first = resolve_window(w)?;
    let second = match w.kind {
        Kind::Radial => match (window2, arc2) {
            (Some(Pair(a, b)), None) => Window::Radial(ModulusWindow::new(a, b)?),
            _ => return usage("radial count covariance needs --window2 a,b"),
        },
        Kind::Angular => match (window2, arc2) {
            (None, Some(Pair(lo, hi))) => Window::Angular(ArcWindow::new(lo, hi)?),
            _ => return usage("angular count covariance needs --arc2 lo,hi"),
        },
    };
    report.input("n", ns);
    report.input("window", first);
    report.input("window2", second);
    report.input("ensemble", ens);
    for &n in ns {
        let root = (n as f64).sqrt();
        let r = match (first, second) {
            (Window::Radial(a), Window::Radial(b)) => {
                let cov = radial_count_cov(n, &a, &b, ens)?;
                row! {"n" => n, "cov" => cov, "cov_sqrt_pi_over_sqrt_n" => cov * PI.sqrt() / root, "cov_over_sqrt_n_pi" => cov / (root * PI.sqrt())}
            }
            (Window::Angular(a), Window::Angular(b)) => {
                complex_only(ens, "angular counting")?;
                let cov = angular_count_cov(n, &a, &b)?;
                let p = PI.powf(1.5);
                row! {"n" => n, "cov" => cov, "cov_pi15_over_sqrt_n" => cov * p / root, "cov_over_sqrt_n_pi15" => cov / (root * p)}
            }
            _ => unreachable!("both windows share --kind"),
        };
        report.push(r);
    }
    Ok(())
}

fn asymptotics_table(report: &mut Report, ns: &[usize], w: &WindowArgs, scaled_width: Option<f64>, center: f64) -> Result<()> {
    report.input("n", ns);
    report.input("scaled_width", scaled_width);
    let base = match scaled_width {
        Some(_) => None,
        None => Some(resolve_window(w)?),
    };
    if let Some(b) = base {
        report.input("window", b);
    } else {
        report.input("kind", format!("{:?}", w.kind).to_lowercase());
        report.input("center", center);
    }
    for &n in ns {
        let window = match (base, scaled_width) {
            (Some(b), _) => b,
            (None, Some(s)) => {
                let width = s / (n as f64).sqrt();
                match w.kind {
                    Kind::Radial => Window::Radial(ModulusWindow::new(center, center + width)?),
                    Kind::Angular => Window::Angular(ArcWindow::symmetric(width)?),
                }
            }
            (None, None) => unreachable!(),
        };
        let rep = count_var_prediction(n, &window)?;
        report.push(row! {
            "n" => n, "width" => window.width(), "regime" => rep.regime, "scaled_width" => rep.scaled_width,
            "exact" => rep.exact, "predicted" => rep.predicted, "ratio" => rep.ratio,
        });
    }
    Ok(())
}

fn profile(report: &mut Report, which: Profile, from: f64, to: f64, step: f64) -> Result<()> {
    if !(step > 0.0 && from > 0.0 && to >= from) {
        return usage("profile needs 0 < from <= to and step > 0");
    }
    report.input("which", format!("{which:?}"));
    report.input("from", from);
    report.input("to", to);
    report.input("step", step);
    let count = ((to - from) / step + 1e-9).floor() as usize;
    for j in 0..=count {
        let x = from + j as f64 * step;
        let value = match which {
            Profile::IArg => i_arg(x)?,
            Profile::IMod => i_mod(x)?,
        };
        report.push(row! {"x" => x, "value" => value});
    }
    Ok(())
}

/// √M times the Gamma(M, 1) density at M + a√M.
fn standardized_gamma_density(a: f64, m: usize) -> Result<f64> {
    let mf = m as f64;
    let x = mf + a * mf.sqrt();
    if x <= 0.0 {
        return Ok(0.0);
    }
    Ok((0.5 * mf.ln() + (mf - 1.0) * x.ln() - x - log_gamma(mf)?).exp())
}

fn edgeworth(report: &mut Report, ms: &[usize], step: f64, range: f64) -> Result<()> {
    if !(step > 0.0 && range > 0.0) {
        return usage("edgeworth needs positive --step and --range");
    }
    report.input("m", ms);
    report.input("step", step);
    report.input("range", range);
    let half = (range / step).round() as i64;
    for &m in ms {
        let mut sup = 0.0f64;
        let mut at = 0.0;
        for j in -half..=half {
            let a = j as f64 * step;
            let err = (edgeworth_density(a, m)? - standardized_gamma_density(a, m)?).abs();
            if err > sup {
                sup = err;
                at = a;
            }
        }
        report.push(row! {"m" => m, "sup_error" => sup, "argmax" => at, "sup_error_times_m" => sup * m as f64});
    }
    Ok(())
}

fn push_cumulants(report: &mut Report, n: Option<usize>, cs: &CumulantSet) {
    let var = cs.c.get(1).copied();
    for j in 0..cs.order {
        let normalized = var.filter(|v| *v > 0.0 && j >= 2).map(|v| cs.c[j] / v.powf(0.5 * (j + 1) as f64));
        report.push(row! {"n" => n, "order" => j + 1, "cumulant" => cs.c[j], "cluster" => cs.u[j], "normalized" => normalized});
    }
}

fn cumulants(report: &mut Report, args: &CumulantsArgs) -> Result<()> {
    let ens: Ensemble = args.ensemble.into();
    report.input("order", args.order);
    report.input("ensemble", ens);
    match (&args.probs, args.kind) {
        (Some(p), None) => {
            if !args.n.is_empty() {
                return usage("--probs describes the operator completely; drop --n");
            }
            report.input("probs", p);
            let cs = cumulants_from_gram(&GramOperator::diagonal(p.clone())?, args.order)?;
            push_cumulants(report, None, &cs);
        }
        (None, Some(kind)) => {
            if args.n.is_empty() {
                return usage("cumulants of a window need --n");
            }
            let w = WindowArgs { kind, window: args.window, arc: args.arc, arc_frac: args.arc_frac };
            let window = resolve_window(&w)?;
            report.input("n", &args.n);
            report.input("window", window);
            for &n in &args.n {
                let cs = match window {
                    Window::Radial(m) => radial_count_cumulants(n, m.a, m.b, ens, args.order)?,
                    Window::Angular(arc) => {
                        complex_only(ens, "angular counting")?;
                        cumulants_from_gram(&gram_sector(n, &arc)?, args.order)?
                    }
                };
                push_cumulants(report, Some(n), &cs);
            }
        }
        _ => return usage("give either --kind with a window, or --probs"),
    }
    Ok(())
}

fn mc_config(mc: &McArgs) -> McConfig {
    McConfig { n: mc.n, ensemble: mc.ensemble.into(), samples: mc.samples, seed: mc.seed, sampler: mc.sampler.into() }
}

fn mc_inputs(report: &mut Report, cfg: &McConfig) {
    report.input("n", cfg.n);
    report.input("samples", cfg.samples);
    report.input("seed", cfg.seed);
    report.input("ensemble", cfg.ensemble);
    report.input("sampler", cfg.sampler);
    report.input("generator", ginibre::mc::GENERATOR);
}

fn mc_run(report: &mut Report, mc: &McArgs, specs: &[StatSpec], check_exact: bool, save: Option<&std::path::Path>) -> Result<()> {
    let cfg = mc_config(mc);
    mc_inputs(report, &cfg);
    report.input("statistics", specs.iter().map(|s| &s.text).collect::<Vec<_>>());
    let stats: Vec<Statistic> = specs.iter().map(StatSpec::to_statistic).collect::<std::result::Result<_, _>>()?;
    let batch = run_batch(&cfg, &stats)?;
    if let Some(path) = save {
        batch.save(path)?;
    }
    let mut push = |kind: &str, i: usize, j: usize, (value, se): (f64, f64), exact: Option<f64>| {
        let mut r = row! {"quantity" => kind, "statistic" => &specs[i].text};
        if kind == "cov" {
            r.insert("statistic2".into(), specs[j].text.clone().into());
        }
        r.extend(row! {"value" => value, "se" => se});
        if let Some(e) = exact {
            r.extend(row! {"exact" => e, "z" => (value - e) / se});
        }
        report.push(r);
    };
    for i in 0..stats.len() {
        let exact = if check_exact { Some(stats[i].exact_mean(cfg.n, cfg.ensemble)?) } else { None };
        push("mean", i, i, batch.mean(i)?, exact);
        let exact = if check_exact { Some(stats[i].exact_cov(&stats[i], cfg.n, cfg.ensemble)?) } else { None };
        push("var", i, i, batch.cov(i, i)?, exact);
    }
    for i in 0..stats.len() {
        for j in i + 1..stats.len() {
            let exact = if check_exact { Some(stats[i].exact_cov(&stats[j], cfg.n, cfg.ensemble)?) } else { None };
            push("cov", i, j, batch.cov(i, j)?, exact);
        }
    }
    Ok(())
}

fn clt_test(report: &mut Report, mc: &McArgs, spec: &StatSpec, order: usize, tol: f64, jitter: bool) -> Result<()> {
    let cfg = mc_config(mc);
    mc_inputs(report, &cfg);
    report.input("statistic", &spec.text);
    let is_count = matches!(spec.kind, Spec::Radial(RadialTestFunction::Indicator(_)) | Spec::Arc { scale: 1.0, .. });
    if is_count {
        report.input("order", order);
        report.input("tol", tol);
        let cs = match &spec.kind {
            Spec::Radial(RadialTestFunction::Indicator(w)) => radial_count_cumulants(cfg.n, w.a, w.b, cfg.ensemble, order)?,
            Spec::Arc { arc, .. } => {
                complex_only(cfg.ensemble, "angular counting")?;
                cumulants_from_gram(&gram_sector(cfg.n, arc)?, order)?
            }
            _ => unreachable!(),
        };
        let cert = clt_certificate(&cs, tol)?;
        report.push(row! {
            "test" => "certificate", "variance" => cert.variance, "max_normalized" => cert.normalized.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            "bound_witness" => cert.bound_witness, "pass" => cert.clt_consistent,
        });
    }
    if cfg.samples > 0 {
        let batch = run_batch(&cfg, &[spec.to_statistic()?])?;
        let mut values = batch.values.into_iter().next().expect("one statistic");
        let jittered = jitter && is_count;
        if jittered {
            // Uniform jitter turns the integer lattice into a continuous law; studentizing absorbs the added 1/12.
            let mut rng = RngStream::new(cfg.seed, u64::MAX).rng();
            for v in &mut values {
                *v += rng.random::<f64>() - 0.5;
            }
        }
        let ks = ks_normal_test(&values)?;
        report.push(row! {"test" => "ks", "jittered" => jittered, "statistic" => ks.statistic, "threshold" => ks.threshold, "pass" => ks.pass});
    }
    Ok(())
}

fn kernel_dump(report: &mut Report, ls: &[usize], theta_points: usize) -> Result<()> {
    report.input("l", ls);
    report.input("theta_points", theta_points);
    for &l in ls {
        let top = 2 * l as i64 + 1;
        for k in -top..=top {
            report.push(row! {"l" => l, "k" => k, "c_hat" => kernel_c_fourier(l, k)});
        }
        for j in 0..theta_points {
            let theta = -PI + 2.0 * PI * j as f64 / theta_points as f64;
            report.push(row! {"l" => l, "theta" => theta, "c" => kernel_c_eval(l, theta)});
        }
    }
    Ok(())
}

fn kernel_smoothing(report: &mut Report, ls: &[usize], f: Option<&StatSpec>, g: Option<&StatSpec>, tent: Option<Pair>) -> Result<()> {
    report.input("l", ls);
    let phi_for = |l: usize| -> Result<ConvolvedStatistic> {
        match (f, tent) {
            (Some(f), None) => {
                let g = g.unwrap_or(f);
                let band = 2 * l + 1;
                Ok(ConvolvedStatistic::from_pair(&f.to_fourier(band)?, &g.to_fourier(band)?))
            }
            (None, Some(Pair(lo, hi))) if g.is_none() => Ok(ConvolvedStatistic::tent(&ArcWindow::new(lo, hi)?, 2 * l + 1)),
            _ => usage("kernel smoothing needs --f [--g] or --tent lo,hi"),
        }
    };
    match (f, tent) {
        (Some(f), _) => {
            report.input("f", &f.text);
            report.input("g", &g.unwrap_or(f).text);
        }
        (None, Some(Pair(lo, hi))) => report.input("tent", [lo, hi]),
        _ => {}
    }
    for &l in ls {
        let phi = phi_for(l)?;
        let smoothed = kernel_smoothing_at_zero(l, &phi);
        let err = smoothed - phi.phi_zero();
        report.push(row! {
            "l" => l, "smoothed_re" => smoothed.re, "smoothed_im" => smoothed.im, "phi_zero_re" => phi.phi_zero().re,
            "error_re" => err.re, "error_im" => err.im, "error_abs" => err.norm(),
        });
    }
    Ok(())
}
