//! Executes a [`RunConfig`] and writes the artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use magsplit::diagnostics::{fit_order, l2_error, mass};
use magsplit::presets::{ex1d_gauge, Formulation, PreparedExperiment};
use magsplit::splitting::Propagation;
use magsplit::{propagate, AdvectionBackend, Precompute, SplittingScheme, Timings};

use crate::config::RunConfig;

/// Agreement required between the computed ex1d gauge and its closed form.
pub const LAMBDA_TOLERANCE: f64 = 1e-10;

/// Scientific notation with ten significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.9e}")
}

/// What a run produced, for the caller's log.
#[derive(Debug, Clone)]
pub struct Summary {
    pub out: PathBuf,
    pub max_mass_deviation: f64,
    pub fitted_order: Option<f64>,
    pub lambda_error: Option<f64>,
    pub files: Vec<PathBuf>,
}

fn formulation_name(f: Formulation) -> &'static str {
    match f {
        Formulation::Gauged => "gauged",
        Formulation::Corrected => "corrected",
    }
}

fn precompute_name(p: Precompute) -> &'static str {
    match p {
        Precompute::OnTheFly => "onfly",
        Precompute::PrePsi => "psi",
        Precompute::PreFullPsi => "fullpsi",
    }
}

fn backend_detail(b: &AdvectionBackend) -> Vec<(String, String)> {
    match b {
        AdvectionBackend::DirectFourier => vec![],
        AdvectionBackend::LocalInterp { p } => vec![("p".into(), p.to_string())],
        AdvectionBackend::Nfft(c) => vec![
            ("m".into(), c.m.to_string()),
            ("precompute".into(), precompute_name(c.precompute).into()),
            ("mem_budget".into(), c.memory_budget.to_string()),
        ],
    }
}

/// `max_j |λ_j - cos(2πx_j)/(10πε)|` for the ex1d gauge.
fn ex1d_lambda_error(prepared: &PreparedExperiment) -> f64 {
    let grid = prepared.problem.grid.clone();
    let eps = prepared.problem.epsilon;
    grid.points()
        .iter()
        .zip(prepared.gauge.lambda())
        .map(|(&x, &l)| (l - ex1d_gauge(x, eps)).abs())
        .fold(0.0, f64::max)
}

fn mass_csv(run: &Propagation, tau: f64) -> String {
    let series = &run.report.mass_series;
    let m0 = series[0];
    let mut s = String::from("step,time,mass,deviation\n");
    for (n, m) in series.iter().enumerate() {
        let _ = writeln!(s, "{n},{},{},{}", sci(n as f64 * tau), sci(*m), sci((m - m0).abs()));
    }
    s
}

fn convergence_csv(errors: &[(usize, f64, f64)], order: f64) -> String {
    let mut s = String::from("steps,tau,error\n");
    for (n, tau, e) in errors {
        let _ = writeln!(s, "{n},{},{}", sci(*tau), sci(*e));
    }
    let _ = writeln!(s, "fitted_order,,{}", sci(order));
    s
}

fn timing_csv(t: &Timings) -> String {
    let mut s = String::from("stage,seconds\n");
    for (name, secs) in t.entries() {
        let _ = writeln!(s, "{name},{}", sci(secs));
    }
    s
}

fn plot_script(with_convergence: bool) -> String {
    let mut s = String::from(
        "set datafile separator ','\n\
         set terminal svg size 800,500\n\
         set output 'mass.svg'\n\
         set logscale y\n\
         set format y '%.0e'\n\
         set xlabel 'step'\n\
         set ylabel '|m_n - m_0|'\n\
         plot 'mass.csv' every ::2 using 1:4 with lines title 'mass deviation'\n",
    );
    if with_convergence {
        s.push_str(
            "set output 'convergence.svg'\n\
             set logscale xy\n\
             set xlabel 'tau'\n\
             set ylabel 'l2 error'\n\
             plot 'convergence.csv' every ::1 using 2:3 with linespoints title 'error'\n",
        );
    }
    s
}

fn write(dir: &Path, name: &str, content: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
    files.push(path);
    Ok(())
}

/// Runs the configuration; `log` receives progress lines.
pub fn execute(cfg: &RunConfig, log: &mut dyn FnMut(&str)) -> Result<Summary> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating output directory {}", cfg.out.display()))?;
    let e = &cfg.experiment;
    log(&format!(
        "{}: N = {:?}, T = {}, {} steps, {} scheme, {} backend, {} formulation",
        cfg.preset,
        e.sizes,
        e.final_time,
        e.steps,
        e.scheme,
        e.backend.name(),
        formulation_name(cfg.formulation)
    ));
    let prepared = e.prepare(cfg.formulation)?;
    let lambda_error = (cfg.preset == "ex1d" && cfg.formulation == Formulation::Gauged).then(|| ex1d_lambda_error(&prepared));
    if let Some(err) = lambda_error {
        let verdict = if err <= LAMBDA_TOLERANCE { "matches" } else { "DOES NOT match" };
        log(&format!("coulomb gauge {verdict} cos(2πx)/(10πε): max error {err:.3e}"));
    }
    let run = propagate(&prepared.problem, &mut [])?;
    let tau = prepared.problem.tau();
    log(&format!("max mass deviation {:.3e}", run.report.max_mass_deviation));

    let mut timings = prepared.timings.clone();
    timings.merge(&run.report.timings);

    let mut files = Vec::new();
    write(&cfg.out, "mass.csv", &mass_csv(&run, tau), &mut files)?;

    let mut fitted_order = None;
    let mut sweep_errors = Vec::new();
    if !cfg.order_sweep.is_empty() {
        let finest = *cfg.order_sweep.iter().max().expect("non-empty sweep");
        let ref_steps = 4 * finest;
        log(&format!("order sweep {:?} against a strang reference with {ref_steps} steps", cfg.order_sweep));
        let mut reference_exp = e.clone();
        reference_exp.steps = ref_steps;
        reference_exp.scheme = SplittingScheme::Strang;
        let reference = propagate(&reference_exp.prepare(cfg.formulation)?.problem, &mut [])?.state;
        for &steps in &cfg.order_sweep {
            let mut ex = e.clone();
            ex.steps = steps;
            let out = propagate(&ex.prepare(cfg.formulation)?.problem, &mut [])?;
            let err = l2_error(&out.state, &reference)?;
            sweep_errors.push((steps, e.final_time / steps as f64, err));
            log(&format!("  {steps} steps: error {err:.3e}"));
        }
        let pairs: Vec<(f64, f64)> = sweep_errors.iter().map(|&(_, t, err)| (t, err)).collect();
        let q = fit_order(&pairs)?;
        log(&format!("fitted order {q:.3}"));
        write(&cfg.out, "convergence.csv", &convergence_csv(&sweep_errors, q), &mut files)?;
        fitted_order = Some(q);
    }
    write(&cfg.out, "timing.csv", &timing_csv(&timings), &mut files)?;

    let mut report: Vec<(String, String)> = vec![
        ("preset".into(), cfg.preset.clone()),
        ("formulation".into(), formulation_name(cfg.formulation).into()),
    ];
    report.extend(run.report.config.iter().cloned());
    report.extend(backend_detail(&e.backend));
    report.push(("seed".into(), cfg.seed.to_string()));
    report.push(("tau".into(), sci(tau)));
    report.push(("initial_mass".into(), sci(mass(&prepared.problem.initial))));
    report.push(("final_mass".into(), sci(*run.report.mass_series.last().expect("initial mass recorded"))));
    report.push(("max_mass_deviation".into(), sci(run.report.max_mass_deviation)));
    if let Some(err) = lambda_error {
        report.push(("lambda_analytic_error".into(), sci(err)));
    }
    if let Some(q) = fitted_order {
        report.push(("fitted_order".into(), sci(q)));
    }
    report.push(("total_seconds".into(), sci(timings.total_seconds())));
    for (k, v) in &cfg.settings {
        report.push((format!("input.{k}"), v.clone()));
    }
    let mut text = String::new();
    for (k, v) in &report {
        let _ = writeln!(text, "{k} = {v}");
    }
    write(&cfg.out, "report.txt", &text, &mut files)?;
    if cfg.plot {
        write(&cfg.out, "plot.gp", &plot_script(fitted_order.is_some()), &mut files)?;
    }
    Ok(Summary {
        out: cfg.out.clone(),
        max_mass_deviation: run.report.max_mass_deviation,
        fitted_order,
        lambda_error,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{merge, RunConfig};

    fn small(out: &Path, extra: &[(&str, &str)]) -> RunConfig {
        let mut pairs = vec![
            ("preset".to_string(), "ex1d".to_string()),
            ("N".into(), "128".into()),
            ("steps".into(), "8".into()),
            ("out".into(), out.display().to_string()),
        ];
        pairs.extend(extra.iter().map(|(k, v)| (k.to_string(), v.to_string())));
        RunConfig::from_map(merge(&[pairs]).unwrap()).unwrap()
    }

    #[test]
    fn sci_keeps_ten_significant_digits() {
        assert_eq!(sci(0.0), "0.000000000e0");
        assert_eq!(sci(1.0 / 3.0), "3.333333333e-1");
        assert_eq!(sci(-12345.678), "-1.234567800e4");
    }

    #[test]
    fn writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path(), &[("order_sweep", "4,8,16"), ("plot", "true")]);
        let s = execute(&cfg, &mut |_| {}).unwrap();
        for name in ["mass.csv", "convergence.csv", "timing.csv", "report.txt", "plot.gp"] {
            assert!(dir.path().join(name).is_file(), "{name}");
        }
        assert_eq!(s.files.len(), 5);
        assert!(s.lambda_error.unwrap() <= LAMBDA_TOLERANCE);
        let mass = fs::read_to_string(dir.path().join("mass.csv")).unwrap();
        assert_eq!(mass.lines().count(), 1 + 9);
        assert!(mass.starts_with("step,time,mass,deviation\n0,0.000000000e0,"));
        let conv = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
        assert!(conv.lines().last().unwrap().starts_with("fitted_order,,"));
        let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
        assert!(report.contains("preset = ex1d") && report.contains("input.steps = 8"));
    }

    #[test]
    fn reruns_reproduce_numeric_output() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        execute(&small(a.path(), &[("backend", "interp"), ("p", "4")]), &mut |_| {}).unwrap();
        execute(&small(b.path(), &[("backend", "interp"), ("p", "4")]), &mut |_| {}).unwrap();
        let read = |d: &Path| fs::read_to_string(d.join("mass.csv")).unwrap();
        assert_eq!(read(a.path()), read(b.path()));
    }

    #[test]
    fn corrected_formulation_skips_the_gauge_check() {
        let dir = tempfile::tempdir().unwrap();
        let s = execute(&small(dir.path(), &[("formulation", "corrected")]), &mut |_| {}).unwrap();
        assert!(s.lambda_error.is_none());
        assert!(s.fitted_order.is_none());
    }
}
