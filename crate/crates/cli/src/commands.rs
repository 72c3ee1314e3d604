use std::fs::File;
use std::ops::Range;
use std::path::{Path, PathBuf};

use bfe_core::adaptive::EstimationTrace;
use bfe_core::analysis::{
    allan_deviation, fit_loglog_slope, fit_white_fm_coefficient, improvement_db, octave_taus, AllanPoint,
    FractionalSeries, LogLogFit, MIN_SERIES_LEN,
};
use bfe_core::locking::{run_bfe_lock, run_pid_lock, LockTrace};
use bfe_core::montecarlo::{run_ensemble, sample_std, trial_rng, Ensemble, TruthPlacement};
use bfe_core::schedule::{build_schedule, precision_curve, predicted_precision, Scheme};
use rand::RngCore;
use rayon::prelude::*;

use crate::config::{Method, RunConfig, SchemeSection};
use crate::error::{CliError, CliResult};
use crate::table::{Format, Table};

/// Output settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Output {
    pub dir: PathBuf,
    pub format: Format,
}

impl Output {
    fn write(&self, table: &Table, stem: &str) -> CliResult<PathBuf> {
        table.write(&self.dir, stem, self.format)
    }
}

/// Iterations of the exponential ramp used for slope fits (0-based). The
/// first two are dominated by the flat initial prior and are skipped.
pub fn ramp_fit_window(scheme: &Scheme<f64>) -> Range<usize> {
    let end = scheme.ramp_end() as usize;
    end.saturating_sub(3).min(2)..end
}

/// Second half of the plateau (0-based), where the curve has settled onto
/// its `T_max`-limited slope.
pub fn plateau_fit_window(scheme: &Scheme<f64>) -> Range<usize> {
    let start = scheme.ramp_end() as usize + scheme.plateau as usize / 2;
    start..scheme.iterations as usize
}

fn trace_table(trace: &EstimationTrace<f64>) -> Table {
    let mut t = Table::new(&[
        "iteration",
        "ramsey_time_s",
        "interval_lo_hz",
        "interval_hi_hz",
        "lo_frequency_hz",
        "enhancement_hz",
        "shift_hz",
        "applied_frequency_hz",
        "p_e",
        "f_est_hz",
        "delta_f_est_hz",
        "posterior_mass",
        "cumulative_time_s",
        "degenerate",
        "sigma_floored",
    ]);
    for r in &trace.records {
        t.push(vec![
            r.index.into(),
            r.ramsey_time.into(),
            r.interval.lo().into(),
            r.interval.hi().into(),
            r.lo_frequency.into(),
            r.enhancement.into(),
            r.shift.into(),
            r.applied_frequency.into(),
            r.p_e.into(),
            r.f_est.into(),
            r.delta_f_est.into(),
            r.posterior_mass.into(),
            r.cumulative_time.into(),
            r.degenerate.into(),
            r.sigma_floored.into(),
        ]);
    }
    t
}

fn slope_or_nan(points: &[(f64, f64)], window: Range<usize>) -> LogLogFit<f64> {
    fit_loglog_slope(points, window).unwrap_or(LogLogFit {
        slope: f64::NAN,
        intercept: f64::NAN,
        residual: f64::NAN,
    })
}

fn simulate(cfg: &RunConfig, scheme: Scheme<f64>, trials: u64, seed: u64) -> CliResult<Ensemble<f64>> {
    let config = cfg.bfe_config(scheme, cfg.estimate.center_hz)?;
    let model = cfg.signal_model(0.0)?;
    let truth = match cfg.estimate.truth_offset_hz {
        Some(d) => TruthPlacement::Offset(d),
        None => TruthPlacement::Uniform {
            half_width: cfg.truth_half_width(&scheme),
        },
    };
    Ok(run_ensemble(&config, &model, truth, trials, seed)?)
}

pub fn estimate(cfg: &RunConfig, seed: u64, trials: u64, out: &Output) -> CliResult<String> {
    let scheme = cfg.scheme()?;
    if trials == 0 {
        return Err(CliError::Config("trials must be at least 1".into()));
    }
    let ens = simulate(cfg, scheme, trials, seed)?;

    for (k, trace) in ens.traces.iter().enumerate() {
        out.write(&trace_table(trace), &format!("estimate_trace_{k:05}"))?;
    }

    let mut trials_table = Table::new(&["trial", "truth_hz", "f_est_hz", "delta_f_est_hz", "error_hz"]);
    for (k, (trace, truth)) in ens.traces.iter().zip(&ens.truths).enumerate() {
        trials_table.push(vec![
            k.into(),
            (*truth).into(),
            trace.f_est.into(),
            trace.delta_f_est.into(),
            (trace.f_est - truth).into(),
        ]);
    }
    out.write(&trials_table, "estimate_trials")?;

    let schedule = build_schedule(&scheme);
    let std = ens.std_by_iteration();
    let times = ens.cumulative_times();
    let predicted = precision_curve(&schedule, cfg.signal.r);
    let mut aggregate = Table::new(&[
        "iteration",
        "ramsey_time_s",
        "cumulative_time_s",
        "std_hz",
        "predicted_hz",
        "mean_delta_f_est_hz",
    ]);
    for j in 0..std.len() {
        let mean_df = ens.traces.iter().map(|t| t.records[j].delta_f_est).sum::<f64>() / trials as f64;
        aggregate.push(vec![
            (j + 1).into(),
            schedule.times[j].into(),
            times[j].into(),
            std[j].into(),
            predicted[j].into(),
            mean_df.into(),
        ]);
    }
    out.write(&aggregate, "estimate_aggregate")?;

    let points: Vec<(f64, f64)> = times.iter().copied().zip(std.iter().copied()).collect();
    let fit = slope_or_nan(&points, ramp_fit_window(&scheme));
    Ok(format!(
        "estimate: {trials} trials, final std {} Hz, predicted {} Hz, ramp slope {}",
        std.last().copied().unwrap_or(f64::NAN),
        predicted_precision(&scheme, cfg.signal.r),
        fit.slope
    ))
}

pub fn scaling(cfg: &RunConfig, seed: u64, trials: u64, out: &Output) -> CliResult<String> {
    let sections: Vec<(String, SchemeSection)> = match (&cfg.scaling, &cfg.scheme) {
        (Some(s), _) if !s.schemes.is_empty() => s
            .schemes
            .iter()
            .enumerate()
            .map(|(i, s)| (format!("scaling.schemes[{i}]"), s.clone()))
            .collect(),
        (Some(_), _) => return Err(CliError::Config("scaling.schemes is empty".into())),
        (None, Some(s)) => vec![("scheme".to_string(), s.clone())],
        (None, None) => return Err(CliError::Config("missing section [scaling] or [scheme]".into())),
    };
    if trials < 2 {
        return Err(CliError::Config("scaling needs at least 2 trials".into()));
    }

    let mut curves = Table::new(&["scheme", "iteration", "cumulative_time_s", "std_hz", "analytic_hz"]);
    let mut fits = Table::new(&[
        "scheme",
        "region",
        "first_iteration",
        "last_iteration",
        "slope",
        "residual",
        "analytic_slope",
    ]);
    let mut summary = Vec::new();
    for (i, (key, section)) in sections.iter().enumerate() {
        let scheme = section.to_scheme(key)?;
        let label = section.label();
        let scheme_seed = trial_rng(seed, i as u64).next_u64();
        let ens = simulate(cfg, scheme, trials, scheme_seed)?;
        let std = ens.std_by_iteration();
        let times = ens.cumulative_times();
        let analytic = precision_curve(&build_schedule(&scheme), cfg.signal.r);
        for j in 0..std.len() {
            curves.push(vec![
                label.clone().into(),
                (j + 1).into(),
                times[j].into(),
                std[j].into(),
                analytic[j].into(),
            ]);
        }
        let measured: Vec<(f64, f64)> = times.iter().copied().zip(std.iter().copied()).collect();
        let predicted: Vec<(f64, f64)> = times.iter().copied().zip(analytic.iter().copied()).collect();
        let mut regions = vec![("ramp", ramp_fit_window(&scheme))];
        if scheme.plateau > 0 {
            regions.push(("plateau", plateau_fit_window(&scheme)));
        }
        for (region, window) in regions {
            if window.len() < 3 {
                continue;
            }
            let fit = slope_or_nan(&measured, window.clone());
            let reference = slope_or_nan(&predicted, window.clone());
            fits.push(vec![
                label.clone().into(),
                region.into(),
                (window.start + 1).into(),
                window.end.into(),
                fit.slope.into(),
                fit.residual.into(),
                reference.slope.into(),
            ]);
            summary.push(format!("{label} {region} slope {}", fit.slope));
        }
    }
    out.write(&curves, "scaling_curves")?;
    out.write(&fits, "scaling_fits")?;
    Ok(format!("scaling: {}", summary.join("; ")))
}

fn lock_table(trace: &LockTrace<f64>) -> Table {
    let mut t = Table::new(&["cycle", "time_s", "delta_nu_hz", "correction_hz"]);
    for c in &trace.cycles {
        t.push(vec![c.cycle.into(), c.time.into(), c.delta_nu.into(), c.correction.into()]);
    }
    t
}

fn allan_points(series: &FractionalSeries<f64>) -> Vec<AllanPoint<f64>> {
    allan_deviation(series, &octave_taus(series)).into_iter().flatten().collect()
}

fn allan_table(points: &[AllanPoint<f64>]) -> Table {
    let mut t = Table::new(&["tau_s", "adev"]);
    for p in points {
        t.push(vec![p.tau.into(), p.adev.into()]);
    }
    t
}

/// White-FM coefficient and log-log slope over averaging factors in
/// `1..max_factor`. An all-zero deviation gives a zero coefficient; fits
/// that cannot be formed give NaN.
fn stability_fit(points: &[AllanPoint<f64>], max_factor: usize) -> (f64, LogLogFit<f64>) {
    let window: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.factor < max_factor)
        .map(|p| (p.tau, p.adev))
        .collect();
    if !window.is_empty() && window.iter().all(|p| p.1 == 0.0) {
        return (0.0, slope_or_nan(&[], 0..0));
    }
    let coefficient = fit_white_fm_coefficient(&window).unwrap_or(f64::NAN);
    (coefficient, slope_or_nan(&window, 0..window.len()))
}

pub fn lock(cfg: &RunConfig, seed: u64, runs: u64, out: &Output) -> CliResult<String> {
    let section = &cfg.lock;
    if section.methods.is_empty() {
        return Err(CliError::Config("lock.methods is empty".into()));
    }
    if !(section.ramsey_time_ms > 0.0) {
        return Err(CliError::Config("lock.ramsey_time_ms must be positive".into()));
    }
    if !(section.dead_time_ms >= 0.0) {
        return Err(CliError::Config("lock.dead_time_ms must be non-negative".into()));
    }
    let lo = section.lo()?;
    let model = cfg.signal_model(0.0)?;
    let bfe_config = if section.methods.contains(&Method::Bfe) {
        Some(cfg.bfe_config(cfg.scheme()?, 0.0)?)
    } else {
        None
    };
    let t_r = section.ramsey_time_ms * 1e-3;
    let dead = section.dead_time_ms * 1e-3;

    let mut summary = Table::new(&["method", "run", "cycle_duration_s", "coefficient_sqrt_s", "slope"]);
    let mut coefficients: Vec<(Method, Vec<f64>)> = Vec::new();
    for (m, method) in section.methods.iter().enumerate() {
        let traces: Vec<LockTrace<f64>> = (0..runs)
            .into_par_iter()
            .map(|k| {
                let mut rng = trial_rng(seed, k * 2 + m as u64);
                match method {
                    Method::Pid => run_pid_lock(&lo, &model, t_r, section.gains(), section.cycles, dead, &mut rng),
                    Method::Bfe => {
                        let config = bfe_config.as_ref().expect("built when BFE is requested");
                        run_bfe_lock(&lo, &model, config, section.cycles, dead, &mut rng)
                    }
                }
            })
            .collect::<Result<_, _>>()?;
        let mut values = Vec::with_capacity(traces.len());
        for (k, trace) in traces.iter().enumerate() {
            let name = method.name();
            out.write(&lock_table(trace), &format!("lock_{name}_{k:03}"))?;
            let points = if trace.len() >= MIN_SERIES_LEN {
                allan_points(&trace.fractional_series()?)
            } else {
                Vec::new()
            };
            out.write(&allan_table(&points), &format!("allan_{name}_{k:03}"))?;
            let (c, fit) = stability_fit(&points, section.max_factor());
            summary.push(vec![
                name.into(),
                k.into(),
                trace.cycle_duration.into(),
                c.into(),
                fit.slope.into(),
            ]);
            values.push(c);
        }
        coefficients.push((*method, values));
    }
    out.write(&summary, "lock_summary")?;

    let find = |m: Method| coefficients.iter().find(|(x, _)| *x == m).map(|(_, v)| v);
    let mut message = format!("lock: {runs} runs x {} cycles", section.cycles);
    if let (Some(pid), Some(bfe)) = (find(Method::Pid), find(Method::Bfe)) {
        let mut comparison = Table::new(&["run", "pid_coefficient_sqrt_s", "bfe_coefficient_sqrt_s", "improvement_db"]);
        let mut gains = Vec::new();
        for (k, (p, b)) in pid.iter().zip(bfe).enumerate() {
            let db = improvement_db(*p, *b).unwrap_or(f64::NAN);
            comparison.push(vec![k.into(), (*p).into(), (*b).into(), db.into()]);
            if db.is_finite() {
                gains.push(db);
            }
        }
        out.write(&comparison, "lock_comparison")?;
        if !gains.is_empty() {
            let mean = gains.iter().sum::<f64>() / gains.len() as f64;
            let se = sample_std(&gains) / (gains.len() as f64).sqrt();
            message.push_str(&format!(", improvement {mean} dB (standard error {se})"));
        }
    }
    Ok(message)
}

const LOCK_COLUMNS: [&str; 4] = ["cycle", "time_s", "delta_nu_hz", "correction_hz"];

/// A validated lock trace file: `δν` samples (Hz) and the cycle duration.
#[derive(Debug, Clone, PartialEq)]
pub struct LockRecord {
    pub delta_nu: Vec<f64>,
    pub cycle_duration: f64,
}

/// Reads a lock trace CSV, reporting the first schema violation with its line.
pub fn read_lock_trace(path: &Path) -> CliResult<LockRecord> {
    let file = File::open(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    parse_lock_trace(file).map_err(|m| CliError::Runtime(format!("{}: {m}", path.display())))
}

pub fn parse_lock_trace(reader: impl std::io::Read) -> Result<LockRecord, String> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut delta_nu = Vec::new();
    let mut cycle_duration = f64::NAN;
    let mut header_seen = false;
    for result in rdr.records() {
        let record = result.map_err(|e| match e.position() {
            Some(p) => format!("line {}: {e}", p.line()),
            None => e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if !header_seen {
            if record.iter().ne(LOCK_COLUMNS) {
                return Err(format!("line {line}: expected header {}", LOCK_COLUMNS.join(",")));
            }
            header_seen = true;
            continue;
        }
        if record.len() != LOCK_COLUMNS.len() {
            return Err(format!("line {line}: expected {} fields, found {}", LOCK_COLUMNS.len(), record.len()));
        }
        let cycle: u64 = record[0]
            .trim()
            .parse()
            .map_err(|_| format!("line {line}: cycle {:?} is not an integer", &record[0]))?;
        let value = |i: usize| -> Result<f64, String> {
            let v: f64 = record[i]
                .trim()
                .parse()
                .map_err(|_| format!("line {line}: {} {:?} is not a number", LOCK_COLUMNS[i], &record[i]))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("line {line}: {} is not finite", LOCK_COLUMNS[i]))
            }
        };
        let time = value(1)?;
        let dnu = value(2)?;
        value(3)?;
        let expected_cycle = delta_nu.len() as u64 + 1;
        if cycle != expected_cycle {
            return Err(format!("line {line}: expected cycle {expected_cycle}, found {cycle}"));
        }
        if delta_nu.is_empty() {
            if !(time > 0.0) {
                return Err(format!("line {line}: time_s must be positive"));
            }
            cycle_duration = time;
        } else {
            let expected = cycle_duration * cycle as f64;
            if (time - expected).abs() > 1e-9 * expected {
                return Err(format!("line {line}: time_s {time} breaks the uniform cycle spacing {cycle_duration}"));
            }
        }
        delta_nu.push(dnu);
    }
    if !header_seen {
        return Err("line 1: empty file, expected a header".into());
    }
    Ok(LockRecord {
        delta_nu,
        cycle_duration,
    })
}

pub fn analyze(cfg: &RunConfig, inputs: &[PathBuf], out: &Output) -> CliResult<String> {
    if inputs.is_empty() {
        return Err(CliError::Config("analyze needs at least one input trace".into()));
    }
    let nu0 = cfg.analyze.nominal_frequency_hz;
    if !(nu0 > 0.0) {
        return Err(CliError::Config("analyze.nominal_frequency_hz must be positive".into()));
    }
    let mut summary = Table::new(&["file", "samples", "tau0_s", "coefficient_sqrt_s", "slope", "slope_residual"]);
    let mut lines = Vec::new();
    for path in inputs {
        let record = read_lock_trace(path)?;
        if record.delta_nu.len() < MIN_SERIES_LEN {
            return Err(CliError::Runtime(format!(
                "{}: {} samples, need at least {MIN_SERIES_LEN}",
                path.display(),
                record.delta_nu.len()
            )));
        }
        let series = FractionalSeries::new(record.delta_nu.iter().map(|v| v / nu0).collect(), record.cycle_duration)?;
        let points = allan_points(&series);
        let stem = path.file_stem().map_or("trace".into(), |s| s.to_string_lossy().into_owned());
        out.write(&allan_table(&points), &format!("analyze_{stem}_allan"))?;
        let max_factor = cfg.analyze.fit_max_factor.unwrap_or(series.len() / 4);
        let (c, fit) = stability_fit(&points, max_factor);
        summary.push(vec![
            path.display().to_string().into(),
            series.len().into(),
            record.cycle_duration.into(),
            c.into(),
            fit.slope.into(),
            fit.residual.into(),
        ]);
        lines.push(format!("{}: coefficient {c:e} /sqrt(s), slope {}", path.display(), fit.slope));
    }
    out.write(&summary, "analyze_summary")?;
    Ok(lines.join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_windows() {
        let s = Scheme::new(1.25, 1, 0, 20, 0.02).unwrap();
        assert_eq!(ramp_fit_window(&s), 2..20);
        let p = Scheme::new(1.25, 1, 44, 66, 0.02).unwrap();
        assert_eq!(ramp_fit_window(&p), 2..22);
        assert_eq!(plateau_fit_window(&p), 44..66);
        let short = Scheme::new(1.25, 1, 0, 3, 0.02).unwrap();
        assert_eq!(ramp_fit_window(&short), 0..3);
    }

    #[test]
    fn truncated_row_reports_line() {
        let text = "cycle,time_s,delta_nu_hz,correction_hz\n1,0.1,0.5,0\n2,0.2\n";
        let err = parse_lock_trace(text.as_bytes()).unwrap_err();
        assert!(err.starts_with("line 3"), "{err}");
    }

    #[test]
    fn wrong_header_reports_line_one() {
        let err = parse_lock_trace("a,b,c,d\n".as_bytes()).unwrap_err();
        assert!(err.starts_with("line 1"), "{err}");
    }

    #[test]
    fn cycle_gap_reports_line() {
        let text = "cycle,time_s,delta_nu_hz,correction_hz\n1,0.1,0.5,0\n3,0.3,0.1,0\n";
        let err = parse_lock_trace(text.as_bytes()).unwrap_err();
        assert!(err.starts_with("line 3"), "{err}");
    }

    #[test]
    fn reads_valid_trace() {
        let text = "cycle,time_s,delta_nu_hz,correction_hz\n1,0.5,1.5,0\n2,1.0,-0.5,2\n";
        let r = parse_lock_trace(text.as_bytes()).unwrap();
        assert_eq!(r.delta_nu, vec![1.5, -0.5]);
        assert_eq!(r.cycle_duration, 0.5);
    }

    #[test]
    fn zero_deviation_gives_zero_coefficient() {
        let series = FractionalSeries::new(vec![3e-12; 64], 1.0).unwrap();
        let (c, _) = stability_fit(&allan_points(&series), 16);
        assert_eq!(c, 0.0);
    }
}
