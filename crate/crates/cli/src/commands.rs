use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use delay_duffing::amplitude::SeriesOrder;
use delay_duffing::dde::CSV_HEADER;
use delay_duffing::experiments::{
    convergence_probe_with, floquet_estimate_with, heteroclinic_probe_with, ProbeConfig,
};
use delay_duffing::{
    integrate, lift_residual, minimal_period, series_amplitude_of_period, series_period_of_amplitude,
    solve_amplitude, Error, HistoryFunction, OrbitSpec, Parity, SolverConfig,
};
use serde::Serialize;
use serde_json::json;

use crate::manifest;
use crate::{
    AmplitudesArgs, Command, Failure, Format, ProbeArgs, ReplayArgs, SeriesArgs, SimulateArgs, VerifyLiftArgs,
};

/// Both lift residuals must be below this for `verify-lift` to succeed.
pub const LIFT_PASS: f64 = 1e-8;

pub fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Amplitudes(args) => amplitudes(args),
        Command::Series(args) => series(args),
        Command::Simulate(args) => simulate(args),
        Command::VerifyLift(args) => verify_lift(args),
        Command::Probe(args) => probe(args),
        Command::Replay(args) => replay(args),
    }
}

fn out_slot(command: &mut Command) -> Option<&mut Option<PathBuf>> {
    match command {
        Command::Amplitudes(a) => Some(&mut a.out),
        Command::Series(a) => Some(&mut a.out),
        Command::Simulate(a) => Some(&mut a.out),
        Command::VerifyLift(a) => Some(&mut a.out),
        Command::Probe(a) => Some(&mut a.out),
        Command::Replay(_) => None,
    }
}

/// Writes through `body` to the resolved `--out` file (plus its manifest) or
/// to stdout.
fn emit<F>(invocation: Command, body: F) -> Result<(), Failure>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let mut invocation = invocation;
    let Some(slot) = out_slot(&mut invocation) else {
        return Err(Failure::Usage("replay cannot be recorded".into()));
    };
    match slot.take() {
        Some(out) => {
            let path = std::path::absolute(manifest::resolve_out(&out))?;
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            let mut w = BufWriter::new(File::create(&path)?);
            body(&mut w)?;
            w.flush()?;
            *slot = Some(path.clone());
            manifest::write(&path, &invocation)
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            body(&mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn warn_boundary(spec: &OrbitSpec) {
    if spec.is_near_existence_boundary() {
        eprintln!(
            "warning: n = {} amplitude {:e} is at the even existence boundary (2T/n close to 2*pi)",
            spec.n(),
            spec.amplitude()
        );
    }
}

#[derive(Serialize)]
struct AmplitudeRow {
    n: u32,
    parity: Parity,
    status: &'static str,
    amplitude: Option<f64>,
    modulus: Option<f64>,
    omega: Option<f64>,
    period: Option<f64>,
    energy: Option<f64>,
}

fn amplitudes(args: AmplitudesArgs) -> Result<(), Failure> {
    if !(args.delay.is_finite() && args.delay > 0.0) {
        return Err(Failure::Usage(format!("--delay must be positive, got {}", args.delay)));
    }
    let mut rows = Vec::with_capacity(args.n_max as usize);
    for n in 1..=args.n_max {
        let row = match solve_amplitude(args.delay, n) {
            Ok(spec) => {
                warn_boundary(&spec);
                AmplitudeRow {
                    n,
                    parity: spec.parity(),
                    status: "ok",
                    amplitude: Some(spec.amplitude()),
                    modulus: Some(spec.modulus().value()),
                    omega: Some(spec.omega()),
                    period: Some(spec.period()),
                    energy: Some(spec.energy()),
                }
            }
            Err(Error::NoSolution(_)) => AmplitudeRow {
                n,
                parity: Parity::of(n),
                status: "no solution",
                amplitude: None,
                modulus: None,
                omega: None,
                period: None,
                energy: None,
            },
            Err(e) => return Err(e.into()),
        };
        rows.push(row);
    }
    let format = args.format;
    emit(Command::Amplitudes(args), |w| match format {
        Format::Json => writeln!(w, "{}", serde_json::to_string_pretty(&rows).expect("rows serialize")),
        Format::Csv => {
            writeln!(w, "n,parity,amplitude,modulus,omega,period,energy")?;
            for r in &rows {
                match (r.amplitude, r.modulus, r.omega, r.period, r.energy) {
                    (Some(a), Some(m), Some(om), Some(p), Some(h)) => {
                        writeln!(w, "{},{},{a},{m},{om},{p},{h}", r.n, r.parity)?
                    }
                    _ => writeln!(w, "{},{},no solution,,,,", r.n, r.parity)?,
                }
            }
            Ok(())
        }
    })
}

fn series(args: SeriesArgs) -> Result<(), Failure> {
    let parity: Parity = args.parity.into();
    let (quantity, argument, order, approx, exact) = match (args.amplitude, args.period) {
        (Some(a), _) => {
            let order = SeriesOrder::new(args.order.unwrap_or(SeriesOrder::PERIOD_FULL.max_power()));
            let approx = series_period_of_amplitude(a, parity, order)?;
            ("period", a, order, approx, minimal_period(a, parity)?)
        }
        (None, Some(p)) => {
            let order = SeriesOrder::new(args.order.unwrap_or(SeriesOrder::AMPLITUDE_FULL.max_power()));
            let approx = series_amplitude_of_period(p, parity, order)?;
            // The orbit with minimal period p is x_1 for T = p/2 (odd) or x_2 for T = p (even).
            let exact = match parity {
                Parity::Odd => solve_amplitude(p / 2.0, 1)?,
                Parity::Even => solve_amplitude(p, 2)?,
            };
            ("amplitude", p, order, approx, exact.amplitude())
        }
        (None, None) => return Err(Failure::Usage("one of --amplitude or --period is required".into())),
    };
    let rel = ((approx - exact) / exact).abs();
    let format = args.format;
    emit(Command::Series(args), |w| match format {
        Format::Json => writeln!(
            w,
            "{}",
            json!({
                "quantity": quantity,
                "argument": argument,
                "parity": parity,
                "order": order.max_power(),
                "series": approx,
                "exact": exact,
                "relative_error": rel,
            })
        ),
        Format::Csv => {
            writeln!(w, "quantity,argument,parity,order,series,exact,relative_error")?;
            writeln!(w, "{quantity},{argument},{parity},{},{approx},{exact},{rel:e}", order.max_power())
        }
    })
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let (amplitude, parity) = match (args.n, args.amplitude, args.parity) {
        (Some(n), _, _) => {
            let spec = solve_amplitude(args.delay, n)?;
            warn_boundary(&spec);
            (spec.amplitude(), spec.parity())
        }
        (None, Some(a), Some(p)) => (a, p.into()),
        _ => return Err(Failure::Usage("give --n, or --amplitude with --parity".into())),
    };
    let history = HistoryFunction::elliptic_cn(amplitude, parity)?;
    let config = SolverConfig::new(args.t_end).with_max_step(args.max_step).with_tolerances(args.atol, args.rtol);
    let stride = args.stride as usize;

    if args.t_end == 0.0 {
        // Still validate the configuration.
        integrate(args.delay, history, config)?;
        return emit(Command::Simulate(args), |w| writeln!(w, "{CSV_HEADER}"));
    }
    match integrate(args.delay, history, config) {
        Ok(traj) => emit(Command::Simulate(args), |w| traj.write_csv(w, stride)),
        Err(Error::Diverged { t_last, partial }) => {
            emit(Command::Simulate(args), |w| partial.write_csv(w, stride))?;
            Err(Failure::Numerical(format!("integration diverged after t = {t_last}; partial trajectory written")))
        }
        Err(e) => Err(e.into()),
    }
}

fn verify_lift(args: VerifyLiftArgs) -> Result<(), Failure> {
    let spec = solve_amplitude(args.delay, args.n)?;
    warn_boundary(&spec);
    let r = lift_residual(&spec, args.samples)?;
    let pass = r.dde_residual < LIFT_PASS && r.shift_residual < LIFT_PASS;
    let format = args.format;
    let (delay, n) = (args.delay, args.n);
    emit(Command::VerifyLift(args), |w| match format {
        Format::Json => writeln!(
            w,
            "{}",
            json!({
                "T": delay,
                "n": n,
                "amplitude": spec.amplitude(),
                "dde_residual": r.dde_residual,
                "shift_residual": r.shift_residual,
                "pass": pass,
            })
        ),
        Format::Csv => {
            writeln!(w, "T,n,amplitude,dde_residual,shift_residual,pass")?;
            writeln!(w, "{delay},{n},{},{:e},{:e},{pass}", spec.amplitude(), r.dde_residual, r.shift_residual)
        }
    })?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "lift residuals {:e}, {:e} exceed {LIFT_PASS:e}",
            r.dde_residual, r.shift_residual
        )))
    }
}

fn probe(args: ProbeArgs) -> Result<(), Failure> {
    let cfg = ProbeConfig { max_step: args.max_step, ..ProbeConfig::default() };
    let (delay, n, t_end) = (args.delay, args.n, args.t_end);
    let value = if args.floquet {
        let est = floquet_estimate_with(delay, n, args.perturbation, t_end, args.max_step)?;
        let amplitude = solve_amplitude(delay, n)?.amplitude() * (1.0 + args.perturbation);
        if args.full {
            serde_json::to_value(&est)
        } else {
            serde_json::to_value(est.record(amplitude))
        }
    } else if let Some(near_n) = args.near_n {
        let offset = match (args.offset, args.amplitude) {
            (Some(offset), _) => offset,
            (None, Some(a)) => a - solve_amplitude(delay, near_n)?.amplitude(),
            (None, None) => return Err(Failure::Usage("--near-n needs --offset or --amplitude".into())),
        };
        let report = heteroclinic_probe_with(delay, near_n, offset, n, t_end, &cfg)?;
        if args.full {
            serde_json::to_value(&report)
        } else {
            let a0 = report.initial_amplitude;
            Ok(json!({
                "departure": report.departure.record(delay, near_n, a0),
                "arrival": report.arrival.record(delay, near_n, a0),
                "dwell_time": report.dwell_time,
                "heteroclinic": report.is_heteroclinic(),
            }))
        }
    } else {
        let amplitude = match args.amplitude {
            Some(a) => a,
            None if n % 2 == 1 => solve_amplitude(delay, n)?.amplitude(),
            None => {
                return Err(Failure::Usage(
                    "even n needs --amplitude, --near-n with --offset, or --floquet".into(),
                ))
            }
        };
        let verdict = convergence_probe_with(delay, amplitude, n, t_end, &cfg)?;
        if args.full {
            serde_json::to_value(&verdict)
        } else {
            serde_json::to_value(verdict.record(delay, n, amplitude))
        }
    }
    .expect("probe report serializes");
    emit(Command::Probe(args), |w| writeln!(w, "{}", serde_json::to_string_pretty(&value).expect("json")))
}

fn replay(args: ReplayArgs) -> Result<(), Failure> {
    let recorded = manifest::read(&args.manifest)?;
    let mut invocation = recorded.invocation;
    if let Some(out) = args.out {
        if let Some(slot) = out_slot(&mut invocation) {
            *slot = Some(out);
        }
    }
    run(invocation)
}
