use std::fs::File;
use std::io::Write;
use std::path::Path;

use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};

use ultradiff::cantor::{
    box_counting_dimension, build_prefractal, minkowski_sum_coverage, similarity_dimension,
    IfsParams,
};
use ultradiff::diffusion::{
    deformed_heat_residual, propagator_msd, stretched_propagator, write_slices_csv, Grid2D,
    PropagatorParams,
};
use ultradiff::scaling::{
    classify_regime, fit_power_law, msd_exponent, sublinear_exponent, sublinear_scale, FitWindow,
    MsdSeries, Weighting,
};
use ultradiff::ultrametric::{cantor_function, valuation, Infinitesimal, ScaleContext};
use ultradiff::walker::{run_barrier_walk, run_ctrw, BarrierMetric, BarrierWalkConfig, CtrwConfig};

use crate::args::*;
use crate::output::{manifest_path, to_json, write_atomic, Manifest};
use crate::CliError;

/// What a subcommand produced.
struct Report {
    name: &'static str,
    params: Value,
    /// Primary CSV artifact, if the command has one.
    csv: Option<Vec<u8>>,
    /// Summary or result printed as one JSON line.
    json: Value,
}

struct Globals {
    seed: u64,
    workers: usize,
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let g = Globals {
        seed: cli.seed.unwrap_or(0),
        workers: cli.workers.unwrap_or(1),
    };
    if g.workers == 0 {
        return Err(CliError::Usage("workers must be at least 1".into()));
    }
    let out = cli.out.as_deref();
    let report = match cli.command {
        Group::Replay(r) => return replay(&r.manifest, cli.workers, out),
        Group::Cantor(c) => cantor(c)?,
        Group::Um(c) => um(c)?,
        Group::Scale(c) => scale(c)?,
        Group::Simulate(c) => simulate(c, &g)?,
        Group::Fit(FitCmd::Msd(a)) => fit_msd(a)?,
        Group::Prop(c) => prop(c, out.is_some())?,
    };
    emit(report, &g, out)
}

fn emit(report: Report, g: &Globals, out: Option<&Path>) -> Result<(), CliError> {
    let line = to_json(&report.json);
    let stdout = std::io::stdout();
    let Some(path) = out else {
        let mut lock = stdout.lock();
        match &report.csv {
            Some(csv) => lock.write_all(csv)?,
            None => writeln!(lock, "{line}")?,
        }
        return Ok(());
    };
    let body = match report.csv {
        Some(csv) => csv,
        None => format!("{line}\n").into_bytes(),
    };
    let manifest = Manifest {
        subcommand: report.name.to_string(),
        params: report.params,
        seed: g.seed,
        workers: g.workers,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: vec![path.display().to_string()],
        fitted_values: report.json,
    };
    write_atomic(path, &body)?;
    write_atomic(
        &manifest_path(path),
        format!("{}\n", to_json(&manifest)).as_bytes(),
    )?;
    writeln!(stdout.lock(), "{line}")?;
    Ok(())
}

fn params_of<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("argument structs serialise")
}

fn cantor(cmd: CantorCmd) -> Result<Report, CliError> {
    Ok(match cmd {
        CantorCmd::Gen(a) => {
            let pf = build_prefractal(IfsParams::new(a.eps0, a.beta)?, a.level)?;
            let mut csv = Vec::new();
            pf.write_csv(&mut csv)?;
            Report {
                name: "cantor gen",
                params: params_of(&a),
                csv: Some(csv),
                json: json!({
                    "intervals": pf.intervals().len(),
                    "gaps": pf.gaps().len(),
                    "retained_measure": pf.retained_measure(),
                }),
            }
        }
        CantorCmd::Dim(a) => {
            let params = IfsParams::new(a.eps0, a.beta)?;
            let pf = build_prefractal(params, a.level)?;
            let scales = if a.scales.is_empty() {
                default_scales(&params, a.level)?
            } else {
                a.scales.clone()
            };
            let boxed = box_counting_dimension(&pf, &scales)?;
            Report {
                name: "cantor dim",
                params: params_of(&a),
                csv: None,
                json: json!({
                    "similarity_dimension": similarity_dimension(&params),
                    "box_counting_dimension": boxed,
                    "scales": scales,
                }),
            }
        }
        CantorCmd::Sumcov(a) => {
            let params = IfsParams::new(a.eps0, a.beta)?;
            let pa = build_prefractal(params, a.level_a)?;
            let pb = build_prefractal(params, a.level_b.unwrap_or(a.level_a))?;
            let coverage = minkowski_sum_coverage(&pa, &pb)?;
            Report {
                name: "cantor sumcov",
                params: params_of(&a),
                csv: None,
                json: json!({ "coverage": coverage }),
            }
        }
    })
}

fn default_scales(params: &IfsParams, level: u32) -> Result<Vec<f64>, CliError> {
    if level < 7 {
        return Err(CliError::Usage(format!(
            "default box scales need level >= 7 (got {level}); pass --scales"
        )));
    }
    Ok((2..=level - 4)
        .map(|k| params.eps0() * params.beta().powi(k as i32))
        .collect())
}

fn um(cmd: UmCmd) -> Result<Report, CliError> {
    Ok(match cmd {
        UmCmd::Value(a) => {
            let ctx = ScaleContext::new(a.epsilon)?;
            let x = match (a.t, a.delta) {
                (Some(t), _) => Infinitesimal::numeric(&ctx, t)?,
                (None, Some(d)) => Infinitesimal::exponent(d)?,
                (None, None) => return Err(CliError::Usage("give --t or --delta".into())),
            };
            Report {
                name: "um value",
                params: params_of(&a),
                csv: None,
                json: json!({ "valuation": valuation(&ctx, x)? }),
            }
        }
        UmCmd::Cantorfn(a) => {
            let params = IfsParams::new(a.eps0, a.beta)?;
            Report {
                name: "um cantorfn",
                params: params_of(&a),
                csv: None,
                json: json!({ "value": cantor_function(&params, a.x, a.depth)? }),
            }
        }
    })
}

fn scale(cmd: ScaleCmd) -> Result<Report, CliError> {
    Ok(match cmd {
        ScaleCmd::Sublinear(a) => {
            let s = sublinear_exponent(a.epsilon)?;
            let scale = sublinear_scale(a.epsilon)?;
            let target = a.epsilon * (1.0 / a.epsilon).ln();
            Report {
                name: "scale sublinear",
                params: params_of(&a),
                csv: None,
                json: json!({
                    "exponent": s,
                    "scale": scale,
                    "identity_rel_dev": ((scale - target) / target).abs(),
                }),
            }
        }
        ScaleCmd::Classify(a) => Report {
            name: "scale classify",
            params: params_of(&a),
            csv: None,
            json: json!({
                "msd_exponent": msd_exponent(a.s_space, a.s_time)?,
                "regime": classify_regime(a.s_space, a.s_time)?.to_string(),
            }),
        },
    })
}

fn simulate(cmd: SimulateCmd, g: &Globals) -> Result<Report, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(g.workers)
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    let (name, params, msd, fit) = match cmd {
        SimulateCmd::Ctrw(a) => {
            let config = CtrwConfig {
                step_length: a.step_length,
                ..CtrwConfig::new(a.mu, a.walkers, a.t_max, g.seed)
            };
            config.validate()?;
            let r = pool.install(|| run_ctrw(&config))?;
            ("simulate ctrw", params_of(&a), r.msd, r.fit)
        }
        SimulateCmd::Barrier(a) => {
            let config = BarrierWalkConfig {
                params: IfsParams::new(a.eps0, a.beta)?,
                level: a.level,
                theta: a.theta,
                n_walkers: a.walkers,
                n_steps: a.steps,
                seed: g.seed,
                metric: match a.metric {
                    MetricArg::Intrinsic => BarrierMetric::Intrinsic,
                    MetricArg::Embedding => BarrierMetric::Embedding,
                },
            };
            config.validate()?;
            let r = pool.install(|| run_barrier_walk(&config))?;
            ("simulate barrier", params_of(&a), r.msd, r.fit)
        }
    };
    let mut csv = Vec::new();
    msd.write_csv(&mut csv)?;
    Ok(Report {
        name,
        params,
        csv: Some(csv),
        json: json!({
            "exponent": fit.exponent,
            "prefactor": fit.prefactor,
            "goodness": fit.goodness,
            "points": fit.points,
        }),
    })
}

fn parse_window(s: &str) -> Result<FitWindow, CliError> {
    match s {
        "last-decade" => Ok(FitWindow::LastDecade),
        "all" => Ok(FitWindow::All),
        _ => {
            let bad =
                || CliError::Usage(format!("window must be last-decade, all or lo:hi, got {s}"));
            let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            Ok(FitWindow::Range(lo, hi))
        }
    }
}

fn fit_msd(a: FitArgs) -> Result<Report, CliError> {
    let window = parse_window(&a.window)?;
    let file = File::open(&a.input)
        .map_err(|e| CliError::Usage(format!("cannot open {}: {e}", a.input.display())))?;
    let series = MsdSeries::read_csv(file)?;
    let weighting = if a.weighted {
        Weighting::InverseVariance
    } else {
        Weighting::Unweighted
    };
    let fit = fit_power_law(&series, window, weighting)?;
    Ok(Report {
        name: "fit msd",
        params: params_of(&a),
        csv: None,
        json: json!({
            "exponent": fit.exponent,
            "prefactor": fit.prefactor,
            "goodness": fit.goodness,
            "points": fit.points,
        }),
    })
}

fn propagator(s: &Shape) -> Result<PropagatorParams, CliError> {
    Ok(PropagatorParams::new(s.a, s.lambda, s.alpha, s.beta, s.nu)?)
}

fn prop(cmd: PropCmd, to_file: bool) -> Result<Report, CliError> {
    Ok(match cmd {
        PropCmd::Eval(a) => {
            let p = propagator(&a.shape)?;
            if to_file {
                if !(a.u_max > 0.0 && a.du > 0.0 && a.du <= a.u_max) {
                    return Err(CliError::Usage("need 0 < du <= u-max".into()));
                }
                let n = (2.0 * a.u_max / a.du).round() as usize;
                let us: Vec<f64> = (0..=n).map(|i| -a.u_max + i as f64 * a.du).collect();
                let mut csv = Vec::new();
                write_slices_csv(&p, &us, &a.taus, &mut csv)?;
                Report {
                    name: "prop eval",
                    params: params_of(&a),
                    csv: Some(csv),
                    json: json!({ "rows": us.len() * a.taus.len() }),
                }
            } else {
                let (Some(x), Some(t)) = (a.x, a.t) else {
                    return Err(CliError::Usage(
                        "prop eval needs --x and --t, or --out for slices".into(),
                    ));
                };
                Report {
                    name: "prop eval",
                    params: params_of(&a),
                    csv: None,
                    json: json!({ "value": stretched_propagator(x, t, &p)? }),
                }
            }
        }
        PropCmd::Residual(a) => {
            let p = propagator(&a.shape)?;
            let grid = Grid2D::uniform((-a.u_max, a.u_max), a.du, (a.tau_min, a.tau_max), a.dtau)?;
            Report {
                name: "prop residual",
                params: params_of(&a),
                csv: None,
                json: json!({ "residual": deformed_heat_residual(&p, &grid)? }),
            }
        }
        PropCmd::Msd(a) => {
            let m = propagator_msd(&propagator(&a.shape)?, &a.taus)?;
            Report {
                name: "prop msd",
                params: params_of(&a),
                csv: None,
                json: json!({
                    "coefficient": m.coefficient,
                    "max_rel_dev": m.max_rel_dev,
                    "points": m.points,
                }),
            }
        }
    })
}

/// Rebuilds the command line recorded in a manifest and runs it again.
fn replay(manifest: &Path, workers: Option<usize>, out: Option<&Path>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(manifest).map_err(|e| {
        CliError::Usage(format!("cannot read manifest {}: {e}", manifest.display()))
    })?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid manifest {}: {e}", manifest.display())))?;
    let mut argv: Vec<String> = vec!["ultradiff".into()];
    argv.extend(m.subcommand.split_whitespace().map(String::from));
    let Value::Object(params) = &m.params else {
        return Err(CliError::Usage("manifest params must be an object".into()));
    };
    for (k, v) in params {
        let flag = format!("--{k}");
        match v {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => argv.push(flag),
            Value::Array(items) if items.is_empty() => {}
            other => {
                argv.push(flag);
                argv.push(json_text(other)?);
            }
        }
    }
    argv.push("--seed".into());
    argv.push(m.seed.to_string());
    argv.push("--workers".into());
    argv.push(workers.unwrap_or(m.workers).to_string());
    let target = match out {
        Some(p) => p.display().to_string(),
        None => m
            .outputs
            .first()
            .cloned()
            .ok_or_else(|| CliError::Usage("manifest lists no outputs; pass --out".into()))?,
    };
    argv.push("--out".into());
    argv.push(target);
    let cli = Cli::try_parse_from(&argv).map_err(|e| {
        let text = e.render().to_string();
        CliError::Usage(
            text.lines()
                .next()
                .unwrap_or("invalid manifest")
                .to_string(),
        )
    })?;
    if matches!(cli.command, Group::Replay(_)) {
        return Err(CliError::Usage(
            "a manifest cannot replay another manifest".into(),
        ));
    }
    execute(cli)
}

fn json_text(v: &Value) -> Result<String, CliError> {
    Ok(match v {
        Value::String(s) => s.clone(),
        // f64 Display is the shortest string that parses back to the same value.
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.to_string(),
            (None, Some(i)) => i.to_string(),
            _ => n.as_f64().unwrap_or(f64::NAN).to_string(),
        },
        Value::Array(items) => items
            .iter()
            .map(json_text)
            .collect::<Result<Vec<_>, _>>()?
            .join(","),
        _ => return Err(CliError::Usage(format!("unsupported manifest value {v}"))),
    })
}
