//! Batch verification CLI: one JSON config per run, `report.json` and
//! `report.csv` out, exit code 0 iff every verdict is true and every
//! tolerance was met.

mod config;
mod output;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use output::{domain_label, fmt, header, write_reports, RunOutput};
use serde_json::json;
use std::path::PathBuf;
use ubsi::constants::{
    heat_constant, heat_constant_auto, laplace_constant, laplace_constant_auto, ConstantReport,
};
use ubsi::fields::ScalarField;
use ubsi::geometry::{heatball_volume, unit_heatball_volume, Domain, HeatballSpec};
use ubsi::harness::{
    change_of_variables_check, check_inequality, counterexample_sweep, lifting_check,
    rectangle_demo, verify_derivative_formulas, OperatorKind,
};
use ubsi::levelsets::{default_resolution, mc_measure_superlevel, Exponent};

#[derive(Parser)]
#[command(
    name = "ubsi",
    about = "Verify uniformly balancing sublevel inequalities at desk scale",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// JSON config file (schema documented in the README)
    #[arg(long)]
    config: PathBuf,
    /// Override the config's p list (repeatable; numbers or "inf")
    #[arg(long = "p")]
    p: Vec<String>,
    /// Override cells per axis for grid estimators
    #[arg(long)]
    resolution: Option<usize>,
    /// Override the RNG seed for Monte Carlo cross-checks
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json / report.csv
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate ||u||_p |{|u| >= c}|^(1/p') >= c for every configured p
    CheckInequality(CommonArgs),
    /// Sweep the det-Hessian counterexample family u_N = e^x sin(Ny)/N
    SweepGressman(CommonArgs),
    /// Compare both derivative formulas against finite differences
    VerifyDerivatives(CommonArgs),
    /// Compute the constructive constant and its threshold terms
    Constants(CommonArgs),
    /// Heatball volumes and the parabolic scaling law
    HeatballVolume(CommonArgs),
    /// Lift a verified inequality to a product domain
    LiftingCheck(CommonArgs),
    /// Push the inequality through an invertible linear map
    CovCheck(CommonArgs),
    /// Emit the rectangle family K(delta) and its bounds
    RectangleDemo(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CheckInequality(_) => "check-inequality",
            Command::SweepGressman(_) => "sweep-gressman",
            Command::VerifyDerivatives(_) => "verify-derivatives",
            Command::Constants(_) => "constants",
            Command::HeatballVolume(_) => "heatball-volume",
            Command::LiftingCheck(_) => "lifting-check",
            Command::CovCheck(_) => "cov-check",
            Command::RectangleDemo(_) => "rectangle-demo",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::CheckInequality(a)
            | Command::SweepGressman(a)
            | Command::VerifyDerivatives(a)
            | Command::Constants(a)
            | Command::HeatballVolume(a)
            | Command::LiftingCheck(a)
            | Command::CovCheck(a)
            | Command::RectangleDemo(a) => a,
        }
    }
}

fn parse_exponent(text: &str) -> anyhow::Result<Exponent> {
    if text == "inf" || text == "infinity" {
        return Ok(Exponent::Infinity);
    }
    let v: f64 = text.parse().with_context(|| format!("bad p value {text:?}"))?;
    Ok(Exponent::new(v)?)
}

/// Config with CLI flag overrides applied.
struct Run {
    config: RunConfig,
    p_override: Option<Vec<Exponent>>,
    resolution_override: Option<usize>,
    seed_override: Option<u64>,
    out: PathBuf,
}

impl Run {
    fn new(name: &str, args: &CommonArgs) -> anyhow::Result<Self> {
        let config = RunConfig::load(&args.config)?;
        config.expect_command(name)?;
        let p_override = if args.p.is_empty() {
            None
        } else {
            Some(
                args.p
                    .iter()
                    .map(|s| parse_exponent(s))
                    .collect::<anyhow::Result<Vec<_>>>()?,
            )
        };
        let out = args
            .out
            .clone()
            .or_else(|| config.out.clone())
            .unwrap_or_else(|| PathBuf::from("ubsi-out"));
        Ok(Self {
            resolution_override: args.resolution,
            seed_override: args.seed,
            p_override,
            config,
            out,
        })
    }

    fn p_list(&self) -> Vec<Exponent> {
        self.p_override.clone().unwrap_or_else(|| self.config.p_list())
    }

    fn resolution_for(&self, dim: usize) -> usize {
        self.resolution_override
            .or(self.config.resolution)
            .unwrap_or_else(|| default_resolution(dim))
    }

    fn seed(&self) -> u64 {
        self.seed_override.or(self.config.seed).unwrap_or(0)
    }

    fn field(&self) -> anyhow::Result<ScalarField> {
        self.config
            .field
            .as_ref()
            .ok_or_else(|| anyhow!("config needs a \"field\""))?
            .build()
    }

    fn domain(&self) -> anyhow::Result<Domain> {
        self.config
            .domain
            .clone()
            .ok_or_else(|| anyhow!("config needs a \"domain\""))
    }

    fn operator(&self) -> anyhow::Result<OperatorKind> {
        self.config
            .operator
            .ok_or_else(|| anyhow!("config needs an \"operator\""))
    }
}

fn run_check_inequality(run: &Run) -> anyhow::Result<RunOutput> {
    let field = run.field()?;
    let dom = run.domain()?;
    let operator = run.operator()?;
    let resolution = run.resolution_for(dom.dim());
    let p_list = run.p_list();
    let report = check_inequality(
        &field,
        &dom,
        operator,
        &p_list,
        run.config.c,
        resolution,
        &run.config.quad(),
        run.config.safety(),
        run.config.heat_extra_dim(),
    )?;
    let mc = run.config.mc_samples.map(|samples| {
        mc_measure_superlevel(&field, &dom, report.c, samples, run.seed())
    });
    let mut rows = Vec::new();
    for r in &report.rows {
        rows.push(vec![
            "check-inequality".to_string(),
            report.field_label.clone(),
            domain_label(&dom),
            format!("{operator:?}"),
            fmt(report.c),
            r.p.to_string(),
            fmt(r.norm.value),
            fmt(r.superlevel.measure),
            fmt(r.superlevel.inner),
            fmt(r.superlevel.outer),
            fmt(r.lhs),
            r.verdict.to_string(),
        ]);
    }
    let success = report.all_verdicts_true();
    Ok(RunOutput {
        json: json!({
            "command": "check-inequality",
            "report": report,
            "mc_superlevel": mc,
            "seed": run.seed(),
        }),
        csv_header: header(&[
            "command", "field", "domain", "operator", "c", "p", "norm",
            "superlevel", "superlevel_inner", "superlevel_outer", "lhs", "verdict",
        ]),
        csv_rows: rows,
        success,
    })
}

fn run_sweep(run: &Run) -> anyhow::Result<RunOutput> {
    let spec = run
        .config
        .sweep
        .clone()
        .ok_or_else(|| anyhow!("config needs a \"sweep\" block"))?;
    let resolution = run.resolution_for(2);
    let report = counterexample_sweep(spec.c, spec.n_min..=spec.n_max, resolution)?;
    let rows = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n_param.to_string(),
                fmt(r.sup_grid),
                fmt(r.sup_analytic),
                fmt(r.superlevel_measure),
                fmt(r.superlevel_outer),
                fmt(r.lhs_product),
                fmt(r.dethess_min),
                r.hypothesis_ok.to_string(),
            ]
        })
        .collect();
    let success = report.rows.iter().all(|r| r.hypothesis_ok);
    Ok(RunOutput {
        json: json!({"command": "sweep-gressman", "report": report}),
        csv_header: header(&[
            "N", "sup_grid", "sup_analytic", "superlevel", "superlevel_outer",
            "lhs_product", "dethess_min", "hypothesis_ok",
        ]),
        csv_rows: rows,
        success,
    })
}

fn run_verify_derivatives(run: &Run) -> anyhow::Result<RunOutput> {
    let dims = run.config.derivative_dims.clone().unwrap_or_default();
    let table = verify_derivative_formulas(&dims.ball, &dims.heat, &run.config.quad())?;
    let rows = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.kind.clone(),
                r.n.to_string(),
                r.field_label.clone(),
                fmt(r.radius),
                fmt(r.formula),
                fmt(r.finite_difference),
                fmt(r.rel_err),
                r.degraded.to_string(),
            ]
        })
        .collect();
    let success = table.ok;
    Ok(RunOutput {
        json: json!({"command": "verify-derivatives", "report": table}),
        csv_header: header(&[
            "kind", "n", "field", "radius", "formula", "finite_difference", "rel_err", "degraded",
        ]),
        csv_rows: rows,
        success,
    })
}

fn run_constants(run: &Run) -> anyhow::Result<RunOutput> {
    let dom = run.domain()?;
    let operator = run.operator()?;
    let quad = run.config.quad();
    let safety = run.config.safety();
    let report = match operator {
        OperatorKind::Laplace => ConstantReport::Laplace(match run.config.delta {
            Some(delta) => laplace_constant(&dom, delta, safety)?,
            None => laplace_constant_auto(&dom, safety)?,
        }),
        OperatorKind::Heat => ConstantReport::Heat(match run.config.heat_radius {
            Some(radius) => {
                heat_constant(&dom, radius, run.config.heat_extra_dim(), &quad, safety)?
            }
            None => heat_constant_auto(&dom, run.config.heat_extra_dim(), &quad, safety)?,
        }),
        OperatorKind::DetHess => {
            bail!("no constructive constant exists for the det-Hessian class")
        }
    };
    let strictly_below = report
        .thresholds()
        .iter()
        .all(|(_, t)| report.c() < *t);
    let mut row = vec![
        "constants".to_string(),
        domain_label(&dom),
        format!("{operator:?}"),
        fmt(report.c()),
    ];
    for (name, value) in report.thresholds() {
        row.push(format!("{name}={}", fmt(value)));
    }
    Ok(RunOutput {
        json: json!({"command": "constants", "report": report, "strictly_below": strictly_below}),
        csv_header: header(&["command", "domain", "operator", "c", "term1", "term2", "term3"]),
        csv_rows: vec![{
            let mut r = row;
            while r.len() < 7 {
                r.push(String::new());
            }
            r
        }],
        success: strictly_below,
    })
}

fn run_heatball_volume(run: &Run) -> anyhow::Result<RunOutput> {
    let spec = run
        .config
        .heatball
        .clone()
        .ok_or_else(|| anyhow!("config needs a \"heatball\" block"))?;
    let quad = run.config.quad();
    let mut rows = Vec::new();
    let mut success = true;
    let mut entries = Vec::new();
    for &n in &spec.n {
        let unit = unit_heatball_volume(n, &quad)?;
        for &r in &spec.radii {
            let mut center = vec![0.0; n];
            center.push(0.0);
            let hb = HeatballSpec::new(center, r)?;
            let volume = heatball_volume(&hb, &quad)?;
            let scaling = volume / unit;
            let expected = r.powi(n as i32 + 2);
            let rel = (scaling - expected).abs() / expected;
            success &= rel <= 1e-6;
            entries.push(json!({
                "n": n, "r": r, "volume": volume, "unit_volume": unit,
                "scaling_ratio": scaling, "expected_ratio": expected, "rel_err": rel,
            }));
            rows.push(vec![
                n.to_string(),
                fmt(r),
                fmt(volume),
                fmt(unit),
                fmt(scaling),
                fmt(expected),
                fmt(rel),
            ]);
        }
    }
    Ok(RunOutput {
        json: json!({"command": "heatball-volume", "entries": entries}),
        csv_header: header(&[
            "n", "r", "volume", "unit_volume", "scaling_ratio", "expected_ratio", "rel_err",
        ]),
        csv_rows: rows,
        success,
    })
}

fn run_lifting(run: &Run) -> anyhow::Result<RunOutput> {
    let field = run.field()?;
    let dom1 = run.domain()?;
    let spec = run
        .config
        .lifting
        .clone()
        .ok_or_else(|| anyhow!("config needs a \"lifting\" block"))?;
    let resolution = run.resolution_for(dom1.dim() + spec.domain2.dim());
    let p = run
        .p_list()
        .first()
        .copied()
        .unwrap_or(Exponent::Finite(2.0));
    let c = match run.config.c {
        Some(c) => c,
        None => laplace_constant_auto(&dom1, run.config.safety())?.c,
    };
    let report = lifting_check(&field, &dom1, &spec.domain2, c, p, resolution)?;
    let success = report.base_verdict && report.verdict;
    Ok(RunOutput {
        json: json!({"command": "lifting-check", "c": c, "p": p, "report": report}),
        csv_header: header(&[
            "command", "field", "c", "p", "base_lhs", "lifted_lhs", "bound", "verdict",
        ]),
        csv_rows: vec![vec![
            "lifting-check".to_string(),
            field.label.clone(),
            fmt(c),
            p.to_string(),
            fmt(report.base_lhs),
            fmt(report.lifted_lhs),
            fmt(report.bound),
            report.verdict.to_string(),
        ]],
        success,
    })
}

fn run_cov(run: &Run) -> anyhow::Result<RunOutput> {
    let field = run.field()?;
    let dom = run.domain()?;
    let spec = run
        .config
        .cov
        .clone()
        .ok_or_else(|| anyhow!("config needs a \"cov\" block"))?;
    let resolution = run.resolution_for(dom.dim());
    let p = run
        .p_list()
        .first()
        .copied()
        .unwrap_or(Exponent::Finite(2.0));
    let c = match run.config.c {
        Some(c) => c,
        None => laplace_constant_auto(&dom, run.config.safety())?.c,
    };
    let report = change_of_variables_check(&field, &dom, &spec.map(), c, p, resolution)?;
    let success = report.verdict;
    Ok(RunOutput {
        json: json!({"command": "cov-check", "c": c, "p": p, "report": report}),
        csv_header: header(&[
            "command", "field", "c", "p", "det", "original_lhs", "mapped_lhs",
            "mapped_bound", "verdict",
        ]),
        csv_rows: vec![vec![
            "cov-check".to_string(),
            field.label.clone(),
            fmt(c),
            p.to_string(),
            fmt(report.det),
            fmt(report.original_lhs),
            fmt(report.mapped_lhs),
            fmt(report.mapped_bound),
            report.verdict.to_string(),
        ]],
        success,
    })
}

fn run_rectangle(run: &Run) -> anyhow::Result<RunOutput> {
    let spec = run
        .config
        .rectangle
        .clone()
        .ok_or_else(|| anyhow!("config needs a \"rectangle\" block"))?;
    let demo = rectangle_demo(spec.delta)?;
    let rows = demo
        .family
        .rectangles
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                (i + 1).to_string(),
                fmt(r[0].0),
                fmt(r[0].1),
                fmt(r[1].0),
                fmt(r[1].1),
            ]
        })
        .collect();
    let success = demo.measure_ok && demo.gaps_ok && demo.containment_ok;
    Ok(RunOutput {
        json: json!({"command": "rectangle-demo", "report": demo}),
        csv_header: header(&["index", "x_lo", "x_hi", "y_lo", "y_hi"]),
        csv_rows: rows,
        success,
    })
}

fn main() {
    let cli = Cli::parse();
    let name = cli.command.name();
    let result = Run::new(name, cli.command.args()).and_then(|run| {
        let output = match &cli.command {
            Command::CheckInequality(_) => run_check_inequality(&run)?,
            Command::SweepGressman(_) => run_sweep(&run)?,
            Command::VerifyDerivatives(_) => run_verify_derivatives(&run)?,
            Command::Constants(_) => run_constants(&run)?,
            Command::HeatballVolume(_) => run_heatball_volume(&run)?,
            Command::LiftingCheck(_) => run_lifting(&run)?,
            Command::CovCheck(_) => run_cov(&run)?,
            Command::RectangleDemo(_) => run_rectangle(&run)?,
        };
        write_reports(&run.out, &output)?;
        Ok(output)
    });
    match result {
        Ok(output) => {
            if output.success {
                println!("{name}: all verdicts true, tolerances met");
                std::process::exit(0);
            } else {
                eprintln!("{name}: verdict failure or tolerance exceeded");
                std::process::exit(1);
            }
        }
        Err(err) => {
            eprintln!("{name}: error: {err:#}");
            std::process::exit(2);
        }
    }
}
