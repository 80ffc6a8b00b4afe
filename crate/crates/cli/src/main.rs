use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use seiard::config::{self, RunConfig};
use seiard::dynamics::{integrate, seeded_state};
use seiard::pipeline;
use seiard::posterior::{marginal_density, neg_log_density};
use seiard::{Error, ParamId};

#[derive(Parser)]
#[command(name = "seiard", version, about = "SEIARD simulation, fitting and identifiability analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration or a manifest written by an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one configuration field, e.g. `--set mcmc.n_chains=2`.
    #[arg(long = "set", value_name = "PATH=VALUE", global = true)]
    set: Vec<String>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured truth and write the observed series.
    Simulate,
    /// Fit the configured variant on the fit window.
    Fit,
    /// Profile likelihood curves and intervals.
    Profile {
        /// Comma separated parameter names.
        #[arg(long, value_delimiter = ',')]
        params: Option<Vec<String>>,
        /// Comma separated training lengths in days.
        #[arg(long, value_delimiter = ',')]
        windows: Option<Vec<String>>,
    },
    /// Sample the posterior and summarize it.
    Mcmc,
    /// Local sensitivity rank screen at the dataset truth.
    Report,
    /// Forecast error of both variants beyond the fit window.
    ForecastEval {
        /// Comma separated days past the end of the fit window.
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<String>>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Profile { .. } => "profile",
            Command::Mcmc => "mcmc",
            Command::Report => "report",
            Command::ForecastEval { .. } => "forecast-eval",
        }
    }
}

/// Marks errors that are the caller's fault.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::Config(_) | Error::Contract(_) | Error::ParameterDomain { .. } | Error::Json(_) => 2,
                e if e.is_numeric() => 3,
                _ => 1,
            };
        }
    }
    1
}

fn list_override(path: &str, items: &[String], quote: bool) -> anyhow::Result<String> {
    let items: Vec<&str> = items.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(usage(format!("`{path}` list must not be empty")));
    }
    let body: Vec<String> = items
        .iter()
        .map(|s| if quote { format!("\"{s}\"") } else { (*s).to_string() })
        .collect();
    Ok(format!("{path}=[{}]", body.join(",")))
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let doc = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut doc: Value = serde_json::from_str(&text)
                .map_err(|e| usage(format!("{} is not valid JSON: {e}", path.display())))?;
            if let Some(inner) = doc.get("config").filter(|_| doc.get("command").is_some()) {
                doc = inner.clone();
            }
            Some(doc)
        }
        None => None,
    };
    let mut overrides = cli.set.clone();
    match &cli.command {
        Command::Profile { params, windows } => {
            if let Some(p) = params {
                for name in p.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
                    name.parse::<ParamId>().map_err(|e| usage(e.to_string()))?;
                }
                overrides.push(list_override("profile.params", p, true)?);
            }
            if let Some(w) = windows {
                overrides.push(list_override("profile.windows", w, false)?);
            }
        }
        Command::ForecastEval { horizons: Some(h) } => overrides.push(list_override("forecast.horizons", h, false)?),
        _ => {}
    }
    Ok(config::load(doc, &overrides)?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let cfg = load_config(&cli)?;
    let out = Output::create(&cli.out)?;
    out.json(
        "manifest.json",
        &json!({ "command": cli.command.name(), "seed": cfg.seed, "fit_budget": cfg.fit_budget(), "config": cfg }),
    )?;
    match &cli.command {
        Command::Simulate => simulate(&cfg, &out),
        Command::Fit => fit(&cfg, &out),
        Command::Profile { .. } => profile(&cfg, &out),
        Command::Mcmc => mcmc(&cfg, &out),
        Command::Report => report(&cfg, &out),
        Command::ForecastEval { .. } => forecast(&cfg, &out),
    }
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn create(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Output { dir: dir.to_path_buf() })
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        let path = self.dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    fn csv<I, R>(&self, name: &str, header: &[String], rows: I) -> anyhow::Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn fmt(x: f64) -> String {
    x.to_string()
}

fn param_header(first: &[&str], last: &[&str]) -> Vec<String> {
    let mut h = header(first);
    h.extend(ParamId::ALL.iter().map(|p| p.name().to_string()));
    h.extend(header(last));
    h
}

fn param_cells(p: &seiard::ModelParams64) -> impl Iterator<Item = String> + '_ {
    ParamId::ALL.into_iter().map(move |id| fmt(p.get(id)))
}

fn simulate(cfg: &RunConfig, out: &Output) -> anyhow::Result<()> {
    let d = &cfg.dataset;
    let ds = pipeline::dataset(cfg)?;
    let init = seeded_state(&d.true_params, d.population_n, &d.init_observed, d.active_split)?;
    let traj = integrate(&d.true_params, &init, d.population_n, d.horizon, d.dt)?;
    out.csv(
        "trajectory.csv",
        &header(&["t", "S", "E", "I", "A_recov", "A_fatal", "R", "D"]),
        traj.states.iter().enumerate().map(|(t, s)| {
            std::iter::once(t.to_string()).chain(s.to_array().into_iter().map(fmt))
        }),
    )?;
    let o = &ds.observed;
    out.csv(
        "observed.csv",
        &header(&["t", "active", "recovered", "deceased", "total"]),
        (0..o.len()).map(|i| {
            vec![o.days[i].to_string(), fmt(o.active[i]), fmt(o.recovered[i]), fmt(o.deceased[i]), fmt(o.total[i])]
        }),
    )?;
    out.json(
        "dataset.json",
        &json!({ "config": ds.config, "rows": o.len(), "max_mass_drift": traj.max_mass_drift() }),
    )
}

fn fit(cfg: &RunConfig, out: &Output) -> anyhow::Result<()> {
    let ds = pipeline::dataset(cfg)?;
    let space = cfg.space()?;
    let r = pipeline::fit(cfg, &ds, cfg.window, 0)?;
    let mut best = f64::INFINITY;
    out.csv(
        "trace.csv",
        &param_header(&["eval"], &["loss", "best_loss"]),
        r.evaluations.iter().enumerate().map(|(k, e)| {
            best = best.min(e.loss);
            std::iter::once(k.to_string())
                .chain(param_cells(&e.params))
                .chain([fmt(e.loss), fmt(best)])
                .collect::<Vec<_>>()
        }),
    )?;
    out.json(
        "fit.json",
        &json!({
            "variant": cfg.variant,
            "window": cfg.window,
            "method": cfg.fit.method,
            "budget": cfg.fit_budget(),
            "budget_used": r.budget_used,
            "best_loss": r.best_loss,
            "best_params": r.best_params,
            "free": space.free(),
            "pinned": space.pinned,
        }),
    )
}

fn profile(cfg: &RunConfig, out: &Output) -> anyhow::Result<()> {
    let ds = pipeline::dataset(cfg)?;
    for window in pipeline::profile_windows(cfg)? {
        let a = pipeline::analyse_window(cfg, &ds, window)?;
        let tag = format!("d{}", window.t_end);
        out.json(&format!("fit_{tag}.json"), &json!({ "best_loss": a.fit.best_loss, "best_params": a.fit.best_params }))?;
        if let Some(p) = &a.posterior {
            out.json(&format!("posterior_{tag}.json"), p)?;
        }
        for r in &a.profiles {
            let name = format!("profile_{}_{tag}", r.curve.param);
            out.csv(
                &format!("{name}.csv"),
                &header(&["theta", "profiled_loss"]),
                r.curve.grid.iter().zip(&r.curve.profiled_loss).map(|(g, l)| [fmt(*g), fmt(*l)]),
            )?;
            out.json(
                &format!("{name}.json"),
                &json!({
                    "param": r.curve.param,
                    "variant": r.variant,
                    "window": r.window,
                    "threshold_mode": cfg.profile.threshold,
                    "verdict": r.verdict,
                    "interval": r.interval,
                    "hull": r.interval.hull(),
                    "min_loss": r.curve.min_loss(),
                    "failed_points": r.curve.failed.iter().filter(|f| **f).count(),
                    "argmins": r.curve.argmins,
                }),
            )?;
        }
    }
    Ok(())
}

fn mcmc(cfg: &RunConfig, out: &Output) -> anyhow::Result<()> {
    let ds = pipeline::dataset(cfg)?;
    let space = cfg.space()?;
    let run = pipeline::mcmc(cfg, &ds, cfg.window)?;
    let summary = pipeline::summarize(&ds, &space, &run, cfg.window, cfg.profile.alpha)?;
    out.csv(
        "chains.csv",
        &param_header(&["chain", "draw"], &["s", "log_post"]),
        run.chains.iter().flat_map(|c| {
            c.draws.iter().enumerate().map(move |(k, d)| {
                [c.chain_id.to_string(), k.to_string()]
                    .into_iter()
                    .chain(param_cells(&d.theta))
                    .chain([fmt(d.s), fmt(d.log_post)])
                    .collect::<Vec<_>>()
            })
        }),
    )?;
    let names: Vec<&str> = summary.correlation_params.iter().map(|p| p.name()).collect();
    let mut corr_header = header(&["param"]);
    corr_header.extend(names.iter().map(|s| s.to_string()));
    out.csv(
        "correlation.csv",
        &corr_header,
        summary.correlation.values.iter().zip(&names).map(|(row, n)| {
            std::iter::once(n.to_string()).chain(row.iter().map(|v| fmt(*v))).collect::<Vec<_>>()
        }),
    )?;
    for id in space.free() {
        out.json(
            &format!("hpdi_{id}.json"),
            &json!({
                "param": id,
                "hpdi": summary.hpdi[&id],
                "mean": summary.mean[&id],
                "rhat": summary.rhat.get(&id),
            }),
        )?;
        let density = marginal_density(&run.pooled(id), None)?;
        let nld = neg_log_density(&density);
        out.csv(
            &format!("density_{id}.csv"),
            &header(&["theta", "density", "neg_log_density"]),
            density
                .grid
                .iter()
                .zip(&density.values)
                .zip(&nld.values)
                .map(|((g, v), n)| [fmt(*g), fmt(*v), fmt(*n)]),
        )?;
    }
    out.json(
        "chains.json",
        &json!({
            "rhat": run.rhat,
            "max_rhat": run.max_rhat(),
            "chains": run.chains.iter().map(|c| json!({
                "chain": c.chain_id,
                "draws": c.draws.len(),
                "accept_rate": c.accept_rate,
                "burn_in_accept_rate": c.burn_in_accept_rate,
                "proposal_scale": c.proposal_scale,
                "start": c.start,
            })).collect::<Vec<_>>(),
        }),
    )?;
    out.json("posterior.json", &summary)
}

fn report(cfg: &RunConfig, out: &Output) -> anyhow::Result<()> {
    let r = pipeline::structural(cfg)?;
    let mut h = header(&["t", "series"]);
    h.extend(r.quantities.iter().map(|q| q.name().to_string()));
    let series = ["active", "recovered", "deceased"];
    out.csv(
        "sensitivity.csv",
        &h,
        r.matrix.iter().enumerate().map(|(k, row)| {
            [r.times[k / 3].to_string(), series[k % 3].to_string()]
                .into_iter()
                .chain(row.iter().map(|v| fmt(*v)))
                .collect::<Vec<_>>()
        }),
    )?;
    out.json(
        "structural.json",
        &json!({
            "variant": cfg.variant,
            "quantities": r.quantities,
            "singular_values": r.singular_values,
            "numeric_rank": r.numeric_rank,
            "full_rank": r.is_full_rank(),
            "rank_tolerance": r.rank_tolerance,
            "condition_number": r.condition_number,
            "near_null": r.near_null,
        }),
    )
}

fn forecast(cfg: &RunConfig, out: &Output) -> anyhow::Result<()> {
    let ds = pipeline::dataset(cfg)?;
    let table = pipeline::forecast_eval(cfg, &ds)?;
    out.csv(
        "forecast.csv",
        &header(&["variant", "repeat", "horizon", "train_loss", "test_mape"]),
        table.rows.iter().flat_map(|r| {
            table.horizons.iter().zip(&r.test_mape).map(move |(h, m)| {
                [r.variant.name().to_string(), r.repeat.to_string(), h.to_string(), fmt(r.train_loss), fmt(*m)]
            })
        }),
    )?;
    out.json("forecast.json", &table)
}
