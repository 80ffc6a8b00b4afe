//! End-to-end acceptance checks. Every test prints one `criterion N` line
//! with its verdict and the measured numbers, then asserts.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seiard::config::{GridSpec, RunConfig, Variant};
use seiard::dynamics::{integrate, seeded_state};
use seiard::loss::{fit_loss, FitWindow};
use seiard::mcmc::{
    draw_inverse_gamma, posterior_shape, run_chains_with, Adaptation, GibbsTarget, LikelihoodComponents, McmcConfig,
    McmcRun, SeiardTarget,
};
use seiard::optimize::{OptResult, SearchSpace};
use seiard::pipeline::{self, PosteriorSummary, ProfileReport};
use seiard::posterior::hpdi;
use seiard::{Dataset64, ModelParams64, ParamId, ParamTable};

const TRUE_BETA: f64 = 0.25;
const TRUE_P_FATAL: f64 = 0.03;

fn report(n: u32, name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {n:>2} {verdict} [{name}] {detail}");
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

fn shared_grids(cfg: &mut RunConfig) {
    cfg.profile.params = vec![ParamId::Beta, ParamId::PFatal];
    cfg.profile.grids.insert(
        ParamId::Beta,
        GridSpec {
            lo: 0.0,
            hi: 1.0,
            points: Some(41),
            spacing: None,
        },
    );
    cfg.profile.grids.insert(
        ParamId::PFatal,
        GridSpec {
            lo: 0.0,
            hi: 0.5,
            points: Some(41),
            spacing: None,
        },
    );
}

/// Fit, posterior and profiles of one variant on the reference 28-day window.
struct VariantRun {
    cfg: RunConfig,
    ds: Dataset64,
    fit: OptResult,
    mcmc: McmcRun,
    mcmc_time: Duration,
    posterior: PosteriorSummary,
    beta: ProfileReport,
    p_fatal: ProfileReport,
}

fn variant_run(variant: Variant) -> VariantRun {
    let mut cfg = RunConfig::reference(variant);
    shared_grids(&mut cfg);
    let ds = pipeline::dataset(&cfg).unwrap();
    let window = cfg.window;
    let fit = pipeline::fit(&cfg, &ds, window, 0).unwrap();
    let t = Instant::now();
    let mcmc = pipeline::mcmc(&cfg, &ds, window).unwrap();
    let mcmc_time = t.elapsed();
    let posterior = pipeline::summarize(&ds, &cfg.space().unwrap(), &mcmc, window, 0.95).unwrap();
    let profile = |id: ParamId| {
        let grid = pipeline::profile_grid(&cfg, &cfg.space().unwrap(), id, fit.best_params.get(id)).unwrap();
        pipeline::profile(&cfg, &ds, window, id, &grid, &fit.best_params, Some(posterior.loss_threshold)).unwrap()
    };
    let beta = profile(ParamId::Beta);
    let p_fatal = profile(ParamId::PFatal);
    VariantRun {
        cfg,
        ds,
        fit,
        mcmc,
        mcmc_time,
        posterior,
        beta,
        p_fatal,
    }
}

fn reparam() -> &'static VariantRun {
    static RUN: OnceLock<VariantRun> = OnceLock::new();
    RUN.get_or_init(|| variant_run(Variant::Reparam))
}

fn original() -> &'static VariantRun {
    static RUN: OnceLock<VariantRun> = OnceLock::new();
    RUN.get_or_init(|| variant_run(Variant::Original))
}

fn truth_trajectory(dt: f64) -> Vec<[f64; 7]> {
    let d = RunConfig::default().dataset;
    let init = seeded_state(&d.true_params, d.population_n, &d.init_observed, d.active_split).unwrap();
    let traj = integrate(&d.true_params, &init, d.population_n, d.horizon, dt).unwrap();
    traj.states.iter().map(|s| s.to_array()).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn criterion_01_population_is_conserved() {
    let t = Instant::now();
    let states = truth_trajectory(0.1);
    let elapsed = t.elapsed();
    let drift = states
        .iter()
        .map(|s| (s.iter().sum::<f64>() - 1e7).abs())
        .fold(0.0, f64::max);
    report(
        1,
        "conservation",
        drift <= 10.0 && elapsed < Duration::from_secs(1) && states.len() == 401,
        format!("max |total - N| = {drift:.3e} persons over {} days in {elapsed:?}", states.len() - 1),
    );
}

#[test]
fn criterion_02_integrator_is_fourth_order() {
    let reference = truth_trajectory(0.0125);
    let err = |dt: f64| {
        truth_trajectory(dt)
            .iter()
            .zip(&reference)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(0.1), err(0.05));
    let ratio = coarse / fine;
    report(
        2,
        "integrator order",
        (12.0..=20.0).contains(&ratio),
        format!("max error dt=0.1 {coarse:.3e}, dt=0.05 {fine:.3e}, ratio {ratio:.2}"),
    );
}

#[test]
fn criterion_03_loss_vanishes_at_truth() {
    let cfg = RunConfig::default();
    let ds = pipeline::dataset(&cfg).unwrap();
    let loss = fit_loss(&ds, &cfg.dataset.true_params, cfg.window).unwrap();
    report(3, "loss self-consistency", loss <= 1e-9, format!("fit_loss(truth) = {loss:e}"));
}

#[test]
fn criterion_04_reparam_fit_recovers_truth() {
    let cfg = RunConfig::reference(Variant::Reparam);
    assert_eq!(cfg.fit_budget(), 500);
    let ds = pipeline::dataset(&cfg).unwrap();
    let t = Instant::now();
    let fits: Vec<ModelParams64> = (0..5)
        .map(|k| pipeline::fit(&cfg, &ds, FitWindow::leading(28).unwrap(), k).unwrap().best_params)
        .collect();
    let elapsed = t.elapsed();
    let beta = median(fits.iter().map(|p| p.beta).collect());
    let p_fatal = median(fits.iter().map(|p| p.p_fatal).collect());
    let beta_err = (beta / TRUE_BETA - 1.0).abs();
    let p_err = (p_fatal / TRUE_P_FATAL - 1.0).abs();
    report(
        4,
        "reparam recovery",
        beta_err <= 0.05 && p_err <= 0.10 && elapsed < Duration::from_secs(120),
        format!(
            "median beta {beta:.4} ({:.2}%), median p_fatal {p_fatal:.5} ({:.2}%), 5 fits in {elapsed:?}",
            100.0 * beta_err,
            100.0 * p_err
        ),
    );
}

fn strictly_inside(inner: [f64; 2], outer: [f64; 2]) -> bool {
    inner[0] >= outer[0] && inner[1] <= outer[1] && inner != outer
}

#[test]
fn criterion_05_reparam_profiles_are_tighter() {
    let (r, o) = (reparam(), original());
    let rb = r.beta.interval.hull().expect("reparam beta interval");
    let ob = o.beta.interval.hull().expect("original beta interval");
    let beta_ok = strictly_inside(rb, ob);
    let rp = &r.p_fatal.interval;
    let op = &o.p_fatal.interval;
    let p_ok = op.is_censored() || op.hull_width() >= 3.0 * rp.hull_width();
    report(
        5,
        "profile intervals",
        beta_ok && p_ok,
        format!(
            "beta reparam {rb:.4?} (threshold {:.3}) in original {ob:.4?} (threshold {:.3}); p_fatal reparam {:.4?} \
             original {:.4?} censored {}",
            r.beta.interval.threshold,
            o.beta.interval.threshold,
            rp.hull(),
            op.hull(),
            op.is_censored()
        ),
    );
}

#[test]
fn criterion_06_reparam_posterior_is_narrower() {
    let (r, o) = (reparam(), original());
    let rh = &r.posterior.hpdi[&ParamId::Beta];
    let oh = &o.posterior.hpdi[&ParamId::Beta];
    let rhat = r.mcmc.rhat[&ParamId::Beta];
    let draws = r.mcmc.chains.iter().map(|c| c.draws.len()).sum::<usize>();
    report(
        6,
        "posterior HPDI",
        rh.contains(TRUE_BETA)
            && rh.width() < oh.width()
            && rhat < 1.1
            && r.cfg.mcmc.n_chains == 4
            && r.cfg.mcmc.n_samples == 20_000
            && r.mcmc_time + o.mcmc_time < Duration::from_secs(900),
        format!(
            "reparam beta HPDI [{:.4}, {:.4}] Rhat(beta) {rhat:.3} (max over free {:.3}, {draws} draws); \
             original [{:.4}, {:.4}] Rhat(beta) {:.3}; sampling {:?} + {:?}",
            rh.lo,
            rh.hi,
            r.mcmc.max_rhat(),
            oh.lo,
            oh.hi,
            o.mcmc.rhat[&ParamId::Beta],
            r.mcmc_time,
            o.mcmc_time
        ),
    );
}

#[test]
fn criterion_07_variance_update_is_exact() {
    let window = FitWindow::new(0, 29).unwrap();
    let shape = posterior_shape(40.0, window);

    let cfg = RunConfig::reference(Variant::Reparam);
    let ds = pipeline::dataset(&cfg).unwrap();
    let target = SeiardTarget::new(&ds, window, LikelihoodComponents::Observed, 40.0, 2.0 / 700.0).unwrap();
    let truth = cfg.dataset.true_params;
    let zero = target.variance_posterior(&truth).unwrap();
    // Hand residuals at a shifted beta.
    let shifted = truth.with(ParamId::Beta, 0.26);
    let pred = ds.simulate(&shifted, 29).unwrap();
    let ln = |x: f64| x.max(1.0).ln();
    let mut ssr = 0.0;
    for (obs, fit) in [
        (&ds.observed.active, &pred.active),
        (&ds.observed.recovered, &pred.recovered),
        (&ds.observed.deceased, &pred.deceased),
    ] {
        for t in 1..=29 {
            let z = ln(obs[t]) - ln(obs[t - 1]);
            let zhat = ln(fit[t]) - ln(fit[t - 1]);
            ssr += (z - zhat) * (z - zhat);
        }
    }
    let (u_k, v_k) = target.variance_posterior(&shifted).unwrap();
    let v_ok = ((v_k - (2.0 / 700.0 + ssr / 2.0)) / v_k).abs() < 1e-12;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 100_000;
    let mean = (0..n).map(|_| draw_inverse_gamma(u_k, v_k, &mut rng)).sum::<f64>() / n as f64;
    let expected = v_k / (u_k - 1.0);
    let rel = (mean / expected - 1.0).abs();
    report(
        7,
        "variance update",
        shape == 96.0 && u_k == 96.0 && zero.1 == 2.0 / 700.0 && v_ok && rel < 0.02,
        format!(
            "u_k {shape} (expect 96), v_k at truth {:.6e}, v_k shifted {v_k:.6e} vs hand {:.6e}, \
             InvGamma mean off by {:.3}%",
            zero.1,
            2.0 / 700.0 + ssr / 2.0,
            100.0 * rel
        ),
    );
}

fn brute_force_hpdi(samples: &[f64], alpha: f64) -> (f64, f64) {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let k = (alpha * x.len() as f64).ceil() as usize;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=x.len() - k {
        for j in i + k - 1..x.len() {
            let w = x[j] - x[i];
            if j - i + 1 >= k && w < best.0 {
                best = (w, x[i], x[j]);
            }
        }
    }
    (best.1, best.2)
}

#[test]
fn criterion_08_hpdi_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cases = 0;
    let mut mismatches = 0;
    for n in [100usize, 257, 999, 1500, 2000] {
        for alpha in [0.5, 0.8, 0.95] {
            let draws: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3) * 10.0 - 2.0).collect();
            let h = hpdi(&draws, alpha).unwrap();
            let (lo, hi) = brute_force_hpdi(&draws, alpha);
            cases += 1;
            if h.lo != lo || h.hi != hi {
                mismatches += 1;
            }
        }
    }
    report(8, "HPDI oracle", mismatches == 0, format!("{cases} cases, {mismatches} mismatches"));
}

/// Gaussian in `beta`, with every other quantity pinned.
struct GaussianShim {
    mean: f64,
    sd: f64,
}

impl GibbsTarget for GaussianShim {
    fn statistic(&self, theta: &ModelParams64) -> Option<f64> {
        Some(theta.beta)
    }
    fn log_likelihood(&self, x: f64, _s: f64) -> f64 {
        -0.5 * ((x - self.mean) / self.sd).powi(2)
    }
    fn draw_variance(&self, _x: f64, _rng: &mut ChaCha8Rng) -> f64 {
        1.0
    }
}

fn shim_config(proposal_var: f64, hastings: bool, seed: u64) -> McmcConfig {
    let truth = ModelParams64::reference();
    let mut space = SearchSpace::new(ParamTable::search_bounds());
    for id in ParamId::ALL.into_iter().filter(|id| *id != ParamId::Beta) {
        space = space.pin(id, truth.get(id)).unwrap();
    }
    let mut c = McmcConfig::new(space, FitWindow::leading(28).unwrap(), seed);
    c.proposal_variances.set(ParamId::Beta, proposal_var);
    c.n_samples = 200_000;
    c.n_burn = 10_000;
    c.thin = 1;
    c.hastings_correction = hastings;
    c.adaptation = Adaptation::Off;
    c
}

/// Mean, sd and their Monte-Carlo standard errors from batch means.
fn moments_with_errors(run: &McmcRun) -> (f64, f64, f64, f64) {
    let batches = 50;
    let mut means = Vec::new();
    let mut all = Vec::new();
    for c in &run.chains {
        let v = c.values(ParamId::Beta);
        let b = v.len() / batches;
        for k in 0..batches {
            means.push(v[k * b..(k + 1) * b].iter().sum::<f64>() / b as f64);
        }
        all.extend(v);
    }
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let nb = means.len() as f64;
    let var_means = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (nb - 1.0);
    let se_mean = (var_means / nb).sqrt();
    let ess = (var / (var_means / nb)).min(n);
    (mean, var.sqrt(), se_mean, var.sqrt() / (2.0 * ess).sqrt())
}

/// Mean and sd of a Gaussian truncated to `[lo, hi]` by midpoint quadrature.
fn truncated_moments(mean: f64, sd: f64, lo: f64, hi: f64) -> (f64, f64) {
    let n = 200_000;
    let h = (hi - lo) / n as f64;
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let x = lo + (k as f64 + 0.5) * h;
        let w = (-0.5 * ((x - mean) / sd).powi(2)).exp();
        z += w;
        m1 += w * x;
        m2 += w * x * x;
    }
    let mu = m1 / z;
    (mu, (m2 / z - mu * mu).sqrt())
}

#[test]
fn criterion_09_sampler_calibration() {
    let interior = GaussianShim { mean: 0.5, sd: 0.05 };
    let run = run_chains_with(&interior, &shim_config(0.01, true, 3)).unwrap();
    let (m, s, se_m, se_s) = moments_with_errors(&run);
    let (am, asd) = truncated_moments(0.5, 0.05, 0.0, 1.0);
    let interior_ok = (m - am).abs() <= 3.0 * se_m && (s - asd).abs() <= 3.0 * se_s;

    let edge = GaussianShim { mean: 0.02, sd: 0.1 };
    let (em, _) = truncated_moments(0.02, 0.1, 0.0, 1.0);
    let with = run_chains_with(&edge, &shim_config(0.09, true, 5)).unwrap();
    let without = run_chains_with(&edge, &shim_config(0.09, false, 5)).unwrap();
    let (wm, _, wse, _) = moments_with_errors(&with);
    let (nm, _, nse, _) = moments_with_errors(&without);
    let corrected_ok = (wm - em).abs() <= 3.0 * wse;
    let bias_flagged = (nm - em).abs() > 5.0 * nse;
    report(
        9,
        "sampler calibration",
        interior_ok && corrected_ok && bias_flagged,
        format!(
            "interior mean {m:.5}±{se_m:.5} (exact {am:.5}) sd {s:.5}±{se_s:.5} (exact {asd:.5}); \
             near bound exact mean {em:.5}: corrected {wm:.5}±{wse:.5}, uncorrected {nm:.5}±{nse:.5}"
        ),
    );
}

#[test]
fn criterion_10_profile_tracks_posterior_density() {
    let r = reparam();
    let c = pipeline::density_comparison(&r.cfg, &r.ds, &r.mcmc, r.cfg.window, ParamId::Beta, &r.fit.best_params)
        .unwrap();
    report(
        10,
        "PL vs neg-log density",
        c.rank_correlation >= 0.9,
        format!(
            "Spearman {:.4} on {} points over [{:.4}, {:.4}]",
            c.rank_correlation,
            c.grid.len(),
            c.grid[0],
            c.grid[c.grid.len() - 1]
        ),
    );
}

#[test]
fn criterion_11_longer_windows_do_not_widen_profiles() {
    let mut cfg = RunConfig::reference(Variant::Reparam);
    cfg.profile.params = vec![ParamId::Beta];
    cfg.profile.grids.insert(
        ParamId::Beta,
        GridSpec {
            lo: 0.0,
            hi: 1.0,
            points: Some(81),
            spacing: None,
        },
    );
    cfg.mcmc.n_samples = 60_000;
    cfg.mcmc.n_burn = 45_000;
    let ds = pipeline::dataset(&cfg).unwrap();
    let mut widths = Vec::new();
    let mut detail = Vec::new();
    for days in [14, 28, 56] {
        let a = pipeline::analyse_window(&cfg, &ds, FitWindow::leading(days).unwrap()).unwrap();
        let i = &a.profiles[0].interval;
        let post = a.posterior.as_ref().unwrap();
        widths.push(i.hull_width());
        detail.push(format!(
            "{days}d width {:.4} hull {:.4?} threshold {:.3} Rhat(beta) {:.3}",
            i.hull_width(),
            i.hull(),
            i.threshold,
            post.rhat[&ParamId::Beta]
        ));
    }
    report(
        11,
        "window sweep",
        widths.windows(2).all(|w| w[1] <= w[0]),
        detail.join("; "),
    );
}

#[test]
fn criterion_12_reparam_forecasts_better() {
    let cfg = RunConfig::reference(Variant::Reparam);
    let ds = pipeline::dataset(&cfg).unwrap();
    let table = pipeline::forecast_eval(&cfg, &ds).unwrap();
    assert_eq!(cfg.forecast.repeats, 5);
    let orig = &table.median[&Variant::Original];
    let rep = &table.median[&Variant::Reparam];
    let mut ok = true;
    let mut detail = Vec::new();
    for (k, h) in table.horizons.iter().enumerate() {
        if *h >= 25 {
            ok &= rep[k] <= orig[k];
            detail.push(format!("h{h}: reparam {:.4} original {:.4}", rep[k], orig[k]));
        }
    }
    report(12, "forecast error", ok && !detail.is_empty(), detail.join(", "));
}

#[test]
fn criterion_13_structural_screen() {
    let rep = pipeline::structural(&RunConfig::reference(Variant::Reparam)).unwrap();
    let orig = pipeline::structural(&RunConfig::reference(Variant::Original)).unwrap();
    let rank_ok = rep.numeric_rank == 5 && (!orig.is_full_rank() || orig.condition_number > 1e6);
    // Joint loading: both quantities carry a substantial share of some
    // near-null direction and dominate it together.
    let joint = orig.near_null.iter().any(|d| {
        let tf = d.loadings[&ParamId::TFatal].abs();
        let pf = d.loadings[&ParamId::PFatal].abs();
        tf >= 0.3 && pf >= 0.3 && tf * tf + pf * pf >= 0.5
    });
    let weakest = orig.near_null.first().map(|d| d.dominant()).unwrap_or_default();
    let top: Vec<String> = weakest.iter().take(4).map(|(id, x)| format!("{id} {x:+.3}")).collect();
    let sigma_max = orig.singular_values[0];
    report(
        13,
        "structural screen",
        rank_ok && joint,
        format!(
            "reparam rank {}/5; original rank {}/8 cond {:.3e}; {} near-null directions (sigma/sigma_max {:?}), \
             weakest loads on [{}]; (t_fatal, p_fatal) joint near-null loading: {joint}",
            rep.numeric_rank,
            orig.numeric_rank,
            orig.condition_number,
            orig.near_null.len(),
            orig.near_null
                .iter()
                .map(|d| format!("{:.1e}", d.singular_value / sigma_max))
                .collect::<Vec<_>>(),
            top.join(", ")
        ),
    );
}

#[test]
fn criterion_14_hpdi_and_profile_interval_overlap() {
    let r = reparam();
    let h = &r.posterior.hpdi[&ParamId::Beta];
    let pl = r.beta.interval.hull().expect("beta interval");
    let inter = (h.hi.min(pl[1]) - h.lo.max(pl[0])).max(0.0);
    let union = h.hi.max(pl[1]) - h.lo.min(pl[0]);
    let jaccard = if union > 0.0 { inter / union } else { 1.0 };
    report(
        14,
        "HPDI vs PL interval",
        jaccard >= 0.5,
        format!(
            "HPDI [{:.4}, {:.4}], J_PL {pl:.4?} (threshold {:.3}), Jaccard {jaccard:.3}",
            h.lo, h.hi, r.beta.interval.threshold
        ),
    );
}

fn seiard(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_seiard"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn criterion_15_manifests_replay_byte_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let small_mcmc = ["--set", "mcmc.n_samples=3000", "--set", "mcmc.n_burn=1000"];
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("simulate", vec!["simulate"]),
        ("fit", vec!["fit", "--set", "variant=reparam"]),
        ("profile", {
            let mut a = vec!["profile", "--set", "variant=reparam", "--params", "beta", "--windows", "14,28"];
            a.extend(small_mcmc);
            a
        }),
        ("mcmc", {
            let mut a = vec!["mcmc", "--set", "variant=original"];
            a.extend(small_mcmc);
            a
        }),
        ("report", vec!["report"]),
        ("forecast-eval", vec!["forecast-eval", "--horizons", "0,25,50"]),
    ];
    let mut compared = 0;
    let mut bad = Vec::new();
    for (name, args) in &runs {
        let first = tmp.path().join(format!("{name}-a"));
        let replay = tmp.path().join(format!("{name}-b"));
        let o = seiard(args, &first);
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let manifest = first.join("manifest.json");
        let o = seiard(&[args[0], "--config", manifest.to_str().unwrap()], &replay);
        assert!(o.status.success(), "{name} replay: {}", String::from_utf8_lossy(&o.stderr));
        let (a, b) = (files(&first), files(&replay));
        compared += a.len();
        if a != b {
            bad.push(*name);
        }
    }
    report(
        15,
        "reproducibility",
        bad.is_empty(),
        format!("{} commands, {compared} files compared, mismatched: {bad:?}", runs.len()),
    );
}
