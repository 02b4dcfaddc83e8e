//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use bilevel_landweber::diagnostics::sampling::smooth_direction;
use bilevel_landweber::diagnostics::{
    check_gradient, check_state_adjoint, probe_coercivity, probe_pl, probe_tangential_cone_lower, probe_tangential_cone_upper,
    verify_error_lemmas, ErrorLemmaConfig, ProbeReport,
};
use bilevel_landweber::fixture::Fixture;
use bilevel_landweber::observe::{add_noise, observe};
use bilevel_landweber::par::map_range;
use bilevel_landweber::upper::{
    bilevel_landweber, estimate_ledger, single_level_landweber, ConstantsLedger, InverseProblem, SweepEntry, UpperConfig,
    UpperReport,
};
use bilevel_landweber::{ObservationData, Parameter};

use crate::config::{ConfigErrors, ExperimentConfig, Format, Level};
use crate::output;

/// Relative tolerance of the state adjoint pairing check.
pub const ADJOINT_TOL: f64 = 1e-9;
pub const ADJOINT_TRIPLES: usize = 20;
/// Central-difference step of the gradient check.
pub const FD_STEP: f64 = 1e-4;

/// Everything derived from a validated config before any iteration runs.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub hash: String,
    pub fixture: Fixture,
    pub clean: ObservationData,
    pub problem: InverseProblem,
    pub theta0: Parameter,
}

impl Context {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        let hash = cfg.hash();
        let fixture = cfg.fixture().context("building the fixture")?;
        let spec = cfg.observation_spec(fixture.grid()).map_err(anyhow::Error::msg)?;
        let clean = observe(fixture.disc(), fixture.u_true.view(), &spec).context("observing the true state")?;
        let problem = InverseProblem::new(fixture.model.clone(), fixture.solver, clean.clone())?;
        let theta0 = fixture.zero_guess();
        Ok(Self {
            cfg,
            hash,
            fixture,
            clean,
            problem,
            theta0,
        })
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.cfg.output.directory.clone();
        output::ensure_dir(&dir)?;
        Ok(dir)
    }

    fn ledger(&self) -> Result<(ConstantsLedger, Vec<ProbeReport>)> {
        let s = &self.cfg.scheme;
        estimate_ledger(
            &self.problem,
            &self.theta0,
            Some(&self.fixture.theta_true),
            &s.lower,
            self.cfg.delta_max(),
            &s.ledger,
        )
        .context("estimating the ledger constants")
    }

    fn upper_config(&self) -> UpperConfig {
        let s = &self.cfg.scheme;
        UpperConfig {
            rule: s.rule,
            max_iter: s.max_iter,
            lower: s.lower.clone(),
            start: s.start,
            record_trajectory: false,
        }
    }

    fn solve(&self, ledger: &ConstantsLedger, delta: f64, seed: u64) -> Result<UpperReport> {
        let data = add_noise(self.fixture.disc(), &self.clean, delta, seed)?;
        let p = self.problem.with_data(data)?;
        let cfg = self.upper_config();
        let truth = Some(&self.fixture.theta_true);
        let rep = match self.cfg.scheme.level {
            Level::Bilevel => bilevel_landweber(&p, &self.theta0, ledger, &cfg, truth),
            Level::Single => single_level_landweber(&p, &self.theta0, ledger, &cfg, truth),
        };
        rep.with_context(|| format!("outer iteration at delta = {delta}, seed = {seed}"))
    }
}

#[derive(Serialize)]
struct RunReport<'a> {
    config_hash: &'a str,
    config: &'a ExperimentConfig,
    delta: f64,
    seed: u64,
    ledger: &'a ConstantsLedger,
    ledger_probes: &'a [ProbeReport],
    report: &'a UpperReport,
}

/// Single run at the first delta and seed.
pub fn run(ctx: &Context) -> Result<()> {
    let dir = ctx.out_dir()?;
    let (ledger, probes) = ctx.ledger()?;
    let (delta, seed) = (ctx.cfg.noise.deltas[0], ctx.cfg.noise.seeds[0]);
    let rep = ctx.solve(&ledger, delta, seed)?;
    if ctx.cfg.output.wants(Format::Json) {
        let doc = RunReport {
            config_hash: &ctx.hash,
            config: &ctx.cfg,
            delta,
            seed,
            ledger: &ledger,
            ledger_probes: &probes,
            report: &rep,
        };
        output::write_json(&dir.join("report.json"), &doc)?;
    }
    if ctx.cfg.output.wants(Format::Csv) {
        output::write_histories(&dir.join("histories.csv"), &rep)?;
    }
    println!(
        "run: delta = {delta}, seed = {seed}, stop = {} at j = {}, residual = {:.3e}, error = {}",
        serde_json::to_value(rep.stop_reason)?.as_str().unwrap_or_default(),
        rep.stop_index,
        rep.final_residual(),
        rep.final_error().map(|e| format!("{e:.3e}")).unwrap_or_else(|| "n/a".into())
    );
    Ok(())
}

#[derive(Serialize)]
struct SweepReport<'a> {
    config_hash: &'a str,
    config: &'a ExperimentConfig,
    ledger: &'a ConstantsLedger,
    ledger_probes: &'a [ProbeReport],
    rows: &'a [SweepEntry],
    failures: &'a [String],
}

/// One run per `(delta, seed)`, `delta` outer. Each entry writes its own
/// report; the table is merged afterwards by this thread alone. Completed
/// rows are written even when some entries fail.
pub fn sweep(ctx: &Context) -> Result<()> {
    let noise = &ctx.cfg.noise;
    let n = noise.deltas.len() * noise.seeds.len();
    if n < 2 {
        bail!(ConfigErrors(vec![format!(
            "sweep needs at least two (delta, seed) runs, got {n}"
        )]));
    }
    let dir = ctx.out_dir()?;
    let (ledger, probes) = ctx.ledger()?;
    let want_json = ctx.cfg.output.wants(Format::Json);
    let entry_dir = dir.join("sweep_entries");
    if want_json {
        output::ensure_dir(&entry_dir)?;
    }
    let results = map_range(ctx.cfg.execution, n, |idx| -> Result<SweepEntry> {
        let (delta, seed) = (noise.deltas[idx / noise.seeds.len()], noise.seeds[idx % noise.seeds.len()]);
        let rep = ctx.solve(&ledger, delta, seed)?;
        if want_json {
            let doc = json!({ "config_hash": ctx.hash, "delta": delta, "seed": seed, "report": rep });
            output::write_json(&entry_dir.join(format!("entry_{idx:03}.json")), &doc)?;
        }
        Ok(SweepEntry {
            delta,
            seed,
            j_star: rep.stop_index,
            final_error: rep.final_error().unwrap_or(f64::NAN),
            final_residual: rep.final_residual(),
            total_lower_steps: rep.total_lower_steps(),
            stop_reason: rep.stop_reason,
        })
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(format!("{e:#}")),
        }
    }
    if ctx.cfg.output.wants(Format::Csv) {
        output::write_sweep(&dir.join("sweep.csv"), &rows)?;
    }
    if want_json {
        let doc = SweepReport {
            config_hash: &ctx.hash,
            config: &ctx.cfg,
            ledger: &ledger,
            ledger_probes: &probes,
            rows: &rows,
            failures: &failures,
        };
        output::write_json(&dir.join("sweep.json"), &doc)?;
    }
    for r in &rows {
        println!(
            "sweep: delta = {:e}, seed = {}, j* = {}, error = {:.4e}, residual = {:.3e}",
            r.delta, r.seed, r.j_star, r.final_error, r.final_residual
        );
    }
    if !failures.is_empty() {
        bail!("{} of {n} sweep entries failed:\n  {}", failures.len(), failures.join("\n  "));
    }
    Ok(())
}

/// A probe result, or the error that stopped it. Errors are reported, not fatal.
fn probe_entry(r: bilevel_landweber::Result<ProbeReport>) -> Value {
    match r {
        Ok(rep) => serde_json::to_value(rep).expect("probe report serialises"),
        Err(e) => json!({ "pass": false, "error": e.to_string() }),
    }
}

/// Sampled constants around the truth (state probes) and the initial
/// guess (upper tangential cone), plus the error-bound shape check.
pub fn probe(ctx: &Context) -> Result<()> {
    let dir = ctx.out_dir()?;
    let f = &ctx.fixture;
    let pc = &ctx.cfg.probes;
    let theta = &f.theta_true;
    let u = f.u_true.view();
    let lemma_cfg = ErrorLemmaConfig {
        seed: pc.seed,
        ..ErrorLemmaConfig::default()
    };
    let lemmas = match verify_error_lemmas(&f.model, &f.solver, &ctx.clean.spec, theta, &lemma_cfg) {
        Ok(rep) => serde_json::to_value(rep)?,
        Err(e) => json!({ "pass": false, "error": e.to_string() }),
    };
    let entries = [
        ("coercivity", probe_entry(probe_coercivity(&f.model, theta, u, pc))),
        (
            "tangential_cone_lower",
            probe_entry(probe_tangential_cone_lower(&f.model, theta, u, pc)),
        ),
        ("pl", probe_entry(probe_pl(&f.model, theta, u, pc))),
        (
            "tangential_cone_upper",
            probe_entry(probe_tangential_cone_upper(
                &f.model,
                &f.solver,
                &ctx.clean.spec,
                &ctx.theta0,
                pc,
            )),
        ),
        ("error_lemmas", lemmas),
    ];
    let mut probes = serde_json::Map::new();
    for (name, v) in &entries {
        let pass = v.get("pass").and_then(Value::as_bool).unwrap_or(false);
        match v.get("estimate").and_then(Value::as_f64) {
            Some(est) => println!("probe {name}: estimate = {est:.4e}, pass = {pass}"),
            None => println!("probe {name}: pass = {pass}"),
        }
        probes.insert(name.to_string(), v.clone());
    }
    let doc = json!({
        "config_hash": ctx.hash,
        "config": ctx.cfg,
        "seed": pc.seed,
        "probes": probes,
    });
    output::write_json(&dir.join("probes.json"), &doc)
}

/// Dual-pairing check of the state derivative and a finite-difference
/// check of the data-misfit gradient.
pub fn check_adjoint(ctx: &Context) -> Result<()> {
    let dir = ctx.out_dir()?;
    let f = &ctx.fixture;
    let seed = ctx.cfg.probes.seed;
    let pairing = check_state_adjoint(&f.model, &f.theta_true, f.u_true.view(), ADJOINT_TRIPLES, seed, ADJOINT_TOL)
        .context("state adjoint check")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xi = smooth_direction(f.grid(), &ctx.theta0, &mut rng);
    let gradient = check_gradient(&ctx.problem, &ctx.theta0, &xi, FD_STEP).context("gradient check")?;
    println!(
        "check-adjoint: pairing max gap = {:.2e} (tol {ADJOINT_TOL:e}, pass = {}), gradient fd = {:.6e}, adjoint = {:.6e}, rel error = {:.2e}",
        pairing.max_gap, pairing.pass, gradient.fd, gradient.adjoint, gradient.rel_error
    );
    let doc = json!({
        "config_hash": ctx.hash,
        "seed": seed,
        "state_adjoint": pairing,
        "gradient": gradient,
        "fd_step": FD_STEP,
    });
    output::write_json(&dir.join("adjoint.json"), &doc)
}

pub fn load_config(path: Option<&Path>) -> std::result::Result<ExperimentConfig, ConfigErrors> {
    let (text, base) = match path {
        Some(p) => (
            std::fs::read_to_string(p).map_err(|e| ConfigErrors(vec![format!("cannot read config {}: {e}", p.display())]))?,
            p.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (crate::config::DEFAULT_CONFIG.to_string(), PathBuf::from(".")),
    };
    crate::config::parse(&text, &base)
}
