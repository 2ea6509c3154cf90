//! Subcommand implementations. Every command is deterministic given
//! (config, seed) and maps outcomes onto the stable exit-code contract:
//! 0 success / property holds, 1 property violated, 2 bad input,
//! 3 resource ceiling.

use std::path::{Path, PathBuf};

use serde_json::json;

use fldp_core::adversary::{
    advantage, bayes_optimal, bound_chain, challenge_experiment, challenge_on_distributions,
    AdvantageReport, ChallengeOutcome,
};
use fldp_core::kripke::{
    build_model, mc_terminal_distribution, observe_curmodpar, terminal_distribution, KripkeError,
    PathDistribution,
};
use fldp_core::moniteo::{run_moniteo, summary_line, MoniteoConfig, MoniteoError};
use fldp_core::privacy::{
    decomposition_check, realized_epsilon, EpsilonReport, NeighborRun, PrivacyError,
};
use fldp_core::selfcheck;

use crate::config::{
    infrastructure_from_clients, neighbor_run_from_custom, ConfigError, ExperimentConfig,
    RunMode, Scenario, SCHEMA_VERSION,
};

const EXIT_OK: u8 = 0;
const EXIT_VIOLATED: u8 = 1;
const EXIT_BAD_INPUT: u8 = 2;
const EXIT_CEILING: u8 = 3;

enum Failure {
    BadInput(String),
    Ceiling(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::BadInput(_) => EXIT_BAD_INPUT,
            Failure::Ceiling(_) => EXIT_CEILING,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::BadInput(m) | Failure::Ceiling(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::BadInput(e.0)
    }
}

impl From<KripkeError> for Failure {
    fn from(e: KripkeError) -> Self {
        match e {
            KripkeError::StateExplosion { .. } => Failure::Ceiling(e.to_string()),
            other => Failure::BadInput(other.to_string()),
        }
    }
}

impl From<PrivacyError> for Failure {
    fn from(e: PrivacyError) -> Self {
        match e {
            PrivacyError::Kripke(k) => k.into(),
            other => Failure::BadInput(other.to_string()),
        }
    }
}

impl From<MoniteoError> for Failure {
    fn from(e: MoniteoError) -> Self {
        match e {
            MoniteoError::Kripke(k) => k.into(),
            MoniteoError::Privacy(p) => p.into(),
            other => Failure::BadInput(other.to_string()),
        }
    }
}

fn finish(result: Result<u8, Failure>) -> u8 {
    match result {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            failure.code()
        }
    }
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::BadInput(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    std::fs::write(&path, text)
        .map_err(|e| Failure::BadInput(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn check_normalized(d: &PathDistribution, name: &str) -> Result<(), Failure> {
    if !d.is_normalized() {
        return Err(Failure::BadInput(format!(
            "{name} is not a normalized distribution"
        )));
    }
    Ok(())
}

/// The neighboring pair a config describes, either as two protocol runs or
/// as two explicit distributions.
enum PairSource {
    Run(Box<NeighborRun>),
    Direct(PathDistribution, PathDistribution),
}

fn pair_source(cfg: &ExperimentConfig) -> Result<PairSource, Failure> {
    match &cfg.scenario {
        Scenario::DistributionPair { d0, d1 } => {
            check_normalized(d0, "d0")?;
            check_normalized(d1, "d1")?;
            Ok(PairSource::Direct(d0.clone(), d1.clone()))
        }
        Scenario::Custom { clients, neighbor } => {
            let neighbor = neighbor.as_ref().ok_or_else(|| {
                Failure::BadInput("this command needs a neighbor specification".into())
            })?;
            let run = neighbor_run_from_custom(
                clients,
                neighbor,
                cfg.scheduler(),
                &cfg.dynamics()?,
                cfg.state_ceiling(),
            )?;
            Ok(PairSource::Run(Box::new(run)))
        }
        Scenario::Moniteo(m) => {
            m.validate().map_err(Failure::from)?;
            let world = fldp_core::moniteo::generate_world(m);
            let target = world
                .iter()
                .find(|(_, part)| part.points().any(|p| p.secret))
                .map(|(sat, _)| sat.clone())
                .ok_or_else(|| Failure::BadInput("no satellite holds a secret point".into()))?;
            let (run, _) = fldp_core::moniteo::neighbor_pair_omit_secret(&world, &target, m)?;
            Ok(PairSource::Run(Box::new(run)))
        }
    }
}

/// Resolve the pair of outcome distributions, honoring the run mode.
fn pair_distributions(
    cfg: &ExperimentConfig,
    source: &PairSource,
) -> Result<(PathDistribution, PathDistribution, bool), Failure> {
    match source {
        PairSource::Direct(d0, d1) => Ok((d0.clone(), d1.clone(), true)),
        PairSource::Run(run) => match cfg.mode() {
            RunMode::Exact { .. } => {
                let (d0, d1) = run.terminal_distributions(observe_curmodpar)?;
                Ok((d0, d1, true))
            }
            RunMode::Montecarlo { samples, seed } => {
                let sample_arm = |infra, arm: u64| {
                    mc_terminal_distribution(
                        infra,
                        &run.scheduler,
                        &run.dynamics,
                        observe_curmodpar,
                        samples,
                        seed.wrapping_add(arm),
                    )
                };
                let d0 = sample_arm(&run.i0, 0)?;
                let d1 = sample_arm(&run.i1, 1)?;
                Ok((d0, d1, false))
            }
        },
    }
}

fn budget(cfg: &ExperimentConfig) -> Result<f64, Failure> {
    if let Some(b) = cfg.epsilon_budget {
        return Ok(b);
    }
    if let Scenario::Moniteo(m) = &cfg.scenario {
        return Ok(m.epsilon_budget);
    }
    Err(Failure::BadInput(
        "epsilon_budget is required for this command".into(),
    ))
}

pub fn cmd_enumerate(config: &Path) -> u8 {
    finish(enumerate_inner(config))
}

fn enumerate_inner(config: &Path) -> Result<u8, Failure> {
    let cfg = ExperimentConfig::load(config)?;
    let (infra, dynamics) = match &cfg.scenario {
        Scenario::Custom { clients, .. } => {
            let dynamics = cfg.dynamics()?;
            (infrastructure_from_clients(clients, &dynamics)?, dynamics)
        }
        Scenario::Moniteo(m) => {
            m.validate().map_err(Failure::from)?;
            let dynamics = m.dynamics();
            let clients: std::collections::BTreeMap<_, Vec<_>> =
                fldp_core::moniteo::generate_world(m)
                    .into_iter()
                    .map(|(c, d)| (c, d.points().cloned().collect()))
                    .collect();
            (infrastructure_from_clients(&clients, &dynamics)?, dynamics)
        }
        Scenario::DistributionPair { .. } => {
            return Err(Failure::BadInput(
                "enumerate needs a protocol scenario, not a distribution pair".into(),
            ))
        }
    };
    let scheduler = cfg.scheduler();
    let (distribution, stats) = match cfg.mode() {
        RunMode::Exact { state_ceiling } => {
            let model = build_model(&infra, &scheduler, &dynamics, state_ceiling)?;
            let dist = terminal_distribution(&model, observe_curmodpar);
            let stats = json!({
                "schema_version": SCHEMA_VERSION,
                "mode": "exact",
                "state_count": model.state_count(),
                "trace_count": dist.trace_count(),
                "max_depth": model.max_depth(),
            });
            (dist, stats)
        }
        RunMode::Montecarlo { samples, seed } => {
            let dist = mc_terminal_distribution(
                &infra,
                &scheduler,
                &dynamics,
                observe_curmodpar,
                samples,
                seed,
            )?;
            let stats = json!({
                "schema_version": SCHEMA_VERSION,
                "mode": "montecarlo",
                "samples": samples,
                "seed": seed,
            });
            (dist, stats)
        }
    };
    let dist_path = write_json(
        &cfg.output_dir,
        "distribution.json",
        &serde_json::to_value(&distribution).expect("distribution serializes"),
    )?;
    write_json(&cfg.output_dir, "model_stats.json", &stats)?;
    println!(
        "enumerate: {} outcomes -> {}",
        distribution.outcomes().len(),
        dist_path.display()
    );
    Ok(EXIT_OK)
}

pub fn cmd_epsilon(config: &Path) -> u8 {
    finish(epsilon_inner(config))
}

fn epsilon_inner(config: &Path) -> Result<u8, Failure> {
    let cfg = ExperimentConfig::load(config)?;
    let budget = budget(&cfg)?;
    let source = pair_source(&cfg)?;
    let (d0, d1, exact) = pair_distributions(&cfg, &source)?;
    let report = realized_epsilon(&d0, &d1, cfg.delta.clone());
    let holds = report.within_budget(budget);
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "exact": exact,
        "epsilon_budget": budget,
        "holds": holds,
        "report": serde_json::to_value(&report).expect("report serializes"),
    });
    let path = write_json(&cfg.output_dir, "epsilon_report.json", &value)?;
    println!(
        "epsilon: realized {} against budget {budget} ({}) -> {}",
        render_eps(&report),
        if holds { "holds" } else { "violated" },
        path.display()
    );
    Ok(if holds { EXIT_OK } else { EXIT_VIOLATED })
}

fn render_eps(report: &EpsilonReport) -> String {
    if report.epsilon.is_finite() {
        format!("eps = {:.6}", report.epsilon)
    } else {
        "eps = inf".into()
    }
}

pub fn cmd_advantage(config: &Path, trials: u64) -> u8 {
    finish(advantage_inner(config, trials))
}

fn advantage_inner(config: &Path, trials: u64) -> Result<u8, Failure> {
    let cfg = ExperimentConfig::load(config)?;
    let source = pair_source(&cfg)?;
    let (d0, d1, exact) = pair_distributions(&cfg, &source)?;
    let best = bayes_optimal(&d0, &d1);
    let report: AdvantageReport = match bound_chain(&d0, &d1) {
        Ok(report) => report,
        // Infinite ε: the bounds are vacuous, the advantage itself stands.
        Err(fldp_core::adversary::AdversaryError::InfiniteEpsilon) => advantage(&best, &d0, &d1),
        Err(fldp_core::adversary::AdversaryError::Kripke(e)) => return Err(e.into()),
    };
    let seed = cfg.seed.unwrap_or(0);
    let challenge: ChallengeOutcome = match &source {
        PairSource::Run(run) => challenge_experiment(run, &best, trials, seed)
            .map_err(|e| match e {
                fldp_core::adversary::AdversaryError::Kripke(k) => Failure::from(k),
                other => Failure::BadInput(other.to_string()),
            })?,
        PairSource::Direct(d0, d1) => challenge_on_distributions(d0, d1, &best, trials, seed),
    };
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "exact": exact,
        "report": serde_json::to_value(&report).expect("report serializes"),
        "challenge": {
            "trials": challenge.trials,
            "successes": challenge.successes,
            "seed": seed,
            "empirical_advantage": serde_json::to_value(&challenge.report)
                .expect("report serializes"),
        },
    });
    let path = write_json(&cfg.output_dir, "advantage_report.json", &value)?;
    let mut csv = String::from("trial_block,successes,trials,advantage_estimate\n");
    for block in &challenge.blocks {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            block.trial_block, block.successes, block.trials, block.advantage_estimate
        ));
    }
    let csv_path = cfg.output_dir.join("challenge.csv");
    std::fs::write(&csv_path, csv)
        .map_err(|e| Failure::BadInput(format!("cannot write {}: {e}", csv_path.display())))?;
    println!(
        "advantage: tv and bounds -> {}, challenge -> {}",
        path.display(),
        csv_path.display()
    );
    Ok(EXIT_OK)
}

pub fn cmd_decompose(config: &Path) -> u8 {
    finish(decompose_inner(config))
}

fn decompose_inner(config: &Path) -> Result<u8, Failure> {
    let cfg = ExperimentConfig::load(config)?;
    let mode = cfg.decomposition_mode.ok_or_else(|| {
        Failure::BadInput("decomposition_mode is required (one_client_differs or all_clients_differ)".into())
    })?;
    let source = pair_source(&cfg)?;
    let run = match source {
        PairSource::Run(run) => run,
        PairSource::Direct(..) => {
            return Err(Failure::BadInput(
                "decompose needs a protocol scenario with per-client partitions".into(),
            ))
        }
    };
    let outcome = decomposition_check(&run, mode)?;
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "outcome": serde_json::to_value(&outcome).expect("report serializes"),
    });
    let path = write_json(&cfg.output_dir, "decomposition_report.json", &value)?;
    println!(
        "decompose: global {} vs per-client bound ({}) -> {}",
        render_eps(&outcome.global),
        if outcome.bound_holds { "holds" } else { "violated" },
        path.display()
    );
    Ok(if outcome.bound_holds {
        EXIT_OK
    } else {
        EXIT_VIOLATED
    })
}

pub fn cmd_moniteo(config: Option<&Path>, output_dir: &Path) -> u8 {
    finish(moniteo_inner(config, output_dir))
}

fn moniteo_inner(config: Option<&Path>, output_dir: &Path) -> Result<u8, Failure> {
    let cfg: MoniteoConfig = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::BadInput(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::BadInput(format!("malformed configuration: {e}")))?
        }
        None => MoniteoConfig::default(),
    };
    let report = run_moniteo(&cfg).map_err(Failure::from)?;
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "report": serde_json::to_value(&report).expect("report serializes"),
    });
    write_json(output_dir, "moniteo_report.json", &value)?;
    println!("{}", summary_line(&report));
    Ok(if report.budget_ok { EXIT_OK } else { EXIT_VIOLATED })
}

pub fn cmd_validate(seed: u64, inject_fault: Option<&str>) -> u8 {
    let inject = match inject_fault {
        None => false,
        Some("perturb-pmf") => true,
        Some(other) => {
            eprintln!("error: unknown fault `{other}` (supported: perturb-pmf)");
            return EXIT_BAD_INPUT;
        }
    };
    let results = selfcheck::run_all(seed, inject);
    let mut all_passed = true;
    for result in &results {
        let tag = if result.passed { "[PASS]" } else { "[FAIL]" };
        println!("{tag} {:<22} {}", result.name, result.detail);
        all_passed &= result.passed;
    }
    if all_passed {
        EXIT_OK
    } else {
        EXIT_VIOLATED
    }
}
