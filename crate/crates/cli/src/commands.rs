use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use saferl_core::digest::json_digest;
use saferl_core::environment::{Action, EnvConfig, PenaltyScope};
use saferl_core::network::argmax;
use saferl_core::property::{default_suite, PropertySuite};
use saferl_core::trainer::{evaluate_greedy, train, EvalStats, SafetyMode, TrainConfig, TrainError, TrainOutcome};
use saferl_core::verifier::{grid_oracle, verify, VerificationReport, VerifyConfig};
use saferl_core::{Network, SafetyProperty};

use crate::error::{CliError, CliResult, ResultExt};
use crate::manifest::RunManifest;
use crate::map::{violation_map, ViolationMap, OBS_NAMES};
use crate::table::{RateRow, RateTable};

pub fn load_network(path: &Path) -> CliResult<Network> {
    Network::load(path).input(format!("loading network {}", path.display()))
}

pub fn load_env(path: Option<&Path>) -> CliResult<EnvConfig> {
    match path {
        None => Ok(EnvConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).input(format!("reading env config {}", p.display()))?;
            EnvConfig::from_json(&text).input(format!("parsing env config {}", p.display()))
        }
    }
}

pub fn load_train_config(path: Option<&Path>) -> CliResult<TrainConfig> {
    match path {
        None => Ok(TrainConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).input(format!("reading training config {}", p.display()))?;
            TrainConfig::from_json(&text).input(format!("parsing training config {}", p.display()))
        }
    }
}

/// The suite at `path`, or the default workspace suite for `env`.
pub fn load_suite(path: Option<&Path>, env: &EnvConfig) -> CliResult<PropertySuite> {
    match path {
        Some(p) => PropertySuite::load(p).input(format!("loading suite {}", p.display())),
        None => default_suite(env).input("building the default suite"),
    }
}

pub fn resolve_suite(suite: &PropertySuite, network: &Network) -> CliResult<Vec<SafetyProperty>> {
    suite
        .resolve(network.input_dim(), network.output_dim())
        .input("suite does not match the network")
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).runtime(format!("creating {}", dir.display()))
}

/// Parses `all`, `none` or `subset:NAME,NAME,...`.
pub fn parse_safety_mode(s: &str) -> Result<SafetyMode, String> {
    match s {
        "all" | "all_penalties" => Ok(SafetyMode::AllPenalties),
        "none" => Ok(SafetyMode::None),
        _ => match s.strip_prefix("subset:") {
            Some(list) if !list.is_empty() => Ok(SafetyMode::Subset {
                properties: list.split(',').map(str::to_string).collect(),
            }),
            _ => Err(format!("expected `all`, `none` or `subset:NAME,...`, got `{s}`")),
        },
    }
}

pub struct TrainArgs {
    pub config: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub epochs: Option<usize>,
    pub safety_mode: Option<SafetyMode>,
    pub eval_episodes: usize,
    pub out: PathBuf,
    pub progress: bool,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub seed: u64,
    pub policy_path: PathBuf,
    pub primitive_path: PathBuf,
    pub curve_path: PathBuf,
    pub eval: EvalStats,
}

fn curve_csv(outcome: &TrainOutcome) -> String {
    let mut s = String::from(saferl_core::trainer::EpochStats::CSV_HEADER);
    s.push('\n');
    for row in &outcome.curve {
        s.push_str(&row.csv_row());
        s.push('\n');
    }
    s
}

/// Seed added to a training seed for greedy-evaluation episodes, so
/// evaluation starts differ from training starts.
pub const EVAL_SEED_OFFSET: u64 = 1_000_000;

/// Trains one policy per seed. Outputs per seed `S`: `policy_seed{S}.net.json`,
/// `value_seed{S}.net.json`, `primitive_seed{S}.net.json`, `curve_seed{S}.csv`,
/// `eval_seed{S}.json`, `config_seed{S}.json` and any periodic checkpoints.
pub fn cmd_train(args: &TrainArgs) -> CliResult<Vec<TrainSummary>> {
    let mut base = load_train_config(args.config.as_deref())?;
    if let Some(e) = args.epochs {
        base.epochs = e;
    }
    if let Some(m) = &args.safety_mode {
        base.safety_mode = m.clone();
    }
    base.validate().input("invalid training config")?;
    create_dir(&args.out)?;
    let seeds = if args.seeds.is_empty() { vec![base.seed] } else { args.seeds.clone() };
    let mut manifest = RunManifest::new("train");
    manifest.seeds = seeds.clone();
    if let Some(p) = &args.config {
        manifest.digest_input("config_file", p).input("digesting config")?;
    }
    let mut out = Vec::new();
    for &seed in &seeds {
        let config = TrainConfig { seed, ..base.clone() };
        manifest.config_digests.insert(format!("train_seed{seed}"), config.digest());
        let outcome = match train(&config, |s| {
            if args.progress && (s.epoch % 10 == 0 || s.epoch == config.epochs) {
                eprintln!(
                    "seed {seed} epoch {}/{}: reward {:.2} success {:.2} collisions {}",
                    s.epoch, config.epochs, s.mean_reward, s.success_rate, s.collisions
                );
            }
        }) {
            Ok(o) => o,
            Err(TrainError::Diverged { epoch, reason, last_good }) => {
                let path = args.out.join(format!("policy_seed{seed}_last_good.net.json"));
                let _ = last_good.policy.save(&path);
                return Err(CliError::runtime(anyhow::anyhow!(
                    "training diverged at epoch {epoch} ({reason}); last good policy saved to {}",
                    path.display()
                )));
            }
            Err(e) => return Err(CliError::runtime(e)),
        };
        let w = |m: &mut RunManifest, name: String, bytes: &[u8]| {
            m.write_artifact(&args.out, &name, bytes).runtime("writing training output")
        };
        let ac = &outcome.actor_critic;
        let policy_path = w(&mut manifest, format!("policy_seed{seed}.net.json"), ac.policy.to_json().as_bytes())?;
        w(&mut manifest, format!("value_seed{seed}.net.json"), ac.value.to_json().as_bytes())?;
        let primitive_path = w(&mut manifest, format!("primitive_seed{seed}.net.json"), outcome.primitive.to_json().as_bytes())?;
        let curve_path = w(&mut manifest, format!("curve_seed{seed}.csv"), curve_csv(&outcome).as_bytes())?;
        w(&mut manifest, format!("config_seed{seed}.json"), config.to_json().as_bytes())?;
        for (epoch, net) in &outcome.checkpoints {
            w(&mut manifest, format!("policy_seed{seed}_epoch{epoch}.net.json"), net.to_json().as_bytes())?;
        }
        let eval = evaluate_greedy(&ac.policy, &config.env, args.eval_episodes, seed + EVAL_SEED_OFFSET);
        let eval_json = serde_json::to_string_pretty(&eval).expect("eval serializes");
        w(&mut manifest, format!("eval_seed{seed}.json"), eval_json.as_bytes())?;
        out.push(TrainSummary {
            seed,
            policy_path,
            primitive_path,
            curve_path,
            eval,
        });
    }
    manifest.save(&args.out).runtime("writing manifest")?;
    Ok(out)
}

pub struct VerifyArgs {
    pub network: PathBuf,
    pub suite: Option<PathBuf>,
    pub env_config: Option<PathBuf>,
    pub verify: VerifyConfig,
    pub out: PathBuf,
}

/// Verifies every property of a suite, in suite order.
pub fn verify_suite(network: &Network, properties: &[SafetyProperty], config: &VerifyConfig) -> CliResult<Vec<VerificationReport>> {
    properties
        .iter()
        .map(|p| verify(network, p, config).runtime(format!("verifying {}", p.name)))
        .collect()
}

pub fn rate_table(column: &str, properties: &[SafetyProperty], reports: &[VerificationReport]) -> RateTable {
    RateTable {
        columns: vec![column.to_string()],
        rows: properties
            .iter()
            .zip(reports)
            .map(|(p, r)| RateRow {
                property: p.name.clone(),
                description: p.description.clone(),
                rates: vec![r.violation_rate],
            })
            .collect(),
    }
}

fn reports_csv(reports: &[VerificationReport]) -> String {
    let mut s = format!("{}\n", VerificationReport::CSV_HEADER);
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Writes `table.csv` (percent violation rates plus averages),
/// `reports.csv` (one flat row per property) and `reports.json`.
pub fn cmd_verify(args: &VerifyArgs) -> CliResult<(RateTable, Vec<VerificationReport>)> {
    let network = load_network(&args.network)?;
    let env = load_env(args.env_config.as_deref())?;
    let suite = load_suite(args.suite.as_deref(), &env)?;
    let properties = resolve_suite(&suite, &network)?;
    let reports = verify_suite(&network, &properties, &args.verify)?;
    let table = rate_table("violation_rate_percent", &properties, &reports);

    create_dir(&args.out)?;
    let mut manifest = RunManifest::new("verify");
    manifest.seeds.push(args.verify.seed);
    manifest.digest_input("network", &args.network).input("digesting network")?;
    if let Some(p) = &args.suite {
        manifest.digest_input("suite", p).input("digesting suite")?;
    }
    manifest.config_digests.insert("suite_resolved".into(), json_digest(&properties));
    manifest.config_digests.insert("verify_config".into(), json_digest(&args.verify));
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
    for (name, bytes) in [
        ("table.csv", table.to_csv().into_bytes()),
        ("reports.csv", reports_csv(&reports).into_bytes()),
        ("reports.json", json.into_bytes()),
    ] {
        manifest.write_artifact(&args.out, name, &bytes).runtime("writing verification output")?;
    }
    manifest.save(&args.out).runtime("writing manifest")?;
    Ok((table, reports))
}

pub struct MapArgs {
    pub network: PathBuf,
    pub suite: Option<PathBuf>,
    pub env_config: Option<PathBuf>,
    pub property: String,
    pub dims: (usize, usize),
    pub fixed_samples: usize,
    pub grid: usize,
    pub seed: u64,
    pub verify: VerifyConfig,
    pub out: PathBuf,
}

pub fn find_property<'a>(properties: &'a [SafetyProperty], name: &str) -> CliResult<&'a SafetyProperty> {
    properties.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<&str> = properties.iter().map(|p| p.name.as_str()).collect();
        CliError::input(anyhow::anyhow!("unknown property `{name}`; suite has {}", names.join(", ")))
    })
}

pub fn cmd_violation_map(args: &MapArgs) -> CliResult<ViolationMap> {
    let network = load_network(&args.network)?;
    let env = load_env(args.env_config.as_deref())?;
    let suite = load_suite(args.suite.as_deref(), &env)?;
    let properties = resolve_suite(&suite, &network)?;
    let property = find_property(&properties, &args.property)?;
    let n = network.input_dim();
    let (i, j) = args.dims;
    if i >= n || j >= n || i == j {
        return Err(CliError::input(anyhow::anyhow!(
            "invalid dimensions ({i}, {j}): need two distinct indices below {n}"
        )));
    }
    let map = violation_map(&network, property, args.dims, args.fixed_samples, args.grid, args.seed, &args.verify)
        .input("computing violation map")?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    fs::write(&args.out, map.to_csv()).runtime(format!("writing {}", args.out.display()))?;
    Ok(map)
}

pub struct RolloutArgs {
    pub network: PathBuf,
    pub env_config: Option<PathBuf>,
    pub episodes: usize,
    pub seed: u64,
    pub out: PathBuf,
}

/// One state visited by the greedy policy, before its action.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRow {
    pub episode: usize,
    pub step: usize,
    pub observation: [f64; 8],
    pub action: usize,
    pub inside_workspace: bool,
}

pub const STATE_CSV_HEADER: &str = "episode,step,g,px,py,pz,gx,gy,gz,d,action,inside_workspace";

/// Greedy rollouts; episode `e` resets with `seed + e`.
pub fn rollout_states(policy: &Network, env: &EnvConfig, episodes: usize, seed: u64) -> Vec<StateRow> {
    let scope = PenaltyScope::all();
    let mut rows = Vec::new();
    for e in 0..episodes {
        let (mut state, mut obs) = env.reset(seed.wrapping_add(e as u64));
        for step in 0.. {
            let a = argmax(&policy.forward(&obs.0).expect("8 finite observation inputs"));
            rows.push(StateRow {
                episode: e,
                step,
                observation: obs.0,
                action: a,
                inside_workspace: env.collision_check(state.position).inside_workspace,
            });
            let t = env.step(&state, Action::new(a).expect("27 outputs"), &scope).expect("episode is running");
            state = t.state;
            obs = t.observation;
            if t.done {
                break;
            }
        }
    }
    rows
}

pub fn states_csv(rows: &[StateRow]) -> String {
    let mut s = format!("{STATE_CSV_HEADER}\n");
    for r in rows {
        write!(s, "{},{}", r.episode, r.step).unwrap();
        for v in r.observation {
            write!(s, ",{v}").unwrap();
        }
        writeln!(s, ",{},{}", r.action, u8::from(r.inside_workspace)).unwrap();
    }
    s
}

pub fn cmd_rollout_states(args: &RolloutArgs) -> CliResult<Vec<StateRow>> {
    let network = load_network(&args.network)?;
    if network.input_dim() != OBS_NAMES.len() || network.output_dim() != saferl_core::environment::NUM_ACTIONS {
        return Err(CliError::input(anyhow::anyhow!(
            "network maps {} inputs to {} outputs; the environment needs 8 to 27",
            network.input_dim(),
            network.output_dim()
        )));
    }
    let env = load_env(args.env_config.as_deref())?;
    let rows = rollout_states(&network, &env, args.episodes, args.seed);
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    fs::write(&args.out, states_csv(&rows)).runtime(format!("writing {}", args.out.display()))?;
    Ok(rows)
}

/// The ablation policies other than the early-training snapshot, with the
/// properties whose faces carry the penalty.
pub fn ablation_policies() -> Vec<(&'static str, SafetyMode)> {
    let subset = |names: &[&str]| SafetyMode::Subset {
        properties: names.iter().map(|s| s.to_string()).collect(),
    };
    vec![
        ("Safe-PPO", SafetyMode::AllPenalties),
        ("Unsafe-PPO", SafetyMode::None),
        ("Policy4", subset(&["theta_1L", "theta_1R", "theta_2L"])),
        ("Policy5", subset(&["theta_3R", "theta_3L", "theta_4R"])),
        ("Policy6", subset(&["theta_4L", "theta_5R", "theta_5L", "theta_6R", "theta_6L"])),
    ]
}

pub const PRIMITIVE_COLUMN: &str = "Primitive Safe-PPO";

pub struct AblationArgs {
    pub config: Option<PathBuf>,
    pub suite: Option<PathBuf>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub verify: VerifyConfig,
    pub out: PathBuf,
    pub progress: bool,
}

fn slug(name: &str) -> String {
    name.to_lowercase().replace(' ', "_")
}

/// Trains the five ablation policies, takes the early-training snapshot of
/// Safe-PPO as the sixth, verifies all six against the suite and writes
/// `ablation.csv` with one column per policy.
pub fn cmd_ablation(args: &AblationArgs) -> CliResult<RateTable> {
    let mut base = load_train_config(args.config.as_deref())?;
    if let Some(e) = args.epochs {
        base.epochs = e;
    }
    if let Some(s) = args.seed {
        base.seed = s;
    }
    base.validate().input("invalid training config")?;
    let suite = load_suite(args.suite.as_deref(), &base.env)?;
    create_dir(&args.out)?;
    let mut manifest = RunManifest::new("ablation");
    manifest.seeds.push(base.seed);
    manifest.config_digests.insert("verify_config".into(), json_digest(&args.verify));

    let mut trained: Vec<(String, Network)> = Vec::new();
    for (name, mode) in ablation_policies() {
        let config = TrainConfig {
            safety_mode: mode,
            ..base.clone()
        };
        manifest.config_digests.insert(slug(name), config.digest());
        let outcome = train(&config, |s| {
            if args.progress && s.epoch % 50 == 0 {
                eprintln!("{name} epoch {}/{}: success {:.2}", s.epoch, config.epochs, s.success_rate);
            }
        })
        .runtime(format!("training {name}"))?;
        manifest
            .write_artifact(&args.out, &format!("curve_{}.csv", slug(name)), curve_csv(&outcome).as_bytes())
            .runtime("writing curve")?;
        if name == "Safe-PPO" {
            trained.push((name.to_string(), outcome.actor_critic.policy));
            trained.push((PRIMITIVE_COLUMN.to_string(), outcome.primitive));
        } else {
            trained.push((name.to_string(), outcome.actor_critic.policy));
        }
    }

    let mut table = RateTable {
        columns: Vec::new(),
        rows: Vec::new(),
    };
    for (name, net) in &trained {
        manifest
            .write_artifact(&args.out, &format!("{}.net.json", slug(name)), net.to_json().as_bytes())
            .runtime("writing checkpoint")?;
        let properties = resolve_suite(&suite, net)?;
        let reports = verify_suite(net, &properties, &args.verify)?;
        let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
        manifest
            .write_artifact(&args.out, &format!("reports_{}.json", slug(name)), json.as_bytes())
            .runtime("writing reports")?;
        if table.rows.is_empty() {
            table.rows = properties
                .iter()
                .map(|p| RateRow {
                    property: p.name.clone(),
                    description: p.description.clone(),
                    rates: Vec::new(),
                })
                .collect();
        }
        table.columns.push(name.clone());
        for (row, r) in table.rows.iter_mut().zip(&reports) {
            row.rates.push(r.violation_rate);
        }
    }
    manifest
        .write_artifact(&args.out, "ablation.csv", table.to_csv().as_bytes())
        .runtime("writing ablation table")?;
    manifest.save(&args.out).runtime("writing manifest")?;
    Ok(table)
}

pub struct OracleArgs {
    pub network: PathBuf,
    pub suite: Option<PathBuf>,
    pub env_config: Option<PathBuf>,
    pub property: Option<String>,
    pub points: usize,
}

/// `(property, fraction of grid points violating it)` for the selected
/// properties.
pub fn cmd_oracle(args: &OracleArgs) -> CliResult<Vec<(String, f64)>> {
    let network = load_network(&args.network)?;
    let env = load_env(args.env_config.as_deref())?;
    let suite = load_suite(args.suite.as_deref(), &env)?;
    let properties = resolve_suite(&suite, &network)?;
    let selected: Vec<&SafetyProperty> = match &args.property {
        Some(name) => vec![find_property(&properties, name)?],
        None => properties.iter().collect(),
    };
    selected
        .into_iter()
        .map(|p| {
            grid_oracle(&network, p, args.points)
                .input(format!("grid oracle for {}", p.name))
                .map(|f| (p.name.clone(), f))
        })
        .collect()
}
