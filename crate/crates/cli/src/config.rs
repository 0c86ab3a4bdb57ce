//! Experiment configuration file: a TOML document describing the table
//! source, instances, optimizer roster and campaign parameters.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use llmo_core::benchmark::{all_instances, AttackKind, BenchmarkTable, DatasetKind};
use llmo_core::experiments::{BackendChoice, CampaignConfig, CampaignOptimizer};
use llmo_core::llm::{MockProfile, RemoteConfig};
use llmo_core::metaheuristics::{MhKind, MhSpec};

pub const DEFAULT_MH_BUDGET: usize = 3000;
pub const DEFAULT_LLMO_BUDGET: usize = 30;
pub const DEFAULT_POPULATION: usize = 30;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub master_seed: u64,
    pub trials: u32,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub jobs: Option<usize>,
    pub instances: Vec<String>,
    pub table: TableConfig,
    #[serde(rename = "optimizer")]
    pub optimizers: Vec<OptimizerEntry>,
    #[serde(default)]
    pub backend: BackendSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    #[serde(default)]
    pub remote: Option<RemoteConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub surrogate: Option<SurrogateConfig>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateConfig {
    pub seed: u64,
    pub ruggedness: f64,
}

#[derive(Debug, Deserialize)]
pub struct OptimizerEntry {
    pub kind: String,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub population: Option<usize>,
    // llmo-only settings
    #[serde(default)]
    pub parse_retry_cap: Option<u32>,
    #[serde(default)]
    pub backend: Option<String>,
    #[serde(default)]
    pub profile: Option<String>,
    #[serde(default)]
    pub malformed: Option<f64>,
    #[serde(default)]
    pub wrong_length: Option<f64>,
    #[serde(default)]
    pub out_of_range: Option<f64>,
    #[serde(default)]
    pub empty: Option<f64>,
    // random-search batch
    #[serde(default)]
    pub batch_size: Option<usize>,
    /// Algorithm-parameter overrides (pc, w, f, sigma0, ...).
    #[serde(flatten)]
    pub params: toml::Table,
}

pub fn load_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config '{}'", path.display()))?;
    let config: FileConfig =
        toml::from_str(&text).with_context(|| format!("config '{}'", path.display()))?;
    if config.trials == 0 {
        bail!("trials must be at least 1");
    }
    validate_surrogate(&config.table)?;
    Ok(config)
}

fn validate_surrogate(table: &TableConfig) -> Result<()> {
    match (&table.path, &table.surrogate) {
        (Some(_), Some(_)) => bail!("table: set either 'path' or 'surrogate', not both"),
        (None, None) => bail!("table: set 'path' or 'surrogate'"),
        (_, Some(s)) => validate_ruggedness(s.ruggedness),
        _ => Ok(()),
    }
}

pub fn validate_ruggedness(ruggedness: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&ruggedness) {
        bail!("ruggedness {ruggedness} outside [0, 1]");
    }
    Ok(())
}

pub fn build_table(table: &TableConfig) -> Result<BenchmarkTable> {
    match (&table.path, &table.surrogate) {
        (Some(path), None) => BenchmarkTable::load(path)
            .map_err(|e| anyhow!("loading '{}': {e}", path.display())),
        (None, Some(s)) => Ok(llmo_core::benchmark::generate_surrogate(s.seed, s.ruggedness)),
        _ => unreachable!("validated at load"),
    }
}

pub fn parse_instances(names: &[String]) -> Result<Vec<(DatasetKind, AttackKind)>> {
    let mut instances = Vec::new();
    for name in names {
        if name == "all" {
            instances.extend(all_instances());
            continue;
        }
        let (dataset, attack) = name
            .split_once(':')
            .ok_or_else(|| anyhow!("instance '{name}' is not 'dataset:attack' or 'all'"))?;
        let dataset: DatasetKind = dataset.parse().map_err(|e: String| anyhow!(e))?;
        let attack: AttackKind = attack.parse().map_err(|e: String| anyhow!(e))?;
        instances.push((dataset, attack));
    }
    if instances.is_empty() {
        bail!("at least one instance is required");
    }
    Ok(instances)
}

/// Applies `[[optimizer]]` table overrides onto a kind's default parameters,
/// rejecting keys the kind does not have.
fn apply_param_overrides(kind: MhKind, overrides: &toml::Table) -> Result<MhKind> {
    if overrides.is_empty() {
        return Ok(kind);
    }
    let name = kind.name().to_string();
    let mut value = toml::Table::try_from(&kind).context("serializing default parameters")?;
    value.remove("kind");
    for (key, v) in overrides {
        if !value.contains_key(key) {
            bail!("optimizer '{name}' has no parameter '{key}'");
        }
        value.insert(key.clone(), v.clone());
    }
    value.insert("kind".into(), toml::Value::String(name));
    let kind: MhKind = value.try_into().context("applying parameter overrides")?;
    Ok(kind)
}

fn mock_profile(entry: &OptimizerEntry) -> Result<MockProfile> {
    Ok(match entry.profile.as_deref().unwrap_or("perturb-best") {
        "perturb-best" => MockProfile::PerturbBest,
        "echo-best" => MockProfile::EchoBest,
        "always-malformed" => MockProfile::always_malformed(),
        "always-wrong-length" => MockProfile::always_wrong_length(),
        "adversarial" => MockProfile::Adversarial {
            malformed: entry.malformed.unwrap_or(0.0),
            wrong_length: entry.wrong_length.unwrap_or(0.0),
            out_of_range: entry.out_of_range.unwrap_or(0.0),
            empty: entry.empty.unwrap_or(0.0),
        },
        other => bail!("unknown mock profile '{other}'"),
    })
}

pub fn build_campaign(
    config: &FileConfig,
    jobs_override: usize,
    seed_override: Option<u64>,
) -> Result<CampaignConfig> {
    let instances = parse_instances(&config.instances)?;
    let mut optimizers = Vec::with_capacity(config.optimizers.len());
    for entry in &config.optimizers {
        let optimizer = match entry.kind.as_str() {
            "llmo" => {
                let backend = match entry.backend.as_deref().unwrap_or("mock") {
                    "mock" => BackendChoice::Mock(mock_profile(entry)?),
                    "remote" => {
                        let remote = config
                            .backend
                            .remote
                            .clone()
                            .ok_or_else(|| anyhow!("kind 'llmo' with backend 'remote' needs a [backend.remote] section"))?
                            .with_key_from_env();
                        BackendChoice::Remote(remote)
                    }
                    other => bail!("unknown backend '{other}' (use 'mock' or 'remote')"),
                };
                CampaignOptimizer::Llmo {
                    budget: entry.budget.unwrap_or(DEFAULT_LLMO_BUDGET),
                    parse_retry_cap: entry.parse_retry_cap.unwrap_or(3),
                    backend,
                }
            }
            "random" => CampaignOptimizer::Random {
                budget: entry.budget.unwrap_or(DEFAULT_LLMO_BUDGET),
                batch_size: entry.batch_size.unwrap_or(DEFAULT_POPULATION),
            },
            "exhaustive" => CampaignOptimizer::Exhaustive {
                budget: entry
                    .budget
                    .unwrap_or(llmo_core::search_space::NUM_GENOTYPES),
            },
            name => {
                let kind = MhKind::from_name(name)
                    .ok_or_else(|| anyhow!("unknown optimizer kind '{name}'"))?;
                let kind = apply_param_overrides(kind, &entry.params)?;
                let mut spec = MhSpec::new(kind, entry.budget.unwrap_or(DEFAULT_MH_BUDGET));
                spec.population_size = entry.population.unwrap_or(DEFAULT_POPULATION);
                CampaignOptimizer::Mh(spec)
            }
        };
        let label = entry.label.clone().unwrap_or_else(|| entry.kind.clone());
        optimizers.push((label, optimizer));
    }

    let mut campaign = CampaignConfig::new(
        optimizers,
        instances,
        config.trials,
        seed_override.unwrap_or(config.master_seed),
    );
    campaign.jobs = if jobs_override != 0 {
        jobs_override
    } else {
        config.jobs.unwrap_or(0)
    };
    Ok(campaign)
}
