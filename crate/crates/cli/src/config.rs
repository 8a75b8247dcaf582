//! Run configuration: command-line flags over a `key = value` file over
//! built-in defaults.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;

/// Error that maps to exit code 2: a missing or unusable input named by
/// its flag.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Flags shared by every subcommand. Each may also appear in the config
/// file under its name without the leading dashes.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Flat `key = value` file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Article bodies CSV (`Body ID`, `articleBody`).
    #[arg(long, global = true)]
    pub bodies: Option<PathBuf>,
    /// Separate bodies CSV for the test stances [default: --bodies].
    #[arg(long, global = true)]
    pub bodies_test: Option<PathBuf>,
    /// Training stances CSV (`Headline`, `Body ID`, `Stance`).
    #[arg(long, global = true)]
    pub stances_train: Option<PathBuf>,
    /// Test stances CSV.
    #[arg(long, global = true)]
    pub stances_test: Option<PathBuf>,
    /// word2vec vectors, text or `.bin`.
    #[arg(long, global = true)]
    pub embeddings: Option<PathBuf>,
    /// Directory holding the model containers [default: models].
    #[arg(long, global = true)]
    pub model_dir: Option<PathBuf>,
    /// Key sentences per article [default: 3].
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Agreement-model training epochs [default: 10].
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Seed for every randomized step [default: 42].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Rank of the latent semantic projection [default: 50].
    #[arg(long, global = true)]
    pub svd_rank: Option<usize>,
    /// Agreement-model hidden size [default: 100].
    #[arg(long, global = true)]
    pub hidden_dim: Option<usize>,
    /// Boosting rounds for the relatedness trees [default: 200].
    #[arg(long, global = true)]
    pub gbdt_rounds: Option<usize>,
    /// Agreement-model mini-batch size [default: 32].
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    /// Agreement-model Adam step size [default: 0.001].
    #[arg(long, global = true)]
    pub learning_rate: Option<f64>,
    /// Service port [default: 8080].
    #[arg(long, global = true)]
    pub port: Option<u16>,
    /// Allowed CORS origin for the service [default: any].
    #[arg(long, global = true)]
    pub cors_origin: Option<String>,
    /// Candidates retrieved per query without an explicit pool [default: 30].
    #[arg(long, global = true)]
    pub pool_size: Option<usize>,
    /// Output directory for reports [default: <model-dir>/reports].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Key-sentence counts to sweep, comma separated [default: 1,3,5].
    #[arg(long, global = true)]
    pub sweep_k: Option<String>,
    /// Epoch budgets to sweep, comma separated [default: --epochs].
    #[arg(long, global = true)]
    pub sweep_epochs: Option<String>,
    /// Seeds to average over, comma separated [default: --seed].
    #[arg(long, global = true)]
    pub seeds: Option<String>,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub bodies: Option<PathBuf>,
    pub bodies_test: Option<PathBuf>,
    pub stances_train: Option<PathBuf>,
    pub stances_test: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub model_dir: PathBuf,
    pub k: usize,
    pub epochs: usize,
    pub seed: u64,
    pub svd_rank: usize,
    pub hidden_dim: usize,
    pub gbdt_rounds: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub port: u16,
    pub cors_origin: Option<String>,
    pub pool_size: usize,
    pub out: Option<PathBuf>,
    pub sweep_k: Vec<usize>,
    pub sweep_epochs: Option<Vec<usize>>,
    pub seeds: Option<Vec<u64>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            bodies: None,
            bodies_test: None,
            stances_train: None,
            stances_test: None,
            embeddings: None,
            model_dir: PathBuf::from("models"),
            k: 3,
            epochs: 10,
            seed: 42,
            svd_rank: 50,
            hidden_dim: 100,
            gbdt_rounds: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            port: 8080,
            cors_origin: None,
            pool_size: 30,
            out: None,
            sweep_k: vec![1, 3, 5],
            sweep_epochs: None,
            seeds: None,
        }
    }
}

const KEYS: [&str; 21] = [
    "bodies",
    "bodies-test",
    "stances-train",
    "stances-test",
    "embeddings",
    "model-dir",
    "k",
    "epochs",
    "seed",
    "svd-rank",
    "hidden-dim",
    "gbdt-rounds",
    "batch-size",
    "learning-rate",
    "port",
    "cors-origin",
    "pool-size",
    "out",
    "sweep-k",
    "sweep-epochs",
    "seeds",
];

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// underscores in keys are read as dashes. Relative paths are kept as
/// written.
pub fn parse_config_file(text: &str, source: &str) -> Result<HashMap<String, String>, UsageError> {
    let mut out = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(UsageError(format!("{source}:{}: expected key = value", n + 1)));
        };
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(UsageError(format!("{source}:{}: unknown key {key:?}", n + 1)));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, UsageError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| UsageError(format!("--{key}: cannot parse {value:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, UsageError>
where
    T::Err: fmt::Display,
{
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(UsageError(format!("--{key}: empty list")));
    }
    Ok(items)
}

impl RunConfig {
    /// Resolves `flags` over `file` over the defaults.
    pub fn resolve(flags: &Flags, file: &HashMap<String, String>) -> Result<Self, UsageError> {
        let mut c = RunConfig::default();
        let pick = |key: &str, flag: Option<String>| flag.or_else(|| file.get(key).cloned());
        let path = |key: &str, flag: &Option<PathBuf>| flag.clone().or_else(|| file.get(key).map(PathBuf::from));
        c.bodies = path("bodies", &flags.bodies);
        c.bodies_test = path("bodies-test", &flags.bodies_test);
        c.stances_train = path("stances-train", &flags.stances_train);
        c.stances_test = path("stances-test", &flags.stances_test);
        c.embeddings = path("embeddings", &flags.embeddings);
        c.out = path("out", &flags.out);
        if let Some(p) = path("model-dir", &flags.model_dir) {
            c.model_dir = p;
        }
        macro_rules! scalar {
            ($field:ident, $key:literal) => {
                if let Some(v) = pick($key, flags.$field.map(|v| v.to_string())) {
                    c.$field = parse_value($key, &v)?;
                }
            };
        }
        scalar!(k, "k");
        scalar!(epochs, "epochs");
        scalar!(seed, "seed");
        scalar!(svd_rank, "svd-rank");
        scalar!(hidden_dim, "hidden-dim");
        scalar!(gbdt_rounds, "gbdt-rounds");
        scalar!(batch_size, "batch-size");
        scalar!(learning_rate, "learning-rate");
        scalar!(port, "port");
        scalar!(pool_size, "pool-size");
        c.cors_origin = pick("cors-origin", flags.cors_origin.clone());
        if let Some(v) = pick("sweep-k", flags.sweep_k.clone()) {
            c.sweep_k = parse_list("sweep-k", &v)?;
        }
        if let Some(v) = pick("sweep-epochs", flags.sweep_epochs.clone()) {
            c.sweep_epochs = Some(parse_list("sweep-epochs", &v)?);
        }
        if let Some(v) = pick("seeds", flags.seeds.clone()) {
            c.seeds = Some(parse_list("seeds", &v)?);
        }
        for (key, v) in [
            ("k", c.k),
            ("epochs", c.epochs),
            ("svd-rank", c.svd_rank),
            ("hidden-dim", c.hidden_dim),
            ("gbdt-rounds", c.gbdt_rounds),
            ("batch-size", c.batch_size),
            ("pool-size", c.pool_size),
        ] {
            if v == 0 {
                return Err(UsageError(format!("--{key} must be at least 1")));
            }
        }
        if !(c.learning_rate > 0.0 && c.learning_rate.is_finite()) {
            return Err(UsageError("--learning-rate must be positive".into()));
        }
        Ok(c)
    }

    /// Reads the `--config` file, if any, and resolves.
    pub fn from_flags(flags: &Flags) -> Result<Self, UsageError> {
        let file = match &flags.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| UsageError(format!("--config: cannot read {}: {e}", p.display())))?;
                parse_config_file(&text, &p.display().to_string())?
            }
            None => HashMap::new(),
        };
        Self::resolve(flags, &file)
    }

    pub fn bodies_for_test(&self) -> Option<&Path> {
        self.bodies_test.as_deref().or(self.bodies.as_deref())
    }

    pub fn report_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| self.model_dir.join("reports"))
    }
}

/// Checks that `path` was given and exists; the error names `flag`.
pub fn require_file<'a>(flag: &str, path: Option<&'a Path>) -> Result<&'a Path, UsageError> {
    let p = path.ok_or_else(|| UsageError(format!("--{flag} is required")))?;
    if !p.exists() {
        return Err(UsageError(format!("--{flag}: {} does not exist", p.display())));
    }
    Ok(p)
}
