//! Key tables, `key=value` files and flag/file/default precedence.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use clap::{Arg, ArgAction, ArgMatches, Command};

/// Environment variable consulted for the thread count when neither the
/// flag nor the file sets it.
pub const THREADS_ENV: &str = "ISING_LAB_THREADS";

/// Input that fails validation; maps to exit code 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

macro_rules! bail {
    ($($arg:tt)*) => { return Err(ConfigError(format!($($arg)*))) };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KeyType {
    /// Finite real `>= 0`.
    NonNegative,
    /// Finite real.
    Real,
    /// Comma-separated list of reals `>= 0`.
    NonNegativeList,
    /// Integer `>= 1`.
    Positive,
    /// Integer `>= 0`.
    Count,
    /// Comma-separated list of integers `>= 0`, possibly empty.
    CountList,
    /// One of the listed words.
    Choice(&'static [&'static str]),
    /// Comma-separated words from the list.
    ChoiceList(&'static [&'static str]),
    /// Free text (paths, lattice shapes, windows).
    Text,
}

/// One configuration key: flag name, default and type.
#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub ty: KeyType,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, ty: KeyType, help: &'static str) -> Key {
    Key { name, default, ty, help }
}

/// Keys that control how a run is carried out rather than what it
/// computes; they are left out of the parameter echo in results.
pub const RUNTIME_KEYS: [&str; 4] = ["threads", "output", "format", "timing"];

const COMMON: [Key; 3] = [
    key("threads", "0", KeyType::Count, "worker threads, 0 = one per core"),
    key("output", "-", KeyType::Text, "output path, - for stdout"),
    key("timing", "off", KeyType::Choice(&["on", "off"]), "fill the seconds column with wall-clock time"),
];

const CSV: Key = key("format", "csv", KeyType::Choice(&["csv", "json"]), "output format");
const JSON: Key = key("format", "json", KeyType::Choice(&["csv", "json"]), "output format");

const BC: KeyType = KeyType::Choice(&["free", "plus", "minus", "periodic", "dobrushin"]);

const EXACT: &[Key] = &[
    CSV,
    key("lattice", "3x3", KeyType::Text, "box sides such as 4x4, or file:<path> for an edge list"),
    key("bc", "free", BC, "boundary condition; periodic builds a torus"),
    key("beta", "0.44068679350977147", KeyType::NonNegativeList, "inverse temperatures"),
    key("h", "0", KeyType::Real, "uniform external field"),
    key("method", "enumerate", KeyType::Choice(&["enumerate", "transfer", "low-temp", "high-temp", "all"]), "method"),
    key(
        "observable",
        "log-partition",
        KeyType::ChoiceList(&["log-partition", "free-energy", "energy", "magnetization", "onsager", "yang"]),
        "observables",
    ),
];

const MC: &[Key] = &[
    CSV,
    key("algo", "sw", KeyType::Choice(&["sw", "glauber"]), "Swendsen–Wang or Glauber dynamics"),
    key("beta", "0.44068679350977147", KeyType::NonNegative, "inverse temperature"),
    key("h", "0", KeyType::Real, "uniform external field"),
    key("L", "16", KeyType::Positive, "side length"),
    key("d", "2", KeyType::Positive, "dimension"),
    key("bc", "periodic", BC, "boundary condition; periodic builds a torus"),
    key("graph", "", KeyType::Text, "edge-list file replacing the generated lattice"),
    key("sweeps", "2000", KeyType::Positive, "sweeps per chain, burn-in included"),
    key("burnin", "200", KeyType::Count, "discarded sweeps per chain"),
    key("chains", "4", KeyType::Positive, "independent chains"),
    key("seed", "1", KeyType::Count, "master seed"),
    key(
        "observable",
        "abs-magnetization",
        KeyType::ChoiceList(&["magnetization", "abs-magnetization", "energy", "specific-heat", "susceptibility", "two-point"]),
        "observables; two-point reports ⟨σ_0 σ_r⟩ along the first axis for r ≤ L/2",
    ),
];

const FK: &[Key] = &[
    CSV,
    key("p", "0.5857864376269049", KeyType::NonNegative, "edge parameter"),
    key("q", "2", KeyType::NonNegative, "cluster weight"),
    key("L", "16", KeyType::Positive, "side length (short side for crossings)"),
    key("rho", "1", KeyType::NonNegative, "aspect ratio of the crossing rectangle"),
    key("mode", "crossing", KeyType::Choice(&["sample", "crossing", "check"]), "experiment"),
    key("graph", "", KeyType::Text, "edge-list file replacing the generated box in sample mode"),
    key("sweeps", "2000", KeyType::Positive, "sweeps per chain, burn-in included"),
    key("burnin", "200", KeyType::Count, "discarded sweeps per chain"),
    key("chains", "4", KeyType::Positive, "independent chains"),
    key("seed", "1", KeyType::Count, "master seed"),
];

const CURRENTS: &[Key] = &[
    CSV,
    key("mode", "correlation", KeyType::Choice(&["correlation", "switching", "ursell", "diffineq"]), "experiment"),
    key("lattice", "2x3", KeyType::Text, "box sides, or file:<path> for an edge list"),
    key("bc", "free", KeyType::Choice(&["free", "periodic"]), "free box or torus"),
    key("beta", "0.4", KeyType::NonNegative, "inverse temperature"),
    key("h", "0", KeyType::Real, "field for the magnetisation inequality"),
    key("sources", "0,1", KeyType::Text, "source vertices; for switching, A and B separated by ;"),
    key("nmax", "10", KeyType::Positive, "largest current per edge"),
    key("inequality", "chi-bubble", KeyType::Choice(&["chi-bubble", "magnetization"]), "differential inequality"),
];

const CHECK: &[Key] = &[
    JSON,
    key(
        "kind",
        "all",
        KeyType::ChoiceList(&[
            "all",
            "griffiths1",
            "griffiths2",
            "ghs",
            "simon-lieb",
            "mms",
            "fkg-spin",
            "fkg-fk",
            "p-monotone",
            "lee-yang",
            "gaussian-domination",
        ]),
        "inequality families",
    ),
    key("trials", "50", KeyType::Positive, "random instances per family"),
    key("seed", "1", KeyType::Count, "master seed"),
    key("size-cap", "10", KeyType::Positive, "largest vertex count of a random instance"),
];

const SCALING: &[Key] = &[
    CSV,
    key(
        "kind",
        "spin-decay",
        KeyType::Choice(&["beta-magnetization", "spin-decay", "energy-decay", "boundary-pfaffian", "relations"]),
        "experiment",
    ),
    key("L", "64", KeyType::Positive, "side length"),
    key("sweeps", "2000", KeyType::Positive, "sweeps per chain, burn-in included"),
    key("burnin", "200", KeyType::Count, "discarded sweeps per chain"),
    key("chains", "1", KeyType::Positive, "independent chains"),
    key("seed", "1", KeyType::Count, "master seed"),
    key("window", "", KeyType::Text, "separation window lo:hi, default 4:L/4"),
    key("separations", "", KeyType::CountList, "minimum separations of the Pfaffian experiment, default L/8,L/4"),
];

const HOLO: &[Key] = &[
    CSV,
    key("mode", "residual", KeyType::Choice(&["residual", "orderdisorder"]), "experiment"),
    key("input", "", KeyType::Text, "JSON file with the domain and insertions"),
];

/// Subcommands with their key tables.
pub const SUBCOMMANDS: [(&str, &str, &[Key]); 7] = [
    ("exact", "exact partition functions and observables", EXACT),
    ("mc", "Markov chain Monte Carlo estimates", MC),
    ("fk", "FK percolation samples, crossings and couplings", FK),
    ("currents", "random-current expansions and identities", CURRENTS),
    ("check", "randomised inequality batteries", CHECK),
    ("scaling", "critical exponents and boundary Pfaffians", SCALING),
    ("holo", "discrete holomorphicity and order-disorder correlators", HOLO),
];

fn table(subcommand: &str) -> Result<&'static [Key], ConfigError> {
    SUBCOMMANDS
        .iter()
        .find(|(name, _, _)| *name == subcommand)
        .map(|&(_, _, keys)| keys)
        .ok_or_else(|| ConfigError(format!("unknown subcommand `{subcommand}`")))
}

fn all_keys(subcommand: &str) -> Result<Vec<Key>, ConfigError> {
    Ok(table(subcommand)?.iter().chain(&COMMON).copied().collect())
}

pub fn command() -> Command {
    let mut cmd = Command::new("ising-lab")
        .about("Exact, Monte Carlo and graphical experiments on the Ising model")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, about, keys) in SUBCOMMANDS {
        let mut sub = Command::new(name)
            .about(about)
            .arg(Arg::new("config").long("config").value_name("FILE").help("key=value configuration file"))
            .arg(
                Arg::new("dry-run")
                    .long("dry-run")
                    .action(ArgAction::SetTrue)
                    .help("validate and print the canonical configuration"),
            );
        for k in keys.iter().chain(&COMMON) {
            let help = if k.default.is_empty() { k.help.to_string() } else { format!("{} [default: {}]", k.help, k.default) };
            sub = sub.arg(Arg::new(k.name).long(k.name).value_name("VALUE").help(help).allow_hyphen_values(true));
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_file(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key=value, got {raw:?}", i + 1);
        };
        let k = k.trim().to_string();
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            bail!("config line {}: duplicate key `{k}`", i + 1);
        }
    }
    Ok(out)
}

fn words(s: &str) -> Vec<&str> {
    s.split(',').map(str::trim).filter(|w| !w.is_empty()).collect()
}

fn normalize(k: &Key, raw: &str) -> Result<String, ConfigError> {
    let real = |s: &str| -> Result<f64, ConfigError> {
        match s.trim().parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(ConfigError(format!("{}: `{s}` is not a finite number", k.name))),
        }
    };
    let nonneg = |s: &str| -> Result<f64, ConfigError> {
        let x = real(s)?;
        if x < 0.0 {
            bail!("{} must be >= 0, got {x}", k.name);
        }
        Ok(x)
    };
    let count = |s: &str| -> Result<u64, ConfigError> {
        s.trim().parse::<u64>().map_err(|_| ConfigError(format!("{}: `{s}` is not a non-negative integer", k.name)))
    };
    Ok(match k.ty {
        KeyType::Real => real(raw)?.to_string(),
        KeyType::NonNegative => nonneg(raw)?.to_string(),
        KeyType::NonNegativeList => {
            let xs = words(raw).into_iter().map(nonneg).collect::<Result<Vec<_>, _>>()?;
            if xs.is_empty() {
                bail!("{} needs at least one value", k.name);
            }
            xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
        }
        KeyType::Positive => {
            let n = count(raw)?;
            if n == 0 {
                bail!("{} must be at least 1", k.name);
            }
            n.to_string()
        }
        KeyType::Count => count(raw)?.to_string(),
        KeyType::CountList => words(raw)
            .into_iter()
            .map(|w| count(w).map(|n| n.to_string()))
            .collect::<Result<Vec<_>, _>>()?
            .join(","),
        KeyType::Choice(options) => {
            let w = raw.trim();
            if !options.contains(&w) {
                bail!("{} must be one of {}, got `{w}`", k.name, options.join(", "));
            }
            w.to_string()
        }
        KeyType::ChoiceList(options) => {
            let ws = words(raw);
            if ws.is_empty() {
                bail!("{} needs at least one value", k.name);
            }
            if let Some(w) = ws.iter().find(|w| !options.contains(w)) {
                bail!("{} must be drawn from {}, got `{w}`", k.name, options.join(", "));
            }
            ws.join(",")
        }
        KeyType::Text => raw.trim().to_string(),
    })
}

/// Effective configuration of one subcommand: every key has a normalised
/// value, and `explicit` records the keys set by flag or file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub subcommand: String,
    values: BTreeMap<String, String>,
    explicit: Vec<String>,
}

impl ExperimentConfig {
    /// Merges defaults, then `file`, then `flags`. `env_threads` is used
    /// when neither sets `threads`.
    pub fn resolve(
        subcommand: &str,
        file: &BTreeMap<String, String>,
        flags: &BTreeMap<String, String>,
        env_threads: Option<&str>,
    ) -> Result<Self, ConfigError> {
        let keys = all_keys(subcommand)?;
        let mut file = file.clone();
        if let Some(s) = file.remove("subcommand") {
            if s != subcommand {
                bail!("config file is for `{s}`, not `{subcommand}`");
            }
        }
        for source in [&file, flags] {
            if let Some(bad) = source.keys().find(|k| !keys.iter().any(|key| key.name == k.as_str())) {
                bail!("unknown key `{bad}` for `{subcommand}`");
            }
        }
        let mut values = BTreeMap::new();
        let mut explicit = Vec::new();
        for k in &keys {
            let raw = if let Some(v) = flags.get(k.name).or_else(|| file.get(k.name)) {
                explicit.push(k.name.to_string());
                v.as_str()
            } else if k.name == "threads" && env_threads.is_some() {
                env_threads.unwrap_or_default()
            } else {
                k.default
            };
            values.insert(k.name.to_string(), normalize(k, raw)?);
        }
        let cfg = ExperimentConfig { subcommand: subcommand.to_string(), values, explicit };
        cfg.check_conflicts()?;
        Ok(cfg)
    }

    /// Parses the command line (and the `--config` file it names).
    pub fn from_matches(subcommand: &str, m: &ArgMatches) -> Result<(Self, bool), ConfigError> {
        let file = match m.get_one::<String>("config") {
            Some(path) => {
                let text = std::fs::read_to_string(Path::new(path))
                    .map_err(|e| ConfigError(format!("cannot read config file {path}: {e}")))?;
                parse_file(&text)?
            }
            None => BTreeMap::new(),
        };
        let mut flags = BTreeMap::new();
        for k in all_keys(subcommand)? {
            if let Some(v) = m.get_one::<String>(k.name) {
                flags.insert(k.name.to_string(), v.clone());
            }
        }
        let env = std::env::var(THREADS_ENV).ok();
        let cfg = Self::resolve(subcommand, &file, &flags, env.as_deref())?;
        Ok((cfg, m.get_flag("dry-run")))
    }

    fn check_conflicts(&self) -> Result<(), ConfigError> {
        if !self.get("graph").unwrap_or_default().is_empty() {
            for other in ["L", "d", "lattice"] {
                if self.is_explicit(other) {
                    bail!("`graph` conflicts with `{other}`");
                }
            }
        }
        if self.get("sweeps").is_some() && self.usize("sweeps")? <= self.usize("burnin")? {
            bail!("sweeps ({}) must exceed burnin ({})", self.usize("sweeps")?, self.usize("burnin")?);
        }
        if self.subcommand == "holo" && self.str("input")?.is_empty() {
            bail!("holo needs an input file");
        }
        Ok(())
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.iter().any(|k| k == key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn str(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError(format!("missing key `{key}`")))
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.str(key)?.parse().map_err(|_| ConfigError(format!("{key} is not a number")))
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.str(key)?
            .split(',')
            .filter(|w| !w.is_empty())
            .map(|w| w.parse().map_err(|_| ConfigError(format!("{key} is not a list of numbers"))))
            .collect()
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        self.str(key)?.parse().map_err(|_| ConfigError(format!("{key} is not an integer")))
    }

    pub fn u64(&self, key: &str) -> Result<u64, ConfigError> {
        self.str(key)?.parse().map_err(|_| ConfigError(format!("{key} is not an integer")))
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>, ConfigError> {
        self.str(key)?
            .split(',')
            .filter(|w| !w.is_empty())
            .map(|w| w.parse().map_err(|_| ConfigError(format!("{key} is not a list of integers"))))
            .collect()
    }

    pub fn words(&self, key: &str) -> Result<Vec<&str>, ConfigError> {
        Ok(self.str(key)?.split(',').filter(|w| !w.is_empty()).collect())
    }

    /// `key=value` lines in key order, preceded by the subcommand. Reading
    /// this text back as a config file reproduces the configuration.
    pub fn canonical(&self) -> String {
        let mut out = format!("subcommand={}\n", self.subcommand);
        for (k, v) in &self.values {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }

    /// `key=value` pairs joined by `;`, runtime keys left out.
    pub fn param_echo(&self) -> String {
        self.values
            .iter()
            .filter(|(k, _)| !RUNTIME_KEYS.contains(&k.as_str()))
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}
