//! Run configuration: a documented key schema per command, merged from
//! defaults, an optional TOML file, `--set` assignments and named flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use super::schema::{schema, KeySpec};
use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CommandName {
    TwoSlit,
    Barrier,
    Wheeler,
    Propagate,
}

impl CommandName {
    pub const ALL: [CommandName; 4] = [Self::TwoSlit, Self::Barrier, Self::Wheeler, Self::Propagate];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::TwoSlit => "twoslit",
            Self::Barrier => "barrier",
            Self::Wheeler => "wheeler",
            Self::Propagate => "propagate",
        }
    }

    /// Schema key set by `--seed`, if the command is stochastic.
    pub fn seed_key(&self) -> Option<&'static str> {
        match self {
            Self::TwoSlit | Self::Wheeler => Some("ensemble.seed"),
            Self::Barrier | Self::Propagate => None,
        }
    }

    pub fn dt_key(&self) -> &'static str {
        match self {
            Self::Wheeler => "numerics.dt",
            _ => "time.dt",
        }
    }

    pub fn grid_key(&self) -> Option<&'static str> {
        match self {
            Self::TwoSlit => Some("lattice.nx"),
            Self::Wheeler | Self::Propagate => Some("grid.n"),
            Self::Barrier => None,
        }
    }
}

impl fmt::Display for CommandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a configuration value came from, for error attribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Default,
    File { path: String, line: usize },
    Set,
    Flag(&'static str),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Default => f.write_str("default"),
            Self::File { path, line } => write!(f, "{path}:{line}"),
            Self::Set => f.write_str("--set"),
            Self::Flag(name) => write!(f, "--{name}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub value: Value,
    pub origin: Origin,
}

/// Command-line inputs that feed the merged configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub grid: Option<usize>,
    /// `key=value` assignments; values use TOML syntax, bare words are strings.
    pub set: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandName,
    pub output_dir: PathBuf,
    values: BTreeMap<String, Setting>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn flatten(prefix: &str, table: &Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn key_lines(prefix: &str, table: &toml::de::DeTable<'_>, text: &str, out: &mut BTreeMap<String, usize>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.get_ref().to_string()
        } else {
            format!("{prefix}.{}", k.get_ref())
        };
        if let Some(t) = v.get_ref().as_table() {
            key_lines(&key, t, text, out);
        } else {
            out.insert(key, line_of(text, k.span().start));
        }
    }
}

/// Flattened `(key, value, line)` entries of a TOML document.
pub fn parse_document(text: &str, path: &str) -> Result<Vec<(String, Value, usize)>, CliError> {
    let table: Table = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
        CliError::Validation(format!("{path}:{line}: {}", e.message()))
    })?;
    let spanned = toml::de::DeTable::parse(text)
        .map_err(|e| CliError::Validation(format!("{path}: {}", e.message())))?;
    let mut lines = BTreeMap::new();
    key_lines("", spanned.get_ref(), text, &mut lines);
    let mut flat = Vec::new();
    flatten("", &table, &mut flat);
    Ok(flat
        .into_iter()
        .map(|(k, v)| {
            let line = lines.get(&k).copied().unwrap_or(0);
            (k, v, line)
        })
        .collect())
}

fn type_name(v: &Value) -> &'static str {
    v.type_str()
}

/// Converts `given` to the type of `spec.default`; integers widen to floats.
fn coerce(spec: &KeySpec, given: Value) -> Result<Value, String> {
    let mismatch = |g: &Value| format!("expected {}, got {}", type_name(&spec.default), type_name(g));
    let v = match (&spec.default, given) {
        (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
        (Value::Float(_), v @ Value::Float(_)) => v,
        (Value::Integer(_), v @ Value::Integer(_)) => v,
        (Value::Boolean(_), v @ Value::Boolean(_)) => v,
        (Value::String(_), Value::String(s)) => {
            if !spec.choices.is_empty() && !spec.choices.contains(&s.as_str()) {
                return Err(format!("must be one of {}, got \"{s}\"", spec.choices.join(", ")));
            }
            Value::String(s)
        }
        (Value::Array(_), Value::Array(items)) => {
            let mut out = Vec::with_capacity(items.len());
            for item in items {
                match item {
                    Value::Integer(i) => out.push(Value::Float(i as f64)),
                    v @ Value::Float(_) => out.push(v),
                    other => return Err(format!("expected an array of numbers, found {}", type_name(&other))),
                }
            }
            Value::Array(out)
        }
        (_, g) => return Err(mismatch(&g)),
    };
    Ok(v)
}

fn parse_assignment(raw: &str) -> Result<(String, Value), CliError> {
    let Some((key, value)) = raw.split_once('=') else {
        return Err(CliError::Validation(format!("--set {raw}: expected key=value")));
    };
    let key = key.trim().to_string();
    let value = value.trim();
    let parsed = toml::from_str::<Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()));
    Ok((key, parsed))
}

impl RunConfig {
    /// Schema defaults with no overrides.
    pub fn defaults(command: CommandName, output_dir: impl Into<PathBuf>) -> Self {
        let values = schema(command)
            .into_iter()
            .map(|s| {
                (
                    s.key.to_string(),
                    Setting {
                        value: s.default,
                        origin: Origin::Default,
                    },
                )
            })
            .collect();
        Self {
            command,
            output_dir: output_dir.into(),
            values,
        }
    }

    /// Merges defaults, the config file, `--set` assignments and named flags,
    /// in increasing precedence, then validates every value.
    pub fn resolve(command: CommandName, overrides: &Overrides, output_dir: impl Into<PathBuf>) -> Result<Self, CliError> {
        let mut cfg = Self::defaults(command, output_dir);
        if let Some(path) = &overrides.config {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
                context: format!("reading {}", path.display()),
                source: e,
            })?;
            cfg.apply_document(&text, path)?;
        }
        for raw in &overrides.set {
            let (key, value) = parse_assignment(raw)?;
            cfg.assign(&key, value, Origin::Set)?;
        }
        if let Some(seed) = overrides.seed {
            let key = command
                .seed_key()
                .ok_or_else(|| CliError::Validation(format!("--seed: the {command} command is deterministic and takes no seed")))?;
            let seed = i64::try_from(seed).map_err(|_| CliError::Validation(format!("--seed: {seed} exceeds the largest TOML integer")))?;
            cfg.assign(key, Value::Integer(seed), Origin::Flag("seed"))?;
        }
        if let Some(dt) = overrides.dt {
            cfg.assign(command.dt_key(), Value::Float(dt), Origin::Flag("dt"))?;
        }
        if let Some(n) = overrides.grid {
            let key = command
                .grid_key()
                .ok_or_else(|| CliError::Validation(format!("--grid: the {command} command has no spatial grid")))?;
            cfg.assign(key, Value::Integer(n as i64), Origin::Flag("grid"))?;
        }
        super::validate(&cfg)?;
        Ok(cfg)
    }

    /// Applies every key of a TOML document; unknown keys are errors.
    pub fn apply_document(&mut self, text: &str, path: &Path) -> Result<(), CliError> {
        let name = path.display().to_string();
        for (key, value, line) in parse_document(text, &name)? {
            self.assign(
                &key,
                value,
                Origin::File {
                    path: name.clone(),
                    line,
                },
            )?;
        }
        Ok(())
    }

    pub fn assign(&mut self, key: &str, value: Value, origin: Origin) -> Result<(), CliError> {
        let Some(spec) = schema(self.command).into_iter().find(|s| s.key == key) else {
            return Err(CliError::Validation(format!(
                "{origin}: unknown key `{key}` for the {} command (list the keys with --list-keys)",
                self.command
            )));
        };
        let value = coerce(&spec, value).map_err(|m| CliError::Validation(format!("{origin}: {key}: {m}")))?;
        self.values.insert(key.to_string(), Setting { value, origin });
        Ok(())
    }

    pub fn setting(&self, key: &str) -> &Setting {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("key `{key}` is not in the {} schema", self.command))
    }

    /// Validation error attributed to the source of `key`.
    pub fn invalid(&self, key: &str, message: impl fmt::Display) -> CliError {
        CliError::Validation(format!("{}: {key} {message}", self.setting(key).origin))
    }

    pub fn f64(&self, key: &str) -> f64 {
        match &self.setting(key).value {
            Value::Float(v) => *v,
            Value::Integer(i) => *i as f64,
            other => panic!("`{key}` is a {}", other.type_str()),
        }
    }

    pub fn i64(&self, key: &str) -> i64 {
        match &self.setting(key).value {
            Value::Integer(i) => *i,
            other => panic!("`{key}` is a {}", other.type_str()),
        }
    }

    pub fn str(&self, key: &str) -> &str {
        match &self.setting(key).value {
            Value::String(s) => s,
            other => panic!("`{key}` is a {}", other.type_str()),
        }
    }

    pub fn f64_list(&self, key: &str) -> Vec<f64> {
        match &self.setting(key).value {
            Value::Array(a) => a.iter().filter_map(|v| v.as_float()).collect(),
            other => panic!("`{key}` is a {}", other.type_str()),
        }
    }

    pub fn positive(&self, key: &str) -> Result<f64, CliError> {
        let v = self.f64(key);
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(self.invalid(key, format!("must be positive and finite, got {v}")))
        }
    }

    pub fn finite(&self, key: &str) -> Result<f64, CliError> {
        let v = self.f64(key);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.invalid(key, format!("must be finite, got {v}")))
        }
    }

    /// Integer value of `key` that must be at least `min`.
    pub fn count(&self, key: &str, min: usize) -> Result<usize, CliError> {
        let v = self.i64(key);
        if v >= min as i64 {
            Ok(v as usize)
        } else {
            Err(self.invalid(key, format!("must be at least {min}, got {v}")))
        }
    }

    pub fn seed(&self) -> Option<u64> {
        self.command.seed_key().map(|k| self.i64(k) as u64)
    }

    /// The merged configuration as a nested TOML table.
    pub fn effective(&self) -> Table {
        let mut root = Table::new();
        for (key, setting) in &self.values {
            let mut parts: Vec<&str> = key.split('.').collect();
            let leaf = parts.pop().expect("keys are non-empty");
            let mut table = &mut root;
            for p in parts {
                table = table
                    .entry(p.to_string())
                    .or_insert_with(|| Value::Table(Table::new()))
                    .as_table_mut()
                    .expect("schema keys do not shadow tables");
            }
            table.insert(leaf.to_string(), setting.value.clone());
        }
        root
    }
}

fn display_value(v: &Value) -> String {
    match v {
        Value::Float(f) => format!("{f:?}"),
        Value::Array(items) => format!("[{}]", items.iter().map(display_value).collect::<Vec<_>>().join(", ")),
        other => other.to_string(),
    }
}

/// `--list-keys` text: every key with its default and description.
pub fn key_listing(command: CommandName) -> String {
    let specs = schema(command);
    let width = specs.iter().map(|s| s.key.len()).max().unwrap_or(0);
    let mut out = format!("Configuration keys for `{command}` (TOML file, or --set key=value):\n");
    for s in specs {
        out.push_str(&format!("  {:width$}  = {:<12}  {}", s.key, display_value(&s.default), s.doc));
        if !s.choices.is_empty() {
            out.push_str(&format!(" [{}]", s.choices.join("|")));
        }
        out.push('\n');
    }
    out
}
