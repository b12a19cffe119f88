//! Line-oriented experiment configuration.
//!
//! ```text
//! [experiment]
//! kind = rate            # moments | bound | distance | rate | ibp_check | all
//! seed = 42
//! out_dir = results
//!
//! [model]
//! kernel = exponential   # exponential | erlang | zero | tabulated
//! alpha = 1
//! beta = 2
//! mu = 1
//!
//! [marks]
//! dist = point_one
//!
//! [budget]
//! n_paths = 5000
//! k_grid = 64
//! T_grid = 25,50,100,200,400
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hawkes_stein::distance::Statistic;
use hawkes_stein::stein::WeightFunction;
use hawkes_stein::{HawkesModel, Kernel, MarkDistribution};

pub const DEFAULT_N_PATHS: usize = 5000;
pub const DEFAULT_K_GRID: usize = 64;
pub const DEFAULT_T_GRID: [f64; 5] = [25.0, 50.0, 100.0, 200.0, 400.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Moments,
    Bound,
    Distance,
    Rate,
    IbpCheck,
    All,
}

impl ExperimentKind {
    pub fn includes(self, other: ExperimentKind) -> bool {
        self == other || self == ExperimentKind::All
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Moments => "moments",
            ExperimentKind::Bound => "bound",
            ExperimentKind::Distance => "distance",
            ExperimentKind::Rate => "rate",
            ExperimentKind::IbpCheck => "ibp_check",
            ExperimentKind::All => "all",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "moments" => ExperimentKind::Moments,
            "bound" => ExperimentKind::Bound,
            "distance" => ExperimentKind::Distance,
            "rate" => ExperimentKind::Rate,
            "ibp_check" => ExperimentKind::IbpCheck,
            "all" => ExperimentKind::All,
            other => return Err(format!("unknown experiment kind {other:?}")),
        })
    }
}

/// Kernel as written in the config. Tabulated kernels are loaded from
/// `table_path` when the model is built.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Exponential { alpha: f64, beta: f64 },
    Erlang { alpha: f64, beta: f64 },
    Zero,
    Tabulated { table_path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; `None` uses the machine parallelism.
    pub threads: Option<usize>,
    pub statistic: Statistic,
    /// Overrides the limit variance of the distance experiments.
    pub gamma2: Option<f64>,
    pub kernel: KernelSpec,
    pub mu: f64,
    pub marks: MarkDistribution,
    pub n_paths: usize,
    pub k_grid: usize,
    pub t_grid: Vec<f64>,
    pub weight: Option<WeightSpec>,
}

/// Optional `[weight]` section: a piecewise-constant weight and target
/// variance for the weighted bound.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    pub weight: WeightFunction,
    pub gamma2: f64,
}

/// One problem in a config, located by 1-based line number (0 when the
/// problem is a missing key).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.issues.iter().map(|i| i.to_string()).collect();
        f.write_str(&lines.join("\n"))
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    fn single(line: usize, message: impl Into<String>) -> Self {
        Self { issues: vec![ConfigIssue { line, message: message.into() }] }
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("experiment", &["kind", "seed", "out_dir", "threads", "statistic", "gamma2"]),
    ("model", &["kernel", "alpha", "beta", "mu", "table_path"]),
    ("marks", &["dist", "a", "b", "p", "mean", "sd", "logmean", "logsd", "values"]),
    ("budget", &["n_paths", "k_grid", "T_grid"]),
    ("weight", &["breaks", "values", "gamma2"]),
];

type Entries = BTreeMap<(String, String), (usize, String)>;

fn strip_comment(line: &str) -> &str {
    line.split(['#', ';']).next().unwrap_or("").trim()
}

/// Splits the text into `(section, key) → (line, value)`, collecting every
/// syntax problem.
fn tokenize(text: &str, issues: &mut Vec<ConfigIssue>) -> Entries {
    let mut entries = Entries::new();
    let mut section: Option<&str> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            match SECTIONS.iter().find(|(s, _)| *s == name) {
                Some((s, _)) => section = Some(s),
                None => {
                    issues.push(ConfigIssue { line: line_no, message: format!("unknown section [{name}]") });
                    section = None;
                }
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            issues.push(ConfigIssue { line: line_no, message: format!("expected `key = value`, got {line:?}") });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = section else {
            issues.push(ConfigIssue { line: line_no, message: format!("key {key:?} outside a known section") });
            continue;
        };
        let known = SECTIONS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !known.contains(&key) {
            issues.push(ConfigIssue { line: line_no, message: format!("unknown key {key:?} in [{sec}]") });
            continue;
        }
        if let Some((first, _)) = entries.get(&(sec.to_string(), key.to_string())) {
            issues.push(ConfigIssue { line: line_no, message: format!("duplicate key {key:?}, first set on line {first}") });
            continue;
        }
        entries.insert((sec.to_string(), key.to_string()), (line_no, value.to_string()));
    }
    entries
}

struct Reader<'a> {
    entries: &'a Entries,
    issues: Vec<ConfigIssue>,
}

impl<'a> Reader<'a> {
    fn raw(&self, section: &str, key: &str) -> Option<(usize, &'a str)> {
        self.entries.get(&(section.to_string(), key.to_string())).map(|(l, v)| (*l, v.as_str()))
    }

    fn line(&self, section: &str, key: &str) -> usize {
        self.raw(section, key).map_or(0, |(l, _)| l)
    }

    fn parse<T: FromStr>(&mut self, section: &str, key: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        let (line, value) = self.raw(section, key)?;
        match value.parse::<T>() {
            Ok(v) => Some(v),
            Err(e) => {
                self.issues.push(ConfigIssue { line, message: format!("{key}: cannot parse {value:?}: {e}") });
                None
            }
        }
    }

    fn require<T: FromStr>(&mut self, section: &str, key: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        if self.raw(section, key).is_none() {
            self.issues.push(ConfigIssue { line: 0, message: format!("missing required key {key:?} in [{section}]") });
            return None;
        }
        self.parse(section, key)
    }

    fn list(&mut self, section: &str, key: &str) -> Option<Vec<f64>> {
        let (line, value) = self.raw(section, key)?;
        let parsed: Result<Vec<f64>, _> = value.split(',').map(|v| v.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) if !v.is_empty() => Some(v),
            _ => {
                self.issues.push(ConfigIssue { line, message: format!("{key}: expected comma-separated numbers, got {value:?}") });
                None
            }
        }
    }

    fn fail(&mut self, line: usize, message: impl Into<String>) {
        self.issues.push(ConfigIssue { line, message: message.into() });
    }
}

fn parse_kernel(r: &mut Reader<'_>) -> Option<KernelSpec> {
    let name: String = r.require("model", "kernel")?;
    let kernel_line = r.line("model", "kernel");
    let spec = match name.as_str() {
        "exponential" | "erlang" => {
            let alpha: f64 = r.require("model", "alpha")?;
            let beta: f64 = r.require("model", "beta")?;
            if name == "exponential" {
                KernelSpec::Exponential { alpha, beta }
            } else {
                KernelSpec::Erlang { alpha, beta }
            }
        }
        "zero" => KernelSpec::Zero,
        "tabulated" => KernelSpec::Tabulated { table_path: PathBuf::from(r.require::<String>("model", "table_path")?) },
        other => {
            r.fail(kernel_line, format!("unknown kernel {other:?}"));
            return None;
        }
    };
    // Closed-form kernels are validated here; tables once they are read.
    let built = match spec {
        KernelSpec::Exponential { alpha, beta } => Some(Kernel::exponential(alpha, beta)),
        KernelSpec::Erlang { alpha, beta } => Some(Kernel::erlang(alpha, beta)),
        _ => None,
    };
    if let Some(Err(e)) = built {
        let line = r.line("model", "alpha").max(kernel_line);
        r.fail(line, e.to_string());
        return None;
    }
    Some(spec)
}

fn parse_marks(r: &mut Reader<'_>) -> Option<MarkDistribution> {
    let Some((line, dist)) = r.raw("marks", "dist").map(|(l, d)| (l, d.to_string())) else {
        return Some(MarkDistribution::point_mass_one());
    };
    let built = match dist.as_str() {
        "point_one" => Ok(MarkDistribution::point_mass_one()),
        "two_point" => {
            let (a, b, p) = (r.require("marks", "a")?, r.require("marks", "b")?, r.require("marks", "p")?);
            MarkDistribution::two_point(a, b, p)
        }
        "gaussian" => {
            let (m, s) = (r.require("marks", "mean")?, r.require("marks", "sd")?);
            MarkDistribution::gaussian(m, s)
        }
        "lognormal" => {
            let (m, s) = (r.require("marks", "logmean")?, r.require("marks", "logsd")?);
            MarkDistribution::lognormal(m, s)
        }
        "empirical" => {
            if r.raw("marks", "values").is_none() {
                r.fail(0, "missing required key \"values\" in [marks]");
                return None;
            }
            MarkDistribution::empirical(r.list("marks", "values")?)
        }
        other => {
            r.fail(line, format!("unknown mark distribution {other:?}"));
            return None;
        }
    };
    match built {
        Ok(m) => Some(m),
        Err(e) => {
            r.fail(line, e.to_string());
            None
        }
    }
}

fn parse_weight(r: &mut Reader<'_>) -> Option<WeightSpec> {
    let present = ["breaks", "values", "gamma2"].iter().any(|k| r.raw("weight", k).is_some());
    if !present {
        return None;
    }
    let breaks = r.list("weight", "breaks");
    let values = r.list("weight", "values");
    let gamma2: Option<f64> = r.require("weight", "gamma2");
    let line = r.line("weight", "breaks").max(r.line("weight", "values"));
    let (Some(breaks), Some(values), Some(gamma2)) = (breaks, values, gamma2) else {
        if r.raw("weight", "breaks").is_none() || r.raw("weight", "values").is_none() {
            r.fail(0, "[weight] needs both breaks and values");
        }
        return None;
    };
    if gamma2.is_nan() || gamma2 <= 0.0 {
        r.fail(r.line("weight", "gamma2"), "gamma2 must be positive");
        return None;
    }
    match WeightFunction::tabulated(breaks, values) {
        Ok(weight) => Some(WeightSpec { weight, gamma2 }),
        Err(e) => {
            r.fail(line, e.to_string());
            None
        }
    }
}

/// Parses and validates a config. Every problem found is reported, each with
/// its line number.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut issues = Vec::new();
    let entries = tokenize(text, &mut issues);
    let mut r = Reader { entries: &entries, issues };

    let kind: Option<ExperimentKind> = r.require("experiment", "kind");
    let seed: Option<u64> = r.require("experiment", "seed");
    let out_dir: Option<String> = r.require("experiment", "out_dir");
    let threads: Option<usize> = r.parse("experiment", "threads");
    if threads == Some(0) {
        let line = r.line("experiment", "threads");
        r.fail(line, "threads must be at least 1");
    }
    let statistic: Statistic = r.parse("experiment", "statistic").unwrap_or(Statistic::F);
    let gamma2: Option<f64> = r.parse("experiment", "gamma2");
    if gamma2.is_some_and(|g| !(g > 0.0 && g.is_finite())) {
        let line = r.line("experiment", "gamma2");
        r.fail(line, "gamma2 must be positive");
    }

    let kernel = parse_kernel(&mut r);
    let mu: Option<f64> = r.require("model", "mu");
    if mu.is_some_and(|m| !(m > 0.0 && m.is_finite())) {
        let line = r.line("model", "mu");
        r.fail(line, "mu must be a positive rate");
    }
    let marks = parse_marks(&mut r);

    let n_paths: usize = r.parse("budget", "n_paths").unwrap_or(DEFAULT_N_PATHS);
    if n_paths < 2 {
        let line = r.line("budget", "n_paths");
        r.fail(line, "n_paths must be at least 2");
    }
    let k_grid: usize = r.parse("budget", "k_grid").unwrap_or(DEFAULT_K_GRID);
    if k_grid < 2 {
        let line = r.line("budget", "k_grid");
        r.fail(line, "k_grid must be at least 2");
    }
    let t_grid = if r.raw("budget", "T_grid").is_some() {
        r.list("budget", "T_grid").unwrap_or_default()
    } else {
        DEFAULT_T_GRID.to_vec()
    };
    let grid_line = r.line("budget", "T_grid");
    if t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        r.fail(grid_line, "T_grid entries must be positive");
    } else if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        r.fail(grid_line, "T_grid must be strictly increasing");
    }
    if t_grid.len() > (1 << hawkes_stein::rng::GRID_BITS) {
        r.fail(grid_line, "T_grid is too long");
    }
    if kind.is_some_and(|k| k.includes(ExperimentKind::Rate)) && t_grid.len() < 4 {
        r.fail(grid_line, "a rate fit needs at least 4 horizons");
    }
    let weight = parse_weight(&mut r);

    if !r.issues.is_empty() {
        r.issues.sort_by_key(|i| i.line);
        return Err(ConfigError { issues: r.issues });
    }
    Ok(ExperimentConfig {
        kind: kind.unwrap(),
        seed: seed.unwrap(),
        out_dir: PathBuf::from(out_dir.unwrap()),
        threads,
        statistic,
        gamma2,
        kernel: kernel.unwrap(),
        mu: mu.unwrap(),
        marks: marks.unwrap(),
        n_paths,
        k_grid,
        t_grid,
        weight,
    })
}

/// Reads a kernel table: one `t,value` pair per line, an optional header,
/// `#` comments.
pub fn parse_kernel_table(text: &str) -> Result<(Vec<f64>, Vec<f64>), ConfigError> {
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let pair = (parts.next().map(str::parse::<f64>), parts.next().map(str::parse::<f64>), parts.next());
        match pair {
            (Some(Ok(t)), Some(Ok(v)), None) => {
                grid.push(t);
                values.push(v);
            }
            _ if grid.is_empty() && values.is_empty() && i == 0 => {}
            _ => return Err(ConfigError::single(i + 1, format!("kernel table: expected `t,value`, got {line:?}"))),
        }
    }
    Ok((grid, values))
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("reading kernel table {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl ExperimentConfig {
    /// Builds the model. A relative `table_path` is resolved against `base`.
    pub fn build_model(&self, base: &Path) -> Result<HawkesModel, ModelError> {
        let kernel = match &self.kernel {
            KernelSpec::Exponential { alpha, beta } => Kernel::exponential(*alpha, *beta),
            KernelSpec::Erlang { alpha, beta } => Kernel::erlang(*alpha, *beta),
            KernelSpec::Zero => Ok(Kernel::zero()),
            KernelSpec::Tabulated { table_path } => {
                let path = base.join(table_path);
                let text = std::fs::read_to_string(&path).map_err(|source| ModelError::Io { path: path.clone(), source })?;
                let (grid, values) = parse_kernel_table(&text)?;
                Kernel::tabulated(grid, values)
            }
        }
        .map_err(|e| ConfigError::single(0, e.to_string()))?;
        HawkesModel::new(kernel, self.mu, self.marks.clone()).map_err(|e| ConfigError::single(0, e.to_string()).into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[experiment]\nkind = bound\nseed = 7\nout_dir = out\n\n[model]\nkernel = exponential\nalpha = 1\nbeta = 2\nmu = 1\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.n_paths, 5000);
        assert_eq!(c.k_grid, 64);
        assert_eq!(c.t_grid, DEFAULT_T_GRID.to_vec());
        assert_eq!(c.kernel, KernelSpec::Exponential { alpha: 1.0, beta: 2.0 });
        assert!(c.marks.is_point_mass_one());
        assert_eq!(c.statistic, Statistic::F);
        assert_eq!(c.weight, None);
    }

    #[test]
    fn unstable_exponential_is_rejected() {
        let text = MINIMAL.replace("alpha = 1", "alpha = 3");
        let err = parse_config(&text).unwrap_err();
        assert_eq!(err.issues.len(), 1);
        assert_eq!(err.issues[0].line, 8);
        assert!(err.issues[0].message.contains("stability: requires alpha < beta"), "{err}");
    }

    #[test]
    fn erlang_uses_beta_squared() {
        let text = MINIMAL.replace("exponential", "erlang").replace("alpha = 1", "alpha = 3");
        assert_eq!(parse_config(&text).unwrap().kernel, KernelSpec::Erlang { alpha: 3.0, beta: 2.0 });
    }

    #[test]
    fn every_issue_is_located() {
        let text = format!("{MINIMAL}colour = blue\n[budget]\nT_grid = 50,25,100,200\nk_grid = x\n[nowhere]\n");
        let err = parse_config(&text).unwrap_err();
        let lines: Vec<usize> = err.issues.iter().map(|i| i.line).collect();
        assert_eq!(lines, vec![11, 13, 14, 15], "{err}");
    }

    #[test]
    fn missing_keys() {
        let err = parse_config("[model]\nkernel = zero\n").unwrap_err();
        let text = err.to_string();
        for key in ["kind", "seed", "out_dir", "mu"] {
            assert!(text.contains(&format!("missing required key \"{key}\"")), "{text}");
        }
    }

    #[test]
    fn marks_and_weight() {
        let text = format!(
            "{MINIMAL}[marks]\ndist = two_point\na = -1\nb = 2\np = 0.25\n[weight]\nbreaks = 0, 10\nvalues = 0.1, 0.2\ngamma2 = 1.5\n"
        );
        let c = parse_config(&text).unwrap();
        assert!((c.marks.mean() - 1.25).abs() < 1e-15);
        let w = c.weight.unwrap();
        assert_eq!(w.gamma2, 1.5);
        assert_eq!(w.weight.value(12.0), 0.2);
        let bad = format!("{MINIMAL}[marks]\ndist = gaussian\nmean = 0\nsd = -1\n");
        assert_eq!(parse_config(&bad).unwrap_err().issues[0].line, 12);
    }

    #[test]
    fn rate_needs_four_horizons() {
        let text = MINIMAL.replace("kind = bound", "kind = rate") + "[budget]\nT_grid = 10,20,40\n";
        assert!(parse_config(&text).unwrap_err().to_string().contains("at least 4"));
    }

    #[test]
    fn kernel_tables() {
        let (g, v) = parse_kernel_table("t,value\n0, 0.5\n1, 0.25 # tail\n2,0\n").unwrap();
        assert_eq!(g, vec![0.0, 1.0, 2.0]);
        assert_eq!(v, vec![0.5, 0.25, 0.0]);
        assert_eq!(parse_kernel_table("0,1\n1\n").unwrap_err().issues[0].line, 2);
    }
}
