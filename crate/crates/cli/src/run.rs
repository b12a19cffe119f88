//! Runs a parsed experiment and writes its CSV artifacts.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use hawkes_stein::distance::{distance_curve, fit_rate, write_distance_csv, write_ratefit_csv, DistanceSeries};
use hawkes_stein::moments::{moment_series, write_moments_csv};
use hawkes_stein::rng::mix_seed;
use hawkes_stein::simulate::write_path_csv;
use hawkes_stein::stein::{ibp_check, total_bound, weighted_bound, write_bound_csv, write_ibp_csv, BoundReport, Budget};
use hawkes_stein::{HawkesModel, RandomState};
use sha2::{Digest, Sha256};

use crate::config::{parse_config, ConfigError, ExperimentConfig, ExperimentKind, ModelError};

// Each sub-experiment draws from its own derived seed.
const BOUND_TAG: u64 = 1;
const DISTANCE_TAG: u64 = 2;
const IBP_TAG: u64 = 3;
const WEIGHTED_TAG: u64 = 4;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error:\n{0}")]
    Config(#[from] ConfigError),
    #[error("runtime error: {0}")]
    Runtime(#[from] hawkes_stein::Error),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 1,
            RunError::Runtime(_) => 2,
            RunError::Io { .. } => 3,
        }
    }

    fn io(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
        move |source| RunError::Io { path: path.to_path_buf(), source }
    }
}

impl From<ModelError> for RunError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(c) => RunError::Config(c),
            ModelError::Io { path, source } => RunError::Io { path, source },
        }
    }
}

/// Settings that do not change results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `threads` from the config.
    pub threads: Option<usize>,
    /// Overrides `out_dir` from the config.
    pub out_dir: Option<PathBuf>,
    /// Writes the first `n` simulated paths of each horizon of the distance
    /// experiment to `paths/`.
    pub dump_paths: Option<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    /// Written files, relative to `out_dir`, in write order.
    pub files: Vec<String>,
    pub warnings: Vec<String>,
}

/// Reads the config at `path`, runs it, and writes its outputs.
pub fn run_config_file(path: &Path, options: &RunOptions) -> Result<RunSummary, RunError> {
    let text = fs::read_to_string(path).map_err(RunError::io(path))?;
    let config = parse_config(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    run_experiment(&config, &text, base, options)
}

/// Runs `config`. `source` is the config text, hashed into the manifest;
/// relative paths are resolved against `base`.
pub fn run_experiment(
    config: &ExperimentConfig,
    source: &str,
    base: &Path,
    options: &RunOptions,
) -> Result<RunSummary, RunError> {
    let model = config.build_model(base)?;
    let out_dir = options.out_dir.clone().unwrap_or_else(|| base.join(&config.out_dir));
    let threads = options.threads.or(config.threads).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Io { path: out_dir.clone(), source: io::Error::other(e) })?;
    fs::create_dir_all(&out_dir).map_err(RunError::io(&out_dir))?;
    let mut run = Run { config, model: &model, out_dir, summary: RunSummary::default() };
    pool.install(|| run.execute(options))?;
    run.write_manifest(source)?;
    run.summary.out_dir = run.out_dir;
    Ok(run.summary)
}

struct Run<'a> {
    config: &'a ExperimentConfig,
    model: &'a HawkesModel,
    out_dir: PathBuf,
    summary: RunSummary,
}

impl Run<'_> {
    fn write_file(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), RunError> {
        let path = self.out_dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(RunError::io(parent))?;
        }
        let file = File::create(&path).map_err(RunError::io(&path))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(RunError::io(&path))?;
        self.summary.files.push(name.to_string());
        Ok(())
    }

    fn budget(&self) -> Budget {
        Budget { n_outer: self.config.n_paths, k_grid: self.config.k_grid }
    }

    fn execute(&mut self, options: &RunOptions) -> Result<(), RunError> {
        let kind = self.config.kind;
        if kind.includes(ExperimentKind::Moments) {
            self.moments()?;
        }
        if kind.includes(ExperimentKind::Bound) {
            self.bound()?;
        }
        if kind.includes(ExperimentKind::Distance) || kind.includes(ExperimentKind::Rate) {
            let series = self.distance()?;
            if kind.includes(ExperimentKind::Rate) {
                let fit = fit_rate(&series)?;
                self.write_file("ratefit.csv", |w| write_ratefit_csv(w, &fit))?;
            }
            if let Some(n) = options.dump_paths {
                self.dump_paths(n)?;
            }
        }
        if kind.includes(ExperimentKind::IbpCheck) {
            self.ibp()?;
        }
        Ok(())
    }

    fn moments(&mut self) -> Result<(), RunError> {
        let reports = moment_series(&self.model.kernel, self.model.mu, &self.config.t_grid)?;
        self.write_file("moments.csv", |w| write_moments_csv(w, &reports))
    }

    fn bound(&mut self) -> Result<(), RunError> {
        let seed = mix_seed(self.config.seed, BOUND_TAG);
        let mut reports: Vec<BoundReport> = Vec::new();
        for (j, &t) in self.config.t_grid.iter().enumerate() {
            let mut r = total_bound(self.model, t, self.budget(), seed, j as u64)?;
            r.seed = self.config.seed;
            reports.push(r);
        }
        self.write_file("bound.csv", |w| write_bound_csv(w, &reports))?;
        self.write_file("bound_diagnostics.csv", |w| {
            writeln!(w, "T,total_se,total_doubled,a22_exact,a12_proof_bound")?;
            for r in &reports {
                writeln!(w, "{},{},{},{},{}", r.horizon, r.total_se, r.total_doubled, r.a22_exact, r.a12_proof_bound)?;
            }
            Ok(())
        })?;
        if let Some(spec) = &self.config.weight {
            let seed = mix_seed(self.config.seed, WEIGHTED_TAG);
            let mut rows = Vec::new();
            for (j, &t) in self.config.t_grid.iter().enumerate() {
                rows.push(weighted_bound(self.model, &spec.weight, spec.gamma2, t, self.budget(), seed, j as u64)?);
            }
            self.write_file("weighted_bound.csv", |w| {
                writeln!(w, "T,gamma2,first,first_se,second,second_se,total,total_se")?;
                for b in &rows {
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{},{}",
                        b.horizon, b.gamma2, b.first.value, b.first.std_err, b.second.value, b.second.std_err, b.total, b.total_se
                    )?;
                }
                Ok(())
            })?;
        }
        Ok(())
    }

    fn distance(&mut self) -> Result<DistanceSeries, RunError> {
        let c = self.config;
        let series = distance_curve(
            self.model,
            &c.t_grid,
            c.n_paths,
            c.statistic,
            c.gamma2,
            mix_seed(c.seed, DISTANCE_TAG),
        )?;
        for e in series.entries.iter().filter(|e| e.floor_dominated()) {
            self.summary.warnings.push(format!(
                "T={}: estimator floor {:.4} exceeds 25% of d_hat {:.4}",
                e.horizon, e.floor, e.d_hat
            ));
        }
        self.write_file("distance.csv", |w| write_distance_csv(w, &series))?;
        Ok(series)
    }

    fn dump_paths(&mut self, n: usize) -> Result<(), RunError> {
        let seed = mix_seed(self.config.seed, DISTANCE_TAG);
        let t_grid = self.config.t_grid.clone();
        for (j, &t) in t_grid.iter().enumerate() {
            for r in 0..n.min(self.config.n_paths) {
                let path = self.model.simulate(t, &RandomState::for_replication(seed, r as u64, j as u64))?;
                self.write_file(&format!("paths/T{j}_r{r}.csv"), |w| write_path_csv(w, &path))?;
            }
        }
        Ok(())
    }

    fn ibp(&mut self) -> Result<(), RunError> {
        let t = *self.config.t_grid.last().expect("T_grid is nonempty");
        let check = ibp_check(self.model, t, self.budget(), mix_seed(self.config.seed, IBP_TAG), 0)?;
        self.write_file("ibp.csv", |w| write_ibp_csv(w, &check))
    }

    fn write_manifest(&mut self, source: &str) -> Result<(), RunError> {
        let digest = Sha256::digest(source.as_bytes());
        let hash: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        let files = self.summary.files.join(",");
        let warnings = self.summary.warnings.clone();
        let c = self.config;
        self.write_file("manifest", |w| {
            writeln!(w, "version = {}", env!("CARGO_PKG_VERSION"))?;
            writeln!(w, "config_sha256 = {hash}")?;
            writeln!(w, "seed = {}", c.seed)?;
            writeln!(w, "kind = {}", c.kind)?;
            writeln!(w, "files = {files}")?;
            for warning in &warnings {
                writeln!(w, "warning = {warning}")?;
            }
            Ok(())
        })
    }
}
