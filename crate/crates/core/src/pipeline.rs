//! End-to-end runs: simulate shots, reconstruct reduced states, measure,
//! filter against nulls and search the minimal partitions.
//!
//! Seeds fan out from the master seed as `derive_seed(seed, role, 0)` with
//! roles `"state"` (random state draws) and `"sampling"` (shots). Nulls use
//! their own `null_seed` so one cache serves every master seed.
//!
//! Configuration files are flat `key = value` lines; `#` starts a comment.
//! Keys are the field names of [`PipelineConfig`] plus `shots` for
//! `n_shots` and `mle_max_iters`, `mle_dilution`, `mle_tol`,
//! `mle_prob_floor` for the reconstruction settings.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{
    filter_observations, EntanglementObservation, NullCache, NullDistribution, NullKey, NullStore,
    DEFAULT_NULL_SAMPLES, DEFAULT_P_THR, MIN_NULL_SAMPLES,
};
use crate::measures::measure_all;
use crate::partitions::{allowed_poset, minimal_partitions, prune_redundant, Constraint, MinimalSet, MinimalSetExport, Provenance, MAX_POSET_PARTIES};
use crate::povm::{load_shots, sample_shots, save_shots, ShotMetadata, ShotRecord, MAX_SAMPLING_QUBITS};
use crate::qmath::{
    bell_state, classically_correlated_state, ginibre_random_state, random_product_state, smolin_state, w_state,
    CorrelatedState, DensityMatrix,
};
use crate::seed::{derive_seed, RNG_NAME};
use crate::tomography::{reconstruct_all_rdms, MleConfig, MAX_RECONSTRUCT_QUBITS};

pub const DEFAULT_SHOTS: u64 = 163_840;
pub const DEFAULT_K_MAX: usize = 4;

/// A named state from which shots can be simulated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StateSpec {
    Smolin,
    W(usize),
    Bell(usize),
    Product(usize),
    Correlated(CorrelatedState),
    Ginibre { dim: usize, rank: usize },
}

impl StateSpec {
    pub fn n_qubits(&self) -> usize {
        match self {
            Self::Smolin => 4,
            Self::W(n) | Self::Product(n) => *n,
            Self::Bell(_) => 2,
            Self::Correlated(c) => c.n_qubits(),
            Self::Ginibre { dim, .. } => dim.trailing_zeros() as usize,
        }
    }

    /// The state itself; random families draw from `derive_seed(seed, "state", 0)`.
    pub fn build(&self, seed: u64) -> Result<DensityMatrix<f64>> {
        let state_seed = derive_seed(seed, "state", 0);
        match self {
            Self::Smolin => Ok(smolin_state()),
            Self::W(n) => Ok(w_state(*n)?.density()),
            Self::Bell(i) => Ok(bell_state(*i).density()),
            Self::Product(n) => random_product_state(*n, state_seed),
            Self::Correlated(c) => Ok(classically_correlated_state(*c)),
            Self::Ginibre { dim, rank } => ginibre_random_state(*dim, *rank, state_seed),
        }
    }
}

impl FromStr for StateSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::Config(format!("unknown state {s:?}"));
        let num = |t: &str| t.parse::<usize>().map_err(|_| bad());
        let spec = match parts.as_slice() {
            ["smolin"] => Self::Smolin,
            ["w", n] => Self::W(num(n)?),
            ["bell"] => Self::Bell(0),
            ["bell", i] => Self::Bell(num(i)?),
            ["product", n] => Self::Product(num(n)?),
            ["cc", kind] => Self::Correlated(CorrelatedState::parse(kind).ok_or_else(bad)?),
            ["ginibre", d, r] => Self::Ginibre { dim: num(d)?, rank: num(r)? },
            _ => return Err(bad()),
        };
        match &spec {
            Self::W(n) | Self::Product(n) if *n < 1 => return Err(bad()),
            Self::Bell(i) if *i > 3 => return Err(bad()),
            Self::Ginibre { dim, rank } if !dim.is_power_of_two() || *dim < 2 || *rank < 1 || rank > dim => {
                return Err(Error::Config(format!("ginibre needs a power-of-two dim >= 2 and 1 <= rank <= dim, got {s:?}")))
            }
            _ => {}
        }
        Ok(spec)
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Smolin => write!(f, "smolin"),
            Self::W(n) => write!(f, "w:{n}"),
            Self::Bell(0) => write!(f, "bell"),
            Self::Bell(i) => write!(f, "bell:{i}"),
            Self::Product(n) => write!(f, "product:{n}"),
            Self::Correlated(c) => write!(f, "cc:{}", c.name()),
            Self::Ginibre { dim, rank } => write!(f, "ginibre:{dim}:{rank}"),
        }
    }
}

impl Serialize for StateSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for StateSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Run settings. Fields marked `skip` are execution details and are not
/// echoed into reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub state: Option<StateSpec>,
    pub shot_file: Option<PathBuf>,
    pub n_shots: u64,
    pub k_max: usize,
    pub mle: MleConfig,
    pub p_thr: f64,
    pub null_samples: usize,
    pub null_seed: u64,
    pub seed: u64,
    pub noise_p: f64,
    /// Shots per file when simulating; `None` writes a single file.
    pub chunk: Option<usize>,
    /// Fail with a numerical error when any reconstruction hits `max_iters`.
    pub require_convergence: bool,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub null_cache_dir: Option<PathBuf>,
    #[serde(skip)]
    pub workers: Option<usize>,
    #[serde(skip)]
    pub build_missing_nulls: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            state: None,
            shot_file: None,
            n_shots: DEFAULT_SHOTS,
            k_max: DEFAULT_K_MAX,
            mle: MleConfig::default(),
            p_thr: DEFAULT_P_THR,
            null_samples: DEFAULT_NULL_SAMPLES,
            null_seed: 0,
            seed: 0,
            noise_p: 0.0,
            chunk: None,
            require_convergence: false,
            out: PathBuf::from("sepstruct-out"),
            null_cache_dir: None,
            workers: None,
            build_missing_nulls: true,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid value {value:?} for {key}"))),
    }
}

impl PipelineConfig {
    /// Reads the flat `key = value` format on top of the defaults.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key = value, found {line:?}"),
            })?;
            cfg.set(k.trim(), v.trim()).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn from_kv_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::MissingInput(format!("config file {}: {e}", path.display())))?;
        Self::from_kv_text(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Sets one key; used by the file reader and for command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "state" => self.state = Some(value.parse()?),
            "shot_file" => self.shot_file = Some(PathBuf::from(value)),
            "shots" | "n_shots" => self.n_shots = parse_value(key, value)?,
            "k_max" => self.k_max = parse_value(key, value)?,
            "p_thr" => self.p_thr = parse_value(key, value)?,
            "null_samples" => self.null_samples = parse_value(key, value)?,
            "null_seed" => self.null_seed = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "noise_p" => self.noise_p = parse_value(key, value)?,
            "chunk" => self.chunk = Some(parse_value(key, value)?),
            "require_convergence" => self.require_convergence = parse_bool(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "null_cache_dir" => self.null_cache_dir = Some(PathBuf::from(value)),
            "workers" => self.workers = Some(parse_value(key, value)?),
            "build_missing_nulls" => self.build_missing_nulls = parse_bool(key, value)?,
            "mle_max_iters" => self.mle.max_iters = parse_value(key, value)?,
            "mle_dilution" => self.mle.dilution = parse_value(key, value)?,
            "mle_tol" => self.mle.convergence_tol = parse_value(key, value)?,
            "mle_prob_floor" => self.mle.prob_floor = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_RECONSTRUCT_QUBITS).contains(&self.k_max) {
            return Err(Error::Config(format!("k_max must lie in 2..={MAX_RECONSTRUCT_QUBITS}, got {}", self.k_max)));
        }
        if self.n_shots < 1 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        if !(self.p_thr > 0.0 && self.p_thr < 1.0) {
            return Err(Error::Config(format!("p_thr {} outside (0, 1)", self.p_thr)));
        }
        if !(0.0..=1.0).contains(&self.noise_p) {
            return Err(Error::Config(format!("noise_p {} outside [0, 1]", self.noise_p)));
        }
        if self.null_samples < MIN_NULL_SAMPLES {
            return Err(Error::Config(format!("null_samples must be at least {MIN_NULL_SAMPLES}")));
        }
        if self.chunk == Some(0) {
            return Err(Error::Config("chunk must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        self.mle.validate()
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.null_cache_dir.clone().unwrap_or_else(|| self.out.join("nulls"))
    }

    /// Null keys an analysis with this `k_max` consults at shot count `n_shots`.
    pub fn null_keys(&self, n_shots: u64) -> Vec<NullKey> {
        NullKey::standard_set(n_shots)
            .into_iter()
            .filter(|k| k.subsystem_size <= self.k_max)
            .collect()
    }
}

/// The named state with the configured depolarizing noise applied.
pub fn true_state(spec: &StateSpec, seed: u64, noise_p: f64) -> Result<DensityMatrix<f64>> {
    let rho = spec.build(seed)?;
    if noise_p > 0.0 {
        rho.depolarize(noise_p)
    } else {
        Ok(rho)
    }
}

/// Draws `n_shots` from the configured state.
pub fn simulate_shots(cfg: &PipelineConfig) -> Result<ShotRecord> {
    let spec = cfg.state.as_ref().ok_or_else(|| Error::Config("no state given".into()))?;
    let n = spec.n_qubits();
    if n > MAX_SAMPLING_QUBITS {
        return Err(Error::RegisterTooLarge {
            qubits: n,
            max: MAX_SAMPLING_QUBITS,
        });
    }
    let rho = true_state(spec, cfg.seed, cfg.noise_p)?;
    let n_shots = usize::try_from(cfg.n_shots).map_err(|_| Error::Config("shot count too large".into()))?;
    let mut record = sample_shots(&rho, n_shots, derive_seed(cfg.seed, "sampling", 0))?;
    let mut extra = std::collections::BTreeMap::new();
    extra.insert("noise_p".to_string(), cfg.noise_p.to_string());
    record.metadata = ShotMetadata {
        source: Some(spec.to_string()),
        seed: Some(cfg.seed),
        rng: Some(RNG_NAME.to_string()),
        extra,
    };
    Ok(record)
}

/// Simulates and writes `shots.txt`, or `shots/job_NNN.txt` when chunked.
pub fn run_simulate(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let record = simulate_shots(cfg)?;
    fs::create_dir_all(&cfg.out)?;
    match cfg.chunk {
        None => {
            let path = cfg.out.join("shots.txt");
            save_shots(&record, &path)?;
            Ok(vec![path])
        }
        Some(chunk) => {
            let dir = cfg.out.join("shots");
            fs::create_dir_all(&dir)?;
            let mut paths = Vec::new();
            for (i, part) in record.split(chunk).iter().enumerate() {
                let path = dir.join(format!("job_{i:03}.txt"));
                save_shots(part, &path)?;
                paths.push(path);
            }
            Ok(paths)
        }
    }
}

/// Loads one shot file, or concatenates every `.txt` file of a directory in
/// name order.
pub fn load_shot_input(path: &Path) -> Result<ShotRecord> {
    if !path.exists() {
        return Err(Error::MissingInput(format!("shot file {} does not exist", path.display())));
    }
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::MissingInput(format!("no shot files in {}", path.display())));
        }
        let parts: Vec<ShotRecord> = files.iter().map(load_shots).collect::<Result<_>>()?;
        ShotRecord::concat(&parts)
    } else {
        load_shots(path)
    }
}

/// Recovers the generating state from a shot header, when it names one.
fn truth_from_metadata(meta: &ShotMetadata) -> Option<DensityMatrix<f64>> {
    let spec: StateSpec = meta.source.as_deref()?.parse().ok()?;
    let noise: f64 = meta.extra.get("noise_p").map_or(Some(0.0), |v| v.parse().ok())?;
    true_state(&spec, meta.seed?, noise).ok()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdmDiagnostic {
    pub subsystem: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub log_likelihood: f64,
    /// Fidelity to the true reduced state, when the generating state is known.
    pub fidelity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullSummary {
    pub key: NullKey,
    pub source: CorrelatedState,
    pub seed: u64,
    pub n_samples: usize,
    pub mean: f64,
    pub std: f64,
    pub config_hash: String,
}

impl From<&NullDistribution> for NullSummary {
    fn from(n: &NullDistribution) -> Self {
        Self {
            key: n.key,
            source: n.source_state,
            seed: n.seed,
            n_samples: n.n_samples(),
            mean: n.mean(),
            std: n.std(),
            config_hash: n.config_hash.clone(),
        }
    }
}

/// Everything an analysis produced. Contains no timing, so identical inputs
/// give byte-identical JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub n_parties: usize,
    pub n_shots: u64,
    pub source: Option<String>,
    pub rdms: Vec<RdmDiagnostic>,
    pub nulls: Vec<NullSummary>,
    pub observations: Vec<EntanglementObservation>,
    /// Significant observations that survive redundancy pruning.
    pub constraints: Vec<Constraint>,
    /// Significant observations implied by a kept one.
    pub redundant: Vec<Constraint>,
    pub minimal: MinimalSetExport,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn significant(&self) -> impl Iterator<Item = &EntanglementObservation> {
        self.observations.iter().filter(|o| o.significant)
    }
}

/// Full analysis with the result of the minimal-partition search attached.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub report: RunReport,
    pub minimal: MinimalSet,
}

/// Steps from reconstruction to the minimal partitions, with nulls supplied.
pub fn analyze_shots(
    shots: &ShotRecord,
    truth: Option<&DensityMatrix<f64>>,
    cfg: &PipelineConfig,
    nulls: &NullStore,
) -> Result<Analysis> {
    cfg.validate()?;
    let n = shots.n_parties();
    if n < 2 {
        return Err(Error::Config("need at least two parties".into()));
    }
    if shots.is_empty() {
        return Err(Error::EmptyCounts);
    }
    if let Some(t) = truth {
        if t.n_qubits() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: t.n_qubits(),
            });
        }
    }
    let n_shots = shots.len() as u64;
    let k_max = cfg.k_max.min(n);
    let results = reconstruct_all_rdms::<f64>(shots, k_max, &cfg.mle)?;
    if cfg.require_convergence {
        let failed: Vec<String> = results
            .iter()
            .filter(|(_, r)| !r.converged)
            .map(|(s, _)| format!("{s:?}"))
            .collect();
        if !failed.is_empty() {
            return Err(Error::Numerical(format!(
                "reconstruction did not converge within {} iterations for {}",
                cfg.mle.max_iters,
                failed.join(", ")
            )));
        }
    }
    let mut rdms = Vec::with_capacity(results.len());
    for (subset, res) in &results {
        let fidelity = match truth {
            Some(t) => Some(res.rho_hat.fidelity(&t.partial_trace(subset)?)?),
            None => None,
        };
        rdms.push(RdmDiagnostic {
            subsystem: subset.clone(),
            iterations: res.iterations_used,
            converged: res.converged,
            log_likelihood: res.final_log_likelihood(),
            fidelity,
        });
    }
    rdms.sort_by(|a, b| (a.subsystem.len(), &a.subsystem).cmp(&(b.subsystem.len(), &b.subsystem)));
    let states = results.into_iter().map(|(s, r)| (s, r.rho_hat)).collect();
    let values = measure_all(&states)?;
    let observations = filter_observations(&values, nulls, n_shots, cfg.p_thr)?;
    let significant: Vec<Constraint> = observations
        .iter()
        .filter(|o| o.significant)
        .map(|o| {
            Constraint::from_bipartition(&o.bipartition).with_provenance(Provenance {
                kind: o.kind,
                subsystem: o.subsystem.clone(),
                value: o.value,
                p_value: o.p_value,
            })
        })
        .collect();
    let constraints = prune_redundant(&significant);
    let redundant = significant
        .iter()
        .filter(|c| !constraints.iter().any(|k| k.z1 == c.z1 && k.z2 == c.z2))
        .cloned()
        .collect();
    let minimal = minimal_partitions(n, &constraints)?;
    let mut used: Vec<NullKey> = values.iter().map(|v| NullKey::for_value(v, n_shots)).collect();
    used.sort();
    used.dedup();
    let null_summaries = used.iter().filter_map(|k| nulls.get(k)).map(NullSummary::from).collect();
    let mut config = cfg.clone();
    config.n_shots = n_shots;
    let report = RunReport {
        config,
        n_parties: n,
        n_shots,
        source: shots.metadata.source.clone(),
        rdms,
        nulls: null_summaries,
        observations,
        constraints,
        redundant,
        minimal: MinimalSetExport::from(&minimal),
    };
    Ok(Analysis { report, minimal })
}

/// Loads cached nulls for `keys`, building and caching missing ones when the
/// config allows it. Also returns which keys were freshly built.
pub fn obtain_nulls(cfg: &PipelineConfig, keys: &[NullKey]) -> Result<(NullStore, Vec<bool>)> {
    let cache = NullCache::new(cfg.cache_dir());
    if cfg.build_missing_nulls {
        let got = cache.get_or_build(keys, cfg.null_samples, cfg.null_seed, &cfg.mle)?;
        let built = got.iter().map(|(_, b)| *b).collect();
        return Ok((got.into_iter().map(|(n, _)| n).collect(), built));
    }
    let mut store = NullStore::new();
    for key in keys {
        match cache.load_matching(key, cfg.null_samples, cfg.null_seed, &cfg.mle)? {
            Some(n) => store.insert(n),
            None => {
                let available = cache.available_shot_counts();
                return Err(Error::MissingNull(format!(
                    "{key} (null_samples={}, null_seed={}) in {}; cached shot counts: {available:?}; \
                     run `sepstruct build-nulls --shots {} --null-samples {} --null-cache-dir {}` first",
                    cfg.null_samples,
                    cfg.null_seed,
                    cache.dir().display(),
                    key.n_shots,
                    cfg.null_samples,
                    cache.dir().display()
                )));
            }
        }
    }
    Ok((store, vec![false; keys.len()]))
}

/// Builds or reuses the null files for the configured shot count.
pub fn run_build_nulls(cfg: &PipelineConfig) -> Result<Vec<(NullSummary, bool)>> {
    cfg.validate()?;
    let keys = cfg.null_keys(cfg.n_shots);
    let (store, built) = obtain_nulls(&PipelineConfig { build_missing_nulls: true, ..cfg.clone() }, &keys)?;
    Ok(keys
        .iter()
        .zip(built)
        .map(|(k, b)| (NullSummary::from(store.get(k).expect("requested key present")), b))
        .collect())
}

/// Paths written by [`run_analyze`].
#[derive(Clone, Debug)]
pub struct AnalyzeOutputs {
    pub report: PathBuf,
    pub minimal: PathBuf,
    pub poset: Option<PathBuf>,
    pub timing: PathBuf,
}

/// Analyzes the configured shot file, or freshly simulated shots when only a
/// state is given, and writes the outputs.
pub fn run_analyze(cfg: &PipelineConfig) -> Result<(Analysis, AnalyzeOutputs)> {
    cfg.validate()?;
    let start = Instant::now();
    let (shots, truth) = match (&cfg.shot_file, &cfg.state) {
        (Some(path), _) => {
            let shots = load_shot_input(path)?;
            let truth = truth_from_metadata(&shots.metadata);
            (shots, truth)
        }
        (None, Some(spec)) => (simulate_shots(cfg)?, Some(true_state(spec, cfg.seed, cfg.noise_p)?)),
        (None, None) => return Err(Error::Config("give either a shot file or a state".into())),
    };
    let t_input = start.elapsed();
    let keys = cfg.null_keys(shots.len() as u64);
    let keys: Vec<NullKey> = keys.into_iter().filter(|k| k.subsystem_size <= shots.n_parties()).collect();
    let (nulls, _) = obtain_nulls(cfg, &keys)?;
    let t_nulls = start.elapsed();
    let analysis = analyze_shots(&shots, truth.as_ref(), cfg, &nulls)?;
    let t_total = start.elapsed();

    fs::create_dir_all(&cfg.out)?;
    let report = cfg.out.join("report.json");
    fs::write(&report, analysis.report.to_json()?)?;
    let minimal = cfg.out.join("minimal.json");
    fs::write(&minimal, analysis.minimal.to_json()? + "\n")?;
    let poset = if shots.n_parties() <= MAX_POSET_PARTIES {
        let path = cfg.out.join("poset.dot");
        fs::write(&path, allowed_poset(shots.n_parties(), &analysis.report.constraints)?.to_dot())?;
        Some(path)
    } else {
        None
    };
    let timing = cfg.out.join("timing.json");
    let timing_json = serde_json::json!({
        "input_seconds": t_input.as_secs_f64(),
        "nulls_seconds": (t_nulls - t_input).as_secs_f64(),
        "analysis_seconds": (t_total - t_nulls).as_secs_f64(),
        "total_seconds": t_total.as_secs_f64(),
    });
    fs::write(&timing, serde_json::to_string_pretty(&timing_json)? + "\n")?;
    Ok((
        analysis,
        AnalyzeOutputs {
            report,
            minimal,
            poset,
            timing,
        },
    ))
}

/// Human-readable summary of a report.
pub fn render_report(report: &RunReport) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "parties: {}  shots: {}  source: {}\n",
        report.n_parties,
        report.n_shots,
        report.source.as_deref().unwrap_or("unknown")
    ));
    let sig: Vec<&EntanglementObservation> = report.significant().collect();
    s.push_str(&format!("significant observations (p < {}): {}\n", report.config.p_thr, sig.len()));
    for o in sig {
        s.push_str(&format!(
            "  {:<11} {:<12} value {:.4}  p {:.2e}\n",
            o.kind.name(),
            o.bipartition.to_string(),
            o.value,
            o.p_value
        ));
    }
    s.push_str(&format!("constraints kept: {}\n", report.constraints.len()));
    for c in &report.constraints {
        s.push_str(&format!("  {c}\n"));
    }
    s.push_str(&format!("constraints redundant: {}\n", report.redundant.len()));
    for c in &report.redundant {
        s.push_str(&format!("  {c}\n"));
    }
    s.push_str(&format!("minimal: {}\n", report.minimal.rendered.join(", ")));
    s
}
