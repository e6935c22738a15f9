//! Monte-Carlo null distributions of spurious entanglement and the p-value
//! filter built on them.
//!
//! A null sample is one full noiseless pass over a classically correlated
//! state: draw `M` shots, reconstruct by maximum likelihood, evaluate the
//! measure. Sample `i` draws its shots from `derive_seed(seed, "null/<source>", i)`
//! and evaluates bipartition `i mod c` among the `c` bipartitions of the key's
//! shape, so keys sharing a source state can share reconstructions.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::measures::{concurrence, enumerate_bipartitions, negativity, Bipartition, MeasureKind, MeasureValue};
use crate::povm::{joint_effects, marginalize, sample_shots};
use crate::qmath::{classically_correlated_state, CorrelatedState};
use crate::seed::derive_seed;
use crate::tomography::{reconstruct, MleConfig};

pub const DEFAULT_NULL_SAMPLES: usize = 10_000;
pub const MIN_NULL_SAMPLES: usize = 100;
pub const DEFAULT_P_THR: f64 = 0.05;

/// Identifies the population a null distribution describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NullKey {
    pub kind: MeasureKind,
    pub subsystem_size: usize,
    /// Block sizes `(smaller, larger)`.
    pub shape: (usize, usize),
    pub n_shots: u64,
}

impl NullKey {
    pub fn new(kind: MeasureKind, shape: (usize, usize), n_shots: u64) -> Result<Self> {
        let (a, b) = (shape.0.min(shape.1), shape.0.max(shape.1));
        let key = Self {
            kind,
            subsystem_size: a + b,
            shape: (a, b),
            n_shots,
        };
        key.default_source()?;
        if n_shots == 0 {
            return Err(Error::InvalidArgument("null shot count must be positive".into()));
        }
        Ok(key)
    }

    /// The key a measured value is tested against at shot count `n_shots`.
    pub fn for_value(value: &MeasureValue, n_shots: u64) -> Self {
        Self {
            kind: value.kind,
            subsystem_size: value.subsystem.len(),
            shape: value.effective_bipartition().shape(),
            n_shots,
        }
    }

    pub fn concurrence(n_shots: u64) -> Self {
        Self {
            kind: MeasureKind::Concurrence,
            subsystem_size: 2,
            shape: (1, 1),
            n_shots,
        }
    }

    pub fn negativity(shape: (usize, usize), n_shots: u64) -> Self {
        Self {
            kind: MeasureKind::Negativity,
            subsystem_size: shape.0 + shape.1,
            shape,
            n_shots,
        }
    }

    /// The four keys a `K = 4` analysis needs.
    pub fn standard_set(n_shots: u64) -> Vec<Self> {
        vec![
            Self::concurrence(n_shots),
            Self::negativity((1, 2), n_shots),
            Self::negativity((1, 3), n_shots),
            Self::negativity((2, 2), n_shots),
        ]
    }

    /// ρ1 for concurrences, ρ2 for three-qubit and ρ3 for four-qubit negativities.
    pub fn default_source(&self) -> Result<CorrelatedState> {
        match (self.kind, self.subsystem_size) {
            (MeasureKind::Concurrence, 2) => Ok(CorrelatedState::Rho1),
            (MeasureKind::Negativity, 3) => Ok(CorrelatedState::Rho2),
            (MeasureKind::Negativity, 4) => Ok(CorrelatedState::Rho3),
            _ => Err(Error::UnsupportedNullKey(self.to_string())),
        }
    }

    /// Stem used for cache file names.
    pub fn file_stem(&self) -> String {
        format!(
            "{}_k{}_{}x{}_M{}",
            self.kind.name(),
            self.subsystem_size,
            self.shape.0,
            self.shape.1,
            self.n_shots
        )
    }

    fn bipartitions(&self) -> Result<Vec<Bipartition>> {
        let parties: Vec<usize> = (0..self.subsystem_size).collect();
        let all = enumerate_bipartitions(&parties)?;
        let picked: Vec<Bipartition> = all.into_iter().filter(|b| b.shape() == self.shape).collect();
        if picked.is_empty() {
            return Err(Error::UnsupportedNullKey(self.to_string()));
        }
        Ok(picked)
    }
}

impl fmt::Display for NullKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} k={} shape=({},{}) M={}",
            self.kind.name(),
            self.subsystem_size,
            self.shape.0,
            self.shape.1,
            self.n_shots
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullDistribution {
    pub key: NullKey,
    samples: Vec<f64>,
    pub source_state: CorrelatedState,
    pub seed: u64,
    pub config_hash: String,
}

impl NullDistribution {
    /// Sorts `samples`; rejects negative or non-finite entries.
    pub fn new(
        key: NullKey,
        mut samples: Vec<f64>,
        source_state: CorrelatedState,
        seed: u64,
        config_hash: String,
    ) -> Result<Self> {
        if samples.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidArgument("null samples must be finite and non-negative".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self {
            key,
            samples,
            source_state,
            seed,
            config_hash,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len().max(1) as f64
    }

    pub fn std(&self) -> f64 {
        let n = self.samples.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.samples.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }

    pub fn quantile(&self, q: f64) -> f64 {
        if self.samples.is_empty() {
            return f64::NAN;
        }
        let idx = ((self.samples.len() - 1) as f64 * q.clamp(0.0, 1.0)).round() as usize;
        self.samples[idx]
    }
}

/// Hash identifying how a null was generated; cache reuse requires a match.
pub fn null_config_hash(
    key: &NullKey,
    source: CorrelatedState,
    n_samples: usize,
    seed: u64,
    cfg: &MleConfig,
) -> String {
    let text = format!(
        "key={};source={};n_samples={n_samples};seed={seed};{}",
        key.file_stem(),
        source.name(),
        cfg.canonical()
    );
    let digest = Sha256::digest(text.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Null distribution for one key from its default source state.
pub fn build_null(key: &NullKey, n_samples: usize, seed: u64, cfg: &MleConfig) -> Result<NullDistribution> {
    let mut out = build_nulls(std::slice::from_ref(key), n_samples, seed, cfg)?;
    Ok(out.remove(0))
}

/// Builds several nulls, reconstructing once per sample for all keys that
/// share a source state and shot count. Results match [`build_null`] per key.
pub fn build_nulls(keys: &[NullKey], n_samples: usize, seed: u64, cfg: &MleConfig) -> Result<Vec<NullDistribution>> {
    let sources: Vec<CorrelatedState> = keys.iter().map(|k| k.default_source()).collect::<Result<_>>()?;
    build_nulls_from(keys, &sources, n_samples, seed, cfg)
}

/// [`build_nulls`] with an explicit source state per key.
pub fn build_nulls_from(
    keys: &[NullKey],
    sources: &[CorrelatedState],
    n_samples: usize,
    seed: u64,
    cfg: &MleConfig,
) -> Result<Vec<NullDistribution>> {
    if keys.len() != sources.len() {
        return Err(Error::DimensionMismatch {
            expected: keys.len(),
            found: sources.len(),
        });
    }
    if n_samples < MIN_NULL_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "null needs at least {MIN_NULL_SAMPLES} samples, got {n_samples}"
        )));
    }
    cfg.validate()?;
    for (key, &src) in keys.iter().zip(sources) {
        if src.n_qubits() != key.subsystem_size || key.n_shots == 0 {
            return Err(Error::UnsupportedNullKey(key.to_string()));
        }
        key.bipartitions()?;
    }
    let mut groups: BTreeMap<(CorrelatedState, u64), Vec<usize>> = BTreeMap::new();
    for (i, (key, &src)) in keys.iter().zip(sources).enumerate() {
        groups.entry((src, key.n_shots)).or_default().push(i);
    }
    let mut results: Vec<Option<NullDistribution>> = vec![None; keys.len()];
    for ((source, n_shots), members) in groups {
        let group_keys: Vec<NullKey> = members.iter().map(|&i| keys[i]).collect();
        let columns = sample_group(source, n_shots, &group_keys, n_samples, seed, cfg)?;
        for (&i, samples) in members.iter().zip(columns) {
            let hash = null_config_hash(&keys[i], source, n_samples, seed, cfg);
            results[i] = Some(NullDistribution::new(keys[i], samples, source, seed, hash)?);
        }
    }
    Ok(results.into_iter().map(|r| r.expect("every key belongs to a group")).collect())
}

fn sample_group(
    source: CorrelatedState,
    n_shots: u64,
    keys: &[NullKey],
    n_samples: usize,
    seed: u64,
    cfg: &MleConfig,
) -> Result<Vec<Vec<f64>>> {
    let rho = classically_correlated_state::<f64>(source);
    let parties: Vec<usize> = (0..source.n_qubits()).collect();
    let effects = joint_effects::<f64>(&parties)?;
    let bips: Vec<Vec<Bipartition>> = keys.iter().map(|k| k.bipartitions()).collect::<Result<_>>()?;
    let tag = format!("null/{}", source.name());
    let shots = usize::try_from(n_shots).map_err(|_| Error::InvalidArgument("shot count too large".into()))?;
    let rows: Vec<Result<Vec<f64>>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let record = sample_shots(&rho, shots, derive_seed(seed, &tag, i as u64))?;
            let counts = marginalize(&record, &parties)?;
            let est = reconstruct(&counts, &effects, cfg)?.rho_hat;
            keys.iter()
                .zip(&bips)
                .map(|(key, b)| match key.kind {
                    MeasureKind::Concurrence => concurrence(&est),
                    MeasureKind::Negativity => negativity(&est, &b[i % b.len()]),
                })
                .collect()
        })
        .collect();
    let mut columns = vec![Vec::with_capacity(n_samples); keys.len()];
    for row in rows {
        for (col, v) in columns.iter_mut().zip(row?) {
            col.push(v);
        }
    }
    Ok(columns)
}

/// Add-one estimator `(1 + #{s ≥ obs}) / (1 + n)`.
pub fn p_value(obs_value: f64, null: &NullDistribution) -> Result<f64> {
    let n = null.samples.len();
    if n == 0 {
        return Err(Error::EmptyNull);
    }
    let below = null.samples.partition_point(|&s| s < obs_value);
    Ok((1 + n - below) as f64 / (1 + n) as f64)
}

/// In-memory null lookup.
#[derive(Clone, Debug, Default)]
pub struct NullStore {
    nulls: BTreeMap<NullKey, NullDistribution>,
}

impl NullStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, null: NullDistribution) {
        self.nulls.insert(null.key, null);
    }

    pub fn get(&self, key: &NullKey) -> Option<&NullDistribution> {
        self.nulls.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = &NullDistribution> {
        self.nulls.values()
    }

    pub fn len(&self) -> usize {
        self.nulls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nulls.is_empty()
    }
}

impl FromIterator<NullDistribution> for NullStore {
    fn from_iter<I: IntoIterator<Item = NullDistribution>>(iter: I) -> Self {
        let mut store = Self::new();
        for n in iter {
            store.insert(n);
        }
        store
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementObservation {
    pub subsystem: Vec<usize>,
    pub bipartition: Bipartition,
    pub kind: MeasureKind,
    pub value: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Annotates every value with its p-value at shot count `n_shots`, sorted by
/// subsystem size then p-value. Ties keep the input order.
pub fn filter_observations(
    values: &[MeasureValue],
    nulls: &NullStore,
    n_shots: u64,
    p_thr: f64,
) -> Result<Vec<EntanglementObservation>> {
    if !(p_thr > 0.0 && p_thr < 1.0) {
        return Err(Error::Config(format!("p_thr {p_thr} outside (0, 1)")));
    }
    let mut out = Vec::with_capacity(values.len());
    for v in values {
        let key = NullKey::for_value(v, n_shots);
        let null = nulls.get(&key).ok_or_else(|| Error::MissingNull(key.to_string()))?;
        let p = p_value(v.value, null)?;
        out.push(EntanglementObservation {
            subsystem: v.subsystem.clone(),
            bipartition: v.effective_bipartition(),
            kind: v.kind,
            value: v.value,
            p_value: p,
            significant: p < p_thr,
        });
    }
    out.sort_by(|a, b| a.subsystem.len().cmp(&b.subsystem.len()).then(a.p_value.total_cmp(&b.p_value)));
    Ok(out)
}

/// Directory of null files, one per key.
#[derive(Clone, Debug)]
pub struct NullCache {
    dir: PathBuf,
}

impl NullCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &NullKey) -> PathBuf {
        self.dir.join(format!("{}.null", key.file_stem()))
    }

    /// Loads the cached null for `key` if present.
    pub fn load(&self, key: &NullKey) -> Result<Option<NullDistribution>> {
        let path = self.path_for(key);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        let null = parse_null(&text)?;
        if null.key != *key {
            return Err(Error::Config(format!(
                "cache file {} holds {} instead of {key}",
                path.display(),
                null.key
            )));
        }
        Ok(Some(null))
    }

    /// Loads the cached null only if it was generated with the given settings.
    pub fn load_matching(
        &self,
        key: &NullKey,
        n_samples: usize,
        seed: u64,
        cfg: &MleConfig,
    ) -> Result<Option<NullDistribution>> {
        let Some(null) = self.load(key)? else {
            return Ok(None);
        };
        let want = null_config_hash(key, null.source_state, n_samples, seed, cfg);
        Ok((null.config_hash == want && null.n_samples() == n_samples).then_some(null))
    }

    /// Writes through a temporary file and a rename so readers never see a
    /// partial file.
    pub fn store(&self, null: &NullDistribution) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(&null.key);
        let tmp = self.dir.join(format!(".{}.tmp{}", null.key.file_stem(), std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(format_null(null).as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    /// Shot counts for which some null file exists.
    pub fn available_shot_counts(&self) -> Vec<u64> {
        let mut out = Vec::new();
        if let Ok(entries) = fs::read_dir(&self.dir) {
            for e in entries.flatten() {
                let name = e.file_name().to_string_lossy().into_owned();
                if let Some(stem) = name.strip_suffix(".null") {
                    if let Some(m) = stem.rsplit_once("_M").and_then(|(_, m)| m.parse().ok()) {
                        out.push(m);
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Returns cached nulls where the settings match and builds the rest,
    /// storing them. The flag per key reports whether it was built.
    pub fn get_or_build(
        &self,
        keys: &[NullKey],
        n_samples: usize,
        seed: u64,
        cfg: &MleConfig,
    ) -> Result<Vec<(NullDistribution, bool)>> {
        let mut found: Vec<Option<NullDistribution>> = Vec::with_capacity(keys.len());
        for key in keys {
            found.push(self.load_matching(key, n_samples, seed, cfg)?);
        }
        let missing: Vec<NullKey> = keys.iter().zip(&found).filter(|(_, f)| f.is_none()).map(|(k, _)| *k).collect();
        let mut built = build_nulls(&missing, n_samples, seed, cfg)?.into_iter();
        let mut out = Vec::with_capacity(keys.len());
        for f in found {
            match f {
                Some(n) => out.push((n, false)),
                None => {
                    let n = built.next().expect("one build per missing key");
                    self.store(&n)?;
                    out.push((n, true));
                }
            }
        }
        Ok(out)
    }
}

/// Header lines `# key=value`, then one sample per line in ascending order.
pub fn format_null(null: &NullDistribution) -> String {
    let mut s = String::new();
    let k = &null.key;
    s.push_str(&format!("# kind={}\n", k.kind.name()));
    s.push_str(&format!("# subsystem_size={}\n", k.subsystem_size));
    s.push_str(&format!("# shape={},{}\n", k.shape.0, k.shape.1));
    s.push_str(&format!("# n_shots={}\n", k.n_shots));
    s.push_str(&format!("# source={}\n", null.source_state.name()));
    s.push_str(&format!("# seed={}\n", null.seed));
    s.push_str(&format!("# n_samples={}\n", null.n_samples()));
    s.push_str(&format!("# config_hash={}\n", null.config_hash));
    for v in &null.samples {
        s.push_str(&format!("{v:e}\n"));
    }
    s
}

pub fn parse_null(text: &str) -> Result<NullDistribution> {
    let mut header = BTreeMap::new();
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: i + 1, message };
        if let Some(rest) = line.strip_prefix('#') {
            let (k, v) = rest
                .trim()
                .split_once('=')
                .ok_or_else(|| parse_err(format!("malformed header {line:?}")))?;
            header.insert(k.trim().to_string(), v.trim().to_string());
        } else {
            let v: f64 = line.parse().map_err(|_| parse_err(format!("bad sample {line:?}")))?;
            samples.push(v);
        }
    }
    let get = |k: &str| header.get(k).ok_or_else(|| Error::Parse { line: 0, message: format!("missing header {k}") });
    let num = |k: &str| -> Result<u64> {
        get(k)?.parse().map_err(|_| Error::Parse { line: 0, message: format!("bad header {k}") })
    };
    let kind = match get("kind")?.as_str() {
        "concurrence" => MeasureKind::Concurrence,
        "negativity" => MeasureKind::Negativity,
        other => return Err(Error::Parse { line: 0, message: format!("unknown kind {other}") }),
    };
    let shape = get("shape")?
        .split_once(',')
        .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
        .ok_or_else(|| Error::Parse { line: 0, message: "bad shape".into() })?;
    let key = NullKey {
        kind,
        subsystem_size: num("subsystem_size")? as usize,
        shape,
        n_shots: num("n_shots")?,
    };
    let source = CorrelatedState::parse(get("source")?)
        .ok_or_else(|| Error::Parse { line: 0, message: "unknown source".into() })?;
    let declared = num("n_samples")? as usize;
    if declared != samples.len() {
        return Err(Error::Parse {
            line: 0,
            message: format!("header declares {declared} samples, found {}", samples.len()),
        });
    }
    if samples.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Parse { line: 0, message: "samples not sorted".into() });
    }
    NullDistribution::new(key, samples, source, num("seed")?, get("config_hash")?.clone())
}
