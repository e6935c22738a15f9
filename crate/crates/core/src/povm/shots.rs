//! Shot records: sampling, marginalization and the text file format.
//!
//! File format (UTF-8): optional header lines `# key=value`, then one shot
//! per line as comma-separated outcome digits in `0..=3`, one per party.
//! Recognized header keys are `n_parties`, `source`, `seed` and `rng`; any
//! other key is kept verbatim in [`ShotMetadata::extra`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use super::{joint_effects, outcome_tuple, BornMap, OUTCOMES};
use crate::error::{Error, Result};
use crate::qmath::DensityMatrix;
use crate::scalar::Scalar;
use crate::seed;

/// Largest register sampled from a dense joint distribution (`4^8` outcomes).
pub const MAX_SAMPLING_QUBITS: usize = 8;

/// Shots drawn per derived-seed chunk.
pub const SHOT_CHUNK: usize = 8192;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ShotMetadata {
    pub source: Option<String>,
    pub seed: Option<u64>,
    pub rng: Option<String>,
    pub extra: BTreeMap<String, String>,
}

/// Outcome tuples of repeated joint SIC measurements on `n_parties` qubits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotRecord {
    n_parties: usize,
    data: Vec<u8>,
    pub metadata: ShotMetadata,
}

impl ShotRecord {
    pub fn new(n_parties: usize, shots: Vec<Vec<u8>>, metadata: ShotMetadata) -> Result<Self> {
        if n_parties == 0 {
            return Err(Error::EmptySubsystem);
        }
        let mut data = Vec::with_capacity(shots.len() * n_parties);
        for (i, s) in shots.iter().enumerate() {
            if s.len() != n_parties {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {n_parties} outcomes, found {}", s.len()),
                });
            }
            if let Some(&bad) = s.iter().find(|&&m| m as usize >= OUTCOMES) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("outcome symbol {bad} out of range 0..=3"),
                });
            }
            data.extend_from_slice(s);
        }
        Ok(Self {
            n_parties,
            data,
            metadata,
        })
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    /// Shot count `M`.
    pub fn len(&self) -> usize {
        self.data.len() / self.n_parties
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shot(&self, i: usize) -> &[u8] {
        &self.data[i * self.n_parties..(i + 1) * self.n_parties]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> + '_ {
        self.data.chunks_exact(self.n_parties)
    }

    /// Concatenates records over the same register (e.g. per-job shot files).
    pub fn concat(parts: &[ShotRecord]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptyCounts)?;
        let mut data = Vec::new();
        for p in parts {
            if p.n_parties != first.n_parties {
                return Err(Error::DimensionMismatch {
                    expected: first.n_parties,
                    found: p.n_parties,
                });
            }
            data.extend_from_slice(&p.data);
        }
        Ok(Self {
            n_parties: first.n_parties,
            data,
            metadata: first.metadata.clone(),
        })
    }

    /// Splits into consecutive records of at most `chunk` shots.
    pub fn split(&self, chunk: usize) -> Vec<ShotRecord> {
        self.data
            .chunks(chunk.max(1) * self.n_parties)
            .map(|d| ShotRecord {
                n_parties: self.n_parties,
                data: d.to_vec(),
                metadata: self.metadata.clone(),
            })
            .collect()
    }
}

/// Frequencies `f_m` of joint outcomes on an ordered party subset, stored
/// densely in lexicographic outcome order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeCounts {
    parties: Vec<usize>,
    counts: Vec<u64>,
    total: u64,
}

impl OutcomeCounts {
    pub fn new(parties: Vec<usize>, counts: Vec<u64>) -> Result<Self> {
        if parties.is_empty() {
            return Err(Error::EmptySubsystem);
        }
        let expected = 1usize << (2 * parties.len());
        if counts.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: counts.len(),
            });
        }
        let total = counts.iter().sum();
        Ok(Self {
            parties,
            counts,
            total,
        })
    }

    pub fn parties(&self) -> &[usize] {
        &self.parties
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, outcome: &[u8]) -> u64 {
        self.counts[super::outcome_index(outcome)]
    }

    /// Non-zero entries as `(outcome tuple, count)`.
    pub fn iter_nonzero(&self) -> impl Iterator<Item = (Vec<u8>, u64)> + '_ {
        let k = self.parties.len();
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(move |(i, &c)| (outcome_tuple(i, k), c))
    }

    /// Sums out every party not in `subset`; `subset` order sets the new coordinate order.
    pub fn marginalize(&self, subset: &[usize]) -> Result<Self> {
        let positions = subset_positions(&self.parties, subset)?;
        let k = self.parties.len();
        let mut counts = vec![0u64; 1 << (2 * subset.len())];
        for (i, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let idx = positions
                .iter()
                .fold(0usize, |acc, &p| (acc << 2) | ((i >> (2 * (k - 1 - p))) & 3));
            counts[idx] += c;
        }
        Ok(Self {
            parties: subset.to_vec(),
            counts,
            total: self.total,
        })
    }
}

fn subset_positions(parties: &[usize], subset: &[usize]) -> Result<Vec<usize>> {
    if subset.is_empty() {
        return Err(Error::EmptySubsystem);
    }
    crate::qmath::check_labels(subset)?;
    subset
        .iter()
        .map(|s| parties.iter().position(|p| p == s).ok_or(Error::UnknownParty(*s)))
        .collect()
}

/// Projects every shot onto the coordinates in `subset` (party indices
/// `0..n_parties`, in the requested order) and counts outcomes.
pub fn marginalize(shots: &ShotRecord, subset: &[usize]) -> Result<OutcomeCounts> {
    let all: Vec<usize> = (0..shots.n_parties).collect();
    let positions = subset_positions(&all, subset)?;
    let mut counts = vec![0u64; 1 << (2 * subset.len())];
    for s in shots.iter() {
        let idx = positions.iter().fold(0usize, |acc, &p| (acc << 2) | s[p] as usize);
        counts[idx] += 1;
    }
    Ok(OutcomeCounts {
        parties: subset.to_vec(),
        counts,
        total: shots.len() as u64,
    })
}

/// Draws `n_shots` joint SIC outcomes for the full register of `rho`.
///
/// The joint distribution is computed once and sampled by inverse CDF. Shots
/// are produced in chunks of [`SHOT_CHUNK`], chunk `c` using the generator
/// derived from `(seed, "shots", c)`, so the record is identical regardless of
/// how chunks are scheduled.
pub fn sample_shots<T: Scalar>(rho: &DensityMatrix<T>, n_shots: usize, seed: u64) -> Result<ShotRecord> {
    if n_shots < 1 {
        return Err(Error::InvalidArgument("n_shots must be at least 1".into()));
    }
    let n = rho.n_qubits();
    if n > MAX_SAMPLING_QUBITS {
        return Err(Error::RegisterTooLarge {
            qubits: n,
            max: MAX_SAMPLING_QUBITS,
        });
    }
    let parties: Vec<usize> = (0..n).collect();
    let effects = joint_effects::<T>(&parties)?;
    let probs = BornMap::new(&effects).probabilities(rho.matrix());
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0f64;
    for p in probs {
        acc += p.as_f64().max(0.0);
        cdf.push(acc);
    }
    let total = acc;
    let n_chunks = n_shots.div_ceil(SHOT_CHUNK);
    let chunks: Vec<Vec<u8>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let len = SHOT_CHUNK.min(n_shots - c * SHOT_CHUNK);
            let mut rng = seed::derived_rng(seed, "shots", c as u64);
            let mut out = Vec::with_capacity(len * n);
            for _ in 0..len {
                let u: f64 = rng.gen::<f64>() * total;
                let idx = cdf.partition_point(|&x| x <= u).min(cdf.len() - 1);
                for q in (0..n).rev() {
                    out.push(((idx >> (2 * q)) & 3) as u8);
                }
            }
            out
        })
        .collect();
    Ok(ShotRecord {
        n_parties: n,
        data: chunks.concat(),
        metadata: ShotMetadata {
            source: None,
            seed: Some(seed),
            rng: Some(seed::RNG_NAME.to_string()),
            extra: BTreeMap::new(),
        },
    })
}

/// Serializes a record in the shot file format.
pub fn format_shots(record: &ShotRecord) -> String {
    let mut out = String::with_capacity(record.data.len() * 2 + 128);
    let _ = writeln!(out, "# n_parties={}", record.n_parties);
    if let Some(s) = &record.metadata.source {
        let _ = writeln!(out, "# source={s}");
    }
    if let Some(s) = record.metadata.seed {
        let _ = writeln!(out, "# seed={s}");
    }
    if let Some(s) = &record.metadata.rng {
        let _ = writeln!(out, "# rng={s}");
    }
    for (k, v) in &record.metadata.extra {
        let _ = writeln!(out, "# {k}={v}");
    }
    for shot in record.iter() {
        for (i, m) in shot.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push((b'0' + m) as char);
        }
        out.push('\n');
    }
    out
}

/// Parses the shot file format; errors carry 1-based line numbers.
pub fn parse_shots(text: &str) -> Result<ShotRecord> {
    let mut metadata = ShotMetadata::default();
    let mut n_parties: Option<usize> = None;
    let mut data = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if let Some(header) = line.strip_prefix('#') {
            let header = header.trim();
            let Some((key, value)) = header.split_once('=') else {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("header '{header}' is not key=value"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::Parse {
                line: line_no,
                message: format!("invalid {what} '{value}'"),
            };
            match key {
                "n_parties" => {
                    let v: usize = value.parse().map_err(|_| bad("n_parties"))?;
                    if v == 0 {
                        return Err(bad("n_parties"));
                    }
                    n_parties = Some(v);
                }
                "source" => metadata.source = Some(value.to_string()),
                "seed" => metadata.seed = Some(value.parse().map_err(|_| bad("seed"))?),
                "rng" => metadata.rng = Some(value.to_string()),
                _ => {
                    metadata.extra.insert(key.to_string(), value.to_string());
                }
            }
            continue;
        }
        if line.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty line".into(),
            });
        }
        let before = data.len();
        for field in line.split(',') {
            let sym = match field.as_bytes() {
                [c @ b'0'..=b'3'] => c - b'0',
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("invalid outcome symbol '{field}'"),
                    })
                }
            };
            data.push(sym);
        }
        let width = data.len() - before;
        let expected = *n_parties.get_or_insert(width);
        if width != expected {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {expected} outcomes, found {width}"),
            });
        }
    }
    let n_parties = n_parties.ok_or(Error::Parse {
        line: 0,
        message: "no shots and no n_parties header".into(),
    })?;
    Ok(ShotRecord {
        n_parties,
        data,
        metadata,
    })
}

pub fn save_shots(record: &ShotRecord, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_shots(record))?;
    Ok(())
}

pub fn load_shots(path: impl AsRef<Path>) -> Result<ShotRecord> {
    parse_shots(&std::fs::read_to_string(path)?)
}
