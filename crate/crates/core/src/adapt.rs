//! Checkpoints and task adaptation: build a base model, save it, and retrain
//! it on the modified task.
//!
//! Checkpoint layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "DQNCKPT\0"
//! version  u32
//! layers   u32      number of entries in dims
//! dims     u32 * layers
//! count    u64      number of parameters
//! payload  f64 * count   per layer: weights (row-major), then biases
//! meta_len u32
//! meta     meta_len bytes of UTF-8 `key=value` lines
//! ```

use crate::envs::{GridTask, GridWorld, StartMode};
use crate::metrics::{OptimalSet, QProbe};
use crate::nnet::{BiasInit, NetError, Network};
use crate::oracle::{solve_grid_q, Expert, GridExpert, OracleError, OracleVariant};
use crate::qlearn::{self, derive_seed, Algorithm, MseProbe, RunRecord, SupervisedSampling, TrainConfig, TrainError};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"DQNCKPT\0";
pub const VERSION: u32 = 1;

/// Gap (px) of the original and the adapted intersection task.
pub const ORIGINAL_GAP: f64 = 80.0;
pub const ADAPTED_GAP: f64 = 120.0;

#[derive(Debug, Error)]
pub enum AdaptError {
    #[error("corrupt checkpoint {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("checkpoint has layer dims {got:?}, run expects {expected:?}")]
    DimensionMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("base model did not reach MSEq < {threshold} within {episodes} episodes (last {last:.3})")]
    BaseNotConverged { threshold: f64, episodes: usize, last: f64 },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

pub type Result<T> = std::result::Result<T, AdaptError>;

/// Where a checkpoint came from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub config_hash: String,
    pub env: String,
    pub task: String,
    pub algorithm: String,
    pub episodes: u64,
    pub seed: u64,
}

impl Provenance {
    fn to_text(&self) -> String {
        format!(
            "config_hash={}\nenv={}\ntask={}\nalgorithm={}\nepisodes={}\nseed={}\n",
            self.config_hash, self.env, self.task, self.algorithm, self.episodes, self.seed
        )
    }

    fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut map = BTreeMap::new();
        for line in text.lines().filter(|l| !l.is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| format!("bad metadata line `{line}`"))?;
            map.insert(k, v);
        }
        let get = |k: &str| map.get(k).map(|v| v.to_string()).ok_or_else(|| format!("missing `{k}`"));
        let num = |k: &str| get(k)?.parse::<u64>().map_err(|e| format!("`{k}`: {e}"));
        Ok(Self {
            config_hash: get("config_hash")?,
            env: get("env")?,
            task: get("task")?,
            algorithm: get("algorithm")?,
            episodes: num("episodes")?,
            seed: num("seed")?,
        })
    }

    /// Short stable identifier, used as `base_id` in output tables.
    pub fn id(&self) -> String {
        sha256_hex(&self.to_text())[..12].to_string()
    }
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub provenance: Provenance,
}

pub fn encode_checkpoint(net: &Network, provenance: &Provenance) -> Vec<u8> {
    let params = net.flat_params();
    let meta = provenance.to_text();
    let mut out = Vec::with_capacity(32 + 8 * params.len() + meta.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.dims().len() as u32).to_le_bytes());
    for &d in net.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(meta.as_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or("truncated")?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> std::result::Result<Checkpoint, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let layers = r.u32()? as usize;
    if !(2..=64).contains(&layers) {
        return Err(format!("implausible layer count {layers}"));
    }
    let dims: Vec<usize> = (0..layers).map(|_| r.u32().map(|d| d as usize)).collect::<std::result::Result<_, _>>()?;
    let expected: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    let count = r.u64()? as usize;
    if count != expected {
        return Err(format!("payload length {count} does not match dims {dims:?} ({expected})"));
    }
    let raw = r.take(count.checked_mul(8).ok_or("payload too large")?)?;
    let flat: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let meta_len = r.u32()? as usize;
    let meta = std::str::from_utf8(r.take(meta_len)?).map_err(|e| format!("metadata is not UTF-8: {e}"))?;
    if r.pos != bytes.len() {
        return Err("trailing bytes".into());
    }
    let network = Network::from_flat(&dims, &flat).map_err(|e| e.to_string())?;
    Ok(Checkpoint {
        network,
        provenance: Provenance::from_text(meta)?,
    })
}

/// Writes atomically: a temporary file in the same directory, then rename.
pub fn save_checkpoint(net: &Network, provenance: &Provenance, path: &Path) -> Result<()> {
    let io = |source| AdaptError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(&encode_checkpoint(net, provenance)).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|source| AdaptError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_checkpoint(&bytes).map_err(|reason| AdaptError::Corrupt {
        path: path.to_path_buf(),
        reason,
    })
}

/// A task of either environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaskSpec {
    Grid(GridTask),
    /// Minimum safe gap in pixels.
    Intersection(f64),
}

/// Grid: swap goal and hazard. Intersection: 80 px gap becomes 120 px (and
/// back).
pub fn adapt_task(task: TaskSpec) -> TaskSpec {
    match task {
        TaskSpec::Grid(t) => TaskSpec::Grid(t.adapted()),
        TaskSpec::Intersection(g) if g >= ADAPTED_GAP => TaskSpec::Intersection(ORIGINAL_GAP),
        TaskSpec::Intersection(_) => TaskSpec::Intersection(ADAPTED_GAP),
    }
}

/// A retraining run plus the base it started from.
#[derive(Debug, Clone)]
pub struct RetrainRecord {
    pub run: RunRecord,
    pub base: Provenance,
}

/// Trains on top of the base network. Fails if the base does not have the
/// layer dims the run expects.
pub fn retrain<E: SupervisedSampling>(
    base: &Checkpoint,
    expected_dims: &[usize],
    env: &E,
    config: &TrainConfig,
    expert: Option<&dyn Expert<E::State>>,
    probe: Option<MseProbe<'_>>,
) -> Result<RetrainRecord> {
    if base.network.dims() != expected_dims {
        return Err(AdaptError::DimensionMismatch {
            expected: expected_dims.to_vec(),
            got: base.network.dims().to_vec(),
        });
    }
    let run = qlearn::train(env, base.network.clone(), config, expert, probe)?;
    Ok(RetrainRecord {
        run,
        base: base.provenance.clone(),
    })
}

pub const GRID_DIMS: [usize; 3] = [2, 512, 4];

/// The "one-hot" grid base: supervised learning on the original task.
pub fn build_onehot_base(config: &TrainConfig, bias: BiasInit) -> Result<RunRecord> {
    let task = GridTask::ORIGINAL;
    let env = GridWorld::new(task, StartMode::Fixed);
    let expert = GridExpert::new(task);
    let config = TrainConfig {
        algorithm: Algorithm::Supervised,
        ..config.clone()
    };
    let net = qlearn::init_for_run(&GRID_DIMS, config.seed, bias)?;
    Ok(qlearn::train(&env, net, &config, Some(&expert), None)?)
}

/// Result of [`build_dqn_base`].
#[derive(Debug, Clone)]
pub struct DqnBase {
    pub network: Network,
    pub episodes: usize,
    pub mse_optimal: f64,
    pub mse_all: f64,
}

/// The "optimal Q-value" grid base: alternate random exploration and expert
/// demonstrations from every non-terminal start cell, in chunks, until the
/// MSE over all Q-states drops below `threshold`.
pub fn build_dqn_base(
    config: &TrainConfig,
    bias: BiasInit,
    threshold: f64,
    chunk: usize,
    max_episodes: usize,
) -> Result<DqnBase> {
    let task = GridTask::ORIGINAL;
    let env = GridWorld::new(task, StartMode::AllCells);
    let expert = GridExpert::new(task);
    let table = solve_grid_q(task, 1.0, OracleVariant::Stationary)?;
    let probe = QProbe::new(&table, &env, OptimalSet::PathActions);
    let mut net = qlearn::init_for_run(&GRID_DIMS, config.seed, bias)?;
    let mut episodes = 0;
    let mut last = f64::INFINITY;
    let mut k = 0u64;
    while episodes < max_episodes {
        let n = chunk.min(max_episodes - episodes);
        let c = TrainConfig {
            algorithm: Algorithm::AltRandomExpert,
            episodes: n,
            eval_every: n,
            eval_rollouts: 1,
            seed: derive_seed(config.seed, &[0xBA5E, k]),
            ..config.clone()
        };
        net = qlearn::train(&env, net, &c, Some(&expert), None)?.network;
        episodes += n;
        k += 1;
        let (mse_optimal, mse_all) = probe.both(&net)?;
        last = mse_all;
        if mse_all < threshold {
            return Ok(DqnBase {
                network: net,
                episodes,
                mse_optimal,
                mse_all,
            });
        }
    }
    Err(AdaptError::BaseNotConverged {
        threshold,
        episodes,
        last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance {
            config_hash: "abc".into(),
            env: "grid".into(),
            task: "original".into(),
            algorithm: "supervised".into(),
            episodes: 20_000,
            seed: 3,
        }
    }

    #[test]
    fn round_trip_in_memory() {
        let net = Network::init_with(&[2, 512, 4], 9, BiasInit::Uniform).unwrap();
        let ck = decode_checkpoint(&encode_checkpoint(&net, &prov())).unwrap();
        assert_eq!(ck.network, net);
        assert_eq!(ck.provenance, prov());
    }

    #[test]
    fn truncation_and_bad_header_rejected() {
        let net = Network::init(&[2, 3, 4], 1).unwrap();
        let bytes = encode_checkpoint(&net, &prov());
        for cut in [0, 7, 12, 40, bytes.len() - 1] {
            assert!(decode_checkpoint(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(decode_checkpoint(&bad).unwrap_err(), "bad magic");
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(decode_checkpoint(&bad).unwrap_err().contains("version"));
        let mut bad = bytes;
        bad.push(0);
        assert!(decode_checkpoint(&bad).is_err());
    }

    #[test]
    fn save_load_and_corrupt_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("base.ckpt");
        let net = Network::init(&[16, 1024, 2], 0).unwrap();
        save_checkpoint(&net, &prov(), &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap().network, net);
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(AdaptError::Corrupt { .. })));
        // No temporary files left behind.
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn retrain_rejects_wrong_dims() {
        let ck = Checkpoint {
            network: Network::init(&[16, 1024, 2], 0).unwrap(),
            provenance: prov(),
        };
        let env = GridWorld::new(GridTask::ORIGINAL.adapted(), StartMode::Fixed);
        let r = retrain(&ck, &GRID_DIMS, &env, &TrainConfig::default(), None, None);
        assert!(matches!(r, Err(AdaptError::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_episode_retrain_keeps_base() {
        let ck = Checkpoint {
            network: Network::init(&GRID_DIMS, 4).unwrap(),
            provenance: prov(),
        };
        let env = GridWorld::new(GridTask::ORIGINAL.adapted(), StartMode::Fixed);
        let config = TrainConfig {
            episodes: 0,
            algorithm: Algorithm::OnPolicy,
            ..TrainConfig::default()
        };
        let r = retrain(&ck, &GRID_DIMS, &env, &config, None, None).unwrap();
        assert_eq!(r.run.network, ck.network);
        assert_eq!(r.base, prov());
    }

    #[test]
    fn adapt_task_examples() {
        let TaskSpec::Grid(t) = adapt_task(TaskSpec::Grid(GridTask::ORIGINAL)) else { panic!() };
        assert_eq!((t.goal, t.hazard, t.obstacle), ((1, 2), (0, 0), (1, 0)));
        assert_eq!(adapt_task(adapt_task(TaskSpec::Grid(GridTask::ORIGINAL))), TaskSpec::Grid(GridTask::ORIGINAL));
        assert_eq!(adapt_task(TaskSpec::Intersection(80.0)), TaskSpec::Intersection(120.0));
    }
}
