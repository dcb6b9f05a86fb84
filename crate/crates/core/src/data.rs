//! Synthetic instances, MovieLens ingestion and train/test splits.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, FactorPair, SparseObservations};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthCompletionConfig {
    pub m: usize,
    pub n: usize,
    pub true_rank: usize,
    pub observed_fraction: f64,
    pub snr: f64,
    pub seed: u64,
}

impl SynthCompletionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidConfig("m and n must be >= 1".into()));
        }
        if self.true_rank > self.m.min(self.n) {
            return Err(Error::InvalidConfig(format!(
                "true_rank {} exceeds min(m, n)",
                self.true_rank
            )));
        }
        if !(self.observed_fraction > 0.0 && self.observed_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "observed fraction must lie in (0, 1], got {}",
                self.observed_fraction
            )));
        }
        if !(self.snr > 0.0) || !self.snr.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "snr must be > 0, got {}",
                self.snr
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CompletionInstance {
    pub truth: FactorPair,
    /// Noisy entries on the sampled cells.
    pub observed: SparseObservations,
    /// Noiseless entries on every other cell.
    pub heldout: SparseObservations,
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Population standard deviation.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.len() as f64).sqrt()
}

/// `M = U·Vᵀ + η` with standard normal `U`, `V`, `η`. The noise is rescaled
/// so that `sd(U·Vᵀ) / sd(η)` equals `snr` exactly, and
/// `⌊p·m·n⌋` distinct cells are observed.
pub fn gen_completion(config: &SynthCompletionConfig) -> Result<CompletionInstance> {
    config.validate()?;
    let (m, n, r) = (config.m, config.n, config.true_rank);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let u = normal_matrix(&mut rng, m, r);
    let v = normal_matrix(&mut rng, n, r);
    let truth = FactorPair::new(u, v)?;
    let signal = truth.to_dense();
    let noise = normal_matrix(&mut rng, m, n);

    let sd_signal = std_dev(signal.as_slice());
    let sd_noise = std_dev(noise.as_slice());
    let scale = if sd_noise > 0.0 {
        sd_signal / (config.snr * sd_noise)
    } else {
        0.0
    };

    let total = m * n;
    let count = ((config.observed_fraction * total as f64).floor() as usize).clamp(1, total);
    let mut cells = rand::seq::index::sample(&mut rng, total, count).into_vec();
    cells.sort_unstable();

    let mut observed_mask = vec![false; total];
    let mut observed = Vec::with_capacity(count);
    for &c in &cells {
        observed_mask[c] = true;
        let (i, j) = (c / n, c % n);
        observed.push((i, j, signal[(i, j)] + scale * noise[(i, j)]));
    }
    let heldout = (0..total)
        .filter(|&c| !observed_mask[c])
        .map(|c| (c / n, c % n, signal[(c / n, c % n)]))
        .collect();

    Ok(CompletionInstance {
        truth,
        observed: SparseObservations::new(m, n, observed)?,
        heldout: SparseObservations::new(m, n, heldout)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthRpcaConfig {
    pub m: usize,
    pub n: usize,
    pub true_rank: usize,
    pub sparse_fraction: f64,
    pub sparse_magnitude: f64,
    /// Read `sparse_magnitude` in units of `sd(L₀)`.
    pub magnitude_relative: bool,
    pub seed: u64,
}

impl SynthRpcaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidConfig("m and n must be >= 1".into()));
        }
        if self.true_rank > self.m.min(self.n) {
            return Err(Error::InvalidConfig(format!(
                "true_rank {} exceeds min(m, n)",
                self.true_rank
            )));
        }
        if !(0.0..1.0).contains(&self.sparse_fraction) {
            return Err(Error::InvalidConfig(format!(
                "sparse fraction must lie in [0, 1), got {}",
                self.sparse_fraction
            )));
        }
        if !(self.sparse_magnitude >= 0.0) || !self.sparse_magnitude.is_finite() {
            return Err(Error::InvalidConfig("sparse magnitude must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RpcaInstance {
    pub truth_low: FactorPair,
    pub corrupted: DenseMatrix,
    /// Corrupted cells, sorted row-major.
    pub sparse_mask: Vec<(usize, usize)>,
}

/// `L₀ + S`: normal factors for `L₀`, and `⌊fraction·m·n⌋` distinct cells
/// of `S` set to `±magnitude` with random signs.
pub fn gen_rpca(config: &SynthRpcaConfig) -> Result<RpcaInstance> {
    config.validate()?;
    let (m, n, r) = (config.m, config.n, config.true_rank);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let truth_low = FactorPair::new(normal_matrix(&mut rng, m, r), normal_matrix(&mut rng, n, r))?;
    let mut corrupted = truth_low.to_dense();
    let magnitude = if config.magnitude_relative {
        config.sparse_magnitude * std_dev(corrupted.as_slice())
    } else {
        config.sparse_magnitude
    };
    let total = m * n;
    let count = (config.sparse_fraction * total as f64).floor() as usize;
    let mut cells = rand::seq::index::sample(&mut rng, total, count).into_vec();
    cells.sort_unstable();
    let mut sparse_mask = Vec::with_capacity(count);
    for c in cells {
        let (i, j) = (c / n, c % n);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        corrupted[(i, j)] += sign * magnitude;
        sparse_mask.push((i, j));
    }
    Ok(RpcaInstance {
        truth_low,
        corrupted,
        sparse_mask,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatingsFormat {
    /// `user<TAB>item<TAB>rating<TAB>timestamp`
    Ml100k,
    /// `user::item::rating::timestamp`
    Ml1m,
}

impl FromStr for RatingsFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml100k" => Ok(Self::Ml100k),
            "ml1m" => Ok(Self::Ml1m),
            other => Err(Error::InvalidConfig(format!(
                "unknown ratings format `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingsDataset {
    pub num_users: usize,
    pub num_items: usize,
    /// `(user, item, rating)` with dense indices, in file order.
    pub ratings: Vec<(usize, usize, f64)>,
    pub rating_range: (f64, f64),
    /// Original ids, indexed by dense id.
    pub user_ids: Vec<u64>,
    pub item_ids: Vec<u64>,
}

pub const MOVIELENS_RANGE: (f64, f64) = (1.0, 5.0);

/// Parses a MovieLens ratings file. Ids are remapped to dense indices in
/// ascending order of the original id.
pub fn load_movielens(path: &Path, format: RatingsFormat) -> Result<RatingsDataset> {
    let reader = BufReader::new(File::open(path)?);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut raw = Vec::new();
    for (k, line) in reader.split(b'\n').enumerate() {
        let lineno = k + 1;
        let bytes = line?;
        let text = String::from_utf8_lossy(&bytes);
        let text = text.trim_end_matches('\r');
        if text.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = match format {
            RatingsFormat::Ml100k => text.split('\t').collect(),
            RatingsFormat::Ml1m => text.split("::").collect(),
        };
        if fields.len() != 4 {
            return Err(parse_err(
                lineno,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let user: u64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad user id `{}`", fields[0])))?;
        let item: u64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad item id `{}`", fields[1])))?;
        let rating: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad rating `{}`", fields[2])))?;
        if !(MOVIELENS_RANGE.0..=MOVIELENS_RANGE.1).contains(&rating) {
            return Err(parse_err(lineno, format!("rating {rating} outside [1, 5]")));
        }
        raw.push((lineno, user, item, rating));
    }
    if raw.is_empty() {
        return Err(Error::EmptyDataset(path.to_path_buf()));
    }

    let dense_ids = |ids: &mut dyn Iterator<Item = u64>| -> BTreeMap<u64, usize> {
        let mut map: BTreeMap<u64, usize> = ids.map(|id| (id, 0)).collect();
        for (k, slot) in map.values_mut().enumerate() {
            *slot = k;
        }
        map
    };
    let users = dense_ids(&mut raw.iter().map(|r| r.1));
    let items = dense_ids(&mut raw.iter().map(|r| r.2));

    let mut seen = std::collections::HashSet::with_capacity(raw.len());
    let mut ratings = Vec::with_capacity(raw.len());
    for &(lineno, user, item, rating) in &raw {
        let (i, j) = (users[&user], items[&item]);
        if !seen.insert((i, j)) {
            return Err(parse_err(
                lineno,
                format!("duplicate rating for user {user}, item {item}"),
            ));
        }
        ratings.push((i, j, rating));
    }
    Ok(RatingsDataset {
        num_users: users.len(),
        num_items: items.len(),
        ratings,
        rating_range: MOVIELENS_RANGE,
        user_ids: users.into_keys().collect(),
        item_ids: items.into_keys().collect(),
    })
}

/// Seeded uniform partition of the ratings; `round(fraction·N)` go to train.
pub fn split_ratings(
    ds: &RatingsDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(SparseObservations, SparseObservations)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..ds.ratings.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (train_fraction * ds.ratings.len() as f64).round() as usize;
    let pick = |idx: &[usize]| {
        SparseObservations::new(
            ds.num_users,
            ds.num_items,
            idx.iter().map(|&k| ds.ratings[k]).collect(),
        )
    };
    Ok((pick(&order[..n_train])?, pick(&order[n_train..])?))
}
