use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Certificate;
use crate::artifact;
use crate::error::{Error, Result};

/// Train / validation / test partition of certificate ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }
}

/// Part sizes for `n` items by largest-remainder rounding.
///
/// Each part first gets `floor(n * ratio)`; the leftover items go one each to
/// the parts with the largest fractional remainders, earlier parts winning
/// ties. If a part would end up empty it takes one item from the currently
/// largest part, so every part is nonempty whenever `n >= 3`.
pub fn split_sizes(n: usize, ratios: (f64, f64, f64)) -> Result<[usize; 3]> {
    let r = [ratios.0, ratios.1, ratios.2];
    if r.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "split ratios must be positive, got {r:?}"
        )));
    }
    if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios must sum to 1, got {r:?}"
        )));
    }
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "cannot split a corpus of {n} records into three parts"
        )));
    }
    // Quotas within 1e-9 of an integer count as that integer, so that shares
    // such as 990 * 81/99 are not lost to floating-point error.
    let quotas: Vec<f64> = r.iter().map(|x| x * n as f64).collect();
    let mut sizes = [0usize; 3];
    let mut rema = [0f64; 3];
    for i in 0..3 {
        let q = quotas[i];
        let fl = (q + 1e-9).floor();
        sizes[i] = fl as usize;
        rema[i] = (q - fl).max(0.0);
    }
    let assigned: usize = sizes.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| rema[b].total_cmp(&rema[a]).then(a.cmp(&b)));
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    for i in 0..3 {
        if sizes[i] == 0 {
            let largest = (0..3).max_by_key(|&j| (sizes[j], std::cmp::Reverse(j))).unwrap();
            sizes[largest] -= 1;
            sizes[i] += 1;
        }
    }
    debug_assert_eq!(sizes.iter().sum::<usize>(), n);
    Ok(sizes)
}

/// Seeded random partition of the corpus ids.
///
/// Ids are sorted before shuffling so the result depends only on the id set,
/// the ratios and the seed. Each part is returned sorted.
pub fn split_corpus(corpus: &[Certificate], ratios: (f64, f64, f64), seed: u64) -> Result<Split> {
    let sizes = split_sizes(corpus.len(), ratios)?;
    let mut ids: Vec<String> = corpus.iter().map(|c| c.id.clone()).collect();
    ids.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let mut test = ids.split_off(sizes[0] + sizes[1]);
    let mut validation = ids.split_off(sizes[0]);
    let mut train = ids;
    train.sort();
    validation.sort();
    test.sort();
    Ok(Split {
        train,
        validation,
        test,
    })
}

pub fn save_split(path: &Path, split: &Split) -> Result<()> {
    artifact::write_json(path, "split", split)
}

pub fn load_split(path: &Path) -> Result<Split> {
    let split: Split = artifact::read_json(path, "split")?;
    let mut seen = HashSet::new();
    for id in split.train.iter().chain(&split.validation).chain(&split.test) {
        if !seen.insert(id) {
            return Err(Error::Format(format!(
                "{}: id {id:?} appears in more than one part",
                path.display()
            )));
        }
    }
    Ok(split)
}
