use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::QAPair;
use crate::error::{Error, Result};

/// Number of synthetic pairs kept by default.
pub const DEFAULT_TOP_R: usize = 5914;

/// The `r` highest-scored pairs, by descending score with ties broken by
/// ascending `(doc_id, label_code)`.
pub fn select_top_r(pairs: &[QAPair], r: usize) -> Result<Vec<QAPair>> {
    if r == 0 {
        return Err(Error::InvalidConfig("r must be positive".into()));
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
            .then_with(|| a.label_code.cmp(&b.label_code))
    });
    sorted.truncate(r);
    Ok(sorted)
}

/// Adds synthetic pairs to `base` at `ratio = (base, synthetic)`.
///
/// `floor(|base| · synthetic / base)` synthetic pairs are drawn without
/// replacement and the union is shuffled. A ratio drawing no synthetic pairs
/// returns `base` unchanged.
pub fn mix(base: &[QAPair], synthetic: &[QAPair], ratio: (usize, usize), seed: u64) -> Result<Vec<QAPair>> {
    let (b, s) = ratio;
    if b == 0 {
        return Err(Error::InvalidConfig("the base side of the mixing ratio must be positive".into()));
    }
    let needed = base.len() * s / b;
    if needed == 0 {
        return Ok(base.to_vec());
    }
    if needed > synthetic.len() {
        return Err(Error::InsufficientPairs {
            needed,
            available: synthetic.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, synthetic.len(), needed).into_vec();
    picked.sort_unstable();
    let mut out: Vec<QAPair> = base.iter().cloned().chain(picked.into_iter().map(|i| synthetic[i].clone())).collect();
    out.shuffle(&mut rng);
    Ok(out)
}
