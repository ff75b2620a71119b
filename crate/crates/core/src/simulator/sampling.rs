use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{outcome_label, Counts, SimError};

/// Probability distribution over measurement outcomes, stored sparsely as
/// `(outcome index, probability)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    bits: usize,
    entries: Vec<(u64, f64)>,
}

impl Distribution {
    pub(super) fn from_dense(bits: usize, probs: Vec<f64>) -> Self {
        let entries = probs
            .into_iter()
            .enumerate()
            .filter(|(_, p)| *p > 0.0)
            .map(|(i, p)| (i as u64, p))
            .collect();
        Self { bits, entries }
    }

    /// Builds a distribution from bitstring keys. All keys must have the
    /// same length and the probabilities must sum to 1 within 1e-9.
    pub fn from_map(map: &BTreeMap<String, f64>) -> Result<Self, SimError> {
        let invalid = |m: String| SimError::InvalidDistribution(m);
        let bits = map
            .keys()
            .next()
            .map(|k| k.len())
            .ok_or_else(|| invalid("empty distribution".into()))?;
        if bits == 0 || bits > 63 {
            return Err(invalid(format!("unsupported outcome length {bits}")));
        }
        let mut entries = Vec::with_capacity(map.len());
        for (key, &p) in map {
            if key.len() != bits {
                return Err(invalid(format!("outcome `{key}` has length {}", key.len())));
            }
            let index = u64::from_str_radix(key, 2)
                .map_err(|_| invalid(format!("outcome `{key}` is not a bitstring")))?;
            if !p.is_finite() || p < 0.0 {
                return Err(invalid(format!("probability {p} for `{key}`")));
            }
            if p > 0.0 {
                entries.push((index, p));
            }
        }
        let dist = Self { bits, entries };
        let total = dist.total();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("probabilities sum to {total}")));
        }
        Ok(dist)
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.entries
            .iter()
            .filter(|(_, p)| *p >= 1e-14)
            .map(|&(i, p)| (outcome_label(i as usize, self.bits), p))
            .collect()
    }
}

/// Draws `shots` outcomes, then flips each measured bit independently with
/// probability `readout_flip_p`. Deterministic for a fixed `seed`.
pub fn sample(
    dist: &Distribution,
    shots: u64,
    seed: u64,
    readout_flip_p: f64,
) -> Result<Counts, SimError> {
    if !(0.0..=1.0).contains(&readout_flip_p) {
        return Err(SimError::InvalidDistribution(format!(
            "readout flip probability {readout_flip_p} outside [0, 1]"
        )));
    }
    let total = dist.total();
    if dist.entries.is_empty() || (total - 1.0).abs() > 1e-9 {
        return Err(SimError::InvalidDistribution(format!(
            "probabilities sum to {total}"
        )));
    }

    let mut cumulative = Vec::with_capacity(dist.entries.len());
    let mut acc = 0.0;
    for &(_, p) in &dist.entries {
        acc += p;
        cumulative.push(acc);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally: HashMap<u64, u64> = HashMap::new();
    for _ in 0..shots {
        let u = rng.random::<f64>() * acc;
        let slot = cumulative
            .partition_point(|&c| c <= u)
            .min(cumulative.len() - 1);
        let mut outcome = dist.entries[slot].0;
        if readout_flip_p > 0.0 {
            for bit in 0..dist.bits {
                if rng.random_bool(readout_flip_p) {
                    outcome ^= 1 << bit;
                }
            }
        }
        *tally.entry(outcome).or_default() += 1;
    }
    Ok(tally
        .into_iter()
        .map(|(i, n)| (outcome_label(i as usize, dist.bits), n))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(pairs: &[(&str, f64)]) -> Distribution {
        let map = pairs.iter().map(|(k, p)| (k.to_string(), *p)).collect();
        Distribution::from_map(&map).unwrap()
    }

    #[test]
    fn certain_outcome_without_noise() {
        let c = sample(&dist(&[("0", 1.0)]), 100, 7, 0.0).unwrap();
        assert_eq!(c, Counts::from([("0".to_string(), 100)]));
    }

    #[test]
    fn certain_flip() {
        let c = sample(&dist(&[("1", 1.0)]), 100, 7, 1.0).unwrap();
        assert_eq!(c, Counts::from([("0".to_string(), 100)]));
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let d = dist(&[("0", 0.5), ("1", 0.5)]);
        let a = sample(&d, 4096, 1234, 0.0).unwrap();
        let b = sample(&d, 4096, 1234, 0.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values().sum::<u64>(), 4096);
        let c = sample(&d, 4096, 1235, 0.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_inputs() {
        let bad_sum = BTreeMap::from([("0".to_string(), 0.4), ("1".to_string(), 0.4)]);
        assert!(Distribution::from_map(&bad_sum).is_err());
        let ragged = BTreeMap::from([("0".to_string(), 0.5), ("10".to_string(), 0.5)]);
        assert!(Distribution::from_map(&ragged).is_err());
        assert!(Distribution::from_map(&BTreeMap::new()).is_err());
        assert!(sample(&dist(&[("0", 1.0)]), 1, 0, 1.5).is_err());
    }
}
