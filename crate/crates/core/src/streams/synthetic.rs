use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::StreamEvent;
use crate::error::{Error, Result};

pub const PRESETS: [&str; 5] = ["stationary2", "mild4", "transfer2", "adversarial10", "hemisphere2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseDistribution {
    /// Uniformly chosen center plus isotropic noise.
    GaussianMixture { centers: Vec<Vec<f64>>, std: f64 },
    /// Identity-covariance Gaussian conditioned on the unit disk.
    TruncatedDiskGaussian { center: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub length: usize,
    pub distribution: PhaseDistribution,
    pub seed: u64,
}

impl PhaseSpec {
    pub fn dim(&self) -> usize {
        match &self.distribution {
            PhaseDistribution::GaussianMixture { centers, .. } => centers.first().map_or(0, Vec::len),
            PhaseDistribution::TruncatedDiskGaussian { center } => center.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::config("phase length must be positive"));
        }
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::config("phase dimension must be positive"));
        }
        match &self.distribution {
            PhaseDistribution::GaussianMixture { centers, std } => {
                if centers.iter().any(|c| c.len() != dim) {
                    return Err(Error::config("mixture centers must share a dimension"));
                }
                if !(*std > 0.0 && std.is_finite()) {
                    return Err(Error::config(format!("mixture std must be positive, got {std}")));
                }
                if centers.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::config("mixture centers must be finite"));
                }
            }
            PhaseDistribution::TruncatedDiskGaussian { center } => {
                if center.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config("disk center must be finite"));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match &self.distribution {
            PhaseDistribution::GaussianMixture { centers, std } => {
                let c = &centers[rng.random_range(0..centers.len())];
                c.iter()
                    .map(|v| v + std * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
            PhaseDistribution::TruncatedDiskGaussian { center } => loop {
                let x: Vec<f64> = center
                    .iter()
                    .map(|v| v + rng.sample::<f64, _>(StandardNormal))
                    .collect();
                if x.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                    break x;
                }
            },
        }
    }
}

/// Iterator over the events of a phase list.
#[derive(Debug, Clone)]
pub struct SyntheticStream {
    phases: Vec<PhaseSpec>,
    phase: usize,
    within: usize,
    index: u64,
    rng: ChaCha8Rng,
}

impl SyntheticStream {
    pub fn total_len(&self) -> usize {
        self.phases.iter().map(|p| p.length).sum()
    }
}

impl Iterator for SyntheticStream {
    type Item = StreamEvent;

    fn next(&mut self) -> Option<StreamEvent> {
        while self.phase < self.phases.len() && self.within >= self.phases[self.phase].length {
            self.phase += 1;
            self.within = 0;
            if let Some(p) = self.phases.get(self.phase) {
                self.rng = ChaCha8Rng::seed_from_u64(p.seed);
            }
        }
        let spec = self.phases.get(self.phase)?;
        let x_raw = spec.sample(&mut self.rng);
        let event = StreamEvent {
            index: self.index,
            x_raw,
            label: None,
            phase_id: Some(self.phase),
        };
        self.within += 1;
        self.index += 1;
        Some(event)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.total_len() - self.index as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for SyntheticStream {}

/// Events are emitted phase by phase; each phase draws from its own seed.
pub fn generate(phases: Vec<PhaseSpec>) -> Result<SyntheticStream> {
    let first = phases
        .first()
        .ok_or_else(|| Error::config("at least one phase is required"))?;
    let dim = first.dim();
    for p in &phases {
        p.validate()?;
        if p.dim() != dim {
            return Err(Error::config("all phases must share a dimension"));
        }
    }
    let rng = ChaCha8Rng::seed_from_u64(first.seed);
    Ok(SyntheticStream {
        phases,
        phase: 0,
        within: 0,
        index: 0,
        rng,
    })
}

fn mixture(centers: &[[f64; 2]], std: f64, length: usize, seed: u64) -> PhaseSpec {
    PhaseSpec {
        length,
        distribution: PhaseDistribution::GaussianMixture {
            centers: centers.iter().map(|c| c.to_vec()).collect(),
            std,
        },
        seed,
    }
}

/// Phase seeds and random centers are derived from `seed`.
pub fn preset(name: &str, seed: u64) -> Result<Vec<PhaseSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next_seed = || rng.random::<u64>();
    let phases = match name {
        "stationary2" => vec![mixture(&[[-2.0, 2.0], [2.0, -2.0]], 0.3, 20_000, next_seed())],
        "mild4" => [
            [[-2.0, 2.0], [2.0, -2.0]],
            [[-2.0, -2.0], [2.0, 2.0]],
            [[2.0, 2.0], [2.0, -2.0]],
            [[-2.0, 2.0], [-2.0, -2.0]],
        ]
        .iter()
        .map(|c| mixture(c, 0.3, 10_000, next_seed()))
        .collect(),
        "transfer2" => [0.6, 0.3]
            .iter()
            .map(|&s| mixture(&[[-2.0, -2.0], [2.0, 2.0]], s, 10_000, next_seed()))
            .collect(),
        "adversarial10" => {
            let mut crng = ChaCha8Rng::seed_from_u64(next_seed());
            (0..10)
                .map(|_| {
                    let centers: Vec<[f64; 2]> = (0..2)
                        .map(|_| [crng.random_range(-5.0..=5.0), crng.random_range(-5.0..=5.0)])
                        .collect();
                    mixture(&centers, 0.3, 10_000, crng.random())
                })
                .collect()
        }
        "hemisphere2" => [[0.0, 0.0], [0.75, 0.0]]
            .iter()
            .map(|c| PhaseSpec {
                length: 5_000,
                distribution: PhaseDistribution::TruncatedDiskGaussian { center: c.to_vec() },
                seed: next_seed(),
            })
            .collect(),
        other => {
            return Err(Error::config(format!(
                "unknown preset `{other}`; valid presets: {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(phases)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn centers_of(p: &PhaseSpec) -> (&[Vec<f64>], f64) {
        match &p.distribution {
            PhaseDistribution::GaussianMixture { centers, std } => (centers, *std),
            _ => panic!("expected mixture"),
        }
    }

    #[test]
    fn preset_shapes() {
        let lens: Vec<Vec<usize>> = PRESETS
            .iter()
            .map(|n| preset(n, 0).unwrap().iter().map(|p| p.length).collect())
            .collect();
        assert_eq!(lens[0], vec![20_000]);
        assert_eq!(lens[1], vec![10_000; 4]);
        assert_eq!(lens[2], vec![10_000; 2]);
        assert_eq!(lens[3], vec![10_000; 10]);
        assert_eq!(lens[4], vec![5_000; 2]);
    }

    #[test]
    fn transfer_preset() {
        let p = preset("transfer2", 1).unwrap();
        let (c0, s0) = centers_of(&p[0]);
        let (c1, s1) = centers_of(&p[1]);
        assert_eq!(c0, &[vec![-2.0, -2.0], vec![2.0, 2.0]]);
        assert_eq!(c0, c1);
        assert_eq!((s0, s1), (0.6, 0.3));
    }

    #[test]
    fn adversarial_preset_is_random_per_seed() {
        let a = preset("adversarial10", 1).unwrap();
        let b = preset("adversarial10", 2).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, preset("adversarial10", 1).unwrap());
        for p in &a {
            let (c, s) = centers_of(p);
            assert_eq!(s, 0.3);
            assert_eq!(c.len(), 2);
            assert!(c.iter().flatten().all(|v| v.abs() <= 5.0));
        }
    }

    #[test]
    fn unknown_preset_lists_valid_names() {
        let msg = preset("nope", 0).unwrap_err().to_string();
        for n in PRESETS {
            assert!(msg.contains(n));
        }
    }

    #[test]
    fn zero_std_is_rejected_and_tiny_std_hits_centers() {
        let mut p = mixture(&[[1.0, 2.0]], 0.0, 10, 0);
        assert!(generate(vec![p.clone()]).is_err());
        p.distribution = PhaseDistribution::GaussianMixture {
            centers: vec![vec![1.0, 2.0]],
            std: 1e-300,
        };
        for e in generate(vec![p]).unwrap() {
            assert_eq!(e.x_raw, vec![1.0, 2.0]);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(vec![]).is_err());
        assert!(generate(vec![mixture(&[[0.0, 0.0]], 1.0, 0, 0)]).is_err());
        let empty = PhaseSpec {
            length: 3,
            distribution: PhaseDistribution::GaussianMixture {
                centers: vec![],
                std: 1.0,
            },
            seed: 0,
        };
        assert!(generate(vec![empty]).is_err());
        let mixed = vec![
            mixture(&[[0.0, 0.0]], 1.0, 3, 0),
            PhaseSpec {
                length: 3,
                distribution: PhaseDistribution::TruncatedDiskGaussian { center: vec![0.0] },
                seed: 0,
            },
        ];
        assert!(generate(mixed).is_err());
    }

    #[test]
    fn truncated_disk_stays_in_disk() {
        let p = PhaseSpec {
            length: 100_000,
            distribution: PhaseDistribution::TruncatedDiskGaussian {
                center: vec![0.75, 0.0],
            },
            seed: 9,
        };
        assert!(generate(vec![p]).unwrap().all(|e| e.x_raw[0].hypot(e.x_raw[1]) <= 1.0));
    }

    #[test]
    fn indices_and_phase_ids() {
        let events: Vec<_> = generate(preset("mild4", 3).unwrap()).unwrap().collect();
        assert_eq!(events.len(), 40_000);
        assert!(events.iter().enumerate().all(|(i, e)| e.index == i as u64));
        assert_eq!(super::super::phase_changepoints(&events), vec![10_000, 20_000, 30_000]);
    }

    #[test]
    fn deterministic() {
        let a: Vec<_> = generate(preset("hemisphere2", 5).unwrap()).unwrap().collect();
        let b: Vec<_> = generate(preset("hemisphere2", 5).unwrap()).unwrap().collect();
        assert_eq!(a, b);
    }

    #[test]
    fn phase_means_within_four_standard_errors() {
        for (k, p) in preset("mild4", 11).unwrap().iter().enumerate() {
            let (centers, std) = centers_of(p);
            let n = p.length as f64;
            let events: Vec<_> = generate(vec![p.clone()]).unwrap().collect();
            for d in 0..2 {
                let mu = centers.iter().map(|c| c[d]).sum::<f64>() / centers.len() as f64;
                let var = std * std + centers.iter().map(|c| (c[d] - mu).powi(2)).sum::<f64>() / centers.len() as f64;
                let mean = events.iter().map(|e| e.x_raw[d]).sum::<f64>() / n;
                assert!((mean - mu).abs() <= 4.0 * (var / n).sqrt(), "phase {k} coord {d}");
            }
        }
    }
}
