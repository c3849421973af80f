//! Sum-of-sinusoids exploration signals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Reserved stream for drawing probing parameters, disjoint from the
/// per-(realization, agent) dynamics streams.
const PROBE_STREAM: u64 = 1 << 63;

/// Steps between exact re-evaluations in [`NoiseSpec::sampled`].
pub const RESYNC: usize = 64;

/// One input channel: `ℓ(t) = a Σⱼ sin(wʲ t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec<T> {
    pub amplitude: T,
    pub frequencies: Vec<T>,
}

impl<T: Real> NoiseSpec<T> {
    pub fn value(&self, t: T) -> T {
        self.amplitude * self.frequencies.iter().map(|&w| (w * t).sin()).sum::<T>()
    }

    /// `value(k·dt)` for `k = 0..len`, by angle-addition recurrence
    /// re-anchored to exact `sin`/`cos` every [`RESYNC`] steps.
    pub fn sampled(&self, dt: T, len: usize) -> Vec<T> {
        let mut out = vec![0.0f64; len];
        let dt = dt.as_f64();
        for &w in &self.frequencies {
            let w = w.as_f64();
            let (sd, cd) = (w * dt).sin_cos();
            let (mut s, mut c) = (0.0f64, 1.0f64);
            for (k, v) in out.iter_mut().enumerate() {
                if k % RESYNC == 0 {
                    (s, c) = (w * dt * k as f64).sin_cos();
                }
                *v += s;
                (s, c) = (s * cd + c * sd, c * cd - s * sd);
            }
        }
        let a = self.amplitude.as_f64();
        out.into_iter().map(|v| T::lit(a * v)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies.is_empty() {
            return Err(Error::InvalidArgument(
                "noise needs at least one frequency".into(),
            ));
        }
        if !self.amplitude.is_finite() || self.frequencies.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "noise parameters must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Probing signal of one agent, one [`NoiseSpec`] per input channel.
pub type AgentProbe<T> = Vec<NoiseSpec<T>>;

/// `ℓ(t)` for every input channel.
pub fn exploration_noise<T: Real>(probe: &[NoiseSpec<T>], t: T) -> Vec<T> {
    probe.iter().map(|s| s.value(t)).collect()
}

/// Random draw of amplitudes and frequencies from closed ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSampler {
    pub amplitude_range: [f64; 2],
    pub frequency_range: [f64; 2],
    /// Sinusoids per channel (`J`).
    pub count: usize,
}

impl NoiseSampler {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidArgument(
                "noise.count must be at least 1".into(),
            ));
        }
        for (name, [lo, hi]) in [
            ("amplitude_range", self.amplitude_range),
            ("frequency_range", self.frequency_range),
        ] {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "noise.{name} must satisfy lo <= hi"
                )));
            }
        }
        Ok(())
    }

    pub fn draw<T: Real>(&self, rng: &mut impl Rng) -> NoiseSpec<T> {
        let [alo, ahi] = self.amplitude_range;
        let [wlo, whi] = self.frequency_range;
        let amplitude = T::lit(alo + (ahi - alo) * rng.random::<f64>());
        let frequencies = (0..self.count)
            .map(|_| T::lit(wlo + (whi - wlo) * rng.random::<f64>()))
            .collect();
        NoiseSpec {
            amplitude,
            frequencies,
        }
    }
}

/// How probing signals are assigned across the population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMode {
    /// Each agent draws its own parameters.
    Independent,
    /// All agents share one draw.
    Shared,
    /// No exploration signal.
    None,
}

/// Per-agent probing signals for `n_agents` agents with `m` input channels.
///
/// `salt` separates experiments that use the same seed.
pub fn probe_plan<T: Real>(
    sampler: &NoiseSampler,
    mode: ProbeMode,
    n_agents: usize,
    m: usize,
    seed: u64,
    salt: u64,
) -> Result<Vec<AgentProbe<T>>> {
    sampler.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PROBE_STREAM | salt);
    let mut draw = || -> AgentProbe<T> { (0..m).map(|_| sampler.draw(&mut rng)).collect() };
    Ok(match mode {
        ProbeMode::None => Vec::new(),
        ProbeMode::Shared => {
            let p = draw();
            vec![p; n_agents]
        }
        ProbeMode::Independent => (0..n_agents).map(|_| draw()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        let zero = NoiseSpec {
            amplitude: 1.0f64,
            frequencies: vec![0.0],
        };
        assert_eq!(zero.value(3.7), 0.0);
        let s = NoiseSpec {
            amplitude: 2.0f64,
            frequencies: vec![std::f64::consts::FRAC_PI_2],
        };
        assert!((s.value(1.0) - 2.0).abs() < 1e-15);
        assert_eq!(exploration_noise(&[s.clone(), zero], 1.0).len(), 2);
    }

    #[test]
    fn recurrence_matches_direct_evaluation() {
        let s = NoiseSpec {
            amplitude: 7.0f64,
            frequencies: vec![-99.3, 0.0, 3.7, 61.2],
        };
        let dt = 2.5e-4;
        let v = s.sampled(dt, 5000);
        for (k, &x) in v.iter().enumerate() {
            assert!((x - s.value(k as f64 * dt)).abs() < 1e-11, "step {k}");
        }
    }

    #[test]
    fn sampled_signal_is_bounded() {
        let sampler = NoiseSampler {
            amplitude_range: [1.0, 10.0],
            frequency_range: [-100.0, 100.0],
            count: 100,
        };
        let probes = probe_plan::<f64>(&sampler, ProbeMode::Independent, 3, 1, 42, 0).unwrap();
        for p in &probes {
            let a = p[0].amplitude;
            assert!((1.0..=10.0).contains(&a));
            assert!(p[0]
                .frequencies
                .iter()
                .all(|w| (-100.0..=100.0).contains(w)));
            for k in 0..5000 {
                let v = p[0].value(k as f64 * 1e-3);
                assert!(v.abs() <= a * 100.0 && v.abs() <= 1000.0);
            }
        }
        assert_ne!(probes[0], probes[1]);
    }

    #[test]
    fn shared_mode_and_determinism() {
        let sampler = NoiseSampler {
            amplitude_range: [1.0, 10.0],
            frequency_range: [-100.0, 100.0],
            count: 4,
        };
        let shared = probe_plan::<f64>(&sampler, ProbeMode::Shared, 5, 2, 1, 0).unwrap();
        assert!(shared.iter().all(|p| p == &shared[0]));
        assert_eq!(
            shared,
            probe_plan::<f64>(&sampler, ProbeMode::Shared, 5, 2, 1, 0).unwrap()
        );
        assert_ne!(
            shared,
            probe_plan::<f64>(&sampler, ProbeMode::Shared, 5, 2, 1, 1).unwrap()
        );
        assert!(probe_plan::<f64>(&sampler, ProbeMode::None, 5, 2, 1, 0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn invalid_ranges() {
        let bad = NoiseSampler {
            amplitude_range: [2.0, 1.0],
            frequency_range: [0.0, 1.0],
            count: 1,
        };
        assert!(bad.validate().is_err());
        let empty = NoiseSpec::<f64> {
            amplitude: 1.0,
            frequencies: vec![],
        };
        assert!(empty.validate().is_err());
    }
}
