//! Euler–Maruyama simulation of the coupled N-agent population.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::noise::{AgentProbe, NoiseSpec};
use super::path::{steps_for, Path, TimeGrid};
use crate::error::{Error, Result};
use crate::model::LqgGameModel;
use crate::numkit::Matrix;
use crate::scalar::Real;

/// Realizations simulated per parallel task. Fixed so that the summation
/// order, and hence every output bit, is independent of the thread count.
const CHUNK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recording {
    /// Keep the realization-averaged record only.
    Mean,
    /// Keep every realization as well.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig<T> {
    pub n_agents: usize,
    pub horizon: T,
    pub dt: T,
    pub seed: u64,
    pub realizations: usize,
    /// Agents whose individual paths are recorded (0-based).
    pub tracked: Vec<usize>,
    pub recording: Recording,
    /// Record every `stride`-th simulation step.
    pub stride: usize,
}

impl<T: Real> SimulationConfig<T> {
    pub fn new(n_agents: usize, horizon: T, dt: T, seed: u64, realizations: usize) -> Self {
        Self {
            n_agents,
            horizon,
            dt,
            seed,
            realizations,
            tracked: (0..n_agents.min(2)).collect(),
            recording: Recording::Mean,
            stride: 1,
        }
    }
}

/// Recorded paths of one realization, or their average over realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationRecord<T> {
    pub agent_states: Vec<Path<T>>,
    pub agent_inputs: Vec<Path<T>>,
    /// `x_(N)(t)`.
    pub avg_state: Path<T>,
    /// `u_(N)(t)`.
    pub avg_input: Path<T>,
}

impl<T: Real> RealizationRecord<T> {
    fn zeros(grid: TimeGrid<T>, tracked: usize, n: usize, m: usize) -> Self {
        Self {
            agent_states: vec![Path::zeros(grid, n); tracked],
            agent_inputs: vec![Path::zeros(grid, m); tracked],
            avg_state: Path::zeros(grid, n),
            avg_input: Path::zeros(grid, m),
        }
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.agent_states.iter_mut().zip(&other.agent_states) {
            a.add_assign(b);
        }
        for (a, b) in self.agent_inputs.iter_mut().zip(&other.agent_inputs) {
            a.add_assign(b);
        }
        self.avg_state.add_assign(&other.avg_state);
        self.avg_input.add_assign(&other.avg_input);
    }

    fn scaled(&self, s: T) -> Self {
        Self {
            agent_states: self.agent_states.iter().map(|p| p.scale(s)).collect(),
            agent_inputs: self.agent_inputs.iter().map(|p| p.scale(s)).collect(),
            avg_state: self.avg_state.scale(s),
            avg_input: self.avg_input.scale(s),
        }
    }
}

/// Simulated paths of `M` realizations of the population.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleTrajectories<T> {
    pub grid: TimeGrid<T>,
    pub n: usize,
    pub m: usize,
    pub n_agents: usize,
    pub realizations: usize,
    pub tracked: Vec<usize>,
    /// Average over realizations.
    pub mean: RealizationRecord<T>,
    /// Individual realizations; empty under [`Recording::Mean`].
    pub per_realization: Vec<RealizationRecord<T>>,
}

impl<T: Real> EnsembleTrajectories<T> {
    /// Position of `agent` within the tracked list.
    pub fn tracked_index(&self, agent: usize) -> Result<usize> {
        self.tracked
            .iter()
            .position(|&a| a == agent)
            .ok_or_else(|| Error::InvalidArgument(format!("agent {agent} was not tracked")))
    }
}

/// Inputs applied during the simulation besides the state feedback.
#[derive(Debug, Clone, Copy, Default)]
pub struct Excitation<'a, T> {
    /// Per-agent probing signals; empty for none, otherwise one per agent.
    pub probes: &'a [AgentProbe<T>],
    /// Common open-loop input on the simulation grid, added for every agent.
    pub feedforward: Option<&'a Path<T>>,
}

struct Prepared<T> {
    steps: usize,
    record_len: usize,
    probe_of_agent: Vec<usize>,
    /// `probe_tables[p][k*m + c]` is channel `c` of probe `p` at step `k`.
    probe_tables: Vec<Vec<T>>,
    /// Population average of the probes, laid out like a table.
    probe_mean: Option<Vec<T>>,
}

fn prepare<T: Real>(
    model: &LqgGameModel<T>,
    gain: &Matrix<T>,
    excitation: &Excitation<'_, T>,
    cfg: &SimulationConfig<T>,
) -> Result<Prepared<T>> {
    model.validate()?;
    let (n, m) = (model.n(), model.m());
    if gain.shape() != (m, n) || !gain.is_finite() {
        return Err(Error::dims(
            "feedback gain",
            format!("finite {m}x{n}"),
            format!("{:?}", gain.shape()),
        ));
    }
    if cfg.n_agents == 0 || cfg.realizations == 0 || cfg.stride == 0 {
        return Err(Error::InvalidArgument(
            "n_agents, realizations and stride must be positive".into(),
        ));
    }
    if let Some(&bad) = cfg.tracked.iter().find(|&&a| a >= cfg.n_agents) {
        return Err(Error::InvalidArgument(format!(
            "tracked agent {bad} out of range"
        )));
    }
    let steps = steps_for(cfg.horizon, cfg.dt)?;
    if let Some(ff) = excitation.feedforward {
        if ff.dim != m
            || ff.len() < steps + 1
            || (ff.grid.dt - cfg.dt).abs() > T::tol(1e-9) * cfg.dt
        {
            return Err(Error::GridMismatch(format!(
                "feedforward needs dim {m}, step {} and at least {} samples",
                cfg.dt,
                steps + 1
            )));
        }
    }
    let probes = excitation.probes;
    if !probes.is_empty() && probes.len() != cfg.n_agents {
        return Err(Error::dims("probes", cfg.n_agents, probes.len()));
    }
    let mut distinct: Vec<&AgentProbe<T>> = Vec::new();
    let mut probe_of_agent = Vec::with_capacity(probes.len());
    for p in probes {
        if p.len() != m {
            return Err(Error::dims("probe channels", m, p.len()));
        }
        p.iter().try_for_each(NoiseSpec::validate)?;
        let id = match distinct.iter().position(|q| *q == p) {
            Some(id) => id,
            None => {
                distinct.push(p);
                distinct.len() - 1
            }
        };
        probe_of_agent.push(id);
    }
    let probe_tables = distinct
        .par_iter()
        .map(|p| {
            let channels: Vec<Vec<T>> = p.iter().map(|s| s.sampled(cfg.dt, steps + 1)).collect();
            let mut table = Vec::with_capacity((steps + 1) * m);
            for k in 0..=steps {
                table.extend(channels.iter().map(|c| c[k]));
            }
            table
        })
        .collect::<Vec<Vec<T>>>();
    let probe_mean = (!probes.is_empty()).then(|| {
        let mut counts = vec![0usize; probe_tables.len()];
        probe_of_agent.iter().for_each(|&p| counts[p] += 1);
        let inv = T::one() / T::lit(probes.len() as f64);
        let mut mean = vec![T::zero(); (steps + 1) * m];
        for (table, &c) in probe_tables.iter().zip(&counts) {
            let w = T::lit(c as f64) * inv;
            for (acc, &v) in mean.iter_mut().zip(table) {
                *acc += w * v;
            }
        }
        mean
    });
    Ok(Prepared {
        steps,
        record_len: steps / cfg.stride + 1,
        probe_of_agent,
        probe_tables,
        probe_mean,
    })
}

/// Euler–Maruyama paths of `dxᵢ = (A xᵢ + G x_(N) + B uᵢ) dt + D dwᵢ` with
/// `uᵢ = −K xᵢ + ℓᵢ(t) + f(t)`.
///
/// Agent `i` of realization `r` draws its initial state and then its
/// Brownian increments from a ChaCha stream keyed by `(seed, r, i)`.
pub fn simulate_population<T: Real>(
    model: &LqgGameModel<T>,
    gain: &Matrix<T>,
    excitation: Excitation<'_, T>,
    cfg: &SimulationConfig<T>,
) -> Result<EnsembleTrajectories<T>> {
    let prep = prepare(model, gain, &excitation, cfg)?;
    let grid = TimeGrid::new(
        T::zero(),
        cfg.dt * T::lit(cfg.stride as f64),
        prep.record_len,
    )?;
    let (n, m) = (model.n(), model.m());
    let realizations: Vec<usize> = (0..cfg.realizations).collect();
    let chunks: Vec<(RealizationRecord<T>, Vec<RealizationRecord<T>>)> = realizations
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut sum = RealizationRecord::zeros(grid, cfg.tracked.len(), n, m);
            let mut kept = Vec::new();
            for &r in chunk {
                let rec = simulate_realization(model, gain, &excitation, cfg, &prep, grid, r)?;
                sum.add_assign(&rec);
                if cfg.recording == Recording::Full {
                    kept.push(rec);
                }
            }
            Ok((sum, kept))
        })
        .collect::<Result<_>>()?;
    let mut total = RealizationRecord::zeros(grid, cfg.tracked.len(), n, m);
    let mut per_realization = Vec::new();
    for (sum, kept) in chunks {
        total.add_assign(&sum);
        per_realization.extend(kept);
    }
    Ok(EnsembleTrajectories {
        grid,
        n,
        m,
        n_agents: cfg.n_agents,
        realizations: cfg.realizations,
        tracked: cfg.tracked.clone(),
        mean: total.scaled(T::one() / T::lit(cfg.realizations as f64)),
        per_realization,
    })
}

pub(crate) fn agent_rng(seed: u64, realization: usize, agent: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((realization as u64) << 32) | agent as u64);
    rng
}

/// Row-major coefficients of the update `x ← M x + c + B_h ℓ + D_h z` with
/// `M = I + (A − BK)dt`, `B_h = B dt`, `D_h = D √dt` and `z` standard normal.
struct Kernel<T> {
    n: usize,
    m: usize,
    d: usize,
    step_matrix: Vec<T>,
    b_dt: Vec<T>,
    d_sqrt: Vec<T>,
}

impl<T: Real> Kernel<T> {
    fn new(model: &LqgGameModel<T>, gain: &Matrix<T>, dt: T) -> Self {
        let closed = &model.a - &(&model.b * gain);
        let step = &Matrix::identity(model.n()) + &closed.scale(dt);
        Self {
            n: model.n(),
            m: model.m(),
            d: model.noise_dim(),
            step_matrix: step.as_slice().to_vec(),
            b_dt: model.b.scale(dt).as_slice().to_vec(),
            d_sqrt: model.d.scale(dt.sqrt()).as_slice().to_vec(),
        }
    }

    /// Advances every agent one step and accumulates the new states in `sum`.
    /// `n` is passed separately so that callers can fix it at compile time.
    #[inline(always)]
    fn advance(
        &self,
        n: usize,
        x: &mut [T],
        rngs: &mut [ChaCha8Rng],
        offset: &[T],
        probes: Probes<'_, T>,
        sum: &mut [T],
    ) {
        let (m, d) = (self.m, self.d);
        let (sm, bh, dh) = (
            &self.step_matrix[..n * n],
            &self.b_dt[..n * m],
            &self.d_sqrt[..n * d],
        );
        let mut z = [T::zero(); MAX_SMALL];
        let mut z_heap = vec![T::zero(); if d > MAX_SMALL { d } else { 0 }];
        let mut next = [T::zero(); MAX_SMALL];
        let mut next_heap = vec![T::zero(); if n > MAX_SMALL { n } else { 0 }];
        sum.iter_mut().for_each(|v| *v = T::zero());
        for (i, (xi, rng)) in x.chunks_exact_mut(n).zip(rngs.iter_mut()).enumerate() {
            let z = if d > MAX_SMALL {
                &mut z_heap[..]
            } else {
                &mut z[..d]
            };
            for zj in z.iter_mut() {
                *zj = T::lit(rng.sample::<f64, _>(StandardNormal));
            }
            let next = if n > MAX_SMALL {
                &mut next_heap[..]
            } else {
                &mut next[..n]
            };
            let p = probes.at(i);
            for row in 0..n {
                let mut s = offset[row];
                for c in 0..n {
                    s += sm[row * n + c] * xi[c];
                }
                if let Some(p) = p {
                    for j in 0..m {
                        s += bh[row * m + j] * p[j];
                    }
                }
                for e in 0..d {
                    s += dh[row * d + e] * z[e];
                }
                next[row] = s;
            }
            xi.copy_from_slice(next);
            for (acc, &v) in sum.iter_mut().zip(next.iter()) {
                *acc += v;
            }
        }
    }

    fn advance_all(
        &self,
        x: &mut [T],
        rngs: &mut [ChaCha8Rng],
        offset: &[T],
        probes: Probes<'_, T>,
        sum: &mut [T],
    ) {
        match self.n {
            1 => self.advance(1, x, rngs, offset, probes, sum),
            2 => self.advance(2, x, rngs, offset, probes, sum),
            3 => self.advance(3, x, rngs, offset, probes, sum),
            4 => self.advance(4, x, rngs, offset, probes, sum),
            n => self.advance(n, x, rngs, offset, probes, sum),
        }
    }
}

const MAX_SMALL: usize = 8;

/// Probe values of every agent at one step.
#[derive(Clone, Copy)]
struct Probes<'a, T> {
    prep: &'a Prepared<T>,
    step: usize,
    m: usize,
}

impl<'a, T> Probes<'a, T> {
    #[inline(always)]
    fn at(&self, agent: usize) -> Option<&'a [T]> {
        let p = *self.prep.probe_of_agent.get(agent)?;
        Some(&self.prep.probe_tables[p][self.step * self.m..(self.step + 1) * self.m])
    }
}

fn simulate_realization<T: Real>(
    model: &LqgGameModel<T>,
    gain: &Matrix<T>,
    excitation: &Excitation<'_, T>,
    cfg: &SimulationConfig<T>,
    prep: &Prepared<T>,
    grid: TimeGrid<T>,
    r: usize,
) -> Result<RealizationRecord<T>> {
    let (n, m) = (model.n(), model.m());
    let na = cfg.n_agents;
    let inv_na = T::one() / T::lit(na as f64);
    let dt = cfg.dt;
    let (b, g) = (model.b.as_slice(), model.g.as_slice());
    let k = gain.as_slice();
    let kernel = Kernel::new(model, gain, dt);

    let mut rngs: Vec<ChaCha8Rng> = (0..na).map(|i| agent_rng(cfg.seed, r, i)).collect();
    let mut x = vec![T::zero(); na * n];
    for (i, rng) in rngs.iter_mut().enumerate() {
        for c in 0..n {
            let [lo, hi] = model.init_box[c];
            x[i * n + c] = lo + (hi - lo) * T::lit(rng.random::<f64>());
        }
    }
    let mut xbar = vec![T::zero(); n];
    let mut sum = vec![T::zero(); n];
    let mut ubar = vec![T::zero(); m];
    let mut u = vec![T::zero(); m];
    let mut offset = vec![T::zero(); n];
    let mut rec = RealizationRecord::zeros(grid, cfg.tracked.len(), n, m);
    for xi in x.chunks_exact(n) {
        for (acc, &v) in sum.iter_mut().zip(xi) {
            *acc += v;
        }
    }
    let feedback = |xi: &[T], extra: &[Option<&[T]>], out: &mut [T]| {
        for (row, o) in out.iter_mut().enumerate() {
            let mut s = T::zero();
            for c in 0..n {
                s -= k[row * n + c] * xi[c];
            }
            for e in extra.iter().flatten() {
                s += e[row];
            }
            *o = s;
        }
    };

    for step in 0..=prep.steps {
        for (xb, &acc) in xbar.iter_mut().zip(&sum) {
            *xb = acc * inv_na;
        }
        if xbar.iter().any(|v| !v.is_finite()) {
            let agent = (0..na)
                .find(|&i| x[i * n..(i + 1) * n].iter().any(|v| !v.is_finite()))
                .unwrap_or(0);
            return Err(Error::NonFiniteState {
                time: (T::lit(step as f64) * dt).as_f64(),
                realization: r,
                agent,
            });
        }
        let ff = excitation.feedforward.map(|p| p.at(step));
        let probes = Probes { prep, step, m };
        if step % cfg.stride == 0 {
            let kk = step / cfg.stride;
            for (slot, &agent) in cfg.tracked.iter().enumerate() {
                feedback(
                    &x[agent * n..(agent + 1) * n],
                    &[probes.at(agent), ff],
                    &mut u,
                );
                rec.agent_states[slot]
                    .at_mut(kk)
                    .copy_from_slice(&x[agent * n..(agent + 1) * n]);
                rec.agent_inputs[slot].at_mut(kk).copy_from_slice(&u);
            }
            let mean_probe = prep
                .probe_mean
                .as_ref()
                .map(|t| &t[step * m..(step + 1) * m]);
            feedback(&xbar, &[mean_probe, ff], &mut ubar);
            rec.avg_state.at_mut(kk).copy_from_slice(&xbar);
            rec.avg_input.at_mut(kk).copy_from_slice(&ubar);
        }
        if step == prep.steps {
            break;
        }
        for (row, o) in offset.iter_mut().enumerate() {
            let mut s = T::zero();
            for c in 0..n {
                s += g[row * n + c] * xbar[c];
            }
            if let Some(f) = ff {
                for j in 0..m {
                    s += b[row * m + j] * f[j];
                }
            }
            *o = s * dt;
        }
        kernel.advance_all(&mut x, &mut rngs, &offset, probes, &mut sum);
    }
    Ok(rec)
}
