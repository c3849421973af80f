//! Reference problems: the two worked examples and seeded random systems
//! with noise-free expectation data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datapipe::{build_regression_data, Quadrature, RegressionData, SamplingPlan};
use crate::error::Result;
use crate::model::LqgGameModel;
use crate::numkit::{hamiltonian, spectral, stable_graph_solution, HamiltonianKind, Matrix};
use crate::population::{
    exact_expectation_paths, AgentProbe, ExpectationPaths, NoiseSampler, NoiseSpec, TimeGrid,
};

fn rows<const C: usize>(r: &[[f64; C]]) -> Matrix<f64> {
    Matrix::from_f64_rows(r).expect("literal rows")
}

/// Two-dimensional example with unstable `A`, `K₁⁰ = [35, 25]`.
pub fn example1() -> LqgGameModel<f64> {
    LqgGameModel {
        a: rows(&[[5.0, 3.0], [10.0, 12.0]]),
        b: rows(&[[0.0], [1.0]]),
        g: rows(&[[1.0, 2.0], [3.0, 5.0]]),
        d: rows(&[[0.1, 0.1], [0.1, 0.1]]),
        q: Matrix::identity(2),
        r: rows(&[[0.01]]),
        gamma: rows(&[[1.0, 1.0], [2.0, 1.0]]),
        rho: 0.01,
        init_mean: vec![1.0, 1.0],
        init_box: vec![[0.0, 2.0], [-1.0, 3.0]],
    }
}

pub fn example1_k0() -> Matrix<f64> {
    rows(&[[35.0, 25.0]])
}

/// Four-dimensional example with `G = −0.9 I`, `Γ = 0.9 I`, `K₁⁰ = 0`.
pub fn example2() -> LqgGameModel<f64> {
    let eye = Matrix::<f64>::identity(4);
    LqgGameModel {
        a: rows(&[
            [-5.0, 1.0, 0.0, 1.0],
            [2.0, -4.0, 1.5, 0.0],
            [0.0, 0.0, -2.5, 1.0],
            [1.0, 0.0, 1.0, -5.0],
        ]),
        b: rows(&[[0.0], [0.0], [0.0], [1.0]]),
        g: eye.scale(-0.9),
        d: rows(&[[0.0], [0.0], [0.0], [0.01]]),
        q: eye.scale(50.0),
        r: rows(&[[0.1]]),
        gamma: eye.scale(0.9),
        rho: 0.1,
        init_mean: vec![5.0; 4],
        init_box: vec![[0.0, 10.0]; 4],
    }
}

/// Sinusoid distribution of both examples.
pub fn example_sampler() -> NoiseSampler {
    NoiseSampler {
        amplitude_range: [1.0, 10.0],
        frequency_range: [-100.0, 100.0],
        count: 100,
    }
}

/// Which structure a random system has.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomKind {
    /// Arbitrary `G` and `Γ`.
    General,
    /// `G = αI`, `Γ = βI`.
    Scalar,
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn random_matrix(rng: &mut impl Rng, r: usize, c: usize, lo: f64, hi: f64) -> Matrix<f64> {
    let data = (0..r * c).map(|_| uniform(rng, lo, hi)).collect();
    Matrix::from_vec(r, c, data).expect("shape")
}

/// Noise-free random game with `K = 0` admissible: `A` and `A + G` have
/// spectra left of `ρ/2 − 0.3`, and the feedforward Hamiltonian has a
/// stable graph subspace (draws without one are rejected).
pub fn random_system(seed: u64, n: usize, m: usize, kind: RandomKind) -> LqgGameModel<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for stream in 1.. {
        let model = draw_system(&mut rng, n, m, kind);
        let h2 = hamiltonian(&model, HamiltonianKind::H2).expect("hamiltonian");
        if stable_graph_solution(&h2).is_ok() {
            return model;
        }
        rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
    }
    unreachable!("stream counter overflow")
}

fn draw_system(rng: &mut ChaCha8Rng, n: usize, m: usize, kind: RandomKind) -> LqgGameModel<f64> {
    let rho = uniform(rng, 0.05, 0.5);
    let stable_shift = |rng: &mut ChaCha8Rng, x: Matrix<f64>| {
        let margin = spectral(&x, 0.0).expect("spectrum").stability_margin;
        let target = rho / 2.0 - uniform(rng, 0.3, 1.5);
        &x - &Matrix::identity(n).scale(margin - target)
    };
    let a0 = random_matrix(rng, n, n, -2.0, 2.0);
    let a = stable_shift(rng, a0);
    let b = random_matrix(rng, n, m, -1.0, 1.0);
    let (g, gamma) = match kind {
        RandomKind::General => {
            let g0 = random_matrix(rng, n, n, -0.5, 0.5);
            let ag = stable_shift(rng, &a + &g0);
            (&ag - &a, random_matrix(rng, n, n, -0.5, 1.0))
        }
        RandomKind::Scalar => {
            let alpha = uniform(rng, -1.0, 0.0);
            let beta = uniform(rng, 0.3, 0.95);
            (
                Matrix::identity(n).scale(alpha),
                Matrix::identity(n).scale(beta),
            )
        }
    };
    let l = random_matrix(rng, n, n, -1.0, 1.0);
    let q = &(&l * &l.transpose()) + &Matrix::identity(n).scale(0.5);
    let r = Matrix::diagonal(&(0..m).map(|_| uniform(rng, 0.5, 2.0)).collect::<Vec<_>>());
    let init_mean: Vec<f64> = (0..n).map(|_| uniform(rng, -2.0, 2.0)).collect();
    LqgGameModel {
        a,
        b,
        g,
        d: Matrix::zeros(n, 1),
        q,
        r,
        gamma,
        rho,
        init_box: init_mean.iter().map(|&v| [v, v]).collect(),
        init_mean,
    }
}

/// Smooth multi-sine probe, one channel set per input.
pub fn smooth_probe(seed: u64, m: usize, count: usize) -> AgentProbe<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| NoiseSpec {
            amplitude: uniform(&mut rng, 1.0, 3.0),
            frequencies: (0..count).map(|_| uniform(&mut rng, 0.5, 15.0)).collect(),
        })
        .collect()
}

/// Path step of [`exact_data`]; Simpson and RK4 errors scale as its fourth power.
pub const EXACT_STEP: f64 = 2.5e-4;

/// Noise-free data set of a model: RK4 expectation paths under `u = −K x + ℓ`
/// and Simpson regression matrices on `l` windows of length `0.1` spaced `0.05`.
#[derive(Debug, Clone)]
pub struct ExactData {
    pub paths: ExpectationPaths<f64>,
    pub data: RegressionData<f64>,
}

pub fn exact_data(
    model: &LqgGameModel<f64>,
    k: &Matrix<f64>,
    seed: u64,
    l: usize,
    include_cross: bool,
) -> Result<ExactData> {
    let m = model.m();
    let pi = smooth_probe(seed, m, 8);
    let pj = smooth_probe(seed + 1, m, 8);
    let pa = smooth_probe(seed + 2, m, 8);
    let mut plan = SamplingPlan::new(0.0, l, 0.05, 0.1);
    plan.quadrature = Quadrature::Simpson;
    let grid = TimeGrid::covering(plan.horizon(), EXACT_STEP)?;
    let paths = exact_expectation_paths(model, k, (&pi, &pj), &[pa], grid, 2)?;
    let data = build_regression_data(&paths, &plan, model.rho, include_cross)?;
    Ok(ExactData { paths, data })
}
