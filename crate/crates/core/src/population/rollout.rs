//! Closed-loop population under the equilibrium strategy.

use super::path::Path;
use super::simulate::{simulate_population, EnsembleTrajectories, Excitation, SimulationConfig};
use crate::error::{Error, Result};
use crate::model::LqgGameModel;
use crate::numkit::Matrix;
use crate::scalar::Real;

/// Simulates `uᵢ = −K₁ xᵢ − (K₂ − K₁) x̄*(t)` for every agent.
///
/// `mean_field` must be sampled at the simulation step and cover the horizon.
pub fn rollout_equilibrium<T: Real>(
    model: &LqgGameModel<T>,
    k1: &Matrix<T>,
    k2: &Matrix<T>,
    mean_field: &Path<T>,
    cfg: &SimulationConfig<T>,
) -> Result<EnsembleTrajectories<T>> {
    if !k1.is_finite() || !k2.is_finite() || k1.shape() != k2.shape() {
        return Err(Error::InvalidArgument(
            "rollout gains must be finite and of equal shape".into(),
        ));
    }
    if mean_field.dim != model.n() {
        return Err(Error::dims("mean_field", model.n(), mean_field.dim));
    }
    let dk = k2 - k1;
    let mut data = Vec::with_capacity(mean_field.len() * model.m());
    for t in 0..mean_field.len() {
        data.extend(dk.matvec(mean_field.at(t)).into_iter().map(|v| -v));
    }
    let ff = Path::new(mean_field.grid, model.m(), data)?;
    simulate_population(
        model,
        k1,
        Excitation {
            probes: &[],
            feedforward: Some(&ff),
        },
        cfg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{expm, riccati};
    use crate::population::path::TimeGrid;

    #[test]
    fn noise_free_rollout_follows_mean_field() {
        let mut model = crate::model::fixtures::example1();
        model.d = Matrix::zeros(2, 2);
        model.init_box = vec![[1.0, 1.0], [1.0, 1.0]];
        let k1 = riccati::kleinman_solve(
            &model.a,
            &model.b,
            &model.q,
            &model.r,
            model.rho,
            &Matrix::from_f64_rows(&[[35.0, 25.0]]).unwrap(),
            1e-10,
            50,
        )
        .unwrap()
        .last()
        .k
        .clone();
        let h2 = riccati::hamiltonian(&model, riccati::HamiltonianKind::H2).unwrap();
        let p12 = riccati::stable_graph_solution(&h2).unwrap();
        let k2 = model.r.solve(&(&model.b.transpose() * &p12)).unwrap();
        let cl = &model.a_plus_g() - &(&model.b * &k2);
        let dt = 1e-4;
        let grid = TimeGrid::covering(0.5, dt).unwrap();
        let xbar = Path::from_fn(grid, 2, |t| {
            expm(&cl.scale(t)).unwrap().matvec(&model.init_mean)
        })
        .unwrap();
        let cfg = SimulationConfig::new(4, 0.5, dt, 3, 1);
        let ens = rollout_equilibrium(&model, &k1, &k2, &xbar, &cfg).unwrap();
        let peak = (0..grid.len)
            .map(|k| xbar.at(k)[0].abs().max(xbar.at(k)[1].abs()))
            .fold(0.0, f64::max);
        for k in 0..grid.len {
            for c in 0..2 {
                assert!((ens.mean.avg_state.at(k)[c] - xbar.at(k)[c]).abs() < 1e-2 * peak.max(1.0));
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let model = crate::model::fixtures::example1();
        let grid = TimeGrid::covering(0.1, 0.01).unwrap();
        let cfg = SimulationConfig::new(2, 0.1, 0.01, 0, 1);
        let k = Matrix::zeros(1, 2);
        let nan = Matrix::from_f64_rows(&[[f64::NAN, 0.0]]).unwrap();
        assert!(rollout_equilibrium(&model, &k, &nan, &Path::zeros(grid, 2), &cfg).is_err());
        assert!(rollout_equilibrium(&model, &k, &k, &Path::zeros(grid, 3), &cfg).is_err());
    }
}
