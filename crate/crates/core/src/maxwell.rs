//! Electrostatic Klein-Gordon-Maxwell reduction.
//!
//! With the ansatz `A = 0`, `∂_t φ = 0` the Maxwell sector collapses to one
//! linear elliptic equation for the ω-normalized potential `Φ_u`:
//!
//! ```text
//! -ΔΦ_u + q² u² Φ_u = q u²,        φ = ω Φ_u
//! ```
//!
//! which on the radial mesh is a tridiagonal solve. The screened charge
//! functional is `K_q(u) = ½∫(1 - qΦ_u) u² dx` and its gradient has the
//! closed form `(1 - qΦ_u)² u`: the Φ-sensitivity drops because `Φ_u` is the
//! stationary point of the gauge energy. The discrete operator is an
//! M-matrix, so `0 <= qΦ_u < 1` holds exactly; a violation is a hard failure,
//! never clipped.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::functionals::FunctionalContext;
use crate::grid::{Field, RadialGrid};
use crate::minimizer::{minimize, MinimizeConfig, SolutionRecord};

/// Solved gauge potential `Φ_u` with its coupling and source mass.
#[derive(Debug, Clone)]
pub struct GaugeProfile {
    phi_cap: Field,
    q: f64,
    source_norm: f64,
}

impl GaugeProfile {
    /// The ω-normalized potential `Φ_u`.
    pub fn phi_cap(&self) -> &Field {
        &self.phi_cap
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `∫u² dx` of the source.
    pub fn source_norm(&self) -> f64 {
        self.source_norm
    }

    pub fn max_q_phi(&self) -> f64 {
        self.q * self.phi_cap.max()
    }

    /// The physical potential `φ = ω Φ_u`.
    pub fn phi(&self, omega: f64) -> Field {
        let mut f = self.phi_cap.clone();
        for v in f.values_mut() {
            *v *= omega;
        }
        f
    }
}

/// Direct tridiagonal solve of `(-Δ + q²u²) Φ = q u²` with Dirichlet data at
/// `r_max`. The operator is strictly positive definite for any `u`, so the
/// solution exists and is unique; the maximum principle pins `0 <= qΦ < 1`.
pub fn solve_phi(grid: &Arc<RadialGrid>, u: &Field, q: f64) -> Result<GaugeProfile> {
    if !(q > 0.0) {
        return Err(Error::Precondition(format!("solve_phi needs q > 0, got {q}")));
    }
    if grid.dim() != 3 {
        return Err(Error::Precondition("the electrostatic reduction is three-dimensional".into()));
    }
    grid.check(u)?;
    let uu: Vec<f64> = u.values().iter().map(|&s| s * s).collect();
    let op = grid.assemble(|i| q * q * uu[i]);
    let rhs: Vec<f64> = uu.iter().map(|&s| q * s).collect();
    let phi = op.solve(&rhs);
    for (i, &p) in phi.iter().enumerate() {
        let qp = q * p;
        assert!(
            (0.0..1.0).contains(&qp) || qp == 0.0,
            "gauge bound violated at node {i}: qPhi = {qp}"
        );
    }
    let phi_cap = Field::new(grid.clone(), phi)?;
    Ok(GaugeProfile {
        phi_cap,
        q,
        source_norm: grid.pairing(u.values(), u.values()),
    })
}

/// `K_q(u) = ½∫(1 - qΦ_u) u² dx`, with a fresh gauge solve.
pub fn k_q(ctx: &FunctionalContext, u: &Field) -> Result<f64> {
    let gauge = solve_phi(ctx.grid(), u, ctx.coupling_q())?;
    Ok(k_q_with(ctx, u, &gauge))
}

pub(crate) fn k_q_with(ctx: &FunctionalContext, u: &Field, gauge: &GaugeProfile) -> f64 {
    let q = gauge.q();
    let grid = ctx.grid();
    0.5 * grid
        .weights()
        .iter()
        .zip(u.values().iter().zip(gauge.phi_cap.values()))
        .map(|(w, (&uv, &p))| w * (1.0 - q * p) * (uv * uv))
        .sum::<f64>()
}

/// Exact gradient of the discrete `K_q`: the dual field `(1 - qΦ_u)² u`.
pub fn grad_k_q(ctx: &FunctionalContext, u: &Field) -> Result<Field> {
    let gauge = solve_phi(ctx.grid(), u, ctx.coupling_q())?;
    let q = gauge.q();
    let values = u
        .values()
        .iter()
        .zip(gauge.phi_cap.values())
        .map(|(&uv, &p)| {
            let f = 1.0 - q * p;
            f * f * uv
        })
        .collect();
    Field::new(ctx.grid().clone(), values)
}

/// Relative defect of the gauge-shell energy identity
/// `∫|∇φ_u|² = ∫ q φ_u Ω u²` with `Ω = ω(1 - qΦ_u)`; vanishes to solver
/// precision at the solved `Φ_u` for any `ω`.
pub fn gauge_energy_defect(grid: &RadialGrid, gauge: &GaugeProfile, u: &Field) -> f64 {
    let p = gauge.phi_cap.values();
    let q = gauge.q();
    let lhs = grid.dirichlet_form(p, p);
    let rhs: f64 = grid
        .weights()
        .iter()
        .zip(p.iter().zip(u.values()))
        .map(|(w, (&phi, &uv))| w * q * phi * (1.0 - q * phi) * (uv * uv))
        .sum();
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
}

/// Converged electrostatic bound state.
#[derive(Debug)]
pub struct CoupledSolution {
    pub record: SolutionRecord,
    pub gauge: GaugeProfile,
    /// L² residual of the matter equation `-Δu + W'(u) = (ω - qφ)² u`.
    pub residual_u: f64,
    /// L² residual of the gauge equation `-Δφ = q(ω - qφ) u²`.
    pub residual_phi: f64,
    pub max_q_phi: f64,
}

/// Minimizes the reduced energy with `K` replaced by `K_q` (the context's
/// coupling does the dispatch), then reconstructs `φ = ωΦ_u` and checks both
/// field equations of the electrostatic system.
pub fn coupled_minimize(ctx: &FunctionalContext, config: &MinimizeConfig) -> Result<CoupledSolution> {
    let q = ctx.coupling_q();
    if !(q > 0.0) {
        return Err(Error::Precondition("coupled_minimize needs coupling_q > 0".into()));
    }
    let record = minimize(ctx, config)?;
    let grid = ctx.grid();
    let gauge = solve_phi(grid, &record.u, q)?;
    let omega = record.omega;

    // Matter residual: the dual field L1 u + N'(u) - ω²(1 - qΦ)² u, which is
    // exactly the discretization of -Δu + W'(u) - (ω - qφ)² u.
    let gj = ctx.grad_j(&record.u)?;
    let gk = grad_k_q(ctx, &record.u)?;
    let res_u: Vec<f64> = gj
        .values()
        .iter()
        .zip(gk.values())
        .map(|(a, b)| a - omega * omega * b)
        .collect();
    let residual_u = grid.norm_l2(&res_u);

    // Gauge residual of -Δφ + q²u²φ - qω u² = 0 at φ = ωΦ.
    let uu: Vec<f64> = record.u.values().iter().map(|&s| s * s).collect();
    let op = grid.assemble(|i| q * q * uu[i]);
    let phi = gauge.phi(omega);
    let applied = op.apply(phi.values());
    let res_phi: Vec<f64> = applied
        .iter()
        .zip(&uu)
        .map(|(a, s)| a - q * omega * s)
        .collect();
    let residual_phi = grid.norm_l2(&res_phi);

    Ok(CoupledSolution {
        max_q_phi: gauge.max_q_phi(),
        residual_u,
        residual_phi,
        gauge,
        record,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{build_test_function, TestFunctionSpec};
    use crate::functionals::FunctionalContext;
    use crate::potential::builtin_wref;
    use approx::assert_relative_eq;
    use rand::prelude::*;

    fn grid3() -> Arc<RadialGrid> {
        RadialGrid::new(3, 0, 20.0, 1000).unwrap()
    }

    #[test]
    fn zero_source_gives_zero_potential() {
        let g = grid3();
        let u = Field::zeros(g.clone());
        let gauge = solve_phi(&g, &u, 0.1).unwrap();
        assert!(gauge.phi_cap().values().iter().all(|&p| p == 0.0));
        assert_eq!(gauge.source_norm(), 0.0);
    }

    #[test]
    fn gauge_bound_on_random_sources() {
        let g = grid3();
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..20 {
            let (a, w, c) = (
                rng.gen_range(0.1..3.0),
                rng.gen_range(0.1..1.0),
                rng.gen_range(0.0..8.0),
            );
            let u = Field::from_fn(g.clone(), |r| a * (-w * (r - c) * (r - c)).exp());
            for q in [1e-3, 1e-2, 1e-1, 1.0] {
                let gauge = solve_phi(&g, &u, q).unwrap();
                assert!(gauge.max_q_phi() < 1.0);
                assert!(gauge.phi_cap().values().iter().all(|&p| p >= 0.0));
            }
        }
    }

    #[test]
    fn small_q_linear_response() {
        let g = grid3();
        let u = build_test_function(&g, &TestFunctionSpec::ball(8.0, 1.0)).unwrap();
        let p1 = solve_phi(&g, &u, 1e-3).unwrap();
        let p2 = solve_phi(&g, &u, 5e-4).unwrap();
        let m1 = p1.phi_cap().max();
        let m2 = p2.phi_cap().max();
        assert_relative_eq!(m1, 2.0 * m2, max_relative = 5e-2);
    }

    #[test]
    fn k_q_bounded_by_uncoupled_charge() {
        let g = grid3();
        let u = build_test_function(&g, &TestFunctionSpec::ball(8.0, 1.0)).unwrap();
        let k0 = 0.5 * g.pairing(u.values(), u.values());
        for q in [1e-3, 1e-2, 1e-1] {
            let ctx = FunctionalContext::new(g.clone(), builtin_wref(), q).unwrap();
            let kq = k_q(&ctx, &u).unwrap();
            assert!(kq >= 0.0 && kq <= k0, "q = {q}: K_q = {kq}, K0 = {k0}");
        }
    }

    #[test]
    fn charge_correction_scales_quadratically() {
        // K0 - K_q = (q/2)∫Φ u² behaves like q² for small q: the correction
        // at q versus q/2 shrinks by ~4.
        let g = grid3();
        let u = build_test_function(&g, &TestFunctionSpec::ball(8.0, 1.0)).unwrap();
        let k0 = 0.5 * g.pairing(u.values(), u.values());
        let corr = |q: f64| {
            let ctx = FunctionalContext::new(g.clone(), builtin_wref(), q).unwrap();
            k0 - k_q(&ctx, &u).unwrap()
        };
        let ratio = corr(1e-3) / corr(5e-4);
        assert!((3.5..=4.5).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn grad_k_q_matches_central_differences() {
        let g = RadialGrid::new(3, 0, 16.0, 400).unwrap();
        let ctx = FunctionalContext::new(g.clone(), builtin_wref(), 0.05).unwrap();
        let u = build_test_function(&g, &TestFunctionSpec::ball(6.0, 1.0)).unwrap();
        let mut rng = StdRng::seed_from_u64(23);
        let eps = 1e-5;
        for _ in 0..5 {
            let (a, w, c) = (
                rng.gen_range(0.2..1.0),
                rng.gen_range(0.2..1.0),
                rng.gen_range(0.0..6.0),
            );
            let v = Field::from_fn(g.clone(), |r| a * (-w * (r - c) * (r - c)).exp());
            let gk = grad_k_q(&ctx, &u).unwrap();
            let lhs = g.pairing(gk.values(), v.values());
            let fd = (k_q(&ctx, &u.axpy(eps, &v)).unwrap() - k_q(&ctx, &u.axpy(-eps, &v)).unwrap())
                / (2.0 * eps);
            assert_relative_eq!(lhs, fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn gauge_shell_energy_identity() {
        let g = grid3();
        let u = build_test_function(&g, &TestFunctionSpec::ball(8.0, 1.0)).unwrap();
        for q in [1e-2, 1e-1] {
            let gauge = solve_phi(&g, &u, q).unwrap();
            assert!(gauge_energy_defect(&g, &gauge, &u) < 1e-8);
        }
    }

    #[test]
    fn coupled_minimize_smoke() {
        let g = RadialGrid::new(3, 0, 24.0, 1200).unwrap();
        let ctx = FunctionalContext::new(g.clone(), builtin_wref(), 1e-3).unwrap();
        let config = MinimizeConfig::new(800.0);
        let sol = coupled_minimize(&ctx, &config).unwrap();
        assert!(sol.record.residual < config.tol_residual);
        assert!(sol.residual_u < 10.0 * config.tol_residual);
        assert!(sol.residual_phi < 1e-10);
        assert!(sol.max_q_phi < 1.0);
        assert!(sol.record.omega > 0.0 && sol.record.omega < 1.0);
        assert_relative_eq!(sol.record.charge, 800.0, max_relative = 1e-10);
        assert!((sol.record.multiplier - 2.0 * sol.record.omega).abs() <= 1e-6 * sol.record.omega);
    }
}
