//! Built-in verification suite.
//!
//! Every identity and bound the construction promises is checked here at a
//! pinned tolerance, each as an independent criterion with a one-line
//! pass/fail outcome: the multiplier identity `λ = 2ω`, the frequency band,
//! the binding-ratio certificate against a closed-form quadrature oracle,
//! shooting/variational agreement, gradient consistency, the gauge bound
//! `qΦ < 1` and its `q²` charge correction, the unbounded-energy trend for
//! sign-indefinite potentials, vortex diagnostics, boost residual
//! convergence, truncation safety, and openness of the binding charge set.
//!
//! The suite is deterministic: randomized probes draw from a fixed-seed
//! generator. `tol_scale` rescales every tolerance (values below 1 tighten
//! them), which is how tampering is surfaced as a nonzero exit.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::analysis::{
    angular_momentum, boost_residual_max, build_test_function, lorentz_boost,
    nonexistence_sequence, vortex_sup_bound, TestFunctionSpec,
};
use crate::error::Result;
use crate::functionals::FunctionalContext;
use crate::grid::{Field, RadialGrid};
use crate::maxwell::{coupled_minimize, solve_phi};
use crate::minimizer::{estimate_c_hat, minimize, minimize_traced, MinimizeConfig};
use crate::potential::{builtin_wbad, builtin_wref, truncate};
use crate::shooting::{cross_validate, shoot};

/// Reference quadratures for the verification suite: piecewise smooth radial
/// integrands integrated by 5-point Gauss-Legendre panels, exact for
/// polynomials up to degree 9 on each piece. Independent of the mesh
/// quadrature used by the solvers.
pub mod oracle {
    /// 5-point Gauss-Legendre on `[a, b]`.
    pub fn gl5(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        const X: [f64; 5] = [
            -0.906_179_845_938_664,
            -0.538_469_310_105_683_1,
            0.0,
            0.538_469_310_105_683_1,
            0.906_179_845_938_664,
        ];
        const W: [f64; 5] = [
            0.236_926_885_056_189_08,
            0.478_628_670_499_366_47,
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_47,
            0.236_926_885_056_189_08,
        ];
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        half * X.iter().zip(W).map(|(&x, w)| w * f(mid + half * x)).sum::<f64>()
    }

    /// `∫ f dx` over the ball for a radial integrand given on break-point
    /// panels, i.e. `surface_measure · Σ ∫ f(r) r^(dim-1) dr`.
    pub fn radial_integral(dim: usize, breaks: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        let s = crate::grid::surface_measure(dim);
        let mut acc = 0.0;
        for w in breaks.windows(2) {
            acc += gl5(w[0], w[1], |r| f(r) * r.powi(dim as i32 - 1));
        }
        s * acc
    }

    /// The plateau-and-ramp trial profile of radius `radius` and height `s0`.
    pub fn ball_profile(radius: f64, s0: f64) -> impl Fn(f64) -> f64 {
        move |r| {
            if r < radius {
                s0
            } else if r <= radius + 1.0 {
                s0 * (1.0 + radius - r)
            } else {
                0.0
            }
        }
    }

    /// `(∫|∇u_R|², ∫u_R², ∫N(u_R))` for the ball profile, by panel quadrature.
    pub fn ball_integrals(
        dim: usize,
        radius: f64,
        s0: f64,
        n: impl Fn(f64) -> f64,
    ) -> (f64, f64, f64) {
        let u = ball_profile(radius, s0);
        let breaks = [0.0, radius, radius + 1.0];
        let grad2 = radial_integral(dim, &[radius, radius + 1.0], |_| s0 * s0);
        let u2 = radial_integral(dim, &breaks, |r| u(r) * u(r));
        let n_int = radial_integral(dim, &breaks, |r| n(u(r)));
        (grad2, u2, n_int)
    }
}

/// Fixed-seed generator for the randomized probes (SplitMix64).
struct Rng(u64);

impl Rng {
    fn new(seed: u64) -> Self {
        Self(seed)
    }

    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[lo, hi)`.
    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let x = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * x
    }
}

fn bump_field(grid: &Arc<RadialGrid>, rng: &mut Rng, amp: f64) -> Field {
    let params: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.uniform(0.05, amp),
                rng.uniform(0.3, 1.5),
                rng.uniform(0.0, 0.5 * grid.r_max()),
            )
        })
        .collect();
    Field::from_fn(grid.clone(), move |r| {
        params
            .iter()
            .map(|&(a, w, c)| a * (-w * (r - c) * (r - c)).exp())
            .sum()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Fast,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fast" => Some(Suite::Fast),
            "all" => Some(Suite::All),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct AcceptanceConfig {
    /// Multiplies every tolerance; 1.0 is the pinned suite.
    pub tol_scale: f64,
    /// Restrict to these criterion ids (1-based) when non-empty.
    pub only: Vec<usize>,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        Self { tol_scale: 1.0, only: Vec::new() }
    }
}

struct Criterion {
    id: usize,
    name: &'static str,
    fast: bool,
    run: fn(f64) -> Result<(bool, String)>,
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, name: "multiplier-identity", fast: true, run: c01_multiplier },
    Criterion { id: 2, name: "frequency-band", fast: false, run: c02_frequency_band },
    Criterion { id: 3, name: "hylomorphy-certificate", fast: true, run: c03_hylomorphy },
    Criterion { id: 4, name: "oracle-equivalence", fast: false, run: c04_oracle_equivalence },
    Criterion { id: 5, name: "gradient-suites", fast: true, run: c05_gradients },
    Criterion { id: 6, name: "gauge-bound", fast: true, run: c06_gauge_bound },
    Criterion { id: 7, name: "charge-screening-scaling", fast: true, run: c07_q2_scaling },
    Criterion { id: 8, name: "nkgm-consistency", fast: false, run: c08_nkgm_consistency },
    Criterion { id: 9, name: "nonexistence-trend", fast: true, run: c09_nonexistence },
    Criterion { id: 10, name: "vortex", fast: false, run: c10_vortex },
    Criterion { id: 11, name: "boost-residual", fast: true, run: c11_boost },
    Criterion { id: 12, name: "truncation-safety", fast: true, run: c12_truncation },
    Criterion { id: 13, name: "sigma-openness", fast: false, run: c13_openness },
];

/// Runs the suite and returns one outcome per criterion.
pub fn run(suite: Suite, cfg: &AcceptanceConfig) -> Vec<CriterionOutcome> {
    CRITERIA
        .iter()
        .filter(|c| (suite == Suite::All || c.fast) && (cfg.only.is_empty() || cfg.only.contains(&c.id)))
        .map(|c| {
            let start = Instant::now();
            let (passed, detail) = match catch_unwind(AssertUnwindSafe(|| (c.run)(cfg.tol_scale))) {
                Ok(Ok(res)) => res,
                Ok(Err(e)) => (false, format!("error: {e}")),
                Err(_) => (false, "panicked".to_string()),
            };
            CriterionOutcome {
                id: c.id,
                name: c.name.to_string(),
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

pub fn run_default(suite: Suite) -> Vec<CriterionOutcome> {
    run(suite, &AcceptanceConfig::default())
}

fn wref_ctx(r_max: f64, n: usize) -> Result<FunctionalContext> {
    let grid = RadialGrid::new(3, 0, r_max, n)?;
    FunctionalContext::new(grid, builtin_wref(), 0.0)
}

fn bracket_sigma(ctx: &FunctionalContext, radius: f64, omega: f64) -> Result<f64> {
    let u = build_test_function(ctx.grid(), &TestFunctionSpec::ball(radius, 1.0))?;
    ctx.charge(&u, omega)
}

fn c01_multiplier(scale: f64) -> Result<(bool, String)> {
    let ctx = wref_ctx(20.0, 2000)?;
    let sigma = bracket_sigma(&ctx, 10.0, 0.5)?;
    let rec = minimize(&ctx, &MinimizeConfig::new(sigma))?;
    let err = (rec.multiplier - 2.0 * rec.omega).abs() / rec.omega;
    let tol = 1e-6 * scale;
    Ok((
        err < tol,
        format!("|lambda - 2w|/w = {err:.3e} (tol {tol:.1e}), omega = {:.6}", rec.omega),
    ))
}

fn c02_frequency_band(scale: f64) -> Result<(bool, String)> {
    let ctx = wref_ctx(20.0, 2000)?;
    let sigma_star = bracket_sigma(&ctx, 10.0, 0.5)?;
    let c_hat = estimate_c_hat(&ctx)?;
    let band = ctx.grid().rayleigh_min(ctx.potential().m2())?.sqrt() * scale;
    let mut details = Vec::new();
    let mut ok = true;
    for f in [0.6, 0.8, 1.0, 1.2, 1.4] {
        let (rec, _) = minimize_traced(&ctx, &MinimizeConfig::new(f * sigma_star), c_hat)?;
        let inside = rec.omega > 0.0 && rec.omega < band;
        ok &= inside;
        details.push(format!("{:.2}sigma*: omega = {:.4}", f, rec.omega));
    }
    Ok((ok, format!("band sqrt(rayleigh) = {band:.6}; {}", details.join(", "))))
}

fn c03_hylomorphy(scale: f64) -> Result<(bool, String)> {
    let ctx = wref_ctx(16.0, 1600)?;
    let u = build_test_function(ctx.grid(), &TestFunctionSpec::ball(10.0, 1.0))?;
    let grid_ratio = ctx.j(&u)? / ctx.k(&u)?;
    let pot = ctx.potential();
    let (grad2, u2, n_int) = oracle::ball_integrals(3, 10.0, 1.0, |s| pot.n(s));
    let oracle_ratio = (0.5 * grad2 + 0.5 * pot.m2() * u2 + n_int) / (0.5 * u2);
    let agree = (grid_ratio - oracle_ratio).abs() < 5e-3 * scale;
    let anchored = (grid_ratio - 0.31).abs() < 0.02 * scale;
    let bound = grid_ratio < 1.0;
    Ok((
        agree && anchored && bound,
        format!("J/K = {grid_ratio:.5} (grid) vs {oracle_ratio:.5} (oracle), binding requires < 1"),
    ))
}

fn c04_oracle_equivalence(scale: f64) -> Result<(bool, String)> {
    let ctx = wref_ctx(40.0, 4000)?;
    let sigma = bracket_sigma(&ctx, 10.0, 0.5)?;
    let rec = minimize(&ctx, &MinimizeConfig::new(sigma))?;
    let shot = shoot(ctx.potential(), ctx.grid(), rec.omega)?;
    let cv = cross_validate(&ctx, &shot, &rec)?;
    let pass = cv.comparable && cv.l2_distance < 1e-2 * scale && cv.energy_rel_diff < 1e-2 * scale;
    Ok((
        pass,
        format!(
            "L2 distance = {:.3e}, energy diff = {:.3e} at omega = {:.5}",
            cv.l2_distance, cv.energy_rel_diff, rec.omega
        ),
    ))
}

fn c05_gradients(scale: f64) -> Result<(bool, String)> {
    let tol = 1e-5 * scale;
    let eps = 1e-5;
    let grid = RadialGrid::new(3, 0, 16.0, 400)?;
    let ctx0 = FunctionalContext::new(grid.clone(), builtin_wref(), 0.0)?;
    let ctxq = FunctionalContext::new(grid.clone(), builtin_wref(), 0.05)?;
    // Smooth base profile: the check is scaled by ‖g‖‖v‖, so kink-dominated
    // gradients would water it down.
    let u = Field::from_fn(grid.clone(), |r| 0.9 * (-0.1 * r * r).exp());
    let mut rng = Rng::new(0x5EED);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let v = bump_field(&grid, &mut rng, 1.0);
        let nv = grid.norm_l2(v.values());
        for (ctx, which) in [(&ctx0, 0), (&ctx0, 1), (&ctxq, 1), (&ctxq, 0)] {
            let g = if which == 0 { ctx.grad_j(&u)? } else { ctx.grad_k(&u)? };
            let lhs = grid.pairing(g.values(), v.values());
            let up = u.axpy(eps, &v);
            let um = u.axpy(-eps, &v);
            let fd = if which == 0 {
                (ctx.j(&up)? - ctx.j(&um)?) / (2.0 * eps)
            } else {
                (ctx.k(&up)? - ctx.k(&um)?) / (2.0 * eps)
            };
            let denom = fd.abs().max(1e-2 * grid.norm_l2(g.values()) * nv).max(1e-30);
            worst = worst.max((lhs - fd).abs() / denom);
        }
    }
    Ok((worst < tol, format!("worst relative gradient error = {worst:.3e} (tol {tol:.1e})")))
}

fn c06_gauge_bound(scale: f64) -> Result<(bool, String)> {
    let grid = RadialGrid::new(3, 0, 20.0, 1000)?;
    let mut rng = Rng::new(0xCAFE);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let u = bump_field(&grid, &mut rng, 3.0);
        for q in [1e-3, 1e-2, 1e-1] {
            let gauge = solve_phi(&grid, &u, q)?;
            worst = worst.max(gauge.max_q_phi());
        }
    }
    let bound = 1.0 * scale;
    Ok((worst < bound, format!("max qPhi = {worst:.6} over 150 solves (bound {bound})")))
}

fn c07_q2_scaling(scale: f64) -> Result<(bool, String)> {
    let grid = RadialGrid::new(3, 0, 20.0, 1000)?;
    let u = build_test_function(&grid, &TestFunctionSpec::ball(4.0, 1.0))?;
    let mut pts = Vec::new();
    for i in 0..5 {
        let q = 10f64.powf(-3.0 + 2.0 * i as f64 / 4.0);
        let gauge = solve_phi(&grid, &u, q)?;
        let uu: Vec<f64> = u.values().iter().map(|&s| s * s).collect();
        let correction = q * grid.pairing(gauge.phi_cap().values(), &uu);
        pts.push((q.ln(), correction.ln()));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|(x, _)| x).sum();
    let sy: f64 = pts.iter().map(|(_, y)| y).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let tol = 0.1 * scale;
    Ok((
        (slope - 2.0).abs() < tol,
        format!("log-log slope of q∫Phi u² = {slope:.4} (want 2 ± {tol})"),
    ))
}

fn c08_nkgm_consistency(scale: f64) -> Result<(bool, String)> {
    let grid = RadialGrid::new(3, 0, 24.0, 2000)?;
    let sigma = 800.0;
    let ctx0 = FunctionalContext::new(grid.clone(), builtin_wref(), 0.0)?;
    let rec0 = minimize(&ctx0, &MinimizeConfig::new(sigma))?;
    let ctxq = FunctionalContext::new(grid.clone(), builtin_wref(), 1e-6)?;
    let sol = coupled_minimize(&ctxq, &MinimizeConfig::new(sigma))?;
    let diff: Vec<f64> = sol
        .record
        .u
        .values()
        .iter()
        .zip(rec0.u.values())
        .map(|(a, b)| a - b)
        .collect();
    let dist = grid.norm_l2(&diff) / grid.norm_l2(rec0.u.values());
    let pass = dist < 1e-3 * scale
        && sol.residual_u < 1e-7 * scale
        && sol.residual_phi < 1e-7 * scale
        && rec0.residual < 1e-7 * scale;
    Ok((
        pass,
        format!(
            "q->0 distance = {dist:.3e}, residual_u = {:.3e}, residual_phi = {:.3e}",
            sol.residual_u, sol.residual_phi
        ),
    ))
}

fn c09_nonexistence(_scale: f64) -> Result<(bool, String)> {
    let grid = RadialGrid::new(3, 0, 45.0, 2250)?;
    let ctx = FunctionalContext::new(grid, builtin_wbad(), 0.0)?;
    let entries = nonexistence_sequence(&ctx, 100.0, &[5.0, 10.0, 20.0, 40.0])?;
    let e: Vec<f64> = entries.iter().map(|x| x.energy).collect();
    let decreasing = e[2] < e[1] && e[3] < e[2];
    let negative = e[3] < 0.0;
    Ok((
        decreasing && negative,
        format!("E(Psi_R) = [{:.1}, {:.1}, {:.1}, {:.1}]", e[0], e[1], e[2], e[3]),
    ))
}

fn c10_vortex(scale: f64) -> Result<(bool, String)> {
    let grid = RadialGrid::new(2, 1, 40.0, 4000)?;
    let ctx = FunctionalContext::new(grid.clone(), builtin_wref(), 0.0)?;
    let u0 = build_test_function(&grid, &TestFunctionSpec::annulus(10.0, 1.0))?;
    let sigma = ctx.charge(&u0, 0.5)?;
    let rec = minimize(&ctx, &MinimizeConfig::new(sigma))?;

    let residual_ok = rec.residual < 1e-7 * scale;
    let origin_ok = rec.u.values()[0].abs() < 0.05 * rec.u.max() * scale.max(1e-6);

    // Angular momentum against an independent compensated quadrature.
    let m = angular_momentum(&rec.u, rec.omega);
    let mut sum = 0.0;
    let mut comp = 0.0;
    for (w, &uv) in grid.weights().iter().zip(rec.u.values()) {
        let term = w * uv * uv;
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    let m_ind = -rec.omega * 1.0 * sum;
    let m_err = (m[2] - m_ind).abs() / m_ind.abs();
    let m_ok = m_err < 1e-10 * scale;

    let (lhs, rhs) = vortex_sup_bound(&rec.u)?;
    let bound_ok = lhs <= rhs * (1.0 + 1e-9);

    Ok((
        residual_ok && origin_ok && m_ok && bound_ok,
        format!(
            "residual = {:.3e}, u(r1)/max = {:.3e}, M_z err = {m_err:.3e}, sup bound {lhs:.4} <= {rhs:.4}",
            rec.residual,
            rec.u.values()[0] / rec.u.max()
        ),
    ))
}

fn c11_boost(scale: f64) -> Result<(bool, String)> {
    let grid = RadialGrid::new(3, 0, 30.0, 3000)?;
    let pot = builtin_wref();
    let shot = shoot(&pot, &grid, 0.9)?;
    let wave = lorentz_boost(&shot.profile, 0.9, 0.6)?;

    let mut points = Vec::new();
    for &t in &[0.1, 0.35] {
        for i in 0..9 {
            let x1 = -4.0 + i as f64;
            for &x2 in &[0.0, 1.3] {
                for &x3 in &[0.0, 1.3] {
                    points.push((t, [x1, x2, x3]));
                }
            }
        }
    }
    let r1 = boost_residual_max(&wave, &pot, 0.4, &points);
    let r2 = boost_residual_max(&wave, &pot, 0.2, &points);
    let factor = r1 / r2;
    let factor_ok = (factor - 4.0).abs() < 0.5 * scale;
    let disp = (wave.spec.dispersion() - 0.9 * 0.9).abs();
    let disp_ok = disp < 1e-12 * scale;
    Ok((
        factor_ok && disp_ok,
        format!("residual factor on halving = {factor:.3} (want 4 ± {:.2}), dispersion defect = {disp:.2e}", 0.5 * scale),
    ))
}

fn c12_truncation(scale: f64) -> Result<(bool, String)> {
    // Coarser mesh: the paired solves are driven well below the coincidence
    // tolerance, which needs the residual noise floor out of the way.
    let ctx = wref_ctx(20.0, 1000)?;
    let sigma = bracket_sigma(&ctx, 8.0, 0.5)?;
    let mut config = MinimizeConfig::new(sigma);
    config.tol_residual = 5e-10;
    let rec_plain = minimize(&ctx, &config)?;

    let trunc = truncate(ctx.potential(), 1.5)?;
    let ctx_t = ctx.with_potential(trunc);
    let rec_trunc = minimize(&ctx_t, &config)?;

    let max_u = rec_trunc.u.max();
    let below_cap = max_u <= 1.5 + 1e-6 * scale;
    let linf = rec_plain
        .u
        .values()
        .iter()
        .zip(rec_trunc.u.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    let coincide = if rec_trunc.u.max() < 1.5 { linf <= 1e-8 * scale } else { true };
    Ok((
        below_cap && coincide,
        format!("max u = {max_u:.6} (cap 1.5), Linf(trunc - plain) = {linf:.3e}"),
    ))
}

fn c13_openness(scale: f64) -> Result<(bool, String)> {
    let ctx = wref_ctx(40.0, 2000)?;
    let sigma_star = bracket_sigma(&ctx, 20.0, 0.45)?;
    let c_hat = estimate_c_hat(&ctx)?;
    let (center, _) = minimize_traced(&ctx, &MinimizeConfig::new(sigma_star), c_hat)?;
    let margin = 0.05 * c_hat;
    if !(center.lambda_ratio < c_hat - margin) {
        return Ok((
            false,
            format!(
                "hypothesis failed: lambda = {:.4} not below c_hat - margin = {:.4}",
                center.lambda_ratio,
                c_hat - margin
            ),
        ));
    }
    let mut ok = true;
    let mut lams = Vec::new();
    for f in [0.99, 1.01] {
        let (rec, _) = minimize_traced(&ctx, &MinimizeConfig::new(f * sigma_star), c_hat)?;
        ok &= rec.lambda_ratio < c_hat * scale.max(1e-6);
        lams.push(format!("{f:.2}sigma*: lambda = {:.4}", rec.lambda_ratio));
    }
    Ok((
        ok,
        format!("c_hat = {c_hat:.4}, center lambda = {:.4}; {}", center.lambda_ratio, lams.join(", ")),
    ))
}
