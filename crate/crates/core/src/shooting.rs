//! Independent shooting oracle for the standing-wave profile equation
//!
//! ```text
//! u'' + (dim-1)/r u' = W'(u) + (ell²/r²) u - ω² u
//! ```
//!
//! integrated outward by RK4 from the regular series expansion at the
//! origin, with bisection on the launch parameter (`u(0)` for `ell = 0`,
//! the `r^|ell|` coefficient otherwise). The ground-state separatrix lies
//! between launches whose trajectories cross zero and launches that turn
//! back up, so the bisection rejects nodal excited states by construction.
//!
//! In finite precision the separatrix can only be tracked until the
//! unstable mode (growing like `e^{+κr}`, `κ = sqrt(m²-ω²)`) amplifies the
//! bisection gap; past that breakdown point the tail is continued with the
//! matched linear asymptotics `u ∝ r^{-(dim-1)/2} e^{-κr}`, which for
//! dim 3 is the exact Yukawa decay of the linearized equation.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::functionals::FunctionalContext;
use crate::grid::{Field, RadialGrid};
use crate::minimizer::SolutionRecord;
use crate::potential::PotentialSpec;

/// RK4 substeps per grid cell.
const N_SUB: usize = 4;
const MAX_BISECTIONS: usize = 200;

/// Converged shooting profile with its diagnostics.
#[derive(Debug, Clone)]
pub struct ShootResult {
    pub profile: Field,
    pub omega: f64,
    /// `u(0)` for `ell = 0`, the leading `r^|ell|` coefficient otherwise.
    pub shoot_param: f64,
    /// Fitted tail decay exponent; near `sqrt(m² - ω²)` for a true profile.
    pub decay_rate: f64,
    /// Max pointwise defect of the profile equation over the clean interior,
    /// measured with fourth-order stencils.
    pub residual: f64,
    pub bisection_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    /// `u` crossed below zero: launch above the separatrix.
    Crosses,
    /// `u` turned back upward (or escaped): launch below the separatrix.
    TurnsUp,
    /// Reached `r_max` still decaying: indistinguishable from the separatrix.
    Decays,
}

struct Trajectory {
    /// `u` at the interior grid nodes, filled up to `filled`.
    u: Vec<f64>,
    filled: usize,
    outcome: Outcome,
}

fn rhs(pot: &PotentialSpec, omega2: f64, ell2: f64, dim: f64, r: f64, u: f64, p: f64) -> (f64, f64) {
    (
        p,
        pot.w_prime_odd(u) + ell2 / (r * r) * u - omega2 * u - (dim - 1.0) / r * p,
    )
}

fn integrate(
    pot: &PotentialSpec,
    grid: &RadialGrid,
    omega: f64,
    launch: f64,
    escape_cap: f64,
) -> Trajectory {
    let m = grid.len();
    let h = grid.h();
    let h_sub = h / N_SUB as f64;
    let dim = grid.dim() as f64;
    let ell = grid.ell().unsigned_abs();
    let ell2 = (ell * ell) as f64;
    let omega2 = omega * omega;

    // Series start at the first node r = h.
    let (mut u, mut p) = if ell == 0 {
        let c2 = (pot.w_prime_odd(launch) - omega2 * launch) / (2.0 * dim);
        (launch + c2 * h * h, 2.0 * c2 * h)
    } else {
        let le = ell as i32;
        (launch * h.powi(le), launch * ell as f64 * h.powi(le - 1))
    };

    let mut traj = Trajectory {
        u: vec![0.0; m],
        filled: 1,
        outcome: Outcome::Decays,
    };
    traj.u[0] = u;

    let mut peaked = ell == 0 && p < 0.0;
    let mut r = h;
    for node in 1..m {
        for _ in 0..N_SUB {
            let (k1u, k1p) = rhs(pot, omega2, ell2, dim, r, u, p);
            let rm = r + 0.5 * h_sub;
            let (k2u, k2p) = rhs(pot, omega2, ell2, dim, rm, u + 0.5 * h_sub * k1u, p + 0.5 * h_sub * k1p);
            let (k3u, k3p) = rhs(pot, omega2, ell2, dim, rm, u + 0.5 * h_sub * k2u, p + 0.5 * h_sub * k2p);
            let re = r + h_sub;
            let (k4u, k4p) = rhs(pot, omega2, ell2, dim, re, u + h_sub * k3u, p + h_sub * k3p);
            u += h_sub / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            p += h_sub / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            r = re;
            if u < 0.0 {
                traj.outcome = Outcome::Crosses;
                return traj;
            }
            if u > escape_cap {
                traj.outcome = Outcome::TurnsUp;
                return traj;
            }
            if p < 0.0 {
                peaked = true;
            } else if peaked {
                traj.outcome = Outcome::TurnsUp;
                return traj;
            }
        }
        traj.u[node] = u;
        traj.filled = node + 1;
    }
    traj
}

/// The launch window `(u_lo, u_hi)` where the mechanical potential
/// `G(u) = ½ω²u² - W(u)` of the radial "particle" is positive: a decaying
/// trajectory must start inside it, and its existence is exactly the
/// condition `ω > ω₀`. Returns the first positive window above the origin.
fn launch_window(pot: &PotentialSpec, omega: f64) -> Option<(f64, f64)> {
    let g = |u: f64| 0.5 * omega * omega * u * u - pot.w_clamped(u);
    let cap = 2.0 * pot.s1().unwrap_or(pot.s0()).max(pot.s0()) + 3.0;
    let n = 16_384;
    let mut u_lo = None;
    let mut prev = 0.0;
    for i in 1..=n {
        let u = cap * i as f64 / n as f64;
        match u_lo {
            None => {
                if g(u) > 0.0 {
                    // Refine the lower crossing by bisection on G.
                    let (mut a, mut b) = (prev, u);
                    for _ in 0..80 {
                        let m = 0.5 * (a + b);
                        if g(m) > 0.0 {
                            b = m;
                        } else {
                            a = m;
                        }
                    }
                    u_lo = Some(b);
                }
            }
            Some(lo) => {
                if g(u) <= 0.0 {
                    let (mut a, mut b) = (prev, u);
                    for _ in 0..80 {
                        let m = 0.5 * (a + b);
                        if g(m) > 0.0 {
                            a = m;
                        } else {
                            b = m;
                        }
                    }
                    return Some((lo, a));
                }
            }
        }
        prev = u;
    }
    // G stays positive out to the cap (possible for truncated potentials).
    u_lo.map(|lo| (lo, cap))
}

/// Brackets the separatrix for spherical launches (`ell = 0`).
///
/// Launches at rest above the argmax of `G` roll outward and escape, so the
/// separatrix sits in `(u_lo, u_m)` with `u_m = argmax G`; in the thin-wall
/// regime the crossing sliver clings to `u_m`, hence the geometric probes
/// toward it after a coarse sweep.
fn bracket_radial(
    pot: &PotentialSpec,
    grid: &RadialGrid,
    omega: f64,
    escape_cap: f64,
) -> Result<(f64, f64)> {
    let (w_lo, w_hi) = launch_window(pot, omega)
        .ok_or(Error::BracketNotFound { lo: 0.0, hi: 0.0 })?;

    // Golden-section argmax of G on the window.
    let g = |u: f64| 0.5 * omega * omega * u * u - pot.w_clamped(u);
    let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let (mut a, mut b) = (w_lo, w_hi);
    let (mut x1, mut x2) = (b - phi * (b - a), a + phi * (b - a));
    let (mut f1, mut f2) = (g(x1), g(x2));
    for _ in 0..120 {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = g(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = g(x2);
        }
    }
    let u_m = 0.5 * (a + b);
    let span = u_m - w_lo;

    let classify = |c: f64| integrate(pot, grid, omega, c, escape_cap).outcome;
    let mut lo = None;
    let mut hi = None;
    let mut prev: Option<(f64, Outcome)> = None;
    for i in 0..=64 {
        let c = w_lo + span * (0.001 + 0.999 * i as f64 / 64.0);
        let out = classify(c);
        if out == Outcome::Decays {
            return Ok((c, c));
        }
        if let Some((cp, Outcome::TurnsUp)) = prev {
            if out == Outcome::Crosses {
                lo = Some(cp);
                hi = Some(c);
                break;
            }
        }
        prev = Some((c, out));
    }
    if lo.is_none() {
        let mut last_below: Option<f64> = None;
        for k in 1..=52 {
            let c = u_m - span * 0.999 * 0.5_f64.powi(k);
            match classify(c) {
                Outcome::Crosses => {
                    hi = Some(c);
                    lo = last_below.or(Some(w_lo + 0.001 * span));
                    break;
                }
                Outcome::Decays => return Ok((c, c)),
                Outcome::TurnsUp => last_below = Some(c),
            }
        }
    }
    match (lo, hi) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::BracketNotFound { lo: w_lo, hi: w_hi }),
    }
}

/// Brackets the leading-coefficient launch for vortex profiles by a
/// geometric amplitude scan.
fn bracket_vortex(
    pot: &PotentialSpec,
    grid: &RadialGrid,
    omega: f64,
    escape_cap: f64,
) -> Result<(f64, f64)> {
    let c_min = 1e-4 * pot.s0();
    let c_max = 1e4 * pot.s1().unwrap_or(pot.s0()).max(pot.s0());
    let mut c = c_min;
    let mut prev: Option<(f64, Outcome)> = None;
    while c <= c_max {
        let out = integrate(pot, grid, omega, c, escape_cap).outcome;
        match (out, prev) {
            (Outcome::Decays, _) => return Ok((c, c)),
            (Outcome::Crosses, Some((cp, Outcome::TurnsUp))) => return Ok((cp, c)),
            _ => {}
        }
        prev = Some((c, out));
        c *= 1.02;
    }
    Err(Error::BracketNotFound { lo: c_min, hi: c_max })
}

/// Shoots the profile equation at frequency `omega` on the given mesh.
pub fn shoot(pot: &PotentialSpec, grid: &Arc<RadialGrid>, omega: f64) -> Result<ShootResult> {
    let m2 = pot.m2();
    if !(omega > 0.0 && omega * omega < m2) {
        return Err(Error::NoDecayingSolution { omega, m2 });
    }
    let escape_cap = 10.0 * pot.s1().unwrap_or(pot.s0()).max(pot.s0()) + 5.0;

    let (mut lo, mut hi) = if grid.ell() == 0 {
        bracket_radial(pot, grid, omega, escape_cap)?
    } else {
        bracket_vortex(pot, grid, omega, escape_cap)?
    };

    let mut steps = 0;
    while steps < MAX_BISECTIONS && (hi - lo) > f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let t = integrate(pot, grid, omega, mid, escape_cap);
        match t.outcome {
            Outcome::Crosses => hi = mid,
            Outcome::TurnsUp => lo = mid,
            Outcome::Decays => {
                lo = mid;
                hi = mid;
            }
        }
        steps += 1;
    }

    let launch = 0.5 * (lo + hi);
    let traj = integrate(pot, grid, omega, launch, escape_cap);
    finalize(pot, grid, omega, launch, steps, traj)
}

fn finalize(
    pot: &PotentialSpec,
    grid: &Arc<RadialGrid>,
    omega: f64,
    launch: f64,
    bisection_steps: usize,
    traj: Trajectory,
) -> Result<ShootResult> {
    let m = grid.len();
    let h = grid.h();
    let nodes = grid.nodes();
    let dim = grid.dim() as f64;
    let ell2 = {
        let l = grid.ell() as f64;
        l * l
    };
    let mut u = traj.u;

    // Peak, then the first tail index where clean decay stops.
    let mut peak = 0;
    for i in 1..traj.filled {
        if u[i] > u[peak] {
            peak = i;
        }
    }
    let mut clean_end = traj.filled;
    for i in peak + 1..traj.filled {
        if u[i] <= 0.0 || u[i] > u[i - 1] {
            clean_end = i;
            break;
        }
    }
    if clean_end <= peak + 3 {
        return Err(Error::BracketNotFound { lo: launch, hi: launch });
    }

    // Matched linear tail beyond the breakdown point.
    let kappa = (pot.m2() - omega * omega).sqrt();
    let anchor = clean_end - 1;
    let (ra, ua) = (nodes[anchor], u[anchor]);
    let tail_pow = (dim - 1.0) / 2.0;
    for i in clean_end..m {
        u[i] = ua * (ra / nodes[i]).powf(tail_pow) * (-kappa * (nodes[i] - ra)).exp();
    }

    // Fourth-order pointwise defect over the clean interior, away from the
    // r_max tail and the continuation junction. The first 1% of nodes is
    // excluded: the centrifugal 1/r² weight amplifies launch-series and
    // stencil error there without saying anything about the profile.
    let lower = 2.max(m / 100);
    let upper = clean_end.min((0.8 * m as f64) as usize);
    let mut residual: f64 = 0.0;
    if upper > lower + 4 {
        for i in lower..upper - 3 {
            let r = nodes[i];
            let du = (-u[i + 2] + 8.0 * u[i + 1] - 8.0 * u[i - 1] + u[i - 2]) / (12.0 * h);
            let ddu = (-u[i + 2] + 16.0 * u[i + 1] - 30.0 * u[i] + 16.0 * u[i - 1] - u[i - 2])
                / (12.0 * h * h);
            let defect = ddu + (dim - 1.0) / r * du
                - pot.w_prime_odd(u[i])
                - ell2 / (r * r) * u[i]
                + omega * omega * u[i];
            residual = residual.max(defect.abs());
        }
    }

    // Decay exponent: least-squares slope of ln u over the last clean decade.
    let floor = u[anchor].max(1e-10);
    let mut window: Vec<(f64, f64)> = (peak + 1..clean_end)
        .filter(|&i| u[i] >= floor && u[i] <= 10.0 * floor)
        .map(|i| (nodes[i], u[i].ln()))
        .collect();
    if window.len() < 6 {
        window = (peak + 1..clean_end)
            .filter(|&i| u[i] >= floor && u[i] <= 100.0 * floor)
            .map(|i| (nodes[i], u[i].ln()))
            .collect();
    }
    let decay_rate = if window.len() >= 2 {
        let n = window.len() as f64;
        let sx: f64 = window.iter().map(|(x, _)| x).sum();
        let sy: f64 = window.iter().map(|(_, y)| y).sum();
        let sxx: f64 = window.iter().map(|(x, _)| x * x).sum();
        let sxy: f64 = window.iter().map(|(x, y)| x * y).sum();
        -((n * sxy - sx * sy) / (n * sxx - sx * sx))
    } else {
        f64::NAN
    };

    Ok(ShootResult {
        profile: Field::new(grid.clone(), u)?,
        omega,
        shoot_param: launch,
        decay_rate,
        residual,
        bisection_steps,
    })
}

/// Comparison of the two independent routes to the same profile.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CrossValidation {
    /// False when the frequencies differ by more than 5%.
    pub comparable: bool,
    /// Relative L² distance between the profiles on the record's mesh.
    pub l2_distance: f64,
    /// Relative energy difference.
    pub energy_rel_diff: f64,
    pub pass: bool,
}

/// Compares a shooting profile against a variational record at the same
/// frequency: pass iff both the relative L² distance and the energy
/// difference stay below 1e-2. Mismatched meshes are resampled linearly.
pub fn cross_validate(
    ctx: &FunctionalContext,
    shot: &ShootResult,
    record: &SolutionRecord,
) -> Result<CrossValidation> {
    let grid = ctx.grid();
    let comparable = (shot.omega - record.omega).abs() <= 0.05 * record.omega.abs();
    let shot_u = if grid.same_mesh(shot.profile.grid()) {
        shot.profile.clone()
    } else {
        let samples: Vec<(f64, f64)> = shot
            .profile
            .grid()
            .nodes()
            .iter()
            .copied()
            .zip(shot.profile.values().iter().copied())
            .collect();
        Field::from_samples(grid.clone(), &samples)?
    };
    let diff: Vec<f64> = shot_u
        .values()
        .iter()
        .zip(record.u.values())
        .map(|(a, b)| a - b)
        .collect();
    let l2_distance = grid.norm_l2(&diff) / grid.norm_l2(record.u.values());
    let e_shot = ctx.energy(&shot_u, shot.omega)?;
    let energy_rel_diff = (e_shot - record.energy).abs() / record.energy.abs();
    Ok(CrossValidation {
        comparable,
        l2_distance,
        energy_rel_diff,
        pass: comparable && l2_distance < 1e-2 && energy_rel_diff < 1e-2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::builtin_wref;

    #[test]
    fn rejects_frequencies_outside_the_decay_window() {
        let g = RadialGrid::new(3, 0, 20.0, 1000).unwrap();
        let w = builtin_wref();
        assert!(matches!(
            shoot(&w, &g, 1.0),
            Err(Error::NoDecayingSolution { .. })
        ));
        assert!(shoot(&w, &g, 1.3).is_err());
        assert!(shoot(&w, &g, -0.5).is_err());
    }

    #[test]
    fn ground_state_profile_at_high_frequency() {
        let g = RadialGrid::new(3, 0, 30.0, 3000).unwrap();
        let w = builtin_wref();
        let res = shoot(&w, &g, 0.9).unwrap();
        assert!(res.shoot_param > 0.0);
        assert!(res.residual < 1e-8, "residual = {:.3e}", res.residual);
        let kappa = (1.0_f64 - 0.81).sqrt();
        assert!(
            (res.decay_rate / kappa - 1.0).abs() < 0.1,
            "decay {} vs {kappa}",
            res.decay_rate
        );
        // Nodeless and monotone past the peak (within the clean region).
        let u = res.profile.values();
        let peak = u
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(u.iter().take(peak + 1).all(|&v| v > 0.0));
        let tail_end = (0.7 * u.len() as f64) as usize;
        for i in peak + 1..tail_end {
            assert!(u[i] <= u[i - 1] * (1.0 + 1e-12), "not decaying at node {i}");
        }
        // Radial-lemma echo: r·u(r) non-increasing along the tail.
        let nodes = res.profile.grid().nodes();
        let start = peak + (0.1 * u.len() as f64) as usize;
        for i in start..tail_end {
            assert!(nodes[i] * u[i] <= nodes[i - 1] * u[i - 1] * (1.0 + 1e-9));
        }
    }

    #[test]
    fn vortex_profile_vanishes_linearly_at_origin() {
        let g = RadialGrid::new(2, 1, 30.0, 3000).unwrap();
        let w = builtin_wref();
        let res = shoot(&w, &g, 0.9).unwrap();
        let u = res.profile.values();
        // u ~ c r near the origin.
        assert!((u[1] / u[0] - 2.0).abs() < 0.05, "ratio = {}", u[1] / u[0]);
        assert!(res.residual < 1e-8, "residual = {:.3e}", res.residual);
    }

    #[test]
    fn cross_validation_flags_perturbations_and_mismatches() {
        let g = RadialGrid::new(3, 0, 30.0, 1500).unwrap();
        let w = builtin_wref();
        let ctx = FunctionalContext::new(g.clone(), w.clone(), 0.0).unwrap();
        let res = shoot(&w, &g, 0.9).unwrap();

        // A fake record equal to the shot profile passes against itself.
        let record = SolutionRecord {
            u: res.profile.clone(),
            sigma: 1.0,
            omega: res.omega,
            energy: ctx.energy(&res.profile, res.omega).unwrap(),
            charge: 1.0,
            lambda_ratio: 0.5,
            multiplier: 2.0 * res.omega,
            residual: 0.0,
            iterations: 0,
            c_hat_estimate: 1.0,
            in_sigma_set: true,
        };
        let cv = cross_validate(&ctx, &res, &record).unwrap();
        assert!(cv.pass && cv.l2_distance < 1e-12);

        // A bump on the profile is detected.
        let bumped = Field::from_fn(g.clone(), |r| {
            let base = record.u.values()[((r / g.h()).round() as usize - 1).min(g.len() - 1)];
            base + 0.1 * (-(r - 5.0) * (r - 5.0)).exp()
        });
        let bad = SolutionRecord { u: bumped, ..record.clone() };
        let cv = cross_validate(&ctx, &res, &bad).unwrap();
        assert!(!cv.pass && cv.l2_distance > 1e-2);

        // Frequency mismatch is flagged as incomparable.
        let off = SolutionRecord { omega: res.omega * 1.2, ..record };
        let cv = cross_validate(&ctx, &res, &off).unwrap();
        assert!(!cv.comparable && !cv.pass);
    }
}
