//! Nonlinear potentials `W(s) = m²/2 s² + N(s)` and their admissibility checks.
//!
//! A potential is supplied as an evaluator pair `(N, N')` plus metadata: the
//! mass term `m²`, a witness `s0` where `N(s0) < 0` is expected (the binding
//! condition), an optional truncation point `s1`, and an optional growth
//! exponent `p`. Derivative consistency of the pair is verified at
//! construction with central differences so a wrong `N'` fails fast.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A nonlinear potential `W(s) = m²/2 s² + N(s)` for `s >= 0`.
///
/// Immutable after construction; evaluation is pure and thread-safe.
#[derive(Clone)]
pub struct PotentialSpec {
    m2: f64,
    n_eval: ScalarFn,
    n_prime: ScalarFn,
    s0: f64,
    s1: Option<f64>,
    p: Option<f64>,
    name: String,
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("name", &self.name)
            .field("m2", &self.m2)
            .field("s0", &self.s0)
            .field("s1", &self.s1)
            .field("p", &self.p)
            .finish()
    }
}

impl PotentialSpec {
    /// Builds a potential from an `(N, N')` evaluator pair and validates it:
    /// `m² > 0`, `N(0) = N'(0) = 0` (within 1e-12), `N'` matches central
    /// differences of `N` at 32 sample points (relative tolerance 1e-6), and
    /// `N'(s1) >= 0` when a truncation point is given.
    pub fn new<F, G>(
        name: &str,
        m2: f64,
        n_eval: F,
        n_prime: G,
        s0: f64,
        s1: Option<f64>,
        p: Option<f64>,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(m2 > 0.0) || !m2.is_finite() {
            return Err(Error::InvalidPotential(format!("m2 must be positive, got {m2}")));
        }
        if !(s0 > 0.0) || !s0.is_finite() {
            return Err(Error::InvalidPotential(format!("s0 must be positive, got {s0}")));
        }
        if n_eval(0.0).abs() > 1e-12 || n_prime(0.0).abs() > 1e-12 {
            return Err(Error::InvalidPotential(
                "N(0) and N'(0) must vanish (W(0) = W'(0) = 0)".into(),
            ));
        }
        if let Some(s1v) = s1 {
            if !(s1v > 0.0) {
                return Err(Error::InvalidPotential(format!("s1 must be positive, got {s1v}")));
            }
            if n_prime(s1v) < 0.0 {
                return Err(Error::InvalidPotential(format!(
                    "N'(s1) = {} < 0 at s1 = {s1v}; the linear continuation needs N'(s1) >= 0",
                    n_prime(s1v)
                )));
            }
        }
        if let Some(pv) = p {
            if !(pv > 2.0) {
                return Err(Error::InvalidPotential(format!(
                    "growth exponent p must exceed 2, got {pv}"
                )));
            }
        }
        // Derivative consistency: central differences on 32 points spanning
        // the working range. The one-sided slope spread bounds the curvature
        // (or C¹-kink) contribution to the stencil, so piecewise potentials
        // with continuous N' still validate.
        for k in 1..=32 {
            let s = 4.0 * s0 * (k as f64) / 32.0;
            let h = 1e-6 * s.max(1.0);
            let fwd = (n_eval(s + h) - n_eval(s)) / h;
            let bwd = (n_eval(s) - n_eval(s - h)) / h;
            let fd = 0.5 * (fwd + bwd);
            let np = n_prime(s);
            let tol = 1e-6 * (1.0 + fd.abs().max(np.abs())) + (fwd - bwd).abs();
            if (fd - np).abs() > tol {
                return Err(Error::InvalidPotential(format!(
                    "N' inconsistent with N at s = {s}: central diff {fd}, N'(s) = {np}"
                )));
            }
        }
        Ok(Self {
            m2,
            n_eval: Arc::new(n_eval),
            n_prime: Arc::new(n_prime),
            s0,
            s1,
            p,
            name: name.to_string(),
        })
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// The mass `m = sqrt(m²)`, the free-field energy-per-charge threshold.
    pub fn mass(&self) -> f64 {
        self.m2.sqrt()
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn s1(&self) -> Option<f64> {
        self.s1
    }

    pub fn growth_exponent(&self) -> Option<f64> {
        self.p
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `W(s)` for `s >= 0`; negative arguments are a domain error since the
    /// potential acts on the field modulus.
    pub fn eval_w(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::Domain(format!("W is defined on s >= 0, got {s}")));
        }
        Ok(0.5 * self.m2 * s * s + (self.n_eval)(s))
    }

    pub fn n(&self, s: f64) -> f64 {
        (self.n_eval)(s)
    }

    pub fn n_prime(&self, s: f64) -> f64 {
        (self.n_prime)(s)
    }

    /// `N(s)` clamped to `s >= 0`.
    ///
    /// Descent iterates and finite-difference probes may momentarily dip
    /// below zero; `N(0) = N'(0) = 0` and `N = o(s²)` make this extension C¹.
    pub(crate) fn n_clamped(&self, s: f64) -> f64 {
        if s > 0.0 {
            (self.n_eval)(s)
        } else {
            0.0
        }
    }

    /// `N'(s)` clamped to `s >= 0`.
    pub(crate) fn n_prime_clamped(&self, s: f64) -> f64 {
        if s > 0.0 {
            (self.n_prime)(s)
        } else {
            0.0
        }
    }

    /// `W(s)` with the clamped extension of [`Self::n_clamped`].
    pub(crate) fn w_clamped(&self, s: f64) -> f64 {
        0.5 * self.m2 * s * s + self.n_clamped(s)
    }

    /// `N''(s)` by central differences of `N'`; used only to assemble
    /// curvature preconditioners, never in residual definitions.
    pub(crate) fn n_second_fd(&self, s: f64) -> f64 {
        let d = 1e-6 * s.abs().max(1.0);
        (self.n_prime_clamped(s + d) - self.n_prime_clamped(s - d)) / (2.0 * d)
    }

    /// `W'(s)` extended as an odd function, matching `W(ψ) = F(|ψ|)`.
    /// The shooting integrator uses this when a trajectory crosses zero.
    pub(crate) fn w_prime_odd(&self, s: f64) -> f64 {
        if s >= 0.0 {
            self.m2 * s + (self.n_prime)(s)
        } else {
            -(self.m2 * (-s) + (self.n_prime)(-s))
        }
    }
}

/// Replaces `N` beyond `s1` by its tangent line, `N'(s1) s + c1` with
/// `c1 = N(s1) - N'(s1) s1`, keeping the result C¹ at the junction.
///
/// Solutions of the static equation with the truncated potential satisfy
/// `u <= s1` by the maximum principle, so the continuation is never sampled
/// by a converged profile.
pub fn truncate(spec: &PotentialSpec, s1: f64) -> Result<PotentialSpec> {
    let slope = spec.n_prime(s1);
    if slope < 0.0 {
        return Err(Error::Precondition(format!(
            "truncate requires N'(s1) >= 0, got N'({s1}) = {slope}"
        )));
    }
    let c1 = spec.n(s1) - slope * s1;
    let inner_n = spec.n_eval.clone();
    let inner_np = spec.n_prime.clone();
    let name = format!("{}~trunc@{s1}", spec.name);
    PotentialSpec::new(
        &name,
        spec.m2,
        move |s| if s <= s1 { inner_n(s) } else { slope * s + c1 },
        move |s| if s <= s1 { inner_np(s) } else { slope },
        spec.s0,
        Some(s1),
        spec.p,
    )
}

/// `W(s)` evaluated through the public checked entry point.
pub fn eval_w(spec: &PotentialSpec, s: f64) -> Result<f64> {
    spec.eval_w(s)
}

/// Outcome of sampling the admissibility conditions on `[0, s_max]`.
///
/// All checks are reported, never thrown; a failed condition is data. The
/// report is deterministic for a fixed `(s_max, samples)` plan.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AssumptionReport {
    /// `W >= 0` on the sample set.
    pub w_positive: bool,
    /// Sample minimizing `W` (the worst positivity witness).
    pub w_worst_s: f64,
    pub w_worst_value: f64,
    /// First sample where `W` drops below zero, if any.
    pub w_first_violation: Option<f64>,
    /// `W(s)/s² -> m²/2` as `s -> 0`.
    pub nondegenerate: bool,
    /// `N(s0) < 0`.
    pub hylomorphy: bool,
    pub n_at_s0: f64,
    /// Power-law bound `|N'(s)| <= a s^(p-1) + b s^(2-2/p)` certified on the
    /// sample set (requires `p`).
    pub growth_a: bool,
    /// Tangent condition `N'(s1) >= 0` at a declared truncation point.
    pub growth_b: bool,
    /// `inf { λ > 0 : W(u) < λ²u²/2 for some u > 0 }`, computed as
    /// `inf_u sqrt(max(0, 2 W(u)/u²))` over a dense sample refined by
    /// golden-section search.
    pub omega0: f64,
}

impl AssumptionReport {
    /// True when the existence theory applies: positivity, nondegeneracy,
    /// binding, and at least one growth condition.
    pub fn passes_all(&self) -> bool {
        self.w_positive && self.nondegenerate && self.hylomorphy && (self.growth_a || self.growth_b)
    }
}

/// Samples the admissibility conditions on `[0, s_max]`.
///
/// Sampling cannot certify behaviour beyond `s_max`; callers choose the
/// window (`10 * s0` is the usual default).
pub fn check_assumptions(spec: &PotentialSpec, s_max: f64, samples: usize) -> Result<AssumptionReport> {
    if s_max <= spec.s0 {
        return Err(Error::Precondition(format!(
            "s_max = {s_max} must exceed s0 = {}",
            spec.s0
        )));
    }
    if samples < 100 {
        return Err(Error::Precondition(format!("need at least 100 samples, got {samples}")));
    }

    // (W-i) positivity sweep.
    let mut w_worst_s = 0.0;
    let mut w_worst_value = 0.0;
    let mut w_first_violation = None;
    for k in 0..=samples {
        let s = s_max * (k as f64) / (samples as f64);
        let w = spec.w_clamped(s);
        if w < w_worst_value {
            w_worst_value = w;
            w_worst_s = s;
        }
        if w < -1e-12 && w_first_violation.is_none() {
            w_first_violation = Some(s);
        }
    }
    let w_positive = w_first_violation.is_none();

    // (W-ii) nondegeneracy: 2 W(s)/s² -> m² near the origin.
    let nondegenerate = [1e-4, 1e-5].iter().all(|&s| {
        let ratio = 2.0 * spec.w_clamped(s) / (s * s);
        (ratio / spec.m2 - 1.0).abs() < 1e-2
    });

    // (W-iii) binding witness.
    let n_at_s0 = spec.n(spec.s0);
    let hylomorphy = n_at_s0 < 0.0;

    let growth_a = check_growth_a(spec, s_max, samples);
    let growth_b = spec.s1.map(|s1| spec.n_prime(s1) >= 0.0).unwrap_or(false);

    let omega0 = compute_omega0(spec, s_max);

    let report = AssumptionReport {
        w_positive,
        w_worst_s,
        w_worst_value,
        w_first_violation,
        nondegenerate,
        hylomorphy,
        n_at_s0,
        growth_a,
        growth_b,
        omega0,
    };
    // Binding forces omega0 below the mass: 2 W(s0)/s0² = m² + 2 N(s0)/s0² < m².
    debug_assert!(!report.hylomorphy || report.omega0 < spec.mass());
    Ok(report)
}

/// Least-squares fit of `(a, b)` in `|N'| <= a s^(p-1) + b s^(2-2/p)`,
/// inflated to a uniform majorant; the check passes when a finite certificate
/// exists on the sample set.
fn check_growth_a(spec: &PotentialSpec, s_max: f64, samples: usize) -> bool {
    let p = match spec.p {
        Some(p) => p,
        None => return false,
    };
    let e1 = p - 1.0;
    let e2 = 2.0 - 2.0 / p;
    // Normal equations for |N'| against the two basis powers.
    let (mut g11, mut g12, mut g22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut all_zero = true;
    for k in 1..=samples {
        let s = s_max * (k as f64) / (samples as f64);
        let y = spec.n_prime(s).abs();
        if y > 0.0 {
            all_zero = false;
        }
        let (b1, b2) = (s.powf(e1), s.powf(e2));
        g11 += b1 * b1;
        g12 += b1 * b2;
        g22 += b2 * b2;
        r1 += b1 * y;
        r2 += b2 * y;
    }
    if all_zero {
        return true; // N' identically zero on the samples: any a, b work.
    }
    let det = g11 * g22 - g12 * g12;
    if det.abs() < 1e-300 {
        return false;
    }
    let a = ((g22 * r1 - g12 * r2) / det).max(0.0);
    let b = ((g11 * r2 - g12 * r1) / det).max(0.0);
    // Inflate the fit to a majorant and verify.
    let mut ratio: f64 = 0.0;
    for k in 1..=samples {
        let s = s_max * (k as f64) / (samples as f64);
        let y = spec.n_prime(s).abs();
        let fit = a * s.powf(e1) + b * s.powf(e2);
        if y > 0.0 {
            if fit <= 0.0 {
                return false;
            }
            ratio = ratio.max(y / fit);
        }
    }
    ratio.is_finite()
}

fn compute_omega0(spec: &PotentialSpec, s_max: f64) -> f64 {
    let ratio = |s: f64| (2.0 * spec.w_clamped(s) / (s * s)).max(0.0);
    // Dense log-spaced sweep; include s0 so a binding witness is never missed.
    let lo = 1e-8_f64 * s_max;
    let mut best_s = spec.s0;
    let mut best = ratio(spec.s0);
    for k in 0..1024 {
        let t = k as f64 / 1023.0;
        let s = lo * (s_max / lo).powf(t);
        let r = ratio(s);
        if r < best {
            best = r;
            best_s = s;
        }
    }
    // Golden-section refinement around the best sample.
    let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let (mut a, mut b) = ((best_s / 1.1).max(lo), (best_s * 1.1).min(s_max));
    let (mut x1, mut x2) = (b - phi * (b - a), a + phi * (b - a));
    let (mut f1, mut f2) = (ratio(x1), ratio(x2));
    for _ in 0..80 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = ratio(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = ratio(x2);
        }
    }
    best = best.min(f1).min(f2);
    best.sqrt()
}

/// Reference potential `W(s) = s²(1-s)²/2`, i.e. `N(s) = -s³ + s⁴/2`,
/// with `m = 1`, witness `s0 = 1`, truncation point `s1 = 1.5`, `p = 4`.
pub fn builtin_wref() -> PotentialSpec {
    PotentialSpec::new(
        "wref",
        1.0,
        |s| s * s * s * (0.5 * s - 1.0),
        |s| s * s * (2.0 * s - 3.0),
        1.0,
        Some(1.5),
        Some(4.0),
    )
    .expect("wref is well formed")
}

/// Sign-indefinite potential `W(s) = s²/2 - s⁴/4` (`N(s) = -s⁴/4`); violates
/// positivity with `W(2) = -2` and serves as the unboundedness example.
pub fn builtin_wbad() -> PotentialSpec {
    PotentialSpec::new(
        "wbad",
        1.0,
        |s| -0.25 * s.powi(4),
        |s| -s.powi(3),
        2.0,
        None,
        Some(4.0),
    )
    .expect("wbad is well formed")
}

/// Free Klein-Gordon potential `W(s) = s²/2` (`N = 0`); the binding check
/// fails and no bound states exist.
pub fn builtin_wfree() -> PotentialSpec {
    PotentialSpec::new("wfree", 1.0, |_| 0.0, |_| 0.0, 1.0, None, Some(4.0)).expect("wfree is well formed")
}

/// Looks up a builtin by name.
pub fn builtin(name: &str) -> Result<PotentialSpec> {
    match name {
        "wref" => Ok(builtin_wref()),
        "wbad" => Ok(builtin_wbad()),
        "wfree" => Ok(builtin_wfree()),
        other => Err(Error::Config(format!(
            "unknown builtin potential '{other}' (available: wref, wbad, wfree)"
        ))),
    }
}

/// Parses a potential definition file: flat `key=value` lines, `#` comments.
///
/// ```text
/// kind=polynomial
/// m2=1.0
/// s0=1.0
/// s1=1.5
/// p=4
/// n=3:-1.0,4:0.5
/// ```
///
/// `kind=builtin` with `name=wref|wbad|wfree` selects a builtin. For
/// `kind=polynomial`, `n` lists `degree:coefficient` pairs of `N(s)`.
pub fn parse_potential_file(text: &str) -> Result<PotentialSpec> {
    let mut kv = std::collections::BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got '{line}'", lineno + 1)))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let kind = kv
        .get("kind")
        .ok_or_else(|| Error::Config("missing 'kind' (builtin|polynomial)".into()))?
        .as_str();
    match kind {
        "builtin" => {
            let name = kv
                .get("name")
                .ok_or_else(|| Error::Config("kind=builtin requires 'name'".into()))?;
            builtin(name)
        }
        "polynomial" => {
            let parse_f = |key: &str| -> Result<f64> {
                kv.get(key)
                    .ok_or_else(|| Error::Config(format!("missing '{key}'")))?
                    .parse()
                    .map_err(|e| Error::Config(format!("bad value for '{key}': {e}")))
            };
            let m2 = parse_f("m2")?;
            let s0 = parse_f("s0")?;
            let s1 = kv.get("s1").map(|v| v.parse::<f64>()).transpose()
                .map_err(|e| Error::Config(format!("bad value for 's1': {e}")))?;
            let p = kv.get("p").map(|v| v.parse::<f64>()).transpose()
                .map_err(|e| Error::Config(format!("bad value for 'p': {e}")))?;
            let mut terms: Vec<(i32, f64)> = Vec::new();
            if let Some(spec) = kv.get("n") {
                for part in spec.split(',').filter(|s| !s.trim().is_empty()) {
                    let (d, c) = part
                        .split_once(':')
                        .ok_or_else(|| Error::Config(format!("bad term '{part}' (want degree:coefficient)")))?;
                    let deg: i32 = d.trim().parse().map_err(|e| Error::Config(format!("bad degree '{d}': {e}")))?;
                    let coeff: f64 = c.trim().parse().map_err(|e| Error::Config(format!("bad coefficient '{c}': {e}")))?;
                    if deg < 3 {
                        return Err(Error::Config(format!(
                            "polynomial N must start at degree 3 (got degree {deg}); the quadratic part belongs to m2"
                        )));
                    }
                    terms.push((deg, coeff));
                }
            }
            let terms2 = terms.clone();
            let name = format!("polynomial[{}]", kv.get("n").cloned().unwrap_or_default());
            PotentialSpec::new(
                &name,
                m2,
                move |s| terms.iter().map(|&(d, c)| c * s.powi(d)).sum(),
                move |s| terms2.iter().map(|&(d, c)| c * (d as f64) * s.powi(d - 1)).sum(),
                s0,
                s1,
                p,
            )
        }
        other => Err(Error::Config(format!("unknown kind '{other}' (builtin|polynomial)"))),
    }
}
