//! Radial meshes, quadrature, and the discrete radial operators.
//!
//! The mesh is uniform on `(0, r_max]` with Dirichlet truncation at `r_max`:
//! interior nodes `r_i = i h`, `h = r_max / n_cells`, `i = 1 .. n_cells-1`.
//! Radial integrals carry the `surface_measure * r^(dim-1)` weight. The
//! operator `L1 = -Δ_r + ell²/r² + m²` is assembled from per-edge
//! conductances chosen so that its weighted quadratic form is a sum of
//! squares; symmetry and positivity then hold to the last bit rather than up
//! to stencil rounding.
//!
//! Closure at the origin: symmetric ghost for `ell = 0` (regularity,
//! `u'(0) = 0`), hard zero for `ell != 0` (the centrifugal term forces
//! `u(0) = 0`).

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Uniform radial mesh with quadrature weights and operator coefficients.
#[derive(Debug)]
pub struct RadialGrid {
    dim: usize,
    ell: i32,
    r_max: f64,
    n_cells: usize,
    h: f64,
    /// Interior nodes `r_i = i h`, `i = 1 .. n_cells - 1`.
    nodes: Vec<f64>,
    /// Quadrature weights `w_i = surface_measure * r_i^(dim-1) * h`.
    weights: Vec<f64>,
    /// Edge conductances between consecutive interior nodes; for dim = 3
    /// `g_i = S r_i r_{i+1} / h`, for dim = 2 `g_i = S (r_i + h/2) / h`.
    edges: Vec<f64>,
    /// Conductance from the last node to the Dirichlet boundary value 0.
    edge_dirichlet: f64,
    /// Conductance from the first node to the origin value 0 (ell != 0 only).
    edge_origin: f64,
}

impl RadialGrid {
    /// Builds a mesh for spatial dimension 2 or 3 with vorticity `ell`
    /// (nonzero `ell` requires `dim = 2`), radius `r_max`, and `n_cells >= 64`
    /// uniform cells.
    pub fn new(dim: usize, ell: i32, r_max: f64, n_cells: usize) -> Result<Arc<Self>> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!("dim must be 2 or 3, got {dim}")));
        }
        if ell != 0 && dim != 2 {
            return Err(Error::InvalidGrid(format!(
                "nonzero vorticity (ell = {ell}) is only supported in dim 2"
            )));
        }
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::InvalidGrid(format!("r_max must be positive, got {r_max}")));
        }
        if n_cells < 64 {
            return Err(Error::InvalidGrid(format!("need at least 64 cells, got {n_cells}")));
        }
        let h = r_max / n_cells as f64;
        let s = surface_measure(dim);
        let m = n_cells - 1;
        let nodes: Vec<f64> = (1..=m).map(|i| i as f64 * h).collect();
        let weights: Vec<f64> = nodes.iter().map(|&r| s * r.powi(dim as i32 - 1) * h).collect();
        let edge_at = |r: f64| -> f64 {
            match dim {
                3 => s * r * (r + h) / h,
                _ => s * (r + 0.5 * h) / h,
            }
        };
        let edges: Vec<f64> = (0..m - 1).map(|i| edge_at(nodes[i])).collect();
        let edge_dirichlet = edge_at(nodes[m - 1]);
        let edge_origin = if ell != 0 {
            // w_1 (1/h² - (dim-1)/(2 h r_1)) with r_1 = h; dim = 2 here.
            weights[0] / (h * h) * 0.5
        } else {
            0.0
        };
        let grid = Self {
            dim,
            ell,
            r_max,
            n_cells,
            h,
            nodes,
            weights,
            edges,
            edge_dirichlet,
            edge_origin,
        };
        debug_assert!(grid.volume_defect() < 1e-3);
        Ok(Arc::new(grid))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ell(&self) -> i32 {
        self.ell
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Number of interior nodes (`n_cells - 1`).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Structural equality: two grids interoperate iff all parameters match.
    pub fn same_mesh(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.ell == other.ell
            && self.r_max == other.r_max
            && self.n_cells == other.n_cells
    }

    /// Relative gap between the trapezoid mass of the mesh (interior weights
    /// plus the Dirichlet half-cell) and the volume of the ball.
    pub fn volume_defect(&self) -> f64 {
        let s = surface_measure(self.dim);
        let half_cell = s * self.r_max.powi(self.dim as i32 - 1) * 0.5 * self.h;
        let total: f64 = self.weights.iter().sum::<f64>() + half_cell;
        let volume = s * self.r_max.powi(self.dim as i32) / self.dim as f64;
        (total - volume).abs() / volume
    }

    /// Trapezoid approximation of `∫ f dx` over the ball for a radial field
    /// (Dirichlet data: the boundary value is 0 by construction).
    pub fn integrate(&self, f: &Field) -> Result<f64> {
        self.check(f)?;
        Ok(self.dot_w(f.values(), f.grid.weights()))
    }

    /// Trapezoid approximation of `∫ f dx` for an arbitrary radial function,
    /// including the boundary half-cell at `r_max`.
    pub fn integrate_fn(&self, f: impl Fn(f64) -> f64) -> f64 {
        let s = surface_measure(self.dim);
        let mut acc = 0.0;
        for (i, &r) in self.nodes.iter().enumerate() {
            acc += self.weights[i] * f(r);
        }
        acc + s * self.r_max.powi(self.dim as i32 - 1) * 0.5 * self.h * f(self.r_max)
    }

    fn dot_w(&self, a: &[f64], w: &[f64]) -> f64 {
        a.iter().zip(w).map(|(x, wi)| x * wi).sum()
    }

    /// Weighted duality pairing `<a, b> = Σ w_i a_i b_i`, i.e. `∫ a b dx`.
    /// The product is grouped so the pairing commutes bitwise.
    pub fn pairing(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * (x * y))
            .sum()
    }

    /// `sqrt(∫ a² dx)` — the L² (dual) norm used for residuals.
    pub fn norm_l2(&self, a: &[f64]) -> f64 {
        self.pairing(a, a).sqrt()
    }

    /// Discrete Dirichlet form `∫ |∇u|·|∇v| dx` as a sum over edges;
    /// bitwise symmetric and positive semidefinite by construction.
    pub fn dirichlet_form(&self, u: &[f64], v: &[f64]) -> f64 {
        let m = self.nodes.len();
        let mut acc = 0.0;
        for i in 0..m - 1 {
            acc += self.edges[i] * ((u[i + 1] - u[i]) * (v[i + 1] - v[i]));
        }
        acc += self.edge_dirichlet * (u[m - 1] * v[m - 1]);
        if self.ell != 0 {
            acc += self.edge_origin * (u[0] * v[0]);
        }
        acc
    }

    /// `∫ (ell²/r²) u v dx`; zero for `ell = 0`.
    pub fn centrifugal_form(&self, u: &[f64], v: &[f64]) -> f64 {
        if self.ell == 0 {
            return 0.0;
        }
        let l2 = (self.ell as f64) * (self.ell as f64);
        self.weights
            .iter()
            .zip(self.nodes.iter())
            .zip(u.iter().zip(v))
            .map(|((w, r), (x, y))| w * l2 / (r * r) * (x * y))
            .sum()
    }

    /// `<L1 u, v> = ∫ (∇u·∇v + (ell²/r²) u v + m² u v) dx`.
    pub fn pairing_l1(&self, m2: f64, u: &[f64], v: &[f64]) -> f64 {
        self.dirichlet_form(u, v) + self.centrifugal_form(u, v) + m2 * self.pairing(u, v)
    }

    /// Tridiagonal coefficients of `-Δ_r + diag(extra)` in operator form
    /// (rows scaled by `1/w_i`, i.e. the action, not the weighted matrix).
    pub fn assemble(&self, extra: impl Fn(usize) -> f64) -> Tridiag {
        let m = self.nodes.len();
        let mut lower = vec![0.0; m - 1];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m - 1];
        for i in 0..m {
            let g_left = if i == 0 { self.edge_origin } else { self.edges[i - 1] };
            let g_right = if i == m - 1 { self.edge_dirichlet } else { self.edges[i] };
            diag[i] = (g_left + g_right) / self.weights[i] + extra(i);
            if i + 1 < m {
                upper[i] = -self.edges[i] / self.weights[i];
                lower[i] = -self.edges[i] / self.weights[i + 1];
            }
        }
        Tridiag { lower, diag, upper }
    }

    /// Applies `L1 = -Δ_r + ell²/r² + m²`; the result is dual-valued (pair it
    /// against test fields with [`Self::pairing`]).
    pub fn apply_l1(&self, m2: f64, u: &Field) -> Result<Field> {
        self.check(u)?;
        let op = self.assemble(|i| self.centrifugal_coeff(i) + m2);
        Ok(Field {
            grid: u.grid.clone(),
            values: op.apply(u.values()),
        })
    }

    pub(crate) fn centrifugal_coeff(&self, i: usize) -> f64 {
        if self.ell == 0 {
            0.0
        } else {
            let l2 = (self.ell as f64) * (self.ell as f64);
            l2 / (self.nodes[i] * self.nodes[i])
        }
    }

    /// Smallest eigenvalue of `L1` in the `∫ u v dx` inner product by inverse
    /// power iteration; estimates `inf <L1 u,u>/<u,u> = m²` from above, up to
    /// the Dirichlet gap of the truncated domain.
    pub fn rayleigh_min(&self, m2: f64) -> Result<f64> {
        let op = self.assemble(|i| self.centrifugal_coeff(i) + m2);
        let m = self.nodes.len();
        let mut x = vec![1.0; m];
        let nrm = self.norm_l2(&x);
        x.iter_mut().for_each(|v| *v /= nrm);
        let mut mu_prev = f64::INFINITY;
        let mut trace = Vec::new();
        for iter in 0..50_000 {
            let mut y = op.solve(&x);
            let nrm = self.norm_l2(&y);
            if !(nrm > 0.0) || !nrm.is_finite() {
                return Err(Error::EigenNonConvergence { iters: iter, trace });
            }
            y.iter_mut().for_each(|v| *v /= nrm);
            let mu = self.pairing_l1(m2, &y, &y) / self.pairing(&y, &y);
            if (mu - mu_prev).abs() <= 1e-13 * mu.abs() {
                return Ok(mu);
            }
            mu_prev = mu;
            if trace.len() < 8 {
                trace.push(mu);
            } else {
                trace.rotate_left(1);
                *trace.last_mut().unwrap() = mu;
            }
            x = y;
        }
        Err(Error::EigenNonConvergence { iters: 50_000, trace })
    }

    pub(crate) fn check(&self, f: &Field) -> Result<()> {
        if !self.same_mesh(&f.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

pub fn surface_measure(dim: usize) -> f64 {
    match dim {
        2 => 2.0 * std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI,
    }
}

/// Real radial profile sampled on the interior nodes of a [`RadialGrid`].
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("field contains non-finite entries".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self { grid, values }
    }

    /// Resamples `(r, u)` pairs onto the grid by linear interpolation,
    /// extending by zero outside the sampled range.
    pub fn from_samples(grid: Arc<RadialGrid>, samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Domain("need at least two samples to interpolate".into()));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Domain("profile samples must have increasing r".into()));
        }
        let interp = |r: f64| -> f64 {
            if r < samples[0].0 || r > samples[samples.len() - 1].0 {
                return 0.0;
            }
            let j = samples.partition_point(|&(x, _)| x <= r).min(samples.len() - 1);
            let (r0, u0) = samples[j - 1];
            let (r1, u1) = samples[j];
            u0 + (u1 - u0) * (r - r0) / (r1 - r0)
        };
        Ok(Self::from_fn(grid, interp))
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// `self + alpha * other`, entrywise.
    pub fn axpy(&self, alpha: f64, other: &Field) -> Field {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Field { grid: self.grid.clone(), values }
    }

    pub fn clamp_nonneg(&mut self) {
        for v in &mut self.values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
}

/// Tridiagonal operator in row-action form.
#[derive(Debug, Clone)]
pub struct Tridiag {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiag {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * x[i + 1];
            }
            y[i] = acc;
        }
        y
    }

    /// Thomas algorithm. The assembled operators are strictly diagonally
    /// dominant, so no pivoting is needed.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = if n > 1 { self.upper[0] / self.diag[0] } else { 0.0 };
        d[0] = rhs[0] / self.diag[0];
        for i in 1..n {
            let denom = self.diag[i] - self.lower[i - 1] * c[i - 1];
            if i + 1 < n {
                c[i] = self.upper[i] / denom;
            }
            d[i] = (rhs[i] - self.lower[i - 1] * d[i - 1]) / denom;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        x
    }
}

/// Writes a profile as CSV with header `r,u` at full round-trip precision.
pub fn write_profile_csv<W: Write>(field: &Field, mut out: W) -> Result<()> {
    writeln!(out, "r,u")?;
    for (r, u) in field.grid().nodes().iter().zip(field.values()) {
        writeln!(out, "{r},{u}")?;
    }
    Ok(())
}

/// Reads a `r,u` CSV back into sample pairs.
pub fn read_profile_csv<R: BufRead>(reader: R) -> Result<Vec<(f64, f64)>> {
    let mut samples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || (i == 0 && t.starts_with('r')) {
            continue;
        }
        let (a, b) = t
            .split_once(',')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'r,u'", i + 1)))?;
        let r: f64 = a.trim().parse().map_err(|e| Error::Config(format!("bad r '{a}': {e}")))?;
        let u: f64 = b.trim().parse().map_err(|e| Error::Config(format!("bad u '{b}': {e}")))?;
        samples.push((r, u));
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn constructor_validates() {
        assert!(RadialGrid::new(4, 0, 10.0, 100).is_err());
        assert!(RadialGrid::new(3, 1, 10.0, 100).is_err()); // vortex needs dim 2
        assert!(RadialGrid::new(2, 1, 10.0, 100).is_ok());
        assert!(RadialGrid::new(3, 0, 10.0, 32).is_err());
        assert!(RadialGrid::new(3, 0, -1.0, 100).is_err());
    }

    #[test]
    fn weights_sum_to_ball_volume() {
        for (dim, n) in [(3usize, 64usize), (3, 1000), (2, 64), (2, 777)] {
            let g = RadialGrid::new(dim, 0, 10.0, n).unwrap();
            assert!(g.volume_defect() < 1e-3, "dim {dim} n {n}: defect {}", g.volume_defect());
        }
    }

    #[test]
    fn integrate_constants() {
        let g3 = RadialGrid::new(3, 0, 10.0, 2000).unwrap();
        let ones = Field::from_fn(g3.clone(), |_| 1.0);
        let v3 = g3.integrate(&ones).unwrap();
        assert_relative_eq!(v3, 4.0 * PI * 1000.0 / 3.0, max_relative = 5e-3);

        let g2 = RadialGrid::new(2, 0, 10.0, 2000).unwrap();
        let ones2 = Field::from_fn(g2.clone(), |_| 1.0);
        let v2 = g2.integrate(&ones2).unwrap();
        assert_relative_eq!(v2, PI * 100.0, max_relative = 5e-3);
    }

    #[test]
    fn integrate_ball_test_function_squared() {
        // Plateau-and-ramp profile: exact value 4*pi*(1000/3 + 1051/30).
        let g = RadialGrid::new(3, 0, 16.0, 1600).unwrap();
        let u = Field::from_fn(g.clone(), |r| {
            if r < 10.0 {
                1.0
            } else if r <= 11.0 {
                11.0 - r
            } else {
                0.0
            }
        });
        let sq = Field::new(g.clone(), u.values().iter().map(|v| v * v).collect()).unwrap();
        let exact = 4.0 * PI * 11051.0 / 30.0; // = 4629.06, the oracle value
        assert_relative_eq!(g.integrate(&sq).unwrap(), exact, max_relative = 1e-2);
    }

    #[test]
    fn quadrature_convergence_order() {
        // integrate_fn reproduces ∫ r^k dx at order >= 1.9 under refinement.
        for dim in [2usize, 3] {
            for k in 0..=2u32 {
                let exact = |n: usize| {
                    let g = RadialGrid::new(dim, 0, 10.0, n).unwrap();
                    let approx = g.integrate_fn(|r| r.powi(k as i32));
                    let truth = surface_measure(dim) * 10.0_f64.powi(dim as i32 + k as i32)
                        / (dim as f64 + k as f64);
                    (approx - truth).abs()
                };
                let (e1, e2) = (exact(250), exact(500));
                if e1 < 1e-12 {
                    continue; // exact to rounding already
                }
                let order = (e1 / e2).log2();
                assert!(order >= 1.9, "dim {dim} k {k}: order {order} (e1 {e1:.3e} e2 {e2:.3e})");
            }
        }
    }

    #[test]
    fn l1_of_constant_is_mass_term() {
        let g = RadialGrid::new(3, 0, 20.0, 2000).unwrap();
        let c = 1.7;
        let u = Field::from_fn(g.clone(), |_| c);
        let lu = g.apply_l1(1.0, &u).unwrap();
        // Interior, away from the Dirichlet boundary.
        for i in 0..g.len() - 10 {
            assert!(
                (lu.values()[i] - c).abs() < 1e-10,
                "node {i}: {} vs {c}",
                lu.values()[i]
            );
        }
    }

    #[test]
    fn operator_form_and_edge_form_agree() {
        let g = RadialGrid::new(2, 1, 15.0, 300).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..10 {
            let (su, sv) = (rng.gen_range(0.5..1.5), rng.gen_range(0.5..1.5));
            let u = Field::from_fn(g.clone(), |r| (r * 0.7).sin() * su);
            let v = Field::from_fn(g.clone(), |r| (-r * 0.3).exp() * sv);
            let lu = g.apply_l1(1.3, &u).unwrap();
            let via_op = g.pairing(lu.values(), v.values());
            let via_form = g.pairing_l1(1.3, u.values(), v.values());
            assert_relative_eq!(via_op, via_form, max_relative = 1e-9);
        }
    }

    #[test]
    fn pairing_symmetry_is_exact() {
        let mut rng = StdRng::seed_from_u64(42);
        for &(dim, ell) in &[(3, 0), (2, 0), (2, 1), (2, -2)] {
            let g = RadialGrid::new(dim, ell, 12.0, 256).unwrap();
            for _ in 0..20 {
                let u: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let v: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let a = g.pairing_l1(2.0, &u, &v);
                let b = g.pairing_l1(2.0, &v, &u);
                assert_eq!(a, b, "dim {dim} ell {ell}");
            }
        }
    }

    #[test]
    fn l1_dominates_mass_term() {
        // <L1 u, u> >= m² <u, u> for arbitrary fields.
        let mut rng = StdRng::seed_from_u64(3);
        let g = RadialGrid::new(3, 0, 12.0, 256).unwrap();
        let m2 = 1.5;
        for _ in 0..100 {
            let u: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let lhs = g.pairing_l1(m2, &u, &u);
            let rhs = m2 * g.pairing(&u, &u);
            assert!(lhs >= rhs - 1e-12 * rhs.abs());
        }
    }

    #[test]
    fn vortex_pairing_matches_closed_form() {
        // u = r e^{-r} in dim 2, ell = 1, m = 1:
        // ∫(|∇u|² + (1/r² + 1) u²) dx = π/4 + π/2 + 3π/4 = 3π/2.
        let g = RadialGrid::new(2, 1, 20.0, 2000).unwrap();
        let u = Field::from_fn(g.clone(), |r| r * (-r).exp());
        let val = g.pairing_l1(1.0, u.values(), u.values());
        assert_relative_eq!(val, 1.5 * PI, max_relative = 1e-3);
    }

    #[test]
    fn rayleigh_min_matches_dirichlet_gap() {
        let g = RadialGrid::new(3, 0, 40.0, 4000).unwrap();
        let mu = g.rayleigh_min(1.0).unwrap();
        let expected = 1.0 + (PI / 40.0) * (PI / 40.0); // 1.0061685
        assert!((mu - expected).abs() < 1e-3, "mu = {mu}, expected {expected}");

        // Doubling the radius shrinks the gap toward m².
        let g2 = RadialGrid::new(3, 0, 80.0, 4000).unwrap();
        let mu2 = g2.rayleigh_min(1.0).unwrap();
        assert!(mu2 < mu && mu2 > 1.0);

        // The mass term shifts additively.
        let mu4 = g.rayleigh_min(4.0).unwrap();
        assert!((mu4 - (4.0 + (PI / 40.0) * (PI / 40.0))).abs() < 1e-3);
    }

    #[test]
    fn thomas_solves_assembled_operator() {
        let g = RadialGrid::new(3, 0, 10.0, 128).unwrap();
        let op = g.assemble(|_| 1.0);
        let rhs: Vec<f64> = g.nodes().iter().map(|r| (-r).exp()).collect();
        let x = op.solve(&rhs);
        let back = op.apply(&x);
        for (a, b) in back.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn csv_roundtrip() {
        let g = RadialGrid::new(3, 0, 10.0, 100).unwrap();
        let u = Field::from_fn(g.clone(), |r| (1.0 / 3.0) * (-r).exp());
        let mut buf = Vec::new();
        write_profile_csv(&u, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r,u\n"));
        let samples = read_profile_csv(std::io::BufReader::new(text.as_bytes())).unwrap();
        assert_eq!(samples.len(), g.len());
        for ((r, v), (rn, un)) in samples.iter().zip(g.nodes().iter().zip(u.values())) {
            assert_eq!(r, rn); // full round-trip precision
            assert_eq!(v, un);
        }
    }

    #[test]
    fn resampling_interpolates_linearly() {
        let g = RadialGrid::new(3, 0, 10.0, 100).unwrap();
        let samples: Vec<(f64, f64)> = (0..=40).map(|i| (0.25 * i as f64, 2.0 * 0.25 * i as f64)).collect();
        let f = Field::from_samples(g.clone(), &samples).unwrap();
        for (r, v) in g.nodes().iter().zip(f.values()) {
            assert_relative_eq!(*v, 2.0 * r, max_relative = 1e-12);
        }
        assert!(Field::from_samples(g, &[(0.0, 1.0)]).is_err());
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let g1 = RadialGrid::new(3, 0, 10.0, 100).unwrap();
        let g2 = RadialGrid::new(3, 0, 10.0, 128).unwrap();
        let u = Field::from_fn(g2, |_| 1.0);
        assert!(g1.integrate(&u).is_err());
    }
}
