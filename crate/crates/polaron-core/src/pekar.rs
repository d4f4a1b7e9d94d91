//! Semiclassical machinery: the self-consistent-field minimizer of the
//! classical energy functional, the finite-coupling semiclassical mass, and
//! the constrained-velocity states at nonzero total momentum.
//!
//! The functional being minimized is
//! `E[psi] = (1/2m) int |grad psi|^2 - alpha intint |psi|^2 g(x-y) |psi|^2`
//! over normalized radial `psi`, with `g` the attractive kernel whose
//! momentum density is `|v|^2/eps`. Each SCF step freezes the density, builds
//! the induced potential in momentum space, and takes the lowest eigenpair of
//! the resulting radial Schroedinger operator; damped mixing with
//! backtracking keeps the accepted energies non-increasing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::model::{ModelConstants, PolaronModel};
use crate::quad::{gauss_legendre, QuadError, QuadratureSpec};
use crate::special::{fourier_kernel, sphere_surface};

#[derive(Debug, Clone, Error)]
pub enum PekarError {
    #[error("grid too coarse: spacing {dr:.3e} exceeds a twentieth of the well width {width:.3e}")]
    GridTooCoarse { dr: f64, width: f64 },
    #[error("self-consistent iteration did not converge after {iterations} iterations (defect {defect:.3e}, boundary mass {boundary_mass:.3e})")]
    NoConvergence {
        iterations: usize,
        defect: f64,
        boundary_mass: f64,
    },
    #[error("energy increased at iteration {iteration} despite backtracked mixing")]
    EnergyIncrease { iteration: usize },
    #[error("dispersion is not of superfluid type (sampled critical velocity {c:.3e})")]
    NotSuperfluid { c: f64 },
    #[error("momentum {p:.3e} beyond the solvable range (cap {cap:.3e})")]
    MomentumTooLarge { p: f64, cap: f64 },
    #[error("velocity equation has no root for P={p:.6e}: the momentum map stays below it (max {rhs_max:.6e})")]
    NoRoot { p: f64, rhs_max: f64 },
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("quadrature: {0}")]
    Quad(#[from] QuadError),
}

/// Uniform cell-centered radial grid with d-dimensional volume weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub d: usize,
    pub r_max: f64,
    pub n: usize,
    dr: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl RadialGrid {
    pub fn uniform(d: usize, r_max: f64, n: usize) -> Result<Self, PekarError> {
        if !(1..=3).contains(&d) {
            return Err(PekarError::BadGrid(format!("dimension {d}")));
        }
        if !(r_max > 0.0) || n < 16 {
            return Err(PekarError::BadGrid(format!(
                "need r_max > 0 and n >= 16, got r_max={r_max}, n={n}"
            )));
        }
        let dr = r_max / n as f64;
        let surface = sphere_surface(d);
        let nodes: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * dr).collect();
        let weights: Vec<f64> = nodes
            .iter()
            .map(|r| surface * r.powi(d as i32 - 1) * dr)
            .collect();
        Ok(Self {
            d,
            r_max,
            n,
            dr,
            nodes,
            weights,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spacing(&self) -> f64 {
        self.dr
    }

    /// Volume integral of a grid function.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        exec::sum_stable(
            &self
                .weights
                .iter()
                .zip(values)
                .map(|(w, v)| w * v)
                .collect::<Vec<_>>(),
        )
    }
}

/// SCF loop controls.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverSpec {
    /// Relative energy stall declaring convergence.
    pub energy_tol: f64,
    /// Fixed-point defect (volume L2 norm) declaring convergence.
    pub defect_tol: f64,
    pub max_iter: usize,
    /// Initial mixing weight toward the fresh eigenstate.
    pub mixing: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            energy_tol: 1e-9,
            defect_tol: 1e-7,
            max_iter: 500,
            mixing: 0.5,
        }
    }
}

/// Fixed momentum-space rule shared by the density transform and every
/// semiclassical integral built on one solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MomentumRule {
    /// Gauss–Legendre panels on [0, q_max], with the panel count scaled to
    /// the fastest oscillation `q_max * r_max` the transforms must resolve.
    fn build(q_max: f64, r_max: f64) -> Self {
        let panels = ((q_max * r_max / std::f64::consts::PI).ceil() as usize).clamp(8, 512);
        let per_panel = 16usize;
        let rule = gauss_legendre(per_panel);
        let mut nodes = Vec::with_capacity(panels * per_panel);
        let mut weights = Vec::with_capacity(panels * per_panel);
        for p in 0..panels {
            let a = q_max * p as f64 / panels as f64;
            let b = q_max * (p + 1) as f64 / panels as f64;
            let c = 0.5 * (a + b);
            let h = 0.5 * (b - a);
            for (x, w) in rule.0.iter().zip(&rule.1) {
                nodes.push(c + h * x);
                weights.push(w * h);
            }
        }
        Self { nodes, weights }
    }
}

/// Converged minimizer of the semiclassical functional.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PekarSolution {
    pub grid: RadialGrid,
    /// Radial wavefunction on the grid nodes, nonnegative gauge, unit norm.
    pub psi: Vec<f64>,
    pub energy: f64,
    pub kinetic: f64,
    pub potential: f64,
    /// Momentum rule the density and field tables live on.
    pub momentum: MomentumRule,
    /// Density transform `rho(q) = int |psi|^2 e^{iq.x}`; `rho(0) = 1`.
    pub rho: Vec<f64>,
    /// Minimizing field coefficients `phi(q) = -sqrt(alpha) rho v / eps`.
    pub field: Vec<f64>,
    /// Finite-coupling semiclassical mass.
    pub m_pek_alpha: f64,
    pub iterations: usize,
    /// Final SCF fixed-point defect.
    pub residual: f64,
    /// Energies of the accepted iterates (non-increasing).
    pub energy_trace: Vec<f64>,
    pub alpha: f64,
    pub m: f64,
}

impl PekarSolution {
    /// Density transform at an arbitrary momentum.
    pub fn rho_at(&self, q: f64) -> f64 {
        let d = self.grid.d;
        let sums: Vec<f64> = self
            .grid
            .nodes()
            .iter()
            .zip(self.grid.weights())
            .zip(&self.psi)
            .map(|((r, w), psi)| w * psi * psi * fourier_kernel(d, q * r))
            .collect();
        exec::sum_stable(&sums)
    }
}

fn transform_density(grid: &RadialGrid, psi_sq_w: &[f64], q_nodes: &[f64]) -> Vec<f64> {
    let d = grid.d;
    let nodes = grid.nodes();
    exec::map_collect(q_nodes, |&q| {
        let mut s = 0.0;
        for (r, fw) in nodes.iter().zip(psi_sq_w) {
            s += fw * fourier_kernel(d, q * r);
        }
        s
    })
}

struct Workspace {
    /// `|v(q)|^2 / eps(q)` on the momentum rule.
    g_hat: Vec<f64>,
    /// Surface x `q^{d-1}` x Gauss weight volume factors.
    vol_q: Vec<f64>,
    /// `q^2 |v|^2 / eps^3` for the mass integral.
    mass_hat: Vec<f64>,
    /// Kinetic link coefficients.
    links: Vec<f64>,
}

fn build_workspace(model: &PolaronModel, grid: &RadialGrid, rule: &MomentumRule) -> Workspace {
    let d = model.d;
    let surface = sphere_surface(d);
    let mut g_hat = Vec::with_capacity(rule.nodes.len());
    let mut vol_q = Vec::with_capacity(rule.nodes.len());
    let mut mass_hat = Vec::with_capacity(rule.nodes.len());
    for (&q, &w) in rule.nodes.iter().zip(&rule.weights) {
        let v = model.v.eval(q).unwrap_or(0.0);
        let e = model.eps.eval(q).unwrap_or(f64::INFINITY);
        g_hat.push(v * v / e);
        mass_hat.push(q * q * v * v / (e * e * e));
        vol_q.push(surface * q.powi(d as i32 - 1) * w);
    }
    let dr = grid.spacing();
    let links: Vec<f64> = (0..grid.n - 1)
        .map(|i| {
            let r_mid = (i as f64 + 1.0) * dr;
            surface * r_mid.powi(d as i32 - 1) / (2.0 * model.m * dr)
        })
        .collect();
    Workspace {
        g_hat,
        vol_q,
        mass_hat,
        links,
    }
}

fn kinetic_energy(ws: &Workspace, psi: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, l) in ws.links.iter().enumerate() {
        let dpsi = psi[i + 1] - psi[i];
        s += l * dpsi * dpsi;
    }
    s
}

fn potential_energy(ws: &Workspace, rho: &[f64], alpha: f64) -> f64 {
    let terms: Vec<f64> = ws
        .vol_q
        .iter()
        .zip(&ws.g_hat)
        .zip(rho)
        .map(|((vq, g), r)| vq * g * r * r)
        .collect();
    -alpha * exec::sum_stable(&terms)
}

fn normalize(grid: &RadialGrid, psi: &mut [f64]) {
    let norm2 = grid.integrate(&psi.iter().map(|p| p * p).collect::<Vec<_>>());
    let inv = 1.0 / norm2.sqrt();
    for p in psi.iter_mut() {
        *p *= inv;
    }
}

/// Minimize the semiclassical functional by damped SCF iteration.
///
/// The grid must resolve the harmonic well width `1/sqrt(m omega)` with at
/// least 20 nodes. Convergence requires both an energy stall and a small
/// fixed-point defect; a non-convergent run reports how much mass reached the
/// outer tenth of the grid, the signature of a minimizer escaping the box.
pub fn minimize_pekar(
    model: &PolaronModel,
    consts: &ModelConstants,
    grid: &RadialGrid,
    solver: &SolverSpec,
    quad: &QuadratureSpec,
) -> Result<PekarSolution, PekarError> {
    quad.validate()?;
    let alpha = model.alpha;
    let m = model.m;
    let omega = consts.omega_at(alpha);
    let width = 1.0 / (m * omega).sqrt();
    if grid.spacing() > width / 20.0 {
        return Err(PekarError::GridTooCoarse {
            dr: grid.spacing(),
            width,
        });
    }
    let q_max = model.radial_cutoff(quad);
    let rule = MomentumRule::build(q_max, grid.r_max);
    let ws = build_workspace(model, grid, &rule);
    let nodes = grid.nodes().to_vec();
    let weights = grid.weights().to_vec();
    let n = grid.n;

    // Gaussian initial guess at the harmonic width.
    let mut psi: Vec<f64> = nodes
        .iter()
        .map(|r| (-0.5 * (r / width).powi(2)).exp())
        .collect();
    normalize(grid, &mut psi);

    let density_w = |psi: &[f64]| -> Vec<f64> {
        weights
            .iter()
            .zip(psi)
            .map(|(w, p)| w * p * p)
            .collect::<Vec<_>>()
    };
    let mut rho = transform_density(grid, &density_w(&psi), &rule.nodes);
    let mut energy = kinetic_energy(&ws, &psi) + potential_energy(&ws, &rho, alpha);
    let mut trace = vec![energy];
    let mut defect = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0usize;

    for iter in 0..solver.max_iter {
        iterations = iter + 1;
        // Induced potential V(r) = -2 alpha int g_hat rho e^{iq.x} dq.
        let rho_ref = &rho;
        let ws_ref = &ws;
        let rule_ref = &rule;
        let potential_r: Vec<f64> = exec::map_collect(&nodes, |&r| {
            let mut total = 0.0;
            for (j, &q) in rule_ref.nodes.iter().enumerate() {
                total += ws_ref.vol_q[j] * ws_ref.g_hat[j] * rho_ref[j] * fourier_kernel(grid.d, q * r);
            }
            -2.0 * alpha * total
        });
        // Lowest eigenpair of the discretized radial operator in the
        // volume-weighted inner product.
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n - 1];
        for i in 0..n {
            let mut a_ii = 0.0;
            if i > 0 {
                a_ii += ws.links[i - 1];
            }
            if i < n - 1 {
                a_ii += ws.links[i];
            }
            diag[i] = (a_ii + potential_r[i] * weights[i]) / weights[i];
        }
        for i in 0..n - 1 {
            off[i] = -ws.links[i] / (weights[i] * weights[i + 1]).sqrt();
        }
        let (_, y) = crate::eig::tridiag_smallest_eigenpair(&diag, &off);
        let mut fresh: Vec<f64> = y
            .iter()
            .zip(&weights)
            .map(|(yi, w)| yi / w.sqrt())
            .collect();
        normalize(grid, &mut fresh);
        // Nodeless ground state: fix the gauge to positive overlap.
        let overlap = grid.integrate(
            &fresh
                .iter()
                .zip(&psi)
                .map(|(a, b)| a * b)
                .collect::<Vec<_>>(),
        );
        if overlap < 0.0 {
            for f in fresh.iter_mut() {
                *f = -*f;
            }
        }
        defect = grid
            .integrate(
                &fresh
                    .iter()
                    .zip(&psi)
                    .map(|(a, b)| (a - b) * (a - b))
                    .collect::<Vec<_>>(),
            )
            .sqrt();

        // Backtracked mixing: accept only non-increasing energies.
        let mut beta = solver.mixing;
        let mut accepted = false;
        for _ in 0..8 {
            let mut candidate: Vec<f64> = psi
                .iter()
                .zip(&fresh)
                .map(|(old, new)| (1.0 - beta) * old + beta * new)
                .collect();
            normalize(grid, &mut candidate);
            let cand_rho = transform_density(grid, &density_w(&candidate), &rule.nodes);
            let cand_energy =
                kinetic_energy(&ws, &candidate) + potential_energy(&ws, &cand_rho, alpha);
            if cand_energy <= energy + 1e-13 * energy.abs() {
                let delta = (energy - cand_energy).abs();
                psi = candidate;
                rho = cand_rho;
                energy = cand_energy;
                trace.push(energy);
                accepted = true;
                if delta <= solver.energy_tol * energy.abs() && defect <= solver.defect_tol {
                    converged = true;
                }
                break;
            }
            beta *= 0.5;
        }
        if !accepted {
            if defect <= solver.defect_tol {
                converged = true;
            } else {
                return Err(PekarError::EnergyIncrease { iteration: iter });
            }
        }
        if converged {
            break;
        }
    }
    if !converged {
        let boundary = boundary_mass(grid, &psi);
        return Err(PekarError::NoConvergence {
            iterations,
            defect,
            boundary_mass: boundary,
        });
    }

    let kinetic = kinetic_energy(&ws, &psi);
    let potential = potential_energy(&ws, &rho, alpha);
    let field: Vec<f64> = rule
        .nodes
        .iter()
        .zip(&rho)
        .map(|(&q, &r)| {
            let v = model.v.eval(q).unwrap_or(0.0);
            let e = model.eps.eval(q).unwrap_or(f64::INFINITY);
            -alpha.sqrt() * r * v / e
        })
        .collect();
    let mass_terms: Vec<f64> = ws
        .vol_q
        .iter()
        .zip(&ws.mass_hat)
        .zip(&rho)
        .map(|((vq, mh), r)| vq * mh * r * r)
        .collect();
    let m_pek_alpha = 2.0 * alpha / model.d as f64 * exec::sum_stable(&mass_terms);

    Ok(PekarSolution {
        grid: grid.clone(),
        psi,
        energy: kinetic + potential,
        kinetic,
        potential,
        momentum: rule,
        rho,
        field,
        m_pek_alpha,
        iterations,
        residual: defect,
        energy_trace: trace,
        alpha,
        m,
    })
}

fn boundary_mass(grid: &RadialGrid, psi: &[f64]) -> f64 {
    let cut = 0.9 * grid.r_max;
    grid.nodes()
        .iter()
        .zip(grid.weights())
        .zip(psi)
        .filter(|((r, _), _)| **r > cut)
        .map(|((_, w), p)| w * p * p)
        .sum()
}

/// Uniform-grid 4-point (cubic Lagrange) interpolation table.
struct CubicTable {
    x0: f64,
    h: f64,
    values: Vec<f64>,
}

impl CubicTable {
    fn build(x0: f64, x1: f64, n: usize, f: impl Fn(f64) -> f64 + Sync + Send) -> Self {
        let h = (x1 - x0) / (n as f64 - 1.0);
        let values = exec::fill_indexed(n, |i| f(x0 + h * i as f64));
        Self { x0, h, values }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let t = ((x - self.x0) / self.h).clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).clamp(1, n - 3);
        let s = t - i as f64;
        let (m1, p0, p1, p2) = (
            self.values[i - 1],
            self.values[i],
            self.values[i + 1],
            self.values[i + 2],
        );
        // Catmull-Rom form of the cubic through four uniform samples.
        p0 + 0.5
            * s
            * (p1 - m1
                + s * (2.0 * m1 - 5.0 * p0 + 4.0 * p1 - p2 + s * (3.0 * (p0 - p1) + p2 - m1)))
    }
}

/// Finite-coupling semiclassical mass from the converged solution.
///
/// Primary route: `(2 alpha / d) int q^2 |v|^2 |rho|^2 / eps^3 dq` on the
/// solution's momentum rule. The same number is recomputed through the
/// position-space double integral against the tabulated mass kernel
/// (numerical angular average, cubic interpolation); the two routes must
/// agree to 1e-6 relative or the call fails.
pub fn pekar_mass(
    sol: &PekarSolution,
    model: &PolaronModel,
    quad: &QuadratureSpec,
) -> Result<f64, PekarError> {
    quad.validate()?;
    let d = model.d;
    let alpha = sol.alpha;
    let surface = sphere_surface(d);
    let momentum_route = sol.m_pek_alpha;

    // Mass kernel tabulated from the same truncated momentum rule, so both
    // routes see identical k-space content.
    let r_table_max = 2.0 * sol.grid.r_max + 1.0;
    let rho_rule = &sol.momentum;
    let mass_hat: Vec<f64> = rho_rule
        .nodes
        .iter()
        .map(|&q| {
            let v = model.v.eval(q).unwrap_or(0.0);
            let e = model.eps.eval(q).unwrap_or(f64::INFINITY);
            q * q * v * v / (e * e * e)
        })
        .collect();
    let kernel = CubicTable::build(0.0, r_table_max, 8192, |r| {
        let mut s = 0.0;
        for ((q, w), mh) in rho_rule
            .nodes
            .iter()
            .zip(&rho_rule.weights)
            .zip(&mass_hat)
        {
            s += surface * w * q.powi(d as i32 - 1) * mh * fourier_kernel(d, q * r);
        }
        s
    });

    let nodes = sol.grid.nodes();
    let weights = sol.grid.weights();
    let fw: Vec<f64> = weights
        .iter()
        .zip(&sol.psi)
        .map(|(w, p)| w * p * p)
        .collect();
    let rule = gauss_legendre(quad.angular_points.max(24));
    let (ts, tw) = (&rule.0, &rule.1);
    let n = nodes.len();
    let rows: Vec<f64> = exec::fill_indexed(n, |i| {
        let r1 = nodes[i];
        let mut acc = 0.0;
        for j in 0..n {
            let r2 = nodes[j];
            let avg = match d {
                1 => 0.5 * (kernel.eval((r1 - r2).abs()) + kernel.eval(r1 + r2)),
                2 => {
                    let mut s = 0.0;
                    for (t, w) in ts.iter().zip(tw) {
                        let theta = std::f64::consts::PI * (t + 1.0);
                        let dist =
                            (r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * theta.cos()).max(0.0).sqrt();
                        s += w * kernel.eval(dist);
                    }
                    0.5 * s
                }
                _ => {
                    let mut s = 0.0;
                    for (t, w) in ts.iter().zip(tw) {
                        let dist = (r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * t).max(0.0).sqrt();
                        s += w * kernel.eval(dist);
                    }
                    0.5 * s
                }
            };
            acc += fw[j] * avg;
        }
        fw[i] * acc
    });
    let position_route = 2.0 * alpha / d as f64 * exec::sum_stable(&rows);

    let rel = (momentum_route - position_route).abs() / momentum_route.abs().max(1e-300);
    if rel > 1e-6 {
        return Err(PekarError::Quad(QuadError::CrossCheck(format!(
            "semiclassical mass: momentum route {momentum_route:.12e} vs position route {position_route:.12e} (rel {rel:.3e})"
        ))));
    }
    Ok(momentum_route)
}

/// Semiclassical mass with the density transform replaced by a caller-chosen
/// profile (the constant 1 reproduces `alpha * m_pek` exactly).
pub fn pekar_mass_with_rho(
    model: &PolaronModel,
    alpha: f64,
    quad: &QuadratureSpec,
    rho: impl Fn(f64) -> f64 + Sync,
) -> Result<f64, PekarError> {
    let out = crate::quad::integrate_adaptive(
        &|q: f64| {
            let v = model.v.eval(q).unwrap_or(0.0);
            if v == 0.0 {
                return 0.0;
            }
            let e = model.eps.eval(q).unwrap_or(f64::INFINITY);
            let r = rho(q);
            q.powi(model.d as i32 + 1) * v * v * r * r / (e * e * e)
        },
        0.0,
        model.radial_cutoff(quad),
        quad.rel_tol,
        quad.abs_tol,
        8,
    )?;
    Ok(2.0 * alpha / model.d as f64 * sphere_surface(model.d) * out.value)
}

/// Constrained-velocity state at total momentum `p`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SemiclassicalState {
    pub p: f64,
    /// Velocity multiplier solving the momentum constraint, along `p`.
    pub u: f64,
    /// Small-momentum linearization `p / (m + m_pek_alpha)`.
    pub linearized_u: f64,
    /// Residual of the momentum constraint at the returned `u`.
    pub residual: f64,
}

enum MomentKind {
    /// `int p_par f / (eps - u p_par)^2` — field momentum.
    Momentum,
    /// `int eps f / (eps - u p_par)^2` — field energy.
    FieldEnergy,
    /// `int f / (eps - u p_par)` — interaction weight.
    Interaction,
}

fn shifted_moment(
    model: &PolaronModel,
    sol: &PekarSolution,
    u: f64,
    angular: usize,
    kind: MomentKind,
) -> f64 {
    let d = model.d;
    let rule = gauss_legendre(angular);
    let (ts, tw) = (&rule.0, &rule.1);
    let terms: Vec<f64> = sol
        .momentum
        .nodes
        .iter()
        .zip(&sol.momentum.weights)
        .zip(&sol.rho)
        .map(|((&q, &w), &rho)| {
            let v = model.v.eval(q).unwrap_or(0.0);
            if v == 0.0 {
                return 0.0;
            }
            let e = model.eps.eval(q).unwrap_or(f64::INFINITY);
            let f = v * v * rho * rho;
            let angular_part = match d {
                1 => match kind {
                    MomentKind::Momentum => {
                        q * (1.0 / (e - u * q).powi(2) - 1.0 / (e + u * q).powi(2))
                    }
                    MomentKind::FieldEnergy => {
                        e * (1.0 / (e - u * q).powi(2) + 1.0 / (e + u * q).powi(2))
                    }
                    MomentKind::Interaction => 1.0 / (e - u * q) + 1.0 / (e + u * q),
                },
                2 => {
                    let mut s = 0.0;
                    for (t, wt) in ts.iter().zip(tw) {
                        let theta = std::f64::consts::PI * (t + 1.0);
                        let ppar = q * theta.cos();
                        s += wt
                            * std::f64::consts::PI
                            * match kind {
                                MomentKind::Momentum => ppar / (e - u * ppar).powi(2),
                                MomentKind::FieldEnergy => e / (e - u * ppar).powi(2),
                                MomentKind::Interaction => 1.0 / (e - u * ppar),
                            };
                    }
                    s
                }
                _ => {
                    let mut s = 0.0;
                    for (t, wt) in ts.iter().zip(tw) {
                        let ppar = q * t;
                        s += wt
                            * match kind {
                                MomentKind::Momentum => ppar / (e - u * ppar).powi(2),
                                MomentKind::FieldEnergy => e / (e - u * ppar).powi(2),
                                MomentKind::Interaction => 1.0 / (e - u * ppar),
                            };
                    }
                    2.0 * std::f64::consts::PI * s
                }
            };
            w * q.powi(d as i32 - 1) * f * angular_part
        })
        .collect();
    exec::sum_stable(&terms)
}

fn field_momentum(model: &PolaronModel, sol: &PekarSolution, u: f64, angular: usize) -> f64 {
    shifted_moment(model, sol, u, angular, MomentKind::Momentum)
}

/// Solve the scalar momentum constraint `P = m u + alpha * field_momentum(u)`
/// by bisection on `[0, 0.99 c)`; the map is strictly increasing in `u`.
pub fn solve_velocity(
    model: &PolaronModel,
    consts: &ModelConstants,
    sol: &PekarSolution,
    p: f64,
    quad: &QuadratureSpec,
) -> Result<SemiclassicalState, PekarError> {
    let c = consts.crit_velocity;
    if !(c > 0.0) || !c.is_finite() {
        return Err(PekarError::NotSuperfluid { c });
    }
    let m = sol.m;
    let cap = 0.9 * (m + sol.m_pek_alpha) * c;
    if p.abs() >= cap {
        return Err(PekarError::MomentumTooLarge { p, cap });
    }
    let linearized_u = p / (m + sol.m_pek_alpha);
    if p == 0.0 {
        return Ok(SemiclassicalState {
            p,
            u: 0.0,
            linearized_u,
            residual: 0.0,
        });
    }
    let sign = p.signum();
    let target = p.abs();
    let angular = quad.angular_points.max(24);
    let rhs = |u: f64| m * u + model.alpha * field_momentum(model, sol, u, angular);
    let mut lo = 0.0f64;
    let mut hi = 0.99 * c;
    let rhs_hi = rhs(hi);
    if rhs_hi < target {
        return Err(PekarError::NoRoot { p, rhs_max: rhs_hi });
    }
    let tol = 1e-8 * target;
    let mut u = 0.5 * hi;
    let mut res = rhs(u) - target;
    for _ in 0..200 {
        if res.abs() <= tol {
            break;
        }
        if res > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        u = 0.5 * (lo + hi);
        res = rhs(u) - target;
    }
    Ok(SemiclassicalState {
        p,
        u: sign * u,
        linearized_u,
        residual: res,
    })
}

/// Energy of the boosted minimizer with its self-consistently shifted field
/// at the constrained velocity. Reduces to the minimum energy at `p = 0`.
pub fn semiclassical_energy(
    model: &PolaronModel,
    sol: &PekarSolution,
    state: &SemiclassicalState,
    quad: &QuadratureSpec,
) -> Result<f64, PekarError> {
    let u = state.u.abs();
    let p = state.p.abs();
    let m = sol.m;
    let alpha = sol.alpha;
    let angular = quad.angular_points.max(24);
    let field_energy = alpha * shifted_moment(model, sol, u, angular, MomentKind::FieldEnergy);
    let interaction =
        -2.0 * alpha * shifted_moment(model, sol, u, angular, MomentKind::Interaction);
    let field_p = alpha * field_momentum(model, sol, u, angular);
    let constraint = u * (p - m * u - field_p);
    Ok(sol.kinetic + 0.5 * m * u * u + field_energy + interaction + constraint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{ground_lower, ground_upper};
    use crate::model::{compute_constants, PolaronModel, RadialProfile};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn gaussian_model(d: usize, alpha: f64) -> PolaronModel {
        PolaronModel::new(
            d,
            1.0,
            alpha,
            RadialProfile::gaussian(1.0, 1.0).unwrap(),
            RadialProfile::constant(1.0).unwrap(),
        )
        .unwrap()
    }

    fn superfluid_model(alpha: f64) -> PolaronModel {
        PolaronModel::new(
            3,
            1.0,
            alpha,
            RadialProfile::gaussian(1.0, 1.0).unwrap(),
            RadialProfile::sqrt_quadratic(1.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    fn solve(model: &PolaronModel, r_max_widths: f64, n: usize) -> (PekarSolution, ModelConstants) {
        let quad = QuadratureSpec::default();
        let consts = compute_constants(model, &quad).unwrap();
        let width = 1.0 / (model.m * consts.omega_at(model.alpha)).sqrt();
        let grid = RadialGrid::uniform(model.d, r_max_widths * width, n).unwrap();
        let sol = minimize_pekar(model, &consts, &grid, &SolverSpec::default(), &quad).unwrap();
        (sol, consts)
    }

    #[test]
    fn energy_lands_inside_the_certified_bracket_at_alpha_100() {
        let model = gaussian_model(3, 100.0);
        let (sol, consts) = solve(&model, 14.0, 1024);
        let lower = ground_lower(&consts, 100.0).value;
        let upper = ground_upper(&consts, 100.0).value;
        assert!(
            sol.energy >= lower - 1e-6 && sol.energy <= upper + 1e-6,
            "energy {} outside [{lower}, {upper}]",
            sol.energy
        );
        assert!(sol.energy > -523.8743 - 1e-3 && sol.energy < -521.4368 + 1e-3);
    }

    #[test]
    fn solution_invariants_hold() {
        let model = gaussian_model(3, 100.0);
        let (sol, _) = solve(&model, 14.0, 1024);
        let norm = sol
            .grid
            .integrate(&sol.psi.iter().map(|p| p * p).collect::<Vec<_>>());
        assert_relative_eq!(norm, 1.0, epsilon = 1e-10);
        assert_relative_eq!(sol.energy, sol.kinetic + sol.potential, epsilon = 1e-12);
        assert!(sol.potential <= 0.0);
        assert!(sol.m_pek_alpha > 0.0);
        assert_relative_eq!(sol.rho_at(0.0), 1.0, epsilon = 1e-10);
        for &r in sol.rho.iter().step_by(17) {
            assert!(r.abs() <= 1.0 + 1e-10);
        }
        for w in sol.energy_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
        assert!(sol.residual <= SolverSpec::default().defect_tol);
    }

    #[test]
    fn potential_matches_the_momentum_space_identity() {
        // The potential is assembled in momentum space; recompute it from
        // the convolution kernel on the position grid as an independent
        // route and require close agreement.
        let model = gaussian_model(3, 100.0);
        let (sol, _) = solve(&model, 14.0, 1024);
        let d = model.d;
        let surface = sphere_surface(d);
        let g_hat: Vec<f64> = sol
            .momentum
            .nodes
            .iter()
            .map(|&q| {
                let v = model.v.eval(q).unwrap();
                v * v / model.eps.eval(q).unwrap()
            })
            .collect();
        let kernel = CubicTable::build(0.0, 2.0 * sol.grid.r_max + 1.0, 8192, |r| {
            let mut s = 0.0;
            for ((q, w), g) in sol
                .momentum
                .nodes
                .iter()
                .zip(&sol.momentum.weights)
                .zip(&g_hat)
            {
                s += surface * w * q.powi(d as i32 - 1) * g * fourier_kernel(d, q * r);
            }
            s
        });
        let rule = gauss_legendre(32);
        let nodes = sol.grid.nodes();
        let fw: Vec<f64> = sol
            .grid
            .weights()
            .iter()
            .zip(&sol.psi)
            .map(|(w, p)| w * p * p)
            .collect();
        let rows: Vec<f64> = exec::fill_indexed(nodes.len(), |i| {
            let r1 = nodes[i];
            let mut acc = 0.0;
            for (j, &r2) in nodes.iter().enumerate() {
                let mut avg = 0.0;
                for (t, w) in rule.0.iter().zip(&rule.1) {
                    let dist = (r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * t).max(0.0).sqrt();
                    avg += w * kernel.eval(dist);
                }
                acc += fw[j] * 0.5 * avg;
            }
            fw[i] * acc
        });
        let position = -model.alpha * exec::sum_stable(&rows);
        assert_relative_eq!(position, sol.potential, max_relative = 1e-8);
    }

    #[test]
    fn strong_coupling_scaling_approaches_the_harmonic_constant() {
        // (E + alpha h_sq)/sqrt(alpha) -> sqrt(d/2m) ||grad h||, increasing.
        let mut prev = f64::NEG_INFINITY;
        let target = (1.5f64).sqrt() * (1.5 * PI.powf(1.5)).sqrt();
        for (alpha, nodes) in [(100.0, 1024), (1000.0, 1536), (10000.0, 2048)] {
            let model = gaussian_model(3, alpha);
            let (sol, consts) = solve(&model, 14.0, nodes);
            let scaled = (sol.energy + alpha * consts.h_sq) / alpha.sqrt();
            assert!(scaled > prev, "scaled sequence not increasing at {alpha}");
            prev = scaled;
            if alpha == 10000.0 {
                assert!((scaled - target).abs() / target < 0.05, "scaled {scaled}");
            }
        }
    }

    #[test]
    fn pekar_mass_cross_check_and_strong_coupling_limit() {
        let model = gaussian_model(3, 10_000.0);
        let (sol, consts) = solve(&model, 14.0, 2048);
        let quad = QuadratureSpec::default();
        let mass = pekar_mass(&sol, &model, &quad).unwrap();
        assert_relative_eq!(mass, sol.m_pek_alpha, max_relative = 1e-12);
        assert!(
            (mass / model.alpha - consts.m_pek).abs() / consts.m_pek < 0.02,
            "mass/alpha {} vs m_pek {}",
            mass / model.alpha,
            consts.m_pek
        );
        assert!(mass <= model.alpha * consts.m_pek * (1.0 + 1e-12));
        let flat = pekar_mass_with_rho(&model, model.alpha, &quad, |_| 1.0).unwrap();
        assert_relative_eq!(flat, model.alpha * consts.m_pek, max_relative = 1e-9);
    }

    #[test]
    fn restart_from_a_different_iteration_path_reaches_the_same_energy() {
        let model = gaussian_model(3, 100.0);
        let quad = QuadratureSpec::default();
        let consts = compute_constants(&model, &quad).unwrap();
        let width = 1.0 / consts.omega_at(100.0).sqrt();
        let grid = RadialGrid::uniform(3, 14.0 * width, 1024).unwrap();
        let a = minimize_pekar(&model, &consts, &grid, &SolverSpec::default(), &quad).unwrap();
        let solver_b = SolverSpec {
            mixing: 0.22,
            ..SolverSpec::default()
        };
        let b = minimize_pekar(&model, &consts, &grid, &solver_b, &quad).unwrap();
        assert_relative_eq!(a.energy, b.energy, max_relative = 1e-8);
    }

    #[test]
    fn scaling_perturbation_is_stationary_at_the_minimizer() {
        let model = gaussian_model(3, 100.0);
        let (sol, _) = solve(&model, 14.0, 1024);
        // Dilating psi changes the energy only at second order.
        let energy_at = |lam: f64| {
            let kin = sol.kinetic * lam * lam;
            let d = sol.grid.d;
            let surface = sphere_surface(d);
            let terms: Vec<f64> = sol
                .momentum
                .nodes
                .iter()
                .zip(&sol.momentum.weights)
                .map(|(&q, &w)| {
                    let v = model.v.eval(q).unwrap_or(0.0);
                    let e = model.eps.eval(q).unwrap();
                    let rho = sol.rho_at(q / lam);
                    surface * w * q.powi(d as i32 - 1) * v * v / e * rho * rho
                })
                .collect();
            kin - model.alpha * exec::sum_stable(&terms)
        };
        let h = 1e-4;
        let deriv = (energy_at(1.0 + h) - energy_at(1.0 - h)) / (2.0 * h);
        assert!(
            deriv.abs() <= 1e-6 * sol.energy.abs(),
            "directional derivative {deriv} vs energy {}",
            sol.energy
        );
    }

    #[test]
    fn velocity_solution_matches_linearization_and_parity() {
        let model = superfluid_model(1000.0);
        let (sol, consts) = solve(&model, 14.0, 1024);
        let quad = QuadratureSpec::default();
        let at0 = solve_velocity(&model, &consts, &sol, 0.0, &quad).unwrap();
        assert_eq!(at0.u, 0.0);
        let scale = (sol.m + sol.m_pek_alpha) * consts.crit_velocity;
        let p_small = 1e-3 * scale;
        let st = solve_velocity(&model, &consts, &sol, p_small, &quad).unwrap();
        assert!(
            (st.u / st.linearized_u - 1.0).abs() < 1e-3,
            "ratio {}",
            st.u / st.linearized_u
        );
        let plus = solve_velocity(&model, &consts, &sol, 0.1 * scale, &quad).unwrap();
        let minus = solve_velocity(&model, &consts, &sol, -0.1 * scale, &quad).unwrap();
        assert_relative_eq!(plus.u, -minus.u, max_relative = 1e-12);
    }

    #[test]
    fn boosted_energy_reduces_to_the_minimum_and_is_quadratic() {
        let model = superfluid_model(1000.0);
        let (sol, consts) = solve(&model, 14.0, 1024);
        let quad = QuadratureSpec::default();
        let at0 = solve_velocity(&model, &consts, &sol, 0.0, &quad).unwrap();
        let e0 = semiclassical_energy(&model, &sol, &at0, &quad).unwrap();
        assert_relative_eq!(e0, sol.energy, max_relative = 1e-12);
        let mtot = sol.m + sol.m_pek_alpha;
        let scale = mtot * consts.crit_velocity * 0.01;
        let expected = 1.0 / (2.0 * mtot);
        for frac in [0.1, 0.2, 0.4] {
            let p = frac * scale;
            let st = solve_velocity(&model, &consts, &sol, p, &quad).unwrap();
            let e = semiclassical_energy(&model, &sol, &st, &quad).unwrap();
            let c2 = (e - e0) / (p * p);
            assert!(
                (c2 - expected).abs() / expected < 0.01,
                "quadratic coefficient {c2} vs {expected} at P={p}"
            );
            let stm = solve_velocity(&model, &consts, &sol, -p, &quad).unwrap();
            let em = semiclassical_energy(&model, &sol, &stm, &quad).unwrap();
            assert_relative_eq!(e, em, max_relative = 1e-10);
        }
    }

    #[test]
    fn too_coarse_grids_are_rejected() {
        let model = gaussian_model(3, 10_000.0);
        let quad = QuadratureSpec::default();
        let consts = compute_constants(&model, &quad).unwrap();
        let grid = RadialGrid::uniform(3, 10.0, 64).unwrap();
        let err =
            minimize_pekar(&model, &consts, &grid, &SolverSpec::default(), &quad).unwrap_err();
        assert!(matches!(err, PekarError::GridTooCoarse { .. }));
    }
}
