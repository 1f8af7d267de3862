//! Implicit diffusion of nutrient and drug with frozen-coefficient uptake.
//!
//! Each step solves
//!
//! ```text
//! (C − C_old)/dt − div(ν_ω ∇C) + k C + (H_w(Φ)/ε_chem) C = 0,   C = 0 on ∂B
//! ```
//!
//! where `k ≥ 0` is the uptake coefficient evaluated on the previous
//! concentration. The matrix is a symmetric M-matrix, so the update cannot
//! leave `[0, max C_old]`.

use crate::domain::{heaviside, LevelSetField};
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::linalg::{jacobi_pcg, SolveStats, TripletBuilder};
use crate::model::{drug_uptake, nutrient_uptake, CoefficientFields, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct ChemFields {
    pub c: ScalarField,
    pub w: ScalarField,
}

impl ChemFields {
    pub fn zeros(grid: Grid) -> Self {
        ChemFields { c: ScalarField::zeros(grid), w: ScalarField::zeros(grid) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChemOptions {
    /// Relaxation time of the exterior sink.
    pub eps_chem: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ChemOptions {
    fn default() -> Self {
        ChemOptions { eps_chem: 1e-3, tol: 1e-12, max_iter: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChemStepReport {
    pub iterations: usize,
    pub residual: f64,
}

/// Solve `(I/dt + A_ν + diag(k)) Z = Z_old/dt + f` with zero boundary values.
/// `sink` is the total zeroth-order coefficient per node.
pub fn implicit_diffusion(
    z_old: &ScalarField,
    nu: &ScalarField,
    sink: &[f64],
    dt: f64,
    forcing: Option<&ScalarField>,
    opts: &ChemOptions,
) -> Result<(ScalarField, SolveStats)> {
    let g = *z_old.grid();
    g.check_same(nu.grid())?;
    let n = g.len();
    let h2 = g.h() * g.h();
    let mut tb = TripletBuilder::with_capacity(n, n * (2 * g.dim() + 1));
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        if g.is_boundary(i) {
            tb.add(i, i, 1.0 / dt);
            continue;
        }
        let mut diag = 1.0 / dt + sink[i];
        for a in 0..g.dim() {
            for dir in [-1, 1] {
                let j = g.neighbor(i, a, dir).unwrap();
                let nf = 0.5 * (nu[i] + nu[j]) / h2;
                diag += nf;
                if !g.is_boundary(j) {
                    tb.add(i, j, -nf);
                }
            }
        }
        tb.add(i, i, diag);
        rhs[i] = z_old[i] / dt + forcing.map_or(0.0, |f| f[i]);
    }
    let a = tb.build();
    let mut x: Vec<f64> = (0..n).map(|i| if g.is_boundary(i) { 0.0 } else { z_old[i] }).collect();
    let stats = if rhs.iter().all(|&r| r == 0.0) {
        x.iter_mut().for_each(|v| *v = 0.0);
        SolveStats { iterations: 0, residual: 0.0, history: vec![0.0] }
    } else {
        jacobi_pcg(&a, &rhs, &mut x, opts.tol, opts.max_iter)?
    };
    Ok((ScalarField::from_vec(g, x)?, stats))
}

fn exterior_sink(ls: &LevelSetField, eps_chem: f64) -> Vec<f64> {
    let w = ls.width();
    ls.phi().data().iter().map(|&p| heaviside(p, w) / eps_chem).collect()
}

/// One backward-Euler step of the nutrient equation.
#[allow(clippy::too_many_arguments)]
pub fn step_nutrient(
    c: &ScalarField,
    p: &ScalarField,
    q: &ScalarField,
    coeffs: &CoefficientFields,
    ls: &LevelSetField,
    params: &ModelParams,
    dt: f64,
    opts: &ChemOptions,
) -> Result<(ScalarField, ChemStepReport)> {
    let g = *c.grid();
    for f in [p, q, ls.phi()] {
        g.check_same(f.grid())?;
    }
    let mut sink = exterior_sink(ls, opts.eps_chem);
    let tol = ROUNDOFF * params.c_bar;
    for i in 0..g.len() {
        if c[i] < -tol || c[i] > params.c_bar + tol {
            return Err(Error::MaxPrinciple { species: "C", value: c[i], ceiling: params.c_bar });
        }
        let k = nutrient_uptake(c[i].clamp(0.0, params.c_bar), p[i], q[i], params);
        if k < 0.0 {
            return Err(Error::MaxPrinciple { species: "C", value: c[i], ceiling: params.c_bar });
        }
        sink[i] += k;
    }
    let (out, stats) = implicit_diffusion(c, &coeffs.nu1_omega, &sink, dt, None, opts)?;
    Ok((out, ChemStepReport { iterations: stats.iterations, residual: stats.residual }))
}

/// One backward-Euler step of the drug equation.
#[allow(clippy::too_many_arguments)]
pub fn step_drug(
    w: &ScalarField,
    p: &ScalarField,
    q: &ScalarField,
    coeffs: &CoefficientFields,
    ls: &LevelSetField,
    params: &ModelParams,
    dt: f64,
    opts: &ChemOptions,
) -> Result<(ScalarField, ChemStepReport)> {
    let g = *w.grid();
    for f in [p, q, ls.phi()] {
        g.check_same(f.grid())?;
    }
    let mut sink = exterior_sink(ls, opts.eps_chem);
    let tol = ROUNDOFF * w.max_abs();
    for i in 0..g.len() {
        if w[i] < -tol {
            return Err(Error::MaxPrinciple { species: "W", value: w[i], ceiling: f64::INFINITY });
        }
        let k = drug_uptake(w[i].max(0.0), p[i], q[i], params);
        if k < 0.0 {
            return Err(Error::MaxPrinciple { species: "W", value: w[i], ceiling: f64::INFINITY });
        }
        sink[i] += k;
    }
    let (out, stats) = implicit_diffusion(w, &coeffs.nu2_omega, &sink, dt, None, opts)?;
    Ok((out, ChemStepReport { iterations: stats.iterations, residual: stats.residual }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyCheck {
    pub energy: f64,
    pub dissipation: f64,
    /// `(E − E_prev)/dt + Diss`.
    pub rate: f64,
    pub ok: bool,
}

/// Relative size of values treated as roundoff in the bound checks.
const ROUNDOFF: f64 = 1e-10;

/// Relative tolerance on the discrete energy inequality.
pub const ENERGY_TOL: f64 = 1e-8;

/// `∫ ν |∇Z|²` in face form, with zero values outside the box.
pub fn dissipation(z: &ScalarField, nu: &ScalarField) -> f64 {
    let g = *z.grid();
    let h2 = g.h() * g.h();
    let mut s = 0.0;
    for i in 0..g.len() {
        for a in 0..g.dim() {
            if let Some(j) = g.neighbor(i, a, 1) {
                // faces between two boundary nodes carry no unknowns
                if g.is_boundary(i) && g.is_boundary(j) {
                    continue;
                }
                let d = z[j] - z[i];
                s += 0.5 * (nu[i] + nu[j]) * d * d / h2;
            }
        }
    }
    s * g.cell_volume()
}

pub fn energy(z: &ScalarField) -> f64 {
    0.5 * z.data().iter().map(|v| v * v).sum::<f64>() * z.grid().cell_volume()
}

/// Check `(E(Z) − E(Z_prev))/dt + ∫ν|∇Z|² ≤ tol`, with `tol` relative to `max(E)/dt`.
pub fn energy_monitor(z: &ScalarField, z_prev: &ScalarField, nu: &ScalarField, dt: f64) -> EnergyCheck {
    let e = energy(z);
    let e_prev = energy(z_prev);
    let diss = dissipation(z, nu);
    let rate = (e - e_prev) / dt + diss;
    let scale = e.max(e_prev) / dt;
    EnergyCheck { energy: e, dissipation: diss, rate, ok: rate <= ENERGY_TOL * scale }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::LevelSetField;
    use crate::model::{coefficient_fields, fixtures::sample, DrugResponse};
    use std::f64::consts::PI;

    fn all_tumor(n: usize, l: f64) -> LevelSetField {
        let g = Grid::new(2, n, l).unwrap();
        LevelSetField::new(ScalarField::constant(g, -1.0), 1.5).unwrap()
    }

    #[test]
    fn zero_is_fixed_point() {
        let prm = sample();
        let ls = all_tumor(16, 1.0);
        let g = *ls.grid();
        let coeffs = coefficient_fields(&prm, &ls);
        let z = ScalarField::zeros(g);
        let one = ScalarField::constant(g, 0.5);
        let opts = ChemOptions::default();
        let (c, _) = step_nutrient(&z, &one, &one, &coeffs, &ls, &prm, 0.01, &opts).unwrap();
        assert!(c.data().iter().all(|&v| v == 0.0));
        let (w, _) = step_drug(&z, &one, &one, &coeffs, &ls, &prm, 0.01, &opts).unwrap();
        assert!(w.data().iter().all(|&v| v == 0.0));
    }

    /// Heat equation on [0,1]² (box [-0.5,0.5]² shifted), zero uptake.
    fn heat_error(n: usize, dt: f64, t_end: f64, drug: bool) -> f64 {
        let mut prm = sample();
        prm.nu_1 = 0.1;
        prm.nu_2 = 0.1;
        prm.g1 = DrugResponse::None;
        prm.g2 = DrugResponse::None;
        let ls = all_tumor(n, 0.5);
        let g = *ls.grid();
        let coeffs = coefficient_fields(&prm, &ls);
        let exact = |t: f64| {
            ScalarField::from_fn(g, |x| {
                (-2.0 * PI * PI * 0.1 * t).exp() * (PI * (x[0] + 0.5)).sin() * (PI * (x[1] + 0.5)).sin()
            })
        };
        let z = ScalarField::zeros(g);
        let mut u = exact(0.0);
        let steps = (t_end / dt).round() as usize;
        let opts = ChemOptions::default();
        for s in 0..steps {
            let prev = u.clone();
            u = if drug {
                step_drug(&u, &z, &z, &coeffs, &ls, &prm, dt, &opts).unwrap().0
            } else {
                step_nutrient(&u, &z, &z, &coeffs, &ls, &prm, dt, &opts).unwrap().0
            };
            let chk = energy_monitor(&u, &prev, &coeffs.nu1_omega, dt);
            assert!(chk.ok, "energy inequality broken at step {s}: {chk:?}");
        }
        let ex = exact(steps as f64 * dt);
        let diff: Vec<f64> = u.data().iter().zip(ex.data()).map(|(a, b)| a - b).collect();
        (diff.iter().map(|v| v * v).sum::<f64>() * g.cell_volume()).sqrt()
    }

    #[test]
    fn heat_equation_orders() {
        // spatial: dt small enough that the temporal error is negligible
        let e: Vec<f64> = [8usize, 16, 32].iter().map(|&n| heat_error(n, 1e-4, 0.05, false)).collect();
        let s1 = (e[0] / e[1]).log2();
        let s2 = (e[1] / e[2]).log2();
        assert!((s1 - 2.0).abs() < 0.3 && (s2 - 2.0).abs() < 0.3, "spatial orders {s1} {s2} from {e:?}");
        // temporal: fine grid, coarse steps
        let t: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&dt| heat_error(64, dt, 0.2, true)).collect();
        let r1 = (t[0] / t[1]).log2();
        let r2 = (t[1] / t[2]).log2();
        assert!((r1 - 1.0).abs() < 0.2 && (r2 - 1.0).abs() < 0.2, "temporal orders {r1} {r2} from {t:?}");
    }

    #[test]
    fn nutrient_never_exceeds_ceiling() {
        let prm = sample();
        let g = Grid::new(2, 32, 1.0).unwrap();
        let ls = crate::domain::init_levelset(&crate::domain::Shape::sphere([0.0; 3], 0.3), g, 1.5).unwrap();
        let coeffs = coefficient_fields(&prm, &ls);
        let inside = ScalarField::from_fn(g, |x| if x[0] * x[0] + x[1] * x[1] < 0.09 { 1.0 } else { 0.0 });
        let mut c = inside.map(|v| v * prm.c_bar);
        let p = inside.map(|v| 0.6 * v);
        let q = inside.map(|v| 0.3 * v);
        let opts = ChemOptions::default();
        for _ in 0..100 {
            c = step_nutrient(&c, &p, &q, &coeffs, &ls, &prm, 0.01, &opts).unwrap().0;
            assert!(c.max() <= prm.c_bar + 1e-12);
            assert!(c.min() >= -1e-12);
        }
    }

    #[test]
    fn breached_ceiling_is_an_error() {
        let prm = sample();
        let ls = all_tumor(16, 1.0);
        let g = *ls.grid();
        let coeffs = coefficient_fields(&prm, &ls);
        let c = ScalarField::constant(g, 3.0 * prm.c_bar);
        let q = ScalarField::constant(g, 1.0);
        let err = step_nutrient(&c, &ScalarField::zeros(g), &q, &coeffs, &ls, &prm, 0.01, &ChemOptions::default());
        assert!(matches!(err, Err(Error::MaxPrinciple { species: "C", .. })));
    }

    #[test]
    fn drug_uptake_matches_scalar_ode() {
        let mut prm = sample();
        prm.nu_2 = 1e-8;
        prm.mu_2 = 0.0;
        let ls = all_tumor(16, 1.0);
        let g = *ls.grid();
        let coeffs = coefficient_fields(&prm, &ls);
        let p = ScalarField::constant(g, prm.rho_f);
        let q = ScalarField::zeros(g);
        let mut w = ScalarField::constant(g, 1.0);
        let dt = 1e-3;
        let steps = 200;
        let opts = ChemOptions::default();
        for _ in 0..steps {
            w = step_drug(&w, &p, &q, &coeffs, &ls, &prm, dt, &opts).unwrap().0;
        }
        // fine RK4 reference for dW/dt = -μ₁ G₁(W) W ρ_f
        let f = |y: f64| -prm.mu_1 * y / (1.0 + y) * y * prm.rho_f;
        let mut y = 1.0;
        let fine = 1e-5;
        for _ in 0..(steps as f64 * dt / fine).round() as usize {
            let k1 = f(y);
            let k2 = f(y + 0.5 * fine * k1);
            let k3 = f(y + 0.5 * fine * k2);
            let k4 = f(y + fine * k3);
            y += fine / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let centre = g.index([8, 8, 0]);
        assert!((w[centre] - y).abs() <= 2.0 * dt, "{} vs {y}", w[centre]);
    }

    #[test]
    fn energy_monitor_cases() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let z = ScalarField::zeros(g);
        let nu = ScalarField::constant(g, 1.0);
        let chk = energy_monitor(&z, &z, &nu, 0.1);
        assert_eq!((chk.energy, chk.dissipation), (0.0, 0.0));
        assert!(chk.ok);
        // injected growth
        let prev = ScalarField::constant(g, 0.1);
        let grown = ScalarField::constant(g, 0.2);
        assert!(!energy_monitor(&grown, &prev, &nu, 0.1).ok);
    }
}
