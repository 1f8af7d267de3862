//! Transport and reaction of the proliferating, quiescent and dead cell
//! densities.
//!
//! Each node owns a control cell of width `h`. Face velocities are averages
//! of the two adjacent nodal velocities and the face density is taken from
//! the upwind node, so the face divergence coincides with the central nodal
//! divergence used by the flow solve. Nothing crosses the box boundary.

use crate::error::{Error, Result};
use crate::grid::{ScalarField, VectorField};
use crate::model::{source_terms, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct CellFields {
    pub p: ScalarField,
    pub q: ScalarField,
    pub d: ScalarField,
}

impl CellFields {
    pub fn zeros(grid: crate::grid::Grid) -> Self {
        CellFields { p: ScalarField::zeros(grid), q: ScalarField::zeros(grid), d: ScalarField::zeros(grid) }
    }

    pub fn total(&self) -> ScalarField {
        let mut s = self.p.clone();
        for (i, v) in s.data_mut().iter_mut().enumerate() {
            *v += self.q[i] + self.d[i];
        }
        s
    }

    pub fn fields(&self) -> [&ScalarField; 3] {
        [&self.p, &self.q, &self.d]
    }
}

/// Time-step limits shared by the explicit cell update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLimits {
    pub safety: f64,
    pub dt_max: f64,
    /// Upper bound of the drug concentration, used for the reaction-rate bound.
    pub drug_max: f64,
}

impl Default for StepLimits {
    fn default() -> Self {
        StepLimits { safety: 0.5, dt_max: 1e-2, drug_max: 1.0 }
    }
}

/// Largest total outflow speed `Σ_faces max(u_f·n_f, 0)` over nodes.
pub fn max_outflow(v: &VectorField) -> f64 {
    let g = v.grid();
    let mut best: f64 = 0.0;
    for i in 0..g.len() {
        let mut out = 0.0;
        for a in 0..g.dim() {
            let c = v.comp(a);
            if let Some(j) = g.neighbor(i, a, 1) {
                out += (0.5 * (c[i] + c[j])).max(0.0);
            }
            if let Some(j) = g.neighbor(i, a, -1) {
                out += (-0.5 * (c[i] + c[j])).max(0.0);
            }
        }
        best = best.max(out);
    }
    best
}

/// Stable explicit step: `safety / (outflow/h + 2dη/h² + rate)`, capped by `dt_max`.
///
/// With a single active mechanism this reduces to `safety · h/|v|`,
/// `safety · h²/(2dη)` or `safety / rate`.
pub fn cfl_dt(v: &VectorField, params: &ModelParams, limits: &StepLimits) -> f64 {
    let inv = stability_rate(v, params, limits.drug_max);
    if inv == 0.0 {
        limits.dt_max
    } else {
        (limits.safety / inv).min(limits.dt_max)
    }
}

/// Sum of transport, diffusion and reaction rates bounding the explicit update.
pub fn stability_rate(v: &VectorField, params: &ModelParams, drug_max: f64) -> f64 {
    let g = v.grid();
    let h = g.h();
    let diff = if params.eta > 0.0 { 2.0 * g.dim() as f64 * params.eta / (h * h) } else { 0.0 };
    max_outflow(v) / h + diff + params.max_reaction_rate(drug_max)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CellStepReport {
    /// Mass removed or added by clamping to `[0, ρ_f]`, summed over species.
    pub clamp_mass: f64,
    /// `|ΔM/dt − ∫(K_B C P − K_R D)|` before clamping, relative to the largest term.
    pub mass_budget_residual: f64,
    /// Most negative value before clamping.
    pub undershoot: f64,
}

/// One explicit step of `∂_t Z + div(Z v) = G_Z + η ΔZ` for `Z ∈ {P, Q, D}`.
///
/// `sources_from` supplies the fields the reaction terms are evaluated on
/// (normally the current cells, C and W).
#[allow(clippy::too_many_arguments)]
pub fn step_cells(
    cells: &CellFields,
    v: &VectorField,
    c: &ScalarField,
    w: &ScalarField,
    params: &ModelParams,
    dt: f64,
    drug_max: f64,
    step: usize,
) -> Result<(CellFields, CellStepReport)> {
    step_cells_with_sources(cells, cells, v, c, w, params, dt, drug_max, step)
}

#[allow(clippy::too_many_arguments)]
pub fn step_cells_with_sources(
    cells: &CellFields,
    sources_from: &CellFields,
    v: &VectorField,
    c: &ScalarField,
    w: &ScalarField,
    params: &ModelParams,
    dt: f64,
    drug_max: f64,
    step: usize,
) -> Result<(CellFields, CellStepReport)> {
    let g = *cells.p.grid();
    for f in [&cells.q, &cells.d, c, w, &sources_from.p] {
        g.check_same(f.grid())?;
    }
    g.check_same(v.grid())?;
    let rate = stability_rate(v, params, drug_max);
    if rate > 0.0 && dt * rate > 1.0 + 1e-12 {
        return Err(Error::Cfl { dt, admissible: 1.0 / rate });
    }
    let h = g.h();
    let dim = g.dim();
    let n = g.len();
    let hd = g.cell_volume();
    let lam = dt / h;
    let mu_d = params.eta * dt / (h * h);

    let mut next = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let olds = cells.fields();
    let mut source_total = 0.0;
    let mut source_scale = 0.0;
    for i in 0..n {
        let s = source_terms(sources_from.p[i], sources_from.q[i], sources_from.d[i], c[i], w[i], params);
        for k in 0..3 {
            source_total += s[k];
            source_scale += s[k].abs();
            next[k][i] = olds[k][i] + dt * s[k];
        }
    }
    // face fluxes, each face visited once from its lower node
    for i in 0..n {
        for a in 0..dim {
            let Some(j) = g.neighbor(i, a, 1) else { continue };
            let uf = 0.5 * (v.comp(a)[i] + v.comp(a)[j]);
            for k in 0..3 {
                let z = olds[k];
                let mut flux = if uf >= 0.0 { uf * z[i] } else { uf * z[j] } * lam;
                if mu_d > 0.0 {
                    flux -= mu_d * (z[j] - z[i]);
                }
                next[k][i] -= flux;
                next[k][j] += flux;
            }
        }
    }
    let old_mass: f64 = olds.iter().map(|f| f.data().iter().sum::<f64>()).sum();
    let new_mass: f64 = next.iter().map(|f| f.iter().sum::<f64>()).sum();
    let change = (new_mass - old_mass) / dt;
    let denom = change.abs().max(source_scale).max(old_mass.abs() / dt * f64::EPSILON * 1e3);
    let mass_budget_residual = if denom > 0.0 { (change - source_total).abs() / denom } else { 0.0 };

    let mut clamp = 0.0;
    let mut undershoot: f64 = 0.0;
    for (k, field) in next.iter_mut().enumerate() {
        for (i, z) in field.iter_mut().enumerate() {
            if !z.is_finite() {
                let name = ["P", "Q", "D"][k];
                return Err(Error::NonFinite { field: format!("{name} at node {i}"), step });
            }
            undershoot = undershoot.min(*z);
            let cl = z.clamp(0.0, params.rho_f);
            clamp += (cl - *z).abs();
            *z = cl;
        }
    }
    let [p, q, d] = next;
    Ok((
        CellFields {
            p: ScalarField::from_vec(g, p)?,
            q: ScalarField::from_vec(g, q)?,
            d: ScalarField::from_vec(g, d)?,
        },
        CellStepReport { clamp_mass: clamp * hd, mass_budget_residual, undershoot },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::model::fixtures::sample;

    fn zero_rates() -> ModelParams {
        let mut p = sample();
        for r in [&mut p.k_b, &mut p.k_q, &mut p.k_a, &mut p.k_p, &mut p.k_d, &mut p.k_r, &mut p.i_1, &mut p.i_2] {
            *r = 0.0;
        }
        p
    }

    #[test]
    fn dt_max_when_nothing_moves() {
        let g = Grid::new(2, 128, 1.0).unwrap();
        let v = VectorField::zeros(g);
        let lim = StepLimits { safety: 0.5, dt_max: 0.123, drug_max: 1.0 };
        assert_eq!(cfl_dt(&v, &zero_rates(), &lim), 0.123);
    }

    #[test]
    fn advective_limit() {
        let g = Grid::new(2, 128, 1.0).unwrap(); // h = 1/64
        let v = VectorField::from_fn(g, |_| [1.0, 0.0, 0.0]);
        let lim = StepLimits { safety: 0.5, dt_max: 1.0, drug_max: 1.0 };
        assert_eq!(cfl_dt(&v, &zero_rates(), &lim), 0.0078125);
    }

    #[test]
    fn diffusive_limit() {
        let g = Grid::new(2, 128, 1.0).unwrap();
        let v = VectorField::zeros(g);
        let mut prm = zero_rates();
        prm.eta = 1e-3;
        let lim = StepLimits { safety: 0.5, dt_max: 1.0, drug_max: 1.0 };
        let dt = cfl_dt(&v, &prm, &lim);
        assert!((dt - 0.030517578125).abs() < 1e-15);
        let capped = cfl_dt(&v, &prm, &StepLimits { dt_max: 0.01, ..lim });
        assert_eq!(capped, 0.01);
    }

    #[test]
    fn pure_decay_without_nutrient() {
        let mut prm = zero_rates();
        prm.k_q = 0.5;
        prm.k_a = 0.25;
        let g = Grid::new(2, 8, 1.0).unwrap();
        let p0 = 0.8;
        let mut cells = CellFields::zeros(g);
        cells.p = ScalarField::constant(g, p0);
        let z = ScalarField::zeros(g);
        let v = VectorField::zeros(g);
        let rate = (prm.k_q + prm.k_a) * prm.c_bar;
        let dt = 0.01;
        let steps = 50;
        for s in 0..steps {
            cells = step_cells(&cells, &v, &z, &z, &prm, dt, 1.0, s).unwrap().0;
        }
        let t = dt * steps as f64;
        let exact = p0 * (-rate * t).exp();
        let bound = 2.0 * dt * rate * rate * t * p0;
        assert!((cells.p[30] - exact).abs() <= bound);
        assert!(cells.q.max() > 0.0); // deficit transfers into Q
    }

    #[test]
    fn translated_blob_conserves_mass_and_moves() {
        let prm = zero_rates();
        let g = Grid::new(2, 128, 1.0).unwrap();
        let blob = ScalarField::from_fn(g, |x| (-((x[0] + 0.2).powi(2) + x[1] * x[1]) / 0.01).exp() * 0.5);
        let mut cells = CellFields::zeros(g);
        cells.p = blob;
        let u = [0.6, 0.3, 0.0];
        let v = VectorField::from_fn(g, |_| u);
        let z = ScalarField::zeros(g);
        let centroid = |f: &ScalarField| {
            let m: f64 = f.data().iter().sum();
            let cx: f64 = (0..g.len()).map(|i| f[i] * g.coords(i)[0]).sum::<f64>() / m;
            let cy: f64 = (0..g.len()).map(|i| f[i] * g.coords(i)[1]).sum::<f64>() / m;
            (m, cx, cy)
        };
        let (m0, x0, y0) = centroid(&cells.p);
        let lim = StepLimits { safety: 0.5, dt_max: 1.0, drug_max: 1.0 };
        let dt = cfl_dt(&v, &prm, &lim);
        let steps = 40;
        for s in 0..steps {
            let (next, rep) = step_cells(&cells, &v, &z, &z, &prm, dt, 1.0, s).unwrap();
            assert!(rep.undershoot >= -1e-15);
            cells = next;
        }
        let (m1, x1, y1) = centroid(&cells.p);
        assert!((m1 - m0).abs() <= 1e-12 * m0);
        let t = dt * steps as f64;
        assert!((x1 - x0 - u[0] * t).abs() < 1e-10);
        assert!((y1 - y0 - u[1] * t).abs() < 1e-10);
    }

    #[test]
    fn oversized_step_rejected() {
        let prm = zero_rates();
        let g = Grid::new(2, 16, 1.0).unwrap();
        let v = VectorField::from_fn(g, |_| [1.0, 0.0, 0.0]);
        let z = ScalarField::zeros(g);
        let err = step_cells(&CellFields::zeros(g), &v, &z, &z, &prm, 1.0, 1.0, 0).unwrap_err();
        assert!(matches!(err, Error::Cfl { .. }));
    }

    #[test]
    fn nan_reported_with_step() {
        let prm = zero_rates();
        let g = Grid::new(2, 16, 1.0).unwrap();
        let mut cells = CellFields::zeros(g);
        cells.d[20] = f64::NAN;
        let v = VectorField::zeros(g);
        let z = ScalarField::zeros(g);
        match step_cells(&cells, &v, &z, &z, &prm, 0.01, 1.0, 7) {
            Err(Error::NonFinite { step, .. }) => assert_eq!(step, 7),
            other => panic!("{other:?}"),
        }
    }
}
