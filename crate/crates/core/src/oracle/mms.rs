//! Manufactured-solution convergence studies for the diffusion, transport and
//! flow solvers.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::cells::{step_cells, CellFields};
use crate::chem::{implicit_diffusion, ChemOptions};
use crate::domain::{BoundaryVelocity, LevelSetField};
use crate::error::{Error, Result};
use crate::flow::{solve_flow_forced, FlowOptions};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::model::{coefficient_fields, DrugResponse, ModelParams};

/// Errors below this are treated as roundoff and no slope is fitted.
const ROUNDOFF_ERROR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MmsComponent {
    /// Heat equation against its slowest decaying Fourier mode.
    Diffusion,
    /// Heat equation against the exact solution of the discrete scheme.
    DiscreteDiffusion,
    /// Upwind transport of a Gaussian by a uniform velocity.
    Advection,
    /// Penalized Brinkman solve with manufactured velocity and pressure.
    Flow,
}

impl MmsComponent {
    pub fn name(self) -> &'static str {
        match self {
            MmsComponent::Diffusion => "diffusion",
            MmsComponent::DiscreteDiffusion => "discrete_diffusion",
            MmsComponent::Advection => "advection",
            MmsComponent::Flow => "flow",
        }
    }

    /// Expected order and allowed deviation.
    pub fn expected(self) -> (f64, f64) {
        match self {
            MmsComponent::Diffusion | MmsComponent::DiscreteDiffusion | MmsComponent::Flow => (2.0, 0.3),
            MmsComponent::Advection => (1.0, 0.2),
        }
    }

    pub fn default_levels(self) -> Vec<usize> {
        match self {
            MmsComponent::Advection => vec![32, 64, 128, 256],
            _ => vec![16, 32, 64],
        }
    }
}

impl fmt::Display for MmsComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MmsComponent {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "diffusion" => Ok(MmsComponent::Diffusion),
            "discrete_diffusion" => Ok(MmsComponent::DiscreteDiffusion),
            "advection" => Ok(MmsComponent::Advection),
            "flow" => Ok(MmsComponent::Flow),
            other => Err(Error::Config(format!("unknown MMS component '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsResult {
    pub component: MmsComponent,
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log h`.
    pub order: Option<f64>,
    pub expected: f64,
    pub tol: f64,
    pub pass: bool,
    pub note: Option<String>,
}

impl fmt::Display for MmsResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let order = self.order.map_or("n/a".to_string(), |o| format!("{o:.3}"));
        let errs: Vec<String> = self.errors.iter().map(|e| format!("{e:.3e}")).collect();
        write!(
            f,
            "{}: order {} (expected {} +/- {}), errors [{}] {}",
            self.component,
            order,
            self.expected,
            self.tol,
            errs.join(", "),
            if self.pass { "PASS" } else { "FAIL" }
        )?;
        if let Some(n) = &self.note {
            write!(f, " ({n})")?;
        }
        Ok(())
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Judge an error sequence against the expected order.
pub fn assess(component: MmsComponent, h: Vec<f64>, errors: Vec<f64>) -> MmsResult {
    let (expected, tol) = component.expected();
    let scale = 1.0;
    if errors.iter().all(|&e| e <= ROUNDOFF_ERROR * scale) {
        return MmsResult {
            component,
            h,
            errors,
            order: None,
            expected,
            tol,
            pass: true,
            note: Some("errors at roundoff level; slope not measured".into()),
        };
    }
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let order = fit_slope(&lx, &ly);
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    let pass = monotone && (order - expected).abs() <= tol;
    let note = (!monotone).then(|| "error does not decrease under refinement".to_string());
    MmsResult { component, h, errors, order: Some(order), expected, tol, pass, note }
}

/// Run one study over `levels` (cells per axis, at least three levels).
pub fn mms_convergence(component: MmsComponent, levels: &[usize]) -> Result<MmsResult> {
    if levels.len() < 3 {
        return Err(Error::Config(format!("{component}: at least 3 refinement levels are needed")));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("{component}: levels must increase")));
    }
    let mut h = Vec::with_capacity(levels.len());
    let mut errors = Vec::with_capacity(levels.len());
    for &n in levels {
        let grid = Grid::new(2, n, 0.5)?;
        let e = match component {
            MmsComponent::Diffusion => diffusion_error(grid, false)?,
            MmsComponent::DiscreteDiffusion => diffusion_error(grid, true)?,
            MmsComponent::Advection => advection_error(grid)?,
            MmsComponent::Flow => flow_error(grid)?,
        };
        h.push(grid.h());
        errors.push(e);
    }
    Ok(assess(component, h, errors))
}

/// Parameters with every rate switched off.
fn quiet_params() -> ModelParams {
    ModelParams {
        k_b: 0.0,
        k_q: 0.0,
        k_a: 0.0,
        k_p: 0.0,
        k_d: 0.0,
        k_r: 0.0,
        k_1: 0.0,
        k_2: 0.0,
        mu_1: 0.0,
        mu_2: 0.0,
        i_1: 0.0,
        i_2: 0.0,
        c_bar: 1.0,
        rho_f: 1.0,
        mu: 1.0,
        k_perm: 1.0,
        nu_1: 1.0,
        nu_2: 1.0,
        eps_penalty: 1e-3,
        omega: 1e-2,
        eta: 0.0,
        g1: DrugResponse::None,
        g2: DrugResponse::None,
    }
}

fn discrete_l2(a: &ScalarField, b: &ScalarField) -> f64 {
    let hd = a.grid().cell_volume();
    (a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * hd).sqrt()
}

/// Product of sines vanishing on the box boundary.
fn sine_mode(grid: &Grid, x: [f64; 3]) -> f64 {
    let l = grid.half_extent();
    let k = PI / (2.0 * l);
    (0..grid.dim()).map(|a| (k * (x[a] + l)).sin()).product()
}

fn diffusion_error(grid: Grid, discrete: bool) -> Result<f64> {
    let nu = 1.0;
    let t_end = 0.05;
    let h = grid.h();
    let steps = (t_end / (0.25 * h * h)).ceil() as usize;
    let dt = t_end / steps as f64;
    let k = PI / (2.0 * grid.half_extent());
    let dim = grid.dim() as f64;
    let nu_field = ScalarField::constant(grid, nu);
    let sink = vec![0.0; grid.len()];
    let opts = ChemOptions { tol: 1e-13, ..ChemOptions::default() };
    let mut z = ScalarField::from_fn(grid, |x| sine_mode(&grid, x));
    for _ in 0..steps {
        z = implicit_diffusion(&z, &nu_field, &sink, dt, None, &opts)?.0;
    }
    let decay = if discrete {
        let lam = nu * dim * 4.0 / (h * h) * (0.5 * k * h).sin().powi(2);
        (1.0 + dt * lam).powi(-(steps as i32))
    } else {
        (-nu * dim * k * k * t_end).exp()
    };
    let exact = ScalarField::from_fn(grid, |x| decay * sine_mode(&grid, x));
    Ok(discrete_l2(&z, &exact))
}

fn advection_error(grid: Grid) -> Result<f64> {
    let u = [1.0, 0.5, 0.0];
    let start = [-0.15, -0.1, 0.0];
    let width = 0.1;
    let t_end = 0.2;
    let blob = |x: [f64; 3], t: f64| {
        let r2: f64 = (0..2).map(|a| (x[a] - start[a] - u[a] * t).powi(2)).sum();
        0.5 * (-r2 / (width * width)).exp()
    };
    let h = grid.h();
    let steps = (t_end / (0.4 * h / (u[0] + u[1]))).ceil() as usize;
    let dt = t_end / steps as f64;
    let params = quiet_params();
    let v = VectorField::from_fn(grid, |_| u);
    let zero = ScalarField::zeros(grid);
    let mut cells = CellFields {
        p: ScalarField::from_fn(grid, |x| blob(x, 0.0)),
        q: ScalarField::zeros(grid),
        d: ScalarField::zeros(grid),
    };
    for s in 0..steps {
        cells = step_cells(&cells, &v, &zero, &zero, &params, dt, 0.0, s + 1)?.0;
    }
    let exact = ScalarField::from_fn(grid, |x| blob(x, t_end));
    Ok(discrete_l2(&cells.p, &exact))
}

fn flow_error(grid: Grid) -> Result<f64> {
    let params = quiet_params();
    let opts = FlowOptions { tol_lin: 1e-12, ..FlowOptions::default() };
    let l = grid.half_extent();
    let k = PI / (2.0 * l);
    let dim = grid.dim();
    let amp = [1.0, -0.5, 0.25];
    // v_a = amp_a Π sin(k(x_b+L)), σ = Π sin(k(x_b+L)) (both vanish on the box)
    let s = |x: [f64; 3], a: usize| (k * (x[a] + l)).sin();
    let c = |x: [f64; 3], a: usize| (k * (x[a] + l)).cos();
    let prod_except = |x: [f64; 3], skip: usize| (0..dim).filter(|&b| b != skip).map(|b| s(x, b)).product::<f64>();
    let mode = |x: [f64; 3]| (0..dim).map(|b| s(x, b)).product::<f64>();
    let exact = VectorField::from_fn(grid, |x| {
        let m = mode(x);
        let mut v = [0.0; 3];
        for a in 0..dim {
            v[a] = amp[a] * m;
        }
        v
    });
    let div = |x: [f64; 3]| (0..dim).map(|a| amp[a] * k * c(x, a) * prod_except(x, a)).sum::<f64>();
    let lambda = opts.lambda_pen * params.mu;
    let g = ScalarField::from_fn(grid, |x| div(x) + mode(x) / lambda);
    let mu = params.mu;
    let forcing = VectorField::from_fn(grid, |x| {
        let m = mode(x);
        let mut f = [0.0; 3];
        for a in 0..dim {
            let lap = -(dim as f64) * k * k * amp[a] * m;
            let grad_sigma = k * c(x, a) * prod_except(x, a);
            f[a] = -mu * lap + mu / params.k_perm * amp[a] * m + grad_sigma;
        }
        f
    });
    let ls = LevelSetField::new(ScalarField::constant(grid, -1.0), 1.5)?;
    let coeffs = coefficient_fields(&params, &ls);
    let bv = BoundaryVelocity::zero(grid.support_radius());
    let (state, _) = solve_flow_forced(&g, &ls, &bv, &coeffs, &params, &opts, 0.0, Some(&forcing))?;
    let hd = grid.cell_volume();
    let err2: f64 =
        (0..grid.len()).map(|i| (0..dim).map(|a| (state.v.comp(a)[i] - exact.comp(a)[i]).powi(2)).sum::<f64>()).sum();
    Ok((err2 * hd).sqrt())
}

/// Components and levels of an MMS run, read from `mms.<key> = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct MmsPlan {
    pub studies: BTreeMap<MmsComponent, Vec<usize>>,
}

impl Default for MmsPlan {
    fn default() -> Self {
        let studies = [MmsComponent::Diffusion, MmsComponent::Advection, MmsComponent::Flow]
            .into_iter()
            .map(|c| (c, c.default_levels()))
            .collect();
        MmsPlan { studies }
    }
}

impl MmsPlan {
    /// Keys: `mms.components = diffusion,advection,flow` and optionally
    /// `mms.levels.<component> = 16,32,64`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut components: Option<Vec<MmsComponent>> = None;
        let mut levels: BTreeMap<MmsComponent, Vec<usize>> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "mms.components" {
                components = Some(v.split(',').map(str::parse).collect::<Result<_>>()?);
            } else if let Some(name) = k.strip_prefix("mms.levels.") {
                let comp: MmsComponent = name.parse()?;
                let ls = v
                    .split(',')
                    .map(|s| s.trim().parse::<usize>().map_err(|_| Error::Config(format!("{k}: bad level '{s}'"))))
                    .collect::<Result<Vec<_>>>()?;
                levels.insert(comp, ls);
            } else {
                return Err(Error::Config(format!("unknown key '{k}'")));
            }
        }
        let components = components.unwrap_or_else(|| MmsPlan::default().studies.keys().copied().collect());
        let studies = components
            .into_iter()
            .map(|c| {
                let l = levels.get(&c).cloned().unwrap_or_else(|| c.default_levels());
                (c, l)
            })
            .collect();
        Ok(MmsPlan { studies })
    }

    pub fn run(&self) -> Result<Vec<MmsResult>> {
        self.studies.iter().map(|(c, l)| mms_convergence(*c, l)).collect()
    }
}
