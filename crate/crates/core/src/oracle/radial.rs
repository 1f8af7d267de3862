//! Radially symmetric reference solver on a fine 1D grid.
//!
//! Finite volumes in `r` on `[0, outer_radius]`: densities and concentrations
//! at cell centres, radial velocity on faces. Each step tracks the interface
//! radius with RK4, solves the radial Brinkman balance as a tridiagonal
//! two-point problem, moves the cells with explicit upwind fluxes and advances
//! nutrient and drug with backward Euler. Bounds and the discrete energy
//! inequality are checked after every step; a breach is a hard error.

use std::f64::consts::PI;

use crate::domain::{BoundaryVelocity, Shape, VelocityPreset};
use crate::error::{Error, Result};
use crate::linalg::thomas;
use crate::model::ModelParams;
use crate::sim::{InitialProfile, Scenario};

/// Cells of the radial grid used for baselines.
pub const DEFAULT_RADIAL_CELLS: usize = 4096;
const BOUND_TOL: f64 = 1e-10;
const ENERGY_TOL: f64 = 1e-8;
/// Backward Euler sub-steps of nutrient and drug per cell step.
const CHEM_SUBSTEPS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct RadialConfig {
    pub dim: usize,
    pub outer_radius: f64,
    pub n_r: usize,
    pub initial_radius: f64,
    /// Half-width of the smoothed interface.
    pub width: f64,
    pub velocity: BoundaryVelocity,
    pub params: ModelParams,
    pub eps_chem: f64,
    /// Grad-div weight relative to `μ`.
    pub lambda_pen: f64,
    /// Profiles for P, Q, D, C, W as functions of `r`.
    pub initial: [InitialProfile; 5],
    /// Largest step; the solver may take smaller ones for stability.
    pub dt: f64,
}

impl RadialConfig {
    /// Radial reduction of a scenario: sphere centred at the origin, radial
    /// (or zero) interface velocity, profiles that depend on `|x|` only.
    ///
    /// The step is a tenth of the scenario's `dt_max`, the interface width
    /// matches the scenario grid, and the radial domain is the ball inscribed
    /// in the box.
    pub fn from_scenario(sc: &Scenario) -> Result<Self> {
        let (center, radius) = match &sc.shape {
            Shape::Sphere { center, radius } => (*center, *radius),
            other => return Err(Error::ScenarioMismatch(format!("radial oracle needs a sphere, got {other:?}"))),
        };
        if center.iter().any(|c| c.abs() > 1e-12) {
            return Err(Error::ScenarioMismatch("radial oracle needs the sphere centred at the origin".into()));
        }
        match sc.velocity.preset() {
            VelocityPreset::Zero | VelocityPreset::RadialExpansion { .. } => {}
            other => return Err(Error::ScenarioMismatch(format!("velocity {other:?} is not radial"))),
        }
        for prof in &sc.initial {
            if let InitialProfile::Gaussian { center, .. } = prof {
                if center.iter().any(|c| c.abs() > 1e-12) {
                    return Err(Error::ScenarioMismatch("gaussian profile off the origin is not radial".into()));
                }
            }
        }
        Ok(RadialConfig {
            dim: sc.grid.dim(),
            outer_radius: sc.grid.half_extent(),
            n_r: DEFAULT_RADIAL_CELLS,
            initial_radius: radius,
            width: sc.numerics.smoothing_k * sc.grid.h(),
            velocity: sc.velocity.clone(),
            params: sc.params.clone(),
            eps_chem: sc.eps_chem(),
            lambda_pen: sc.numerics.lambda_pen,
            initial: sc.initial.clone(),
            dt: sc.numerics.dt_max / 10.0,
        })
    }
}

/// Radial fields at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub t: f64,
    /// Strictly increasing radii.
    pub r: Vec<f64>,
    /// P, Q, D, C, W at `r`.
    pub species: [Vec<f64>; 5],
    pub v_r: Vec<f64>,
    pub sigma: Vec<f64>,
}

pub const SPECIES: [&str; 5] = ["P", "Q", "D", "C", "W"];

impl RadialProfile {
    pub fn validate(&self) -> Result<()> {
        if self.r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::OracleInvariant("radii are not strictly increasing".into()));
        }
        let n = self.r.len();
        for (name, f) in SPECIES.iter().zip(&self.species).chain([(&"v_r", &self.v_r), (&"sigma", &self.sigma)]) {
            if f.len() != n {
                return Err(Error::OracleInvariant(format!("{name} has {} values for {n} radii", f.len())));
            }
            if f.iter().any(|x| !x.is_finite()) {
                return Err(Error::OracleInvariant(format!("{name} is not finite")));
            }
        }
        Ok(())
    }
}

fn smooth_step(phi: f64, w: f64) -> f64 {
    if phi <= -w {
        0.0
    } else if phi >= w {
        1.0
    } else {
        0.5 * (1.0 + phi / w + (PI * phi / w).sin() / PI)
    }
}

fn smooth_delta(phi: f64, w: f64) -> f64 {
    if phi.abs() >= w {
        0.0
    } else {
        0.5 * (1.0 + (PI * phi / w).cos()) / w
    }
}

fn reactions(p: f64, q: f64, d: f64, c: f64, w: f64, m: &ModelParams) -> [f64; 3] {
    let lack = m.c_bar - c;
    let drug_p = m.i_1 * m.g1.eval(w) * p;
    let drug_q = m.i_2 * m.g2.eval(w) * q;
    let gp = m.k_b * c * p - (m.k_q + m.k_a) * lack * p + m.k_p * c * q - drug_p;
    let gq = m.k_q * lack * p - m.k_p * c * q - m.k_d * lack * q - drug_q;
    let gd = m.k_a * lack * p + m.k_d * lack * q - m.k_r * d + drug_p + drug_q;
    [gp, gq, gd]
}

/// Radial grid geometry.
struct Geometry {
    dr: f64,
    centres: Vec<f64>,
    faces: Vec<f64>,
    /// `r^{d-1}` at faces.
    area: Vec<f64>,
    /// `(r_{i+1}^d - r_i^d)/d` per cell.
    volume: Vec<f64>,
}

impl Geometry {
    fn new(dim: usize, outer: f64, n: usize) -> Self {
        let dr = outer / n as f64;
        let faces: Vec<f64> = (0..=n).map(|j| j as f64 * dr).collect();
        let centres = (0..n).map(|i| (i as f64 + 0.5) * dr).collect();
        let area = faces.iter().map(|r| r.powi(dim as i32 - 1)).collect();
        let d = dim as f64;
        let volume = (0..n).map(|i| (faces[i + 1].powi(dim as i32) - faces[i].powi(dim as i32)) / d).collect();
        Geometry { dr, centres, faces, area, volume }
    }

    fn n(&self) -> usize {
        self.centres.len()
    }

    fn divergence(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| (self.area[i + 1] * v[i + 1] - self.area[i] * v[i]) / self.volume[i]).collect()
    }
}

struct Fields {
    t: f64,
    radius: f64,
    z: [Vec<f64>; 5],
    v: Vec<f64>,
    sigma: Vec<f64>,
}

/// Reference solver state.
pub struct RadialSolver {
    cfg: RadialConfig,
    geo: Geometry,
    f: Fields,
    drug_ceiling: f64,
    c_ceiling: f64,
}

impl RadialSolver {
    pub fn new(cfg: RadialConfig) -> Result<Self> {
        let geo = Geometry::new(cfg.dim, cfg.outer_radius, cfg.n_r.max(1));
        let n = geo.n();
        let w = cfg.width;
        let mut z: [Vec<f64>; 5] =
            std::array::from_fn(|k| geo.centres.iter().map(|&r| cfg.initial[k].value([r, 0.0, 0.0])).collect());
        if let Some(k) = cfg.initial[..3].iter().position(|p| *p == InitialProfile::Complement) {
            for i in 0..n {
                let others: f64 = (0..3).filter(|&j| j != k).map(|j| z[j][i]).sum();
                z[k][i] = (cfg.params.rho_f - others).max(0.0);
            }
        }
        for i in 0..n {
            let phi = geo.centres[i] - cfg.initial_radius;
            let weight = 1.0 - smooth_step(phi + w, w);
            for field in z.iter_mut() {
                field[i] *= weight;
            }
        }
        Self::from_fields(cfg, z)
    }

    /// Start from explicit cell-centre values of P, Q, D, C, W.
    pub fn from_fields(cfg: RadialConfig, z: [Vec<f64>; 5]) -> Result<Self> {
        if !(cfg.dim == 2 || cfg.dim == 3) {
            return Err(Error::Config(format!("radial oracle supports dim 2 or 3, got {}", cfg.dim)));
        }
        if cfg.n_r < 2048 {
            return Err(Error::Config(format!("radial oracle needs at least 2048 cells, got {}", cfg.n_r)));
        }
        if !(cfg.dt > 0.0 && cfg.width > 0.0 && cfg.initial_radius > 0.0 && cfg.outer_radius > 0.0) {
            return Err(Error::Config("radial oracle needs positive dt, width and radii".into()));
        }
        let geo = Geometry::new(cfg.dim, cfg.outer_radius, cfg.n_r);
        let n = geo.n();
        if z.iter().any(|f| f.len() != n) {
            return Err(Error::Config(format!("initial fields must have {n} values")));
        }
        let drug_ceiling = z[4].iter().fold(0.0f64, |m, &x| m.max(x));
        let c_ceiling = z[3].iter().fold(cfg.params.c_bar, |m, &x| m.max(x));
        let f = Fields { t: 0.0, radius: cfg.initial_radius, z, v: vec![0.0; n + 1], sigma: vec![0.0; n] };
        let mut s = RadialSolver { cfg, geo, f, drug_ceiling, c_ceiling };
        let (v, sigma) = s.solve_velocity(0.0, s.f.radius);
        s.f.v = v;
        s.f.sigma = sigma;
        Ok(s)
    }

    /// Cell-centre radii.
    pub fn radii(&self) -> &[f64] {
        &self.geo.centres
    }

    pub fn time(&self) -> f64 {
        self.f.t
    }

    pub fn interface_radius(&self) -> f64 {
        self.f.radius
    }

    fn ramp(&self, phi: f64) -> f64 {
        let om = self.cfg.params.omega;
        om + (1.0 - om) * (1.0 - smooth_step(phi, self.cfg.width))
    }

    fn target(&self, radius: f64) -> Vec<f64> {
        let m = &self.cfg.params;
        let z = &self.f.z;
        (0..self.geo.n())
            .map(|i| {
                let inside = 1.0 - smooth_step(self.geo.centres[i] - radius, self.cfg.width);
                inside * (m.k_b * z[3][i] * z[0][i] - m.k_r * z[2][i]) / m.rho_f
            })
            .collect()
    }

    /// Face velocities and cell pressures for interface radius `radius`.
    fn solve_velocity(&self, t: f64, radius: f64) -> (Vec<f64>, Vec<f64>) {
        let geo = &self.geo;
        let m = &self.cfg.params;
        let n = geo.n();
        let dr = geo.dr;
        let w = self.cfg.width;
        let g = self.target(radius);
        let lam: Vec<f64> = geo.centres.iter().map(|&r| self.cfg.lambda_pen * m.mu * self.ramp(r - radius)).collect();
        // unknowns: faces 1..n-1
        let k = n - 1;
        let (mut a, mut b, mut c, mut d) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
        for row in 0..k {
            let j = row + 1;
            let phi = geo.faces[j] - radius;
            let mu = m.mu * self.ramp(phi);
            let dmu = -m.mu * (1.0 - m.omega) * smooth_delta(phi, w);
            let s = smooth_delta(phi, w);
            let right = (mu + lam[j]) / dr;
            let left = (mu + lam[j - 1]) / dr;
            a[row] = -left * geo.area[j - 1] / geo.volume[j - 1] + dmu / (2.0 * dr);
            b[row] = right * geo.area[j] / geo.volume[j]
                + left * geo.area[j] / geo.volume[j - 1]
                + mu / m.k_perm
                + s / m.eps_penalty;
            c[row] = -right * geo.area[j + 1] / geo.volume[j] - dmu / (2.0 * dr);
            let vb = self.cfg.velocity.radial_component(t, geo.faces[j]);
            d[row] = s * vb / m.eps_penalty - (lam[j] * g[j] - lam[j - 1] * g[j - 1]) / dr;
        }
        let inner = thomas(&a, &b, &c, &d);
        let mut v = vec![0.0; n + 1];
        v[1..n].copy_from_slice(&inner);
        let div = geo.divergence(&v);
        let mut sigma: Vec<f64> = (0..n).map(|i| -lam[i] * (div[i] - g[i])).collect();
        let vol: f64 = geo.volume.iter().sum();
        let mean = sigma.iter().zip(&geo.volume).map(|(s, v)| s * v).sum::<f64>() / vol;
        sigma.iter_mut().for_each(|s| *s -= mean);
        (v, sigma)
    }

    fn advance_radius(&self, dt: f64) -> f64 {
        let f = |t: f64, a: f64| self.cfg.velocity.radial_component(t, a);
        let (t, a) = (self.f.t, self.f.radius);
        let k1 = f(t, a);
        let k2 = f(t + 0.5 * dt, a + 0.5 * dt * k1);
        let k3 = f(t + 0.5 * dt, a + 0.5 * dt * k2);
        let k4 = f(t + dt, a + dt * k3);
        a + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }

    /// Stable step for the explicit cell update.
    fn stable_dt(&self) -> f64 {
        let geo = &self.geo;
        let m = &self.cfg.params;
        let v = &self.f.v;
        let mut worst: f64 = 0.0;
        for i in 0..geo.n() {
            let out = geo.area[i + 1] * v[i + 1].max(0.0) - geo.area[i] * v[i].min(0.0);
            worst = worst.max(out / geo.volume[i]);
        }
        let gw = m.g1.eval(self.drug_ceiling).max(m.g2.eval(self.drug_ceiling));
        let cmax = self.c_ceiling;
        let loss = m.k_b * cmax + (m.k_q + m.k_a + m.k_d) * m.c_bar + m.k_p * cmax + m.k_r + (m.i_1 + m.i_2) * gw;
        0.5 / (worst + loss).max(1e-300)
    }

    /// Advance by at most `dt_cap`; returns the step taken.
    pub fn step(&mut self, dt_cap: f64) -> Result<f64> {
        let dt = dt_cap.min(self.cfg.dt).min(self.stable_dt());
        let geo = &self.geo;
        let n = geo.n();
        let m = self.cfg.params.clone();
        let t1 = self.f.t + dt;
        let radius = self.advance_radius(dt);
        let (v, sigma) = {
            let saved = self.f.radius;
            self.f.radius = radius;
            let out = self.solve_velocity(t1, radius);
            self.f.radius = saved;
            out
        };

        // cells: explicit upwind transport plus reactions at the old state
        let old = self.f.z.clone();
        let mut cells = [old[0].clone(), old[1].clone(), old[2].clone()];
        for i in 0..n {
            let s = reactions(old[0][i], old[1][i], old[2][i], old[3][i], old[4][i], &m);
            for k in 0..3 {
                cells[k][i] += dt * s[k];
            }
        }
        for j in 1..n {
            let flux = geo.area[j] * v[j];
            for k in 0..3 {
                let up = if v[j] >= 0.0 { old[k][j - 1] } else { old[k][j] };
                let moved = dt * flux * up;
                cells[k][j - 1] -= moved / geo.volume[j - 1];
                cells[k][j] += moved / geo.volume[j];
            }
        }
        if m.eta > 0.0 {
            for field in cells.iter_mut() {
                *field = self.implicit_diffusion(field, &vec![m.eta; n + 1], &vec![0.0; n], dt, false);
            }
        }
        let tol = BOUND_TOL * m.rho_f;
        for (k, field) in cells.iter().enumerate() {
            for (i, &x) in field.iter().enumerate() {
                if !(x >= -tol && x <= m.rho_f + tol) {
                    return Err(Error::OracleInvariant(format!(
                        "{} = {x} at r = {} (t = {t1}) outside [0, rho_f]",
                        SPECIES[k], geo.centres[i]
                    )));
                }
            }
        }

        // nutrient and drug: backward Euler with frozen uptake
        let face_ramp: Vec<f64> = geo.faces.iter().map(|&r| self.ramp(r - radius)).collect();
        let outside: Vec<f64> =
            geo.centres.iter().map(|&r| smooth_step(r - radius, self.cfg.width) / self.cfg.eps_chem).collect();
        let (p, q) = (&cells[0], &cells[1]);
        let nu_c: Vec<f64> = face_ramp.iter().map(|r| m.nu_1 * r).collect();
        let nu_w: Vec<f64> = face_ramp.iter().map(|r| m.nu_2 * r).collect();
        let sub = dt / CHEM_SUBSTEPS as f64;
        let (mut c, mut w) = (old[3].clone(), old[4].clone());
        for _ in 0..CHEM_SUBSTEPS {
            let c_sink: Vec<f64> = (0..n)
                .map(|i| outside[i] + m.k_1 * m.k_p * c[i] * p[i] + m.k_2 * m.k_q * (m.c_bar - c[i]) * q[i])
                .collect();
            let w_sink: Vec<f64> = (0..n)
                .map(|i| outside[i] + m.mu_1 * m.g1.eval(w[i]) * p[i] + m.mu_2 * m.g2.eval(w[i]) * q[i])
                .collect();
            if let Some(i) = c_sink.iter().chain(&w_sink).position(|&k| k < 0.0) {
                return Err(Error::OracleInvariant(format!("negative uptake at cell {}", i % n)));
            }
            let c_new = self.implicit_diffusion(&c, &nu_c, &c_sink, sub, true);
            let w_new = self.implicit_diffusion(&w, &nu_w, &w_sink, sub, true);
            for (name, new, prev, nu, ceiling) in
                [("C", &c_new, &c, &nu_c, self.c_ceiling), ("W", &w_new, &w, &nu_w, self.drug_ceiling)]
            {
                let tol = BOUND_TOL * ceiling.max(f64::MIN_POSITIVE);
                if let Some((i, x)) = new.iter().enumerate().find(|(_, &x)| !(x >= -tol && x <= ceiling + tol)) {
                    return Err(Error::OracleInvariant(format!(
                        "{name} = {x} at r = {} (t = {t1}) outside [0, {ceiling}]",
                        geo.centres[i]
                    )));
                }
                let (e_new, e_old) = (self.energy(new), self.energy(prev));
                let rate = (e_new - e_old) / sub + self.dissipation(new, nu);
                if rate > ENERGY_TOL * e_new.max(e_old) / sub {
                    return Err(Error::OracleInvariant(format!("{name} energy grows at rate {rate} (t = {t1})")));
                }
            }
            c = c_new;
            w = w_new;
        }

        let [p, q, d] = cells;
        self.f = Fields { t: t1, radius, z: [p, q, d, c, w], v, sigma };
        Ok(dt)
    }

    /// `(V/dt + V k) z − Σ faces A ν ∂z = V z_old/dt`, zero at the outer radius.
    fn implicit_diffusion(&self, old: &[f64], nu_face: &[f64], sink: &[f64], dt: f64, dirichlet: bool) -> Vec<f64> {
        let geo = &self.geo;
        let n = geo.n();
        let dr = geo.dr;
        let (mut a, mut b, mut c, mut d) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            b[i] = geo.volume[i] * (1.0 / dt + sink[i]);
            d[i] = geo.volume[i] * old[i] / dt;
            if i > 0 {
                let k = geo.area[i] * nu_face[i] / dr;
                a[i] = -k;
                b[i] += k;
            }
            if i + 1 < n {
                let k = geo.area[i + 1] * nu_face[i + 1] / dr;
                c[i] = -k;
                b[i] += k;
            } else if dirichlet {
                b[i] += geo.area[n] * nu_face[n] / (0.5 * dr);
            }
        }
        thomas(&a, &b, &c, &d)
    }

    fn energy(&self, z: &[f64]) -> f64 {
        0.5 * z.iter().zip(&self.geo.volume).map(|(x, v)| x * x * v).sum::<f64>()
    }

    fn dissipation(&self, z: &[f64], nu_face: &[f64]) -> f64 {
        let geo = &self.geo;
        let n = geo.n();
        let mut s = 0.0;
        for j in 1..n {
            s += geo.area[j] * nu_face[j] * (z[j] - z[j - 1]).powi(2) / geo.dr;
        }
        s + geo.area[n] * nu_face[n] * z[n - 1].powi(2) / (0.5 * geo.dr)
    }

    pub fn profile(&self) -> RadialProfile {
        let v_r = (0..self.geo.n()).map(|i| 0.5 * (self.f.v[i] + self.f.v[i + 1])).collect();
        RadialProfile {
            t: self.f.t,
            r: self.geo.centres.clone(),
            species: self.f.z.clone(),
            v_r,
            sigma: self.f.sigma.clone(),
        }
    }

    /// Step until `t`, landing on it exactly.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        let tol = 1e-12 * t.abs().max(1.0);
        while self.f.t < t - tol {
            self.step(t - self.f.t)?;
        }
        Ok(())
    }
}

/// Profiles at each of `times` (ascending).
pub fn radial_reference(cfg: &RadialConfig, times: &[f64]) -> Result<Vec<RadialProfile>> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("output times must be ascending".into()));
    }
    let mut solver = RadialSolver::new(cfg.clone())?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        solver.advance_to(t)?;
        let p = solver.profile();
        p.validate()?;
        out.push(p);
    }
    Ok(out)
}

/// Bessel `J0` by its power series (accurate for `|x| <= 8`).
pub fn bessel_j0(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// First zero of `J0`.
pub const J0_FIRST_ZERO: f64 = 2.404825557695773;

/// Slowest decaying heat mode on the ball of radius `a` with zero boundary value.
pub fn heat_mode(dim: usize, nu: f64, a: f64, r: f64, t: f64) -> f64 {
    match dim {
        2 => {
            let k = J0_FIRST_ZERO / a;
            bessel_j0(k * r) * (-nu * k * k * t).exp()
        }
        _ => {
            let k = PI / a;
            let shape = if r < 1e-12 { 1.0 } else { (k * r).sin() / (k * r) };
            shape * (-nu * k * k * t).exp()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::sample;

    fn quiet_params() -> ModelParams {
        let mut m = sample();
        for r in [
            &mut m.k_b,
            &mut m.k_q,
            &mut m.k_a,
            &mut m.k_p,
            &mut m.k_d,
            &mut m.k_r,
            &mut m.k_1,
            &mut m.k_2,
            &mut m.mu_1,
            &mut m.mu_2,
            &mut m.i_1,
            &mut m.i_2,
        ] {
            *r = 0.0;
        }
        m
    }

    fn base(dim: usize, initial: [InitialProfile; 5]) -> RadialConfig {
        RadialConfig {
            dim,
            outer_radius: 1.0,
            n_r: 2048,
            initial_radius: 0.3,
            width: 1.5 / 64.0,
            velocity: BoundaryVelocity::zero(0.5),
            params: sample(),
            eps_chem: 1e-3,
            lambda_pen: 1e4,
            initial,
            dt: 1e-3,
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let cfg = base(2, std::array::from_fn(|_| InitialProfile::Zero));
        let out = radial_reference(&cfg, &[0.01, 0.02]).unwrap();
        for p in &out {
            for f in p.species.iter().chain([&p.v_r, &p.sigma]) {
                assert!(f.iter().all(|&x| x == 0.0));
            }
        }
        assert_eq!(out[1].t, 0.02);
    }

    #[test]
    fn j0_series() {
        assert!((bessel_j0(0.0) - 1.0).abs() < 1e-16);
        assert!(bessel_j0(J0_FIRST_ZERO).abs() < 1e-14);
        assert!((bessel_j0(1.0) - 0.7651976865579666).abs() < 1e-15);
    }

    fn heat_error(dim: usize) -> f64 {
        // the whole unit ball lies inside the tumor; nutrient only
        let nu = 0.5;
        let mut cfg = base(dim, std::array::from_fn(|_| InitialProfile::Zero));
        cfg.params = quiet_params();
        cfg.params.nu_1 = nu;
        cfg.initial_radius = 10.0;
        cfg.dt = 1e-4;
        let n = cfg.n_r;
        let dr = cfg.outer_radius / n as f64;
        let mut z: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
        z[3] = (0..n).map(|i| heat_mode(dim, nu, 1.0, (i as f64 + 0.5) * dr, 0.0)).collect();
        let mut solver = RadialSolver::from_fields(cfg, z).unwrap();
        let t = 0.1;
        solver.advance_to(t).unwrap();
        let p = solver.profile();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            let exact = heat_mode(dim, nu, 1.0, p.r[i], t);
            let wgt = solver.geo.volume[i];
            num += (p.species[3][i] - exact).powi(2) * wgt;
            den += exact * exact * wgt;
        }
        (num / den).sqrt()
    }

    #[test]
    fn radial_heat_matches_closed_form() {
        for dim in [2, 3] {
            let err = heat_error(dim);
            assert!(err < 1e-3, "dim {dim}: relative L2 error {err}");
        }
    }

    #[test]
    fn growth_run_keeps_invariants() {
        let initial = [
            InitialProfile::Uniform(0.6),
            InitialProfile::Uniform(0.3),
            InitialProfile::Complement,
            InitialProfile::Uniform(1.0),
            InitialProfile::Uniform(0.5),
        ];
        let mut cfg = base(2, initial);
        cfg.velocity = BoundaryVelocity::new(VelocityPreset::RadialExpansion { rate: 0.5 }, 0.45, 0.5).unwrap();
        let out = radial_reference(&cfg, &[0.05]).unwrap();
        let p = &out[0];
        // mixture stays near rho_f well inside the tumor
        let rho = cfg.params.rho_f;
        for (i, &r) in p.r.iter().enumerate() {
            if r < 0.2 {
                let s = p.species[0][i] + p.species[1][i] + p.species[2][i];
                assert!((s - rho).abs() < 1e-2 * rho, "r = {r}: sum {s}");
            }
        }
    }
}
