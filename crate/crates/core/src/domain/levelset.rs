//! Level-set representation of the moving tumor: `Φ < 0` in the tumor,
//! `Φ > 0` in healthy tissue, `Φ = 0` on the interface.

use crate::domain::shape::Shape;
use crate::domain::velocity::BoundaryVelocity;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};

/// Gradient-norm threshold below which a band node has no usable normal.
pub const DEGENERATE_GRADIENT: f64 = 1e-10;
/// Band half-width, in units of the smoothing width, where the signed-distance
/// property is maintained.
pub const BAND_WIDTHS: f64 = 3.0;
/// Maximum tolerated `||∇Φ| - 1|` in the band after reinitialization.
pub const SIGNED_DISTANCE_TOL: f64 = 0.1;
/// Reinitialization is skipped when the band defect is already below this.
pub const REINIT_TRIGGER: f64 = 0.02;
/// Advection CFL ceiling.
pub const MAX_CFL: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdvectionScheme {
    #[default]
    Upwind1,
    /// Second-order ENO in space with Heun time stepping.
    Eno2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetField {
    phi: ScalarField,
    width: f64,
}

/// Unit normals `∇Φ / |∇Φ|` with the gradient norm and degenerate band nodes.
#[derive(Debug, Clone)]
pub struct NormalField {
    pub normal: VectorField,
    pub grad_norm: ScalarField,
    pub flagged: Vec<usize>,
}

impl LevelSetField {
    /// Wrap an existing nodal field; `smoothing_k` sets `w = k h`.
    pub fn new(phi: ScalarField, smoothing_k: f64) -> Result<Self> {
        if !(smoothing_k >= 1.0) {
            return Err(Error::Config(format!("smoothing_k must be >= 1, got {smoothing_k}")));
        }
        let width = smoothing_k * phi.grid().h();
        Ok(LevelSetField { phi, width })
    }

    pub fn grid(&self) -> &Grid {
        self.phi.grid()
    }
    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }
    pub fn width(&self) -> f64 {
        self.width
    }
    pub fn band_radius(&self) -> f64 {
        BAND_WIDTHS * self.width
    }

    pub fn in_band(&self, idx: usize) -> bool {
        self.phi[idx].abs() <= self.band_radius()
    }

    pub fn has_zero_set(&self) -> bool {
        let (mut neg, mut pos) = (false, false);
        for &v in self.phi.data() {
            neg |= v <= 0.0;
            pos |= v >= 0.0;
            if neg && pos {
                return true;
            }
        }
        false
    }

    /// Central-difference gradient at a node (one-sided on the box boundary).
    pub fn gradient_at(&self, idx: usize) -> [f64; 3] {
        gradient_at(&self.phi, idx)
    }

    /// Largest `||∇Φ| - 1|` over the band.
    pub fn band_defect(&self) -> f64 {
        let band = self.band_radius();
        (0..self.grid().len())
            .filter(|&i| self.phi[i].abs() <= band)
            .map(|i| (norm3(self.gradient_at(i)) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Smoothed measure of `{Φ < 0}`.
    pub fn tumor_volume(&self) -> f64 {
        let w = self.width;
        self.phi.data().iter().map(|&p| 1.0 - heaviside(p, w)).sum::<f64>() * self.grid().cell_volume()
    }

    /// Centroid of `{Φ < 0}` under the smoothed indicator.
    pub fn tumor_centroid(&self) -> [f64; 3] {
        let g = *self.grid();
        let mut c = [0.0; 3];
        let mut m = 0.0;
        for i in 0..g.len() {
            let wgt = 1.0 - heaviside(self.phi[i], self.width);
            if wgt > 0.0 {
                let x = g.coords(i);
                for a in 0..3 {
                    c[a] += wgt * x[a];
                }
                m += wgt;
            }
        }
        c.map(|v| v / m)
    }

    /// Fails when any band node reaches `|x| >= 0.95 L`.
    pub fn check_guard(&self) -> Result<()> {
        let g = self.grid();
        let guard = 0.95 * g.half_extent();
        for i in 0..g.len() {
            if self.in_band(i) {
                let x = g.coords(i);
                if norm3(x) >= guard {
                    return Err(Error::BandEscaped { guard });
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn gradient_at(f: &ScalarField, idx: usize) -> [f64; 3] {
    let g = f.grid();
    let h = g.h();
    let mut out = [0.0; 3];
    for (a, o) in out.iter_mut().enumerate().take(g.dim()) {
        *o = match (g.neighbor(idx, a, -1), g.neighbor(idx, a, 1)) {
            (Some(m), Some(p)) => (f[p] - f[m]) / (2.0 * h),
            (None, Some(p)) => (f[p] - f[idx]) / h,
            (Some(m), None) => (f[idx] - f[m]) / h,
            (None, None) => 0.0,
        };
    }
    out
}

/// Smoothed Heaviside: 0 for `φ <= -w`, 1 for `φ >= w`, sinusoidal ramp between.
pub fn heaviside(phi: f64, w: f64) -> f64 {
    if phi <= -w {
        0.0
    } else if phi >= w {
        1.0
    } else {
        let s = phi / w;
        0.5 * (1.0 + s + (std::f64::consts::PI * s).sin() / std::f64::consts::PI)
    }
}

/// `dH/dφ`, supported in `|φ| < w`.
pub fn delta(phi: f64, w: f64) -> f64 {
    if phi.abs() >= w {
        0.0
    } else {
        0.5 / w * (1.0 + (std::f64::consts::PI * phi / w).cos())
    }
}

/// Signed distance to `shape`, reinitialized to the band tolerance.
pub fn init_levelset(shape: &Shape, grid: Grid, smoothing_k: f64) -> Result<LevelSetField> {
    shape.validate()?;
    let r = grid.support_radius();
    let reach = shape.outer_radius();
    if reach >= r {
        return Err(Error::Shape(format!("shape reaches |x| = {reach}, but data must stay inside |x| < R = {r}")));
    }
    let dim = grid.dim();
    let phi = ScalarField::from_fn(grid, |x| shape.raw_levelset(x, dim));
    let ls = LevelSetField::new(phi, smoothing_k)?;
    reinitialize(&ls)
}

/// One explicit step of `∂_t Φ + V · ∇Φ = 0`.
pub fn advect_levelset(
    ls: &LevelSetField,
    v: &BoundaryVelocity,
    t: f64,
    dt: f64,
    scheme: AdvectionScheme,
) -> Result<LevelSetField> {
    if v.is_zero() {
        return Ok(ls.clone());
    }
    let g = *ls.grid();
    let vel = VectorField::from_fn(g, |x| v.eval(t, x));
    let admissible = max_admissible_dt(&vel);
    if dt > admissible {
        return Err(Error::Cfl { dt, admissible });
    }
    let phi = match scheme {
        AdvectionScheme::Upwind1 => {
            let rate = transport_rate(&ls.phi, &vel, false);
            axpy(&ls.phi, -dt, &rate)
        }
        AdvectionScheme::Eno2 => {
            let vel_end = VectorField::from_fn(g, |x| v.eval(t + dt, x));
            let k1 = transport_rate(&ls.phi, &vel, true);
            let stage = axpy(&ls.phi, -dt, &k1);
            let k2 = transport_rate(&stage, &vel_end, true);
            let mut out = ls.phi.clone();
            for i in 0..g.len() {
                out[i] = ls.phi[i] - 0.5 * dt * (k1[i] + k2[i]);
            }
            out
        }
    };
    Ok(LevelSetField { phi, width: ls.width })
}

/// `MAX_CFL * h / max_i Σ_a |V_a|`.
pub fn max_admissible_dt(vel: &VectorField) -> f64 {
    let g = vel.grid();
    let vmax = (0..g.len()).map(|i| (0..g.dim()).map(|a| vel.comp(a)[i].abs()).sum::<f64>()).fold(0.0, f64::max);
    if vmax == 0.0 {
        f64::INFINITY
    } else {
        MAX_CFL * g.h() / vmax
    }
}

fn axpy(x: &ScalarField, a: f64, y: &[f64]) -> ScalarField {
    let mut out = x.clone();
    for (o, yi) in out.data_mut().iter_mut().zip(y) {
        *o += a * yi;
    }
    out
}

fn minabs(a: f64, b: f64) -> f64 {
    if a.abs() <= b.abs() {
        a
    } else {
        b
    }
}

/// Upwinded `V · ∇Φ` at every node.
fn transport_rate(phi: &ScalarField, vel: &VectorField, second_order: bool) -> Vec<f64> {
    let g = phi.grid();
    let h = g.h();
    let mut rate = vec![0.0; g.len()];
    for (i, r) in rate.iter_mut().enumerate() {
        for a in 0..g.dim() {
            let va = vel.comp(a)[i];
            if va == 0.0 {
                continue;
            }
            let m = g.neighbor(i, a, -1);
            let p = g.neighbor(i, a, 1);
            let dm = m.map(|m| (phi[i] - phi[m]) / h);
            let dp = p.map(|p| (phi[p] - phi[i]) / h);
            let deriv = if va > 0.0 {
                let mut d = dm.or(dp).unwrap_or(0.0);
                if second_order {
                    if let (Some(m), Some(p)) = (m, p) {
                        let c0 = (phi[p] - 2.0 * phi[i] + phi[m]) / (h * h);
                        let c = match g.neighbor(m, a, -1) {
                            Some(mm) => minabs(c0, (phi[i] - 2.0 * phi[m] + phi[mm]) / (h * h)),
                            None => c0,
                        };
                        d += 0.5 * h * c;
                    }
                }
                d
            } else {
                let mut d = dp.or(dm).unwrap_or(0.0);
                if second_order {
                    if let (Some(m), Some(p)) = (m, p) {
                        let c0 = (phi[p] - 2.0 * phi[i] + phi[m]) / (h * h);
                        let c = match g.neighbor(p, a, 1) {
                            Some(pp) => minabs(c0, (phi[pp] - 2.0 * phi[p] + phi[i]) / (h * h)),
                            None => c0,
                        };
                        d -= 0.5 * h * c;
                    }
                }
                d
            };
            *r += va * deriv;
        }
    }
    rate
}

/// Restore the signed-distance property by fast sweeping.
///
/// Nodes adjacent to a sign change keep `|Φ| / |∇Φ|` (capped by the
/// along-axis crossing distance); every other node solves the Godunov
/// eikonal update. Input already within `REINIT_TRIGGER` of unit gradient
/// in the band is returned unchanged.
pub fn reinitialize(ls: &LevelSetField) -> Result<LevelSetField> {
    if !ls.has_zero_set() {
        return Err(Error::EmptyZeroSet);
    }
    if ls.band_defect() <= REINIT_TRIGGER {
        return Ok(ls.clone());
    }
    let g = *ls.grid();
    let h = g.h();
    let phi = &ls.phi;
    let n = g.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut frozen = vec![false; n];
    for i in 0..n {
        let pi = phi[i];
        let mut crossing = f64::INFINITY;
        for a in 0..g.dim() {
            for dir in [-1, 1] {
                if let Some(j) = g.neighbor(i, a, dir) {
                    let pj = phi[j];
                    if pi == 0.0 || pi * pj < 0.0 {
                        let denom = (pi - pj).abs();
                        let d = if denom > 0.0 { h * pi.abs() / denom } else { 0.0 };
                        crossing = crossing.min(d);
                    }
                }
            }
        }
        if crossing.is_finite() {
            let gn = norm3(gradient_at(phi, i));
            let est = if gn > DEGENERATE_GRADIENT { pi.abs() / gn } else { crossing };
            dist[i] = est.min(crossing);
            frozen[i] = true;
        }
    }
    fast_sweep(&g, &mut dist, &frozen);
    let data = dist.iter().zip(phi.data()).map(|(d, p)| if *p < 0.0 { -d } else { *d }).collect();
    Ok(LevelSetField { phi: ScalarField::from_vec(g, data)?, width: ls.width })
}

fn godunov_update(mut a: [f64; 3], dim: usize, h: f64) -> f64 {
    let a = &mut a[..dim];
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut x = a[0] + h;
    if dim >= 2 && x > a[1] {
        let s = a[0] + a[1];
        let disc = 2.0 * h * h - (a[0] - a[1]).powi(2);
        x = 0.5 * (s + disc.max(0.0).sqrt());
        if dim == 3 && x > a[2] {
            let s = a[0] + a[1] + a[2];
            let q = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
            let disc = s * s - 3.0 * (q - h * h);
            x = (s + disc.max(0.0).sqrt()) / 3.0;
        }
    }
    x
}

fn fast_sweep(g: &Grid, dist: &mut [f64], frozen: &[bool]) {
    let dim = g.dim();
    let np = g.np();
    let h = g.h();
    let orders = 1usize << dim;
    for _pass in 0..4 {
        let mut changed = false;
        for o in 0..orders {
            let dirs: Vec<bool> = (0..3).map(|a| a < dim && (o >> a) & 1 == 1).collect();
            let range = |rev: bool| -> Vec<usize> {
                if rev {
                    (0..np).rev().collect()
                } else {
                    (0..np).collect()
                }
            };
            let (r0, r1) = (range(dirs[0]), range(dirs[1]));
            let r2 = if dim == 3 { range(dirs[2]) } else { vec![0] };
            for &k in &r2 {
                for &j in &r1 {
                    for &i in &r0 {
                        let idx = g.index([i, j, k]);
                        if frozen[idx] {
                            continue;
                        }
                        let mut a = [f64::INFINITY; 3];
                        for (ax, av) in a.iter_mut().enumerate().take(dim) {
                            let m = g.neighbor(idx, ax, -1).map_or(f64::INFINITY, |m| dist[m]);
                            let p = g.neighbor(idx, ax, 1).map_or(f64::INFINITY, |p| dist[p]);
                            *av = m.min(p);
                        }
                        if a.iter().take(dim).all(|v| v.is_infinite()) {
                            continue;
                        }
                        let cand = godunov_update(a, dim, h);
                        if cand < dist[idx] {
                            if dist[idx] - cand > 1e-14 * cand.max(h) {
                                changed = true;
                            }
                            dist[idx] = cand;
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
}

/// `n = ∇Φ / |∇Φ|` by central differences. Band nodes with a degenerate
/// gradient are flagged and borrow the normal of the nearest valid node.
pub fn interface_normal(ls: &LevelSetField) -> NormalField {
    let g = *ls.grid();
    let mut normal = VectorField::zeros(g);
    let mut grad_norm = ScalarField::zeros(g);
    let mut valid = vec![false; g.len()];
    let mut flagged = Vec::new();
    for i in 0..g.len() {
        let gr = ls.gradient_at(i);
        let gn = norm3(gr);
        grad_norm[i] = gn;
        if gn >= DEGENERATE_GRADIENT {
            normal.set(i, [gr[0] / gn, gr[1] / gn, gr[2] / gn]);
            valid[i] = true;
        } else if ls.in_band(i) {
            flagged.push(i);
        }
    }
    for &i in &flagged {
        if let Some(j) = nearest_valid(&g, i, &valid) {
            let nj = normal.at(j);
            normal.set(i, nj);
        }
    }
    NormalField { normal, grad_norm, flagged }
}

fn nearest_valid(g: &Grid, start: usize, valid: &[bool]) -> Option<usize> {
    let mut seen = vec![false; g.len()];
    let mut queue = std::collections::VecDeque::from([start]);
    seen[start] = true;
    while let Some(i) = queue.pop_front() {
        if valid[i] {
            return Some(i);
        }
        for a in 0..g.dim() {
            for dir in [-1, 1] {
                if let Some(j) = g.neighbor(i, a, dir) {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    None
}

/// Smoothed indicator `H_w(Φ)` of healthy tissue and its derivative `δ_w(Φ)`.
pub fn smoothed_indicator(ls: &LevelSetField) -> (ScalarField, ScalarField) {
    let w = ls.width;
    (ls.phi.map(|p| heaviside(p, w)), ls.phi.map(|p| delta(p, w)))
}

/// Diffuse surface weight `δ_w(Φ) |∇Φ|`; integrating against it approximates `∫_Γ · dS`.
pub fn surface_weight(ls: &LevelSetField) -> ScalarField {
    let g = *ls.grid();
    let w = ls.width;
    let mut out = ScalarField::zeros(g);
    for i in 0..g.len() {
        let d = delta(ls.phi[i], w);
        if d > 0.0 {
            out[i] = d * norm3(ls.gradient_at(i));
        }
    }
    out
}
