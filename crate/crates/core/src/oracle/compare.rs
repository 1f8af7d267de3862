//! Spherical averages of full-grid states and their distance to radial profiles.

use std::path::Path;

use super::radial::{RadialProfile, SPECIES};
use crate::error::{Error, Result};
use crate::io::csv::{push_row, read_table};
use crate::io::write_atomic;
use crate::sim::SimState;

pub const BASELINE_HEADER: &str = "r,P,Q,D,C,W,v_r,sigma";
/// Default pass threshold on the relative L² discrepancy.
pub const DEFAULT_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub t: f64,
    /// Relative L² discrepancy of P, Q, D, C, W.
    pub discrepancy: [f64; 5],
    /// Same measure for the radial velocity (reported, not gated).
    pub velocity_discrepancy: f64,
    /// Radii compared: `[0, r_max]`.
    pub r_max: f64,
    pub tol: f64,
    pub pass: bool,
}

impl OracleReport {
    /// Species with the largest discrepancy.
    pub fn worst(&self) -> (&'static str, f64) {
        let (k, v) =
            self.discrepancy
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
        (SPECIES[k], v)
    }
}

impl std::fmt::Display for OracleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "oracle t = {}, r <= {}:", self.t, self.r_max)?;
        for (name, d) in SPECIES.iter().zip(&self.discrepancy) {
            write!(f, " {name} {:.2}%", 100.0 * d)?;
        }
        write!(
            f,
            " (v_r {:.2}%) tol {}% {}",
            100.0 * self.velocity_discrepancy,
            100.0 * self.tol,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Shells per grid spacing in [`spherical_average`].
pub const SHELLS_PER_CELL: usize = 8;

/// Average each field over thin shells about `center`.
pub fn spherical_average(state: &SimState, center: [f64; 3]) -> RadialProfile {
    let g = *state.grid();
    let dim = g.dim();
    let h = g.h() / SHELLS_PER_CELL as f64;
    let nbins = (g.half_extent() * (dim as f64).sqrt() / h).ceil() as usize + 2;
    let mut count = vec![0usize; nbins];
    let mut rsum = vec![0.0; nbins];
    let mut sums = vec![[0.0; 7]; nbins];
    let fields = [&state.cells.p, &state.cells.q, &state.cells.d, &state.chem.c, &state.chem.w];
    for i in 0..g.len() {
        let x = g.coords(i);
        let rel: Vec<f64> = (0..dim).map(|a| x[a] - center[a]).collect();
        let r = rel.iter().map(|c| c * c).sum::<f64>().sqrt();
        let k = (r / h).floor() as usize;
        if k >= nbins {
            continue;
        }
        count[k] += 1;
        rsum[k] += r;
        for (s, f) in fields.iter().enumerate() {
            sums[k][s] += f[i];
        }
        let vr = if r > 0.0 { (0..dim).map(|a| state.flow.v.comp(a)[i] * rel[a]).sum::<f64>() / r } else { 0.0 };
        sums[k][5] += vr;
        sums[k][6] += state.flow.sigma[i];
    }
    let mut out = RadialProfile {
        t: state.t,
        r: Vec::new(),
        species: std::array::from_fn(|_| Vec::new()),
        v_r: Vec::new(),
        sigma: Vec::new(),
    };
    for k in 0..nbins {
        if count[k] == 0 {
            continue;
        }
        let c = count[k] as f64;
        let r = rsum[k] / c;
        if out.r.last().is_some_and(|&last| r <= last) {
            continue;
        }
        out.r.push(r);
        for s in 0..5 {
            out.species[s].push(sums[k][s] / c);
        }
        out.v_r.push(sums[k][5] / c);
        out.sigma.push(sums[k][6] / c);
    }
    out
}

/// Linear interpolation of `(xs, ys)` at `x`, constant beyond the ends.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let j = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let s = (x - x0) / (x1 - x0);
    ys[j - 1] * (1.0 - s) + ys[j] * s
}

fn relative_l2(xs: &[f64], weights: &[f64], approx: &[f64], reference: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..xs.len() {
        num += weights[k] * (approx[k] - reference[k]).powi(2);
        den += weights[k] * reference[k].powi(2);
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Relative L² distance of `candidate` to `reference` on the reference radii
/// up to `r_max`, with the shell weight `r^{dim-1} dr`.
pub fn compare_profiles(
    candidate: &RadialProfile,
    reference: &RadialProfile,
    dim: usize,
    r_max: f64,
    tol: f64,
) -> Result<OracleReport> {
    candidate.validate()?;
    reference.validate()?;
    if (candidate.t - reference.t).abs() > 1e-9 * reference.t.abs().max(1.0) {
        return Err(Error::ScenarioMismatch(format!(
            "profile at t = {} compared with t = {}",
            candidate.t, reference.t
        )));
    }
    if candidate.r.is_empty() || reference.r.is_empty() {
        return Err(Error::ScenarioMismatch("empty profile".into()));
    }
    let idx: Vec<usize> = (0..reference.r.len()).filter(|&i| reference.r[i] <= r_max).collect();
    let xs: Vec<f64> = idx.iter().map(|&i| reference.r[i]).collect();
    let weights: Vec<f64> = idx
        .iter()
        .map(|&i| {
            let lo = if i == 0 { 0.0 } else { 0.5 * (reference.r[i - 1] + reference.r[i]) };
            let hi =
                if i + 1 == reference.r.len() { reference.r[i] } else { 0.5 * (reference.r[i] + reference.r[i + 1]) };
            reference.r[i].powi(dim as i32 - 1) * (hi - lo)
        })
        .collect();
    let mut disc = [0.0; 5];
    let field_pairs = (0..5).map(|s| (&candidate.species[s], &reference.species[s]));
    for (s, (cand, refv)) in field_pairs.enumerate() {
        let approx: Vec<f64> = xs.iter().map(|&x| interpolate(&candidate.r, cand, x)).collect();
        let exact: Vec<f64> = idx.iter().map(|&i| refv[i]).collect();
        disc[s] = relative_l2(&xs, &weights, &approx, &exact);
    }
    let approx: Vec<f64> = xs.iter().map(|&x| interpolate(&candidate.r, &candidate.v_r, x)).collect();
    let exact: Vec<f64> = idx.iter().map(|&i| reference.v_r[i]).collect();
    let velocity_discrepancy = relative_l2(&xs, &weights, &approx, &exact);
    let pass = disc.iter().all(|&d| d <= tol);
    Ok(OracleReport { t: reference.t, discrepancy: disc, velocity_discrepancy, r_max, tol, pass })
}

/// Compare a full-grid state with a radial profile over the support of the
/// interface velocity (`|x| <= L/2`).
pub fn compare_to_oracle(state: &SimState, profile: &RadialProfile, tol: f64) -> Result<OracleReport> {
    let g = state.grid();
    let avg = spherical_average(state, [0.0; 3]);
    compare_profiles(&avg, profile, g.dim(), g.support_radius(), tol)
}

pub fn write_profile(profile: &RadialProfile, path: &Path) -> Result<()> {
    let mut s = String::from(BASELINE_HEADER);
    s.push('\n');
    for i in 0..profile.r.len() {
        let mut row = vec![profile.r[i]];
        row.extend(profile.species.iter().map(|f| f[i]));
        row.push(profile.v_r[i]);
        row.push(profile.sigma[i]);
        push_row(&mut s, row);
    }
    write_atomic(path, s.as_bytes())
}

/// Read a baseline file; the time stamp is not stored in the file.
pub fn read_profile(path: &Path, t: f64) -> Result<RadialProfile> {
    let table = read_table(path)?;
    if table.header.join(",") != BASELINE_HEADER {
        return Err(Error::Parse { path: path.to_path_buf(), msg: format!("expected header {BASELINE_HEADER}") });
    }
    let col = |k: usize| table.rows.iter().map(|r| r[k]).collect::<Vec<_>>();
    let profile =
        RadialProfile { t, r: col(0), species: std::array::from_fn(|s| col(s + 1)), v_r: col(6), sigma: col(7) };
    profile.validate()?;
    Ok(profile)
}
