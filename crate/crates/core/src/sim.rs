//! Coupled time stepping, diagnostics and run drivers.

use std::path::PathBuf;
use std::time::Instant;

use crate::cells::{cfl_dt, step_cells_with_sources, CellFields, StepLimits};
use crate::chem::{energy_monitor, step_drug, step_nutrient, ChemFields, ChemOptions, ENERGY_TOL};
use crate::domain::levelset::max_admissible_dt;
use crate::domain::{
    advect_levelset, heaviside, init_levelset, reinitialize, AdvectionScheme, BoundaryVelocity, LevelSetField, Shape,
};
use crate::error::{Error, Result};
use crate::flow::{divergence_target, solve_flow, FlowOptions, FlowSolveReport, FlowState};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::model::{coefficient_fields, ModelParams};

/// Interior of the tumor: nodes with `Φ <= -INTERIOR_WIDTHS · w`, where the
/// initial data carry their full profile.
pub const INTERIOR_WIDTHS: f64 = 2.0;
/// Relative tolerance of the bound checks.
pub const BOUND_TOL: f64 = 1e-10;

/// Initial profile of one field, applied inside the initial tumor.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    Zero,
    Uniform(f64),
    Gaussian {
        center: [f64; 3],
        width: f64,
        amplitude: f64,
    },
    /// `ρ_f` minus the other two cell profiles.
    Complement,
}

impl InitialProfile {
    pub fn value(&self, x: [f64; 3]) -> f64 {
        match self {
            InitialProfile::Zero | InitialProfile::Complement => 0.0,
            InitialProfile::Uniform(v) => *v,
            InitialProfile::Gaussian { center, width, amplitude } => {
                let r2: f64 = (0..3).map(|a| (x[a] - center[a]).powi(2)).sum();
                amplitude * (-r2 / (width * width)).exp()
            }
        }
    }

    /// Largest value the profile attains.
    pub fn peak(&self) -> f64 {
        match self {
            InitialProfile::Zero | InitialProfile::Complement => 0.0,
            InitialProfile::Uniform(v) => *v,
            InitialProfile::Gaussian { amplitude, .. } => amplitude.max(0.0),
        }
    }
}

/// Solver knobs that are not model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    /// Exterior relaxation time for C and W; follows `eps_penalty` when unset.
    pub eps_chem: Option<f64>,
    pub lambda_pen: f64,
    pub picard_sweeps: usize,
    pub picard_tol: f64,
    pub cfl_safety: f64,
    pub dt_max: f64,
    pub reinit_every: usize,
    pub smoothing_k: f64,
    pub tol_lin: f64,
    pub scheme: AdvectionScheme,
    /// Rescale `P + Q + D` to `ρ_f` in the tumor interior after each step.
    pub project_sum: bool,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            eps_chem: None,
            lambda_pen: 1e4,
            picard_sweeps: 3,
            picard_tol: 1e-6,
            cfl_safety: 0.5,
            dt_max: 1e-2,
            reinit_every: 10,
            smoothing_k: 1.5,
            tol_lin: 1e-8,
            scheme: AdvectionScheme::Upwind1,
            project_sum: false,
        }
    }
}

/// Everything that defines a trajectory except run bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: Grid,
    pub shape: Shape,
    pub velocity: BoundaryVelocity,
    pub params: ModelParams,
    pub numerics: Numerics,
    /// Profiles for P, Q, D, C, W.
    pub initial: [InitialProfile; 5],
}

impl Scenario {
    pub fn eps_chem(&self) -> f64 {
        self.numerics.eps_chem.unwrap_or(self.params.eps_penalty)
    }

    pub fn flow_options(&self) -> FlowOptions {
        FlowOptions { lambda_pen: self.numerics.lambda_pen, tol_lin: self.numerics.tol_lin }
    }

    pub fn chem_options(&self) -> ChemOptions {
        ChemOptions { eps_chem: self.eps_chem(), ..ChemOptions::default() }
    }

    /// Ceiling of the drug concentration (largest initial value).
    pub fn drug_ceiling(&self) -> f64 {
        self.initial[4].peak()
    }

    pub fn step_limits(&self) -> StepLimits {
        StepLimits { safety: self.numerics.cfl_safety, dt_max: self.numerics.dt_max, drug_max: self.drug_ceiling() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step_index: usize,
    pub ls: LevelSetField,
    pub cells: CellFields,
    pub chem: ChemFields,
    pub flow: FlowState,
}

impl SimState {
    pub fn grid(&self) -> &Grid {
        self.ls.grid()
    }

    /// Mask of tumor-interior nodes.
    pub fn interior(&self) -> Vec<bool> {
        let cut = -INTERIOR_WIDTHS * self.ls.width();
        self.ls.phi().data().iter().map(|&p| p <= cut).collect()
    }

    /// Mask of healthy-tissue nodes (`Φ > w`).
    pub fn healthy(&self) -> Vec<bool> {
        let w = self.ls.width();
        self.ls.phi().data().iter().map(|&p| p > w).collect()
    }

    /// Largest `|P + Q + D − ρ_f|` over the tumor interior.
    pub fn sum_drift(&self, rho_f: f64) -> f64 {
        let total = self.cells.total();
        self.interior()
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| (total[i] - rho_f).abs())
            .fold(0.0, f64::max)
    }
}

/// Weight `1 − H_w(Φ₀ + w)`: one where `Φ₀ <= −2w`, zero outside the initial tumor.
fn initial_weight(ls: &LevelSetField) -> ScalarField {
    let w = ls.width();
    ls.phi().map(|p| 1.0 - heaviside(p + w, w))
}

/// Initial state with the velocity solved for the initial data.
pub fn initial_state(sc: &Scenario) -> Result<(SimState, FlowSolveReport)> {
    let ls = init_levelset(&sc.shape, sc.grid, sc.numerics.smoothing_k).map_err(|e| e.in_stage("init"))?;
    let weight = initial_weight(&ls);
    let g = sc.grid;
    let mut f: Vec<ScalarField> = sc.initial.iter().map(|prof| ScalarField::from_fn(g, |x| prof.value(x))).collect();
    if let Some(k) = sc.initial[..3].iter().position(|p| *p == InitialProfile::Complement) {
        for i in 0..g.len() {
            let others: f64 = (0..3).filter(|&j| j != k).map(|j| f[j][i]).sum();
            f[k][i] = (sc.params.rho_f - others).max(0.0);
        }
    }
    for field in f.iter_mut() {
        for i in 0..g.len() {
            field[i] *= weight[i];
        }
    }
    let [p, q, d, c, w]: [ScalarField; 5] = f.try_into().expect("five fields");
    let cells = CellFields { p, q, d };
    let chem = ChemFields { c, w };
    let coeffs = coefficient_fields(&sc.params, &ls);
    let target = divergence_target(&chem.c, &cells.p, &cells.d, &ls, &sc.params)?;
    let (flow, report) = solve_flow(&target, &ls, &sc.velocity, &coeffs, &sc.params, &sc.flow_options(), 0.0)
        .map_err(|e| e.in_stage("flow"))?;
    Ok((SimState { t: 0.0, step_index: 0, ls, cells, chem, flow }, report))
}

macro_rules! diagnostics_record {
    ($($(#[$doc:meta])* $field:ident),* $(,)?) => {
        /// Per-step monitors. CSV columns follow the field order.
        #[allow(non_snake_case)]
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct DiagnosticsRecord {
            $($(#[$doc])* pub $field: f64,)*
        }

        impl DiagnosticsRecord {
            pub const COLUMNS: &'static [&'static str] = &[$(stringify!($field)),*];

            pub fn values(&self) -> Vec<f64> {
                vec![$(self.$field),*]
            }

            pub fn from_values(v: &[f64]) -> Option<Self> {
                if v.len() != Self::COLUMNS.len() {
                    return None;
                }
                let mut it = v.iter().copied();
                Some(DiagnosticsRecord { $($field: it.next()?),* })
            }
        }
    };
}

diagnostics_record! {
    t,
    total_mass_P,
    total_mass_Q,
    total_mass_D,
    /// Largest `|P + Q + D − ρ_f|` over the tumor interior.
    sum_drift,
    min_P,
    max_P,
    min_Q,
    max_Q,
    min_D,
    max_D,
    min_C,
    max_C,
    min_W,
    max_W,
    penalty_flux,
    leakage_cells,
    leakage_chem,
    energy_C,
    diss_C,
    energy_W,
    diss_W,
    div_error,
    /// Mass moved by clamping to `[0, ρ_f]` during the step.
    clamp_budget,
    solver_iterations,
    step,
    dt,
    /// `(E − E_prev)/dt + Diss` for C.
    energy_rate_C,
    energy_scale_C,
    energy_rate_W,
    energy_scale_W,
    mass_budget_residual,
    flow_residual,
    flow_energy_residual,
    picard_sweeps,
    picard_change,
    tumor_volume,
}

/// Fill the state-only part of a record.
pub fn observe(state: &SimState) -> DiagnosticsRecord {
    let hd = state.grid().cell_volume();
    let healthy = state.healthy();
    let total = state.cells.total();
    let (mut leak_cells, mut leak_chem) = (0.0, 0.0);
    for (i, &m) in healthy.iter().enumerate() {
        if m {
            leak_cells += total[i];
            leak_chem += state.chem.c[i] + state.chem.w[i];
        }
    }
    let c = &state.cells;
    DiagnosticsRecord {
        t: state.t,
        total_mass_P: c.p.integral(),
        total_mass_Q: c.q.integral(),
        total_mass_D: c.d.integral(),
        min_P: c.p.min(),
        max_P: c.p.max(),
        min_Q: c.q.min(),
        max_Q: c.q.max(),
        min_D: c.d.min(),
        max_D: c.d.max(),
        min_C: state.chem.c.min(),
        max_C: state.chem.c.max(),
        min_W: state.chem.w.min(),
        max_W: state.chem.w.max(),
        leakage_cells: leak_cells * hd,
        leakage_chem: leak_chem * hd,
        energy_C: crate::chem::energy(&state.chem.c),
        energy_W: crate::chem::energy(&state.chem.w),
        step: state.step_index as f64,
        tumor_volume: state.ls.tumor_volume(),
        ..Default::default()
    }
}

fn rel_change(a: &VectorField, b: &VectorField) -> f64 {
    let diff = a.sub(b).l2_norm();
    let scale = a.l2_norm().max(b.l2_norm());
    if scale > 0.0 {
        diff / scale
    } else {
        0.0
    }
}

/// One coupled step: level set, coefficients, then Picard sweeps of flow,
/// cells and chemistry.
pub fn coupled_step(state: &SimState, sc: &Scenario, dt: f64) -> Result<(SimState, DiagnosticsRecord)> {
    let prm = &sc.params;
    let num = &sc.numerics;
    let t1 = state.t + dt;
    let step = state.step_index + 1;

    let mut ls =
        advect_levelset(&state.ls, &sc.velocity, state.t, dt, num.scheme).map_err(|e| e.in_stage("levelset"))?;
    if num.reinit_every > 0 && step.is_multiple_of(num.reinit_every) && !sc.velocity.is_zero() {
        ls = reinitialize(&ls).map_err(|e| e.in_stage("reinitialize"))?;
    }
    if !ls.has_zero_set() {
        return Err(Error::EmptyZeroSet.in_stage("levelset"));
    }
    ls.check_guard().map_err(|e| e.in_stage("levelset"))?;
    let coeffs = coefficient_fields(prm, &ls);
    let flow_opts = sc.flow_options();
    let chem_opts = sc.chem_options();
    let drug_max = sc.drug_ceiling();

    let mut iter_cells = state.cells.clone();
    let mut iter_chem = state.chem.clone();
    let mut flow = state.flow.clone();
    let mut report = None;
    let mut cell_report = None;
    let mut chem_iters = 0usize;
    let mut sweeps = 0usize;
    let mut change = 0.0;
    for sweep in 1..=num.picard_sweeps.max(1) {
        let target = divergence_target(&iter_chem.c, &iter_cells.p, &iter_cells.d, &ls, prm)?;
        let (new_flow, rep) =
            solve_flow(&target, &ls, &sc.velocity, &coeffs, prm, &flow_opts, t1).map_err(|e| e.in_stage("flow"))?;
        let (mut cells, crep) = step_cells_with_sources(
            &state.cells,
            &iter_cells,
            &new_flow.v,
            &iter_chem.c,
            &iter_chem.w,
            prm,
            dt,
            drug_max,
            step,
        )
        .map_err(|e| e.in_stage("cells"))?;
        if num.project_sum {
            project_sum(&mut cells, &ls, prm.rho_f);
        }
        let (c, rc) = step_nutrient(&state.chem.c, &cells.p, &cells.q, &coeffs, &ls, prm, dt, &chem_opts)
            .map_err(|e| e.in_stage("nutrient"))?;
        let (w, rw) = step_drug(&state.chem.w, &cells.p, &cells.q, &coeffs, &ls, prm, dt, &chem_opts)
            .map_err(|e| e.in_stage("drug"))?;
        chem_iters += rc.iterations + rw.iterations;
        change = if sweep == 1 { rel_change(&new_flow.v, &state.flow.v) } else { rel_change(&new_flow.v, &flow.v) };
        flow = new_flow;
        report = Some(rep);
        cell_report = Some(crep);
        iter_cells = cells;
        iter_chem = ChemFields { c, w };
        sweeps = sweep;
        if sweep > 1 && change <= num.picard_tol {
            break;
        }
    }
    let report = report.expect("at least one sweep");
    let cell_report = cell_report.expect("at least one sweep");

    let next = SimState { t: t1, step_index: step, ls, cells: iter_cells, chem: iter_chem, flow };
    for (name, f) in [
        ("P", &next.cells.p),
        ("Q", &next.cells.q),
        ("D", &next.cells.d),
        ("C", &next.chem.c),
        ("W", &next.chem.w),
        ("sigma", &next.flow.sigma),
    ] {
        if !f.is_finite() {
            return Err(Error::NonFinite { field: name.into(), step });
        }
    }
    let ec = energy_monitor(&next.chem.c, &state.chem.c, &coeffs.nu1_omega, dt);
    let ew = energy_monitor(&next.chem.w, &state.chem.w, &coeffs.nu2_omega, dt);
    let mut rec = observe(&next);
    rec.sum_drift = next.sum_drift(prm.rho_f);
    rec.penalty_flux = report.penalty_flux;
    rec.diss_C = ec.dissipation;
    rec.diss_W = ew.dissipation;
    rec.div_error = report.div_error;
    rec.clamp_budget = cell_report.clamp_mass;
    rec.solver_iterations = (report.iterations + chem_iters) as f64;
    rec.dt = dt;
    rec.energy_rate_C = ec.rate;
    rec.energy_scale_C = crate::chem::energy(&state.chem.c).max(ec.energy) / dt;
    rec.energy_rate_W = ew.rate;
    rec.energy_scale_W = crate::chem::energy(&state.chem.w).max(ew.energy) / dt;
    rec.mass_budget_residual = cell_report.mass_budget_residual;
    rec.flow_residual = report.residual;
    rec.flow_energy_residual = report.energy_residual;
    rec.picard_sweeps = sweeps as f64;
    rec.picard_change = change;
    Ok((next, rec))
}

fn project_sum(cells: &mut CellFields, ls: &LevelSetField, rho_f: f64) {
    let cut = -INTERIOR_WIDTHS * ls.width();
    for i in 0..ls.grid().len() {
        if ls.phi()[i] <= cut {
            let s = cells.p[i] + cells.q[i] + cells.d[i];
            if s > 0.0 {
                let f = rho_f / s;
                cells.p[i] *= f;
                cells.q[i] *= f;
                cells.d[i] *= f;
            }
        }
    }
}

/// A bound that a record breaks.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub value: f64,
    pub bound: f64,
    pub kind: &'static str,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} = {} breaks {} bound {}", self.field, self.value, self.kind, self.bound)
    }
}

/// Bound checks on one record: densities in `[0, ρ_f]`, nutrient in
/// `[0, C̄]`, drug in `[0, W_max]`, and the energy inequality for C and W.
pub fn check_bounds(rec: &DiagnosticsRecord, params: &ModelParams, drug_ceiling: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let rho_tol = BOUND_TOL * params.rho_f;
    let c_tol = BOUND_TOL * params.c_bar;
    let w_scale = if drug_ceiling > 0.0 { drug_ceiling } else { 1.0 };
    let w_tol = BOUND_TOL * w_scale;
    let mut lower = |field, value: f64, tol: f64| {
        if !(value >= -tol) {
            out.push(Violation { field, value, bound: 0.0, kind: "lower" });
        }
    };
    lower("P", rec.min_P, rho_tol);
    lower("Q", rec.min_Q, rho_tol);
    lower("D", rec.min_D, rho_tol);
    lower("C", rec.min_C, c_tol);
    lower("W", rec.min_W, w_tol);
    let mut upper = |field, value: f64, bound: f64, tol: f64| {
        if !(value <= bound + tol) {
            out.push(Violation { field, value, bound, kind: "upper" });
        }
    };
    upper("P", rec.max_P, params.rho_f, rho_tol);
    upper("Q", rec.max_Q, params.rho_f, rho_tol);
    upper("D", rec.max_D, params.rho_f, rho_tol);
    upper("C", rec.max_C, params.c_bar, c_tol);
    upper("W", rec.max_W, drug_ceiling, w_tol);
    upper("energy_C", rec.energy_rate_C, 0.0, ENERGY_TOL * rec.energy_scale_C);
    upper("energy_W", rec.energy_rate_W, 0.0, ENERGY_TOL * rec.energy_scale_W);
    out
}

/// Run bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub t_end: f64,
    /// Time between snapshots; zero writes only the initial and final state.
    pub snapshot_every: f64,
    pub out_dir: Option<PathBuf>,
    pub deterministic: bool,
    /// Seconds of wall-clock time before the run checkpoints and stops.
    pub wall_clock_budget: Option<f64>,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings { t_end: 0.1, snapshot_every: 0.0, out_dir: None, deterministic: true, wall_clock_budget: None }
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub state: SimState,
    pub initial_flow: FlowSolveReport,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<PathBuf>,
    /// `(step, violation)` pairs from `check_bounds`.
    pub violations: Vec<(usize, Violation)>,
    pub failure: Option<Error>,
    pub budget_exceeded: bool,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        if self.budget_exceeded {
            EXIT_BUDGET
        } else if let Some(e) = &self.failure {
            match e.root() {
                Error::MaxPrinciple { .. }
                | Error::NonFinite { .. }
                | Error::EmptyZeroSet
                | Error::BandEscaped { .. } => EXIT_INVARIANT,
                _ => EXIT_SOLVER,
            }
        } else if !self.violations.is_empty() {
            EXIT_INVARIANT
        } else {
            EXIT_OK
        }
    }
}

/// Step size for the next step: cell stability, interface CFL, `dt_max`, end time.
pub fn next_dt(state: &SimState, sc: &Scenario, t_end: f64) -> f64 {
    let mut dt = cfl_dt(&state.flow.v, &sc.params, &sc.step_limits());
    if !sc.velocity.is_zero() {
        let vel = VectorField::from_fn(*state.grid(), |x| sc.velocity.eval(state.t, x));
        let vel_next = VectorField::from_fn(*state.grid(), |x| sc.velocity.eval(state.t + dt, x));
        dt = dt.min(max_admissible_dt(&vel)).min(max_admissible_dt(&vel_next));
    }
    dt.min(t_end - state.t)
}

/// Integrate from the initial state to `settings.t_end`.
///
/// Setup failures are returned as errors; failures during stepping end the
/// run early and are reported in [`RunOutput::failure`].
pub fn run(sc: &Scenario, settings: &RunSettings) -> Result<RunOutput> {
    if settings.deterministic {
        faer::set_global_parallelism(faer::Par::Seq);
    }
    let started = Instant::now();
    let (mut state, initial_flow) = initial_state(sc)?;
    let mut out = RunOutput {
        state: state.clone(),
        initial_flow,
        diagnostics: Vec::new(),
        snapshots: Vec::new(),
        violations: Vec::new(),
        failure: None,
        budget_exceeded: false,
    };
    let mut snap_index = 0usize;
    let mut write_snap = |st: &SimState, out: &mut RunOutput, name: Option<&str>| -> Result<()> {
        if let Some(dir) = &settings.out_dir {
            let path = match name {
                Some(n) => dir.join(n),
                None => {
                    let p = dir.join(format!("snapshot_{snap_index:05}.csv"));
                    snap_index += 1;
                    p
                }
            };
            crate::io::write_snapshot(st, &path)?;
            out.snapshots.push(path);
        }
        Ok(())
    };
    write_snap(&state, &mut out, None)?;
    let mut last_snap_t = Some(state.t);
    let mut next_snap = if settings.snapshot_every > 0.0 { settings.snapshot_every } else { f64::INFINITY };
    let end_tol = 1e-12 * settings.t_end.max(1.0);

    while state.t < settings.t_end - end_tol {
        if let Some(budget) = settings.wall_clock_budget {
            if started.elapsed().as_secs_f64() > budget {
                write_snap(&state, &mut out, Some("checkpoint.csv"))?;
                out.budget_exceeded = true;
                out.failure = Some(Error::BudgetExceeded { budget_s: budget, t: state.t });
                break;
            }
        }
        let mut dt = next_dt(&state, sc, settings.t_end);
        let mut attempt = 0;
        let result = loop {
            match coupled_step(&state, sc, dt) {
                Err(e) if attempt < 6 => {
                    if let Error::Cfl { admissible, .. } = e.root() {
                        dt = (sc.numerics.cfl_safety * admissible).min(dt * 0.5);
                        attempt += 1;
                        continue;
                    }
                    break Err(e);
                }
                other => break other,
            }
        };
        match result {
            Ok((next, rec)) => {
                for v in check_bounds(&rec, &sc.params, sc.drug_ceiling()) {
                    out.violations.push((next.step_index, v));
                }
                out.diagnostics.push(rec);
                state = next;
                if state.t >= next_snap - end_tol {
                    write_snap(&state, &mut out, None)?;
                    last_snap_t = Some(state.t);
                    while next_snap <= state.t + end_tol {
                        next_snap += settings.snapshot_every;
                    }
                }
            }
            Err(e) => {
                write_snap(&state, &mut out, Some("failure_state.csv"))?;
                out.failure = Some(e);
                break;
            }
        }
    }
    if out.failure.is_none() && last_snap_t != Some(state.t) {
        write_snap(&state, &mut out, None)?;
    }
    if let Some(dir) = &settings.out_dir {
        crate::io::write_diagnostics(&out.diagnostics, &dir.join("diagnostics.csv"))?;
    }
    out.state = state;
    Ok(out)
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKnob {
    Eps,
    Omega,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub penalty_flux: f64,
    pub leakage_cells: f64,
    pub leakage_chem: f64,
    pub sum_drift: f64,
}

/// Final-time monitors for each value of `knob`.
pub fn sweep(sc: &Scenario, settings: &RunSettings, knob: SweepKnob, values: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(values.len());
    for &val in values {
        let mut s = sc.clone();
        match knob {
            SweepKnob::Eps => s.params.eps_penalty = val,
            SweepKnob::Omega => s.params.omega = val,
        }
        let local = RunSettings { out_dir: None, ..settings.clone() };
        let out = run(&s, &local)?;
        if let Some(e) = out.failure {
            return Err(e);
        }
        let last = out.diagnostics.last().cloned().unwrap_or_else(|| observe(&out.state));
        rows.push(SweepRow {
            value: val,
            penalty_flux: last.penalty_flux,
            leakage_cells: last.leakage_cells,
            leakage_chem: last.leakage_chem,
            sum_drift: last.sum_drift,
        });
    }
    Ok(rows)
}
