//! Model parameters, penalized coefficient fields, reaction sources and
//! consumption terms.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::domain::{heaviside, LevelSetField};
use crate::error::{Error, Result};
use crate::grid::ScalarField;

/// Response of a cell population to the drug concentration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DrugResponse {
    /// `W / (1 + W)`.
    #[default]
    MichaelisMenten,
    /// `min(W, 1)`.
    LinearCapped,
    /// `tanh(W / 2)`.
    Logistic,
    /// Identically zero.
    None,
}

impl DrugResponse {
    pub fn eval(self, w: f64) -> f64 {
        match self {
            DrugResponse::MichaelisMenten => w / (1.0 + w),
            DrugResponse::LinearCapped => w.min(1.0),
            DrugResponse::Logistic => (0.5 * w).tanh(),
            DrugResponse::None => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DrugResponse::MichaelisMenten => "michaelis_menten",
            DrugResponse::LinearCapped => "linear_capped",
            DrugResponse::Logistic => "logistic",
            DrugResponse::None => "none",
        }
    }
}

impl fmt::Display for DrugResponse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DrugResponse {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "michaelis_menten" => Ok(DrugResponse::MichaelisMenten),
            "linear_capped" => Ok(DrugResponse::LinearCapped),
            "logistic" => Ok(DrugResponse::Logistic),
            "none" => Ok(DrugResponse::None),
            other => Err(Error::Config(format!(
                "unknown drug response '{other}' (expected michaelis_menten, linear_capped, logistic or none)"
            ))),
        }
    }
}

/// Physical constants, rates and penalization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Proliferation rate.
    pub k_b: f64,
    /// Proliferating to quiescent transfer under nutrient deficit.
    pub k_q: f64,
    /// Apoptosis of proliferating cells under nutrient deficit.
    pub k_a: f64,
    /// Quiescent to proliferating transfer.
    pub k_p: f64,
    /// Death of quiescent cells under nutrient deficit.
    pub k_d: f64,
    /// Removal of dead cells.
    pub k_r: f64,
    pub k_1: f64,
    pub k_2: f64,
    pub mu_1: f64,
    pub mu_2: f64,
    pub i_1: f64,
    pub i_2: f64,
    /// Nutrient ceiling.
    pub c_bar: f64,
    /// Total mixture density.
    pub rho_f: f64,
    /// Shear viscosity.
    pub mu: f64,
    pub k_perm: f64,
    pub nu_1: f64,
    pub nu_2: f64,
    pub eps_penalty: f64,
    pub omega: f64,
    pub eta: f64,
    pub g1: DrugResponse,
    pub g2: DrugResponse,
}

pub const RATE_KEYS: [&str; 12] =
    ["K_B", "K_Q", "K_A", "K_P", "K_D", "K_R", "K_1", "K_2", "mu_1", "mu_2", "i_1", "i_2"];
pub const POSITIVE_KEYS: [&str; 6] = ["C_bar", "rho_f", "mu", "K_perm", "nu_1", "nu_2"];
pub const RESPONSE_KEYS: [&str; 2] = ["G1_kind", "G2_kind"];
/// Scheme keys with defaults.
pub const SCHEME_DEFAULTS: [(&str, f64); 3] = [("eps_penalty", 1e-3), ("omega", 1e-2), ("eta", 0.0)];

impl ModelParams {
    /// Key/value form using the same names `validate_params` accepts.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let vals = [
            ("K_B", self.k_b),
            ("K_Q", self.k_q),
            ("K_A", self.k_a),
            ("K_P", self.k_p),
            ("K_D", self.k_d),
            ("K_R", self.k_r),
            ("K_1", self.k_1),
            ("K_2", self.k_2),
            ("mu_1", self.mu_1),
            ("mu_2", self.mu_2),
            ("i_1", self.i_1),
            ("i_2", self.i_2),
            ("C_bar", self.c_bar),
            ("rho_f", self.rho_f),
            ("mu", self.mu),
            ("K_perm", self.k_perm),
            ("nu_1", self.nu_1),
            ("nu_2", self.nu_2),
            ("eps_penalty", self.eps_penalty),
            ("omega", self.omega),
            ("eta", self.eta),
        ];
        let mut m: BTreeMap<String, String> =
            vals.iter().map(|(k, v)| (k.to_string(), crate::io::format_number(*v))).collect();
        m.insert("G1_kind".into(), self.g1.to_string());
        m.insert("G2_kind".into(), self.g2.to_string());
        m
    }

    /// Upper bound on the pointwise reaction rate magnitude for densities in
    /// `[0, ρ_f]`, nutrient in `[0, C̄]` and drug in `[0, w_max]`.
    pub fn max_reaction_rate(&self, w_max: f64) -> f64 {
        let cb = self.c_bar;
        let g1 = self.g1.eval(w_max);
        let g2 = self.g2.eval(w_max);
        let out_p = (self.k_q + self.k_a) * cb + self.i_1 * g1;
        let out_q = self.k_p * cb + self.k_d * cb + self.i_2 * g2;
        let grow = self.k_b * cb;
        out_p.max(out_q).max(self.k_r).max(grow)
    }
}

fn parse_f64(key: &str, raw: &str, errs: &mut Vec<String>) -> Option<f64> {
    match raw.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => {
            errs.push(format!("{key}: '{raw}' is not a finite number"));
            None
        }
    }
}

/// Validate a flat key map (no section prefixes) into [`ModelParams`].
///
/// Physical keys are mandatory. Scheme keys (`eps_penalty`, `omega`, `eta`)
/// and the drug-response selectors fall back to defaults; each fallback adds
/// a warning. Unknown keys are left to the caller.
pub fn validate_params(raw: &BTreeMap<String, String>) -> Result<(ModelParams, Vec<String>)> {
    let mut errs = Vec::new();
    let mut warnings = Vec::new();
    let mut vals: BTreeMap<&str, f64> = BTreeMap::new();

    for key in RATE_KEYS {
        match raw.get(key) {
            None => errs.push(format!("{key} is required")),
            Some(s) => {
                if let Some(v) = parse_f64(key, s, &mut errs) {
                    if v < 0.0 {
                        errs.push(format!("{key} must be nonnegative"));
                    }
                    vals.insert(key, v);
                }
            }
        }
    }
    for key in POSITIVE_KEYS {
        match raw.get(key) {
            None => errs.push(format!("{key} is required")),
            Some(s) => {
                if let Some(v) = parse_f64(key, s, &mut errs) {
                    if !(v > 0.0) {
                        errs.push(format!("{key} must be positive"));
                    }
                    vals.insert(key, v);
                }
            }
        }
    }
    for (key, default) in SCHEME_DEFAULTS {
        match raw.get(key) {
            None => {
                warnings.push(format!("{key} not set, using default {default}"));
                vals.insert(key, default);
            }
            Some(s) => {
                if let Some(v) = parse_f64(key, s, &mut errs) {
                    vals.insert(key, v);
                }
            }
        }
    }
    if let Some(&e) = vals.get("eps_penalty") {
        if !(e > 0.0) {
            errs.push("eps_penalty must be positive".into());
        }
    }
    if let Some(&w) = vals.get("omega") {
        if !(w > 0.0 && w <= 1.0) {
            errs.push("omega must lie in (0, 1]".into());
        }
    }
    if let Some(&eta) = vals.get("eta") {
        if eta < 0.0 {
            errs.push("eta must be nonnegative".into());
        }
    }
    let mut responses = [DrugResponse::default(); 2];
    for (slot, key) in RESPONSE_KEYS.iter().enumerate() {
        match raw.get(*key) {
            None => warnings.push(format!("{key} not set, using default {}", DrugResponse::default())),
            Some(s) => match s.parse() {
                Ok(g) => responses[slot] = g,
                Err(e) => errs.push(format!("{key}: {e}")),
            },
        }
    }
    if !errs.is_empty() {
        return Err(Error::Params(errs));
    }
    let v = |k: &str| vals[k];
    Ok((
        ModelParams {
            k_b: v("K_B"),
            k_q: v("K_Q"),
            k_a: v("K_A"),
            k_p: v("K_P"),
            k_d: v("K_D"),
            k_r: v("K_R"),
            k_1: v("K_1"),
            k_2: v("K_2"),
            mu_1: v("mu_1"),
            mu_2: v("mu_2"),
            i_1: v("i_1"),
            i_2: v("i_2"),
            c_bar: v("C_bar"),
            rho_f: v("rho_f"),
            mu: v("mu"),
            k_perm: v("K_perm"),
            nu_1: v("nu_1"),
            nu_2: v("nu_2"),
            eps_penalty: v("eps_penalty"),
            omega: v("omega"),
            eta: v("eta"),
            g1: responses[0],
            g2: responses[1],
        },
        warnings,
    ))
}

/// Viscosity and diffusivities after the healthy-tissue cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFields {
    pub mu_omega: ScalarField,
    pub nu1_omega: ScalarField,
    pub nu2_omega: ScalarField,
}

/// `c · (ω + (1 − ω)(1 − H_w(Φ)))` for `c ∈ {μ, ν₁, ν₂}`.
pub fn coefficient_fields(params: &ModelParams, ls: &LevelSetField) -> CoefficientFields {
    let w = ls.width();
    let om = params.omega;
    let ramp = ls.phi().map(|p| {
        let inside = 1.0 - heaviside(p, w);
        if inside == 1.0 {
            1.0
        } else if inside == 0.0 {
            om
        } else {
            (om + (1.0 - om) * inside).clamp(om, 1.0)
        }
    });
    CoefficientFields {
        mu_omega: ramp.map(|r| params.mu * r),
        nu1_omega: ramp.map(|r| params.nu_1 * r),
        nu2_omega: ramp.map(|r| params.nu_2 * r),
    }
}

/// Pointwise `(G_P, G_Q, G_D)`.
#[inline]
pub fn source_terms(p: f64, q: f64, d: f64, c: f64, w: f64, prm: &ModelParams) -> [f64; 3] {
    let deficit = prm.c_bar - c;
    let kill_p = prm.i_1 * prm.g1.eval(w) * p;
    let kill_q = prm.i_2 * prm.g2.eval(w) * q;
    let p_to_q = prm.k_q * deficit * p;
    let p_to_d = prm.k_a * deficit * p;
    let q_to_p = prm.k_p * c * q;
    let q_to_d = prm.k_d * deficit * q;
    let born = prm.k_b * c * p;
    let removed = prm.k_r * d;
    [
        born - p_to_q - p_to_d + q_to_p - kill_p,
        p_to_q - q_to_p - q_to_d - kill_q,
        p_to_d + q_to_d - removed + kill_p + kill_q,
    ]
}

/// Net mixture production `K_B C P − K_R D`.
#[inline]
pub fn net_production(p: f64, d: f64, c: f64, prm: &ModelParams) -> f64 {
    prm.k_b * c * p - prm.k_r * d
}

fn check_grids(fields: &[&ScalarField]) -> Result<()> {
    let g = fields[0].grid();
    fields[1..].iter().try_for_each(|f| g.check_same(f.grid()))
}

/// Reaction sources for the three cell populations.
pub fn sources(
    p: &ScalarField,
    q: &ScalarField,
    d: &ScalarField,
    c: &ScalarField,
    w: &ScalarField,
    params: &ModelParams,
) -> Result<[ScalarField; 3]> {
    check_grids(&[p, q, d, c, w])?;
    let g = *p.grid();
    let mut out = [ScalarField::zeros(g), ScalarField::zeros(g), ScalarField::zeros(g)];
    for i in 0..g.len() {
        debug_assert!(c[i] >= -1e-12 && c[i] <= params.c_bar * (1.0 + 1e-12), "C = {} outside [0, C_bar]", c[i]);
        let s = source_terms(p[i], q[i], d[i], c[i], w[i], params);
        for k in 0..3 {
            out[k][i] = s[k];
        }
    }
    Ok(out)
}

/// Pointwise nutrient uptake rate coefficient `k` such that consumption is `k C`.
#[inline]
pub fn nutrient_uptake(c: f64, p: f64, q: f64, prm: &ModelParams) -> f64 {
    prm.k_1 * prm.k_p * c * p + prm.k_2 * prm.k_q * (prm.c_bar - c) * q
}

/// Pointwise drug uptake rate coefficient.
#[inline]
pub fn drug_uptake(w: f64, p: f64, q: f64, prm: &ModelParams) -> f64 {
    prm.mu_1 * prm.g1.eval(w) * p + prm.mu_2 * prm.g2.eval(w) * q
}

/// `(K₁K_P C P + K₂K_Q (C̄ − C) Q) C`.
pub fn nutrient_consumption(
    c: &ScalarField,
    p: &ScalarField,
    q: &ScalarField,
    params: &ModelParams,
) -> Result<ScalarField> {
    check_grids(&[c, p, q])?;
    let data = (0..c.grid().len()).map(|i| nutrient_uptake(c[i], p[i], q[i], params) * c[i]).collect();
    ScalarField::from_vec(*c.grid(), data)
}

/// `(μ₁ G₁(W) P + μ₂ G₂(W) Q) W`.
pub fn drug_consumption(
    w: &ScalarField,
    p: &ScalarField,
    q: &ScalarField,
    params: &ModelParams,
) -> Result<ScalarField> {
    check_grids(&[w, p, q])?;
    let data = (0..w.grid().len()).map(|i| drug_uptake(w[i], p[i], q[i], params) * w[i]).collect();
    ScalarField::from_vec(*w.grid(), data)
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::grid::Grid;
    use proptest::prelude::*;

    #[test]
    fn sample_accepted_and_echoed() {
        let raw = sample_map();
        let (p, warnings) = validate_params(&raw).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(p.to_map(), raw);
    }

    #[test]
    fn zero_viscosity_rejected() {
        let mut raw = sample_map();
        raw.insert("mu".into(), "0".into());
        match validate_params(&raw) {
            Err(Error::Params(v)) => assert_eq!(v, vec!["mu must be positive".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_rate_and_missing_physical_rejected() {
        let mut raw = sample_map();
        raw.insert("K_R".into(), "-1".into());
        raw.remove("nu_1");
        let Err(Error::Params(v)) = validate_params(&raw) else { panic!() };
        assert!(v.contains(&"K_R must be nonnegative".to_string()));
        assert!(v.contains(&"nu_1 is required".to_string()));
    }

    #[test]
    fn missing_eta_defaults_with_warning() {
        let mut raw = sample_map();
        raw.remove("eta");
        let (p, w) = validate_params(&raw).unwrap();
        assert_eq!(p.eta, 0.0);
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("eta"));
    }

    #[test]
    fn omega_out_of_range_rejected() {
        let mut raw = sample_map();
        raw.insert("omega".into(), "1.5".into());
        assert!(validate_params(&raw).is_err());
    }

    fn ls_const(v: f64) -> LevelSetField {
        let g = Grid::new(2, 16, 1.0).unwrap();
        LevelSetField::new(ScalarField::constant(g, v), 1.5).unwrap()
    }

    #[test]
    fn coefficients_without_cutoff() {
        let mut prm = sample();
        prm.omega = 1.0;
        let g = Grid::new(2, 16, 1.0).unwrap();
        let ls = LevelSetField::new(ScalarField::from_fn(g, |x| x[0]), 1.5).unwrap();
        let c = coefficient_fields(&prm, &ls);
        assert!(c.mu_omega.data().iter().all(|&m| m == prm.mu));
    }

    #[test]
    fn coefficients_pure_tumor_and_pure_healthy() {
        let mut prm = sample();
        let c = coefficient_fields(&prm, &ls_const(-1.0));
        assert!(c.mu_omega.data().iter().all(|&m| m == prm.mu));
        prm.omega = 1e-3;
        let c = coefficient_fields(&prm, &ls_const(1.0));
        for &m in c.mu_omega.data() {
            assert!((m - 1e-3 * prm.mu).abs() <= 1e-15 * 1e-3 * prm.mu);
        }
        for &n in c.nu2_omega.data() {
            assert!((n - 1e-3 * prm.nu_2).abs() <= 1e-15 * 1e-3 * prm.nu_2);
        }
    }

    #[test]
    fn zero_cells_give_zero_sources() {
        let prm = sample();
        let s = source_terms(0.0, 0.0, 0.0, 0.6, 0.3, &prm);
        assert_eq!(s, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn saturated_nutrient_no_drug() {
        let prm = sample();
        let (p, q, d) = (0.5, 0.3, 0.2);
        let c = prm.c_bar;
        let s = source_terms(p, q, d, c, 0.0, &prm);
        assert_eq!(s[0], prm.k_b * c * p + prm.k_p * c * q);
        assert_eq!(s[1], -prm.k_p * c * q);
        assert_eq!(s[2], -prm.k_r * d);
    }

    #[test]
    fn consumption_hand_expansion() {
        let prm = sample();
        let (c, p, q, w) = (0.4, 0.7, 0.2, 0.9);
        let nut = (1.5 * 0.75 * 0.4 * 0.7 + 0.6 * 0.5 * (1.0 - 0.4) * 0.2) * 0.4;
        let got = nutrient_uptake(c, p, q, &prm) * c;
        assert!((got - nut).abs() <= 1e-15 * nut);
        let g = w / (1.0 + w);
        let drug = (0.8 * g * 0.7 + 0.9 * g * 0.2) * 0.9;
        let got = drug_uptake(w, p, q, &prm) * w;
        assert!((got - drug).abs() <= 1e-15 * drug);
        assert_eq!(nutrient_uptake(0.0, 0.0, 0.0, &prm) * 0.0, 0.0);
    }

    #[test]
    fn consumption_vanishes_with_species_or_response() {
        let mut prm = sample();
        let g = Grid::new(2, 8, 1.0).unwrap();
        let z = ScalarField::zeros(g);
        let one = ScalarField::constant(g, 1.0);
        assert_eq!(nutrient_consumption(&z, &one, &one, &prm).unwrap().max_abs(), 0.0);
        assert_eq!(drug_consumption(&z, &one, &one, &prm).unwrap().max_abs(), 0.0);
        assert_eq!(nutrient_consumption(&one, &z, &z, &prm).unwrap().max_abs(), 0.0);
        prm.g1 = DrugResponse::None;
        prm.g2 = DrugResponse::None;
        assert_eq!(drug_consumption(&one, &one, &one, &prm).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let prm = sample();
        let a = ScalarField::zeros(Grid::new(2, 8, 1.0).unwrap());
        let b = ScalarField::zeros(Grid::new(2, 16, 1.0).unwrap());
        assert!(matches!(nutrient_consumption(&a, &a, &b, &prm), Err(Error::GridMismatch)));
        assert!(sources(&a, &a, &a, &b, &a, &prm).is_err());
    }

    #[test]
    fn drug_responses_are_bounded_and_nonnegative() {
        for g in [DrugResponse::MichaelisMenten, DrugResponse::LinearCapped, DrugResponse::Logistic, DrugResponse::None]
        {
            assert_eq!(g.eval(0.0), 0.0);
            for k in 0..100 {
                let v = g.eval(k as f64 * 0.37);
                assert!((0.0..=1.0).contains(&v));
            }
            assert_eq!(g.name().parse::<DrugResponse>().unwrap(), g);
        }
    }

    proptest! {
        #[test]
        fn source_sum_identity(p in 0.0..1.0f64, q in 0.0..1.0f64, d in 0.0..1.0f64, c in 0.0..1.0f64, w in 0.0..5.0f64) {
            let prm = sample();
            let s = source_terms(p, q, d, c, w, &prm);
            let lhs = s[0] + s[1] + s[2];
            let rhs = prm.k_b * c * p - prm.k_r * d;
            prop_assert!((lhs - rhs).abs() <= 1e-13 * 10.0);
        }

        #[test]
        fn transfer_terms_have_expected_signs(p in 0.0..1.0f64, q in 0.0..1.0f64, c in 0.0..1.0f64, w in 0.0..5.0f64) {
            let prm = sample();
            let deficit = prm.c_bar - c;
            prop_assert!(prm.k_q * deficit * p >= 0.0);
            prop_assert!(prm.k_a * deficit * p >= 0.0);
            prop_assert!(prm.k_d * deficit * q >= 0.0);
            prop_assert!(prm.k_p * c * q >= 0.0);
            prop_assert!(prm.i_1 * prm.g1.eval(w) * p >= 0.0);
            prop_assert!(nutrient_uptake(c, p, q, &prm) >= 0.0);
            prop_assert!(drug_uptake(w, p, q, &prm) >= 0.0);
        }

        #[test]
        fn coefficient_sandwich(shift in -1.0..1.0f64, slope in 0.1..5.0f64, omega in 1e-4..1.0f64) {
            let mut prm = sample();
            prm.omega = omega;
            let g = Grid::new(2, 16, 1.0).unwrap();
            let ls = LevelSetField::new(ScalarField::from_fn(g, |x| slope * x[0] + shift), 1.5).unwrap();
            let c = coefficient_fields(&prm, &ls);
            for &m in c.mu_omega.data() {
                prop_assert!(m >= omega * prm.mu && m <= prm.mu);
            }
        }
    }
}
