//! Prescribed boundary velocity `V(t, x)` driving the tumor interface.
//!
//! Every preset is multiplied by a C² radial cutoff that equals one for
//! `|x| <= scale` and vanishes for `|x| >= R`, so `V` has compact support in
//! the ball of radius `R`.

use std::fmt;

use evalexpr::{ContextWithMutableVariables, HashMapContext, Node, Value};

use crate::error::{Error, Result};

#[derive(Clone)]
pub enum VelocityPreset {
    Zero,
    Translation([f64; 3]),
    /// `V = rate * x` inside the cutoff.
    RadialExpansion {
        rate: f64,
    },
    /// Rigid rotation `V = w (-y, x)` in the x-y plane.
    Rotation {
        angular: f64,
    },
    /// One expression per component in `x, y, z, t`.
    UserExpression {
        sources: Vec<String>,
        trees: Vec<Node>,
    },
}

impl fmt::Debug for VelocityPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VelocityPreset::Zero => write!(f, "Zero"),
            VelocityPreset::Translation(u) => write!(f, "Translation({u:?})"),
            VelocityPreset::RadialExpansion { rate } => write!(f, "RadialExpansion {{ rate: {rate} }}"),
            VelocityPreset::Rotation { angular } => write!(f, "Rotation {{ angular: {angular} }}"),
            VelocityPreset::UserExpression { sources, .. } => write!(f, "UserExpression({sources:?})"),
        }
    }
}

impl PartialEq for VelocityPreset {
    fn eq(&self, other: &Self) -> bool {
        use VelocityPreset::*;
        match (self, other) {
            (Zero, Zero) => true,
            (Translation(a), Translation(b)) => a == b,
            (RadialExpansion { rate: a }, RadialExpansion { rate: b }) => a == b,
            (Rotation { angular: a }, Rotation { angular: b }) => a == b,
            (UserExpression { sources: a, .. }, UserExpression { sources: b, .. }) => a == b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryVelocity {
    preset: VelocityPreset,
    /// Radius up to which the preset acts at full strength.
    scale: f64,
    /// Support radius `R`; `V` vanishes for `|x| >= R`.
    support: f64,
}

/// C² ramp: 1 for `r <= inner`, 0 for `r >= outer`.
pub fn cutoff(r: f64, inner: f64, outer: f64) -> f64 {
    if r <= inner {
        1.0
    } else if r >= outer {
        0.0
    } else {
        let s = (r - inner) / (outer - inner);
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

impl BoundaryVelocity {
    pub fn new(preset: VelocityPreset, scale: f64, support: f64) -> Result<Self> {
        if !(support > 0.0) || !(scale > 0.0) || scale >= support {
            return Err(Error::Config(format!(
                "boundary velocity needs 0 < scale < R, got scale = {scale}, R = {support}"
            )));
        }
        Ok(BoundaryVelocity { preset, scale, support })
    }

    pub fn zero(support: f64) -> Self {
        BoundaryVelocity { preset: VelocityPreset::Zero, scale: 0.5 * support, support }
    }

    /// Parse per-component expressions in `x, y, z, t`.
    pub fn user_expression(exprs: &[String], scale: f64, support: f64) -> Result<Self> {
        let trees = exprs
            .iter()
            .map(|e| {
                evalexpr::build_operator_tree::<evalexpr::DefaultNumericTypes>(e)
                    .map_err(|err| Error::Config(format!("bad velocity expression '{e}': {err}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(VelocityPreset::UserExpression { sources: exprs.to_vec(), trees }, scale, support)
    }

    pub fn preset(&self) -> &VelocityPreset {
        &self.preset
    }
    pub fn scale(&self) -> f64 {
        self.scale
    }
    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.preset, VelocityPreset::Zero)
    }

    pub fn eval(&self, t: f64, x: [f64; 3]) -> [f64; 3] {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let chi = cutoff(r, self.scale, self.support);
        if chi == 0.0 {
            return [0.0; 3];
        }
        let raw = match &self.preset {
            VelocityPreset::Zero => return [0.0; 3],
            VelocityPreset::Translation(u) => *u,
            VelocityPreset::RadialExpansion { rate } => [rate * x[0], rate * x[1], rate * x[2]],
            VelocityPreset::Rotation { angular } => [-angular * x[1], angular * x[0], 0.0],
            VelocityPreset::UserExpression { trees, .. } => {
                let mut ctx = HashMapContext::<evalexpr::DefaultNumericTypes>::new();
                for (name, val) in [("x", x[0]), ("y", x[1]), ("z", x[2]), ("t", t)] {
                    ctx.set_value(name.into(), Value::Float(val)).expect("fresh context");
                }
                let mut out = [0.0; 3];
                for (a, tree) in trees.iter().enumerate().take(3) {
                    out[a] = match tree.eval_with_context(&ctx) {
                        Ok(Value::Float(v)) => v,
                        Ok(Value::Int(v)) => v as f64,
                        _ => f64::NAN,
                    };
                }
                out
            }
        };
        [raw[0] * chi, raw[1] * chi, raw[2] * chi]
    }

    /// Radial component for radially symmetric presets (used by the radial oracle).
    pub fn radial_component(&self, t: f64, r: f64) -> f64 {
        let v = self.eval(t, [r, 0.0, 0.0]);
        v[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanishes_outside_support() {
        let v = BoundaryVelocity::new(VelocityPreset::Translation([1.0, 2.0, 0.0]), 0.3, 0.5).unwrap();
        assert_eq!(v.eval(0.0, [0.5, 0.0, 0.0]), [0.0; 3]);
        assert_eq!(v.eval(0.0, [0.4, 0.4, 0.0]), [0.0; 3]);
        assert_eq!(v.eval(0.0, [0.1, 0.0, 0.0]), [1.0, 2.0, 0.0]);
    }

    #[test]
    fn cutoff_is_smooth_and_monotone() {
        let mut prev = 1.0;
        for k in 0..=100 {
            let r = 0.3 + 0.2 * k as f64 / 100.0;
            let c = cutoff(r, 0.3, 0.5);
            assert!(c <= prev + 1e-15);
            prev = c;
        }
        // finite-difference derivative stays bounded (C¹ in x)
        let d = |r: f64| (cutoff(r + 1e-6, 0.3, 0.5) - cutoff(r - 1e-6, 0.3, 0.5)) / 2e-6;
        for k in 0..=50 {
            assert!(d(0.29 + 0.22 * k as f64 / 50.0).abs() < 1.875 / 0.2 + 1e-3);
        }
    }

    #[test]
    fn user_expression_evaluates() {
        let v = BoundaryVelocity::user_expression(&["x * t".into(), "1.0".into()], 0.3, 0.5).unwrap();
        let val = v.eval(2.0, [0.1, 0.0, 0.0]);
        assert!((val[0] - 0.2).abs() < 1e-15);
        assert_eq!(val[1], 1.0);
        assert!(BoundaryVelocity::user_expression(&["(x + 2".into()], 0.3, 0.5).is_err());
    }

    #[test]
    fn scale_must_be_inside_support() {
        assert!(BoundaryVelocity::new(VelocityPreset::Zero, 0.6, 0.5).is_err());
    }
}
