use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Initial tumor geometry.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    Ellipsoid {
        center: [f64; 3],
        semi_axes: [f64; 3],
    },
    /// Union of spheres `(center, radius)`.
    Union(Vec<([f64; 3], f64)>),
}

fn norm(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

impl Shape {
    pub fn sphere(center: [f64; 3], radius: f64) -> Self {
        Shape::Sphere { center, radius }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Shape(msg));
        match self {
            Shape::Sphere { radius, .. } if !(*radius > 0.0) => bad(format!("radius must be positive, got {radius}")),
            Shape::Ellipsoid { semi_axes, .. } if semi_axes.iter().any(|a| !(*a > 0.0)) => {
                bad(format!("semi-axes must be positive, got {semi_axes:?}"))
            }
            Shape::Union(parts) if parts.is_empty() => bad("union of zero spheres".into()),
            Shape::Union(parts) if parts.iter().any(|(_, r)| !(*r > 0.0)) => bad("union radii must be positive".into()),
            _ => Ok(()),
        }
    }

    /// Largest `|x|` reached by the shape (an upper bound for ellipsoids).
    pub fn outer_radius(&self) -> f64 {
        match self {
            Shape::Sphere { center, radius } => norm(*center) + radius,
            Shape::Ellipsoid { center, semi_axes } => norm(*center) + semi_axes.iter().cloned().fold(0.0, f64::max),
            Shape::Union(parts) => parts.iter().map(|(c, r)| norm(*c) + r).fold(0.0, f64::max),
        }
    }

    pub fn contains(&self, x: [f64; 3], dim: usize) -> bool {
        self.raw_levelset(x, dim) < 0.0
    }

    /// Level set value before reinitialization: exact signed distance for a
    /// sphere, min of distances for a union, a scaled radial proxy for an
    /// ellipsoid. Negative inside.
    pub fn raw_levelset(&self, x: [f64; 3], dim: usize) -> f64 {
        let mask = |v: [f64; 3]| {
            let mut v = v;
            for c in v.iter_mut().skip(dim) {
                *c = 0.0;
            }
            v
        };
        match self {
            Shape::Sphere { center, radius } => norm(mask(sub(x, *center))) - radius,
            Shape::Union(parts) => parts.iter().map(|(c, r)| norm(mask(sub(x, *c))) - r).fold(f64::INFINITY, f64::min),
            Shape::Ellipsoid { center, semi_axes } => {
                let d = mask(sub(x, *center));
                let mut q = [0.0; 3];
                for a in 0..dim {
                    q[a] = d[a] / semi_axes[a];
                }
                let amin = semi_axes.iter().take(dim).cloned().fold(f64::INFINITY, f64::min);
                (norm(q) - 1.0) * amin
            }
        }
    }

    /// Exact volume (area in 2D). Unions are only exact when the parts are disjoint.
    pub fn analytic_volume(&self, dim: usize) -> f64 {
        let ball = |r: f64| if dim == 2 { PI * r * r } else { 4.0 / 3.0 * PI * r.powi(3) };
        match self {
            Shape::Sphere { radius, .. } => ball(*radius),
            Shape::Ellipsoid { semi_axes, .. } => {
                if dim == 2 {
                    PI * semi_axes[0] * semi_axes[1]
                } else {
                    4.0 / 3.0 * PI * semi_axes[0] * semi_axes[1] * semi_axes[2]
                }
            }
            Shape::Union(parts) => parts.iter().map(|(_, r)| ball(*r)).sum(),
        }
    }

    /// Exact boundary measure (perimeter in 2D) for spheres.
    pub fn analytic_area(&self, dim: usize) -> Option<f64> {
        match self {
            Shape::Sphere { radius, .. } => Some(if dim == 2 { 2.0 * PI * radius } else { 4.0 * PI * radius * radius }),
            _ => None,
        }
    }
}
