//! Piecewise-smooth scalar diffusion coefficients: a smooth oscillatory base
//! field scaled by a per-subdomain multiplier, so the coefficient may jump
//! across subdomain boundaries but stays smooth inside each subdomain.

use crate::error::{Error, Result};
use crate::mesh::Point;

/// Smooth base field shared by all subdomains.
#[derive(Clone, Debug)]
pub enum BaseField {
    /// Constant value.
    Constant(f64),
    /// `2 + sin(freq*pi*x) * sin(freq*pi*y)`, bounded in `[1, 3]`.
    SinSin { freq: f64 },
}

impl BaseField {
    fn eval(&self, p: Point) -> f64 {
        match self {
            BaseField::Constant(c) => *c,
            BaseField::SinSin { freq } => {
                let w = freq * std::f64::consts::PI;
                2.0 + (w * p[0]).sin() * (w * p[1]).sin()
            }
        }
    }
}

/// Subdomain-wise scaled diffusion coefficient `alpha_k * base(x, y)`.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    pub base: BaseField,
    /// One multiplier per subdomain (row-major subdomain order).
    pub multipliers: Vec<f64>,
}

impl CoefficientField {
    /// Spatially constant coefficient, identical in every subdomain.
    pub fn constant(value: f64, subdomains: usize) -> Self {
        CoefficientField {
            base: BaseField::Constant(value),
            multipliers: vec![1.0; subdomains],
        }
    }

    /// Scalar coefficient value inside subdomain `k`.
    pub fn eval(&self, k: usize, p: Point) -> f64 {
        self.multipliers[k] * self.base.eval(p)
    }

    /// Coefficient as an isotropic 2x2 tensor. Assembly works with the
    /// tensor form so anisotropic fields can reuse the same kernels.
    pub fn tensor(&self, k: usize, p: Point) -> [[f64; 2]; 2] {
        let a = self.eval(k, p);
        [[a, 0.0], [0.0, a]]
    }
}

/// Builds the oscillatory test coefficient: base `2 + sin(freq*pi*x) *
/// sin(freq*pi*y)`, multiplier `alpha1` inside the subdomains listed in
/// `marked` and 1 elsewhere.
pub fn make_test_coefficient(
    freq: f64,
    alpha1: f64,
    marked: &[usize],
    subdomains: usize,
) -> Result<CoefficientField> {
    if !(alpha1 > 0.0) || !alpha1.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "coefficient multiplier must be positive and finite, got {alpha1}"
        )));
    }
    if !(freq >= 0.0) || !freq.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "oscillation frequency must be nonnegative, got {freq}"
        )));
    }
    let mut multipliers = vec![1.0; subdomains];
    for &k in marked {
        if k >= subdomains {
            return Err(Error::InvalidParameter(format!(
                "marked subdomain {k} out of range (have {subdomains})"
            )));
        }
        multipliers[k] = alpha1;
    }
    Ok(CoefficientField {
        base: BaseField::SinSin { freq },
        multipliers,
    })
}

/// A named test problem: mesh resolution, subdomain grid, oscillation
/// frequency and the set of subdomains carrying the large multiplier.
#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub n: usize,
    pub m: usize,
    pub freq: f64,
    pub marked: Vec<usize>,
}

/// Looks up one of the built-in coefficient distributions.
///
/// The distributions are reconstructions of the usual channel/inclusion test
/// layouts, not data imported from elsewhere: `problem1` marks one interior
/// subdomain of a 4x4 grid, `problem2` marks two non-adjacent interior
/// subdomains, and `problem3` scatters marked cells over a 32x32 grid.
pub fn preset(name: &str) -> Result<Preset> {
    match name {
        "problem1" => Ok(Preset {
            name: "problem1",
            n: 48,
            m: 4,
            freq: 100.0,
            marked: vec![5],
        }),
        "problem2" => Ok(Preset {
            name: "problem2",
            n: 48,
            m: 4,
            freq: 100.0,
            marked: vec![5, 10],
        }),
        "problem3" => {
            let m = 32;
            let mut marked = Vec::new();
            for r in 0..m {
                for c in 0..m {
                    if (3 * r + 7 * c) % 16 == 5 {
                        marked.push(r * m + c);
                    }
                }
            }
            Ok(Preset {
                name: "problem3",
                n: 64,
                m,
                freq: 100.0,
                marked,
            })
        }
        other => Err(Error::InvalidParameter(format!(
            "unknown preset '{other}' (expected problem1, problem2 or problem3)"
        ))),
    }
}
