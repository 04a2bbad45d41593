//! Convex potentials: the logarithmically flat radial profile `F`, the
//! one-sided quadratic `Ψ_a`, their composite `F(‖x‖) + ε Ψ_a(x₁)` and
//! plain quadratics `½ xᵀQx`.
//!
//! The radial profile is
//!
//! ```text
//! F(r) = ∫₀^r du / (−log u)            0 < r ≤ e⁻²
//! F(r) = F(e⁻²) + (r − e⁻²) / 2        r ≥ e⁻²
//! ```
//!
//! which is `E₁(−log r)` on the inner branch. Its slope `1/(−log r)` vanishes
//! at the origin, but only logarithmically.

use std::fmt;

use crate::error::{Error, Result};
use crate::oracles::QuadraticSpec;

/// `e⁻²`, the seam between the logarithmic and linear branches of `F`.
pub const RADIAL_SEAM: f64 = 0.1353352832366127;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Below this radius `F` is returned as exactly zero.
const VALUE_FLOOR: f64 = 1e-300;

/// Exponential integral `E₁(R) = ∫_R^∞ e^{−v}/v dv` for `R > 0`.
///
/// Power series for `R ≤ 1`, modified Lentz continued fraction above.
pub fn exp_integral_e1(big_r: f64) -> Result<f64> {
    if !(big_r > 0.0) {
        return Err(Error::Domain(format!("E1 requires R > 0, got {big_r}")));
    }
    if big_r.is_infinite() {
        return Ok(0.0);
    }
    Ok(if big_r <= 1.0 { e1_series(big_r) } else { e1_continued_fraction(big_r) })
}

fn e1_series(x: f64) -> f64 {
    // -γ - ln x + Σ_{k≥1} (-1)^{k+1} x^k / (k·k!)
    let mut sum = 0.0;
    let mut term = 1.0; // (-1)^{k+1} x^k / k!
    for k in 1..200 {
        let kf = k as f64;
        term *= if k == 1 { x } else { -x / kf };
        let contrib = term / kf;
        sum += contrib;
        if contrib.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - x.ln() + sum
}

fn e1_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-x).exp()
}

/// `F(e⁻²) = E₁(2)`.
pub fn radial_seam_value() -> f64 {
    e1_continued_fraction(2.0)
}

/// The radial profile `F(r)` for `r ≥ 0`. Negative inputs are treated as 0.
pub fn radial_value(r: f64) -> f64 {
    if r < VALUE_FLOOR {
        0.0
    } else if r <= RADIAL_SEAM {
        let big_r = -r.ln();
        if big_r <= 1.0 {
            e1_series(big_r)
        } else {
            e1_continued_fraction(big_r)
        }
    } else {
        radial_seam_value() + 0.5 * (r - RADIAL_SEAM)
    }
}

/// `F'(r)`: `1/(−log r)` on `(0, e⁻²]`, `1/2` beyond, `0` at the origin.
pub fn radial_slope(r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else if r < RADIAL_SEAM {
        let big_r = -r.ln();
        if big_r.is_finite() {
            1.0 / big_r
        } else {
            0.0
        }
    } else {
        0.5
    }
}

/// `Ψ_a(u) = ½ (u − a)₊²` and its derivative `(u − a)₊`.
pub fn one_sided_quadratic(u: f64, a: f64) -> (f64, f64) {
    let excess = (u - a).max(0.0);
    (0.5 * excess * excess, excess)
}

/// The radial profile `F` as a value, for APIs that take the profile explicitly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RadialProfile;

impl RadialProfile {
    pub fn value(&self, r: f64) -> f64 {
        radial_value(r)
    }

    pub fn slope(&self, r: f64) -> f64 {
        radial_slope(r)
    }

    /// `F''(r) = 1/(r log² r)` inside the seam, `0` beyond.
    pub fn curvature(&self, r: f64) -> f64 {
        if r > 0.0 && r < RADIAL_SEAM {
            let l = r.ln();
            1.0 / (r * l * l)
        } else {
            0.0
        }
    }
}

/// A potential over which the flows are integrated.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    /// `F(‖x‖) + ε Ψ_a(x₁)` on ℝ².
    Pathological { a: f64, eps: f64 },
    /// `½ xᵀQx`.
    Quadratic(QuadraticSpec),
    /// `F(‖x‖)` on ℝ².
    PureRadial,
}

impl PotentialSpec {
    pub fn pathological(a: f64, eps: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("a must be > 0, got {a}")));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::Domain(format!("eps must be >= 0, got {eps}")));
        }
        Ok(PotentialSpec::Pathological { a, eps })
    }

    /// The Figure-2 potential, `a = 0.02`, `ε = 50`.
    pub fn canonical() -> Self {
        PotentialSpec::Pathological { a: 0.02, eps: 50.0 }
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match self {
            PotentialSpec::Pathological { .. } | PotentialSpec::PureRadial => 2,
            PotentialSpec::Quadratic(q) => q.dim(),
        }
    }

    /// Whether the potential is rotation invariant inside `‖x‖ ≤ radius`.
    pub fn radial_radius(&self) -> Option<f64> {
        match self {
            PotentialSpec::Pathological { a, .. } => Some(*a),
            PotentialSpec::PureRadial => Some(f64::INFINITY),
            PotentialSpec::Quadratic(_) => None,
        }
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.value_unchecked(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut g = vec![0.0; x.len()];
        self.gradient_into(x, &mut g);
        Ok(g)
    }

    /// `value` without the dimension check; `x.len()` must equal `dim()`.
    pub fn value_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            PotentialSpec::Pathological { a, eps } => {
                let r = x[0].hypot(x[1]);
                radial_value(r) + eps * one_sided_quadratic(x[0], *a).0
            }
            PotentialSpec::PureRadial => radial_value(x[0].hypot(x[1])),
            PotentialSpec::Quadratic(q) => q.quadratic_form(x),
        }
    }

    /// `value` returned and `gradient` written into `out` in one pass.
    pub fn value_gradient_into(&self, x: &[f64], out: &mut [f64]) -> f64 {
        match self {
            PotentialSpec::Pathological { a, eps } => {
                let (f, scale) = radial_value_and_scale(norm2(x));
                let (psi, dpsi) = one_sided_quadratic(x[0], *a);
                out[0] = scale * x[0] + eps * dpsi;
                out[1] = scale * x[1];
                f + eps * psi
            }
            PotentialSpec::PureRadial => {
                let (f, scale) = radial_value_and_scale(norm2(x));
                out[0] = scale * x[0];
                out[1] = scale * x[1];
                f
            }
            PotentialSpec::Quadratic(q) => {
                q.apply(x, out);
                q.quadratic_form(x)
            }
        }
    }

    /// `gradient` written into `out`; lengths must equal `dim()`.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            PotentialSpec::Pathological { a, eps } => {
                radial_gradient(x, out);
                out[0] += eps * (x[0] - a).max(0.0);
            }
            PotentialSpec::PureRadial => radial_gradient(x, out),
            PotentialSpec::Quadratic(q) => q.apply(x, out),
        }
    }
}

/// `F(r)` and `F'(r)/r` sharing one logarithm; `(0, 0)` at the origin.
fn radial_value_and_scale(r: f64) -> (f64, f64) {
    if r <= 0.0 {
        return (0.0, 0.0);
    }
    if r > RADIAL_SEAM {
        return (radial_seam_value() + 0.5 * (r - RADIAL_SEAM), 0.5 / r);
    }
    let big_r = -r.ln();
    if !big_r.is_finite() {
        return (0.0, 0.0);
    }
    let value = if r < VALUE_FLOOR {
        0.0
    } else if big_r <= 1.0 {
        e1_series(big_r)
    } else {
        e1_continued_fraction(big_r)
    };
    (value, 1.0 / (big_r * r))
}

/// Plain `√(x² + y²)` where it cannot over- or underflow, `hypot` otherwise.
fn norm2(x: &[f64]) -> f64 {
    let s = x[0] * x[0] + x[1] * x[1];
    if s > 1e-290 && s < 1e290 {
        s.sqrt()
    } else {
        x[0].hypot(x[1])
    }
}

fn radial_gradient(x: &[f64], out: &mut [f64]) {
    let r = x[0].hypot(x[1]);
    if r > 0.0 {
        let scale = radial_slope(r) / r;
        out[0] = scale * x[0];
        out[1] = scale * x[1];
    } else {
        out[0] = 0.0;
        out[1] = 0.0;
    }
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialSpec::Pathological { a, eps } => {
                write!(f, "potential=pathological a={a} eps={eps}")
            }
            PotentialSpec::PureRadial => write!(f, "potential=radial"),
            PotentialSpec::Quadratic(q) => {
                let entries: Vec<String> = q.matrix().iter().map(|v| v.to_string()).collect();
                write!(f, "potential=quadratic matrix={}", entries.join(","))
            }
        }
    }
}

/// Parses whitespace-, comma- or semicolon-separated numbers.
pub fn parse_number_list(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {s:?}"))))
        .collect()
}

/// Builds a quadratic spec from a square, row-major list of entries.
pub fn parse_row_major_matrix(text: &str) -> Result<QuadraticSpec> {
    let values = parse_number_list(text)?;
    let d = (values.len() as f64).sqrt().round() as usize;
    if d == 0 || d * d != values.len() {
        return Err(Error::Parse(format!("{} entries do not form a square matrix", values.len())));
    }
    QuadraticSpec::new(d, values)
}

impl PotentialSpec {
    /// Parses `key=value` pairs such as
    /// `potential=pathological a=0.02 eps=50`,
    /// `potential=quadratic lambda=1,4` or
    /// `potential=quadratic matrix=2,1,1,2`.
    ///
    /// Missing pathological parameters fall back to `a=0.02`, `eps=50`.
    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut kind = None;
        let mut a = 0.02;
        let mut eps = 50.0;
        let mut lambda = None;
        let mut matrix = None;
        for (key, value) in pairs {
            match key {
                "potential" => kind = Some(value.to_ascii_lowercase()),
                "a" => a = parse_scalar(key, value)?,
                "eps" | "epsilon" => eps = parse_scalar(key, value)?,
                "lambda" => lambda = Some(parse_number_list(value)?),
                "matrix" => matrix = Some(parse_row_major_matrix(value)?),
                _ => {}
            }
        }
        match kind.as_deref().unwrap_or("pathological") {
            "pathological" => PotentialSpec::pathological(a, eps),
            "radial" | "pure-radial" | "pureradial" => Ok(PotentialSpec::PureRadial),
            "quadratic" => match (matrix, lambda) {
                (Some(q), _) => Ok(PotentialSpec::Quadratic(q)),
                (None, Some(l)) => Ok(PotentialSpec::Quadratic(QuadraticSpec::diagonal(&l)?)),
                (None, None) => Err(Error::Parse("quadratic potential needs lambda= or matrix=".into())),
            },
            other => Err(Error::Parse(format!("unknown potential {other:?}"))),
        }
    }

    /// Parses a whitespace-separated `key=value` string.
    pub fn parse(text: &str) -> Result<Self> {
        let pairs = split_pairs(text)?;
        PotentialSpec::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }
}

/// Splits `k1=v1 k2=v2 ...` into pairs.
pub fn split_pairs(text: &str) -> Result<Vec<(String, String)>> {
    text.split_whitespace()
        .map(|tok| {
            tok.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {tok:?}")))
        })
        .collect()
}

fn parse_scalar(key: &str, value: &str) -> Result<f64> {
    value.parse::<f64>().map_err(|_| Error::Parse(format!("{key}: not a number: {value:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seam_constant_is_exp_minus_two() {
        assert_eq!(RADIAL_SEAM, (-2.0f64).exp());
    }

    #[test]
    fn e1_rejects_nonpositive() {
        assert!(exp_integral_e1(0.0).is_err());
        assert!(exp_integral_e1(-1.0).is_err());
        assert!(exp_integral_e1(f64::NAN).is_err());
    }

    #[test]
    fn e1_branches_meet_at_one() {
        let below = e1_series(1.0);
        let above = e1_continued_fraction(1.0);
        assert!((below - above).abs() < 1e-14, "{below} vs {above}");
    }

    #[test]
    fn e1_is_strictly_decreasing() {
        let mut prev = f64::INFINITY;
        for k in 1..400 {
            let r = 0.05 * k as f64;
            let v = exp_integral_e1(r).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(exp_integral_e1(1.0).unwrap() > exp_integral_e1(2.0).unwrap());
        assert!(exp_integral_e1(700.0).unwrap() < 1e-300);
    }

    #[test]
    fn radial_profile_edges() {
        assert_eq!(radial_value(0.0), 0.0);
        assert_eq!(radial_value(1e-301), 0.0);
        assert_eq!(radial_slope(0.0), 0.0);
        assert_eq!(radial_slope(RADIAL_SEAM), 0.5);
        let left = 1.0 / -(RADIAL_SEAM * (1.0 - 1e-15)).ln();
        assert!((left - 0.5).abs() < 1e-14);
        assert!((radial_value(RADIAL_SEAM) - radial_seam_value()).abs() < 1e-16);
    }

    #[test]
    fn radial_slope_at_one_percent() {
        let expected = 1.0 / -(0.01f64).ln();
        assert!((radial_slope(0.01) - expected).abs() < 1e-15);
        assert!((radial_slope(0.01) - 0.217_147_240_951_625_5).abs() < 1e-12);
    }

    #[test]
    fn radial_slope_matches_finite_difference() {
        for &r in &[1e-6, 1e-3, 0.01, 0.1, 0.2, 1.0] {
            let h = 1e-6 * r;
            let fd = (radial_value(r + h) - radial_value(r - h)) / (2.0 * h);
            assert!((fd - radial_slope(r)).abs() < 1e-7, "r={r}: {fd} vs {}", radial_slope(r));
        }
    }

    #[test]
    fn one_sided_quadratic_cases() {
        assert_eq!(one_sided_quadratic(0.02, 0.02), (0.0, 0.0));
        assert_eq!(one_sided_quadratic(-1.0, 0.02), (0.0, 0.0));
        let (v, s) = one_sided_quadratic(0.05, 0.02);
        assert!((v - 4.5e-4).abs() < 1e-18);
        assert!((s - 0.03).abs() < 1e-16);
    }

    #[test]
    fn seams_are_c1() {
        for &delta in &[1e-4, 1e-6, 1e-8] {
            let jump = (radial_slope(RADIAL_SEAM - delta) - radial_slope(RADIAL_SEAM + delta)).abs();
            assert!(jump < 10.0 * delta, "delta={delta}: jump={jump}");
            let a = 0.02;
            let psi_jump = (one_sided_quadratic(a + delta, a).1 - one_sided_quadratic(a - delta, a).1).abs();
            assert!(psi_jump <= delta * (1.0 + 1e-6));
        }
    }

    #[test]
    fn value_and_gradient_examples() {
        let spec = PotentialSpec::canonical();
        let x = [0.04, 0.02];
        let expected = radial_value(0.002f64.sqrt()) + 50.0 * 0.5 * 0.02 * 0.02;
        assert!((spec.value(&x).unwrap() - expected).abs() < 1e-16);
        assert_eq!(spec.value(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(spec.gradient(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);

        let g = spec.gradient(&[0.0, 0.01]).unwrap();
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 0.217_147_240_951_625_5).abs() < 1e-12);

        let g = spec.gradient(&x).unwrap();
        let r = 0.002f64.sqrt();
        let radial = radial_slope(r) / r;
        assert!((g[0] - (radial * 0.04 + 1.0)).abs() < 1e-14);
        assert!((g[1] - radial * 0.02).abs() < 1e-14);

        let q = PotentialSpec::Quadratic(QuadraticSpec::diagonal(&[1.0, 1.0]).unwrap());
        assert!((q.value(&[3.0, 4.0]).unwrap() - 12.5).abs() < 1e-14);
        assert!(spec.value(&[1.0, 2.0, 3.0]).is_err());
        assert!(q.gradient(&[1.0]).is_err());
    }

    #[test]
    fn parse_specs() {
        let p = PotentialSpec::parse("potential=pathological a=0.02 eps=50").unwrap();
        assert_eq!(p, PotentialSpec::canonical());
        let q = PotentialSpec::parse("potential=quadratic lambda=1,4").unwrap();
        match q {
            PotentialSpec::Quadratic(ref s) => assert_eq!(s.matrix(), &[1.0, 0.0, 0.0, 4.0]),
            _ => panic!("expected quadratic"),
        }
        let m = PotentialSpec::parse("potential=quadratic matrix=2,1,1,2").unwrap();
        assert_eq!(m.dim(), 2);
        assert!(PotentialSpec::parse("potential=quadratic").is_err());
        assert!(PotentialSpec::parse("potential=pathological a=-1").is_err());
        assert!(PotentialSpec::parse("potential=quadratic matrix=1,2,3").is_err());
        assert!(PotentialSpec::parse("garbage").is_err());
    }

    #[test]
    fn fused_evaluation_matches_separate_calls() {
        let specs = [PotentialSpec::canonical(), PotentialSpec::PureRadial];
        let points = [[0.04, 0.02], [1e-9, -3e-9], [0.3, -0.1], [0.0, 0.0], [-0.02, 0.0]];
        for spec in &specs {
            for x in &points {
                let mut g = [0.0; 2];
                let f = spec.value_gradient_into(x, &mut g);
                let g_ref = spec.gradient(x).unwrap();
                assert!((f - spec.value(x).unwrap()).abs() <= 1e-15 * f.abs().max(1e-300));
                for i in 0..2 {
                    assert!((g[i] - g_ref[i]).abs() <= 1e-14 * g_ref[i].abs().max(1e-300), "{spec} {x:?}");
                }
            }
        }
    }
}
