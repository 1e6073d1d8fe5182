//! Generator functions on [0, 1].
//!
//! A [`ConvexGenerator`] is a strictly convex `h` with `h(0) = 0`; it drives the
//! two-sample and k-sample functionals. A [`LogConvexGenerator`] is a positive
//! `ξ` with strictly convex logarithm, carried together with its
//! antiderivative `Ξ(u) = ∫₀ᵘ ξ` and the constant `∫₀¹ ξ²`.
//!
//! Builders compute the integration constants in closed form where one is
//! available and fall back to adaptive quadrature otherwise. Generators built
//! through the `*_unchecked` constructors are flagged: the equality
//! characterization of the resulting statistic is not guaranteed and reports
//! say so.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{Quadrature, GENERATOR_QUADRATURE};

type UnitFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Default probe grid: spacing 1/128.
pub const DEFAULT_GRID: usize = 128;

/// Absolute slack for the strict midpoint tests, scaled by the magnitude of the
/// generator on the grid.
pub const CONVEXITY_TOLERANCE: f64 = 1e-12;

/// Allowed disagreement between a stored integral and quadrature of `eval`.
pub const INTEGRAL_TOLERANCE: f64 = 1e-10;

const VALIDATION_QUADRATURE: Quadrature = Quadrature {
    abs_tol: 1e-11,
    max_evals: 2_000_000,
};

/// Strictly convex `h` on [0, 1] with `h(0) = 0`.
#[derive(Clone)]
pub struct ConvexGenerator {
    name: String,
    eval: UnitFn,
    integral_0_1: f64,
    guaranteed: bool,
}

impl fmt::Debug for ConvexGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexGenerator")
            .field("name", &self.name)
            .field("integral_0_1", &self.integral_0_1)
            .field("guaranteed", &self.guaranteed)
            .finish()
    }
}

impl ConvexGenerator {
    fn build(name: String, eval: UnitFn, integral_0_1: f64, guaranteed: bool) -> Self {
        ConvexGenerator {
            name,
            eval,
            integral_0_1,
            guaranteed,
        }
    }

    /// Wraps a user function, computing `∫₀¹ h` by quadrature and rejecting it
    /// unless it passes [`validate_generator`] at the default grid.
    pub fn from_fn<F>(name: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let mut g = Self::from_fn_unchecked(name, f)?;
        let report = g.validate(DEFAULT_GRID)?;
        if let Some(v) = report.violation {
            return Err(Error::NotStrictlyConvex(format!("{}: {}", g.name, v)));
        }
        g.guaranteed = true;
        Ok(g)
    }

    /// Wraps a user function without validation. The integral is still
    /// computed by quadrature.
    pub fn from_fn_unchecked<F>(name: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let integral = GENERATOR_QUADRATURE.integrate(&f, 0.0, 1.0)?.value;
        Ok(Self::build(name.into(), Arc::new(f), integral, false))
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        (self.eval)(u)
    }

    pub fn integral_0_1(&self) -> f64 {
        self.integral_0_1
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// False for generators that bypassed validation.
    pub fn characterization_guaranteed(&self) -> bool {
        self.guaranteed
    }

    /// `-h`, a strictly concave generator. Inequalities built on it hold with
    /// the opposite sign.
    pub fn negated(&self) -> ConvexGenerator {
        let inner = Arc::clone(&self.eval);
        Self::build(
            format!("neg:{}", self.name),
            Arc::new(move |u| -inner(u)),
            -self.integral_0_1,
            false,
        )
    }

    pub fn validate(&self, grid_size: usize) -> Result<ValidationReport> {
        let points = probe_grid(grid_size)?;
        let mut report = ValidationReport::new(&self.name, grid_size);

        let values: Vec<f64> = points.iter().map(|&u| self.eval(u)).collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Ok(report.fail(Violation::new(Check::Finite, points[i], None, values[i])));
        }
        report.checks += 1;

        let at_zero = values[0];
        if at_zero.abs() > CONVEXITY_TOLERANCE {
            return Ok(report.fail(Violation::new(Check::ZeroAtOrigin, 0.0, None, at_zero)));
        }
        report.checks += 1;

        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let slack = CONVEXITY_TOLERANCE * scale;
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let mid = self.eval(0.5 * (points[i] + points[j]));
                let chord = 0.5 * (values[i] + values[j]);
                let margin = chord - mid;
                if !(margin > slack) {
                    return Ok(report.fail(Violation::new(
                        Check::StrictMidpointConvexity,
                        points[i],
                        Some(points[j]),
                        margin,
                    )));
                }
            }
        }
        report.checks += 1;

        let quad = VALIDATION_QUADRATURE.integrate(|u| self.eval(u), 0.0, 1.0)?;
        let diff = (quad.value - self.integral_0_1).abs();
        if diff > INTEGRAL_TOLERANCE {
            return Ok(report.fail(Violation::new(Check::IntegralConsistency, 1.0, None, diff)));
        }
        report.checks += 1;
        Ok(report)
    }
}

/// `h(u) = u^m`, `m ≥ 2`.
pub fn power_generator(m: u32) -> Result<ConvexGenerator> {
    if m < 2 {
        return Err(Error::param(format!(
            "power generator needs m >= 2 (u^{m} is not strictly convex)"
        )));
    }
    let exp = m as i32;
    Ok(ConvexGenerator::build(
        format!("power:{m}"),
        Arc::new(move |u: f64| u.powi(exp)),
        1.0 / (m as f64 + 1.0),
        true,
    ))
}

/// `h(u) = Σ_k c_k u^k` for `coeffs = [c_1, …, c_m]`.
///
/// All coefficients must be non-negative and at least one coefficient of
/// degree two or higher must be positive.
pub fn polynomial_generator(coeffs: &[f64]) -> Result<ConvexGenerator> {
    if coeffs.is_empty() {
        return Err(Error::param("polynomial generator needs at least one coefficient"));
    }
    if let Some((k, c)) = coeffs
        .iter()
        .enumerate()
        .find(|(_, c)| !c.is_finite() || **c < 0.0)
    {
        return Err(Error::param(format!(
            "polynomial coefficient c_{} = {c} must be finite and non-negative",
            k + 1
        )));
    }
    if !coeffs.iter().skip(1).any(|&c| c > 0.0) {
        return Err(Error::NotStrictlyConvex(format!(
            "polynomial {coeffs:?} has no positive coefficient of degree >= 2"
        )));
    }
    let integral = coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c / (k as f64 + 2.0))
        .sum();
    let name = format!(
        "poly:{}",
        coeffs
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    let c: Vec<f64> = coeffs.to_vec();
    let eval = move |u: f64| u * c.iter().rev().fold(0.0, |acc, &ck| acc * u + ck);
    Ok(ConvexGenerator::build(name, Arc::new(eval), integral, true))
}

/// Degree-`m` Bernstein polynomial of `h` with the `k = 0` term dropped:
/// `B_m(u) = Σ_{k=1}^{m} h(k/m) C(m,k) u^k (1-u)^(m-k)`.
pub fn bernstein_generator(h: &ConvexGenerator, m: u32) -> Result<ConvexGenerator> {
    if m < 2 {
        return Err(Error::param(format!("bernstein generator needs m >= 2, got {m}")));
    }
    let m_us = m as usize;
    let mut nodes = Vec::with_capacity(m_us + 1);
    nodes.push(0.0);
    for k in 1..=m_us {
        let v = h.eval(k as f64 / m as f64);
        if !v.is_finite() || v < 0.0 {
            return Err(Error::param(format!(
                "bernstein generator needs a non-negative inner function, but {}({k}/{m}) = {v}",
                h.name()
            )));
        }
        nodes.push(v);
    }
    // ∫₀¹ C(m,k) u^k (1-u)^(m-k) du = 1/(m+1) for every k.
    let integral = nodes.iter().sum::<f64>() / (m as f64 + 1.0);
    let eval = move |u: f64| de_casteljau(&nodes, u);
    Ok(ConvexGenerator::build(
        format!("bernstein:{}:{m}", h.name()),
        Arc::new(eval),
        integral,
        h.characterization_guaranteed(),
    ))
}

fn de_casteljau(coeffs: &[f64], u: f64) -> f64 {
    let mut b = coeffs.to_vec();
    let v = 1.0 - u;
    for level in 1..b.len() {
        for i in 0..b.len() - level {
            b[i] = v * b[i] + u * b[i + 1];
        }
    }
    b[0]
}

/// Positive `ξ` on [0, 1] with strictly convex `log ξ`.
#[derive(Clone)]
pub struct LogConvexGenerator {
    name: String,
    eval: UnitFn,
    antiderivative: UnitFn,
    integral_sq_0_1: f64,
    guaranteed: bool,
}

impl fmt::Debug for LogConvexGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LogConvexGenerator")
            .field("name", &self.name)
            .field("integral_sq_0_1", &self.integral_sq_0_1)
            .field("guaranteed", &self.guaranteed)
            .finish()
    }
}

impl LogConvexGenerator {
    /// Wraps a user `ξ`, validating it at the default grid. `Ξ` and `∫₀¹ ξ²`
    /// come from quadrature.
    pub fn from_fn<F>(name: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let mut g = Self::from_fn_unchecked(name, f)?;
        let report = g.validate(DEFAULT_GRID)?;
        if let Some(v) = report.violation {
            return Err(Error::NotStrictlyConvex(format!("{}: {}", g.name, v)));
        }
        g.guaranteed = true;
        Ok(g)
    }

    pub fn from_fn_unchecked<F>(name: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::quadrature_backed(name.into(), Arc::new(f), false)
    }

    fn quadrature_backed(name: String, eval: UnitFn, guaranteed: bool) -> Result<Self> {
        let sq = {
            let eval = Arc::clone(&eval);
            GENERATOR_QUADRATURE.integrate(move |u| eval(u) * eval(u), 0.0, 1.0)?
        };
        // Ξ(1) is the widest antiderivative query; if it converges every
        // sub-interval query does too.
        GENERATOR_QUADRATURE.integrate(|u| eval(u), 0.0, 1.0)?;
        let integrand = Arc::clone(&eval);
        let antiderivative = move |u: f64| {
            GENERATOR_QUADRATURE
                .integrate(|v| integrand(v), 0.0, u)
                .map(|r| r.value)
                .unwrap_or(f64::NAN)
        };
        Ok(LogConvexGenerator {
            name,
            eval,
            antiderivative: Arc::new(antiderivative),
            integral_sq_0_1: sq.value,
            guaranteed,
        })
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        (self.eval)(u)
    }

    /// `Ξ(u) = ∫₀ᵘ ξ(v) dv`.
    pub fn antiderivative(&self, u: f64) -> f64 {
        (self.antiderivative)(u)
    }

    pub fn integral_sq_0_1(&self) -> f64 {
        self.integral_sq_0_1
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn characterization_guaranteed(&self) -> bool {
        self.guaranteed
    }

    pub fn validate(&self, grid_size: usize) -> Result<ValidationReport> {
        let points = probe_grid(grid_size)?;
        let mut report = ValidationReport::new(&self.name, grid_size);

        let values: Vec<f64> = points.iter().map(|&u| self.eval(u)).collect();
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Ok(report.fail(Violation::new(Check::Positive, points[i], None, values[i])));
        }
        report.checks += 1;

        let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let scale = logs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let slack = CONVEXITY_TOLERANCE * scale;
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let mid = self.eval(0.5 * (points[i] + points[j])).ln();
                let margin = 0.5 * (logs[i] + logs[j]) - mid;
                if !(margin > slack) {
                    return Ok(report.fail(Violation::new(
                        Check::StrictMidpointLogConvexity,
                        points[i],
                        Some(points[j]),
                        margin,
                    )));
                }
            }
        }
        report.checks += 1;

        let at_zero = self.antiderivative(0.0);
        if at_zero.abs() > CONVEXITY_TOLERANCE {
            return Ok(report.fail(Violation::new(Check::ZeroAtOrigin, 0.0, None, at_zero)));
        }
        let mut previous = at_zero;
        for &u in &points[1..] {
            let stored = self.antiderivative(u);
            if !(stored >= previous) {
                return Ok(report.fail(Violation::new(
                    Check::AntiderivativeMonotone,
                    u,
                    None,
                    stored - previous,
                )));
            }
            let quad = VALIDATION_QUADRATURE.integrate(|v| self.eval(v), 0.0, u)?;
            let diff = (quad.value - stored).abs();
            if diff > INTEGRAL_TOLERANCE {
                return Ok(report.fail(Violation::new(Check::IntegralConsistency, u, None, diff)));
            }
            previous = stored;
        }
        report.checks += 1;

        let quad = VALIDATION_QUADRATURE.integrate(|v| self.eval(v).powi(2), 0.0, 1.0)?;
        let diff = (quad.value - self.integral_sq_0_1).abs();
        if diff > INTEGRAL_TOLERANCE {
            return Ok(report.fail(Violation::new(Check::IntegralConsistency, 1.0, None, diff)));
        }
        report.checks += 1;
        Ok(report)
    }
}

/// `ξ(u) = exp(α u²)`, `α > 0`.
pub fn exp_sq_generator(alpha: f64) -> Result<LogConvexGenerator> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::param(format!(
            "expsq generator needs a finite alpha > 0, got {alpha}"
        )));
    }
    let eval = move |u: f64| (alpha * u * u).exp();
    let g = LogConvexGenerator::quadrature_backed(format!("expsq:{alpha}"), Arc::new(eval), true)?;
    if !g.integral_sq_0_1.is_finite() {
        return Err(Error::param(format!("expsq:{alpha} overflows on [0, 1]")));
    }
    Ok(g)
}

fn probe_grid(grid_size: usize) -> Result<Vec<f64>> {
    if grid_size < 3 {
        return Err(Error::param(format!("validation grid needs at least 3 cells, got {grid_size}")));
    }
    Ok((0..=grid_size).map(|i| i as f64 / grid_size as f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Finite,
    Positive,
    ZeroAtOrigin,
    StrictMidpointConvexity,
    StrictMidpointLogConvexity,
    AntiderivativeMonotone,
    IntegralConsistency,
}

/// First failed probe of a validation run. `value` is the offending quantity:
/// the function value, the convexity margin, or the integral discrepancy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub check: Check,
    pub u: f64,
    pub v: Option<f64>,
    pub value: f64,
}

impl Violation {
    fn new(check: Check, u: f64, v: Option<f64>, value: f64) -> Self {
        Violation { check, u, v, value }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.v {
            Some(v) => write!(f, "{:?} violated at ({}, {}): {:e}", self.check, self.u, v, self.value),
            None => write!(f, "{:?} violated at {}: {:e}", self.check, self.u, self.value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub generator: String,
    pub grid_size: usize,
    /// Number of checks that passed before the first violation.
    pub checks: usize,
    pub violation: Option<Violation>,
}

impl ValidationReport {
    fn new(name: &str, grid_size: usize) -> Self {
        ValidationReport {
            generator: name.to_string(),
            grid_size,
            checks: 0,
            violation: None,
        }
    }

    fn fail(mut self, violation: Violation) -> Self {
        self.violation = Some(violation);
        self
    }

    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// Either generator family, as produced by [`parse_generator`].
#[derive(Debug, Clone)]
pub enum AnyGenerator {
    Convex(ConvexGenerator),
    LogConvex(LogConvexGenerator),
}

impl AnyGenerator {
    pub fn name(&self) -> &str {
        match self {
            AnyGenerator::Convex(g) => g.name(),
            AnyGenerator::LogConvex(g) => g.name(),
        }
    }

    pub fn into_convex(self) -> Result<ConvexGenerator> {
        match self {
            AnyGenerator::Convex(g) => Ok(g),
            AnyGenerator::LogConvex(g) => Err(Error::config(
                g.name().to_string(),
                "expected a convex generator (power, poly, bernstein)",
            )),
        }
    }

    pub fn into_log_convex(self) -> Result<LogConvexGenerator> {
        match self {
            AnyGenerator::LogConvex(g) => Ok(g),
            AnyGenerator::Convex(g) => Err(Error::config(
                g.name().to_string(),
                "expected a log-convex generator (expsq)",
            )),
        }
    }
}

/// Runs the generator invariants on a probe grid with spacing `1/grid_size`.
pub fn validate_generator(g: &AnyGenerator, grid_size: usize) -> Result<ValidationReport> {
    match g {
        AnyGenerator::Convex(g) => g.validate(grid_size),
        AnyGenerator::LogConvex(g) => g.validate(grid_size),
    }
}

/// Parses `power:m`, `poly:c1,...,cm`, `bernstein:<inner>:m` or `expsq:alpha`.
pub fn parse_generator(spec: &str) -> Result<AnyGenerator> {
    let spec = spec.trim();
    let (head, rest) = spec
        .split_once(':')
        .ok_or_else(|| Error::config(spec, "generator spec must look like `family:parameters`"))?;
    match head {
        "power" => {
            let m = rest
                .parse::<u32>()
                .map_err(|_| Error::config(rest, "power exponent must be an integer"))?;
            power_generator(m).map(AnyGenerator::Convex)
        }
        "poly" => {
            let coeffs = rest
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::config(tok, "polynomial coefficient must be a real number"))
                })
                .collect::<Result<Vec<_>>>()?;
            polynomial_generator(&coeffs).map(AnyGenerator::Convex)
        }
        "bernstein" => {
            let (inner, m) = rest
                .rsplit_once(':')
                .ok_or_else(|| Error::config(rest, "bernstein spec must look like `bernstein:<inner>:m`"))?;
            let m = m
                .parse::<u32>()
                .map_err(|_| Error::config(m, "bernstein degree must be an integer"))?;
            let inner = parse_generator(inner)?.into_convex()?;
            bernstein_generator(&inner, m).map(AnyGenerator::Convex)
        }
        "expsq" => {
            let alpha = rest
                .parse::<f64>()
                .map_err(|_| Error::config(rest, "expsq alpha must be a real number"))?;
            exp_sq_generator(alpha).map(AnyGenerator::LogConvex)
        }
        _ => Err(Error::config(head, "unknown generator family")),
    }
}
