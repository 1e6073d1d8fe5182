//! Samples, empirical CDFs and the plug-in Stieltjes integrals built on them.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{ConvexGenerator, LogConvexGenerator};

/// A finite, non-empty sample of finite reals with a sorted copy.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    label: String,
    values: Vec<f64>,
    sorted: Vec<f64>,
}

impl Sample {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if values.is_empty() {
            return Err(Error::InvalidInput(format!("sample `{label}` is empty")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sample `{label}` has non-finite value {} at index {i}",
                values[i]
            )));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(Sample {
            label,
            values,
            sorted,
        })
    }

    /// Reads one real per line. Blank lines and `#` comments are skipped;
    /// commas and whitespace are both accepted as separators, but each line
    /// must hold a single value.
    pub fn from_reader<R: BufRead>(label: impl Into<String>, reader: R) -> Result<Self> {
        let label = label.into();
        let mut values = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(format!("reading {label}"), e))?;
            let content = line.split('#').next().unwrap_or("");
            let mut tokens = content
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty());
            let Some(token) = tokens.next() else { continue };
            let ingest = |token: &str, message: &str| Error::Ingest {
                source_name: label.clone(),
                line: idx + 1,
                token: token.to_string(),
                message: message.to_string(),
            };
            if let Some(extra) = tokens.next() {
                return Err(ingest(extra, "expected a single column"));
            }
            let v: f64 = token
                .parse()
                .map_err(|_| ingest(token, "cannot parse as a real number"))?;
            if !v.is_finite() {
                return Err(ingest(token, "value is not finite"));
            }
            values.push(v);
        }
        Sample::new(label, values)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        Sample::from_reader(path.display().to_string(), std::io::BufReader::new(file))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ecdf(&self, convention: CdfConvention) -> EmpiricalCdf<'_> {
        EmpiricalCdf {
            source: self,
            convention,
        }
    }

    /// Applies `f` to every observation. Strictly increasing maps preserve
    /// every statistic in this crate bit for bit.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Sample> {
        Sample::new(self.label.clone(), self.values.iter().map(|&v| f(v)).collect())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CdfConvention {
    /// `F_n(x) = #{X_i ≤ x} / n`.
    #[default]
    RightContinuous,
    /// `(F_n(x⁻) + F_n(x)) / 2`.
    Mid,
}

impl std::str::FromStr for CdfConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "right-continuous" | "right" => Ok(CdfConvention::RightContinuous),
            "mid" => Ok(CdfConvention::Mid),
            other => Err(Error::config(other, "CDF convention must be `right-continuous` or `mid`")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EmpiricalCdf<'a> {
    source: &'a Sample,
    convention: CdfConvention,
}

impl<'a> EmpiricalCdf<'a> {
    pub fn new(source: &'a Sample, convention: CdfConvention) -> Self {
        EmpiricalCdf { source, convention }
    }

    pub fn sample(&self) -> &'a Sample {
        self.source
    }

    pub fn convention(&self) -> CdfConvention {
        self.convention
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    /// Step-function value at a finite `x`; callers guarantee finiteness.
    #[inline]
    fn value_at(&self, x: f64) -> f64 {
        let sorted = &self.source.sorted;
        let at_or_below = sorted.partition_point(|&v| v <= x);
        match self.convention {
            CdfConvention::RightContinuous => at_or_below as f64 / sorted.len() as f64,
            CdfConvention::Mid => {
                let below = sorted[..at_or_below].partition_point(|&v| v < x);
                (below + at_or_below) as f64 / (2 * sorted.len()) as f64
            }
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::InvalidInput(format!("cannot evaluate an ECDF at {x}")));
        }
        Ok(self.value_at(x))
    }
}

/// `∫ h(F_n) dG_m = (1/m) Σ_j h(F_n(Y_j))`, with `Y` the sample behind `g`.
///
/// The sum runs over `Y` in sorted order, so the result depends only on the
/// relative ranks of the two samples.
pub fn integral_h_f_dg(h: &ConvexGenerator, f: &EmpiricalCdf<'_>, g: &EmpiricalCdf<'_>) -> f64 {
    let ys = g.sample().sorted();
    let total: f64 = ys.iter().map(|&y| h.eval(f.value_at(y))).sum();
    total / ys.len() as f64
}

/// `∫ ξ(G_m) dΞ(F_n)`.
///
/// `Ξ∘F_n` jumps by `Ξ((i+r-1)/n) - Ξ((i-1)/n)` at a value of `F`'s sample
/// that occupies ranks `i..i+r-1`; the integrand is `ξ(G_m)` at that value.
pub fn integral_xi_dxi(xi: &LogConvexGenerator, g: &EmpiricalCdf<'_>, f: &EmpiricalCdf<'_>) -> f64 {
    let xs = f.sample().sorted();
    let n = xs.len() as f64;
    let mut total = 0.0;
    let mut lower = xi.antiderivative(0.0);
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut end = i + 1;
        while end < xs.len() && xs[end] == x {
            end += 1;
        }
        let upper = xi.antiderivative(end as f64 / n);
        total += xi.eval(g.value_at(x)) * (upper - lower);
        lower = upper;
        i = end;
    }
    total
}

/// Number of distinct values that occur in more than one sample.
pub fn cross_sample_ties(samples: &[&Sample]) -> usize {
    let mut tagged: Vec<(f64, usize)> = samples
        .iter()
        .enumerate()
        .flat_map(|(j, s)| s.sorted().iter().map(move |&v| (v, j)))
        .collect();
    tagged.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut ties = 0;
    let mut i = 0;
    while i < tagged.len() {
        let mut end = i + 1;
        let mut owners = 1;
        while end < tagged.len() && tagged[end].0 == tagged[i].0 {
            if tagged[end].1 != tagged[end - 1].1 {
                owners += 1;
            }
            end += 1;
        }
        if owners > 1 {
            ties += 1;
        }
        i = end;
    }
    ties
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{exp_sq_generator, power_generator};

    fn s(v: &[f64]) -> Sample {
        Sample::new("s", v.to_vec()).unwrap()
    }

    #[test]
    fn right_continuous_eval() {
        let x = s(&[1.0, 3.0]);
        let f = x.ecdf(CdfConvention::RightContinuous);
        assert_eq!(f.eval(2.0).unwrap(), 0.5);
        assert_eq!(f.eval(3.0).unwrap(), 1.0);
        assert_eq!(f.eval(0.5).unwrap(), 0.0);
        assert_eq!(f.eval(1.0).unwrap(), 0.5);
        assert!(f.eval(f64::NAN).is_err());
        assert!(f.eval(f64::INFINITY).is_err());
    }

    #[test]
    fn mid_eval_with_ties() {
        let x = s(&[1.0, 2.0, 2.0, 5.0]);
        let f = x.ecdf(CdfConvention::Mid);
        assert_eq!(f.eval(2.0).unwrap(), 0.5);
        assert_eq!(f.eval(1.5).unwrap(), 0.25);
        assert_eq!(f.eval(5.0).unwrap(), 0.875);
    }

    #[test]
    fn sample_rejects_bad_values() {
        assert!(Sample::new("e", vec![]).is_err());
        assert!(Sample::new("n", vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn h_integral_worked_values() {
        let h = power_generator(2).unwrap();
        let x = s(&[1.0, 3.0]);
        let y = s(&[2.0, 4.0]);
        let rc = CdfConvention::RightContinuous;
        assert_eq!(integral_h_f_dg(&h, &x.ecdf(rc), &y.ecdf(rc)), 5.0 / 8.0);
        assert_eq!(integral_h_f_dg(&h, &y.ecdf(rc), &x.ecdf(rc)), 1.0 / 8.0);
    }

    #[test]
    fn self_integral_is_order_statistic_average() {
        let h = power_generator(3).unwrap();
        let x = s(&[0.3, -1.0, 7.5, 2.0, 0.0]);
        let f = x.ecdf(CdfConvention::RightContinuous);
        let n = 5.0;
        let expected: f64 = (1..=5).map(|i| h.eval(i as f64 / n)).sum::<f64>() / n;
        assert_eq!(integral_h_f_dg(&h, &f, &f), expected);
    }

    #[test]
    fn xi_integral_single_point() {
        let xi = exp_sq_generator(1.0).unwrap();
        let x = s(&[0.0]);
        let rc = CdfConvention::RightContinuous;
        let v = integral_xi_dxi(&xi, &x.ecdf(rc), &x.ecdf(rc));
        assert!((v - xi.eval(1.0) * xi.antiderivative(1.0)).abs() < 1e-15);
    }

    #[test]
    fn xi_integral_handles_ties_in_integrator() {
        let xi = exp_sq_generator(1.0).unwrap();
        let x = s(&[1.0, 2.0, 2.0, 3.0]);
        let y = s(&[2.5]);
        let rc = CdfConvention::RightContinuous;
        let v = integral_xi_dxi(&xi, &y.ecdf(rc), &x.ecdf(rc));
        let big = |u: f64| xi.antiderivative(u);
        // ranks 2..3 share the value 2.0 and jump together
        let expected = big(0.25) + (big(0.75) - big(0.25)) + xi.eval(1.0) * (big(1.0) - big(0.75));
        assert!((v - expected).abs() < 1e-14);
    }

    #[test]
    fn reader_parses_and_reports_lines() {
        let text = "# header\n1.5\n\n  2e-1 # trailing\n3,\n";
        let x = Sample::from_reader("mem", text.as_bytes()).unwrap();
        assert_eq!(x.values(), &[1.5, 0.2, 3.0]);

        let err = Sample::from_reader("mem", "1\nabc\n".as_bytes()).unwrap_err();
        match err {
            Error::Ingest { line, token, .. } => {
                assert_eq!(line, 2);
                assert_eq!(token, "abc");
            }
            e => panic!("unexpected {e:?}"),
        }
        let err = Sample::from_reader("mem", "1 2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Ingest { line: 1, .. }));
        let err = Sample::from_reader("mem", "inf\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Ingest { line: 1, .. }));
        assert!(matches!(
            Sample::from_reader("mem", "# nothing\n".as_bytes()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn tie_counting() {
        let a = s(&[1.0, 2.0, 2.0, 3.0]);
        let b = s(&[2.0, 4.0]);
        let c = s(&[3.0, 4.0, 5.0]);
        assert_eq!(cross_sample_ties(&[&a, &b]), 1);
        assert_eq!(cross_sample_ties(&[&a, &b, &c]), 3);
        assert_eq!(cross_sample_ties(&[&a]), 0);
    }
}
