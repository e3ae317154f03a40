//! Rearrangement-invariant norms of weighted samples: decreasing
//! rearrangement, `L^p`, Lorentz `L^{p,q}` and `L^∞`, fundamental functions,
//! and the smallness table for bounded functions of small `L¹` norm.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A value with the measure it occupies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weighted {
    pub value: f64,
    pub weight: f64,
}

impl Weighted {
    pub fn new(value: f64, weight: f64) -> Self {
        Weighted { value, weight }
    }
}

/// Nonincreasing step function `f*` of `|f|`: step `k` has height
/// `values[k]` on `[ends[k−1], ends[k])`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rearrangement {
    values: Vec<f64>,
    ends: Vec<f64>,
}

impl Rearrangement {
    /// Sorts by decreasing `|value|`, ties by weight, and merges equal values.
    pub fn new(samples: &[Weighted]) -> Result<Self> {
        if let Some(s) = samples.iter().find(|s| !(s.weight >= 0.0) || !s.value.is_finite()) {
            return Err(Error::InvalidInput(format!("bad sample {s:?}")));
        }
        let mut sorted: Vec<(f64, f64)> =
            samples.iter().filter(|s| s.weight > 0.0).map(|s| (s.value.abs(), s.weight)).collect();
        sorted.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut widths: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut k = 0;
        while k < sorted.len() {
            let v = sorted[k].0;
            let mut j = k;
            let mut parts = Vec::new();
            while j < sorted.len() && sorted[j].0 == v {
                parts.push(sorted[j].1);
                j += 1;
            }
            values.push(v);
            widths.push(pairwise_sum(&parts));
            k = j;
        }
        let mut ends = Vec::with_capacity(widths.len());
        let mut acc = 0.0;
        for w in widths {
            acc += w;
            ends.push(acc);
        }
        Ok(Rearrangement { values, ends })
    }

    pub fn measure(&self) -> f64 {
        self.ends.last().copied().unwrap_or(0.0)
    }

    /// Step heights, nonincreasing.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Right ends of the steps.
    pub fn ends(&self) -> &[f64] {
        &self.ends
    }

    /// `f*(s)`, right-continuous; zero beyond the total measure.
    pub fn eval(&self, s: f64) -> f64 {
        let k = self.ends.partition_point(|&e| e <= s);
        self.values.get(k).copied().unwrap_or(0.0)
    }

    fn steps(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(k, &v)| (v, if k == 0 { 0.0 } else { self.ends[k - 1] }, self.ends[k]))
    }
}

/// Pairwise summation, for reproducible reductions.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

/// Supported rearrangement-invariant norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RINorm {
    Lp { p: f64 },
    Lorentz { p: f64, q: f64 },
    Linf,
}

impl RINorm {
    pub fn lp(p: f64) -> Result<Self> {
        let n = RINorm::Lp { p };
        n.validate()?;
        Ok(n)
    }

    pub fn lorentz(p: f64, q: f64) -> Result<Self> {
        let n = RINorm::Lorentz { p, q };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 1.0;
        match *self {
            RINorm::Lp { p } if !ok(p) => Err(Error::Parameter(format!("L^p needs 1 ≤ p < ∞, got {p}"))),
            RINorm::Lorentz { p, q } if !ok(p) || !ok(q) => {
                Err(Error::Parameter(format!("Lorentz L^{{p,q}} needs p, q ≥ 1, got ({p}, {q})")))
            }
            _ => Ok(()),
        }
    }

    /// Norm of the function with rearrangement `f`.
    pub fn of(&self, f: &Rearrangement) -> f64 {
        match *self {
            RINorm::Linf => f.values.first().copied().unwrap_or(0.0),
            RINorm::Lp { p } => {
                let terms: Vec<f64> = f.steps().map(|(v, a, b)| v.powf(p) * (b - a)).collect();
                pairwise_sum(&terms).powf(1.0 / p)
            }
            RINorm::Lorentz { p, q } => {
                let e = q / p;
                let terms: Vec<f64> = f.steps().map(|(v, a, b)| v.powf(q) * (b.powf(e) - a.powf(e))).collect();
                (p / q * pairwise_sum(&terms)).powf(1.0 / q)
            }
        }
    }

    /// Norm of weighted samples.
    pub fn norm(&self, samples: &[Weighted]) -> Result<f64> {
        self.validate()?;
        Ok(self.of(&Rearrangement::new(samples)?))
    }

    /// `φ_X(s)`, the norm of an indicator of a set of measure `s`.
    pub fn fundamental(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match *self {
            RINorm::Linf => 1.0,
            RINorm::Lp { p } => s.powf(1.0 / p),
            RINorm::Lorentz { p, q } => (p / q).powf(1.0 / q) * s.powf(1.0 / p),
        }
    }

    /// `true` when `φ_X(t) → 0` as `t → 0`.
    pub fn vanishing_fundamental(&self) -> bool {
        !matches!(self, RINorm::Linf)
    }
}

impl fmt::Display for RINorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RINorm::Lp { p } => write!(f, "lp:{p}"),
            RINorm::Lorentz { p, q } => write!(f, "lorentz:{p}:{q}"),
            RINorm::Linf => write!(f, "linf"),
        }
    }
}

/// Parses `lp:2`, `lorentz:2:1` or `linf`.
impl FromStr for RINorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad exponent `{t}` in `{s}`")));
        let n = match parts.as_slice() {
            ["linf"] => RINorm::Linf,
            ["lp", p] => RINorm::Lp { p: num(p)? },
            ["lorentz", p, q] => RINorm::Lorentz { p: num(p)?, q: num(q)? },
            _ => return Err(Error::Parse(format!("unknown norm `{s}`; expected lp:P, lorentz:P:Q or linf"))),
        };
        n.validate()?;
        Ok(n)
    }
}

/// Direct quadrature `(Σ wᵢ |vᵢ|^p)^{1/p}` in sample order.
pub fn lp_direct(samples: &[Weighted], p: f64) -> f64 {
    samples.iter().map(|s| s.weight * s.value.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// One row of the smallness table.
#[derive(Clone, Debug, Serialize)]
pub struct SmallnessRow {
    pub delta: f64,
    /// Measure of the support of `u = M·χ_S`.
    pub support: f64,
    /// `‖u‖_{L¹} / 𝓛(G)`.
    pub l1_ratio: f64,
    /// `‖u‖_X / 𝓛(G)` from the samples.
    pub ratio: f64,
    /// `M·φ_X(δ̃·𝓛(G)) / 𝓛(G)`.
    pub closed_form: f64,
}

/// For `u = M·χ_S` with `𝓛(S) = δ̃·𝓛(G)`, tabulates `‖u‖_X / 𝓛(G)` against
/// `δ̃`. Requires `φ_X → 0`.
pub fn smallness_check(norm: &RINorm, bound: f64, domain: f64, deltas: &[f64]) -> Result<Vec<SmallnessRow>> {
    norm.validate()?;
    if !norm.vanishing_fundamental() {
        return Err(Error::Parameter(format!("{norm} has a fundamental function that does not vanish at 0")));
    }
    deltas
        .iter()
        .map(|&d| {
            let support = d * domain;
            let samples = [Weighted::new(bound, support), Weighted::new(0.0, domain - support)];
            Ok(SmallnessRow {
                delta: d,
                support,
                l1_ratio: bound * support / domain,
                ratio: norm.norm(&samples)? / domain,
                closed_form: bound * norm.fundamental(support) / domain,
            })
        })
        .collect()
}

/// `true` when the ratios decrease strictly as `δ̃` decreases.
pub fn monotone_to_zero(rows: &[SmallnessRow]) -> bool {
    let mut sorted: Vec<&SmallnessRow> = rows.iter().collect();
    sorted.sort_by(|a, b| b.delta.partial_cmp(&a.delta).unwrap_or(Ordering::Equal));
    sorted.windows(2).all(|w| w[1].ratio < w[0].ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_of_three_values() {
        let s = [Weighted::new(3.0, 0.5), Weighted::new(1.0, 0.5), Weighted::new(2.0, 0.5)];
        let r = Rearrangement::new(&s).unwrap();
        assert_eq!(r.values(), &[3.0, 2.0, 1.0]);
        assert_eq!(r.ends(), &[0.5, 1.0, 1.5]);
        assert_eq!(r.eval(0.75), 2.0);
        assert_eq!(r.eval(2.0), 0.0);
    }

    #[test]
    fn constant_l2() {
        let n = RINorm::lp(2.0).unwrap().norm(&[Weighted::new(2.0, 3.0)]).unwrap();
        assert!((n - 2.0 * 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn parse_norms() {
        assert_eq!("lp:2".parse::<RINorm>().unwrap(), RINorm::Lp { p: 2.0 });
        assert_eq!("lorentz:2:1".parse::<RINorm>().unwrap(), RINorm::Lorentz { p: 2.0, q: 1.0 });
        assert!("lorentz:2:0.5".parse::<RINorm>().is_err());
        assert!("orlicz".parse::<RINorm>().is_err());
    }
}
