//! Rate-distortion curves and BSQ-rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SIMPSON_INTERVALS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RDPoint {
    pub bitrate_kbps: f64,
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RDCurve {
    pub label: String,
    pub points: Vec<RDPoint>,
}

impl RDCurve {
    pub fn new(label: impl Into<String>, points: &[(f64, f64)]) -> Result<RDCurve> {
        let curve = RDCurve {
            label: label.into(),
            points: points
                .iter()
                .map(|&(bitrate_kbps, quality)| RDPoint { bitrate_kbps, quality })
                .collect(),
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| Error::InvalidCurve {
            label: self.label.clone(),
            message,
        };
        if self.points.len() < 2 {
            return Err(bad(format!("{} point(s), need at least 2", self.points.len())));
        }
        for p in &self.points {
            if !(p.bitrate_kbps > 0.0) || !p.bitrate_kbps.is_finite() || !p.quality.is_finite() {
                return Err(bad(format!("bad point ({}, {})", p.bitrate_kbps, p.quality)));
            }
        }
        let mut rates: Vec<f64> = self.points.iter().map(|p| p.bitrate_kbps).collect();
        rates.sort_by(f64::total_cmp);
        if rates.windows(2).any(|w| w[0] == w[1]) {
            return Err(bad("duplicate bitrate".into()));
        }
        Ok(())
    }

    /// Points sorted by bitrate with quality replaced by its running maximum.
    pub fn monotone(&self) -> Vec<RDPoint> {
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| a.bitrate_kbps.total_cmp(&b.bitrate_kbps));
        let mut best = f64::NEG_INFINITY;
        for p in &mut pts {
            best = best.max(p.quality);
            p.quality = best;
        }
        pts
    }

    /// Scale every bitrate by `c`.
    pub fn scaled(&self, c: f64) -> RDCurve {
        RDCurve {
            label: self.label.clone(),
            points: self
                .points
                .iter()
                .map(|p| RDPoint {
                    bitrate_kbps: p.bitrate_kbps * c,
                    quality: p.quality,
                })
                .collect(),
        }
    }
}

/// log2(bitrate) as a piecewise-linear function of quality.
#[derive(Debug, Clone)]
struct RateOfQuality {
    q: Vec<f64>,
    log_rate: Vec<f64>,
}

impl RateOfQuality {
    fn from_curve(curve: &RDCurve) -> RateOfQuality {
        let mut q: Vec<f64> = Vec::new();
        let mut log_rate = Vec::new();
        // on a flat run keep the cheapest bitrate
        for p in curve.monotone() {
            if q.last() != Some(&p.quality) {
                q.push(p.quality);
                log_rate.push(p.bitrate_kbps.log2());
            }
        }
        RateOfQuality { q, log_rate }
    }

    fn lo(&self) -> f64 {
        self.q[0]
    }

    fn hi(&self) -> f64 {
        self.q[self.q.len() - 1]
    }

    fn rate(&self, quality: f64) -> f64 {
        let k = self.q.partition_point(|&x| x < quality);
        let l = if k == 0 {
            self.log_rate[0]
        } else if k == self.q.len() {
            self.log_rate[k - 1]
        } else if self.q[k] == quality {
            self.log_rate[k]
        } else {
            let t = (quality - self.q[k - 1]) / (self.q[k] - self.q[k - 1]);
            self.log_rate[k - 1] + t * (self.log_rate[k] - self.log_rate[k - 1])
        };
        l.exp2()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsqResult {
    pub test: String,
    pub reference: String,
    pub bsq_rate: f64,
    pub q_lo: f64,
    pub q_hi: f64,
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

/// Composite Simpson over [a, b] with about `total` intervals, split at `knots`
/// so no panel straddles a kink of the integrand.
fn simpson_piecewise(f: &dyn Fn(f64) -> f64, a: f64, b: f64, knots: &[f64], total: usize) -> f64 {
    let mut cuts = vec![a];
    cuts.extend(knots.iter().copied().filter(|&k| k > a && k < b));
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let len = b - a;
    cuts.windows(2)
        .map(|w| {
            let share = ((w[1] - w[0]) / len * total as f64).round() as usize;
            simpson(f, w[0], w[1], share.max(2))
        })
        .sum()
}

/// Ratio of the mean bitrate `test` needs to that of `reference` over their
/// common quality range. Below 1 means `test` saves bitrate.
pub fn bsq_rate(test: &RDCurve, reference: &RDCurve) -> Result<BsqResult> {
    test.validate()?;
    reference.validate()?;
    let t = RateOfQuality::from_curve(test);
    let r = RateOfQuality::from_curve(reference);
    let q_lo = t.lo().max(r.lo());
    let q_hi = t.hi().min(r.hi());
    if q_lo > q_hi {
        return Err(Error::NoCommonQualityRange {
            test: test.label.clone(),
            reference: reference.label.clone(),
        });
    }
    let ratio = if q_lo == q_hi {
        log::warn!("`{}` vs `{}`: quality ranges touch at a single point", test.label, reference.label);
        t.rate(q_lo) / r.rate(q_lo)
    } else {
        let mut knots: Vec<f64> = t.q.iter().chain(&r.q).copied().collect();
        knots.sort_by(f64::total_cmp);
        let num = simpson_piecewise(&|q| t.rate(q), q_lo, q_hi, &knots, SIMPSON_INTERVALS);
        let den = simpson_piecewise(&|q| r.rate(q), q_lo, q_hi, &knots, SIMPSON_INTERVALS);
        num / den
    };
    Ok(BsqResult {
        test: test.label.clone(),
        reference: reference.label.clone(),
        bsq_rate: ratio,
        q_lo,
        q_hi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    #[default]
    Arithmetic,
    Geometric,
}

/// Average of per-clip BSQ-rates.
pub fn average_bsq(values: &[f64], mode: Averaging) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData("no BSQ-rates to average".into()));
    }
    if values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("BSQ-rates must be positive and finite".into()));
    }
    let n = values.len() as f64;
    Ok(match mode {
        Averaging::Arithmetic => values.iter().sum::<f64>() / n,
        Averaging::Geometric => (values.iter().map(|v| v.ln()).sum::<f64>() / n).exp(),
    })
}
