//! Period-1 sampled functions.
//!
//! Waveforms and sensitivity curves are all functions of a dimensionless
//! phase with period 1. They are stored as `m` uniform samples at phases
//! `k/m` and evaluated by linear interpolation that wraps across the seam
//! between the last and the first sample.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSignal {
    samples: Vec<f64>,
}

/// Result of the best circular alignment of one signal onto another.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// Delay (in phase) applied to the second signal.
    pub shift: f64,
    /// Scalar applied to the shifted second signal (1 when scaling is off).
    pub scale: f64,
    /// Root-mean-square residual after alignment.
    pub rmse: f64,
}

impl PeriodicSignal {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Config(format!(
                "periodic signal needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if let Some(k) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("sample {k} is not finite")));
        }
        Ok(Self { samples })
    }

    /// Samples `f` at phases `k / resolution`.
    pub fn from_fn(resolution: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let m = resolution as f64;
        Self::new((0..resolution).map(|k| f(k as f64 / m)).collect())
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn resolution(&self) -> usize {
        self.samples.len()
    }

    /// Phase of sample `k`.
    pub fn phase_of(&self, k: usize) -> f64 {
        k as f64 / self.samples.len() as f64
    }

    /// Checked evaluation; rejects non-finite phases.
    pub fn eval(&self, phase: f64) -> Result<f64> {
        if !phase.is_finite() {
            return Err(Error::Domain(format!("cannot evaluate at phase {phase}")));
        }
        Ok(self.at(phase))
    }

    /// Unchecked evaluation for inner loops. Returns NaN for non-finite input.
    #[inline]
    pub fn at(&self, phase: f64) -> f64 {
        if !phase.is_finite() {
            return f64::NAN;
        }
        let m = self.samples.len();
        let x = phase * m as f64;
        // floor through an integer cast; the libm call is slow on baseline x86-64
        let mut xi = x as i64;
        if (xi as f64) > x {
            xi -= 1;
        }
        let frac = x - xi as f64;
        let k = xi.rem_euclid(m as i64) as usize;
        let next = if k + 1 == m { 0 } else { k + 1 };
        // k/m * m is not always exactly k in floating point
        let tol = 8.0 * f64::EPSILON * x.abs().max(1.0);
        if frac <= tol {
            return self.samples[k];
        }
        if 1.0 - frac <= tol {
            return self.samples[next];
        }
        self.samples[k] + frac * (self.samples[next] - self.samples[k])
    }

    pub fn resample(&self, resolution: usize) -> Result<Self> {
        if resolution == self.resolution() {
            return Ok(self.clone());
        }
        Self::from_fn(resolution, |p| self.at(p))
    }

    /// The signal delayed by `delay`: `out(p) = self(p - delay)`.
    pub fn delayed(&self, delay: f64) -> Self {
        let m = self.resolution() as f64;
        Self {
            samples: (0..self.resolution())
                .map(|k| self.at(k as f64 / m - delay))
                .collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|v| v * factor).collect(),
        }
    }

    /// Largest absolute sample.
    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Largest absolute pointwise difference, after resampling `other`
    /// onto this signal's grid.
    pub fn max_abs_diff(&self, other: &PeriodicSignal) -> f64 {
        (0..self.resolution())
            .map(|k| (self.samples[k] - other.at(self.phase_of(k))).abs())
            .fold(0.0, f64::max)
    }

    /// Finds the circular delay of `other` minimising the RMS difference to
    /// `self`, optionally with a least-squares scalar fit. Integer delays on
    /// the common (finer) grid are scanned first, then the best one is refined
    /// to a fractional delay by golden-section search with `other` linearly
    /// interpolated.
    pub fn align(&self, other: &PeriodicSignal, allow_scale: bool) -> Alignment {
        let m = self.resolution().max(other.resolution());
        let a = self.resample(m).expect("resolution >= 2");
        let b = other.resample(m).expect("resolution >= 2");
        let (a, bs) = (a.samples(), b.samples());
        let aa: f64 = a.iter().map(|x| x * x).sum();
        let mf = m as f64;

        let fit = |ab: f64, bb: f64, shift: f64| {
            let (scale, sse) = if allow_scale && bb > 0.0 {
                let c = ab / bb;
                (c, (aa - c * ab).max(0.0))
            } else {
                (1.0, (aa - 2.0 * ab + bb).max(0.0))
            };
            Alignment {
                shift: shift.rem_euclid(1.0),
                scale,
                rmse: (sse / mf).sqrt(),
            }
        };

        let bb: f64 = bs.iter().map(|x| x * x).sum();
        let mut best = fit(0.0, bb, 0.0);
        best.rmse = f64::INFINITY;
        let mut best_s = 0;
        for s in 0..m {
            // b delayed by s samples: b[(k - s) mod m]
            let mut ab = 0.0;
            for k in 0..m {
                ab += a[k] * bs[(k + m - s) % m];
            }
            let cand = fit(ab, bb, s as f64 / mf);
            if cand.rmse < best.rmse {
                best = cand;
                best_s = s;
            }
        }

        let at_delay = |d: f64| {
            let (mut ab, mut bb) = (0.0, 0.0);
            for (k, ak) in a.iter().enumerate() {
                let v = b.at((k as f64 - d) / mf);
                ab += ak * v;
                bb += v * v;
            }
            fit(ab, bb, d / mf)
        };
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut lo, mut hi) = (best_s as f64 - 1.0, best_s as f64 + 1.0);
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let (mut f1, mut f2) = (at_delay(x1), at_delay(x2));
        for _ in 0..40 {
            if f1.rmse < f2.rmse {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = at_delay(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = at_delay(x2);
            }
        }
        for cand in [f1, f2] {
            if cand.rmse < best.rmse {
                best = cand;
            }
        }
        best
    }

    /// Writes `phase,value` rows, phases ascending from 0.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv_writer(writer);
        w.write_record(["phase", "value"])?;
        for (k, v) in self.samples.iter().enumerate() {
            w.write_record([self.phase_of(k).to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "phase" || &headers[1] != "value" {
            return Err(Error::format(
                "header",
                format!("expected `phase,value`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            ));
        }
        let mut phases = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            phases.push(parse_field(&rec, 0, "phase", row)?);
            values.push(parse_field(&rec, 1, "value", row)?);
        }
        let m = values.len() as f64;
        for (k, p) in phases.iter().enumerate() {
            if (p - k as f64 / m).abs() > 1e-9 {
                return Err(Error::format(
                    "phase",
                    format!("row {k}: phase {p} is not on the uniform grid k/{m}"),
                ));
            }
        }
        Self::new(values).map_err(|e| Error::format("value", e.to_string()))
    }
}

pub(crate) fn csv_writer<W: Write>(writer: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer)
}

pub(crate) fn parse_field(rec: &csv::StringRecord, idx: usize, name: &str, row: usize) -> Result<f64> {
    let raw = rec
        .get(idx)
        .ok_or_else(|| Error::format(name, format!("row {row}: missing column")))?;
    raw.trim()
        .parse::<f64>()
        .map_err(|_| Error::format(name, format!("row {row}: `{raw}` is not a number")))
}
