//! Butterworth band-pass design as second-order sections, applied forward and
//! backward for zero phase.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One biquad, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Section {
    fn response(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let num = self.b[0] + self.b[1] * zi + self.b[2] * zi * zi;
        let den = self.a[0] + self.a[1] * zi + self.a[2] * zi * zi;
        num / den
    }

    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Transposed direct-form II state for a unit step held forever.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[2] * g;
        [self.b[1] - self.a[1] * g + z2, z2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPass {
    pub sections: Vec<Section>,
    pub sample_rate: f64,
    pub low: f64,
    pub high: f64,
}

impl BandPass {
    /// Band-pass of total order `2 * prototype_order`, unit gain at the
    /// geometric band centre.
    pub fn butterworth(prototype_order: usize, low: f64, high: f64, sample_rate: f64) -> Result<Self> {
        let nyquist = sample_rate / 2.0;
        if prototype_order == 0 {
            return Err(Error::invalid("filter order must be positive"));
        }
        if !(low > 0.0 && low < high) {
            return Err(Error::invalid(format!("band [{low}, {high}] Hz is not a valid pass band")));
        }
        if high >= nyquist {
            return Err(Error::invalid(format!("band edge {high} Hz is at or above Nyquist ({nyquist} Hz)")));
        }
        let fs2 = 2.0 * sample_rate;
        let wl = fs2 * (PI * low / sample_rate).tan();
        let wh = fs2 * (PI * high / sample_rate).tan();
        let bw = wh - wl;
        let w0 = (wl * wh).sqrt();

        let n = prototype_order as f64;
        let mut poles = Vec::with_capacity(2 * prototype_order);
        for k in 0..prototype_order {
            let theta = PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n);
            let p = Complex64::from_polar(1.0, theta);
            let pb = p * bw;
            let disc = (pb * pb - 4.0 * w0 * w0).sqrt();
            for s in [(pb + disc) / 2.0, (pb - disc) / 2.0] {
                poles.push((fs2 + s) / (fs2 - s));
            }
        }
        let upper: Vec<Complex64> = poles.into_iter().filter(|p| p.im > 1e-12).collect();
        if upper.len() != prototype_order {
            return Err(Error::invalid("band too wide for a conjugate-pair section layout"));
        }
        let mut sections: Vec<Section> = upper
            .iter()
            .map(|p| Section {
                b: [1.0, 0.0, -1.0],
                a: [1.0, -2.0 * p.re, p.norm_sqr()],
            })
            .collect();
        let centre = 2.0 * (w0 / fs2).atan();
        let z = Complex64::from_polar(1.0, centre);
        let gain: f64 = sections.iter().map(|s| s.response(z).norm()).product();
        for b in sections[0].b.iter_mut() {
            *b /= gain;
        }
        Ok(Self {
            sections,
            sample_rate,
            low,
            high,
        })
    }

    pub fn magnitude(&self, freq: f64) -> f64 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * freq / self.sample_rate);
        self.sections.iter().map(|s| s.response(z).norm()).product()
    }

    fn run(&self, x: &mut [f64], initial: f64) {
        let mut scale = initial;
        for s in &self.sections {
            let st = s.step_state();
            let (mut z1, mut z2) = (st[0] * scale, st[1] * scale);
            for v in x.iter_mut() {
                let input = *v;
                let y = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[1] * y + z2;
                z2 = s.b[2] * input - s.a[2] * y;
                *v = y;
            }
            scale *= s.dc_gain();
        }
    }

    /// Zero-phase filtering with odd-reflection padding and steady-state
    /// initial conditions at both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        if x.is_empty() {
            return Vec::new();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(x.len() - 1);
        let n = x.len();
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let first = ext[0];
        self.run(&mut ext, first);
        ext.reverse();
        let first = ext[0];
        self.run(&mut ext, first);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}
