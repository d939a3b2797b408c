//! Digital Butterworth band-pass design (bilinear transform with
//! pre-warping) and zero-phase second-order-section filtering.

use nalgebra::Complex;

use super::PhysioError;

type C64 = Complex<f64>;

/// One biquad `b0 + b1 z^-1 + b2 z^-2 / 1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    /// `a[0]` is always 1.
    pub a: [f64; 3],
}

impl Biquad {
    /// Direct-form II transposed state that makes a constant input of 1
    /// produce a constant output from the first sample.
    pub fn steady_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        let (r0, r1) = (b1 - a1 * b0, b2 - a2 * b0);
        // [1 + a1, -1; a2, 1] z = r
        let det = (1.0 + a1) + a2;
        let z0 = (r0 + r1) / det;
        let z1 = r1 - a2 * z0;
        [z0, z1]
    }

    pub fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    pub fn response(&self, omega: f64) -> C64 {
        let z1 = C64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        (self.b[0] + z1 * self.b[1] + z2 * self.b[2]) / (1.0 + z1 * self.a[1] + z2 * self.a[2])
    }
}

/// Cascade of biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    /// Complex response at normalised angular frequency `omega` (rad/sample).
    pub fn response(&self, omega: f64) -> C64 {
        self.sections
            .iter()
            .fold(C64::new(1.0, 0.0), |acc, s| acc * s.response(omega))
    }

    /// Initial states for a unit step, section by section.
    pub fn steady_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let z = s.steady_state();
                let out = [z[0] * scale, z[1] * scale];
                scale *= s.dc_gain();
                out
            })
            .collect()
    }

    /// Causal filtering starting from `state` (scaled initial conditions).
    pub fn filter_with(&self, x: &[f64], state: &mut [[f64; 2]]) -> Vec<f64> {
        let mut y = x.to_vec();
        for (s, z) in self.sections.iter().zip(state.iter_mut()) {
            let [b0, b1, b2] = s.b;
            let [_, a1, a2] = s.a;
            for v in y.iter_mut() {
                let xi = *v;
                let yi = b0 * xi + z[0];
                z[0] = b1 * xi - a1 * yi + z[1];
                z[1] = b2 * xi - a2 * yi;
                *v = yi;
            }
        }
        y
    }

    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut zero = vec![[0.0; 2]; self.sections.len()];
        self.filter_with(x, &mut zero)
    }

    /// Samples of odd extension added at each end by `filtfilt`.
    pub fn pad_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }

    /// Forward-backward filtering with odd extension and steady-state
    /// initial conditions; the magnitude response is squared and the phase
    /// cancels.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>, PhysioError> {
        let pad = self.pad_len();
        if x.len() <= pad {
            return Err(PhysioError::TooShort {
                needed: pad + 1,
                got: x.len(),
            });
        }
        let n = x.len();
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.steady_state();
        let scaled = |v: f64| zi.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();
        let mut fwd = self.filter_with(&ext, &mut scaled(ext[0]));
        fwd.reverse();
        let mut back = self.filter_with(&fwd, &mut scaled(fwd[0]));
        back.reverse();
        Ok(back[pad..pad + n].to_vec())
    }
}

/// Order-`order` Butterworth band-pass between `low_hz` and `high_hz` for a
/// sample rate `fs`. The result has `order` sections.
pub fn butter_bandpass(
    order: usize,
    low_hz: f64,
    high_hz: f64,
    fs: f64,
) -> Result<Sos, PhysioError> {
    if order == 0 || !(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0) {
        return Err(PhysioError::InvalidParameter(format!(
            "band-pass needs 0 < low < high < fs/2 and order >= 1 (got order {order}, {low_hz}-{high_hz} Hz at {fs} Hz)"
        )));
    }
    let fs2 = 2.0 * fs;
    let w1 = fs2 * (std::f64::consts::PI * low_hz / fs).tan();
    let w2 = fs2 * (std::f64::consts::PI * high_hz / fs).tan();
    let bw = w2 - w1;
    let w0 = (w1 * w2).sqrt();

    // Analog low-pass prototype poles on the unit circle.
    let n = order as f64;
    let proto: Vec<C64> = (0..order)
        .map(|i| {
            let m = -(n - 1.0) + 2.0 * i as f64;
            -C64::from_polar(1.0, std::f64::consts::PI * m / (2.0 * n))
        })
        .collect();

    // Low-pass to band-pass: each pole splits into two.
    let mut poles = Vec::with_capacity(2 * order);
    for p in proto {
        let pl = p * (bw / 2.0);
        let root = (pl * pl - w0 * w0).sqrt();
        poles.push(pl + root);
        poles.push(pl - root);
    }
    let gain_analog = bw.powi(order as i32);

    // Bilinear transform. Zeros: `order` at s = 0 map to z = 1, the
    // `order` at infinity map to z = -1.
    let zpoles: Vec<C64> = poles.iter().map(|p| (fs2 + p) / (fs2 - p)).collect();
    let denom = poles
        .iter()
        .fold(C64::new(1.0, 0.0), |acc, p| acc * (fs2 - p));
    let num = fs2.powi(order as i32);
    let k = gain_analog * (C64::new(num, 0.0) / denom).re;

    let mut sections = pair_poles(&zpoles)
        .into_iter()
        .map(|(a1, a2)| Biquad {
            b: [1.0, 0.0, -1.0],
            a: [1.0, a1, a2],
        })
        .collect::<Vec<_>>();
    for v in sections[0].b.iter_mut() {
        *v *= k;
    }
    Ok(Sos { sections })
}

/// Groups poles into conjugate pairs (or pairs of real poles) and returns
/// each pair as `(a1, a2)` of `1 + a1 z^-1 + a2 z^-2`.
fn pair_poles(poles: &[C64]) -> Vec<(f64, f64)> {
    const TOL: f64 = 1e-10;
    let mut complex: Vec<C64> = poles.iter().copied().filter(|p| p.im > TOL).collect();
    let mut real: Vec<f64> = poles
        .iter()
        .filter(|p| p.im.abs() <= TOL)
        .map(|p| p.re)
        .collect();
    complex.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    real.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let mut out: Vec<(f64, f64)> = complex
        .iter()
        .map(|p| (-2.0 * p.re, p.norm_sqr()))
        .collect();
    for pair in real.chunks(2) {
        match pair {
            [p, q] => out.push((-(p + q), p * q)),
            [p] => out.push((-p, 0.0)),
            _ => unreachable!(),
        }
    }
    out
}

/// Magnitude of the analog Butterworth band-pass prototype at `omega`
/// rad/s: `1 / sqrt(1 + ((w^2 - w0^2) / (B w))^(2N))`.
pub fn analog_bandpass_magnitude(order: usize, w0: f64, bw: f64, omega: f64) -> f64 {
    let x = (omega * omega - w0 * w0) / (bw * omega);
    1.0 / (1.0 + x.powi(2 * order as i32)).sqrt()
}
