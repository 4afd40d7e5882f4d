//! Dormand-Prince 5(4) with PI step control for complex matrix states.

use crate::error::{Error, Result};
use crate::linalg::CMat;

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-12, atol: 1e-14, max_steps: 2_000_000 }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights are the last row of A; E = b5 - b4
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates y' = f(t, y) from t0 to t1 (either direction).
pub fn dopri5<F>(mut f: F, t0: f64, t1: f64, y0: CMat, opts: &OdeOptions) -> Result<(CMat, OdeStats)>
where
    F: FnMut(f64, &CMat) -> CMat,
{
    let mut stats = OdeStats::default();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((y0, stats));
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    stats.evals += 1;

    // initial step from the usual derivative-scale heuristic
    let scale = |y: &CMat| y.iter().map(|z| opts.atol + opts.rtol * z.norm()).collect::<Vec<_>>();
    let rms = |m: &CMat, sc: &[f64]| {
        let s: f64 = m.iter().zip(sc).map(|(z, s)| (z.norm() / s).powi(2)).sum();
        (s / sc.len() as f64).sqrt()
    };
    let sc0 = scale(&y);
    let d0 = rms(&y, &sc0);
    let d1 = rms(&k1, &sc0);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(span.abs());

    let mut err_prev: f64 = 1e-4;
    let mut k = vec![k1.clone(); 7];
    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::StiffnessFailure(format!(
                "step budget {} exhausted at t = {t} of [{t0}, {t1}]",
                opts.max_steps
            )));
        }
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        let hs = if last { remaining } else { h } * dir;
        if hs.abs() <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StiffnessFailure(format!("step size underflow at t = {t}")));
        }
        k[0] = k1.clone();
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate().take(s) {
                if A[s][j] != 0.0 {
                    ys += kj * crate::C64::new(hs * A[s][j], 0.0);
                }
            }
            k[s] = f(t + C[s] * hs, &ys);
            stats.evals += 1;
        }
        let mut y_new = y.clone();
        for (j, kj) in k.iter().enumerate().take(6) {
            if A[6][j] != 0.0 {
                y_new += kj * crate::C64::new(hs * A[6][j], 0.0);
            }
        }
        let mut err = CMat::zeros(y.nrows(), y.ncols());
        for (j, kj) in k.iter().enumerate() {
            if E[j] != 0.0 {
                err += kj * crate::C64::new(hs * E[j], 0.0);
            }
        }
        let sc: Vec<f64> = y
            .iter()
            .zip(y_new.iter())
            .map(|(a, b)| opts.atol + opts.rtol * a.norm().max(b.norm()))
            .collect();
        let en = rms(&err, &sc);
        if !en.is_finite() {
            return Err(Error::StiffnessFailure(format!("non-finite state near t = {t}")));
        }
        if en <= 1.0 {
            t = if last { t1 } else { t + hs };
            y = y_new;
            k1 = k[6].clone();
            stats.accepted += 1;
            if last {
                return Ok((y, stats));
            }
            let fac = 0.9 * en.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            h = hs.abs() * fac.clamp(0.2, 5.0);
            err_prev = en.max(1e-4);
        } else {
            stats.rejected += 1;
            h = hs.abs() * (0.9 * en.powf(-0.2)).max(0.2);
        }
    }
}
