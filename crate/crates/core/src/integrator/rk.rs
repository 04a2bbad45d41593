//! Dormand–Prince 5(4) with PI step-size control and the native
//! fourth-order continuous extension.

use crate::error::FailureKind;

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub initial_step: Option<f64>,
    pub max_steps: u64,
}

/// Steps shorter than this fraction of `|t|` are treated as underflow.
const MIN_RELATIVE_STEP: f64 = 1e-14;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const ALPHA: f64 = 0.2 - 0.75 * BETA;

/// Nominal order of the propagated solution.
pub const NOMINAL_ORDER: f64 = 5.0;

/// Integration state for one accepted-step-at-a-time loop.
pub struct Dopri5<'s, S: OdeSystem> {
    sys: &'s S,
    ctl: StepControl,
    t: f64,
    y: Vec<f64>,
    h: f64,
    err_old: f64,
    rejected_last: bool,
    steps: u64,
    k: [Vec<f64>; 7],
    scratch: Vec<f64>,
    y_new: Vec<f64>,
    // continuous extension of the last accepted step
    t_old: f64,
    h_old: f64,
    cont: [Vec<f64>; 5],
}

/// Outcome of `Dopri5::step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accepted {
    pub t_old: f64,
    pub t_new: f64,
}

impl<'s, S: OdeSystem> Dopri5<'s, S> {
    pub fn new(sys: &'s S, t0: f64, y0: &[f64], ctl: StepControl) -> Self {
        let n = sys.dim();
        assert_eq!(y0.len(), n, "state length must match the system dimension");
        let zeros = || vec![0.0; n];
        let mut me = Dopri5 {
            sys,
            ctl,
            t: t0,
            y: y0.to_vec(),
            h: 0.0,
            err_old: 1e-4,
            rejected_last: false,
            steps: 0,
            k: [zeros(), zeros(), zeros(), zeros(), zeros(), zeros(), zeros()],
            scratch: zeros(),
            y_new: zeros(),
            t_old: t0,
            h_old: 0.0,
            cont: [y0.to_vec(), zeros(), zeros(), zeros(), zeros()],
        };
        sys.rhs(t0, y0, &mut me.k[0]);
        me.h = match ctl.initial_step {
            Some(h) => h,
            None => me.initial_step_guess(),
        }
        .min(ctl.max_step);
        me
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Derivative at the current point (first stage of the next step).
    pub fn derivative(&self) -> &[f64] {
        &self.k[0]
    }

    fn scale(&self, a: f64) -> f64 {
        self.ctl.abs_tol + self.ctl.rel_tol * a.abs()
    }

    // Hairer–Nørsett–Wanner starting step heuristic.
    fn initial_step_guess(&mut self) -> f64 {
        let n = self.y.len();
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..n {
            let sc = self.scale(self.y[i]);
            d0 += (self.y[i] / sc).powi(2);
            d1 += (self.k[0][i] / sc).powi(2);
        }
        let d0 = (d0 / n as f64).sqrt();
        let d1 = (d1 / n as f64).sqrt();
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(self.ctl.max_step);
        for i in 0..n {
            self.scratch[i] = self.y[i] + h0 * self.k[0][i];
        }
        let (head, tail) = self.k.split_at_mut(1);
        self.sys.rhs(self.t + h0, &self.scratch, &mut tail[0]);
        let mut d2 = 0.0;
        for i in 0..n {
            let sc = self.ctl.abs_tol + self.ctl.rel_tol * self.y[i].abs();
            d2 += ((tail[0][i] - head[0][i]) / sc).powi(2);
        }
        let d2 = (d2 / n as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / NOMINAL_ORDER)
        };
        // a component sitting at zero (e.g. ṙ at a pericentre) can drive the
        // guess below the underflow floor; the controller can grow it back
        (100.0 * h0).min(h1).max(MIN_RELATIVE_STEP * 1e3 * self.t.abs())
    }

    /// Advances by one accepted step without passing `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<Accepted, FailureKind> {
        let n = self.y.len();
        loop {
            if self.steps >= self.ctl.max_steps {
                return Err(FailureKind::HorizonNotReached { t: self.t });
            }
            let remaining = t_limit - self.t;
            let mut h = self.h.min(self.ctl.max_step);
            let clipped = h >= remaining;
            if clipped {
                h = remaining;
            }
            if !(h > MIN_RELATIVE_STEP * self.t.abs().max(1e-300)) && !clipped {
                return Err(FailureKind::StepUnderflow { t: self.t, h });
            }
            let t = self.t;
            let y = &self.y[..n];
            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            // equal-length reslices let the loops below drop their bounds checks
            let (k1, k2, k3, k4, k5, k6, k7) = (&mut k1[..n], &mut k2[..n], &mut k3[..n], &mut k4[..n], &mut k5[..n], &mut k6[..n], &mut k7[..n]);
            let s = &mut self.scratch[..n];

            for i in 0..n {
                s[i] = y[i] + h * A21 * k1[i];
            }
            self.sys.rhs(t + C2 * h, s, k2);
            for i in 0..n {
                s[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            self.sys.rhs(t + C3 * h, s, k3);
            for i in 0..n {
                s[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            self.sys.rhs(t + C4 * h, s, k4);
            for i in 0..n {
                s[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            self.sys.rhs(t + C5 * h, s, k5);
            for i in 0..n {
                s[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            let t_new = if clipped { t_limit } else { t + h };
            self.sys.rhs(t_new, s, k6);
            let yn = &mut self.y_new[..n];
            for i in 0..n {
                yn[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            self.sys.rhs(t_new, yn, k7);

            let mut err = 0.0;
            for i in 0..n {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.ctl.abs_tol + self.ctl.rel_tol * y[i].abs().max(yn[i].abs());
                err += (e / sc) * (e / sc);
            }
            let err = (err / n as f64).sqrt();
            if !err.is_finite() || yn.iter().any(|v| !v.is_finite()) {
                if h <= 1e-14 * t.abs().max(1e-300) {
                    return Err(FailureKind::NonFinite { t });
                }
                self.h = h * FAC_MIN;
                self.rejected_last = true;
                continue;
            }

            if err <= 1.0 {
                let err_c = err.max(1e-10);
                let mut fac = err_c.powf(ALPHA) / self.err_old.powf(BETA);
                fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut h_next = h / fac;
                if self.rejected_last {
                    h_next = h_next.min(h);
                }
                self.err_old = err_c;
                self.rejected_last = false;

                // continuous extension coefficients
                let [c0, c1, c2, c3, c4] = &mut self.cont;
                let (c0, c1, c2, c3, c4) = (&mut c0[..n], &mut c1[..n], &mut c2[..n], &mut c3[..n], &mut c4[..n]);
                for i in 0..n {
                    let ydiff = yn[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    c0[i] = y[i];
                    c1[i] = ydiff;
                    c2[i] = bspl;
                    c3[i] = ydiff - h * k7[i] - bspl;
                    c4[i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                self.t_old = t;
                self.h_old = t_new - t;
                std::mem::swap(&mut self.y, &mut self.y_new);
                self.k.swap(0, 6);
                self.t = t_new;
                self.steps += 1;
                // a step shortened to land on t_limit says nothing about the next size
                self.h = if clipped { self.h.max(h_next) } else { h_next };
                return Ok(Accepted { t_old: t, t_new });
            }
            let fac = (SAFETY * err.powf(-1.0 / NOMINAL_ORDER)).max(FAC_MIN);
            self.h = h * fac;
            self.rejected_last = true;
        }
    }

    /// Evaluates the continuous extension of the last accepted step at `t`.
    pub fn dense(&self, t: f64, out: &mut [f64]) {
        if self.h_old == 0.0 {
            out.copy_from_slice(&self.y);
            return;
        }
        let theta = (t - self.t_old) / self.h_old;
        let theta1 = 1.0 - theta;
        let [c0, c1, c2, c3, c4] = &self.cont;
        for i in 0..out.len() {
            out[i] = c0[i] + theta * (c1[i] + theta1 * (c2[i] + theta * (c3[i] + theta1 * c4[i])));
        }
    }

    /// Replaces the state in place (e.g. after an event) and resets the history.
    pub fn reset(&mut self, t: f64, y: &[f64]) {
        self.t = t;
        self.y.copy_from_slice(y);
        self.sys.rhs(t, y, &mut self.k[0]);
        self.h_old = 0.0;
        self.cont[0].copy_from_slice(y);
    }
}

/// Finds a root of `g` in `[lo, hi]` given `g(lo)` and `g(hi)` of opposite
/// sign (Illinois false position with a bisection fallback).
pub fn locate_root<G: FnMut(f64) -> f64>(mut g: G, mut lo: f64, mut hi: f64, mut g_lo: f64, mut g_hi: f64) -> f64 {
    let mut side = 0i8;
    for _ in 0..200 {
        if (hi - lo).abs() <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
        let mut mid = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
        if !mid.is_finite() || mid <= lo.min(hi) || mid >= lo.max(hi) {
            mid = 0.5 * (lo + hi);
        }
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return mid;
        }
        if (g_mid > 0.0) == (g_hi > 0.0) {
            hi = mid;
            g_hi = g_mid;
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        } else {
            lo = mid;
            g_lo = g_mid;
            if side == -1 {
                g_hi *= 0.5;
            }
            side = -1;
        }
    }
    if g_lo.abs() < g_hi.abs() {
        lo
    } else {
        hi
    }
}
