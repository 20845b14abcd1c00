//! Dormand–Prince 5(4) with the continuous extension of Hairer, Nørsett and
//! Wanner (the `dopri5` dense output of order 4).

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

/// Right-hand side `dy/dt = f(t, y)`, writing into `dy`.
pub trait Rhs {
    type Error;
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), Self::Error>;
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

/// An attempted step from `t0` to `t0 + h`.
#[derive(Debug, Clone)]
pub struct Step {
    pub t0: f64,
    pub h: f64,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    /// Derivative at the end point (first stage of the next step).
    pub f1: Vec<f64>,
    /// Weighted RMS error estimate; the step is acceptable when `≤ 1`.
    pub err: f64,
    rcont: [Vec<f64>; 5],
}

impl Step {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Dense output at time `t` in `[t0, t0 + h]`.
    pub fn at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.y0.len()];
        self.at_into(t, &mut out);
        out
    }

    pub fn at_into(&self, t: f64, out: &mut [f64]) {
        if t >= self.t1() {
            out.copy_from_slice(&self.y1);
            return;
        }
        if t <= self.t0 {
            out.copy_from_slice(&self.y0);
            return;
        }
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        for i in 0..out.len() {
            out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
        }
    }

    /// A single component of the dense output.
    pub fn component_at(&self, t: f64, i: usize) -> f64 {
        if t >= self.t1() {
            return self.y1[i];
        }
        if t <= self.t0 {
            return self.y0[i];
        }
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])))
    }
}

fn norm(v: &[f64], y0: &[f64], y1: &[f64], tol: Tolerances) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let s: f64 = v
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sk = tol.atol + tol.rtol * a.abs().max(b.abs());
            (e / sk).powi(2)
        })
        .sum();
    (s / v.len() as f64).sqrt()
}

/// One Dormand–Prince step of size `h` from `(t0, y0)` with `f0 = f(t0, y0)`.
pub fn step<F: Rhs>(
    f: &F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    h: f64,
    tol: Tolerances,
) -> Result<Step, F::Error> {
    let n = y0.len();
    let mut tmp = vec![0.0; n];
    let k1 = f0;
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];

    for i in 0..n {
        tmp[i] = y0[i] + h * A21 * k1[i];
    }
    f.eval(t0 + C2 * h, &tmp, &mut k2)?;
    for i in 0..n {
        tmp[i] = y0[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    f.eval(t0 + C3 * h, &tmp, &mut k3)?;
    for i in 0..n {
        tmp[i] = y0[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    f.eval(t0 + C4 * h, &tmp, &mut k4)?;
    for i in 0..n {
        tmp[i] = y0[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    f.eval(t0 + C5 * h, &tmp, &mut k5)?;
    for i in 0..n {
        tmp[i] = y0[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    f.eval(t0 + h, &tmp, &mut k6)?;
    let mut y1 = vec![0.0; n];
    for i in 0..n {
        y1[i] = y0[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
    }
    f.eval(t0 + h, &y1, &mut k7)?;

    let mut e = vec![0.0; n];
    for i in 0..n {
        e[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    let err = norm(&e, y0, &y1, tol);

    let mut r1 = vec![0.0; n];
    let mut r2 = vec![0.0; n];
    let mut r3 = vec![0.0; n];
    let mut r4 = vec![0.0; n];
    let mut r5 = vec![0.0; n];
    for i in 0..n {
        let dy = y1[i] - y0[i];
        let bspl = h * k1[i] - dy;
        r1[i] = y0[i];
        r2[i] = dy;
        r3[i] = bspl;
        r4[i] = dy - h * k7[i] - bspl;
        r5[i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    Ok(Step {
        t0,
        h,
        y0: y0.to_vec(),
        y1,
        f1: k7,
        err,
        rcont: [r1, r2, r3, r4, r5],
    })
}

/// Starting step size heuristic (Hairer, Nørsett and Wanner, II.4).
pub fn initial_step<F: Rhs>(
    f: &F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    tol: Tolerances,
    h_max: f64,
) -> Result<f64, F::Error> {
    let n = y0.len();
    if n == 0 {
        return Ok(h_max.min(1.0));
    }
    let d0 = norm(y0, y0, y0, tol);
    let d1 = norm(f0, y0, y0, tol);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(h_max);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, d)| y + h0 * d).collect();
    let mut f1 = vec![0.0; n];
    f.eval(t0 + h0, &y1, &mut f1)?;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff, y0, y0, tol) / h0;
    let m = d1.max(d2);
    let h1 = if m <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / m).powf(1.0 / 5.0)
    };
    Ok((100.0 * h0).min(h1).min(h_max))
}

/// Step-size factor after a step with error `err`.
pub fn next_factor(err: f64) -> f64 {
    if err == 0.0 {
        return 5.0;
    }
    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
}
