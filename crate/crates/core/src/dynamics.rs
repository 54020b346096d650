//! Time evolution: the four-mode transfer model, the full single-excitation
//! Λ scheme on both arrays, memory release, and the retarded equations.

use serde::{Deserialize, Serialize};

use crate::analytics::{Branch, TransferParams};
use crate::hamiltonian::EffectiveHamiltonian;
use crate::linalg;
use crate::{c64, Error, Result};

const I: c64 = c64 { re: 0.0, im: 1.0 };
const ZERO: c64 = c64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12 }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct IntegrationStats {
    pub steps: usize,
    pub rejected: usize,
    /// Largest relative growth of ‖y‖² over one accepted step.
    pub max_norm_increase: f64,
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn norm_sqr(y: &[c64]) -> f64 {
    y.iter().map(|c| c.norm_sqr()).sum()
}

/// Adaptive Dormand–Prince integration of ẏ = f(t, y) from `t0`, returning
/// the state at each of the ascending `samples`.
pub fn integrate_ode<F>(
    f: F,
    y0: &[c64],
    t0: f64,
    samples: &[f64],
    tol: Tolerance,
) -> Result<(Vec<Vec<c64>>, IntegrationStats)>
where
    F: Fn(f64, &[c64], &mut [c64]),
{
    let n = y0.len();
    if samples.windows(2).any(|w| w[1] < w[0]) || samples.first().is_some_and(|&s| s < t0) {
        return Err(Error::invalid("sample times must be ascending and not before t0"));
    }
    let mut stats = IntegrationStats::default();
    let mut out = Vec::with_capacity(samples.len());
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k = vec![vec![ZERO; n]; 7];
    let mut stage = vec![ZERO; n];
    let mut y_new = vec![ZERO; n];
    f(t, &y, &mut k[0]);
    let span = samples.last().map_or(0.0, |&s| s - t0);
    let mut h = (span * 1e-3).max(1e-6);
    let mut norm_now = norm_sqr(&y);

    for &target in samples {
        while t < target {
            let last = target - t <= h * (1.0 + 1e-12);
            let step = if last { target - t } else { h };
            if step < 1e-14 * t.abs().max(1.0) {
                return Err(Error::NotConverged(format!("step size underflow at t = {t}")));
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = ZERO;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        if A[s][j] != 0.0 {
                            acc += kj[i] * A[s][j];
                        }
                    }
                    stage[i] = y[i] + acc * step;
                }
                let (head, tail) = k.split_at_mut(s);
                let _ = head;
                f(t + C[s] * step, &stage, &mut tail[0]);
                if s == 6 {
                    y_new.copy_from_slice(&stage);
                }
            }
            let mut err = 0.0;
            for i in 0..n {
                let mut e = ZERO;
                for (j, kj) in k.iter().enumerate() {
                    if E[j] != 0.0 {
                        e += kj[i] * E[j];
                    }
                }
                let scale = tol.atol + tol.rtol * y[i].norm().max(y_new[i].norm());
                err += (e.norm() * step / scale).powi(2);
            }
            let err = (err / n.max(1) as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::NotConverged(format!("non-finite state at t = {t}")));
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                let fsal = k.pop().unwrap();
                k.insert(0, fsal);
                let norm_next = norm_sqr(&y);
                if norm_now > 0.0 {
                    stats.max_norm_increase =
                        stats.max_norm_increase.max((norm_next - norm_now) / norm_now);
                }
                norm_now = norm_next;
                stats.steps += 1;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || grow < 1.0 {
                    h = step * grow;
                }
            } else {
                stats.rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
            if stats.steps + stats.rejected > 50_000_000 {
                return Err(Error::NotConverged("step budget exhausted".into()));
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

/// Time traces of a transfer run, sampled on a uniform grid.
#[derive(Clone, Debug, Default)]
pub struct TransferTrajectory {
    pub times: Vec<f64>,
    pub pop_s1: Vec<f64>,
    pub pop_s2: Vec<f64>,
    pub pop_e: Vec<f64>,
    pub c1: Vec<c64>,
    pub c2: Vec<c64>,
    pub cb: Vec<c64>,
    pub cd: Vec<c64>,
    /// max_t |c₂(t)|².
    pub fidelity: f64,
    pub t_at_max: f64,
    pub stats: IntegrationStats,
}

impl TransferTrajectory {
    fn finish(mut self) -> Self {
        let pop: Vec<f64> = self.c2.iter().map(|c| c.norm_sqr()).collect();
        let (t, f) = refine_peak(&self.times, &pop);
        self.fidelity = f.clamp(0.0, 1.0);
        self.t_at_max = t;
        self
    }
}

/// Location and value of the maximum of sampled data, refined by a
/// parabola through the largest sample and its neighbours.
pub fn refine_peak(times: &[f64], values: &[f64]) -> (f64, f64) {
    let Some(k) = (0..values.len()).max_by(|&a, &b| values[a].total_cmp(&values[b])) else {
        return (f64::NAN, f64::NAN);
    };
    if k == 0 || k + 1 == values.len() {
        return (times[k], values[k]);
    }
    let (y0, y1, y2) = (values[k - 1], values[k], values[k + 1]);
    let h = times[k + 1] - times[k];
    let curv = y0 - 2.0 * y1 + y2;
    if curv >= 0.0 {
        return (times[k], y1);
    }
    let x = 0.5 * (y0 - y2) / curv;
    (times[k] + x * h, y1 - 0.25 * (y0 - y2) * x)
}

pub fn uniform_grid(t_end: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
}

/// Integrates the four-mode model (c₁, c₂, c_b, c_d); starts from c₁ = 1
/// unless `init` is given.
pub fn integrate_four_mode(
    params: &TransferParams,
    t_end: f64,
    samples: usize,
    init: Option<[c64; 4]>,
) -> Result<TransferTrajectory> {
    params.validate()?;
    if !(t_end > 0.0) {
        return Err(Error::invalid("t_end must be positive"));
    }
    let (gd, gb) = (params.gamma_d, params.gamma_b);
    let w = params.omega / std::f64::consts::SQRT_2;
    let rhs = move |_t: f64, y: &[c64], dy: &mut [c64]| {
        dy[0] = -I * w * (y[2] + y[3]);
        dy[1] = -I * w * (y[2] - y[3]);
        dy[2] = -0.5 * gb * y[2] - I * w * (y[0] + y[1]);
        dy[3] = -0.5 * gd * y[3] - I * w * (y[0] - y[1]);
    };
    let y0 = init.unwrap_or([c64::from(1.0), ZERO, ZERO, ZERO]);
    let times = uniform_grid(t_end, samples);
    let (states, stats) = integrate_ode(rhs, &y0, 0.0, &times, Tolerance::default())?;
    Ok(four_mode_trajectory(times, &states, stats))
}

fn four_mode_trajectory(times: Vec<f64>, states: &[Vec<c64>], stats: IntegrationStats) -> TransferTrajectory {
    let col = |i: usize| states.iter().map(|s| s[i]).collect::<Vec<c64>>();
    TransferTrajectory {
        pop_s1: states.iter().map(|s| s[0].norm_sqr()).collect(),
        pop_s2: states.iter().map(|s| s[1].norm_sqr()).collect(),
        pop_e: states.iter().map(|s| s[2].norm_sqr() + s[3].norm_sqr()).collect(),
        c1: col(0),
        c2: col(1),
        cb: col(2),
        cd: col(3),
        times,
        stats,
        ..Default::default()
    }
    .finish()
}

/// Setup of a full-array run: the s manifold of each array is coupled to e
/// by a uniform drive Ω, in a frame rotating at ω₀ + `frame_shift`.
#[derive(Clone, Debug)]
pub struct FullTransferConfig<'a> {
    pub hamiltonian: &'a EffectiveHamiltonian,
    /// Dark eigenvector over all 2N sites.
    pub dark: &'a [c64],
    /// +1 or −1.
    pub dark_parity: i8,
    pub frame_shift: f64,
    pub omega: f64,
    /// Whether the drive acts on array 1 and on array 2.
    pub drive: [bool; 2],
    pub t_end: f64,
    pub samples: usize,
}

/// Integrates ė = −i(H − Δ)e − iΩDs, ṡ = −iΩDe from s = v on array 1,
/// recording projections onto S₁, S₂ and the dark/bright pair built from v.
pub fn simulate_transfer_full(cfg: &FullTransferConfig<'_>) -> Result<TransferTrajectory> {
    let h = cfg.hamiltonian;
    let n = h.dim();
    if cfg.dark.len() != n || n % 2 != 0 {
        return Err(Error::invalid("dark mode missing or of the wrong length"));
    }
    if !(cfg.t_end > 0.0) || !(cfg.omega >= 0.0) {
        return Err(Error::invalid("need t_end > 0 and Ω ≥ 0"));
    }
    let half = n / 2;
    let mut v: Vec<c64> = cfg.dark[..half].to_vec();
    let vn = linalg::norm(&v);
    if vn == 0.0 {
        return Err(Error::invalid("dark mode vanishes on array 1"));
    }
    v.iter_mut().for_each(|c| *c /= vn);
    let p = cfg.dark_parity as f64;
    // Array-2 profile chosen so that the dark mode is (S₁ − S₂)/√2.
    let u2: Vec<c64> = v.iter().map(|c| -p * c).collect();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let dark: Vec<c64> = v.iter().map(|c| c * r).chain(u2.iter().map(|c| -c * r)).collect();
    let bright: Vec<c64> = v.iter().map(|c| c * r).chain(u2.iter().map(|c| c * r)).collect();

    let d: Vec<f64> = (0..n)
        .map(|j| if cfg.drive[usize::from(j >= half)] { cfg.omega } else { 0.0 })
        .collect();
    let m = h.matrix.as_ref();
    let shift = cfg.frame_shift;
    let rhs = |_t: f64, y: &[c64], dy: &mut [c64]| {
        let (e, s) = y.split_at(n);
        let (de, ds) = dy.split_at_mut(n);
        linalg::matvec(m, e, de);
        for j in 0..n {
            de[j] = -I * (de[j] - shift * e[j]) - I * d[j] * s[j];
            ds[j] = -I * d[j] * e[j];
        }
    };
    let mut y0 = vec![ZERO; 2 * n];
    y0[n..n + half].copy_from_slice(&v);
    let times = uniform_grid(cfg.t_end, cfg.samples);
    let (states, stats) = integrate_ode(rhs, &y0, 0.0, &times, Tolerance::default())?;

    let mut traj = TransferTrajectory { times, stats, ..Default::default() };
    for y in &states {
        let (e, s) = y.split_at(n);
        traj.pop_s1.push(norm_sqr(&s[..half]));
        traj.pop_s2.push(norm_sqr(&s[half..]));
        traj.pop_e.push(norm_sqr(e));
        traj.c1.push(linalg::inner(&v, &s[..half]));
        traj.c2.push(linalg::inner(&u2, &s[half..]));
        traj.cb.push(linalg::inner(&bright, e));
        traj.cd.push(linalg::inner(&dark, e));
    }
    Ok(traj.finish())
}

#[derive(Clone, Debug)]
pub struct MemoryRelease {
    pub trajectory: TransferTrajectory,
    /// Fitted decay rate of the array-1 s population.
    pub rate: f64,
    pub fit_points: usize,
}

/// Drives array 1 only and fits ln P_s1(t) = a − γ̃t over samples with
/// e-population below 10⁻² after `skip` has elapsed.
pub fn simulate_memory_release(
    hamiltonian: &EffectiveHamiltonian,
    dark: &[c64],
    dark_parity: i8,
    frame_shift: f64,
    omega: f64,
    t_end: f64,
    skip: f64,
) -> Result<MemoryRelease> {
    let cfg = FullTransferConfig {
        hamiltonian,
        dark,
        dark_parity,
        frame_shift,
        omega,
        drive: [true, false],
        t_end,
        samples: 400,
    };
    let trajectory = simulate_transfer_full(&cfg)?;
    let pts: Vec<(f64, f64)> = trajectory
        .times
        .iter()
        .zip(&trajectory.pop_s1)
        .zip(&trajectory.pop_e)
        .filter(|((t, s), e)| **t >= skip && **e < 1e-2 && **s > 0.0)
        .map(|((t, s), _)| (*t, s.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::NotConverged("memory release fit window is empty".into()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Ok(MemoryRelease { rate: -sxy / sxx, fit_points: pts.len(), trajectory })
}

/// Amplitude assumed before t = 0 in the retarded equations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreHistory {
    /// c(t < 0) = c(0).
    #[default]
    Constant,
    /// c(t < 0) = 0.
    Zero,
}

/// Fixed-step RK4 for ẏ = f(y, y(t − τ)) with τ an integer number of steps
/// and cubic Hermite interpolation of the stored history. Every step is
/// recorded.
struct DelaySolution {
    dt: f64,
    states: Vec<Vec<c64>>,
}

fn integrate_dde<F>(
    f: F,
    y0: &[c64],
    tau: f64,
    dt_max: f64,
    t_end: f64,
    pre: PreHistory,
) -> Result<DelaySolution>
where
    F: Fn(&[c64], &[c64], &mut [c64]),
{
    let n = y0.len();
    let lag = if tau > 0.0 { (tau / dt_max).ceil() as usize } else { 0 };
    let dt = if lag > 0 { tau / lag as f64 } else { dt_max };
    if lag > 0 && dt > tau / 10.0 * (1.0 + 1e-12) {
        return Err(Error::invalid(format!("step {dt} exceeds τ/10")));
    }
    let steps = (t_end / dt).ceil() as usize;
    if steps > 200_000_000 / n.max(1) {
        return Err(Error::invalid("delay integration would need too many steps"));
    }
    let before = match pre {
        PreHistory::Constant => y0.to_vec(),
        PreHistory::Zero => vec![ZERO; n],
    };
    let mut states = Vec::with_capacity(steps + 1);
    // Right and left derivatives at each grid point.
    let mut d_right: Vec<Vec<c64>> = Vec::with_capacity(steps + 1);
    let mut d_left: Vec<Vec<c64>> = Vec::with_capacity(steps + 1);
    states.push(y0.to_vec());
    let zero = vec![ZERO; n];
    let mut lagged = vec![ZERO; n];
    let mut stage = vec![ZERO; n];
    let mut k = [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]];
    d_left.push(zero.clone());

    // Delayed value at fraction `frac` of step `step`; needs d_right[m + 1].
    let delayed = |states: &[Vec<c64>], dr: &[Vec<c64>], dl: &[Vec<c64>], step: usize, frac: f64, out: &mut [c64]| {
        if step < lag {
            out.copy_from_slice(&before);
            return;
        }
        let m = step - lag;
        if frac == 0.0 {
            out.copy_from_slice(&states[m]);
            return;
        }
        if frac == 1.0 {
            out.copy_from_slice(&states[m + 1]);
            return;
        }
        let s = frac;
        let h00 = 2.0 * s * s * s - 3.0 * s * s + 1.0;
        let h10 = s * s * s - 2.0 * s * s + s;
        let h01 = -2.0 * s * s * s + 3.0 * s * s;
        let h11 = s * s * s - s * s;
        for i in 0..out.len() {
            out[i] = states[m][i] * h00
                + dr[m][i] * (h10 * dt)
                + states[m + 1][i] * h01
                + dl[m + 1][i] * (h11 * dt);
        }
    };

    for step in 0..steps {
        let y = states[step].clone();
        if lag == 0 {
            f(&y, &y, &mut k[0]);
        } else {
            delayed(&states, &d_right, &d_left, step, 0.0, &mut lagged);
            f(&y, &lagged, &mut k[0]);
        }
        d_right.push(k[0].clone());
        for (s, frac) in [0.5, 0.5, 1.0].into_iter().enumerate() {
            for i in 0..n {
                stage[i] = y[i] + k[s][i] * (frac * dt);
            }
            let out = &mut k[s + 1];
            if lag == 0 {
                f(&stage, &stage, out);
            } else {
                delayed(&states, &d_right, &d_left, step, frac, &mut lagged);
                f(&stage, &lagged, out);
            }
        }
        let next: Vec<c64> = (0..n)
            .map(|i| y[i] + (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]) * (dt / 6.0))
            .collect();
        if next.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NotConverged(format!("delay integration diverged at step {step}")));
        }
        let mut left = vec![ZERO; n];
        if lag == 0 {
            f(&next, &next, &mut left);
        } else {
            delayed(&states, &d_right, &d_left, step, 1.0, &mut lagged);
            f(&next, &lagged, &mut left);
        }
        states.push(next);
        d_left.push(left);
    }
    Ok(DelaySolution { dt, states })
}

impl DelaySolution {
    fn sample(&self, t: f64) -> &[c64] {
        let k = ((t / self.dt).round() as usize).min(self.states.len() - 1);
        &self.states[k]
    }
}

#[derive(Clone, Debug)]
pub struct DelayTrace {
    pub times: Vec<f64>,
    pub values: Vec<c64>,
    pub dt: f64,
}

/// Retarded dark or bright amplitude,
/// ċ = −((Γ + γ_d)/2)c ∓ (Γ/2)e^{−κL}c(t − τ) with − for bright.
#[allow(clippy::too_many_arguments)]
pub fn integrate_delay(
    big_gamma: f64,
    gamma_d: f64,
    gamma_tau: f64,
    kappa_l: f64,
    branch: Branch,
    c0: c64,
    t_end: f64,
    samples: usize,
    pre: PreHistory,
) -> Result<DelayTrace> {
    if !(big_gamma > 0.0 && gamma_d >= 0.0 && gamma_tau >= 0.0 && kappa_l >= 0.0 && t_end > 0.0) {
        return Err(Error::invalid("invalid retarded-mode parameters"));
    }
    let tau = gamma_tau / big_gamma;
    let dt_max = delay_step(tau, big_gamma, 0.0);
    let sign = match branch {
        Branch::Bright => -1.0,
        Branch::Dark => 1.0,
    };
    let a = 0.5 * big_gamma * (-kappa_l).exp() * sign;
    let own = -0.5 * (big_gamma + gamma_d);
    let sol = integrate_dde(
        |y, yl, dy| dy[0] = y[0] * own + yl[0] * a,
        &[c0],
        tau,
        dt_max,
        t_end,
        pre,
    )?;
    let times = uniform_grid(t_end, samples);
    let times: Vec<f64> = times.into_iter().map(|t| (t / sol.dt).round() * sol.dt).collect();
    let values = times.iter().map(|&t| sol.sample(t)[0]).collect();
    Ok(DelayTrace { times, values, dt: sol.dt })
}

/// min(τ/50, 0.01/max(Γ, Ω)).
pub fn delay_step(tau: f64, big_gamma: f64, omega: f64) -> f64 {
    let base = 0.01 / big_gamma.max(omega);
    if tau > 0.0 {
        base.min(tau / 50.0)
    } else {
        base
    }
}

/// Retarded four-mode transfer from c₁ = 1. Only the dark and bright
/// self-couplings carry the delay.
pub fn delayed_transfer(
    params: &TransferParams,
    t_end: f64,
    samples: usize,
    dt: Option<f64>,
) -> Result<TransferTrajectory> {
    params.validate()?;
    if !(t_end > 0.0) {
        return Err(Error::invalid("t_end must be positive"));
    }
    let g = params.big_gamma();
    if !(g > 0.0) {
        return Err(Error::invalid("retarded transfer needs γ_b > γ_d"));
    }
    let tau = params.tau();
    let dt_max = dt.unwrap_or_else(|| delay_step(tau, g, params.omega));
    let a = 0.5 * g * (-params.kappa_l).exp();
    let own = -0.5 * (g + params.gamma_d);
    let w = params.omega / std::f64::consts::SQRT_2;
    let sol = integrate_dde(
        |y, yl, dy| {
            dy[0] = -I * w * (y[2] + y[3]);
            dy[1] = -I * w * (y[2] - y[3]);
            dy[2] = y[2] * own - yl[2] * a - I * w * (y[0] + y[1]);
            dy[3] = y[3] * own + yl[3] * a - I * w * (y[0] - y[1]);
        },
        &[c64::from(1.0), ZERO, ZERO, ZERO],
        tau,
        dt_max,
        t_end,
        PreHistory::Constant,
    )?;
    // Finest available sampling for the peak, then thin to `samples`.
    let stride = (sol.states.len() / samples.max(2)).max(1);
    let times: Vec<f64> = (0..sol.states.len()).step_by(stride).map(|k| k as f64 * sol.dt).collect();
    let states: Vec<Vec<c64>> = (0..sol.states.len()).step_by(stride).map(|k| sol.states[k].clone()).collect();
    let all_pop: Vec<f64> = sol.states.iter().map(|s| s[1].norm_sqr()).collect();
    let all_t: Vec<f64> = (0..sol.states.len()).map(|k| k as f64 * sol.dt).collect();
    let (t_peak, f_peak) = refine_peak(&all_t, &all_pop);
    let mut traj = four_mode_trajectory(times, &states, IntegrationStats::default());
    traj.fidelity = f_peak.clamp(0.0, 1.0);
    traj.t_at_max = t_peak;
    Ok(traj)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DelayedOptimum {
    pub omega: f64,
    pub fidelity: f64,
    pub t_max: f64,
}

/// Maximizes the retarded transfer fidelity over Ω by golden-section search
/// in ln Ω around the Markovian optimum rescaled by 1/√(1 + 3Γτ/4).
/// Γτ = 0 uses the Markovian four-mode model.
pub fn optimize_delayed_transfer(
    big_gamma: f64,
    gamma_d: f64,
    gamma_tau: f64,
    kappa_l: f64,
) -> Result<DelayedOptimum> {
    let gamma_b = 2.0 * big_gamma + gamma_d;
    let guess = (gamma_d * gamma_b / 8.0).sqrt() / (1.0 + 0.75 * gamma_tau).sqrt();
    let run = |omega: f64| -> Result<TransferTrajectory> {
        let p = TransferParams::delayed(big_gamma, gamma_d, omega, gamma_tau, kappa_l);
        let t_end = 1.6 * std::f64::consts::PI / omega * (1.0 + 0.5 * gamma_tau);
        if gamma_tau == 0.0 {
            return integrate_four_mode(&p, t_end, 4001, None);
        }
        delayed_transfer(&p, t_end, 64, None)
    };
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = ((guess / 3.0).ln(), (guess * 3.0).ln());
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = run(x1.exp())?.fidelity;
    let mut f2 = run(x2.exp())?.fidelity;
    while b - a > 2e-3 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = run(x1.exp())?.fidelity;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = run(x2.exp())?.fidelity;
        }
    }
    let omega = (0.5 * (a + b)).exp();
    let best = run(omega)?;
    Ok(DelayedOptimum { omega, fidelity: best.fidelity, t_max: best.t_at_max })
}
