//! One time step of
//!
//! ```text
//! L_t = (sigma^2 / 2) (L_xx + L_x^2) + e^L - 1,      L = ln u,
//! ```
//!
//! the F-KPP equation `u_t = (sigma^2/2) u_xx + u^2 - u` in log variables.
//! Two discretizations are provided.
//!
//! [`Scheme::Log`]: diffusion is implicit. The quadratic gradient term is
//! linearized about the current gradient `q`, `L_x^2 ~ 2 q L_x' - q^2`,
//! and its linear part joins the implicit tridiagonal system; central
//! differences are used where the cell Peclet number `q dx` is at most one
//! and one-sided upwind differences elsewhere, which keeps the matrix an
//! M-matrix. Accurate along smooth tails, but its truncation error is
//! `O((L_xx dx)^2 / dx^2)`, which is large while the smoothed step is
//! still only a few cells wide.
//!
//! [`Scheme::Ratio`]: theta-method for the three-point Laplacian of `u`,
//! solved for the ratio `w = u_new / u_old` so nothing underflows. The
//! system for `w - 1` has off-diagonals `-theta r e^{L_j - L_i}`; it is a
//! diagonal similarity transform of the usual heat matrix, so the pivots
//! are those of the constant-coefficient problem. Consistent with the
//! linear heat scheme for `u` however steep the data, which makes it the
//! right choice for the start-up layer; on long steep tails the log
//! scheme is more accurate.
//!
//! The reaction `e^L - 1` is explicit in both. Boundaries: `L = 0` on the
//! right (`u = 1`). The left node is advanced explicitly with one-sided
//! differences to serve as Dirichlet data for the solve, then reset by
//! quadratic extrapolation (second difference copied from the interior).

use crate::error::{Error, Result};
use crate::model::ModelParams;

use super::field::LogField;

/// `|dL|` above which a step is rejected as unstable.
pub const INSTABILITY_LIMIT: f64 = 10.0;

/// Largest monotonicity defect the repair pass may absorb.
pub const REPAIR_TOLERANCE: f64 = 1e-9;

/// Differences of `L` between neighbours are clipped here before
/// exponentiation in the ratio scheme.
const MAX_LOG_RATIO: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reaction {
    /// `u^2 - u`.
    #[default]
    Fkpp,
    /// Pure heat equation, for checks against the Gaussian kernel.
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Linearized implicit scheme in `L`.
    #[default]
    Log,
    /// Theta-method in `u`, solved for `u_new / u_old`.
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepStats {
    pub max_delta: f64,
    pub repair: f64,
}

/// Owns the scratch buffers for repeated steps on one grid.
#[derive(Debug, Clone)]
pub struct Stepper {
    params: ModelParams,
    reaction: Reaction,
    pub scheme: Scheme,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    rhs: Vec<f64>,
    next: Vec<f64>,
}

impl Stepper {
    pub fn new(params: ModelParams, reaction: Reaction) -> Self {
        Stepper {
            params,
            reaction,
            scheme: Scheme::default(),
            sub: Vec::new(),
            diag: Vec::new(),
            sup: Vec::new(),
            rhs: Vec::new(),
            next: Vec::new(),
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Advances by the grid's base `dt`.
    pub fn step(&mut self, field: &mut LogField) -> Result<StepStats> {
        let dt = field.grid.dt;
        self.step_by(field, dt)
    }

    /// Advances by `dt`. The field is left untouched on error.
    pub fn step_by(&mut self, field: &mut LogField, dt: f64) -> Result<StepStats> {
        let max_delta = self.propose(field, dt);
        if !(max_delta <= INSTABILITY_LIMIT) {
            return Err(Error::Instability {
                time: field.time,
                max_delta,
            });
        }
        self.commit(field, dt, max_delta)
    }

    fn reaction_at(&self, v: f64) -> f64 {
        match self.reaction {
            // exp_m1 rounds to exactly -1 below -40; skip the call.
            Reaction::Fkpp if v < -40.0 => -1.0,
            Reaction::Fkpp => v.exp_m1(),
            Reaction::Disabled => 0.0,
        }
    }

    /// Computes the next state into the scratch buffer and returns
    /// `max |dL|` (NaN if anything went non-finite) without touching
    /// `field`.
    pub(crate) fn propose(&mut self, field: &LogField, dt: f64) -> f64 {
        let n = field.log_u.len();
        let m = n - 2;
        self.sub.resize(m, 0.0);
        self.diag.resize(m, 0.0);
        self.sup.resize(m, 0.0);
        self.rhs.resize(m, 0.0);
        self.next.resize(n, 0.0);

        match self.scheme {
            Scheme::Log => self.propose_log(field, dt),
            Scheme::Ratio => self.propose_ratio(field, dt),
        }

        if n >= 4 {
            let extrap = 3.0 * self.next[1] - 3.0 * self.next[2] + self.next[3];
            self.next[0] = extrap.min(self.next[1]);
        }
        self.next
            .iter()
            .zip(&field.log_u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, |acc: f64, d| if d.is_nan() { f64::NAN } else { acc.max(d) })
    }

    fn propose_log(&mut self, field: &LogField, dt: f64) {
        let l = &field.log_u;
        let n = l.len();
        let m = n - 2;
        let dx = field.grid.dx;
        let diff = 0.5 * self.params.sigma2;
        let r = dt * diff / (dx * dx);
        let adv = dt * diff / dx;

        let left = if n >= 4 {
            let q0 = (l[1] - l[0]) / dx;
            let curv = (l[1] - 2.0 * l[2] + l[3]) / (dx * dx);
            l[0] + dt * (self.reaction_at(l[0]) + diff * (curv + q0 * q0))
        } else {
            l[0] + dt * self.reaction_at(l[0])
        };
        let right = 0.0;
        for k in 0..m {
            let i = k + 1;
            let (lm, lc, lp) = (l[i - 1], l[i], l[i + 1]);
            let central = (lp - lm) / (2.0 * dx);
            let (mut a, mut b, mut c) = (-r, 1.0 + 2.0 * r, -r);
            let q = if central.abs() * dx <= 1.0 {
                a += adv * central;
                c -= adv * central;
                central
            } else if central > 0.0 {
                let q = (lp - lc) / dx;
                b += 2.0 * adv * q;
                c -= 2.0 * adv * q;
                q
            } else {
                let q = (lc - lm) / dx;
                b -= 2.0 * adv * q;
                a += 2.0 * adv * q;
                q
            };
            let mut d = lc + dt * (self.reaction_at(lc) - diff * q * q);
            if k == 0 {
                d -= a * left;
                a = 0.0;
            }
            if k == m - 1 {
                d -= c * right;
                c = 0.0;
            }
            self.sub[k] = a;
            self.diag[k] = b;
            self.sup[k] = c;
            self.rhs[k] = d;
        }
        solve_tridiagonal(&self.sub, &mut self.diag, &self.sup, &mut self.rhs);

        self.next[0] = left;
        self.next[1..n - 1].copy_from_slice(&self.rhs);
        self.next[n - 1] = right;
    }

    fn propose_ratio(&mut self, field: &LogField, dt: f64) {
        let l = &field.log_u;
        let n = l.len();
        let m = n - 2;
        let dx = field.grid.dx;
        let r = dt * 0.5 * self.params.sigma2 / (dx * dx);
        // Crank-Nicolson while the explicit half cannot drive u negative
        // (right-hand side above -1), backward Euler beyond.
        let theta = if r <= 0.25 { 0.5 } else { 1.0 };
        // ln(u_to / u_from), clipped.
        let ratio = |to: f64, from: f64| (to - from).min(MAX_LOG_RATIO);

        // The ghost value left of the boundary continues the quadratic.
        let left = if n >= 4 {
            let ghost = 3.0 * l[0] - 3.0 * l[1] + l[2];
            let z = dt * self.reaction_at(l[0])
                + r * (ratio(l[1], l[0]).exp_m1() + ratio(ghost, l[0]).exp_m1());
            l[0] + z.max(-0.5).ln_1p()
        } else {
            l[0] + dt * self.reaction_at(l[0])
        };
        let right = 0.0;
        for k in 0..m {
            let i = k + 1;
            let up = ratio(l[i + 1], l[i]);
            let down = ratio(l[i - 1], l[i]);
            let mut a = -theta * r * down.exp();
            let mut c = -theta * r * up.exp();
            let mut d = dt * self.reaction_at(l[i]) + r * (up.exp_m1() + down.exp_m1());
            if k == 0 {
                d -= a * (left - l[0]).exp_m1();
                a = 0.0;
            }
            if k == m - 1 {
                d -= c * (right - l[n - 1]).exp_m1();
                c = 0.0;
            }
            self.sub[k] = a;
            self.diag[k] = 1.0 + 2.0 * theta * r;
            self.sup[k] = c;
            self.rhs[k] = d;
        }
        forward_sweep(&self.sub, &mut self.diag, &self.sup, &mut self.rhs);

        // Deep below the step the implicit kernel's exponential tail can
        // put u_new / u_old beyond the f64 range, so the back substitution
        // falls back to log magnitudes there.
        let mut z_next = 0.0;
        let mut log_next: Option<(f64, f64)> = None;
        for k in (0..m).rev() {
            let a = self.rhs[k] * self.diag[k];
            let coef = -self.sup[k] * self.diag[k];
            if log_next.is_none() {
                let z = a + coef * z_next;
                if z.abs() < LARGE_RATIO {
                    self.next[k + 1] = l[k + 1] + z.ln_1p();
                    z_next = z;
                    continue;
                }
                log_next = Some((z_next.signum(), z_next.abs().ln()));
            }
            let (s, lz) = log_next.expect("set above");
            let (sign, lz) = add_signed(a, s, coef.ln() + lz);
            self.next[k + 1] = l[k + 1] + ln_1p_signed(sign, lz);
            if lz < LARGE_RATIO.ln() - 1.0 {
                log_next = None;
                z_next = sign * lz.exp();
            } else {
                log_next = Some((sign, lz));
            }
        }
        self.next[0] = left;
        self.next[n - 1] = right;
    }

    /// Repairs monotonicity of the proposed state and swaps it in.
    pub(crate) fn commit(&mut self, field: &mut LogField, dt: f64, max_delta: f64) -> Result<StepStats> {
        let mut repair: f64 = 0.0;
        let mut running = f64::NEG_INFINITY;
        for v in self.next.iter_mut() {
            if *v > 0.0 {
                repair = repair.max(*v);
                *v = 0.0;
            }
            if *v < running {
                repair = repair.max(running - *v);
                *v = running;
            }
            running = *v;
        }
        if repair > REPAIR_TOLERANCE {
            return Err(Error::MonotonicityViolation {
                time: field.time + dt,
                violation: repair,
            });
        }
        std::mem::swap(&mut field.log_u, &mut self.next);
        field.time += dt;
        Ok(StepStats { max_delta, repair })
    }
}

/// Thomas algorithm; `diag` is overwritten and the solution left in `rhs`.
/// Stable for the diagonally dominant systems built above.
fn solve_tridiagonal(sub: &[f64], diag: &mut [f64], sup: &[f64], rhs: &mut [f64]) {
    forward_sweep(sub, diag, sup, rhs);
    let n = diag.len();
    rhs[n - 1] *= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) * diag[i];
    }
}

/// Elimination half of the Thomas algorithm; `diag` ends up holding
/// reciprocal pivots.
fn forward_sweep(sub: &[f64], diag: &mut [f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    diag[0] = 1.0 / diag[0];
    for i in 1..n {
        let w = sub[i] * diag[i - 1];
        diag[i] = 1.0 / (diag[i] - w * sup[i - 1]);
        rhs[i] -= w * rhs[i - 1];
    }
}

/// Above this magnitude the back substitution switches to `(sign, ln |z|)`.
const LARGE_RATIO: f64 = 1e290;

/// `ln |a + s e^b|` and its sign, for finite `a`.
fn add_signed(a: f64, s: f64, b: f64) -> (f64, f64) {
    if s == 0.0 || b == f64::NEG_INFINITY {
        return (a.signum(), a.abs().ln());
    }
    if a == 0.0 {
        return (s, b);
    }
    let la = a.abs().ln();
    let same = a.signum() == s;
    let (sign, big, small) = if la >= b { (a.signum(), la, b) } else { (s, b, la) };
    let q = (small - big).exp();
    (sign, big + if same { q.ln_1p() } else { (-q).ln_1p() })
}

/// `ln(1 + z)` for `z = sign e^lz`; NaN when `z < -1`.
fn ln_1p_signed(sign: f64, lz: f64) -> f64 {
    if sign > 0.0 && lz > 30.0 {
        lz + (-lz).exp().ln_1p()
    } else {
        (sign * lz.exp()).ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::super::grid::Grid;
    use super::*;

    fn constant_field(value: f64) -> LogField {
        let grid = Grid::new(-5.0, 5.0, 0.05, 1.0).unwrap();
        LogField {
            log_u: vec![value; grid.n_points],
            time: 0.0,
            grid,
        }
    }

    #[test]
    fn tridiagonal_solves_small_system() {
        // [2 -1 0; -1 2 -1; 0 -1 2] x = [1 0 1] -> x = [1 1 1]
        let sub = [0.0, -1.0, -1.0];
        let sup = [-1.0, -1.0, 0.0];
        let mut diag = [2.0, 2.0, 2.0];
        let mut rhs = [1.0, 0.0, 1.0];
        solve_tridiagonal(&sub, &mut diag, &sup, &mut rhs);
        for v in rhs {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn u_equal_one_is_fixed() {
        let mut f = constant_field(0.0);
        let mut s = Stepper::new(ModelParams::default(), Reaction::Fkpp);
        for _ in 0..100 {
            s.step(&mut f).unwrap();
        }
        assert!(f.log_u.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn spatially_constant_data_follows_logistic_ode() {
        // u' = u^2 - u  =>  u(t) = u0 / (u0 + (1 - u0) e^t). The right
        // boundary pins u = 1, so only the proposed interior is compared.
        let u0: f64 = 0.5;
        let f = constant_field(u0.ln());
        let mut s = Stepper::new(ModelParams::default(), Reaction::Fkpp);
        let dt = 1e-4;
        s.propose(&f, dt);
        let mid = f.grid.n_points / 4;
        let exact = (u0 / (u0 + (1.0 - u0) * dt.exp())).ln();
        assert!((s.next[mid] - exact).abs() < 1e-8);
        assert!(((s.next[mid] - u0.ln()) / dt + 0.5).abs() < 1e-3);
    }

    #[test]
    fn heat_mode_leaves_constants_alone() {
        let f = constant_field(-3.0);
        let mut s = Stepper::new(ModelParams::default(), Reaction::Disabled);
        s.propose(&f, 1e-3);
        assert!((s.next[f.grid.n_points / 3] + 3.0).abs() < 1e-14);
    }

    #[test]
    fn ratio_scheme_fixed_point_and_logistic_ode() {
        let mut f = constant_field(0.0);
        let mut s = Stepper::new(ModelParams::default(), Reaction::Fkpp).with_scheme(Scheme::Ratio);
        for _ in 0..100 {
            s.step(&mut f).unwrap();
        }
        assert!(f.log_u.iter().all(|&l| l == 0.0));

        let u0: f64 = 0.5;
        let f = constant_field(u0.ln());
        let dt = 1e-4;
        s.propose(&f, dt);
        let exact = (u0 / (u0 + (1.0 - u0) * dt.exp())).ln();
        assert!((s.next[f.grid.n_points / 4] - exact).abs() < 1e-8);
    }

    #[test]
    fn ratio_scheme_is_the_linear_heat_scheme() {
        // One Crank-Nicolson step on u, done directly, against the ratio form.
        let grid = Grid::new(-2.0, 2.0, 0.1, 1.0).unwrap();
        let f = super::super::field::init_field(&grid, 0.1).unwrap();
        let mut s = Stepper::new(ModelParams::default(), Reaction::Disabled).with_scheme(Scheme::Ratio);
        let dt = 0.002;
        s.propose(&f, dt);
        let u: Vec<f64> = f.log_u.iter().map(|l| l.exp()).collect();
        let n = u.len();
        let r = dt * 0.5 / (0.1 * 0.1);
        let m = n - 2;
        let mut sub = vec![-0.5 * r; m];
        let sup = vec![-0.5 * r; m];
        let mut diag = vec![1.0 + r; m];
        let mut rhs: Vec<f64> = (1..n - 1)
            .map(|i| u[i] + 0.5 * r * (u[i + 1] - 2.0 * u[i] + u[i - 1]))
            .collect();
        // Old boundary values as Dirichlet data; the left node differs from
        // the stepper's, so only nodes away from that edge are compared.
        rhs[0] += 0.5 * r * u[0];
        rhs[m - 1] += 0.5 * r * u[n - 1];
        sub[0] = 0.0;
        solve_tridiagonal(&sub, &mut diag, &sup, &mut rhs);
        for i in 5..n - 5 {
            assert!((s.next[i].exp() - rhs[i - 1]).abs() < 1e-12, "node {i}");
        }
    }

    #[test]
    fn signed_log_sums() {
        let check = |a: f64, s: f64, b: f64| {
            let (sign, lz) = add_signed(a, s, b);
            let want = a + s * b.exp();
            assert!((sign * lz.exp() - want).abs() <= 1e-14 * want.abs().max(1.0), "{a} {s} {b}");
        };
        for (a, s, b) in [(3.0, 1.0, 0.5), (-3.0, 1.0, 0.5), (0.2, -1.0, 1.0), (0.0, -1.0, 2.0), (-4.0, 0.0, 1.0)] {
            check(a, s, b);
        }
        let (sign, lz) = add_signed(1e300, 1.0, 2000.0);
        assert_eq!(sign, 1.0);
        assert!((lz - 2000.0).abs() < 1e-12);
        assert!((ln_1p_signed(1.0, 2000.0) - 2000.0).abs() < 1e-12);
        assert!((ln_1p_signed(-1.0, -3.0) - (-(-3.0f64).exp()).ln_1p()).abs() < 1e-15);
    }

    #[test]
    fn ratio_step_survives_a_deep_floor() {
        // Thousands of units below the step the implicit kernel's tail
        // raises u by factors far beyond the f64 range.
        let grid = Grid::new(-100.0, 40.0, 0.025, 1.0).unwrap();
        let f = super::super::field::init_field_with_floor(&grid, 0.025, -4000.0).unwrap();
        let mut s = Stepper::new(ModelParams::default(), Reaction::Fkpp).with_scheme(Scheme::Ratio);
        let delta = s.propose(&f, 6.25e-7);
        assert!(delta.is_finite() && delta > 700.0, "{delta}");
        assert!(s.next.iter().all(|v| v.is_finite() && *v <= 0.0));
        assert!(s.next.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn oversized_step_is_rejected_without_mutation() {
        let grid = Grid::new(-5.0, 5.0, 0.05, 1.0).unwrap();
        let mut f = super::super::field::init_field(&grid, 0.05).unwrap();
        let before = f.clone();
        let mut s = Stepper::new(ModelParams::default(), Reaction::Fkpp);
        let err = s.step_by(&mut f, 0.01).unwrap_err();
        assert!(matches!(err, Error::Instability { .. }));
        assert_eq!(f, before);
    }
}
