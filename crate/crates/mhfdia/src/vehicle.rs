//! Differential-drive vehicle path-tracking loop: nonlinear kinematics, a
//! kinematic tracking controller, the six-channel sensor stack, UKF
//! estimation on both sides of the attack, and the forward-iterated
//! linearization the attacker feeds to the injection generator.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::attack::{AttackHistory, AttackSupport, GeneratorConfig, GeneratorWorkspace};
use crate::baselines::{eigenvalue_mh_attack, AttackKind};
use crate::estimators::{UkfParams, UkfState};
use crate::plant::{HorizonObservation, NoiseKind, NoiseModel};
use crate::{Error, Result};

/// Pose (theta, x, y); theta is unwrapped in the dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub theta: f64,
    pub x: f64,
    pub y: f64,
}

impl VehicleState {
    pub fn new(theta: f64, x: f64, y: f64) -> Self {
        Self { theta, x, y }
    }

    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.theta, self.x, self.y])
    }

    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        if v.len() != 3 {
            return Err(Error::Dimension("vehicle state has dimension 3".into()));
        }
        Ok(Self { theta: v[0], x: v[1], y: v[2] })
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    /// Heading wrapped to (-pi, pi], for logging only.
    pub fn wrapped_theta(&self) -> f64 {
        let two_pi = std::f64::consts::TAU;
        let mut t = self.theta % two_pi;
        if t <= -std::f64::consts::PI {
            t += two_pi;
        } else if t > std::f64::consts::PI {
            t -= two_pi;
        }
        t
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.x.is_finite() && self.y.is_finite()
    }
}

/// Geometry, tracking gain, step size and UKF covariances.
#[derive(Debug, Clone)]
pub struct VehicleParams {
    /// Center-of-mass offset (m).
    pub d: f64,
    /// Wheel radius (m).
    pub r: f64,
    /// Half wheelbase (m).
    pub l_half: f64,
    /// Tracking gain, 2x2 positive definite.
    pub k_track: DMatrix<f64>,
    pub t_s: f64,
    /// UKF process covariance (3x3).
    pub q: DMatrix<f64>,
    /// UKF measurement covariance (6x6).
    pub r_meas: DMatrix<f64>,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            d: 0.0562,
            r: 0.035,
            l_half: 0.115,
            k_track: DMatrix::identity(2, 2) * 2.0,
            t_s: 0.01,
            q: DMatrix::identity(3, 3) * 1e-6,
            // GPS (rows 3-4) is the trusted position source; the heading-
            // mixed and encoder rows carry much larger model uncertainty
            r_meas: DMatrix::from_diagonal(&DVector::from_vec(vec![
                1.0, 1.0, 1e-4, 1e-4, 1.0, 1.0,
            ])),
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        if self.d <= 0.0 || self.r <= 0.0 || self.l_half <= 0.0 {
            return Err(Error::Config("d, r, L_half must be positive".into()));
        }
        if self.t_s <= 0.0 {
            return Err(Error::Config("sample period must be positive".into()));
        }
        if self.k_track.nrows() != 2 || self.k_track.ncols() != 2 {
            return Err(Error::Dimension("tracking gain must be 2x2".into()));
        }
        let sym = (&self.k_track + self.k_track.transpose()) * 0.5;
        if sym.symmetric_eigen().eigenvalues.iter().any(|&e| e <= 0.0) {
            return Err(Error::Config("tracking gain must be positive definite".into()));
        }
        Ok(())
    }
}

/// Euler step of theta' = omega, x' = v cos(theta) - d omega sin(theta),
/// y' = v sin(theta) + d omega cos(theta).
pub fn vehicle_step(
    state: &VehicleState,
    u: (f64, f64),
    params: &VehicleParams,
    noise: Option<&DVector<f64>>,
) -> VehicleState {
    let (v, omega) = u;
    let (s, c) = state.theta.sin_cos();
    let mut next = VehicleState {
        theta: state.theta + params.t_s * omega,
        x: state.x + params.t_s * (v * c - params.d * omega * s),
        y: state.y + params.t_s * (v * s + params.d * omega * c),
    };
    if let Some(w) = noise {
        next.theta += w[0];
        next.x += w[1];
        next.y += w[2];
    }
    next
}

/// Tracking controller u = S(theta)^-1 (z_d' + K (z_d - z)) with
/// S(theta)^-1 = [[cos, sin], [-sin/d, cos/d]]: the offset point z then
/// obeys the stable error dynamics e' = -K e.
pub fn kinematic_control(
    est: &VehicleState,
    z_d: &Vector2<f64>,
    z_d_dot: &Vector2<f64>,
    params: &VehicleParams,
) -> (f64, f64) {
    let err = z_d - est.position();
    let desired = z_d_dot + &params.k_track * err;
    let (s, c) = est.theta.sin_cos();
    let v = c * desired[0] + s * desired[1];
    let omega = (-s * desired[0] + c * desired[1]) / params.d;
    (v, omega)
}

/// The printed six-row readout acting on position z = (x, y): GPS rows 3-4
/// are the identity (the attacked channels), the other rows mix z through
/// heading and encoder geometry. Implemented verbatim even where the
/// physical interpretation is odd, so plant and attacker model agree.
pub fn measurement_matrix(theta: f64, params: &VehicleParams) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    let enc = 1.0 / (4.0 * params.r);
    let encl = params.l_half / (4.0 * params.r);
    DMatrix::from_row_slice(6, 2, &[
        c, 0.0, //
        0.0, s, //
        1.0, 0.0, //
        0.0, 1.0, //
        enc, encl, //
        enc, -encl,
    ])
}

/// y = M(theta) z + noise.
pub fn vehicle_measure(
    state: &VehicleState,
    params: &VehicleParams,
    noise: Option<&DVector<f64>>,
) -> DVector<f64> {
    let mut y = measurement_matrix(state.theta, params) * state.position();
    if let Some(v) = noise {
        y += v;
    }
    y
}

/// Forward-iterated linearization around the attacker's own estimate:
/// A = I, C = d/dx [M(theta) z] at x_eq, H = T_f stacked copies of C.
#[derive(Debug, Clone)]
pub struct AttackerModel {
    pub x_eq: VehicleState,
    /// Jacobian of the measurement map at x_eq, 6x3.
    pub c: DMatrix<f64>,
    /// Input matrix of the linearized kinematics, 3x2 (one Euler step).
    pub b: DMatrix<f64>,
    /// Stacked window observation factorization, (6 T_f) x 3.
    pub horizon: HorizonObservation,
    /// Input-to-window map G (6 T_f) x (2 T_f), strictly block lower.
    pub g_mat: DMatrix<f64>,
    pub t_f: usize,
}

impl AttackerModel {
    /// Window offset so that y_I - offset - G u_I = H x_w0 under the
    /// linear model: offset = 1 (x) (g(x_eq) - C x_eq).
    pub fn window_offset(&self) -> DVector<f64> {
        let g_eq = self.c_geometry_measure();
        let shift = g_eq - &self.c * self.x_eq.as_vector();
        let mut out = DVector::zeros(6 * self.t_f);
        for k in 0..self.t_f {
            out.rows_mut(6 * k, 6).copy_from(&shift);
        }
        out
    }

    fn c_geometry_measure(&self) -> DVector<f64> {
        // rows 2-3 of C are the identity on z, so M(theta_eq) z_eq equals
        // the columns 1-2 of C applied to z_eq
        self.c.columns(1, 2) * self.x_eq.position()
    }

    /// Windowed detector residual ||(I - H H^+)(y_I - offset - G u_I)||;
    /// y_window and u_window are stacked oldest-first.
    pub fn window_residual(&self, y_window: &DVector<f64>, u_window: &DVector<f64>) -> Result<f64> {
        if y_window.len() != 6 * self.t_f || u_window.len() != 2 * self.t_f {
            return Err(Error::Dimension("window dimensions mismatch".into()));
        }
        let adjusted = y_window - self.window_offset() - &self.g_mat * u_window;
        Ok((self.horizon.u2.transpose() * adjusted).norm())
    }
}

/// Build the attacker-side model at the given equilibrium estimate. A
/// rank-deficient stack (degenerate pose, e.g. the origin at zero heading)
/// returns the window-not-observable error; callers skip the window.
pub fn attacker_linearize(
    x_eq: &VehicleState,
    params: &VehicleParams,
    t_f: usize,
) -> Result<AttackerModel> {
    if !x_eq.is_finite() {
        return Err(Error::Numerical("non-finite linearization point".into()));
    }
    if t_f < 2 {
        return Err(Error::Config("window length must be at least 2".into()));
    }
    let (s, c) = x_eq.theta.sin_cos();
    let m_th = measurement_matrix(x_eq.theta, params);
    // d/dtheta of [cos(theta) x, sin(theta) y, x, y, encoder rows]
    let mut jac = DMatrix::zeros(6, 3);
    jac[(0, 0)] = -s * x_eq.x;
    jac[(1, 0)] = c * x_eq.y;
    jac.view_mut((0, 1), (6, 2)).copy_from(&m_th);

    let mut h = DMatrix::zeros(6 * t_f, 3);
    for k in 0..t_f {
        h.view_mut((6 * k, 0), (6, 3)).copy_from(&jac);
    }
    let horizon = HorizonObservation::from_stacked(h, t_f, 6)?;

    // one Euler step of the kinematics in u, at the equilibrium heading
    let b = params.t_s
        * DMatrix::from_row_slice(3, 2, &[
            0.0, 1.0, //
            c, -params.d * s, //
            s, params.d * c,
        ]);
    let cb = &jac * &b;
    let mut g_mat = DMatrix::zeros(6 * t_f, 2 * t_f);
    for row in 1..t_f {
        for col in 0..row {
            g_mat.view_mut((6 * row, 2 * col), (6, 2)).copy_from(&cb);
        }
    }
    Ok(AttackerModel { x_eq: *x_eq, c: jac, b, horizon, g_mat, t_f })
}

/// The three reference paths; phase advances at the configured speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    Line,
    Circle,
    Figure8,
}

impl std::str::FromStr for PathKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(PathKind::Line),
            "circle" => Ok(PathKind::Circle),
            "figure8" => Ok(PathKind::Figure8),
            other => Err(Error::Config(format!(
                "unknown path '{other}' (expected line|circle|figure8)"
            ))),
        }
    }
}

impl std::fmt::Display for PathKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            PathKind::Line => "line",
            PathKind::Circle => "circle",
            PathKind::Figure8 => "figure8",
        };
        f.write_str(tag)
    }
}

impl PathKind {
    /// Reference point and its time derivative at time t.
    pub fn reference(&self, t: f64, speed: f64) -> (Vector2<f64>, Vector2<f64>) {
        let phi = speed * t;
        match self {
            PathKind::Line => (Vector2::new(phi, 0.0), Vector2::new(speed, 0.0)),
            PathKind::Circle => (
                Vector2::new(phi.sin(), -phi.cos()),
                Vector2::new(speed * phi.cos(), speed * phi.sin()),
            ),
            PathKind::Figure8 => {
                // two tangent unit circles crossing at the origin; the right
                // loop runs clockwise, the left counterclockwise
                let psi = phi.rem_euclid(4.0 * std::f64::consts::PI);
                if !(std::f64::consts::PI..3.0 * std::f64::consts::PI).contains(&psi) {
                    let a = psi.rem_euclid(2.0 * std::f64::consts::PI);
                    (
                        Vector2::new(1.0 + a.cos(), -a.sin()),
                        Vector2::new(-speed * a.sin(), -speed * a.cos()),
                    )
                } else {
                    let b = psi - std::f64::consts::PI;
                    (
                        Vector2::new(-1.0 + b.cos(), b.sin()),
                        Vector2::new(-speed * b.sin(), speed * b.cos()),
                    )
                }
            }
        }
    }

    /// Starting pose used in the scenario runs.
    pub fn initial_state(&self) -> VehicleState {
        match self {
            PathKind::Line => VehicleState::new(std::f64::consts::FRAC_PI_4, 0.0, 0.0),
            PathKind::Circle => VehicleState::new(0.0, 0.0, -1.0),
            PathKind::Figure8 => VehicleState::new(-std::f64::consts::FRAC_PI_2, 2.0, 0.0),
        }
    }

    /// Default attack onset (s): 6 for the line, 50 for the loops.
    pub fn default_attack_start(&self) -> f64 {
        match self {
            PathKind::Line => 6.0,
            _ => 50.0,
        }
    }
}

/// Scenario configuration; `epsilon_i` is the per-step stealthiness budget,
/// the window budget is epsilon = T_f * epsilon_i.
#[derive(Debug, Clone)]
pub struct VehicleScenarioConfig {
    pub params: VehicleParams,
    pub path: PathKind,
    pub attack: AttackKind,
    pub speed: f64,
    pub duration: f64,
    pub attack_start: f64,
    pub t_f: usize,
    pub epsilon_i: f64,
    /// Window-level noise-energy allowance subtracted from the budget. Far
    /// larger than the raw noise: it also absorbs the attacker's
    /// linearization error, which grows as the injected bias drags the
    /// vehicle away from the operating point.
    pub epsilon_v: f64,
    /// Per-step measurement noise bound (uniform ball radius).
    pub meas_noise: f64,
    pub lambda0: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl VehicleScenarioConfig {
    pub fn new(path: PathKind, attack: AttackKind, seed: u64) -> Self {
        let attack_start = path.default_attack_start();
        Self {
            params: VehicleParams::default(),
            path,
            attack,
            speed: match path {
                PathKind::Line => 0.5,
                _ => 0.25,
            },
            duration: attack_start + 12.0,
            attack_start,
            t_f: 20,
            epsilon_i: 0.05,
            epsilon_v: 0.9,
            meas_noise: 0.002,
            lambda0: 1e-4,
            max_iters: 2000,
            seed,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.t_f as f64 * self.epsilon_i
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.duration <= 0.0 || self.speed <= 0.0 {
            return Err(Error::Config("duration and speed must be positive".into()));
        }
        if self.attack_start < self.t_f as f64 * self.params.t_s {
            return Err(Error::Config("attack start must leave room for one full window".into()));
        }
        if self.epsilon() <= self.epsilon_v {
            return Err(Error::Config("window budget must exceed the noise allowance".into()));
        }
        Ok(())
    }
}

/// One logged step of the closed loop.
#[derive(Debug, Clone)]
pub struct VehicleRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub x_hat: f64,
    pub y_hat: f64,
    pub theta_hat: f64,
    pub residual: f64,
    pub alarm: bool,
    pub e3: f64,
    pub e4: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct VehicleTrace {
    pub rows: Vec<VehicleRow>,
    pub path: PathKind,
    pub attack: AttackKind,
    pub attack_start: f64,
    /// Set when the UKF diverged and the trace was truncated.
    pub diverged: bool,
}

impl VehicleTrace {
    /// Tracking error ||z - z_d(t)|| per row.
    pub fn deviations(&self, config: &VehicleScenarioConfig) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| {
                let (z_d, _) = config.path.reference(r.t, config.speed);
                (Vector2::new(r.x, r.y) - z_d).norm()
            })
            .collect()
    }
}

/// Closed loop: step -> measure -> inject on the GPS channels -> UKF ->
/// controller. The defender filters the tampered stream; the attacker taps
/// the clean stream, refreshes the linearization every window, and runs
/// the selected generator on support {3, 4} (1-based).
pub fn run_vehicle_scenario(config: &VehicleScenarioConfig) -> Result<VehicleTrace> {
    config.validate()?;
    let params = &config.params;
    let t_s = params.t_s;
    let t_f = config.t_f;
    let steps = (config.duration / t_s).ceil() as usize;
    let support = AttackSupport::new(vec![2, 3], 6)?;
    // the vehicle's supported subspace couples weakly into range(H) on the
    // loop paths (gradients ~ sigma(N1)^2), so the zero-gradient cutoff must
    // sit far below the generic default or the ascent never normalizes
    let gen_config = GeneratorConfig::new(
        config.epsilon(),
        config.epsilon_v,
        config.lambda0,
        config.max_iters,
        1e-12,
    )?;

    let mut noise = NoiseModel::new(NoiseKind::UniformBall, config.meas_noise, config.seed);

    let mut state = config.path.initial_state();
    let ukf_init = |x0: &VehicleState| {
        UkfState::new(
            x0.as_vector(),
            DMatrix::identity(3, 3) * 1e-4,
            params.q.clone(),
            params.r_meas.clone(),
            UkfParams::default(),
        )
    };
    let mut defender = ukf_init(&state)?;
    let mut attacker_tap = ukf_init(&state)?;

    let mut history = AttackHistory::new(support.clone(), t_f);
    let mut model: Option<AttackerModel> = None;
    let mut workspace: Option<GeneratorWorkspace> = None;

    let mut y_buf: VecDeque<DVector<f64>> = VecDeque::with_capacity(t_f);
    let mut u_buf: VecDeque<(f64, f64)> = VecDeque::with_capacity(t_f);

    let mut rows = Vec::with_capacity(steps);
    let mut diverged = false;
    let mut prev_u = (0.0, 0.0);
    let mut window_residual = 0.0;
    let mut window_alarm = false;

    for k in 0..steps {
        let t = k as f64 * t_s;
        let y_clean = vehicle_measure(&state, params, Some(&noise.sample_step(1, 6)));

        // window boundary: score the completed window against the model it
        // ran under, then refresh the linearization for the next window
        if k % t_f == 0 {
            if let (Some(m), true) = (&model, y_buf.len() == t_f) {
                let mut yw = DVector::zeros(6 * t_f);
                let mut uw = DVector::zeros(2 * t_f);
                for (i, y) in y_buf.iter().enumerate() {
                    yw.rows_mut(6 * i, 6).copy_from(y);
                }
                // inputs are shifted: y_j depends on u up to j-1
                for (i, &(v, om)) in u_buf.iter().enumerate().skip(1) {
                    uw[2 * (i - 1)] = v;
                    uw[2 * (i - 1) + 1] = om;
                }
                window_residual = m.window_residual(&yw, &uw)?;
                window_alarm = window_residual > config.epsilon();
            }
            match attacker_linearize(&VehicleState::from_vector(&attacker_tap.mean)?, params, t_f) {
                Ok(m) => {
                    workspace = GeneratorWorkspace::new(m.horizon.clone(), support.clone()).ok();
                    model = Some(m);
                }
                Err(Error::WindowNotObservable { .. }) => {
                    // degenerate pose: keep the previous model for this window
                }
                Err(e) => return Err(e),
            }
        }

        // injection on the GPS channels
        let attacking = t >= config.attack_start && config.attack != AttackKind::None;
        let (e_i, alpha) = if attacking {
            generate_injection(config, &support, &history, model.as_ref(), workspace.as_mut(), &gen_config)?
        } else {
            (DVector::zeros(6), 0.0)
        };
        let y_received = &y_clean + &e_i;

        if y_buf.len() == t_f {
            y_buf.pop_front();
            u_buf.pop_front();
        }
        y_buf.push_back(y_received.clone());
        u_buf.push_back(prev_u);
        let residual = window_residual;
        let alarm = window_alarm;

        // filters: defender on the tampered stream, attacker tap on the clean one
        let dyn_prev = |x: &DVector<f64>| {
            let s = VehicleState { theta: x[0], x: x[1], y: x[2] };
            vehicle_step(&s, prev_u, params, None).as_vector()
        };
        let meas_fn = |x: &DVector<f64>| {
            let s = VehicleState { theta: x[0], x: x[1], y: x[2] };
            vehicle_measure(&s, params, None)
        };
        let step_filters = (|| -> Result<()> {
            let pred_d = defender.predict(dyn_prev, meas_fn)?;
            defender.update(&pred_d, &y_received)?;
            let pred_a = attacker_tap.predict(dyn_prev, meas_fn)?;
            attacker_tap.update(&pred_a, &y_clean)?;
            Ok(())
        })();
        if step_filters.is_err() {
            diverged = true;
        }

        let est = VehicleState::from_vector(&defender.mean)?;
        if !est.is_finite() {
            diverged = true;
        }

        rows.push(VehicleRow {
            t,
            x: state.x,
            y: state.y,
            theta: state.wrapped_theta(),
            x_hat: est.x,
            y_hat: est.y,
            theta_hat: est.wrapped_theta(),
            residual,
            alarm,
            e3: e_i[2],
            e4: e_i[3],
            alpha,
        });
        if diverged {
            break;
        }

        history.push(e_i)?;

        // control from the defender's (possibly biased) estimate
        let (z_d, z_d_dot) = config.path.reference(t, config.speed);
        let u = kinematic_control(&est, &z_d, &z_d_dot, params);
        state = vehicle_step(&state, u, params, None);
        prev_u = u;
    }

    Ok(VehicleTrace {
        rows,
        path: config.path,
        attack: config.attack,
        attack_start: config.attack_start,
        diverged,
    })
}

/// One injection step for the selected attack kind. Missing model or
/// infeasible window degrade to the zero injection.
fn generate_injection(
    config: &VehicleScenarioConfig,
    support: &AttackSupport,
    history: &AttackHistory,
    model: Option<&AttackerModel>,
    workspace: Option<&mut GeneratorWorkspace>,
    gen_config: &GeneratorConfig,
) -> Result<(DVector<f64>, f64)> {
    let Some(model) = model else {
        return Ok((DVector::zeros(6), 0.0));
    };
    match config.attack {
        AttackKind::None => Ok((DVector::zeros(6), 0.0)),
        AttackKind::Mh | AttackKind::Static => {
            let Some(ws) = workspace else {
                return Ok((DVector::zeros(6), 0.0));
            };
            let result = ws.generate(history, gen_config)?;
            Ok((result.e_i, result.alpha))
        }
        AttackKind::Eig => {
            let res = eigenvalue_mh_attack(&model.horizon, history, support, gen_config.eps_tilde())?;
            Ok((res.e_i, res.lambda))
        }
        AttackKind::Range | AttackKind::Gstealth => {
            // range-style bias through the linearized readout, masked to the
            // reachable channels
            let bias = DVector::from_vec(vec![0.0, 0.05, 0.05]);
            let mut e = &model.c * bias;
            for ch in 0..6 {
                if !support.contains(ch) {
                    e[ch] = 0.0;
                }
            }
            Ok((e, 0.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_input_leaves_state_unchanged() {
        let p = VehicleParams::default();
        let s = VehicleState::new(0.3, 1.0, -2.0);
        let s2 = vehicle_step(&s, (0.0, 0.0), &p, None);
        assert_eq!(s, s2);
    }

    #[test]
    fn axis_aligned_motion_advances_x() {
        let mut p = VehicleParams::default();
        p.d = 1.0; // value irrelevant at omega = 0
        let s = VehicleState::new(0.0, 0.0, 0.0);
        let s2 = vehicle_step(&s, (1.0, 0.0), &p, None);
        assert_relative_eq!(s2.x, 0.01, epsilon = 1e-14);
        assert_eq!(s2.y, 0.0);
        assert_eq!(s2.theta, 0.0);
    }

    #[test]
    fn constant_turn_closes_a_circle() {
        let mut p = VehicleParams::default();
        p.d = 1e-12; // pure unicycle for the analytic oracle
        let (v, omega) = (1.0, 0.5);
        let mut s = VehicleState::new(0.0, 0.0, 0.0);
        let steps = (std::f64::consts::TAU / omega / p.t_s).round() as usize;
        for _ in 0..steps {
            s = vehicle_step(&s, (v, omega), &p, None);
        }
        assert!(s.position().norm() < 0.05, "returned {} from start", s.position().norm());
    }

    #[test]
    fn controller_rests_on_path() {
        let p = VehicleParams::default();
        let s = VehicleState::new(0.7, 2.0, 3.0);
        let u = kinematic_control(&s, &Vector2::new(2.0, 3.0), &Vector2::zeros(), &p);
        assert_relative_eq!(u.0, 0.0, epsilon = 1e-14);
        assert_relative_eq!(u.1, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn controller_direct_substitution() {
        let mut p = VehicleParams::default();
        p.d = 1.0;
        p.k_track = DMatrix::identity(2, 2);
        // theta = 0, error z_d - z = (1, 0), stationary reference
        let s = VehicleState::new(0.0, 0.0, 0.0);
        let u = kinematic_control(&s, &Vector2::new(1.0, 0.0), &Vector2::zeros(), &p);
        assert_relative_eq!(u.0, 1.0, epsilon = 1e-14);
        assert_relative_eq!(u.1, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn line_tracking_converges_within_five_seconds() {
        let config = VehicleScenarioConfig::new(PathKind::Line, AttackKind::None, 1);
        let mut state = config.path.initial_state();
        let p = &config.params;
        for k in 0..500 {
            let t = k as f64 * p.t_s;
            let (z_d, z_d_dot) = config.path.reference(t, config.speed);
            let u = kinematic_control(&state, &z_d, &z_d_dot, p);
            state = vehicle_step(&state, u, p, None);
        }
        let (z_d, _) = config.path.reference(5.0, config.speed);
        let err = (state.position() - z_d).norm();
        assert!(err <= 0.05, "tracking error {err} after 5 s");
    }

    #[test]
    fn measurement_zero_position_gives_noise_only() {
        let p = VehicleParams::default();
        let s = VehicleState::new(0.4, 0.0, 0.0);
        let noise = DVector::from_fn(6, |i, _| 0.01 * i as f64);
        let y = vehicle_measure(&s, &p, Some(&noise));
        assert_relative_eq!(y, noise, epsilon = 1e-14);
    }

    #[test]
    fn gps_rows_copy_position() {
        let p = VehicleParams::default();
        let s = VehicleState::new(1.1, 0.8, -0.5);
        let y = vehicle_measure(&s, &p, None);
        assert_relative_eq!(y[2], 0.8, epsilon = 1e-14);
        assert_relative_eq!(y[3], -0.5, epsilon = 1e-14);
    }

    #[test]
    fn measurement_matches_hand_oracle() {
        let p = VehicleParams::default();
        let s = VehicleState::new(0.9, 1.3, -2.1);
        let y = vehicle_measure(&s, &p, None);
        let (x, yy) = (1.3, -2.1);
        let enc = 1.0 / (4.0 * p.r);
        let encl = p.l_half / (4.0 * p.r);
        let oracle = [
            0.9_f64.cos() * x,
            0.9_f64.sin() * yy,
            x,
            yy,
            enc * x + encl * yy,
            enc * x - encl * yy,
        ];
        for i in 0..6 {
            assert_relative_eq!(y[i], oracle[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn linearization_stacks_the_window() {
        let p = VehicleParams::default();
        let x_eq = VehicleState::new(0.5, 1.0, 2.0);
        let m = attacker_linearize(&x_eq, &p, 20).unwrap();
        assert_eq!(m.horizon.h.nrows(), 120);
        assert_eq!(m.horizon.h.ncols(), 3);
        assert_eq!(m.horizon.n, 3);
        // first-column theta sensitivities
        assert_relative_eq!(m.c[(0, 0)], -0.5_f64.sin() * 1.0, epsilon = 1e-14);
        assert_relative_eq!(m.c[(1, 0)], 0.5_f64.cos() * 2.0, epsilon = 1e-14);
    }

    #[test]
    fn degenerate_pose_is_rejected() {
        let p = VehicleParams::default();
        let x_eq = VehicleState::new(0.0, 0.0, 0.0);
        let err = attacker_linearize(&x_eq, &p, 20).unwrap_err();
        assert!(matches!(err, Error::WindowNotObservable { .. }));
    }

    #[test]
    fn figure8_reference_is_continuous() {
        let speed = 0.25;
        let mut prev = PathKind::Figure8.reference(0.0, speed).0;
        let mut t = 0.0;
        while t < 4.0 * std::f64::consts::PI / speed {
            t += 0.01;
            let (z, dz) = PathKind::Figure8.reference(t, speed);
            assert!((z - prev).norm() < 2.0 * speed * 0.01 + 1e-9, "jump at t = {t}");
            assert_relative_eq!(dz.norm(), speed, epsilon = 1e-9);
            prev = z;
        }
    }

    #[test]
    fn no_attack_run_tracks_and_stays_quiet() {
        let mut config = VehicleScenarioConfig::new(PathKind::Line, AttackKind::None, 3);
        config.duration = 8.0;
        config.attack_start = 6.0;
        let trace = run_vehicle_scenario(&config).unwrap();
        assert!(!trace.diverged);
        assert_eq!(trace.rows.len(), 800);
        assert!(trace.rows.iter().all(|r| !r.alarm));
        let dev = trace.deviations(&config);
        let tail = &dev[600..];
        assert!(tail.iter().all(|&d| d <= 0.05), "late deviation up to {:?}", tail.iter().cloned().fold(0.0, f64::max));
    }

    #[test]
    #[ignore]
    fn mh_diag() {
        for path in [PathKind::Line, PathKind::Circle, PathKind::Figure8] {
            let config = VehicleScenarioConfig::new(path, AttackKind::Mh, 4);
            let trace = run_vehicle_scenario(&config).unwrap();
            let max_e = trace
                .rows
                .iter()
                .map(|r| r.e3.abs().max(r.e4.abs()))
                .fold(0.0, f64::max);
            let max_res = trace.rows.iter().map(|r| r.residual).fold(0.0, f64::max);
            let dev = trace.deviations(&config);
            let onset = (config.attack_start / config.params.t_s) as usize;
            let nominal = dev[onset / 2..onset].iter().cloned().fold(0.0, f64::max);
            let post = dev[onset..].iter().cloned().fold(0.0, f64::max);
            println!(
                "{path}: max |e| = {max_e:.4}, max residual = {max_res:.4}, nominal = {nominal:.5}, post = {post:.5}, diverged = {}",
                trace.diverged
            );
        }
    }

    #[test]
    fn mh_attack_stays_stealthy_and_biases_the_line_run() {
        let mut config = VehicleScenarioConfig::new(PathKind::Line, AttackKind::Mh, 4);
        config.duration = 16.0;
        let trace = run_vehicle_scenario(&config).unwrap();
        assert!(!trace.diverged);
        assert!(trace.rows.iter().all(|r| r.residual <= config.epsilon() + 1e-9));
        let dev = trace.deviations(&config);
        let nominal: f64 = dev[400..600].iter().cloned().fold(0.0, f64::max);
        let post: f64 = dev[1200..].iter().cloned().fold(0.0, f64::max);
        assert!(
            post >= 3.0 * nominal.max(1e-3),
            "post-attack deviation {post} vs nominal {nominal}"
        );
    }
}
