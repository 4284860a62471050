//! Method-of-lines time integration of the equation of motion.
//!
//! Discretizing the body first reduces the motion PDE
//!
//! ```text
//! gamma_tt = c_F * sigma(x, gamma, gamma_x, t) - 2 gamma_t gamma_xt / gamma_x
//! ```
//!
//! to a system of nodal ODEs, stepped with classical RK4 (default) or a
//! kick-drift-kick leapfrog. `c_F` is the force coefficient, 1 by
//! default; setting it to 2 doubles the forcing term of the PDE.
//!
//! In compact mode both the configuration and the velocity are pinned on
//! the boundary band, carrying it rigidly; in free mode every node
//! evolves, with one-sided stencils at the body ends. Each accepted step
//! is guarded: if any nodal slope `|gamma_x|` falls below the embedding
//! threshold the step is rejected and reported, never clamped.

use crate::error::{Error, Result};
use crate::field::{Configuration, ScalarField, Section, SupportMode};
use crate::grid::BodyGrid;
use crate::metric::{volume_density_unchecked, weighted_inner};
use crate::path::{PathSegment, PiecewisePath};

/// Explicit time-stepping schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Rk4,
    Leapfrog,
}

/// Pointwise force density `sigma(x, phi, phi_x, t)`, identified with the
/// forcing vector field of the equation of motion.
#[derive(Debug, Clone)]
pub enum ForceKind {
    Zero,
    ConstantDensity {
        value: f64,
    },
    SpatialBump {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Densities tabulated on uniform time knots, linearly interpolated
    /// in `t` and clamped outside the table.
    Tabulated {
        t_start: f64,
        dt: f64,
        fields: Vec<ScalarField>,
    },
}

/// A force model: the density plus the coefficient it enters the
/// equation of motion with.
#[derive(Debug, Clone)]
pub struct ForceModel {
    kind: ForceKind,
    coefficient: f64,
}

impl ForceModel {
    pub fn new(kind: ForceKind, coefficient: f64) -> Self {
        Self { kind, coefficient }
    }

    pub fn zero() -> Self {
        Self::new(ForceKind::Zero, 1.0)
    }

    pub fn kind(&self) -> &ForceKind {
        &self.kind
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, ForceKind::Zero)
    }

    /// Evaluates the density at time `t`. Deterministic in its inputs;
    /// the preset densities ignore `phi` and `phi_x` but the signature
    /// admits state-dependent tables.
    pub fn density(
        &self,
        grid: &BodyGrid,
        _phi: &ScalarField,
        _phi_x: &ScalarField,
        t: f64,
    ) -> ScalarField {
        match &self.kind {
            ForceKind::Zero => ScalarField::zeros(*grid),
            ForceKind::ConstantDensity { value } => {
                ScalarField::from_raw(*grid, vec![*value; grid.n_nodes()])
            }
            ForceKind::SpatialBump {
                amplitude,
                center,
                width,
            } => ScalarField::from_raw(
                *grid,
                grid.nodes()
                    .map(|x| {
                        let z = (x - center) / width;
                        amplitude * (-z * z).exp()
                    })
                    .collect(),
            ),
            ForceKind::Tabulated {
                t_start,
                dt,
                fields,
            } => {
                let m = fields.len();
                let pos = ((t - t_start) / dt).clamp(0.0, (m - 1) as f64);
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(m - 1);
                let w = pos - lo as f64;
                fields[lo]
                    .zip_with(&fields[hi], |a, b| (1.0 - w) * a + w * b)
                    .expect("tabulated fields share one grid")
            }
        }
    }

    /// `c_F * sigma`, the forcing term of the nodal ODEs.
    pub fn scaled_density(
        &self,
        grid: &BodyGrid,
        phi: &ScalarField,
        phi_x: &ScalarField,
        t: f64,
    ) -> ScalarField {
        self.density(grid, phi, phi_x, t).scale(self.coefficient)
    }
}

/// Instantaneous state of the flow: time, configuration, velocity.
#[derive(Debug, Clone)]
pub struct State {
    t: f64,
    config: Configuration,
    velocity: Section,
}

impl State {
    pub fn new(t: f64, config: Configuration, velocity: Section) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::NonFiniteBound {
                field: "t",
                value: t,
            });
        }
        if !config.field().same_grid(velocity.field()) {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            t,
            config,
            velocity,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn velocity(&self) -> &Section {
        &self.velocity
    }

    pub fn grid(&self) -> &BodyGrid {
        self.config.grid()
    }

    pub fn mode(&self) -> SupportMode {
        self.velocity.mode()
    }

    pub fn band_width(&self) -> usize {
        self.velocity.band_width()
    }
}

/// Right-hand side of the nodal ODE system at a state.
#[derive(Debug, Clone)]
pub struct Rhs {
    pub d_phi: ScalarField,
    pub d_velocity: ScalarField,
}

/// Evaluates `(d phi, d v) = (v, c_F sigma - 2 v v_x / phi_x)`, zeroing
/// the velocity update on the pinned band in compact mode. Errors with
/// the node index and time if any `|phi_x|` is below the threshold.
pub fn rhs(state: &State, force: &ForceModel) -> Result<Rhs> {
    let phi = state.config().field();
    let eps = state.config().eps_emb();
    let phi_x = phi.diff_x();
    for (node, &s) in phi_x.values().iter().enumerate() {
        if !(s.abs() >= eps) {
            return Err(Error::SingularState {
                t: state.t(),
                node,
                phi_x: s,
                threshold: eps,
            });
        }
    }
    let v = state.velocity().field();
    let v_x = v.diff_x();
    let sigma = force.scaled_density(state.grid(), phi, &phi_x, state.t());
    let mut dv: Vec<f64> = (0..phi.len())
        .map(|i| sigma.value(i) - 2.0 * v.value(i) * v_x.value(i) / phi_x.value(i))
        .collect();
    if state.mode() == SupportMode::Compact {
        let n = dv.len();
        let band = state.band_width();
        for i in (0..band).chain(n - band..n) {
            dv[i] = 0.0;
        }
    }
    Ok(Rhs {
        d_phi: v.clone(),
        d_velocity: ScalarField::from_raw(*state.grid(), dv),
    })
}

fn make_state(template: &State, t: f64, phi: ScalarField, v: ScalarField) -> Result<State> {
    let config = template.config().with_field(phi);
    let velocity = template.velocity().with_field(v)?;
    State::new(t, config, velocity)
}

fn rk4_step(state: &State, force: &ForceModel, dt: f64) -> Result<State> {
    let phi = state.config().field();
    let v = state.velocity().field();
    let t = state.t();

    let k1 = rhs(state, force)?;
    let s2 = make_state(
        state,
        t + 0.5 * dt,
        phi.add_scaled(&k1.d_phi, 0.5 * dt)?,
        v.add_scaled(&k1.d_velocity, 0.5 * dt)?,
    )?;
    let k2 = rhs(&s2, force)?;
    let s3 = make_state(
        state,
        t + 0.5 * dt,
        phi.add_scaled(&k2.d_phi, 0.5 * dt)?,
        v.add_scaled(&k2.d_velocity, 0.5 * dt)?,
    )?;
    let k3 = rhs(&s3, force)?;
    let s4 = make_state(
        state,
        t + dt,
        phi.add_scaled(&k3.d_phi, dt)?,
        v.add_scaled(&k3.d_velocity, dt)?,
    )?;
    let k4 = rhs(&s4, force)?;

    let sixth = dt / 6.0;
    let combine = |y: &ScalarField, a: &ScalarField, b: &ScalarField, c: &ScalarField, d: &ScalarField| {
        ScalarField::from_raw(
            *y.grid(),
            (0..y.len())
                .map(|i| {
                    y.value(i)
                        + sixth * (a.value(i) + 2.0 * b.value(i) + 2.0 * c.value(i) + d.value(i))
                })
                .collect(),
        )
    };
    let phi_new = combine(phi, &k1.d_phi, &k2.d_phi, &k3.d_phi, &k4.d_phi);
    let v_new = combine(v, &k1.d_velocity, &k2.d_velocity, &k3.d_velocity, &k4.d_velocity);
    make_state(state, t + dt, phi_new, v_new)
}

/// Kick-drift-kick leapfrog. The acceleration depends on the velocity,
/// so the closing kick uses one fixed-point refinement of the implicit
/// velocity; the scheme stays second order.
fn leapfrog_step(state: &State, force: &ForceModel, dt: f64) -> Result<State> {
    let phi = state.config().field();
    let v = state.velocity().field();
    let t = state.t();

    let a0 = rhs(state, force)?.d_velocity;
    let v_half = v.add_scaled(&a0, 0.5 * dt)?;
    let phi_new = phi.add_scaled(&v_half, dt)?;
    let t_new = t + dt;

    let half_state = make_state(state, t_new, phi_new.clone(), v_half.clone())?;
    let a_pred = rhs(&half_state, force)?.d_velocity;
    let v_pred = v_half.add_scaled(&a_pred, 0.5 * dt)?;
    let pred_state = make_state(state, t_new, phi_new.clone(), v_pred)?;
    let a1 = rhs(&pred_state, force)?.d_velocity;
    let v_new = v_half.add_scaled(&a1, 0.5 * dt)?;
    make_state(state, t_new, phi_new, v_new)
}

/// One step of the named scheme, with the post-state embedding check.
pub fn step(state: &State, force: &ForceModel, dt: f64, scheme: Scheme) -> Result<State> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::NonPositiveParameter {
            name: "dt",
            value: dt,
        });
    }
    let next = match scheme {
        Scheme::Rk4 => rk4_step(state, force, dt),
        Scheme::Leapfrog => leapfrog_step(state, force, dt),
    }?;
    if let Some((node, slope)) = next.config().embedding_violation() {
        return Err(Error::SingularState {
            t: next.t(),
            node,
            phi_x: slope,
            threshold: next.config().eps_emb(),
        });
    }
    if let Some(node) = next
        .velocity()
        .values()
        .iter()
        .position(|v| !v.is_finite())
    {
        return Err(Error::NonFiniteValue { node });
    }
    Ok(next)
}

/// Per-state diagnostics recorded along a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct Diagnostics {
    pub t: f64,
    /// Kinetic energy `metric(phi, v, v) / 2`.
    pub kinetic: f64,
    /// Boundary energy flux `sign(phi_x) * (v^3 at x_max - v^3 at x_min) / 2`;
    /// for a free-boundary geodesic, `d kinetic/dt + flux -> 0`.
    pub boundary_flux: f64,
    /// Smallest nodal `|phi_x|`, the margin to the embedding threshold.
    pub min_phi_x: f64,
}

pub fn diagnostics_for(state: &State) -> Diagnostics {
    let phi = state.config();
    let vol = volume_density_unchecked(phi);
    let v = state.velocity().values();
    let kinetic = 0.5 * weighted_inner(phi.grid(), vol.values(), v, v);
    let n = v.len();
    let sign = phi.orientation();
    let boundary_flux = 0.5 * sign * (v[n - 1].powi(3) - v[0].powi(3));
    let min_phi_x = vol.values().iter().fold(f64::INFINITY, |m, &x| m.min(x));
    Diagnostics {
        t: state.t(),
        kinetic,
        boundary_flux,
        min_phi_x,
    }
}

/// A completed (or truncated) run: the recorded states and their
/// diagnostics, at uniform `dt`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    states: Vec<State>,
    diagnostics: Vec<Diagnostics>,
    dt: f64,
    scheme: Scheme,
}

impl Trajectory {
    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn diagnostics(&self) -> &[Diagnostics] {
        &self.diagnostics
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn initial_state(&self) -> &State {
        &self.states[0]
    }

    pub fn final_state(&self) -> &State {
        self.states.last().unwrap()
    }

    /// The trajectory as a one-segment path, for the variational and
    /// connection machinery.
    pub fn to_path(&self) -> Result<PiecewisePath> {
        if self.states.len() < 3 {
            return Err(Error::TooFewKnots {
                n_knots: self.states.len(),
            });
        }
        let configs = self.states.iter().map(|s| s.config().clone()).collect();
        let seg = PathSegment::new(self.states[0].t(), self.dt, configs)?;
        let first = &self.states[0];
        PiecewisePath::new(vec![seg], first.mode(), first.band_width())
    }

    /// Per-knot velocity sections of the recorded states (the integrator's
    /// velocities, not re-differenced positions).
    pub fn velocities(&self) -> Vec<&Section> {
        self.states.iter().map(State::velocity).collect()
    }
}

/// Largest relative excursion of the kinetic energy from its initial
/// value over the trajectory. Zero initial energy returns the largest
/// absolute excursion instead.
pub fn relative_energy_drift(traj: &Trajectory) -> f64 {
    let k0 = traj.diagnostics()[0].kinetic;
    let scale = if k0 == 0.0 { 1.0 } else { k0.abs() };
    traj.diagnostics()
        .iter()
        .map(|d| (d.kinetic - k0).abs() / scale)
        .fold(0.0, f64::max)
}

/// Integrated free-boundary energy-balance defect
/// `integral of |d kinetic/dt + flux| dt` over recorded times at or after
/// `t_from`, with the time derivative taken by central differences of the
/// kinetic series (one-sided at the trajectory ends). Converges to zero
/// at second order on a free-mode geodesic.
pub fn flux_balance_defect(traj: &Trajectory, t_from: f64) -> f64 {
    let d = traj.diagnostics();
    let m = d.len();
    if m < 3 {
        return f64::NAN;
    }
    let dt = traj.dt();
    let dk_dt = |j: usize| -> f64 {
        if j == 0 {
            (4.0 * (d[1].kinetic - d[0].kinetic) - (d[2].kinetic - d[0].kinetic)) / (2.0 * dt)
        } else if j == m - 1 {
            (4.0 * (d[m - 1].kinetic - d[m - 2].kinetic)
                - (d[m - 1].kinetic - d[m - 3].kinetic))
                / (2.0 * dt)
        } else {
            (d[j + 1].kinetic - d[j - 1].kinetic) / (2.0 * dt)
        }
    };
    // Trapezoid over the knots with t >= t_from.
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    for (j, diag) in d.iter().enumerate() {
        if diag.t < t_from - 1e-12 {
            continue;
        }
        let val = (dk_dt(j) + diag.boundary_flux).abs();
        if let Some(p) = prev {
            total += 0.5 * (p + val) * dt;
        }
        prev = Some(val);
    }
    total
}

/// Failure of [`simulate`] with the partial trajectory retained for
/// inspection; every recorded state passed the embedding guard.
#[derive(Debug, thiserror::Error)]
#[error("simulation aborted after {} accepted states: {cause}", partial.states().len())]
pub struct SimulationAbort {
    pub partial: Trajectory,
    pub cause: Error,
}

/// Integrates from `init` to `t_end` in uniform steps of `dt` (the
/// horizon is snapped to the nearest whole number of steps), recording
/// diagnostics at every accepted state.
pub fn simulate(
    init: &State,
    force: &ForceModel,
    t_end: f64,
    dt: f64,
    scheme: Scheme,
) -> std::result::Result<Trajectory, SimulationAbort> {
    let fail_now = |cause: Error| SimulationAbort {
        partial: Trajectory {
            states: vec![init.clone()],
            diagnostics: vec![diagnostics_for(init)],
            dt,
            scheme,
        },
        cause,
    };
    if !(dt.is_finite() && dt > 0.0) {
        return Err(fail_now(Error::NonPositiveParameter {
            name: "dt",
            value: dt,
        }));
    }
    let span = t_end - init.t();
    let n_steps = (span / dt).round();
    if !(t_end.is_finite() && span > 0.0) || n_steps < 1.0 {
        return Err(fail_now(Error::InvalidHorizon {
            t_start: init.t(),
            t_end,
        }));
    }
    let n_steps = n_steps as usize;

    let mut states = Vec::with_capacity(n_steps + 1);
    let mut diagnostics = Vec::with_capacity(n_steps + 1);
    states.push(init.clone());
    diagnostics.push(diagnostics_for(init));

    let mut current = init.clone();
    for j in 0..n_steps {
        match step(&current, force, dt, scheme) {
            Ok(mut next) => {
                // Canonical knot times keep recorded output reproducible
                // across step counts.
                next.t = init.t() + (j + 1) as f64 * dt;
                diagnostics.push(diagnostics_for(&next));
                states.push(next.clone());
                current = next;
            }
            Err(cause) => {
                return Err(SimulationAbort {
                    partial: Trajectory {
                        states,
                        diagnostics,
                        dt,
                        scheme,
                    },
                    cause,
                });
            }
        }
    }
    Ok(Trajectory {
        states,
        diagnostics,
        dt,
        scheme,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> BodyGrid {
        BodyGrid::new(0.0, 1.0, n).unwrap()
    }

    fn state(
        g: BodyGrid,
        phi: impl Fn(f64) -> f64,
        v: impl Fn(f64) -> f64,
        mode: SupportMode,
        band: usize,
    ) -> State {
        let config = Configuration::new(ScalarField::from_fn(g, phi).unwrap(), 1e-8).unwrap();
        let raw = ScalarField::from_fn(g, v).unwrap();
        let vel = match mode {
            SupportMode::Free => Section::free(raw),
            SupportMode::Compact => Section::compact(raw, band).unwrap(),
        };
        State::new(0.0, config, vel).unwrap()
    }

    #[test]
    fn rest_state_has_zero_rhs() {
        let s = state(grid(21), |x| x, |_| 0.0, SupportMode::Free, 0);
        let r = rhs(&s, &ForceModel::zero()).unwrap();
        assert_eq!(r.d_phi.max_abs(), 0.0);
        assert_eq!(r.d_velocity.max_abs(), 0.0);
    }

    #[test]
    fn uniform_velocity_has_zero_acceleration() {
        let s = state(grid(21), |x| x + 0.05, |_| 0.7, SupportMode::Free, 0);
        let r = rhs(&s, &ForceModel::zero()).unwrap();
        assert_eq!(r.d_velocity.max_abs(), 0.0);
        assert!((r.d_phi.value(3) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn rhs_matches_scaling_substitution() {
        // phi = x u, v = x u' with u = (1+t)^(1/3): the right side must be
        // x u'' with u'' = -2 u'^2 / u, exactly, because everything is
        // affine in x.
        let t = 0.3_f64;
        let u = (1.0 + t).powf(1.0 / 3.0);
        let up = (1.0 + t).powf(-2.0 / 3.0) / 3.0;
        let upp = -2.0 * up * up / u;
        let g = grid(51);
        let s = state(g, |x| x * u, |x| x * up, SupportMode::Free, 0);
        let r = rhs(&s, &ForceModel::zero()).unwrap();
        for (i, &dv) in r.d_velocity.values().iter().enumerate() {
            assert!((dv - g.node(i) * upp).abs() < 1e-12);
        }
    }

    #[test]
    fn rhs_guards_singular_slopes() {
        let s = state(grid(21), |x| 1e-12 * x, |_| 0.0, SupportMode::Free, 0);
        assert!(matches!(
            rhs(&s, &ForceModel::zero()),
            Err(Error::SingularState { node: 0, .. })
        ));
    }

    #[test]
    fn step_translation_is_exact() {
        let c = 0.4;
        let g = grid(41);
        let mut s = state(g, |x| x, move |_| c, SupportMode::Free, 0);
        for _ in 0..50 {
            s = step(&s, &ForceModel::zero(), 0.02, Scheme::Rk4).unwrap();
        }
        for (i, &p) in s.config().values().iter().enumerate() {
            assert!((p - (g.node(i) + c * 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn step_scaling_is_fourth_order() {
        // phi = x, v = x/3 evolves to x (1+t)^(1/3); RK4 error O(dt^4).
        let run = |dt: f64| {
            let g = grid(41);
            let mut s = state(g, |x| x, |x| x / 3.0, SupportMode::Free, 0);
            let steps = (1.0 / dt).round() as usize;
            for _ in 0..steps {
                s = step(&s, &ForceModel::zero(), dt, Scheme::Rk4).unwrap();
            }
            let u = 2.0_f64.powf(1.0 / 3.0);
            s.config()
                .values()
                .iter()
                .enumerate()
                .map(|(i, &p)| (p - g.node(i) * u).abs())
                .fold(0.0_f64, f64::max)
        };
        let e1 = run(0.02);
        let e2 = run(0.01);
        assert!(e1 < 1e-7, "coarse error {e1}");
        let ratio = e1 / e2;
        assert!((11.0..22.0).contains(&ratio), "RK4 ratio {ratio}");
    }

    #[test]
    fn leapfrog_scaling_is_second_order() {
        let run = |dt: f64| {
            let g = grid(41);
            let mut s = state(g, |x| x, |x| x / 3.0, SupportMode::Free, 0);
            let steps = (1.0 / dt).round() as usize;
            for _ in 0..steps {
                s = step(&s, &ForceModel::zero(), dt, Scheme::Leapfrog).unwrap();
            }
            let u = 2.0_f64.powf(1.0 / 3.0);
            s.config()
                .values()
                .iter()
                .enumerate()
                .map(|(i, &p)| (p - g.node(i) * u).abs())
                .fold(0.0_f64, f64::max)
        };
        let e1 = run(0.02);
        let e2 = run(0.01);
        let ratio = e1 / e2;
        assert!((3.3..4.7).contains(&ratio), "leapfrog ratio {ratio}");
    }

    #[test]
    fn simulate_rest_is_constant() {
        let s = state(grid(21), |x| x, |_| 0.0, SupportMode::Free, 0);
        let traj = simulate(&s, &ForceModel::zero(), 0.5, 0.05, Scheme::Rk4).unwrap();
        assert_eq!(traj.states().len(), 11);
        for d in traj.diagnostics() {
            assert_eq!(d.kinetic, 0.0);
        }
        let last = traj.final_state();
        assert_eq!(last.config().values(), s.config().values());
        assert!((last.t() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn simulate_sign_equivariance() {
        // (-phi, -v) integrates to the negated trajectory, exactly: the
        // right side is odd under the flip and IEEE negation is exact.
        let bump = |x: f64| {
            let s = (std::f64::consts::PI * x).sin();
            0.05 * s * s
        };
        let g = grid(51);
        let s_pos = state(g, |x| x, bump, SupportMode::Compact, 1);
        let s_neg = state(g, |x| -x, move |x| -bump(x), SupportMode::Compact, 1);
        let f = ForceModel::zero();
        let t1 = simulate(&s_pos, &f, 0.2, 0.01, Scheme::Rk4).unwrap();
        let t2 = simulate(&s_neg, &f, 0.2, 0.01, Scheme::Rk4).unwrap();
        for (a, b) in t1.states().iter().zip(t2.states()) {
            for (x, y) in a.config().values().iter().zip(b.config().values()) {
                assert_eq!(*x, -*y);
            }
            for (x, y) in a.velocity().values().iter().zip(b.velocity().values()) {
                assert_eq!(*x, -*y);
            }
        }
    }

    #[test]
    fn simulate_time_reversal_returns_home() {
        let bump = |x: f64| {
            let s = (std::f64::consts::PI * x).sin();
            0.1 * s * s
        };
        let g = grid(101);
        let s0 = state(g, |x| x, bump, SupportMode::Compact, 1);
        let f = ForceModel::zero();
        let fwd = simulate(&s0, &f, 0.5, 1e-3, Scheme::Rk4).unwrap();
        let end = fwd.final_state();
        let back_start = State::new(
            0.0,
            end.config().clone(),
            end.velocity().with_field(end.velocity().field().scale(-1.0)).unwrap(),
        )
        .unwrap();
        let back = simulate(&back_start, &f, 0.5, 1e-3, Scheme::Rk4).unwrap();
        let home = back.final_state();
        let max_err = home
            .config()
            .values()
            .iter()
            .zip(s0.config().values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        assert!(max_err < 1e-9, "round trip error {max_err}");
    }

    #[test]
    fn compressive_ramp_trips_the_guard() {
        // v = -x/3 drives phi = x (1-t)^(1/3) toward a vanishing slope at
        // t = 1; the run must abort with a singular-state error and keep
        // the partial trajectory, every recorded state still embedded.
        let g = grid(51);
        let s = state(g, |x| x, |x| -x / 3.0, SupportMode::Free, 0);
        let err = simulate(&s, &ForceModel::zero(), 1.2, 1e-3, Scheme::Rk4).unwrap_err();
        assert!(matches!(err.cause, Error::SingularState { .. }));
        assert!(err.partial.states().len() > 10);
        let eps = 1e-8;
        for d in err.partial.diagnostics() {
            assert!(d.min_phi_x >= eps);
        }
    }

    #[test]
    fn compact_energy_conservation_smoke() {
        // Gaussian-bump velocity on the identity, zero force: kinetic
        // energy drift stays tiny. The full tolerance study lives in the
        // acceptance suite.
        let g = grid(101);
        let amp = 0.01;
        let s0 = {
            let config = Configuration::new(ScalarField::from_fn(g, |x| x).unwrap(), 1e-8).unwrap();
            let raw = ScalarField::from_fn(g, |x| {
                let z = (x - 0.5) / 0.08;
                amp * (-z * z).exp()
            })
            .unwrap();
            let vel = Section::compact(raw, 1).unwrap();
            State::new(0.0, config, vel).unwrap()
        };
        let traj = simulate(&s0, &ForceModel::zero(), 0.5, 2e-3, Scheme::Rk4).unwrap();
        let k0 = traj.diagnostics()[0].kinetic;
        let drift = traj
            .diagnostics()
            .iter()
            .map(|d| ((d.kinetic - k0) / k0).abs())
            .fold(0.0_f64, f64::max);
        assert!(drift < 1e-4, "relative drift {drift}");
    }

    #[test]
    fn tabulated_force_interpolates() {
        let g = grid(11);
        let f0 = ScalarField::constant(g, 1.0).unwrap();
        let f1 = ScalarField::constant(g, 3.0).unwrap();
        let force = ForceModel::new(
            ForceKind::Tabulated {
                t_start: 0.0,
                dt: 1.0,
                fields: vec![f0, f1],
            },
            1.0,
        );
        let phi = ScalarField::from_fn(g, |x| x).unwrap();
        let phi_x = phi.diff_x();
        let mid = force.density(&g, &phi, &phi_x, 0.5);
        assert!((mid.value(0) - 2.0).abs() < 1e-15);
        let clamped = force.density(&g, &phi, &phi_x, 9.0);
        assert!((clamped.value(0) - 3.0).abs() < 1e-15);
    }
}
