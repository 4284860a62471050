//! Variations of paths, the first variation of the path energy, and the
//! variational residual test for the equation of motion.
//!
//! Variations are additive: `gammabar(t, s) = gamma(t) + s V(t)`, which
//! realizes every variational field exactly in a flat ambient space. The
//! first variation of the energy of a piecewise-smooth path is
//!
//! ```text
//! dE/ds|_0 = - int_a^b g(V, accel) dt
//!            - sum_i g(V(t_i), vel(t_i+) - vel(t_i-))
//!            - g(V(a), vel(a)) + g(V(b), vel(b)),
//! ```
//!
//! with the sum over interior segment boundaries. A path that solves the
//! equation of motion satisfies `dE/ds|_0 = -int g(V, X) dt` for every
//! proper variation; [`motion_residual`] probes that identity with seeded
//! proper variational fields and reports the worst normalized defect.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::connection::acceleration;
use crate::dynamics::ForceModel;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::metric::{path_energy, volume_density_unchecked, weighted_inner};
use crate::path::{PathField, PiecewisePath};

/// An additive variation of a base path with half-width `delta`: the
/// perturbed paths `gamma + s V` are embeddings for the swept sample of
/// `s` values in `[-delta, delta]`.
#[derive(Debug, Clone)]
pub struct Variation {
    base: PiecewisePath,
    field: PathField,
    delta: f64,
    proper: bool,
}

impl Variation {
    /// Builds the variation and sweeps `s` over `{-delta, -delta/2,
    /// delta/2, delta}` for embedding validity; a failure reports the
    /// offending `s`.
    pub fn new(base: PiecewisePath, field: PathField, delta: f64) -> Result<Self> {
        field.shape_check(&base)?;
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::NonPositiveParameter {
                name: "delta",
                value: delta,
            });
        }
        let proper = field.first().max_abs() == 0.0 && field.last().max_abs() == 0.0;
        let var = Self {
            base,
            field,
            delta,
            proper,
        };
        // One endpoint is materialized, which exercises the structural
        // invariants (band pinning, continuity); those do not depend on
        // s, so the remaining sweep points only re-check the embedding
        // predicate, evaluated without building the paths.
        var.perturbed(delta).map_err(|e| match e {
            Error::NotEmbedding { .. } | Error::SingularState { .. } => Error::DeltaTooLarge {
                delta,
                s: delta,
            },
            other => other,
        })?;
        for s in [-delta, -0.5 * delta, 0.5 * delta] {
            if !var.perturbed_is_embedding(s) {
                return Err(Error::DeltaTooLarge { delta, s });
            }
        }
        Ok(var)
    }

    /// The embedding predicate of `gamma + s V` at every knot, evaluated
    /// in place; agrees bitwise with materializing the perturbed path.
    fn perturbed_is_embedding(&self, s: f64) -> bool {
        let h = self.base.grid().spacing();
        for (k, seg) in self.base.segments().iter().enumerate() {
            for j in 0..seg.n_knots() {
                let phi = seg.config(j).values();
                let eps = seg.config(j).eps_emb();
                let v = self.field.value(k, j).values();
                let at = |i: usize| phi[i] + s * v[i];
                let first = (at(1) - at(0)) / h;
                if !(first.abs() >= eps) {
                    return false;
                }
                let sign = first.signum();
                for i in 1..phi.len() - 1 {
                    let slope = (at(i + 1) - at(i)) / h;
                    if !(slope.abs() >= eps) || slope.signum() != sign {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn base(&self) -> &PiecewisePath {
        &self.base
    }

    /// The variational vector field; exactly the field supplied, by the
    /// additive rule.
    pub fn variational_field(&self) -> &PathField {
        &self.field
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Whether the variation is proper (fixed at both endpoint times).
    pub fn is_proper(&self) -> bool {
        self.proper
    }

    /// The perturbed path `gamma + s V`, revalidated.
    pub fn perturbed(&self, s: f64) -> Result<PiecewisePath> {
        self.base.perturbed_by(&self.field, s)
    }

    /// Central finite difference of the path energy in the variation
    /// parameter: `[E(s_h) - E(-s_h)] / (2 s_h)` with `0 < s_h <= delta/2`.
    pub fn energy_derivative_fd(&self, s_h: f64) -> Result<f64> {
        let max = 0.5 * self.delta;
        if !(s_h.is_finite() && s_h > 0.0 && s_h <= max) {
            return Err(Error::InvalidFdStep { s_h, max });
        }
        let plus = path_energy(&self.perturbed(s_h)?);
        let minus = path_energy(&self.perturbed(-s_h)?);
        Ok((plus - minus) / (2.0 * s_h))
    }
}

/// Precomputed first-variation data for one path, reusable across many
/// variational fields.
pub struct FirstVariationEvaluator<'a> {
    path: &'a PiecewisePath,
    accel: PathField,
    vol: Vec<Vec<ScalarField>>,
}

impl<'a> FirstVariationEvaluator<'a> {
    pub fn new(path: &'a PiecewisePath) -> Result<Self> {
        let accel = acceleration(path)?;
        let vol = path
            .segments()
            .iter()
            .map(|seg| {
                seg.configs()
                    .iter()
                    .map(volume_density_unchecked)
                    .collect()
            })
            .collect();
        Ok(Self { path, accel, vol })
    }

    /// Evaluates the first-variation functional on `v`: bulk term, jump
    /// terms over interior segment boundaries, and the two endpoint
    /// terms.
    pub fn evaluate(&self, v: &PathField) -> Result<f64> {
        v.shape_check(self.path)?;
        let grid = self.path.grid();

        let bulk = self.path.integrate_scalar(|k, j| {
            weighted_inner(
                grid,
                self.vol[k][j].values(),
                v.value(k, j).values(),
                self.accel.value(k, j).values(),
            )
        });
        let mut total = -bulk;

        for b in 1..self.path.n_segments() {
            let left = self.path.velocity_values(b - 1, self.path.segments()[b - 1].n_knots() - 1);
            let right = self.path.velocity_values(b, 0);
            let jump = right.sub(&left)?;
            total -= weighted_inner(
                grid,
                self.vol[b][0].values(),
                v.value(b, 0).values(),
                jump.values(),
            );
        }

        let vel_a = self.path.velocity_values(0, 0);
        let last_seg = self.path.n_segments() - 1;
        let last_knot = self.path.segments()[last_seg].n_knots() - 1;
        let vel_b = self.path.velocity_values(last_seg, last_knot);
        total -= weighted_inner(
            grid,
            self.vol[0][0].values(),
            v.first().values(),
            vel_a.values(),
        );
        total += weighted_inner(
            grid,
            self.vol[last_seg][last_knot].values(),
            v.last().values(),
            vel_b.values(),
        );
        Ok(total)
    }
}

/// The first-variation functional of the path energy evaluated on `v`.
pub fn first_variation_rhs(path: &PiecewisePath, v: &PathField) -> Result<f64> {
    FirstVariationEvaluator::new(path)?.evaluate(v)
}

/// A deterministic pseudo-random variational field on the knots of
/// `path`: a sum of three separable modes, each a time window times a
/// spatially compact bump, with seeded amplitudes, normalized to unit
/// max-abs.
///
/// Proper fields use windows `tau (1 - tau) tau^m`, which are exactly
/// zero at both endpoint knots in floating point, so the proper predicate
/// holds bit-exactly.
pub fn seeded_variational_field(
    path: &PiecewisePath,
    seed: u64,
    trial: u32,
    proper: bool,
) -> PathField {
    let mut rng = ChaCha8Rng::seed_from_u64(
        seed ^ (u64::from(trial) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    let coeffs: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (a, b) = (path.t_start(), path.t_end());
    let (x0, len) = (path.grid().x_min(), path.grid().length());
    let pi = std::f64::consts::PI;

    // Separable modes: evaluate the spatial bumps once per node and the
    // windows once per knot, then take outer products.
    let grid = *path.grid();
    let modes: Vec<[f64; 3]> = grid
        .nodes()
        .map(|x| {
            let xi = (x - x0) / len;
            let envelope = (pi * xi).sin().powi(2);
            [
                coeffs[0] * envelope,
                coeffs[1] * envelope * (pi * xi).cos(),
                coeffs[2] * envelope * (2.0 * pi * xi).cos(),
            ]
        })
        .collect();
    let windows = |t: f64| -> [f64; 3] {
        let tau = (t - a) / (b - a);
        let base = if proper { 4.0 * tau * (1.0 - tau) } else { 1.0 };
        [base, base * tau, base * tau * tau]
    };
    let band = match path.mode() {
        crate::field::SupportMode::Compact => path.band_width(),
        crate::field::SupportMode::Free => 0,
    };
    let n = grid.n_nodes();
    let segments = path
        .segments()
        .iter()
        .map(|seg| {
            (0..seg.n_knots())
                .map(|j| {
                    let w = windows(seg.time(j));
                    let values: Vec<f64> = (0..n)
                        .map(|i| {
                            if i < band || i >= n - band {
                                0.0
                            } else {
                                let m = &modes[i];
                                w[0] * m[0] + w[1] * m[1] + w[2] * m[2]
                            }
                        })
                        .collect();
                    ScalarField::from_raw(grid, values)
                })
                .collect()
        })
        .collect();
    let field = PathField::from_segments(segments);
    let max = field.max_abs();
    if max == 0.0 {
        field
    } else {
        field.scale(1.0 / max)
    }
}

/// Worst normalized defect of the variational identity
/// `dE/ds|_0 + int g(V, X) dt = 0` over `trials` seeded proper
/// variational fields. Each defect is normalized by the space-time metric
/// norm of its field; the variation half-width and difference step are
/// chosen from the path's embedding margin.
pub fn motion_residual(
    path: &PiecewisePath,
    force: &ForceModel,
    trials: u32,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    let grid = path.grid();

    // Volume densities and the scaled force density along the path.
    let mut vol: Vec<Vec<ScalarField>> = Vec::with_capacity(path.n_segments());
    let mut forcing: Vec<Vec<ScalarField>> = Vec::with_capacity(path.n_segments());
    let mut margin = f64::INFINITY;
    for seg in path.segments() {
        let mut vol_seg = Vec::with_capacity(seg.n_knots());
        let mut force_seg = Vec::with_capacity(seg.n_knots());
        for j in 0..seg.n_knots() {
            let phi = seg.config(j);
            let phi_x = phi.field().diff_x();
            let v = phi_x.map(f64::abs);
            margin = margin.min(v.values().iter().fold(f64::INFINITY, |m, &x| m.min(x)));
            force_seg.push(force.scaled_density(grid, phi.field(), &phi_x, seg.time(j)));
            vol_seg.push(v);
        }
        vol.push(vol_seg);
        forcing.push(force_seg);
    }

    let mut worst = 0.0_f64;
    for trial in 0..trials {
        let v = seeded_variational_field(path, seed, trial, true);
        let slope_scale = v
            .segment_values()
            .iter()
            .flatten()
            .fold(0.0_f64, |m, f| m.max(f.diff_x().max_abs()));
        let delta = (0.5 * margin / slope_scale.max(1e-12)).min(0.25);
        // The energy is cubic in s, and a margin-sized difference step
        // would let the cubic term swamp the linear identity defect this
        // residual measures. Tying the step to the path's time step makes
        // that bias refine at the same second order as the rest.
        let dt_min = path
            .segments()
            .iter()
            .map(|seg| seg.dt())
            .fold(f64::INFINITY, f64::min);
        let s_h = (0.25 * delta).min(dt_min);

        let var = Variation::new(path.clone(), v, delta)?;
        let lhs = var.energy_derivative_fd(s_h)?;
        let v = var.variational_field();
        let force_term = path.integrate_scalar(|k, j| {
            weighted_inner(
                grid,
                vol[k][j].values(),
                v.value(k, j).values(),
                forcing[k][j].values(),
            )
        });
        let norm_sq = path.integrate_scalar(|k, j| {
            weighted_inner(
                grid,
                vol[k][j].values(),
                v.value(k, j).values(),
                v.value(k, j).values(),
            )
        });
        let norm = norm_sq.max(0.0).sqrt();
        if norm > 0.0 {
            worst = worst.max((lhs + force_term).abs() / norm);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ForceKind;
    use crate::field::SupportMode;
    use crate::grid::BodyGrid;
    use crate::path::PathSegment;

    fn grid(n: usize) -> BodyGrid {
        BodyGrid::new(0.0, 1.0, n).unwrap()
    }

    fn sin_sq(x: f64) -> f64 {
        let s = (std::f64::consts::PI * x).sin();
        s * s
    }

    fn translation_path(n: usize, m: usize, c: f64) -> PiecewisePath {
        PiecewisePath::sample(
            grid(n),
            1e-8,
            SupportMode::Free,
            0,
            0.0,
            1.0 / (m - 1) as f64,
            m,
            move |t, x| x + c * t,
        )
        .unwrap()
    }

    #[test]
    fn zero_field_variation_is_trivial() {
        let p = translation_path(21, 11, 0.2);
        let v = PathField::zeros(&p);
        let var = Variation::new(p.clone(), v, 0.5).unwrap();
        assert!(var.is_proper());
        assert_eq!(var.energy_derivative_fd(0.1).unwrap(), 0.0);
        let pert = var.perturbed(0.3).unwrap();
        for j in 0..11 {
            assert_eq!(pert.config(0, j).values(), p.config(0, j).values());
        }
    }

    #[test]
    fn variational_field_is_exact_and_proper_flag_works() {
        let p = translation_path(21, 11, 0.2);
        // t(1-t) is exactly zero at both endpoint knots.
        let proper = PathField::from_fn(&p, |t, x| 4.0 * t * (1.0 - t) * sin_sq(x));
        let var = Variation::new(p.clone(), proper.clone(), 0.2).unwrap();
        assert!(var.is_proper());
        for j in 0..11 {
            assert_eq!(
                var.variational_field().value(0, j).values(),
                proper.value(0, j).values()
            );
        }

        let improper = PathField::from_fn(&p, |t, x| 0.3 * (1.0 + t) * sin_sq(x));
        let var2 = Variation::new(p, improper, 0.2).unwrap();
        assert!(!var2.is_proper());
    }

    #[test]
    fn oversized_delta_is_reported_with_failing_s() {
        // V_x reaches ~3.7; s V_x over 1 in magnitude destroys
        // monotonicity of x + s V.
        let p = translation_path(41, 11, 0.0);
        let v = PathField::from_fn(&p, |_, x| (2.0 * std::f64::consts::PI * x).sin());
        let err = Variation::new(p, v, 0.5).unwrap_err();
        match err {
            Error::DeltaTooLarge { delta, s } => {
                assert_eq!(delta, 0.5);
                assert!(s.abs() <= 0.5);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn fd_step_must_fit_in_delta() {
        let p = translation_path(21, 11, 0.1);
        let v = PathField::zeros(&p);
        let var = Variation::new(p, v, 0.2).unwrap();
        assert!(matches!(
            var.energy_derivative_fd(0.2),
            Err(Error::InvalidFdStep { .. })
        ));
        assert!(matches!(
            var.energy_derivative_fd(0.0),
            Err(Error::InvalidFdStep { .. })
        ));
    }

    #[test]
    fn first_variation_is_linear_in_the_field() {
        let p = PiecewisePath::sample(
            grid(31),
            1e-8,
            SupportMode::Free,
            0,
            0.0,
            0.05,
            21,
            |t, x| x + t * t * (0.5 + 0.1 * x),
        )
        .unwrap();
        let v1 = PathField::from_fn(&p, |t, x| t.sin() * sin_sq(x));
        let v2 = PathField::from_fn(&p, |t, x| (1.0 - t) * sin_sq(x) * (2.0 * x).cos());
        let ev = FirstVariationEvaluator::new(&p).unwrap();
        let lhs = ev.evaluate(&v1.scale(2.5).add_scaled(&v2, -1.5).unwrap()).unwrap();
        let rhs = 2.5 * ev.evaluate(&v1).unwrap() - 1.5 * ev.evaluate(&v2).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn geodesic_with_proper_field_gives_zero() {
        // On a translation geodesic every first-variation term vanishes
        // (the stencils are exact on affine data), so both the functional
        // and the finite-difference derivative sit at the roundoff floor.
        let p = translation_path(51, 26, 0.3);
        let v = PathField::from_fn(&p, |t, x| 4.0 * t * (1.0 - t) * sin_sq(x));
        let rhs = first_variation_rhs(&p, &v).unwrap();
        assert!(rhs.abs() < 1e-12, "rhs {rhs}");
        let var = Variation::new(p, v, 0.25).unwrap();
        for s_h in [0.12, 0.06, 0.03] {
            let d = var.energy_derivative_fd(s_h).unwrap().abs();
            assert!(d < 1e-8, "fd at {s_h}: {d}");
        }
    }

    #[test]
    fn boundary_terms_on_translation_match_quadrature_oracle() {
        // Non-proper V = (1+t) sin^2(pi x) on gamma = x + ct: the bulk and
        // jump terms vanish identically, leaving
        //   -g(V(a), c) + g(V(b), c) = -c*I + 2c*I = c*I,
        // with I = integral of sin^2 = 1/2 (trapezoid is exact here to
        // roundoff since the integrand is periodic and symmetric).
        let c = 0.3;
        let p = translation_path(101, 21, c);
        let v = PathField::from_fn(&p, |t, x| (1.0 + t) * sin_sq(x));
        let rhs = first_variation_rhs(&p, &v).unwrap();
        assert!((rhs - c * 0.5).abs() < 1e-12, "rhs {rhs}");
    }

    #[test]
    fn jump_term_dominates_on_piecewise_translation() {
        // Two translation segments, speeds 0.2 then -0.1; both pieces are
        // geodesics so only the jump term survives for a proper field:
        //   -g(V(t1), jump) = -(jump) * integral sin^2 = 0.15.
        let g = grid(101);
        let s1 = PathSegment::sample(g, 1e-8, 0.0, 0.01, 51, |t, x| x + 0.2 * t).unwrap();
        let s2 = PathSegment::sample(g, 1e-8, 0.5, 0.01, 51, |t, x| {
            x + 0.1 - 0.1 * (t - 0.5)
        })
        .unwrap();
        let p = PiecewisePath::new(vec![s1, s2], SupportMode::Free, 0).unwrap();
        let v = PathField::from_fn(&p, |t, x| sin_sq(t) * sin_sq(x));
        let rhs = first_variation_rhs(&p, &v).unwrap();
        let expected = -(-0.3) * 0.5;
        assert!((rhs - expected).abs() < 1e-10, "rhs {rhs}");

        // And the finite-difference derivative of the energy agrees.
        let var = Variation::new(p, v, 0.2).unwrap();
        let fd = var.energy_derivative_fd(0.05).unwrap();
        assert!((fd - rhs).abs() < 2e-4, "fd {fd} rhs {rhs}");
    }

    #[test]
    fn fd_matches_rhs_at_second_order_in_s() {
        // Non-geodesic base x + t^2 with a two-mode proper field whose
        // cubic coupling is nonzero: the gap to the first-variation value
        // is e3 * s_h^2 plus a much smaller discretization defect, so
        // halving s_h divides it by ~4.
        let p = PiecewisePath::sample(
            grid(201),
            1e-8,
            SupportMode::Free,
            0,
            0.0,
            2e-3,
            501,
            |t, x| x + t * t,
        )
        .unwrap();
        let v = PathField::from_fn(&p, |t, x| {
            let w = 4.0 * t * (1.0 - t);
            let pi = std::f64::consts::PI;
            w * sin_sq(x) + 0.7 * w * t * t * sin_sq(x) * (pi * x).cos()
        });
        let rhs = first_variation_rhs(&p, &v).unwrap();
        let var = Variation::new(p, v, 0.24).unwrap();
        let gap = |s_h: f64| (var.energy_derivative_fd(s_h).unwrap() - rhs).abs();
        let g1 = gap(0.12);
        let g2 = gap(0.06);
        let ratio = g1 / g2;
        assert!(
            (3.2..4.8).contains(&ratio),
            "expected quadratic decay, got {ratio} ({g1} -> {g2})"
        );
    }

    #[test]
    fn motion_residual_of_geodesic_is_small_and_counterexample_is_not() {
        let p = translation_path(101, 201, 0.3);
        let r = motion_residual(&p, &ForceModel::zero(), 5, 7).unwrap();
        assert!(r < 1e-3, "geodesic residual {r}");

        // The same translation under a nonzero force is not a motion:
        // the residual must be bounded away from zero.
        let force = ForceModel::new(ForceKind::ConstantDensity { value: 0.5 }, 1.0);
        let r_bad = motion_residual(&p, &force, 5, 7).unwrap();
        assert!(r_bad > 0.05, "counterexample residual {r_bad}");
        assert!(r_bad > 50.0 * r);
    }
}
