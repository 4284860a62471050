//! Explicit Levi-Civita data of the material metric: the Christoffel
//! form, covariant differentiation along a curve, acceleration, geodesic
//! residual, and parallel transport.
//!
//! For an embedding `phi` and tangent fields `h`, `k` the Christoffel
//! form is
//!
//! ```text
//! Gamma(phi; h, k) = -(h k_x + k h_x) / phi_x,
//! ```
//!
//! symmetric and bilinear in `(h, k)`. The covariant derivative of a
//! field `V` along a curve `gamma` is `V' = dV/dt - Gamma(gamma; V,
//! gamma_t)`, and a geodesic is a curve whose velocity is parallel:
//! `gamma_tt = Gamma(gamma; gamma_t, gamma_t)`.

use crate::error::{Error, Result};
use crate::field::{Configuration, ScalarField, Section};
use crate::metric::{volume_density_unchecked, weighted_inner};
use crate::path::{PathField, PiecewisePath};

/// Pointwise `-(h k_x + k h_x) / phi_x`, assuming slopes already guarded.
fn christoffel_values(phi_x: &[f64], h: &[f64], hx: &[f64], k: &[f64], kx: &[f64]) -> Vec<f64> {
    (0..phi_x.len())
        .map(|i| -(h[i] * kx[i] + k[i] * hx[i]) / phi_x[i])
        .collect()
}

/// Errors unless every nodal `|phi_x|` clears the embedding threshold.
/// The one-sided boundary stencils can degenerate even on a monotone
/// configuration, so this is checked separately from `is_embedding`.
fn guard_slopes(phi_x: &ScalarField, eps: f64) -> Result<()> {
    for (node, &v) in phi_x.values().iter().enumerate() {
        if !(v.abs() >= eps) {
            return Err(Error::NotEmbedding {
                node,
                slope: v,
                threshold: eps,
            });
        }
    }
    Ok(())
}

fn guard_slopes_at(phi_x: &ScalarField, eps: f64, t: f64) -> Result<()> {
    for (node, &v) in phi_x.values().iter().enumerate() {
        if !(v.abs() >= eps) {
            return Err(Error::SingularState {
                t,
                node,
                phi_x: v,
                threshold: eps,
            });
        }
    }
    Ok(())
}

/// The Christoffel form `Gamma(phi; h, k)` as a nodal field.
pub fn christoffel(phi: &Configuration, h: &Section, k: &Section) -> Result<ScalarField> {
    if !phi.field().same_grid(h.field()) || !phi.field().same_grid(k.field()) {
        return Err(Error::GridMismatch);
    }
    phi.require_embedding()?;
    let phi_x = phi.field().diff_x();
    guard_slopes(&phi_x, phi.eps_emb())?;
    let hx = h.field().diff_x();
    let kx = k.field().diff_x();
    Ok(ScalarField::from_raw(
        *phi.grid(),
        christoffel_values(
            phi_x.values(),
            h.values(),
            hx.values(),
            k.values(),
            kx.values(),
        ),
    ))
}

/// Covariant derivative of a per-knot field along the path:
/// `V' = dV/dt - Gamma(gamma; V, gamma_t)` at every knot.
pub fn covariant_derivative_along(path: &PiecewisePath, v: &PathField) -> Result<PathField> {
    v.shape_check(path)?;
    let dvdt = v.time_derivative(path)?;
    let eps = path.eps_emb();
    let mut out = Vec::with_capacity(path.n_segments());
    for (k, seg) in path.segments().iter().enumerate() {
        let mut knots = Vec::with_capacity(seg.n_knots());
        for j in 0..seg.n_knots() {
            let phi_x = seg.config(j).field().diff_x();
            guard_slopes_at(&phi_x, eps, seg.time(j))?;
            let vel = path.velocity_values(k, j);
            let vel_x = vel.diff_x();
            let vj = v.value(k, j);
            let vjx = vj.diff_x();
            let gamma = christoffel_values(
                phi_x.values(),
                vj.values(),
                vjx.values(),
                vel.values(),
                vel_x.values(),
            );
            let d = dvdt.value(k, j);
            let values = d
                .values()
                .iter()
                .zip(gamma.iter())
                .map(|(a, g)| a - g)
                .collect();
            knots.push(ScalarField::from_raw(*path.grid(), values));
        }
        out.push(knots);
    }
    Ok(PathField::from_segments(out))
}

/// Acceleration of the path: the covariant derivative of its velocity.
pub fn acceleration(path: &PiecewisePath) -> Result<PathField> {
    covariant_derivative_along(path, &path.velocity_profile())
}

/// Interior knot range of a segment with `m` knots for residual maxima.
/// Knots within one position of a segment end see differenced one-sided
/// stencil errors and are only first-order pointwise, so they are left
/// out whenever the segment is long enough to afford it.
fn residual_interior(m: usize) -> std::ops::Range<usize> {
    if m >= 7 {
        2..m - 2
    } else {
        1..m - 1
    }
}

/// Largest metric norm of the acceleration over interior knots; zero for
/// a geodesic up to discretization (second order in the time step).
pub fn geodesic_residual(path: &PiecewisePath) -> Result<f64> {
    let accel = acceleration(path)?;
    let mut max_norm = 0.0_f64;
    for (k, seg) in path.segments().iter().enumerate() {
        for j in residual_interior(seg.n_knots()) {
            let phi = seg.config(j);
            let vol = volume_density_unchecked(phi);
            let a = accel.value(k, j);
            let sq = weighted_inner(phi.grid(), vol.values(), a.values(), a.values());
            max_norm = max_norm.max(sq.max(0.0).sqrt());
        }
    }
    Ok(max_norm)
}

/// Sup-norm companion of [`geodesic_residual`], as a diagnostic.
pub fn geodesic_residual_sup(path: &PiecewisePath) -> Result<f64> {
    let accel = acceleration(path)?;
    let mut max_abs = 0.0_f64;
    for (k, seg) in path.segments().iter().enumerate() {
        for j in residual_interior(seg.n_knots()) {
            max_abs = max_abs.max(accel.value(k, j).max_abs());
        }
    }
    Ok(max_abs)
}

/// Parallel transport of `v0` along the path: integrates
/// `dV/dt = Gamma(gamma; V, gamma_t)` with RK4, using midpoint samples of
/// the curve (averaged configurations, difference-quotient velocities)
/// for the interior stages. Sequential in time; returns the transported
/// field at every knot.
pub fn parallel_transport(path: &PiecewisePath, v0: &Section) -> Result<PathField> {
    if !v0.field().same_grid(path.first_config().field()) {
        return Err(Error::GridMismatch);
    }
    let eps = path.eps_emb();
    let grid = *path.grid();

    // Gamma(phi; v, w) with the slope guard folded in.
    let gamma_at = |phi: &ScalarField, t: f64, w: &ScalarField, v: &ScalarField| -> Result<ScalarField> {
        let phi_x = phi.diff_x();
        guard_slopes_at(&phi_x, eps, t)?;
        let wx = w.diff_x();
        let vx = v.diff_x();
        Ok(ScalarField::from_raw(
            grid,
            christoffel_values(phi_x.values(), v.values(), vx.values(), w.values(), wx.values()),
        ))
    };

    let mut current = v0.field().clone();
    let mut out = Vec::with_capacity(path.n_segments());
    for (k, seg) in path.segments().iter().enumerate() {
        let dt = seg.dt();
        let mut knots = Vec::with_capacity(seg.n_knots());
        knots.push(current.clone());
        for j in 0..seg.n_knots() - 1 {
            let phi0 = seg.config(j).field();
            let phi1 = seg.config(j + 1).field();
            let t0 = seg.time(j);
            let t1 = seg.time(j + 1);
            let t_mid = t0 + 0.5 * dt;
            let vel0 = path.velocity_values(k, j);
            let vel1 = path.velocity_values(k, j + 1);
            // Midpoint samples: second-order accurate position average and
            // the centered difference quotient for the velocity.
            let phi_mid = phi0.zip_with(phi1, |a, b| 0.5 * (a + b))?;
            let vel_mid = phi1.zip_with(phi0, |a, b| (a - b) / dt)?;

            let k1 = gamma_at(phi0, t0, &vel0, &current)?;
            let y2 = current.add_scaled(&k1, 0.5 * dt)?;
            let k2 = gamma_at(&phi_mid, t_mid, &vel_mid, &y2)?;
            let y3 = current.add_scaled(&k2, 0.5 * dt)?;
            let k3 = gamma_at(&phi_mid, t_mid, &vel_mid, &y3)?;
            let y4 = current.add_scaled(&k3, dt)?;
            let k4 = gamma_at(phi1, t1, &vel1, &y4)?;

            let next = ScalarField::from_raw(
                grid,
                current
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        v + dt / 6.0
                            * (k1.value(i) + 2.0 * k2.value(i) + 2.0 * k3.value(i) + k4.value(i))
                    })
                    .collect(),
            );
            if let Some(node) = next.values().iter().position(|v| !v.is_finite()) {
                return Err(Error::SingularState {
                    t: t1,
                    node,
                    phi_x: f64::NAN,
                    threshold: eps,
                });
            }
            knots.push(next.clone());
            current = next;
        }
        out.push(knots);
    }
    Ok(PathField::from_segments(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SupportMode;
    use crate::grid::BodyGrid;
    use crate::metric::metric;

    fn grid(n: usize) -> BodyGrid {
        BodyGrid::new(0.0, 1.0, n).unwrap()
    }

    fn config(g: BodyGrid, f: impl Fn(f64) -> f64) -> Configuration {
        Configuration::new(ScalarField::from_fn(g, f).unwrap(), 1e-8).unwrap()
    }

    fn free(g: BodyGrid, f: impl Fn(f64) -> f64) -> Section {
        Section::free(ScalarField::from_fn(g, f).unwrap())
    }

    #[test]
    fn christoffel_vanishes_on_constants() {
        let g = grid(41);
        let phi = config(g, |x| 1.0 + 0.5 * x);
        let h = free(g, |_| 2.0);
        let k = free(g, |_| -0.3);
        assert_eq!(christoffel(&phi, &h, &k).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn christoffel_identity_linear_fields() {
        // Gamma(id; x, x) = -(x*1 + x*1)/1 = -2x, exact at every node
        // because the stencils are exact on affine fields.
        let g = grid(201);
        let phi = config(g, |x| x);
        let h = free(g, |x| x);
        let gam = christoffel(&phi, &h, &h).unwrap();
        for (i, &v) in gam.values().iter().enumerate() {
            assert!((v + 2.0 * g.node(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn christoffel_mixed_example() {
        // Gamma(2x; x, 1) = -(x*0 + 1*1)/2 = -1/2.
        let g = grid(101);
        let phi = config(g, |x| 2.0 * x);
        let h = free(g, |x| x);
        let k = free(g, |_| 1.0);
        let gam = christoffel(&phi, &h, &k).unwrap();
        for &v in gam.values() {
            assert!((v + 0.5).abs() < 1e-13);
        }
    }

    #[test]
    fn christoffel_symmetric_bitwise() {
        let g = grid(64);
        let phi = config(g, |x| x + 0.2 * x * x);
        let h = free(g, |x| (3.1 * x).sin() + 0.4);
        let k = free(g, |x| (1.7 * x).cos() - 0.2 * x);
        let a = christoffel(&phi, &h, &k).unwrap();
        let b = christoffel(&phi, &k, &h).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn christoffel_bilinear() {
        let g = grid(40);
        let phi = config(g, |x| x);
        let h = free(g, |x| x * x);
        let k = free(g, |x| 1.0 - x);
        let scaled = Section::free(h.field().scale(2.5));
        let a = christoffel(&phi, &scaled, &k).unwrap();
        let b = christoffel(&phi, &h, &k).unwrap().scale(2.5);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn covariant_derivative_reduces_to_time_derivative_on_static_path() {
        // gamma constant in t: the Christoffel term vanishes with the
        // velocity, leaving dV/dt. V = sin(x)(1 + t^2) has dV/dt =
        // 2t sin(x), exact because the stencils are exact on quadratics.
        let p = PiecewisePath::sample(grid(31), 1e-8, SupportMode::Free, 0, 0.0, 0.1, 9, |_, x| x)
            .unwrap();
        let v = PathField::from_fn(&p, |t, x| x.sin() * (1.0 + t * t));
        let d = covariant_derivative_along(&p, &v).unwrap();
        for j in 0..9 {
            let t = p.time(0, j);
            for (i, &val) in d.value(0, j).values().iter().enumerate() {
                let exact = 2.0 * t * p.grid().node(i).sin();
                assert!((val - exact).abs() < 1e-12, "knot {j} node {i}");
            }
        }
    }

    #[test]
    fn covariant_derivative_kills_advected_fields() {
        // Along gamma = x + ct, a field advected with the flow,
        // V(t, x) = V0(x - ct), is parallel: V_t + c V_x = 0 and the
        // Christoffel term is -c V_x.
        let c = 0.4;
        let v0 = |y: f64| (2.0 * y).sin();
        let err = |n: usize, m: usize| {
            let p = PiecewisePath::sample(
                BodyGrid::new(0.0, 1.0, n).unwrap(),
                1e-8,
                SupportMode::Free,
                0,
                0.0,
                0.4 / (m - 1) as f64,
                m,
                |t, x| x + c * t,
            )
            .unwrap();
            let v = PathField::from_fn(&p, |t, x| v0(x - c * t));
            let d = covariant_derivative_along(&p, &v).unwrap();
            d.max_abs()
        };
        let e1 = err(51, 11);
        let e2 = err(101, 21);
        assert!(e1 < 2e-3, "coarse advection residual {e1}");
        let ratio = e1 / e2;
        assert!((3.3..4.7).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn acceleration_of_translation_vanishes() {
        let p = PiecewisePath::sample(grid(41), 1e-8, SupportMode::Free, 0, 0.0, 0.05, 21, |t, x| {
            x + 0.3 * t
        })
        .unwrap();
        assert!(acceleration(&p).unwrap().max_abs() < 1e-12);
        assert!(geodesic_residual(&p).unwrap() < 1e-8);
    }

    #[test]
    fn acceleration_of_uniform_push_is_constant() {
        // gamma = x + t^2: gamma_tt = 2 exactly (quadratic in t), and the
        // Christoffel term vanishes because gamma_t is constant in x.
        let p = PiecewisePath::sample(grid(41), 1e-8, SupportMode::Free, 0, 0.0, 0.05, 21, |t, x| {
            x + t * t
        })
        .unwrap();
        let a = acceleration(&p).unwrap();
        for j in 0..21 {
            for &v in a.value(0, j).values() {
                assert!((v - 2.0).abs() < 1e-10);
            }
        }
        // Metric norm of the constant acceleration 2 over B of unit
        // length with |gamma_x| = 1 is sqrt(4) = 2.
        let r = geodesic_residual(&p).unwrap();
        assert!((r - 2.0).abs() < 1e-10);
    }

    #[test]
    fn scaling_path_residual_second_order() {
        let res = |m: usize| {
            let p = PiecewisePath::sample(
                grid(41),
                1e-8,
                SupportMode::Free,
                0,
                0.0,
                1.0 / (m - 1) as f64,
                m,
                |t, x| x * (1.0 + t).powf(1.0 / 3.0),
            )
            .unwrap();
            geodesic_residual(&p).unwrap()
        };
        let e1 = res(26);
        let e2 = res(51);
        let ratio = e1 / e2;
        assert!(e1 < 1e-2);
        assert!((3.3..4.7).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn transport_along_static_path_is_identity() {
        let p = PiecewisePath::sample(grid(31), 1e-8, SupportMode::Free, 0, 0.0, 0.1, 9, |_, x| x)
            .unwrap();
        let v0 = free(*p.grid(), |x| (1.3 * x).cos());
        let tr = parallel_transport(&p, &v0).unwrap();
        for j in 0..9 {
            for (a, b) in tr.value(0, j).values().iter().zip(v0.values()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    /// Cubed-parabola bump: C2 at the support edges, exactly zero outside.
    fn bump3(xi: f64) -> f64 {
        if !(0.0..=1.0).contains(&xi) {
            return 0.0;
        }
        let p = 4.0 * xi * (1.0 - xi);
        p * p * p
    }

    #[test]
    fn transport_along_translation_advects() {
        // Along gamma = x + ct the transport equation is the advection
        // equation dV/dt = -c V_x, whose solution is V0(x - ct). The
        // profile is supported in [0.2, 0.7] and is carried 0.1 to the
        // right, so it never touches the one-sided boundary closures.
        let c = 0.25;
        let v0 = |y: f64| bump3((y - 0.2) / 0.5);
        let err = |n: usize, m: usize| {
            let g = BodyGrid::new(0.0, 1.0, n).unwrap();
            let p = PiecewisePath::sample(
                g,
                1e-8,
                SupportMode::Free,
                0,
                0.0,
                0.4 / (m - 1) as f64,
                m,
                |t, x| x + c * t,
            )
            .unwrap();
            let start = free(g, v0);
            let tr = parallel_transport(&p, &start).unwrap();
            let t_end = p.t_end();
            let last = tr.last();
            last.values()
                .iter()
                .enumerate()
                .map(|(i, &v)| (v - v0(g.node(i) - c * t_end)).abs())
                .fold(0.0_f64, f64::max)
        };
        let e1 = err(201, 101);
        let e2 = err(401, 201);
        assert!(e2 < 5e-4, "transport error {e2}");
        let ratio = e1 / e2;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn transport_preserves_metric_norm_of_compact_fields() {
        // Metric compatibility: the norm of a transported field with
        // interior support is constant; the discrete drift shrinks at
        // second order. (The support must stay clear of the body ends:
        // the scaling flow stretches it from [0.3, 0.7] to about
        // [0.38, 0.89] over the run.)
        let drift = |n: usize, m: usize| {
            let g = BodyGrid::new(0.0, 1.0, n).unwrap();
            let p = PiecewisePath::sample(
                g,
                1e-8,
                SupportMode::Free,
                0,
                0.0,
                1.0 / (m - 1) as f64,
                m,
                |t, x| x * (1.0 + t).powf(1.0 / 3.0),
            )
            .unwrap();
            let v0 = Section::compact(
                ScalarField::from_fn(g, |x| 0.5 * bump3((x - 0.3) / 0.4)).unwrap(),
                1,
            )
            .unwrap();
            let tr = parallel_transport(&p, &v0).unwrap();
            let norm_at = |j: usize| {
                let phi = p.config(0, j);
                let s = Section::compact(tr.value(0, j).clone(), 1).unwrap();
                metric(phi, &s, &s).unwrap()
            };
            let n0 = norm_at(0);
            let nf = norm_at(m - 1);
            ((nf - n0) / n0).abs()
        };
        let d1 = drift(101, 51);
        let d2 = drift(201, 101);
        assert!(d1 < 2e-3, "norm drift {d1}");
        let ratio = d1 / d2;
        assert!((3.3..4.7).contains(&ratio), "ratio {ratio}");
    }
}
