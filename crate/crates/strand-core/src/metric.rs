//! The L2 material metric on the space of configurations and the
//! functionals built from it.
//!
//! For a configuration `phi` and tangent fields `s1`, `s2` the inner
//! product is
//!
//! ```text
//! g(phi)(s1, s2) = integral over B of  s1(x) s2(x) |phi_x(x)| dx,
//! ```
//!
//! the pullback volume density being `|phi_x|` for a one-dimensional body
//! in the line. The flat map sends a section `s` to the covector density
//! `s |phi_x|`; sharp inverts it. Kinetic energy is half the squared
//! metric norm of the velocity, and the energy of a path is the time
//! integral of the kinetic energy.

use crate::error::{Error, Result};
use crate::field::{Configuration, ScalarField, Section};
use crate::grid::BodyGrid;
use crate::path::PiecewisePath;

/// A covector on configuration space represented by its pointwise density
/// `lambda`, pairing with sections by `<lambda, s> = integral lambda s dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovectorDensity {
    field: ScalarField,
}

impl CovectorDensity {
    pub fn new(field: ScalarField) -> Self {
        Self { field }
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    /// `integral lambda(x) s(x) dx`; a compact-mode section contributes
    /// nothing from its boundary band.
    pub fn pairing(&self, s: &Section) -> Result<f64> {
        if !self.field.same_grid(s.field()) {
            return Err(Error::GridMismatch);
        }
        Ok(self.field.mul(s.field())?.integrate())
    }
}

/// Trapezoid rule applied to the product `a * b * w`.
pub(crate) fn weighted_inner(grid: &BodyGrid, w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let n = w.len();
    let mut sum = 0.5 * (a[0] * b[0] * w[0] + a[n - 1] * b[n - 1] * w[n - 1]);
    for i in 1..n - 1 {
        sum += a[i] * b[i] * w[i];
    }
    sum * grid.spacing()
}

/// Pointwise `|phi_x|` without the embedding check.
pub(crate) fn volume_density_unchecked(phi: &Configuration) -> ScalarField {
    phi.field().diff_x().map(f64::abs)
}

fn check_pair(phi: &Configuration, s1: &Section, s2: &Section) -> Result<()> {
    if !phi.field().same_grid(s1.field()) || !phi.field().same_grid(s2.field()) {
        return Err(Error::GridMismatch);
    }
    phi.require_embedding()
}

/// The pullback volume density `|phi_x|`, strictly positive for an
/// embedding.
pub fn volume_density(phi: &Configuration) -> Result<ScalarField> {
    phi.require_embedding()?;
    Ok(volume_density_unchecked(phi))
}

/// The metric `integral s1 s2 |phi_x| dx`. Symmetric and bilinear;
/// invariant under `phi -> -phi`.
pub fn metric(phi: &Configuration, s1: &Section, s2: &Section) -> Result<f64> {
    check_pair(phi, s1, s2)?;
    let vol = volume_density_unchecked(phi);
    Ok(weighted_inner(
        phi.grid(),
        vol.values(),
        s1.values(),
        s2.values(),
    ))
}

/// Kinetic energy `metric(phi, v, v) / 2`.
pub fn kinetic(phi: &Configuration, v: &Section) -> Result<f64> {
    Ok(0.5 * metric(phi, v, v)?)
}

/// Flat map: the covector density `lambda = s |phi_x|`, so that
/// `<flat(phi, s1), s2> = metric(phi, s1, s2)`.
pub fn flat(phi: &Configuration, s: &Section) -> Result<CovectorDensity> {
    if !phi.field().same_grid(s.field()) {
        return Err(Error::GridMismatch);
    }
    phi.require_embedding()?;
    let vol = volume_density_unchecked(phi);
    Ok(CovectorDensity::new(s.field().mul(&vol)?))
}

/// Sharp map: the section `s = lambda / |phi_x|`, inverse of [`flat`].
/// The result carries free support; wrap it if compactness is known.
pub fn sharp(phi: &Configuration, lambda: &CovectorDensity) -> Result<Section> {
    if !phi.field().same_grid(lambda.field()) {
        return Err(Error::GridMismatch);
    }
    phi.require_embedding()?;
    let vol = volume_density_unchecked(phi);
    Ok(Section::free(lambda.field().zip_with(&vol, |l, v| l / v)?))
}

/// Pairing of a pointwise force density with a section against the volume
/// form: `integral sigma s |phi_x| dx`. Equals `metric(phi, X, s)` for the
/// vector field `X` with pointwise values `sigma`.
pub fn force_pairing(sigma: &ScalarField, phi: &Configuration, s: &Section) -> Result<f64> {
    if !phi.field().same_grid(sigma) || !phi.field().same_grid(s.field()) {
        return Err(Error::GridMismatch);
    }
    phi.require_embedding()?;
    let vol = volume_density_unchecked(phi);
    Ok(weighted_inner(
        phi.grid(),
        vol.values(),
        sigma.values(),
        s.values(),
    ))
}

/// Energy of a path: the time-trapezoid of the kinetic energy over each
/// segment, summed. Velocities come from the path's time stencils, one
/// sided at segment ends, so piecewise paths are integrated segment by
/// segment.
///
/// This sits on the hot path of the variational studies, so the velocity
/// stencil, volume density and quadrature are fused into one pass per
/// knot with no intermediate fields. The stencils are the same
/// difference forms as `diff_x` and the path's velocity.
pub fn path_energy(path: &PiecewisePath) -> f64 {
    let grid = path.grid();
    let h = grid.spacing();
    let n = grid.n_nodes();
    let mut total = 0.0;
    for seg in path.segments() {
        let m = seg.n_knots();
        let dt = seg.dt();
        let two_dt = 2.0 * dt;
        let kinetic_at = |j: usize| -> f64 {
            let phi = seg.config(j).field().values();
            // Knot triple and one-sidedness flag for the velocity
            // stencil; the difference forms below are bit-identical to
            // the path's velocity stencils.
            let (fa, fb, fc, one_sided) = if j == 0 {
                (
                    seg.config(0).field().values(),
                    seg.config(1).field().values(),
                    seg.config(2).field().values(),
                    true,
                )
            } else if j == m - 1 {
                (
                    seg.config(m - 1).field().values(),
                    seg.config(m - 2).field().values(),
                    seg.config(m - 3).field().values(),
                    true,
                )
            } else {
                (
                    seg.config(j + 1).field().values(),
                    seg.config(j - 1).field().values(),
                    seg.config(j).field().values(),
                    false,
                )
            };
            // At j = 0 the roles are (f0, f1, f2) and the stencil is
            // (4(f1-f0) - (f2-f0))/2dt; at j = m-1 they are
            // (f_{m-1}, f_{m-2}, f_{m-3}) with the mirrored signs, which
            // is the same expression with (fa, fb) swapped in the
            // differences.
            let vel = |i: usize| {
                if one_sided {
                    if j == 0 {
                        (4.0 * (fb[i] - fa[i]) - (fc[i] - fa[i])) / two_dt
                    } else {
                        (4.0 * (fa[i] - fb[i]) - (fa[i] - fc[i])) / two_dt
                    }
                } else {
                    (fa[i] - fb[i]) / two_dt
                }
            };
            let vol = |i: usize| -> f64 {
                let d = if i == 0 {
                    4.0 * (phi[1] - phi[0]) - (phi[2] - phi[0])
                } else if i == n - 1 {
                    4.0 * (phi[n - 1] - phi[n - 2]) - (phi[n - 1] - phi[n - 3])
                } else {
                    phi[i + 1] - phi[i - 1]
                };
                (d / (2.0 * h)).abs()
            };
            let mut sum = 0.5
                * (vel(0) * vel(0) * vol(0) + vel(n - 1) * vel(n - 1) * vol(n - 1));
            for i in 1..n - 1 {
                let v = vel(i);
                sum += v * v * vol(i);
            }
            0.5 * sum * h
        };
        let mut sum = 0.5 * (kinetic_at(0) + kinetic_at(m - 1));
        for j in 1..m - 1 {
            sum += kinetic_at(j);
        }
        total += sum * dt;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SupportMode;
    use crate::path::PiecewisePath;

    fn grid(n: usize) -> BodyGrid {
        BodyGrid::new(0.0, 1.0, n).unwrap()
    }

    fn config(g: BodyGrid, f: impl Fn(f64) -> f64) -> Configuration {
        Configuration::new(ScalarField::from_fn(g, f).unwrap(), 1e-8).unwrap()
    }

    fn ones(g: BodyGrid) -> Section {
        Section::free(ScalarField::constant(g, 1.0).unwrap())
    }

    #[test]
    fn metric_identity_embedding() {
        let g = grid(101);
        let phi = config(g, |x| x);
        let s = ones(g);
        assert!((metric(&phi, &s, &s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metric_scales_with_volume() {
        // phi = 2x has |phi_x| = 2, so the analytic value is 2.
        let g = grid(101);
        let phi = config(g, |x| 2.0 * x);
        let s = ones(g);
        assert!((metric(&phi, &s, &s).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn metric_quadratic_embedding() {
        // phi = x^2 on (1,2): integral of 2x dx from 1 to 2 is 3. The
        // stencils are exact on quadratics, so only roundoff remains.
        let g = BodyGrid::new(1.0, 2.0, 201).unwrap();
        let phi = config(g, |x| x * x);
        let s = ones(g);
        assert!((metric(&phi, &s, &s).unwrap() - 3.0).abs() < 1e-4);
    }

    #[test]
    fn metric_rejects_non_embedding() {
        let g = grid(11);
        let flat_cfg = config(g, |_| 0.5);
        let s = ones(g);
        assert!(matches!(
            metric(&flat_cfg, &s, &s),
            Err(Error::NotEmbedding { .. })
        ));
    }

    #[test]
    fn metric_rejects_grid_mismatch() {
        let phi = config(grid(11), |x| x);
        let s1 = ones(grid(11));
        let s2 = ones(grid(21));
        assert!(matches!(metric(&phi, &s1, &s2), Err(Error::GridMismatch)));
    }

    #[test]
    fn volume_density_examples() {
        let g = grid(51);
        for &v in volume_density(&config(g, |x| x)).unwrap().values() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        for &v in volume_density(&config(g, |x| -2.0 * x)).unwrap().values() {
            assert!((v - 2.0).abs() < 1e-12);
        }
        let gq = BodyGrid::new(1.0, 2.0, 51).unwrap();
        let vq = volume_density(&config(gq, |x| x * x)).unwrap();
        for (i, &v) in vq.values().iter().enumerate() {
            assert!((v - 2.0 * gq.node(i)).abs() < 1e-11);
        }
    }

    #[test]
    fn kinetic_energy_examples() {
        let g = grid(101);
        let phi = config(g, |x| x);
        let zero = Section::free(ScalarField::zeros(g));
        assert_eq!(kinetic(&phi, &zero).unwrap(), 0.0);

        let c = 0.7;
        let v = Section::free(ScalarField::constant(g, c).unwrap());
        assert!((kinetic(&phi, &v).unwrap() - c * c / 2.0).abs() < 1e-12);

        let v2 = Section::free(v.field().scale(2.0));
        assert!(
            (kinetic(&phi, &v2).unwrap() - 4.0 * kinetic(&phi, &v).unwrap()).abs() < 1e-12
        );
    }

    #[test]
    fn flat_sharp_examples() {
        let g = grid(101);
        let phi = config(g, |x| x);
        let s = ones(g);
        let lam = flat(&phi, &s).unwrap();
        for &v in lam.values() {
            assert!((v - 1.0).abs() < 1e-12);
        }

        let phi2 = config(g, |x| 2.0 * x);
        let lam2 = flat(&phi2, &s).unwrap();
        for &v in lam2.values() {
            assert!((v - 2.0).abs() < 1e-12);
        }

        let lam3 = CovectorDensity::new(ScalarField::constant(g, 3.0).unwrap());
        let s3 = sharp(&phi, &lam3).unwrap();
        for &v in s3.values() {
            assert!((v - 3.0).abs() < 1e-12);
        }

        let zero = CovectorDensity::new(ScalarField::zeros(g));
        assert!(sharp(&phi, &zero).unwrap().field().max_abs() == 0.0);
    }

    #[test]
    fn flat_pairing_reproduces_metric() {
        let g = grid(101);
        let phi = config(g, |x| 1.0 + x + 0.3 * x * x);
        let s1 = Section::free(ScalarField::from_fn(g, |x| (2.0 * x).sin()).unwrap());
        let s2 = Section::free(ScalarField::from_fn(g, |x| 1.0 - x).unwrap());
        let lhs = flat(&phi, &s1).unwrap().pairing(&s2).unwrap();
        let rhs = metric(&phi, &s1, &s2).unwrap();
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn force_pairing_matches_metric_with_section() {
        let g = grid(101);
        let phi = config(g, |x| x + 0.2 * x * x);
        let sigma = ScalarField::from_fn(g, |x| 0.5 + x).unwrap();
        let s = Section::free(ScalarField::from_fn(g, |x| (3.0 * x).cos()).unwrap());
        let x_sigma = Section::free(sigma.clone());
        let lhs = force_pairing(&sigma, &phi, &s).unwrap();
        let rhs = metric(&phi, &x_sigma, &s).unwrap();
        assert!((lhs - rhs).abs() < 1e-13);

        let zero = ScalarField::zeros(g);
        assert_eq!(force_pairing(&zero, &phi, &s).unwrap(), 0.0);

        let one = ScalarField::constant(g, 1.0).unwrap();
        let ones_s = ones(g);
        let id = config(g, |x| x);
        assert!((force_pairing(&one, &id, &ones_s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn path_energy_constant_path_is_zero() {
        let g = grid(31);
        let phi = config(g, |x| x);
        let path = PiecewisePath::sample(
            g,
            1e-8,
            SupportMode::Free,
            0,
            0.0,
            0.1,
            11,
            |_t, x| x,
        )
        .unwrap();
        assert_eq!(path_energy(&path), 0.0);
        drop(phi);
    }

    #[test]
    fn path_energy_translation() {
        // gamma(t, x) = x + v t: kinetic energy is v^2/2 exactly (the
        // integrand is affine in t and x, so both quadratures are exact).
        let g = grid(51);
        let v = 0.4;
        let path = PiecewisePath::sample(
            g,
            1e-8,
            SupportMode::Free,
            0,
            0.0,
            0.05,
            21,
            |t, x| x + v * t,
        )
        .unwrap();
        assert!((path_energy(&path) - v * v / 2.0).abs() < 1e-13);
    }

    #[test]
    fn path_energy_scaling_oracle() {
        // gamma(t, x) = x (1+t)^(1/3) on B = (0,1), t in [0,1]. With
        // u = (1+t)^(1/3): kinetic(t) = (1/2) u'^2 u * integral x^2 dx
        // = (1/54)(1+t)^(-1), so the path energy is ln(2)/54.
        let g = grid(201);
        let path = PiecewisePath::sample(
            g,
            1e-8,
            SupportMode::Free,
            0,
            0.0,
            1e-3,
            1001,
            |t, x| x * (1.0 + t).powf(1.0 / 3.0),
        )
        .unwrap();
        let expected = 2.0_f64.ln() / 54.0;
        let got = path_energy(&path);
        assert!(
            (got - expected).abs() < 5e-7,
            "got {got}, expected {expected}"
        );
    }

    #[test]
    fn path_energy_time_reversal() {
        let g = grid(41);
        let path = PiecewisePath::sample(
            g,
            1e-8,
            SupportMode::Free,
            0,
            0.0,
            0.02,
            51,
            |t, x| x + 0.1 * t * t + 0.05 * (x * (1.0 - x)) * t,
        )
        .unwrap();
        let rev = path.time_reversed();
        let a = path_energy(&path);
        let b = path_energy(&rev);
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}
