//! Nodal scalar fields on a [`BodyGrid`], and the two field flavours the
//! geometry cares about: configurations (embeddings of the body into the
//! line) and sections (tangent data, optionally with compact support).
//!
//! Spatial differentiation is second order: central stencils at interior
//! nodes, one-sided three-point stencils at the two boundary nodes, so the
//! derivative is exact on affine and quadratic fields. Quadrature is the
//! composite trapezoid rule, exact on affine fields.

use crate::error::{Error, Result};
use crate::grid::BodyGrid;

/// A function on the body sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: BodyGrid,
    values: Vec<f64>,
}

impl ScalarField {
    /// Wraps nodal values, checking length and finiteness.
    pub fn new(grid: BodyGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::LengthMismatch {
                expected: grid.n_nodes(),
                actual: values.len(),
            });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { node });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node. `f` must return finite values.
    pub fn from_fn(grid: BodyGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn constant(grid: BodyGrid, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.n_nodes()])
    }

    pub fn zeros(grid: BodyGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_nodes()],
        }
    }

    /// Internal constructor for arithmetic results; skips the finiteness
    /// scan, which is re-done at dynamics guard points.
    pub(crate) fn from_raw(grid: BodyGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_nodes());
        Self { grid, values }
    }

    pub fn grid(&self) -> &BodyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        self.grid == other.grid
    }

    /// Spatial derivative: second-order central differences at interior
    /// nodes, second-order one-sided stencils at the boundary nodes. The
    /// stencils are written in difference form so constant fields map to
    /// exactly zero.
    pub fn diff_x(&self) -> ScalarField {
        let n = self.values.len();
        let h = self.grid.spacing();
        let f = &self.values;
        let mut out = vec![0.0; n];
        out[0] = (4.0 * (f[1] - f[0]) - (f[2] - f[0])) / (2.0 * h);
        for i in 1..n - 1 {
            out[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
        }
        out[n - 1] = (4.0 * (f[n - 1] - f[n - 2]) - (f[n - 1] - f[n - 3])) / (2.0 * h);
        ScalarField::from_raw(self.grid, out)
    }

    /// Composite trapezoid rule over the grid.
    pub fn integrate(&self) -> f64 {
        let n = self.values.len();
        let mut sum = 0.5 * (self.values[0] + self.values[n - 1]);
        for v in &self.values[1..n - 1] {
            sum += v;
        }
        sum * self.grid.spacing()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, a: f64) -> ScalarField {
        self.map(|v| a * v)
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a * b)
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, other: &ScalarField, a: f64) -> Result<ScalarField> {
        self.zip_with(other, |x, y| x + a * y)
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        Ok(ScalarField::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(other.values.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Support convention for sections: `Compact` pins a boundary band of
/// nodes to exactly zero, the discrete stand-in for compactly supported
/// tangent data; `Free` leaves all nodes unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportMode {
    Free,
    Compact,
}

/// A tangent field on the body: nodal values plus a support convention.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    field: ScalarField,
    mode: SupportMode,
    band_width: usize,
}

impl Section {
    pub fn new(field: ScalarField, mode: SupportMode, band_width: usize) -> Result<Self> {
        if mode == SupportMode::Compact {
            if band_width == 0 {
                return Err(Error::ZeroBandWidth);
            }
            let n = field.len();
            if 2 * band_width >= n {
                return Err(Error::BandTooWide {
                    band_width,
                    n_nodes: n,
                });
            }
            for i in (0..band_width).chain(n - band_width..n) {
                if field.value(i) != 0.0 {
                    return Err(Error::CompactSupportViolation {
                        node: i,
                        value: field.value(i),
                    });
                }
            }
        }
        Ok(Self {
            field,
            mode,
            band_width,
        })
    }

    pub fn free(field: ScalarField) -> Self {
        Self {
            field,
            mode: SupportMode::Free,
            band_width: 0,
        }
    }

    /// Builds a compact section by forcing the boundary band to zero.
    pub fn compact(field: ScalarField, band_width: usize) -> Result<Self> {
        let zeroed = zero_band(&field, band_width);
        Self::new(zeroed, SupportMode::Compact, band_width)
    }

    pub fn zeros(grid: BodyGrid, mode: SupportMode, band_width: usize) -> Self {
        Self {
            field: ScalarField::zeros(grid),
            mode,
            band_width,
        }
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn grid(&self) -> &BodyGrid {
        self.field.grid()
    }

    pub fn mode(&self) -> SupportMode {
        self.mode
    }

    pub fn band_width(&self) -> usize {
        self.band_width
    }

    /// Same support convention, new values.
    pub fn with_field(&self, field: ScalarField) -> Result<Self> {
        Self::new(field, self.mode, self.band_width)
    }
}

/// Copy of `field` with `band` nodes at each end set to exactly zero.
pub fn zero_band(field: &ScalarField, band: usize) -> ScalarField {
    let n = field.len();
    let mut values = field.values().to_vec();
    for i in (0..band.min(n)).chain(n.saturating_sub(band)..n) {
        values[i] = 0.0;
    }
    ScalarField::from_raw(*field.grid(), values)
}

/// An embedding candidate: nodal values of a map from the body into the
/// line, together with the threshold below which the discrete slope is
/// treated as a loss of embeddedness.
///
/// Construction does not require the embedding property to hold; the flow
/// can leave the embedding set, and [`Configuration::is_embedding`] is the
/// monitored predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    field: ScalarField,
    eps_emb: f64,
}

impl Configuration {
    pub fn new(field: ScalarField, eps_emb: f64) -> Result<Self> {
        if !(eps_emb.is_finite() && eps_emb > 0.0) {
            return Err(Error::NonPositiveParameter {
                name: "eps_emb",
                value: eps_emb,
            });
        }
        Ok(Self { field, eps_emb })
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn grid(&self) -> &BodyGrid {
        self.field.grid()
    }

    pub fn eps_emb(&self) -> f64 {
        self.eps_emb
    }

    /// First node at which strict monotonicity fails, with the offending
    /// consecutive slope, or `None` if the configuration is an embedding.
    ///
    /// All consecutive slopes must share one sign and have magnitude at
    /// least `eps_emb`; either orientation is accepted.
    pub fn embedding_violation(&self) -> Option<(usize, f64)> {
        let v = self.field.values();
        let h = self.grid().spacing();
        let first = (v[1] - v[0]) / h;
        if !(first.abs() >= self.eps_emb) {
            return Some((0, first));
        }
        let sign = first.signum();
        for i in 1..v.len() - 1 {
            let slope = (v[i + 1] - v[i]) / h;
            if !(slope.abs() >= self.eps_emb) || slope.signum() != sign {
                return Some((i, slope));
            }
        }
        None
    }

    pub fn is_embedding(&self) -> bool {
        self.embedding_violation().is_none()
    }

    /// Error if the configuration is not an embedding.
    pub fn require_embedding(&self) -> Result<()> {
        match self.embedding_violation() {
            None => Ok(()),
            Some((node, slope)) => Err(Error::NotEmbedding {
                node,
                slope,
                threshold: self.eps_emb,
            }),
        }
    }

    /// Orientation of the embedding: +1.0 if increasing, -1.0 if
    /// decreasing (from the first consecutive slope).
    pub fn orientation(&self) -> f64 {
        let v = self.field.values();
        (v[1] - v[0]).signum()
    }

    /// New configuration with the same threshold, shifted values.
    pub fn with_field(&self, field: ScalarField) -> Self {
        Self {
            field,
            eps_emb: self.eps_emb,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> BodyGrid {
        BodyGrid::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn diff_x_exact_on_affine() {
        let f = ScalarField::from_fn(grid(17), |x| 3.0 * x + 1.0).unwrap();
        let d = f.diff_x();
        for &v in d.values() {
            assert!((v - 3.0).abs() < 1e-13, "got {v}");
        }
    }

    #[test]
    fn diff_x_exact_on_quadratics_inside() {
        // Central differences are exact on quadratics; the one-sided
        // boundary stencils are too, but the contract only pins interior.
        let f = ScalarField::from_fn(grid(101), |x| x * x).unwrap();
        let d = f.diff_x();
        for i in 1..100 {
            let x = f.grid().node(i);
            assert!((d.value(i) - 2.0 * x).abs() <= 1e-12);
        }
    }

    #[test]
    fn diff_x_second_order_on_sine() {
        // Richardson ratio: halving h divides the max interior error by ~4.
        let err = |n: usize| {
            let g = BodyGrid::new(0.0, 1.0, n).unwrap();
            let f = ScalarField::from_fn(g, |x| x.sin()).unwrap();
            let d = f.diff_x();
            (1..n - 1)
                .map(|i| (d.value(i) - g.node(i).cos()).abs())
                .fold(0.0_f64, f64::max)
        };
        let e1 = err(51);
        let e2 = err(101);
        let ratio = e1 / e2;
        assert!(
            (3.5..4.5).contains(&ratio),
            "expected second-order decay, ratio {ratio}"
        );
    }

    #[test]
    fn trapezoid_exact_on_affine() {
        let one = ScalarField::constant(grid(7), 1.0).unwrap();
        assert!((one.integrate() - 1.0).abs() < 1e-15);
        let lin = ScalarField::from_fn(grid(7), |x| x).unwrap();
        assert!((lin.integrate() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn trapezoid_quadratic_error_bound() {
        // Analytic integral of x^2 over (0,1) is 1/3; composite trapezoid
        // error is h^2/6 = 1.67e-5 at n = 101.
        let f = ScalarField::from_fn(grid(101), |x| x * x).unwrap();
        assert!((f.integrate() - 1.0 / 3.0).abs() <= 2e-5);
    }

    #[test]
    fn rejects_length_mismatch_and_non_finite() {
        assert!(matches!(
            ScalarField::new(grid(5), vec![0.0; 4]),
            Err(Error::LengthMismatch { expected: 5, actual: 4 })
        ));
        assert!(matches!(
            ScalarField::new(grid(3), vec![0.0, f64::NAN, 1.0]),
            Err(Error::NonFiniteValue { node: 1 })
        ));
    }

    #[test]
    fn embedding_predicate() {
        let id = Configuration::new(ScalarField::from_fn(grid(21), |x| x).unwrap(), 1e-8).unwrap();
        assert!(id.is_embedding());

        // x^3 - x on (-1, 1) is non-monotone: derivative changes sign at
        // +-1/sqrt(3).
        let g = BodyGrid::new(-1.0, 1.0, 41).unwrap();
        let cubic =
            Configuration::new(ScalarField::from_fn(g, |x| x * x * x - x).unwrap(), 1e-8).unwrap();
        assert!(!cubic.is_embedding());

        let dec =
            Configuration::new(ScalarField::from_fn(grid(21), |x| -2.0 * x).unwrap(), 1e-8)
                .unwrap();
        assert!(dec.is_embedding());
        assert_eq!(dec.orientation(), -1.0);
    }

    #[test]
    fn embedding_threshold_is_respected() {
        let shallow =
            Configuration::new(ScalarField::from_fn(grid(11), |x| 1e-3 * x).unwrap(), 1e-2)
                .unwrap();
        assert!(!shallow.is_embedding());
        assert!(matches!(
            shallow.require_embedding(),
            Err(Error::NotEmbedding { node: 0, .. })
        ));
    }

    #[test]
    fn compact_section_band_must_vanish() {
        let f = ScalarField::constant(grid(9), 1.0).unwrap();
        assert!(matches!(
            Section::new(f.clone(), SupportMode::Compact, 1),
            Err(Error::CompactSupportViolation { node: 0, .. })
        ));
        let s = Section::compact(f, 2).unwrap();
        assert_eq!(s.values()[0], 0.0);
        assert_eq!(s.values()[1], 0.0);
        assert_eq!(s.values()[2], 1.0);
        assert_eq!(s.values()[7], 0.0);
        assert_eq!(s.values()[8], 0.0);
    }

    #[test]
    fn compact_band_width_bounds() {
        let f = ScalarField::zeros(grid(5));
        assert!(matches!(
            Section::new(f.clone(), SupportMode::Compact, 0),
            Err(Error::ZeroBandWidth)
        ));
        assert!(matches!(
            Section::new(f, SupportMode::Compact, 3),
            Err(Error::BandTooWide { .. })
        ));
    }
}
