//! Time-sampled, piecewise-smooth curves of configurations.
//!
//! A [`PiecewisePath`] is an ordered list of segments with uniform time
//! knots. Segment boundaries are structural data: the curve is continuous
//! across them but its velocity may jump, and both one-sided velocities
//! are available there. Time differentiation mirrors the spatial stencils:
//! second-order central differences at interior knots, second-order
//! one-sided stencils at segment ends.

use crate::error::{Error, Result};
use crate::field::{Configuration, ScalarField, Section, SupportMode};
use crate::grid::BodyGrid;

/// One smooth piece of a path: configurations at uniform time knots.
#[derive(Debug, Clone)]
pub struct PathSegment {
    t_start: f64,
    dt: f64,
    configs: Vec<Configuration>,
}

impl PathSegment {
    pub fn new(t_start: f64, dt: f64, configs: Vec<Configuration>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::NonPositiveParameter {
                name: "dt",
                value: dt,
            });
        }
        if !t_start.is_finite() {
            return Err(Error::NonFiniteBound {
                field: "t_start",
                value: t_start,
            });
        }
        if configs.len() < 3 {
            return Err(Error::TooFewKnots {
                n_knots: configs.len(),
            });
        }
        let grid = *configs[0].grid();
        for c in &configs {
            if *c.grid() != grid {
                return Err(Error::GridMismatch);
            }
            c.require_embedding()?;
        }
        Ok(Self {
            t_start,
            dt,
            configs,
        })
    }

    /// Samples `f(t, x)` on `n_knots` uniform knots starting at `t_start`.
    pub fn sample(
        grid: BodyGrid,
        eps_emb: f64,
        t_start: f64,
        dt: f64,
        n_knots: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut configs = Vec::with_capacity(n_knots);
        for j in 0..n_knots {
            let t = t_start + j as f64 * dt;
            let field = ScalarField::from_fn(grid, |x| f(t, x))?;
            configs.push(Configuration::new(field, eps_emb)?);
        }
        Self::new(t_start, dt, configs)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + (self.configs.len() - 1) as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_knots(&self) -> usize {
        self.configs.len()
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t_start + j as f64 * self.dt
    }

    pub fn configs(&self) -> &[Configuration] {
        &self.configs
    }

    pub fn config(&self, j: usize) -> &Configuration {
        &self.configs[j]
    }
}

/// A piecewise-smooth curve of embeddings, with a support convention for
/// the sections derived from it (velocities, accelerations, transported
/// fields).
#[derive(Debug, Clone)]
pub struct PiecewisePath {
    segments: Vec<PathSegment>,
    mode: SupportMode,
    band_width: usize,
}

impl PiecewisePath {
    /// Validates segment times (abutting), continuity of the curve at
    /// shared knots, a common grid, and, in compact mode, that the
    /// boundary band is carried rigidly (bit-exactly constant in time).
    pub fn new(segments: Vec<PathSegment>, mode: SupportMode, band_width: usize) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::EmptyPath);
        }
        let grid = *segments[0].configs()[0].grid();
        for seg in &segments {
            if *seg.configs()[0].grid() != grid {
                return Err(Error::GridMismatch);
            }
        }
        for w in segments.windows(2) {
            let t_end = w[0].t_end();
            let t_start = w[1].t_start();
            if (t_end - t_start).abs() > 1e-9 * (1.0 + t_end.abs()) {
                return Err(Error::SegmentsDoNotAbut { t_end, t_start });
            }
            let left = w[0].configs().last().unwrap().values();
            let right = w[1].configs()[0].values();
            let max_jump = left
                .iter()
                .zip(right.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            let scale = left.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            if max_jump > 1e-12 * scale {
                return Err(Error::DiscontinuousPath {
                    t: t_start,
                    max_jump,
                });
            }
        }
        if mode == SupportMode::Compact {
            if band_width == 0 {
                return Err(Error::ZeroBandWidth);
            }
            let n = grid.n_nodes();
            if 2 * band_width >= n {
                return Err(Error::BandTooWide {
                    band_width,
                    n_nodes: n,
                });
            }
            for (seg_idx, seg) in segments.iter().enumerate() {
                let base = seg.configs()[0].values();
                for c in seg.configs() {
                    for i in (0..band_width).chain(n - band_width..n) {
                        if c.values()[i] != base[i] {
                            return Err(Error::UnpinnedBand {
                                segment: seg_idx,
                                node: i,
                            });
                        }
                    }
                }
            }
        }
        Ok(Self {
            segments,
            mode,
            band_width,
        })
    }

    pub fn single(segment: PathSegment, mode: SupportMode, band_width: usize) -> Result<Self> {
        Self::new(vec![segment], mode, band_width)
    }

    /// One-segment path sampled from `f(t, x)`.
    #[allow(clippy::too_many_arguments)]
    pub fn sample(
        grid: BodyGrid,
        eps_emb: f64,
        mode: SupportMode,
        band_width: usize,
        t_start: f64,
        dt: f64,
        n_knots: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let seg = PathSegment::sample(grid, eps_emb, t_start, dt, n_knots, f)?;
        Self::single(seg, mode, band_width)
    }

    pub fn segments(&self) -> &[PathSegment] {
        &self.segments
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn mode(&self) -> SupportMode {
        self.mode
    }

    pub fn band_width(&self) -> usize {
        self.band_width
    }

    pub fn grid(&self) -> &BodyGrid {
        self.segments[0].configs()[0].grid()
    }

    pub fn eps_emb(&self) -> f64 {
        self.segments[0].configs()[0].eps_emb()
    }

    pub fn t_start(&self) -> f64 {
        self.segments[0].t_start()
    }

    pub fn t_end(&self) -> f64 {
        self.segments.last().unwrap().t_end()
    }

    pub fn total_knots(&self) -> usize {
        self.segments.iter().map(PathSegment::n_knots).sum()
    }

    pub fn config(&self, segment: usize, knot: usize) -> &Configuration {
        self.segments[segment].config(knot)
    }

    pub fn time(&self, segment: usize, knot: usize) -> f64 {
        self.segments[segment].time(knot)
    }

    pub fn first_config(&self) -> &Configuration {
        &self.segments[0].configs()[0]
    }

    pub fn last_config(&self) -> &Configuration {
        self.segments.last().unwrap().configs().last().unwrap()
    }

    /// Velocity at a knot as a section with the path's support convention.
    /// Interior knots use the central stencil; segment ends use one-sided
    /// stencils, so at a shared knot this is the right derivative when
    /// called on the later segment and the left derivative on the earlier.
    pub fn velocity(&self, segment: usize, knot: usize) -> Result<Section> {
        let seg = self
            .segments
            .get(segment)
            .ok_or(Error::KnotOutOfRange { segment, knot })?;
        if knot >= seg.n_knots() {
            return Err(Error::KnotOutOfRange { segment, knot });
        }
        self.wrap_section(self.velocity_values(segment, knot))
    }

    /// Left (earlier-segment) velocity at interior boundary `b`, i.e. at
    /// the shared knot between segments `b - 1` and `b` for `1 <= b`.
    pub fn velocity_left(&self, boundary: usize) -> Result<Section> {
        let seg = &self.segments[boundary - 1];
        self.velocity(boundary - 1, seg.n_knots() - 1)
    }

    /// Right (later-segment) velocity at interior boundary `b`.
    pub fn velocity_right(&self, boundary: usize) -> Result<Section> {
        self.velocity(boundary, 0)
    }

    pub(crate) fn wrap_section(&self, field: ScalarField) -> Result<Section> {
        Section::new(field, self.mode, self.band_width)
    }

    pub(crate) fn velocity_values(&self, segment: usize, knot: usize) -> ScalarField {
        let seg = &self.segments[segment];
        let values = time_stencil(seg.dt(), seg.n_knots(), knot, |j| {
            seg.config(j).field().values()
        });
        ScalarField::from_raw(*self.grid(), values)
    }

    /// Velocities at every knot.
    pub fn velocity_profile(&self) -> PathField {
        PathField {
            segments: self
                .segments
                .iter()
                .enumerate()
                .map(|(k, seg)| {
                    (0..seg.n_knots())
                        .map(|j| self.velocity_values(k, j))
                        .collect()
                })
                .collect(),
        }
    }

    /// Trapezoid-in-time integral over the whole path of a per-knot
    /// scalar. Shared knots contribute once per adjoining segment, each
    /// with weight `dt/2`, which is the segment-by-segment convention.
    pub fn integrate_scalar(&self, mut f: impl FnMut(usize, usize) -> f64) -> f64 {
        let mut total = 0.0;
        for (k, seg) in self.segments.iter().enumerate() {
            let m = seg.n_knots();
            let mut sum = 0.5 * (f(k, 0) + f(k, m - 1));
            for j in 1..m - 1 {
                sum += f(k, j);
            }
            total += sum * seg.dt();
        }
        total
    }

    /// The same curve traversed backwards in time over the same interval.
    pub fn time_reversed(&self) -> PiecewisePath {
        let a = self.t_start();
        let b = self.t_end();
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|seg| {
                let mut configs = seg.configs().to_vec();
                configs.reverse();
                PathSegment {
                    t_start: a + (b - seg.t_end()),
                    dt: seg.dt(),
                    configs,
                }
            })
            .collect();
        PiecewisePath {
            segments,
            mode: self.mode,
            band_width: self.band_width,
        }
    }

    /// The path with every configuration shifted by `s * v`, revalidated.
    pub fn perturbed_by(&self, v: &PathField, s: f64) -> Result<PiecewisePath> {
        v.shape_check(self)?;
        let mut segments = Vec::with_capacity(self.segments.len());
        for (k, seg) in self.segments.iter().enumerate() {
            let configs = seg
                .configs()
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    let shifted = c.field().add_scaled(v.value(k, j), s)?;
                    Ok(c.with_field(shifted))
                })
                .collect::<Result<Vec<_>>>()?;
            segments.push(PathSegment::new(seg.t_start(), seg.dt(), configs)?);
        }
        PiecewisePath::new(segments, self.mode, self.band_width)
    }
}

/// Second-order time stencil at knot `j` of a segment with `m` knots and
/// step `dt`: central in the interior, one-sided at the segment ends.
/// Difference form, so constant-in-time data maps to exactly zero.
fn time_stencil<'a>(
    dt: f64,
    m: usize,
    j: usize,
    fetch: impl Fn(usize) -> &'a [f64],
) -> Vec<f64> {
    let two_dt = 2.0 * dt;
    if j == 0 {
        let (a, b, c) = (fetch(0), fetch(1), fetch(2));
        (0..a.len())
            .map(|i| (4.0 * (b[i] - a[i]) - (c[i] - a[i])) / two_dt)
            .collect()
    } else if j == m - 1 {
        let (a, b, c) = (fetch(m - 1), fetch(m - 2), fetch(m - 3));
        (0..a.len())
            .map(|i| (4.0 * (a[i] - b[i]) - (a[i] - c[i])) / two_dt)
            .collect()
    } else {
        let (a, b) = (fetch(j + 1), fetch(j - 1));
        (0..a.len()).map(|i| (a[i] - b[i]) / two_dt).collect()
    }
}

/// A section-valued function on the knots of a path, stored per segment
/// with both copies of each shared knot.
#[derive(Debug, Clone)]
pub struct PathField {
    segments: Vec<Vec<ScalarField>>,
}

impl PathField {
    /// Samples `f(t, x)` at every knot. In compact mode the boundary band
    /// is forced to exactly zero, matching the support convention of the
    /// path's sections.
    pub fn from_fn(path: &PiecewisePath, f: impl Fn(f64, f64) -> f64) -> PathField {
        let grid = *path.grid();
        let band = match path.mode() {
            SupportMode::Compact => path.band_width(),
            SupportMode::Free => 0,
        };
        let segments = path
            .segments()
            .iter()
            .map(|seg| {
                (0..seg.n_knots())
                    .map(|j| {
                        let t = seg.time(j);
                        let raw = ScalarField::from_raw(
                            grid,
                            grid.nodes().map(|x| f(t, x)).collect(),
                        );
                        crate::field::zero_band(&raw, band)
                    })
                    .collect()
            })
            .collect();
        PathField { segments }
    }

    pub fn zeros(path: &PiecewisePath) -> PathField {
        PathField {
            segments: path
                .segments()
                .iter()
                .map(|seg| {
                    (0..seg.n_knots())
                        .map(|_| ScalarField::zeros(*path.grid()))
                        .collect()
                })
                .collect(),
        }
    }

    pub(crate) fn from_segments(segments: Vec<Vec<ScalarField>>) -> PathField {
        PathField { segments }
    }

    pub fn shape_check(&self, path: &PiecewisePath) -> Result<()> {
        if self.segments.len() != path.n_segments() {
            return Err(Error::ShapeMismatch {
                segment: 0,
                expected: path.n_segments(),
                actual: self.segments.len(),
            });
        }
        for (k, (vals, seg)) in self.segments.iter().zip(path.segments()).enumerate() {
            if vals.len() != seg.n_knots() {
                return Err(Error::ShapeMismatch {
                    segment: k,
                    expected: seg.n_knots(),
                    actual: vals.len(),
                });
            }
            for v in vals {
                if !v.same_grid(seg.configs()[0].field()) {
                    return Err(Error::GridMismatch);
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, segment: usize, knot: usize) -> &ScalarField {
        &self.segments[segment][knot]
    }

    pub fn first(&self) -> &ScalarField {
        &self.segments[0][0]
    }

    pub fn last(&self) -> &ScalarField {
        self.segments.last().unwrap().last().unwrap()
    }

    pub fn segment_values(&self) -> &[Vec<ScalarField>] {
        &self.segments
    }

    pub fn max_abs(&self) -> f64 {
        self.segments
            .iter()
            .flatten()
            .map(ScalarField::max_abs)
            .fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(&ScalarField) -> ScalarField) -> PathField {
        PathField {
            segments: self
                .segments
                .iter()
                .map(|seg| seg.iter().map(&f).collect())
                .collect(),
        }
    }

    pub fn scale(&self, a: f64) -> PathField {
        self.map(|v| v.scale(a))
    }

    pub fn add_scaled(&self, other: &PathField, a: f64) -> Result<PathField> {
        if self.segments.len() != other.segments.len() {
            return Err(Error::ShapeMismatch {
                segment: 0,
                expected: self.segments.len(),
                actual: other.segments.len(),
            });
        }
        let segments = self
            .segments
            .iter()
            .zip(other.segments.iter())
            .map(|(a_seg, b_seg)| {
                if a_seg.len() != b_seg.len() {
                    return Err(Error::ShapeMismatch {
                        segment: 0,
                        expected: a_seg.len(),
                        actual: b_seg.len(),
                    });
                }
                a_seg
                    .iter()
                    .zip(b_seg.iter())
                    .map(|(x, y)| x.add_scaled(y, a))
                    .collect()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PathField { segments })
    }

    /// Per-knot time derivative with the path's stencils (central at
    /// interior knots, one-sided at segment ends).
    pub fn time_derivative(&self, path: &PiecewisePath) -> Result<PathField> {
        self.shape_check(path)?;
        let grid = *path.grid();
        let segments = self
            .segments
            .iter()
            .zip(path.segments())
            .map(|(vals, seg)| {
                let m = seg.n_knots();
                (0..m)
                    .map(|j| {
                        let d = time_stencil(seg.dt(), m, j, |idx| vals[idx].values());
                        ScalarField::from_raw(grid, d)
                    })
                    .collect()
            })
            .collect();
        Ok(PathField { segments })
    }
}
