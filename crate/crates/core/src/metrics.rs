//! Sweeping-area error on occupancy grids, and per-phase force summaries.
//!
//! The sweep error of a sequence of footprints is
//! `λ = |union \ final| / |final|`: the area the body passed over but no longer
//! covers, relative to the area it covers at the end.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::environment::{CheckpointLabel, PhaseLabel};
use crate::error::{Error, Result};
use crate::geometry::ChainFrames;

/// Cell centres within this fraction of a cell of an outline count as inside,
/// so boundary ties rasterize the same way from every segment.
const TIE: f64 = 1e-6;

/// Orthographic projection onto a plane spanned by `u` and `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub origin: Vector3<f64>,
    pub u: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl Projection {
    pub fn new(origin: Vector3<f64>, u: Vector3<f64>, v: Vector3<f64>) -> Result<Self> {
        let u = u.try_normalize(1e-12).ok_or_else(|| Error::Domain("zero projection axis".into()))?;
        let v = v - u * u.dot(&v);
        let v = v
            .try_normalize(1e-12)
            .ok_or_else(|| Error::Domain("projection axes are parallel".into()))?;
        Ok(Self { origin, u, v })
    }

    /// The plane of largest spread of `points` (principal components). `u` is
    /// the main direction, oriented from the first point towards the last.
    pub fn dominant_plane(points: &[Vector3<f64>]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Domain("need at least two points for a projection plane".into()));
        }
        let n = points.len() as f64;
        let mean = points.iter().sum::<Vector3<f64>>() / n;
        let cov = points
            .iter()
            .map(|p| (p - mean) * (p - mean).transpose())
            .sum::<Matrix3<f64>>()
            / n;
        let eig = cov.symmetric_eigen();
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut u: Vector3<f64> = eig.eigenvectors.column(idx[0]).into_owned();
        let mut v: Vector3<f64> = eig.eigenvectors.column(idx[1]).into_owned();
        let span = points[points.len() - 1] - points[0];
        if u.dot(&span) < 0.0 {
            u = -u;
        }
        // keep the lateral axis pointing to the side the path leans towards
        let lean: f64 = points.iter().map(|p| v.dot(&(p - mean))).map(|x| x * x * x).sum();
        if lean < 0.0 {
            v = -v;
        }
        if eig.eigenvalues[idx[1]] <= 1e-18 * eig.eigenvalues[idx[0]].max(1e-300) {
            // a straight line: any plane through it will do, pick one by the world axes
            let helper = if u.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
            v = helper - u * u.dot(&helper);
        }
        Self::new(points[0], u, v)
    }

    pub fn project(&self, p: &Vector3<f64>) -> Vector2<f64> {
        let d = p - self.origin;
        Vector2::new(self.u.dot(&d), self.v.dot(&d))
    }
}

/// Binary raster with cell `(i, j)` covering
/// `origin + [i, i+1)·resolution × [j, j+1)·resolution`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    origin: Vector2<f64>,
    resolution: f64,
    nx: usize,
    ny: usize,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(origin: Vector2<f64>, resolution: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::Domain(format!("grid resolution must be positive, got {resolution}")));
        }
        Ok(Self {
            origin,
            resolution,
            nx,
            ny,
            cells: vec![false; nx * ny],
        })
    }

    /// Smallest grid aligned to `resolution` covering `[lo, hi]` plus `margin` on every side.
    pub fn covering(lo: Vector2<f64>, hi: Vector2<f64>, margin: f64, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0) {
            return Err(Error::Domain(format!("grid resolution must be positive, got {resolution}")));
        }
        let start = ((lo - Vector2::repeat(margin)) / resolution).map(f64::floor);
        let end = ((hi + Vector2::repeat(margin)) / resolution).map(f64::ceil);
        let size = (end - start).map(|x| x.max(0.0) as usize);
        Self::new(start * resolution, resolution, size.x, size.y)
    }

    pub fn origin(&self) -> Vector2<f64> {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[j * self.nx + i]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Covered area, mm².
    pub fn area(&self) -> f64 {
        self.count() as f64 * self.resolution * self.resolution
    }

    pub fn clear(&mut self) {
        self.cells.fill(false);
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.nx != other.nx || self.ny != other.ny || self.origin != other.origin || self.resolution != other.resolution {
            return Err(Error::Domain("grids differ in shape or placement".into()));
        }
        Ok(())
    }

    pub fn union_with(&mut self, other: &Self) -> Result<()> {
        self.same_shape(other)?;
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a |= *b;
        }
        Ok(())
    }

    /// Cells set here but not in `other`.
    pub fn count_minus(&self, other: &Self) -> Result<usize> {
        self.same_shape(other)?;
        Ok(self.cells.iter().zip(&other.cells).filter(|(a, b)| **a && !**b).count())
    }

    /// Sets every cell whose centre satisfies `inside`, within the box `[lo, hi]`.
    fn fill(&mut self, lo: Vector2<f64>, hi: Vector2<f64>, inside: impl Fn(Vector2<f64>) -> bool) -> Result<()> {
        let r = self.resolution;
        let lo = lo - Vector2::repeat(TIE * r);
        let hi = hi + Vector2::repeat(TIE * r);
        let i0 = ((lo.x - self.origin.x) / r - 0.5).ceil();
        let i1 = ((hi.x - self.origin.x) / r - 0.5).floor();
        let j0 = ((lo.y - self.origin.y) / r - 0.5).ceil();
        let j1 = ((hi.y - self.origin.y) / r - 0.5).floor();
        if i1 < i0 || j1 < j0 {
            return Ok(());
        }
        if i0 < 0.0 || j0 < 0.0 || i1 >= self.nx as f64 || j1 >= self.ny as f64 {
            let bad = if i0 < 0.0 || j0 < 0.0 { lo } else { hi };
            return Err(Error::GridTooSmall { x: bad.x, y: bad.y });
        }
        for j in j0 as usize..=j1 as usize {
            let y = self.origin.y + (j as f64 + 0.5) * r;
            for i in i0 as usize..=i1 as usize {
                let x = self.origin.x + (i as f64 + 0.5) * r;
                if inside(Vector2::new(x, y)) {
                    self.cells[j * self.nx + i] = true;
                }
            }
        }
        Ok(())
    }

    /// Marks a band of half-width `w` around the segment `a`–`b` (flat ends).
    pub fn fill_band(&mut self, a: Vector2<f64>, b: Vector2<f64>, w: f64) -> Result<()> {
        let d = b - a;
        let len2 = d.norm_squared();
        if len2 <= 1e-24 {
            return self.fill_disk(a, w);
        }
        let normal = Vector2::new(-d.y, d.x) * (w / len2.sqrt());
        let corners = [a + normal, a - normal, b + normal, b - normal];
        let lo = corners.iter().fold(Vector2::repeat(f64::INFINITY), |m, c| m.inf(c));
        let hi = corners.iter().fold(Vector2::repeat(f64::NEG_INFINITY), |m, c| m.sup(c));
        let len = len2.sqrt();
        let eps = TIE * self.resolution;
        let t_eps = eps / len;
        self.fill(lo, hi, |p| {
            let q = p - a;
            let t = q.dot(&d) / len2;
            let lateral = (q.x * d.y - q.y * d.x).abs() / len;
            (-t_eps..=1.0 + t_eps).contains(&t) && lateral <= w + eps
        })
    }

    /// Part of the disk at joint `c` lying past the end of the incoming segment
    /// (direction `d_in`) and before the start of the outgoing one (`d_out`).
    pub fn fill_notch(&mut self, c: Vector2<f64>, d_in: Vector2<f64>, d_out: Vector2<f64>, radius: f64) -> Result<()> {
        let r = Vector2::repeat(radius);
        let eps = TIE * self.resolution;
        let reach = radius + eps;
        let (d_in, d_out) = (d_in.normalize(), d_out.normalize());
        if !(d_in.x.is_finite() && d_out.x.is_finite()) {
            return self.fill_disk(c, radius);
        }
        self.fill(c - r, c + r, |p| {
            let q = p - c;
            q.norm() <= reach && q.dot(&d_in) >= -eps && q.dot(&d_out) <= eps
        })
    }

    pub fn fill_disk(&mut self, c: Vector2<f64>, radius: f64) -> Result<()> {
        let r = Vector2::repeat(radius);
        let reach = radius + TIE * self.resolution;
        self.fill(c - r, c + r, |p| (p - c).norm() <= reach)
    }
}

/// Projected outline of a body: one `seg_length × diameter` rectangle per
/// segment plus the outer wedge of a body-diameter disk at every interior
/// joint, so bent joints have no notches and straight ones add nothing.
pub fn rasterize_footprint(
    chain: &ChainFrames,
    diameter: f64,
    projection: &Projection,
    grid: &mut OccupancyGrid,
) -> Result<()> {
    if chain.points.len() < 2 {
        return Ok(());
    }
    let pts: Vec<_> = chain.points.iter().map(|p| projection.project(p)).collect();
    let w = 0.5 * diameter;
    for s in pts.windows(2) {
        grid.fill_band(s[0], s[1], w)?;
    }
    for s in pts.windows(3) {
        grid.fill_notch(s[1], s[1] - s[0], s[2] - s[1], w)?;
    }
    Ok(())
}

/// `λ = |union \ final| / |final|` over footprints, the last being the final one.
pub fn ftl_error(frames: &[OccupancyGrid]) -> Result<f64> {
    let last = frames.last().ok_or(Error::DegenerateFootprint)?;
    let mut union = last.clone();
    for f in frames {
        union.union_with(f)?;
    }
    let grey = last.count();
    if grey == 0 {
        return Err(Error::DegenerateFootprint);
    }
    Ok(union.count_minus(last)? as f64 / grey as f64)
}

/// Streams footprints into a union without keeping every frame.
#[derive(Debug, Clone)]
pub struct SweepAccumulator {
    union: OccupancyGrid,
    last: OccupancyGrid,
    frames: usize,
    diameter: f64,
    projection: Projection,
}

impl SweepAccumulator {
    /// Grid sized to contain every chain in `chains`.
    pub fn for_chains(
        chains: &[ChainFrames],
        diameter: f64,
        projection: Projection,
        resolution: f64,
    ) -> Result<Self> {
        let mut lo = Vector2::repeat(f64::INFINITY);
        let mut hi = Vector2::repeat(f64::NEG_INFINITY);
        for p in chains.iter().flat_map(|c| &c.points) {
            let q = projection.project(p);
            lo = lo.inf(&q);
            hi = hi.sup(&q);
        }
        if !lo.x.is_finite() {
            lo = Vector2::zeros();
            hi = Vector2::zeros();
        }
        let grid = OccupancyGrid::covering(lo, hi, diameter, resolution)?;
        Ok(Self {
            union: grid.clone(),
            last: grid,
            frames: 0,
            diameter,
            projection,
        })
    }

    pub fn add(&mut self, chain: &ChainFrames) -> Result<()> {
        self.last.clear();
        rasterize_footprint(chain, self.diameter, &self.projection, &mut self.last)?;
        self.union.union_with(&self.last)?;
        self.frames += 1;
        Ok(())
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn union(&self) -> &OccupancyGrid {
        &self.union
    }

    pub fn last(&self) -> &OccupancyGrid {
        &self.last
    }

    pub fn error(&self) -> Result<f64> {
        let grey = self.last.count();
        if grey == 0 {
            return Err(Error::DegenerateFootprint);
        }
        Ok(self.union.count_minus(&self.last)? as f64 / grey as f64)
    }
}

/// λ of a sequence of chain poses, all projected with `projection`.
pub fn sweep_error(chains: &[ChainFrames], diameter: f64, projection: Projection, resolution: f64) -> Result<f64> {
    let mut acc = SweepAccumulator::for_chains(chains, diameter, projection, resolution)?;
    for c in chains {
        acc.add(c)?;
    }
    acc.error()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RunMeta {
    pub scenario: String,
    pub controller: String,
    pub strategy: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceSample {
    pub time_s: f64,
    /// Weight of the sample in time averages, s.
    pub duration: f64,
    pub phase: PhaseLabel,
    pub force: f64,
}

/// Sensor readings of one run, split by checkpoint and by the segment (counted
/// from the tip) passing through the ring.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceTrace {
    pub meta: RunMeta,
    series: BTreeMap<(CheckpointLabel, usize), Vec<ForceSample>>,
}

impl ForceTrace {
    pub fn new(meta: RunMeta) -> Self {
        Self {
            meta,
            series: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, checkpoint: CheckpointLabel, segment: usize, sample: ForceSample) -> Result<()> {
        if !(sample.force >= 0.0) || !(sample.duration >= 0.0) {
            return Err(Error::Domain(format!(
                "force samples must be non-negative, got {} mN over {} s",
                sample.force, sample.duration
            )));
        }
        let series = self.series.entry((checkpoint, segment)).or_default();
        if let Some(prev) = series.last() {
            if sample.time_s <= prev.time_s {
                return Err(Error::Domain(format!(
                    "sample times must increase: {} after {}",
                    sample.time_s, prev.time_s
                )));
            }
        }
        series.push(sample);
        Ok(())
    }

    pub fn series(&self) -> impl Iterator<Item = (&(CheckpointLabel, usize), &Vec<ForceSample>)> {
        self.series.iter()
    }

    /// Largest time-averaged segment force at `checkpoint` during `phase`;
    /// `None` when nothing passed the ring in that phase.
    pub fn phase_peak(&self, phase: PhaseLabel, checkpoint: CheckpointLabel) -> Option<f64> {
        self.series
            .iter()
            .filter(|((c, _), _)| *c == checkpoint)
            .filter_map(|(_, samples)| {
                let (sum, weight, n) = samples
                    .iter()
                    .filter(|s| s.phase == phase)
                    .fold((0.0, 0.0, 0usize), |(f, w, n), s| (f + s.force * s.duration, w + s.duration, n + 1));
                match n {
                    0 => None,
                    _ if weight > 0.0 => Some(sum / weight),
                    _ => {
                        let plain = samples.iter().filter(|s| s.phase == phase).map(|s| s.force).sum::<f64>();
                        Some(plain / n as f64)
                    }
                }
            })
            .reduce(f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SummaryCell {
    /// Every run stayed below the touch threshold.
    NoTouch,
    /// No segment passed the ring in this phase.
    NoData,
    Value { mean: f64, sd: f64 },
}

impl SummaryCell {
    /// Mean force, with no-touch counted as zero.
    pub fn mean(&self) -> Option<f64> {
        match self {
            SummaryCell::NoTouch => Some(0.0),
            SummaryCell::NoData => None,
            SummaryCell::Value { mean, .. } => Some(*mean),
        }
    }

    pub fn render(&self, digits: usize) -> String {
        match self {
            SummaryCell::NoTouch => "NT".into(),
            SummaryCell::NoData => "--".into(),
            SummaryCell::Value { mean, sd } => format!("{}±{}", format_sig(*mean, digits), format_sig(*sd, digits)),
        }
    }
}

impl fmt::Display for SummaryCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(6))
    }
}

/// `x` with `digits` significant digits, without trailing zeros.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let digits = digits.max(1);
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceSummary {
    pub meta: RunMeta,
    pub runs: usize,
    pub cells: BTreeMap<(CheckpointLabel, PhaseLabel), SummaryCell>,
}

impl ForceSummary {
    pub fn cell(&self, checkpoint: CheckpointLabel, phase: PhaseLabel) -> SummaryCell {
        self.cells.get(&(checkpoint, phase)).copied().unwrap_or(SummaryCell::NoData)
    }
}

/// Per phase and checkpoint: each run's peak segment mean, then mean and
/// sample standard deviation over runs. Values under `touch_threshold` in every
/// run collapse to no-touch.
pub fn summarize_forces(traces: &[ForceTrace], touch_threshold: f64) -> Result<ForceSummary> {
    let first = traces
        .first()
        .ok_or_else(|| Error::MismatchedMetadata("no runs to summarise".into()))?;
    if let Some(t) = traces.iter().find(|t| t.meta != first.meta) {
        return Err(Error::MismatchedMetadata(format!(
            "{}/{}/{} mixed with {}/{}/{}",
            first.meta.scenario,
            first.meta.controller,
            first.meta.strategy,
            t.meta.scenario,
            t.meta.controller,
            t.meta.strategy
        )));
    }
    let mut cells = BTreeMap::new();
    for checkpoint in CheckpointLabel::ALL {
        for phase in PhaseLabel::ALL {
            let peaks: Vec<_> = traces.iter().map(|t| t.phase_peak(phase, checkpoint)).collect();
            let cell = if peaks.iter().all(Option::is_none) {
                SummaryCell::NoData
            } else {
                let values: Vec<f64> = peaks.iter().map(|p| p.unwrap_or(0.0)).collect();
                if values.iter().all(|&v| v < touch_threshold) {
                    SummaryCell::NoTouch
                } else {
                    let (mean, sd) = mean_sd(&values);
                    SummaryCell::Value { mean, sd }
                }
            };
            cells.insert((checkpoint, phase), cell);
        }
    }
    Ok(ForceSummary {
        meta: first.meta.clone(),
        runs: traces.len(),
        cells,
    })
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{chain_frames, ChainLayout, Pose};
    use approx::assert_relative_eq;
    use nalgebra::Rotation3;

    fn xz() -> Projection {
        Projection::new(Vector3::zeros(), Vector3::z(), Vector3::x()).unwrap()
    }

    fn chain_from(base: Vector3<f64>, bends: &[Vector2<f64>]) -> ChainFrames {
        let mut layout = ChainLayout::uniform(15.0);
        layout.base = Pose::new(base, Rotation3::identity());
        chain_frames(&layout, bends)
    }

    #[test]
    fn single_segment_is_a_square() {
        let mut g = OccupancyGrid::covering(Vector2::zeros(), Vector2::new(15.0, 0.0), 15.0, 0.1).unwrap();
        rasterize_footprint(&chain_from(Vector3::zeros(), &[]), 15.0, &xz(), &mut g).unwrap();
        let n = g.count() as f64;
        // 150 × 150 cells, plus at most one row or column on each side
        assert!((n - 22_500.0).abs() <= 2.0 * 151.0, "{n}");
    }

    #[test]
    fn empty_chain_is_empty_grid() {
        let mut g = OccupancyGrid::new(Vector2::zeros(), 0.5, 10, 10).unwrap();
        let empty = ChainFrames {
            points: vec![],
            orientations: vec![],
        };
        rasterize_footprint(&empty, 15.0, &xz(), &mut g).unwrap();
        assert_eq!(g.count(), 0);
    }

    #[test]
    fn overlapping_frames_union_is_smaller_than_sum() {
        let a = chain_from(Vector3::zeros(), &[]);
        let b = chain_from(Vector3::new(0.0, 0.0, 5.0), &[]);
        let mut ga = OccupancyGrid::covering(Vector2::zeros(), Vector2::new(20.0, 0.0), 15.0, 0.25).unwrap();
        let mut gb = ga.clone();
        rasterize_footprint(&a, 15.0, &xz(), &mut ga).unwrap();
        rasterize_footprint(&b, 15.0, &xz(), &mut gb).unwrap();
        let sum = ga.count() + gb.count();
        ga.union_with(&gb).unwrap();
        assert!(ga.count() < sum);
    }

    #[test]
    fn single_frame_has_zero_error() {
        let mut g = OccupancyGrid::covering(Vector2::zeros(), Vector2::new(30.0, 0.0), 15.0, 0.1).unwrap();
        rasterize_footprint(&chain_from(Vector3::zeros(), &[Vector2::new(0.1, 0.0)]), 15.0, &xz(), &mut g).unwrap();
        assert_eq!(ftl_error(&[g]).unwrap(), 0.0);
    }

    #[test]
    fn square_moved_by_its_width_has_unit_error() {
        let frames = [chain_from(Vector3::zeros(), &[]), chain_from(Vector3::new(0.0, 0.0, 15.0), &[])];
        let lambda = sweep_error(&frames, 15.0, xz(), 0.1).unwrap();
        assert_relative_eq!(lambda, 1.0, epsilon = 0.01);
    }

    #[test]
    fn empty_final_frame_is_degenerate() {
        let g = OccupancyGrid::new(Vector2::zeros(), 1.0, 4, 4).unwrap();
        assert!(matches!(ftl_error(&[g]), Err(Error::DegenerateFootprint)));
        assert!(matches!(ftl_error(&[]), Err(Error::DegenerateFootprint)));
    }

    #[test]
    fn footprint_outside_grid_fails() {
        let mut g = OccupancyGrid::new(Vector2::zeros(), 1.0, 10, 10).unwrap();
        let r = rasterize_footprint(&chain_from(Vector3::zeros(), &[]), 15.0, &xz(), &mut g);
        assert!(matches!(r, Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn translation_invariance() {
        let bends = [Vector2::new(0.17, 0.0), Vector2::new(0.17, 0.0)];
        let frames: Vec<_> = (0..5)
            .map(|i| chain_from(Vector3::new(0.0, 0.0, 3.0 * i as f64), &bends))
            .collect();
        let a = sweep_error(&frames, 15.0, xz(), 0.1).unwrap();
        let shift = Vector3::new(3.217, 0.0, -1.113);
        let moved: Vec<_> = frames
            .iter()
            .map(|c| ChainFrames {
                points: c.points.iter().map(|p| p + shift).collect(),
                orientations: c.orientations.clone(),
            })
            .collect();
        let b = sweep_error(&moved, 15.0, xz(), 0.1).unwrap();
        assert!((a - b).abs() < 0.01 * a, "{a} vs {b}");
    }

    #[test]
    fn adding_earlier_frames_never_lowers_error() {
        let bends = [Vector2::new(0.17, 0.0)];
        let frames: Vec<_> = (0..6)
            .map(|i| chain_from(Vector3::new(0.5 * i as f64, 0.0, 2.0 * i as f64), &bends))
            .collect();
        let proj = xz();
        let mut prev = 0.0;
        for start in (0..frames.len()).rev() {
            let l = sweep_error(&frames[start..], 15.0, proj, 0.2).unwrap();
            assert!(l >= prev - 1e-12);
            prev = l;
        }
    }

    #[test]
    fn growing_straight_body_has_zero_error() {
        let grown = |pts: &[f64]| ChainFrames {
            points: pts.iter().map(|&z| Vector3::new(0.0, 0.0, z)).collect(),
            orientations: vec![Rotation3::identity(); pts.len()],
        };
        let frames = [grown(&[0.0, 1.5, 16.5]), grown(&[0.0, 15.0, 30.0]), grown(&[0.0, 15.0, 30.0, 45.0])];
        assert_eq!(sweep_error(&frames, 15.0, xz(), 0.1).unwrap(), 0.0);
    }

    #[test]
    fn bent_joint_has_no_notch() {
        let chain = chain_from(Vector3::zeros(), &[Vector2::new(0.8, 0.0)]);
        let mut g = OccupancyGrid::covering(Vector2::new(-20.0, -20.0), Vector2::new(30.0, 30.0), 15.0, 0.1).unwrap();
        rasterize_footprint(&chain, 15.0, &xz(), &mut g).unwrap();
        let joint = xz().project(&chain.points[1]);
        let (i0, j0) = (((joint.x - g.origin().x) / 0.1) as i64, ((joint.y - g.origin().y) / 0.1) as i64);
        // every cell within the body radius of the joint is covered
        for dj in -70..=70_i64 {
            for di in -70..=70_i64 {
                if (di * di + dj * dj) as f64 <= 69.0 * 69.0 {
                    assert!(g.get((i0 + di) as usize, (j0 + dj) as usize), "{di} {dj}");
                }
            }
        }
    }

    #[test]
    fn dominant_plane_of_planar_curve() {
        let chain = chain_from(Vector3::zeros(), &[Vector2::new(0.2, 0.0), Vector2::new(0.2, 0.0)]);
        let p = Projection::dominant_plane(&chain.points).unwrap();
        // the curve lies in x-z, so the normal is ±y
        assert!(p.u.y.abs() < 1e-9 && p.v.y.abs() < 1e-9);
        assert!(p.u.z > 0.0);
    }

    fn sample(t: f64, phase: PhaseLabel, force: f64) -> ForceSample {
        ForceSample {
            time_s: t,
            duration: 1.0,
            phase,
            force,
        }
    }

    fn meta() -> RunMeta {
        RunMeta {
            scenario: "c".into(),
            controller: "ftl".into(),
            strategy: "ES1".into(),
        }
    }

    #[test]
    fn constant_force_over_three_runs() {
        let traces: Vec<_> = (0..3)
            .map(|_| {
                let mut t = ForceTrace::new(meta());
                for i in 0..4 {
                    t.push(CheckpointLabel::Middle, 2, sample(i as f64, PhaseLabel::II, 50.0)).unwrap();
                }
                t
            })
            .collect();
        let s = summarize_forces(&traces, 1.0).unwrap();
        assert_eq!(
            s.cell(CheckpointLabel::Middle, PhaseLabel::II),
            SummaryCell::Value { mean: 50.0, sd: 0.0 }
        );
        assert_eq!(s.cell(CheckpointLabel::Middle, PhaseLabel::II).render(6), "50±0");
        assert_eq!(s.cell(CheckpointLabel::Top, PhaseLabel::II), SummaryCell::NoData);
    }

    #[test]
    fn phase_value_is_max_of_segment_means() {
        let mut t = ForceTrace::new(meta());
        for (seg, f) in [(0, 10.0), (1, 20.0), (2, 30.0)] {
            t.push(CheckpointLabel::Bottom, seg, sample(seg as f64, PhaseLabel::I, f)).unwrap();
            t.push(CheckpointLabel::Bottom, seg, sample(seg as f64 + 10.0, PhaseLabel::I, f)).unwrap();
        }
        assert_eq!(t.phase_peak(PhaseLabel::I, CheckpointLabel::Bottom), Some(30.0));
    }

    #[test]
    fn zero_traces_are_no_touch() {
        let mut t = ForceTrace::new(meta());
        t.push(CheckpointLabel::Top, 0, sample(0.0, PhaseLabel::III, 0.0)).unwrap();
        t.push(CheckpointLabel::Top, 0, sample(1.0, PhaseLabel::III, 0.4)).unwrap();
        let s = summarize_forces(&[t.clone(), t], 1.0).unwrap();
        assert_eq!(s.cell(CheckpointLabel::Top, PhaseLabel::III), SummaryCell::NoTouch);
        assert_eq!(s.cell(CheckpointLabel::Top, PhaseLabel::III).render(6), "NT");
    }

    #[test]
    fn mismatched_runs_rejected() {
        let a = ForceTrace::new(meta());
        let mut m = meta();
        m.strategy = "ES2".into();
        let b = ForceTrace::new(m);
        assert!(matches!(summarize_forces(&[a, b], 1.0), Err(Error::MismatchedMetadata(_))));
    }

    #[test]
    fn trace_rejects_bad_samples() {
        let mut t = ForceTrace::new(meta());
        assert!(t.push(CheckpointLabel::Top, 0, sample(0.0, PhaseLabel::I, -1.0)).is_err());
        t.push(CheckpointLabel::Top, 0, sample(1.0, PhaseLabel::I, 1.0)).unwrap();
        assert!(t.push(CheckpointLabel::Top, 0, sample(1.0, PhaseLabel::I, 1.0)).is_err());
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(123.456789, 4), "123.5");
        assert_eq!(format_sig(0.000123456, 2), "0.00012");
        assert_eq!(format_sig(50.0, 6), "50");
        assert_eq!(format_sig(-2.5, 6), "-2.5");
    }
}
