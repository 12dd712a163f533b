//! Ground-truth confidence maps and part affinity fields.
//!
//! Pixel centres sit at integer coordinates: cell `(col, row)` is evaluated at
//! `p = (col, row)` when the stride is 1. With stride `s` the cell is evaluated
//! at `(col * s + (s - 1) / 2, row * s + (s - 1) / 2)` in image pixels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;
use crate::topology::SkeletonTopology;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("no input planes")]
    EmptyInput,
    #[error("plane dimensions differ: {0:?} vs {1:?}")]
    DimMismatch((usize, usize), (usize, usize)),
    #[error("limb endpoints coincide at ({0}, {1})")]
    DegenerateLimb(f64, f64),
    #[error("person {person} has {got} parts, topology declares {expected}")]
    PartCountMismatch { person: usize, got: usize, expected: usize },
    #[error("person {person} part {part} at ({x}, {y}) is outside the grid and not flagged")]
    OutOfFrame { person: usize, part: usize, x: f64, y: f64 },
    #[error("stride must be at least 1")]
    ZeroStride,
    #[error("field stack has {got} channels, topology needs {expected}")]
    ChannelMismatch { got: usize, expected: usize },
}

/// Beyond this squared normalised distance `exp(-d2)` rounds to 0.0 in f32,
/// so skipping those pixels is exact.
const GAUSSIAN_CUTOFF: f64 = 106.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub out_of_frame: bool,
}

impl Keypoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y, out_of_frame: false }
    }

    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Person {
    /// One entry per topology part; `None` means unlabeled or invisible.
    pub parts: Vec<Option<Keypoint>>,
}

impl Person {
    pub fn annotated(&self) -> impl Iterator<Item = (usize, Keypoint)> + '_ {
        self.parts.iter().enumerate().filter_map(|(j, k)| k.map(|k| (j, k)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub width: usize,
    pub height: usize,
    pub people: Vec<Person>,
}

impl Scene {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, people: Vec::new() }
    }

    pub fn validate(&self, topology: &SkeletonTopology) -> Result<(), FieldError> {
        for (k, person) in self.people.iter().enumerate() {
            if person.parts.len() != topology.num_parts() {
                return Err(FieldError::PartCountMismatch {
                    person: k,
                    got: person.parts.len(),
                    expected: topology.num_parts(),
                });
            }
            for (j, kp) in person.annotated() {
                let inside = kp.x >= 0.0
                    && kp.y >= 0.0
                    && kp.x < self.width as f64
                    && kp.y < self.height as f64;
                if !inside && !kp.out_of_frame {
                    return Err(FieldError::OutOfFrame { person: k, part: j, x: kp.x, y: kp.y });
                }
            }
        }
        Ok(())
    }
}

/// Sampling lattice of a field: grid size plus the image-space stride.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    #[serde(default = "one")]
    pub stride: usize,
}

fn one() -> usize {
    1
}

impl Grid {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, stride: 1 }
    }

    /// Grid covering an image of `width × height` pixels at `stride`.
    pub fn for_image(width: usize, height: usize, stride: usize) -> Result<Self, FieldError> {
        if stride == 0 {
            return Err(FieldError::ZeroStride);
        }
        Ok(Self { width: width.div_ceil(stride), height: height.div_ceil(stride), stride })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn offset(&self) -> f64 {
        (self.stride as f64 - 1.0) / 2.0
    }

    /// Image-space position of a cell centre.
    pub fn cell_center(&self, col: usize, row: usize) -> Point {
        let s = self.stride as f64;
        Point::new(col as f64 * s + self.offset(), row as f64 * s + self.offset())
    }

    /// Image-space point to continuous grid coordinates.
    pub fn to_grid(&self, p: Point) -> Point {
        let s = self.stride as f64;
        Point::new((p.x - self.offset()) / s, (p.y - self.offset()) / s)
    }

    /// Continuous grid coordinates back to image space.
    pub fn to_image(&self, p: Point) -> Point {
        let s = self.stride as f64;
        Point::new(p.x * s + self.offset(), p.y * s + self.offset())
    }

    /// Inclusive cell range whose centres may fall within `[lo, hi]` (image px)
    /// along one axis of length `n`.
    fn span(&self, lo: f64, hi: f64, n: usize) -> Option<(usize, usize)> {
        let s = self.stride as f64;
        let first = ((lo - self.offset()) / s).floor().max(0.0);
        let last = ((hi - self.offset()) / s).ceil().min(n as f64 - 1.0);
        if n == 0 || first > last {
            return None;
        }
        Some((first as usize, last as usize))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarPlane {
    pub grid: Grid,
    pub data: Vec<f32>,
}

impl ScalarPlane {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, data: vec![0.0; grid.len()] }
    }

    pub fn get(&self, col: usize, row: usize) -> f32 {
        self.data[row * self.grid.width + col]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorPlane {
    pub grid: Grid,
    pub x: Vec<f32>,
    pub y: Vec<f32>,
}

impl VectorPlane {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, x: vec![0.0; grid.len()], y: vec![0.0; grid.len()] }
    }

    pub fn get(&self, col: usize, row: usize) -> (f32, f32) {
        let i = row * self.grid.width + col;
        (self.x[i], self.y[i])
    }

    pub fn view(&self) -> PafView<'_> {
        PafView { width: self.grid.width, height: self.grid.height, x: &self.x, y: &self.y }
    }
}

/// Borrowed two-component plane, as read by the line integral.
#[derive(Debug, Clone, Copy)]
pub struct PafView<'a> {
    pub width: usize,
    pub height: usize,
    pub x: &'a [f32],
    pub y: &'a [f32],
}

/// Confidence maps followed by PAF planes, channel-major then row-major.
///
/// Channel `j < J` is the confidence map of part `j`; channel `J + 2c` and
/// `J + 2c + 1` are the x and y components of limb `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldStack {
    pub width: usize,
    pub height: usize,
    pub num_parts: usize,
    pub num_limbs: usize,
    pub topology_hash: u64,
    pub data: Vec<f32>,
}

impl FieldStack {
    pub fn zeros(width: usize, height: usize, topology: &SkeletonTopology) -> Self {
        let channels = topology.total_channels();
        Self {
            width,
            height,
            num_parts: topology.num_parts(),
            num_limbs: topology.num_limbs(),
            topology_hash: topology.hash(),
            data: vec![0.0; channels * width * height],
        }
    }

    pub fn channels(&self) -> usize {
        self.num_parts + 2 * self.num_limbs
    }

    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn channel(&self, ch: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[ch * n..(ch + 1) * n]
    }

    pub fn channel_mut(&mut self, ch: usize) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.data[ch * n..(ch + 1) * n]
    }

    pub fn confidence(&self, part: usize) -> &[f32] {
        self.channel(part)
    }

    pub fn confidence_plane(&self, part: usize) -> ScalarPlane {
        ScalarPlane {
            grid: Grid::new(self.width, self.height),
            data: self.confidence(part).to_vec(),
        }
    }

    pub fn paf(&self, limb: usize) -> PafView<'_> {
        PafView {
            width: self.width,
            height: self.height,
            x: self.channel(self.num_parts + 2 * limb),
            y: self.channel(self.num_parts + 2 * limb + 1),
        }
    }

    /// Mutable x and y planes of one limb.
    pub fn paf_mut(&mut self, limb: usize) -> (&mut [f32], &mut [f32]) {
        let n = self.plane_len();
        let start = (self.num_parts + 2 * limb) * n;
        let (x, y) = self.data[start..start + 2 * n].split_at_mut(n);
        (x, y)
    }

    pub fn check_topology(&self, topology: &SkeletonTopology) -> Result<(), FieldError> {
        if self.channels() != topology.total_channels() {
            return Err(FieldError::ChannelMismatch {
                got: self.channels(),
                expected: topology.total_channels(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderParams {
    /// Confidence peak spread in image pixels.
    pub sigma: f64,
    /// Half-width of the limb band in image pixels.
    pub sigma_limb: f64,
    pub stride: usize,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self { sigma: 7.0, sigma_limb: 8.0, stride: 1 }
    }
}

fn check_sigma(sigma: f64) -> Result<(), FieldError> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(FieldError::NonPositiveSigma(sigma))
    }
}

#[inline]
fn gaussian(p: Point, center: Point, inv_sigma2: f64) -> f32 {
    let d2 = p.distance2(center);
    (-d2 * inv_sigma2).exp() as f32
}

/// Single-person confidence map: `exp(-|p - x|^2 / sigma^2)`.
pub fn confidence_map_person(
    center: Point,
    sigma: f64,
    grid: Grid,
) -> Result<ScalarPlane, FieldError> {
    check_sigma(sigma)?;
    let inv = 1.0 / (sigma * sigma);
    let mut plane = ScalarPlane::zeros(grid);
    for row in 0..grid.height {
        for col in 0..grid.width {
            plane.data[row * grid.width + col] = gaussian(grid.cell_center(col, row), center, inv);
        }
    }
    Ok(plane)
}

/// Pixelwise maximum of per-person maps.
pub fn aggregate_confidence(planes: &[ScalarPlane]) -> Result<ScalarPlane, FieldError> {
    let first = planes.first().ok_or(FieldError::EmptyInput)?;
    let mut out = first.clone();
    for plane in &planes[1..] {
        check_dims(first.grid, plane.grid)?;
        for (o, &v) in out.data.iter_mut().zip(&plane.data) {
            *o = o.max(v);
        }
    }
    Ok(out)
}

fn check_dims(a: Grid, b: Grid) -> Result<(), FieldError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(FieldError::DimMismatch((a.width, a.height), (b.width, b.height)));
    }
    Ok(())
}

/// Limb band geometry shared by the full-plane and windowed renderers.
struct LimbBand {
    origin: Point,
    dir: Point,
    length: f64,
    half_width: f64,
    value: (f32, f32),
}

impl LimbBand {
    fn new(from: Point, to: Point, sigma_limb: f64) -> Result<Self, FieldError> {
        check_sigma(sigma_limb)?;
        let delta = to - from;
        let length = delta.norm();
        if length == 0.0 {
            return Err(FieldError::DegenerateLimb(from.x, from.y));
        }
        let dir = delta / length;
        Ok(Self {
            origin: from,
            dir,
            length,
            half_width: sigma_limb,
            value: unit_f32(dir),
        })
    }

    #[inline]
    fn contains(&self, p: Point) -> bool {
        let a = p - self.origin;
        let along = self.dir.dot(a);
        let across = self.dir.perp().dot(a);
        (0.0..=self.length).contains(&along) && across.abs() <= self.half_width
    }

    fn bounds(&self) -> (Point, Point) {
        let end = self.origin + self.dir * self.length;
        let pad = self.half_width + 1.0;
        (
            Point::new(self.origin.x.min(end.x) - pad, self.origin.y.min(end.y) - pad),
            Point::new(self.origin.x.max(end.x) + pad, self.origin.y.max(end.y) + pad),
        )
    }
}

/// `dir` rounded to f32 without letting the rounded length exceed one.
fn unit_f32(dir: Point) -> (f32, f32) {
    let (mut x, mut y) = (dir.x as f32, dir.y as f32);
    let norm2 = |x: f32, y: f32| f64::from(x).powi(2) + f64::from(y).powi(2);
    while norm2(x, y) > 1.0 {
        // One ulp toward zero on the larger component.
        if x.abs() >= y.abs() {
            x = f32::from_bits(x.to_bits() - 1);
        } else {
            y = f32::from_bits(y.to_bits() - 1);
        }
    }
    (x, y)
}

/// Single-person PAF: the unit vector from `from` to `to` on the limb band,
/// zero elsewhere.
pub fn paf_person(
    from: Point,
    to: Point,
    sigma_limb: f64,
    grid: Grid,
) -> Result<VectorPlane, FieldError> {
    let band = LimbBand::new(from, to, sigma_limb)?;
    let mut plane = VectorPlane::zeros(grid);
    for row in 0..grid.height {
        for col in 0..grid.width {
            if band.contains(grid.cell_center(col, row)) {
                let i = row * grid.width + col;
                plane.x[i] = band.value.0;
                plane.y[i] = band.value.1;
            }
        }
    }
    Ok(plane)
}

/// Average of the non-zero vectors at each pixel.
pub fn aggregate_paf(planes: &[VectorPlane]) -> Result<VectorPlane, FieldError> {
    let first = planes.first().ok_or(FieldError::EmptyInput)?;
    for plane in &planes[1..] {
        check_dims(first.grid, plane.grid)?;
    }
    let mut out = VectorPlane::zeros(first.grid);
    let mut count = vec![0u32; first.grid.len()];
    for plane in planes {
        for (i, (&vx, &vy)) in plane.x.iter().zip(&plane.y).enumerate() {
            if vx != 0.0 || vy != 0.0 {
                out.x[i] += vx;
                out.y[i] += vy;
                count[i] += 1;
            }
        }
    }
    normalize_counts(&mut out.x, &mut out.y, &count);
    Ok(out)
}

fn normalize_counts(x: &mut [f32], y: &mut [f32], count: &[u32]) {
    for ((x, y), &n) in x.iter_mut().zip(y.iter_mut()).zip(count) {
        if n > 1 {
            *x /= n as f32;
            *y /= n as f32;
        }
    }
}

/// Renders every confidence map and PAF of a scene.
///
/// Gaussians are evaluated only where they are representable in f32 and limb
/// bands only inside their bounding box; the output is bit-identical to
/// aggregating [`confidence_map_person`] and [`paf_person`] planes over the
/// whole grid in person order.
pub fn render_scene_fields(
    scene: &Scene,
    topology: &SkeletonTopology,
    params: &RenderParams,
) -> Result<FieldStack, FieldError> {
    check_sigma(params.sigma)?;
    check_sigma(params.sigma_limb)?;
    scene.validate(topology)?;
    let grid = Grid::for_image(scene.width, scene.height, params.stride)?;
    let mut stack = FieldStack::zeros(grid.width, grid.height, topology);
    let inv = 1.0 / (params.sigma * params.sigma);
    let radius = params.sigma * GAUSSIAN_CUTOFF.sqrt();

    for part in 0..topology.num_parts() {
        let plane = stack.channel_mut(part);
        for person in &scene.people {
            let Some(kp) = person.parts[part] else { continue };
            let c = kp.point();
            let (Some((c0, c1)), Some((r0, r1))) = (
                grid.span(c.x - radius, c.x + radius, grid.width),
                grid.span(c.y - radius, c.y + radius, grid.height),
            ) else {
                continue;
            };
            for row in r0..=r1 {
                for col in c0..=c1 {
                    let v = gaussian(grid.cell_center(col, row), c, inv);
                    let o = &mut plane[row * grid.width + col];
                    *o = o.max(v);
                }
            }
        }
    }

    let mut count = vec![0u32; grid.len()];
    for (c, limb) in topology.limbs().iter().enumerate() {
        count.iter_mut().for_each(|n| *n = 0);
        let (px, py) = stack.paf_mut(c);
        for person in &scene.people {
            let (Some(a), Some(b)) = (person.parts[limb.src], person.parts[limb.dst]) else {
                continue;
            };
            let band = LimbBand::new(a.point(), b.point(), params.sigma_limb)?;
            let (lo, hi) = band.bounds();
            let (Some((c0, c1)), Some((r0, r1))) =
                (grid.span(lo.x, hi.x, grid.width), grid.span(lo.y, hi.y, grid.height))
            else {
                continue;
            };
            for row in r0..=r1 {
                for col in c0..=c1 {
                    if band.contains(grid.cell_center(col, row)) {
                        let i = row * grid.width + col;
                        px[i] += band.value.0;
                        py[i] += band.value.1;
                        count[i] += 1;
                    }
                }
            }
        }
        normalize_counts(px, py, &count);
    }
    Ok(stack)
}

/// Binary spatial weight for the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl LossMask {
    pub fn ones(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![true; width * height] }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![false; width * height] }
    }
}

/// Masked squared error `(f_L, f_S)` between two stacks, summed over all PAF
/// channels and all confidence channels respectively.
pub fn weighted_l2_loss(
    predicted: &FieldStack,
    groundtruth: &FieldStack,
    mask: &LossMask,
) -> Result<(f64, f64), FieldError> {
    let pd = (predicted.width, predicted.height);
    for other in [(groundtruth.width, groundtruth.height), (mask.width, mask.height)] {
        if pd != other {
            return Err(FieldError::DimMismatch(pd, other));
        }
    }
    if predicted.channels() != groundtruth.channels() || predicted.num_parts != groundtruth.num_parts
    {
        return Err(FieldError::ChannelMismatch {
            got: predicted.channels(),
            expected: groundtruth.channels(),
        });
    }
    let masked_sse = |ch: usize| -> f64 {
        predicted
            .channel(ch)
            .iter()
            .zip(groundtruth.channel(ch))
            .zip(&mask.data)
            .filter(|(_, &w)| w)
            .map(|((&a, &b), _)| {
                let d = f64::from(a) - f64::from(b);
                d * d
            })
            .sum()
    };
    let f_s = (0..predicted.num_parts).map(masked_sse).sum();
    let f_l = (predicted.num_parts..predicted.channels()).map(masked_sse).sum();
    Ok((f_l, f_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{builtin, RawTopology};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gaussian_values_at_known_distances() {
        let grid = Grid::new(64, 64);
        let plane = confidence_map_person(Point::new(20.0, 30.0), 7.0, grid).unwrap();
        assert_eq!(plane.get(20, 30), 1.0);
        assert!(close(plane.get(27, 30) as f64, (-1.0f64).exp(), 1e-7));
        assert!(close(plane.get(41, 30) as f64, (-9.0f64).exp(), 1e-9));
        assert!(close(plane.get(41, 30) as f64, 1.2341e-4, 1e-8));
        assert_eq!(
            confidence_map_person(Point::new(0.0, 0.0), 0.0, grid),
            Err(FieldError::NonPositiveSigma(0.0))
        );
    }

    #[test]
    fn max_aggregation_keeps_both_peaks() {
        let grid = Grid::new(80, 20);
        let a = confidence_map_person(Point::new(30.0, 10.0), 7.0, grid).unwrap();
        let b = confidence_map_person(Point::new(44.0, 10.0), 7.0, grid).unwrap();
        let agg = aggregate_confidence(&[a.clone(), b]).unwrap();
        assert_eq!(agg.get(30, 10), 1.0);
        assert_eq!(agg.get(44, 10), 1.0);
        assert_eq!(aggregate_confidence(std::slice::from_ref(&a)).unwrap(), a);
        let z = ScalarPlane::zeros(grid);
        assert_eq!(aggregate_confidence(&[z.clone(), z.clone()]).unwrap(), z);
        assert_eq!(aggregate_confidence(&[]), Err(FieldError::EmptyInput));
        assert!(matches!(
            aggregate_confidence(&[a, ScalarPlane::zeros(Grid::new(3, 3))]),
            Err(FieldError::DimMismatch(..))
        ));
    }

    #[test]
    fn paf_band_membership() {
        let grid = Grid::new(64, 40);
        let plane = paf_person(Point::new(10.0, 20.0), Point::new(50.0, 20.0), 8.0, grid).unwrap();
        assert_eq!(plane.get(30, 20), (1.0, 0.0));
        assert_eq!(plane.get(30, 36), (0.0, 0.0));
        assert_eq!(plane.get(9, 20), (0.0, 0.0));
        assert_eq!(plane.get(10, 28), (1.0, 0.0));
        assert_eq!(plane.get(51, 20), (0.0, 0.0));
        assert_eq!(
            paf_person(Point::new(1.0, 1.0), Point::new(1.0, 1.0), 8.0, grid).unwrap_err(),
            FieldError::DegenerateLimb(1.0, 1.0)
        );
    }

    #[test]
    fn paf_average_counts_nonzero_vectors() {
        let grid = Grid::new(40, 40);
        let a = paf_person(Point::new(5.0, 20.0), Point::new(35.0, 20.0), 4.0, grid).unwrap();
        let b = paf_person(Point::new(35.0, 20.0), Point::new(5.0, 20.0), 4.0, grid).unwrap();
        let c = paf_person(Point::new(20.0, 0.0), Point::new(20.0, 10.0), 2.0, grid).unwrap();
        let opposed = aggregate_paf(&[a.clone(), b]).unwrap();
        assert_eq!(opposed.get(20, 20), (0.0, 0.0));
        let disjoint = aggregate_paf(&[a.clone(), c]).unwrap();
        assert_eq!(disjoint.get(10, 20), (1.0, 0.0));
        assert_eq!(disjoint.get(20, 5), (0.0, 1.0));
        assert_eq!(aggregate_paf(std::slice::from_ref(&a)).unwrap(), a);
    }

    fn two_part_topology() -> SkeletonTopology {
        SkeletonTopology::validate(&RawTopology {
            name: None,
            parts: vec!["a".into(), "b".into()],
            limbs: vec![["a".into(), "b".into()]],
            root: None,
        })
        .unwrap()
    }

    #[test]
    fn windowed_render_matches_full_planes() {
        let topo = two_part_topology();
        let people = vec![
            Person { parts: vec![Some(Keypoint::new(10.3, 12.7)), Some(Keypoint::new(40.2, 30.9))] },
            Person { parts: vec![Some(Keypoint::new(30.0, 10.0)), Some(Keypoint::new(12.5, 35.5))] },
            Person { parts: vec![Some(Keypoint::new(50.0, 44.0)), None] },
        ];
        let scene = Scene { width: 64, height: 48, people };
        let params = RenderParams { sigma: 3.0, sigma_limb: 4.0, stride: 1 };
        let stack = render_scene_fields(&scene, &topo, &params).unwrap();
        let grid = Grid::new(64, 48);
        for part in 0..2 {
            let planes: Vec<_> = scene
                .people
                .iter()
                .filter_map(|p| p.parts[part])
                .map(|k| confidence_map_person(k.point(), 3.0, grid).unwrap())
                .collect();
            assert_eq!(stack.confidence(part), aggregate_confidence(&planes).unwrap().data);
        }
        let pafs: Vec<_> = scene.people[..2]
            .iter()
            .map(|p| {
                paf_person(p.parts[0].unwrap().point(), p.parts[1].unwrap().point(), 4.0, grid)
                    .unwrap()
            })
            .collect();
        let agg = aggregate_paf(&pafs).unwrap();
        assert_eq!(stack.paf(0).x, agg.x.as_slice());
        assert_eq!(stack.paf(0).y, agg.y.as_slice());
    }

    #[test]
    fn strided_grid_samples_cell_centres() {
        let g = Grid::for_image(368, 368, 8).unwrap();
        assert_eq!((g.width, g.height), (46, 46));
        assert_eq!(g.cell_center(0, 0), Point::new(3.5, 3.5));
        let p = Point::new(100.0, 50.0);
        let back = g.to_image(g.to_grid(p));
        assert!(close(back.x, 100.0, 1e-12) && close(back.y, 50.0, 1e-12));
        assert_eq!(Grid::for_image(10, 10, 0), Err(FieldError::ZeroStride));
    }

    #[test]
    fn empty_scene_renders_zeros() {
        let topo = builtin::coco18();
        let stack =
            render_scene_fields(&Scene::empty(32, 16), &topo, &RenderParams::default()).unwrap();
        assert_eq!(stack.channels(), 18 + 38);
        assert!(stack.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn loss_examples() {
        let topo = two_part_topology();
        let scene = Scene {
            width: 20,
            height: 20,
            people: vec![Person {
                parts: vec![Some(Keypoint::new(4.0, 4.0)), Some(Keypoint::new(15.0, 12.0))],
            }],
        };
        let gt = render_scene_fields(&scene, &topo, &RenderParams::default()).unwrap();
        assert_eq!(weighted_l2_loss(&gt, &gt, &LossMask::ones(20, 20)).unwrap(), (0.0, 0.0));

        let mut pred = gt.clone();
        pred.data.iter_mut().for_each(|v| *v += 0.5);
        assert_eq!(weighted_l2_loss(&pred, &gt, &LossMask::zeros(20, 20)).unwrap(), (0.0, 0.0));

        let mut pred = gt.clone();
        pred.channel_mut(1)[7] += 2.0;
        let (f_l, f_s) = weighted_l2_loss(&pred, &gt, &LossMask::ones(20, 20)).unwrap();
        assert_eq!(f_l, 0.0);
        assert!(close(f_s, 4.0, 1e-6));

        assert!(matches!(
            weighted_l2_loss(&pred, &gt, &LossMask::ones(3, 3)),
            Err(FieldError::DimMismatch(..))
        ));
    }

    #[test]
    fn out_of_frame_parts_need_a_flag() {
        let topo = two_part_topology();
        let mut scene = Scene {
            width: 20,
            height: 20,
            people: vec![Person {
                parts: vec![Some(Keypoint::new(-3.0, 4.0)), Some(Keypoint::new(15.0, 12.0))],
            }],
        };
        assert!(matches!(
            render_scene_fields(&scene, &topo, &RenderParams::default()),
            Err(FieldError::OutOfFrame { .. })
        ));
        scene.people[0].parts[0].as_mut().unwrap().out_of_frame = true;
        let stack = render_scene_fields(&scene, &topo, &RenderParams::default()).unwrap();
        assert!(stack.confidence(0)[4 * 20] > 0.8);
    }
}
