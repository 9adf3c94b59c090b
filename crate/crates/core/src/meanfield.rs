//! Population state as a discretized probability measure over the plane.
//!
//! A [`DensityGrid`] is a fixed-resolution histogram: each agent contributes
//! `1/N` mass to the bin containing it, and points outside the bounding box
//! are clamped into the nearest boundary bin. Rewards consume *density*
//! (mass divided by bin area) so that they stay comparable across grid
//! resolutions, while diagnostics such as [`DensityGrid::distance`] work on
//! raw mass.
//!
//! [`BeliefState`] keeps the fictitious-play running average of the measures
//! observed so far.

use std::fmt::Write as _;

use thiserror::Error;

/// Total-mass tolerance every grid must satisfy.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("empty population")]
    EmptyPopulation,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid shape mismatch")]
    ShapeMismatch,
    #[error("malformed grid csv: {0}")]
    Csv(String),
}

/// Axis-aligned rectangle in state-space units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self { x_min, x_max, y_min, y_max }
    }

    /// Square box `[-half, half]^2` shifted to `center`.
    pub fn square(center: [f64; 2], half: f64) -> Self {
        Self::new(center[0] - half, center[0] + half, center[1] - half, center[1] + half)
    }

    /// Nearest point of the box.
    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].clamp(self.x_min, self.x_max), p[1].clamp(self.y_min, self.y_max)]
    }

    fn is_valid(&self) -> bool {
        [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite())
            && self.x_max > self.x_min
            && self.y_max > self.y_min
    }
}

/// Bounds plus resolution: everything about a grid except its mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridShape {
    bounds: Bounds,
    x_bins: usize,
    y_bins: usize,
}

impl GridShape {
    pub fn new(bounds: Bounds, x_bins: usize, y_bins: usize) -> Result<Self, GridError> {
        if !bounds.is_valid() {
            return Err(GridError::InvalidGrid("degenerate bounds".into()));
        }
        if x_bins == 0 || y_bins == 0 {
            return Err(GridError::InvalidGrid("resolution must be positive".into()));
        }
        Ok(Self { bounds, x_bins, y_bins })
    }

    /// `resolution` bins along both axes.
    pub fn square(bounds: Bounds, resolution: usize) -> Result<Self, GridError> {
        Self::new(bounds, resolution, resolution)
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn x_bins(&self) -> usize {
        self.x_bins
    }

    pub fn y_bins(&self) -> usize {
        self.y_bins
    }

    pub fn len(&self) -> usize {
        self.x_bins * self.y_bins
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bin_width(&self) -> [f64; 2] {
        [
            (self.bounds.x_max - self.bounds.x_min) / self.x_bins as f64,
            (self.bounds.y_max - self.bounds.y_min) / self.y_bins as f64,
        ]
    }

    pub fn bin_area(&self) -> f64 {
        let [w, h] = self.bin_width();
        w * h
    }

    /// Row-major index of the bin holding `p`, clamping out-of-bounds points.
    pub fn bin_index(&self, p: [f64; 2]) -> usize {
        let [w, h] = self.bin_width();
        let ix = axis_bin(p[0], self.bounds.x_min, w, self.x_bins);
        let iy = axis_bin(p[1], self.bounds.y_min, h, self.y_bins);
        iy * self.x_bins + ix
    }

    /// Center point of bin `index`.
    pub fn bin_center(&self, index: usize) -> [f64; 2] {
        let [w, h] = self.bin_width();
        let ix = index % self.x_bins;
        let iy = index / self.x_bins;
        [
            self.bounds.x_min + (ix as f64 + 0.5) * w,
            self.bounds.y_min + (iy as f64 + 0.5) * h,
        ]
    }
}

fn axis_bin(v: f64, lo: f64, width: f64, bins: usize) -> usize {
    let raw = ((v - lo) / width).floor();
    if raw.is_nan() || raw < 0.0 {
        0
    } else if raw >= bins as f64 {
        bins - 1
    } else {
        raw as usize
    }
}

/// Probability measure on a fixed histogram. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    shape: GridShape,
    mass: Vec<f64>,
}

impl DensityGrid {
    /// Validates nonnegativity and unit total mass.
    pub fn from_mass(shape: GridShape, mass: Vec<f64>) -> Result<Self, GridError> {
        if mass.len() != shape.len() {
            return Err(GridError::ShapeMismatch);
        }
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(GridError::InvalidGrid("negative or non-finite mass".into()));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(GridError::InvalidGrid(format!("total mass {total} is not 1")));
        }
        Ok(Self { shape, mass })
    }

    pub fn uniform(shape: GridShape) -> Self {
        let n = shape.len();
        Self { shape, mass: vec![1.0 / n as f64; n] }
    }

    /// All mass in the bin containing `p`.
    pub fn dirac(shape: GridShape, p: [f64; 2]) -> Self {
        let mut mass = vec![0.0; shape.len()];
        mass[shape.bin_index(p)] = 1.0;
        Self { shape, mass }
    }

    /// Empirical measure of a finite population: `1/N` mass per agent.
    ///
    /// Bin masses are `count / N`, so the result does not depend on the
    /// order of `positions`.
    pub fn empirical(shape: GridShape, positions: &[[f64; 2]]) -> Result<Self, GridError> {
        if positions.is_empty() {
            return Err(GridError::EmptyPopulation);
        }
        let mut counts = vec![0usize; shape.len()];
        for p in positions {
            counts[shape.bin_index(*p)] += 1;
        }
        let n = positions.len() as f64;
        let mass = counts.into_iter().map(|c| c as f64 / n).collect();
        Ok(Self { shape, mass })
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Mass of the bin containing `p` divided by the bin area.
    pub fn density_at(&self, p: [f64; 2]) -> f64 {
        self.mass[self.shape.bin_index(p)] / self.shape.bin_area()
    }

    /// L1 distance between the bin masses, in `[0, 2]`.
    pub fn distance(&self, other: &DensityGrid) -> Result<f64, GridError> {
        if self.shape != other.shape {
            return Err(GridError::ShapeMismatch);
        }
        Ok(self.mass.iter().zip(&other.mass).map(|(a, b)| (a - b).abs()).sum())
    }

    /// Header `x_bins,y_bins,x_min,x_max,y_min,y_max`, then one mass per line.
    pub fn to_csv(&self) -> String {
        let b = self.shape.bounds;
        let mut out = String::with_capacity(self.mass.len() * 24 + 64);
        out.push_str("x_bins,y_bins,x_min,x_max,y_min,y_max\n");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            self.shape.x_bins, self.shape.y_bins, b.x_min, b.x_max, b.y_min, b.y_max
        );
        for m in &self.mass {
            let _ = writeln!(out, "{m}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, GridError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| GridError::Csv("missing header".into()))?;
        if header.trim() != "x_bins,y_bins,x_min,x_max,y_min,y_max" {
            return Err(GridError::Csv(format!("unexpected header {header:?}")));
        }
        let dims = lines.next().ok_or_else(|| GridError::Csv("missing dimensions".into()))?;
        let fields: Vec<&str> = dims.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(GridError::Csv("dimension row needs 6 fields".into()));
        }
        let bins = |s: &str| s.parse::<usize>().map_err(|e| GridError::Csv(e.to_string()));
        let real = |s: &str| s.parse::<f64>().map_err(|e| GridError::Csv(e.to_string()));
        let bounds = Bounds::new(real(fields[2])?, real(fields[3])?, real(fields[4])?, real(fields[5])?);
        let shape = GridShape::new(bounds, bins(fields[0])?, bins(fields[1])?)?;
        let mass = lines.map(|l| real(l.trim())).collect::<Result<Vec<_>, _>>()?;
        Self::from_mass(shape, mass)
    }
}

/// Fictitious-play belief: the running average of observed measures.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    average: DensityGrid,
    count: usize,
}

impl BeliefState {
    /// Empty belief. The uniform grid is a placeholder; the first update
    /// replaces it entirely.
    pub fn new(shape: GridShape) -> Self {
        Self { average: DensityGrid::uniform(shape), count: 0 }
    }

    pub fn average(&self) -> &DensityGrid {
        &self.average
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `average <- (count * average + measure) / (count + 1)`.
    pub fn fp_update(&mut self, measure: &DensityGrid) -> Result<(), GridError> {
        let n = self.count as f64;
        self.blend(measure, |old, new| (n * old + new) / (n + 1.0))
    }

    /// `average <- average + step * (measure - average)` for a step in `(0, 1]`.
    /// With `step = 1/(count+1)` this is the running mean again.
    pub fn relax(&mut self, measure: &DensityGrid, step: f64) -> Result<(), GridError> {
        if !(step > 0.0 && step <= 1.0) {
            return Err(GridError::InvalidGrid(format!("belief step {step} outside (0, 1]")));
        }
        self.blend(measure, |old, new| old + step * (new - old))
    }

    fn blend(&mut self, measure: &DensityGrid, f: impl Fn(f64, f64) -> f64) -> Result<(), GridError> {
        if measure.shape != self.average.shape {
            return Err(GridError::ShapeMismatch);
        }
        for (old, new) in self.average.mass.iter_mut().zip(&measure.mass) {
            *old = f(*old, *new).max(0.0);
        }
        self.count += 1;
        Ok(())
    }
}
