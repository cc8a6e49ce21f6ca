//! Spatially correlated random grids.
//!
//! A map is made by drawing i.i.d. standard normals and convolving them with
//! the exponential kernel `h(p, q) = exp(-|p - q| / Δd)`, where `|p - q|` is
//! the distance in meters between grid points and the kernel is cut off at
//! `3Δd`. The i.i.d. draws cover the grid plus a kernel-radius border, so every
//! output point sees a full kernel and the field is stationary up to the edge.
//! Dividing by the kernel's L2 norm makes each point exactly N(0, 1).

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::config::Extent;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::output::fmt_sig9;

/// Kernel cut-off, in correlation distances.
pub const KERNEL_TRUNCATION: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    GaussianUnit,
    Binary,
}

/// Regular grid of `width x height` points, `resolution` meters apart,
/// starting at `origin` (the lower-left point).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Vec2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn new(origin: Vec2, resolution: f64, width: usize, height: usize) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::ExtentTooSmall {
                m: width,
                n: height,
            });
        }
        Ok(Self {
            origin,
            resolution,
            width,
            height,
        })
    }

    /// Smallest grid anchored at `extent.min` that covers the whole extent.
    pub fn covering(extent: &Extent, resolution: f64) -> Result<Self> {
        let count = |len: f64| {
            if len > 0.0 {
                (len / resolution - 1e-9).ceil().max(0.0) as usize + 1
            } else {
                1
            }
        };
        Self::new(
            extent.min,
            resolution,
            count(extent.width()),
            count(extent.height()),
        )
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize, j: usize) -> Vec2 {
        self.origin + Vec2::new(i as f64, j as f64) * self.resolution
    }

    pub fn extent(&self) -> Extent {
        Extent {
            min: self.origin,
            max: self.point(self.width - 1, self.height - 1),
        }
    }
}

/// Truncated exponential kernel sampled on the grid lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialKernel {
    pub radius: usize,
    /// Row-major `(2 radius + 1)^2` weights; zero beyond the cut-off.
    pub weights: Vec<f64>,
}

impl ExponentialKernel {
    pub fn new(correlation_distance: f64, resolution: f64) -> Self {
        let cutoff = KERNEL_TRUNCATION * correlation_distance;
        let radius = (cutoff / resolution + 1e-9).floor() as usize;
        let side = 2 * radius + 1;
        let r = radius as isize;
        let mut weights = Vec::with_capacity(side * side);
        for dy in -r..=r {
            for dx in -r..=r {
                let dist = resolution * ((dx * dx + dy * dy) as f64).sqrt();
                weights.push(if dist <= cutoff + 1e-9 {
                    Self::eval(correlation_distance, dist)
                } else {
                    0.0
                });
            }
        }
        Self { radius, weights }
    }

    /// `exp(-distance / Δd)`.
    pub fn eval(correlation_distance: f64, distance: f64) -> f64 {
        (-distance / correlation_distance).exp()
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    /// Sum of squared weights; the variance of the filtered unit white noise.
    pub fn energy(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    fn taps(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolutionMethod {
    Direct,
    Fft,
    /// Whichever is cheaper for the sizes involved.
    Auto,
}

/// Filters a `noise_width x noise_height` field with `kernel`, keeping only
/// outputs whose kernel support lies fully inside the noise. The result is
/// `(noise_width - 2r) x (noise_height - 2r)`, row-major.
pub fn filter_noise(
    noise: &[f64],
    noise_width: usize,
    noise_height: usize,
    kernel: &ExponentialKernel,
    method: ConvolutionMethod,
) -> Vec<f64> {
    assert_eq!(noise.len(), noise_width * noise_height);
    let r = kernel.radius;
    assert!(
        noise_width > 2 * r && noise_height > 2 * r,
        "noise smaller than kernel"
    );
    let method = match method {
        ConvolutionMethod::Auto => {
            let out = ((noise_width - 2 * r) * (noise_height - 2 * r)) as f64;
            let n = (noise_width * noise_height) as f64;
            if out * kernel.taps() as f64 <= 12.0 * n * n.log2() {
                ConvolutionMethod::Direct
            } else {
                ConvolutionMethod::Fft
            }
        }
        m => m,
    };
    match method {
        ConvolutionMethod::Fft => filter_fft(noise, noise_width, noise_height, kernel),
        _ => filter_direct(noise, noise_width, noise_height, kernel),
    }
}

fn filter_direct(noise: &[f64], nw: usize, nh: usize, kernel: &ExponentialKernel) -> Vec<f64> {
    let r = kernel.radius;
    let side = kernel.side();
    let (ow, oh) = (nw - 2 * r, nh - 2 * r);
    let mut out = vec![0.0; ow * oh];
    for j in 0..oh {
        for i in 0..ow {
            let mut acc = 0.0;
            for ky in 0..side {
                let row = &noise[(j + ky) * nw + i..(j + ky) * nw + i + side];
                let krow = &kernel.weights[ky * side..(ky + 1) * side];
                acc += row.iter().zip(krow).map(|(a, b)| a * b).sum::<f64>();
            }
            out[j * ow + i] = acc;
        }
    }
    out
}

/// Circular convolution of period equal to the noise size: outputs at offset
/// `r` never wrap, so they equal the direct sum.
fn filter_fft(noise: &[f64], nw: usize, nh: usize, kernel: &ExponentialKernel) -> Vec<f64> {
    let r = kernel.radius;
    let side = kernel.side();
    let mut planner = FftPlanner::<f64>::new();
    let row_fwd = planner.plan_fft_forward(nw);
    let col_fwd = planner.plan_fft_forward(nh);
    let row_inv = planner.plan_fft_inverse(nw);
    let col_inv = planner.plan_fft_inverse(nh);

    let mut a: Vec<Complex<f64>> = noise.iter().map(|&x| Complex::new(x, 0.0)).collect();
    let mut b = vec![Complex::new(0.0, 0.0); nw * nh];
    for ky in 0..side {
        for kx in 0..side {
            let dy = (ky + nh - r) % nh;
            let dx = (kx + nw - r) % nw;
            b[dy * nw + dx].re = kernel.weights[ky * side + kx];
        }
    }

    let forward = |buf: &mut Vec<Complex<f64>>| {
        row_fwd.process(buf);
        let mut t = transpose(buf, nw, nh);
        col_fwd.process(&mut t);
        *buf = t;
    };
    forward(&mut a);
    forward(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    col_inv.process(&mut a);
    let mut a = transpose(&a, nh, nw);
    row_inv.process(&mut a);

    let scale = 1.0 / (nw * nh) as f64;
    let (ow, oh) = (nw - 2 * r, nh - 2 * r);
    let mut out = Vec::with_capacity(ow * oh);
    for j in 0..oh {
        for i in 0..ow {
            out.push(a[(j + r) * nw + i + r].re * scale);
        }
    }
    out
}

/// `rows x cols` row-major in, `cols x rows` row-major out.
fn transpose(buf: &[Complex<f64>], cols: usize, rows: usize) -> Vec<Complex<f64>> {
    let mut t = vec![Complex::new(0.0, 0.0); buf.len()];
    for j in 0..rows {
        for i in 0..cols {
            t[i * rows + j] = buf[j * cols + i];
        }
    }
    t
}

/// A frozen 2-D field sampled on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedGridMap {
    pub grid: GridSpec,
    /// Row-major: `values[j * width + i]` is the value at `grid.point(i, j)`.
    pub values: Vec<f64>,
    pub correlation_distance: f64,
    pub kind: FieldKind,
}

/// Correlated map over `extent` (see module docs).
pub fn build_correlated_map<R: Rng + ?Sized>(
    extent: &Extent,
    resolution: f64,
    correlation_distance: f64,
    rng: &mut R,
) -> Result<CorrelatedGridMap> {
    let grid = GridSpec::covering(extent, resolution)?;
    Ok(build_map_pair(&grid, correlation_distance, rng).1)
}

/// The i.i.d. draws at the grid points and the correlated field made from
/// the same draws, as `(uncorrelated, correlated)`.
pub fn build_map_pair<R: Rng + ?Sized>(
    grid: &GridSpec,
    correlation_distance: f64,
    rng: &mut R,
) -> (CorrelatedGridMap, CorrelatedGridMap) {
    let kernel = ExponentialKernel::new(correlation_distance, grid.resolution);
    let r = kernel.radius;
    let (nw, nh) = (grid.width + 2 * r, grid.height + 2 * r);
    let noise: Vec<f64> = (0..nw * nh).map(|_| rng.sample(StandardNormal)).collect();

    let mut filtered = filter_noise(&noise, nw, nh, &kernel, ConvolutionMethod::Auto);
    let norm = kernel.energy().sqrt().recip();
    filtered.iter_mut().for_each(|v| *v *= norm);

    let mut iid = Vec::with_capacity(grid.len());
    for j in 0..grid.height {
        iid.extend_from_slice(&noise[(j + r) * nw + r..(j + r) * nw + r + grid.width]);
    }
    (
        CorrelatedGridMap {
            grid: *grid,
            values: iid,
            correlation_distance: 0.0,
            kind: FieldKind::GaussianUnit,
        },
        CorrelatedGridMap {
            grid: *grid,
            values: filtered,
            correlation_distance,
            kind: FieldKind::GaussianUnit,
        },
    )
}

impl CorrelatedGridMap {
    /// A map holding `value` everywhere.
    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
            correlation_distance: f64::INFINITY,
            kind: FieldKind::GaussianUnit,
        }
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.width + i]
    }

    /// Bilinear interpolation between the four surrounding grid points.
    pub fn sample(&self, position: Vec2) -> Result<f64> {
        let g = &self.grid;
        let fx = (position.x - g.origin.x) / g.resolution;
        let fy = (position.y - g.origin.y) / g.resolution;
        let tol = 1e-9;
        let (mw, mh) = ((g.width - 1) as f64, (g.height - 1) as f64);
        if !(fx >= -tol && fy >= -tol && fx <= mw + tol && fy <= mh + tol) {
            return Err(Error::OutOfExtent(position));
        }
        let fx = fx.clamp(0.0, mw);
        let fy = fy.clamp(0.0, mh);
        let i0 = (fx.floor() as usize).min(g.width - 2);
        let j0 = (fy.floor() as usize).min(g.height - 2);
        let tx = fx - i0 as f64;
        let ty = fy - j0 as f64;
        let v00 = self.value(i0, j0);
        let v10 = self.value(i0 + 1, j0);
        let v01 = self.value(i0, j0 + 1);
        let v11 = self.value(i0 + 1, j0 + 1);
        let bottom = (1.0 - tx) * v00 + tx * v10;
        let top = (1.0 - tx) * v01 + tx * v11;
        Ok((1.0 - ty) * bottom + ty * top)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64
    }

    /// Variance of the forward differences along both axes.
    pub fn gradient_variance(&self) -> f64 {
        let g = &self.grid;
        let mut diffs = Vec::with_capacity(2 * g.len());
        for j in 0..g.height {
            for i in 0..g.width {
                if i + 1 < g.width {
                    diffs.push(self.value(i + 1, j) - self.value(i, j));
                }
                if j + 1 < g.height {
                    diffs.push(self.value(i, j + 1) - self.value(i, j));
                }
            }
        }
        let n = diffs.len() as f64;
        let m = diffs.iter().sum::<f64>() / n;
        diffs.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / n
    }

    /// CSV: a header line, a line of grid metadata, then `height` rows of
    /// `width` values each (row `j` is y = origin.y + j * resolution).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let g = &self.grid;
        writeln!(w, "origin_x_m,origin_y_m,resolution_m,m,n")?;
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_sig9(g.origin.x),
            fmt_sig9(g.origin.y),
            fmt_sig9(g.resolution),
            g.width,
            g.height
        )?;
        for row in self.values.chunks(g.width) {
            let line: Vec<String> = row.iter().map(|v| fmt_sig9(*v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}
