//! PPM images: escape-time pictures of filled Julia sets and density plots of samples.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{default_escape_radius, green_function, EmpiricalMeasure, Window};
use crate::rational::RationalMap;
use crate::sphere::Cx;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenderMode {
    EscapeTime,
    MeasureDensity,
}

impl std::str::FromStr for RenderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "escape-time" => Ok(RenderMode::EscapeTime),
            "measure-density" => Ok(RenderMode::MeasureDensity),
            other => Err(Error::Config(format!("mode: unknown render mode `{other}`"))),
        }
    }
}

/// Row-major RGB image; row 0 is the top edge (largest imaginary part).
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<[u8; 3]>,
}

impl Image {
    pub fn pixel(&self, col: usize, row: usize) -> [u8; 3] {
        self.rgb[row * self.width + col]
    }

    pub fn write_ppm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.rgb.iter().flatten().copied().collect();
        out.write_all(&bytes)?;
        Ok(())
    }
}

/// Center of pixel `(col, row)`.
pub fn pixel_center(window: &Window, width: usize, height: usize, col: usize, row: usize) -> Cx {
    let dx = (window.re_max - window.re_min) / width as f64;
    let dy = (window.im_max - window.im_min) / height as f64;
    Cx::new(window.re_min + (col as f64 + 0.5) * dx, window.im_max - (row as f64 + 0.5) * dy)
}

/// Pixel containing `z`, if inside the window.
pub fn pixel_of(window: &Window, width: usize, height: usize, z: Cx) -> Option<(usize, usize)> {
    if !window.contains(z) {
        return None;
    }
    let fx = (z.re - window.re_min) / (window.re_max - window.re_min);
    let fy = (window.im_max - z.im) / (window.im_max - window.im_min);
    let col = ((fx * width as f64) as usize).min(width - 1);
    let row = ((fy * height as f64) as usize).min(height - 1);
    Some((col, row))
}

/// Iteration cap for escape-time pixels.
pub const RENDER_ITERATIONS: usize = 500;
const INTERIOR: [u8; 3] = [0, 0, 0];

/// Exterior color from the Green value: bands of width one in `log2 G`.
fn band_color(g: f64) -> [u8; 3] {
    let t = -g.log2();
    let band = t.floor();
    let frac = t - band;
    let shade = |phase: f64| (80.0 + 175.0 * (0.5 + 0.5 * (std::f64::consts::TAU * (frac + phase)).cos())) as u8;
    if band.rem_euclid(2.0) == 0.0 {
        [shade(0.0), shade(0.33), 255]
    } else {
        [255, shade(0.66), shade(0.0)]
    }
}

/// Filled Julia set in black, its exterior colored by Green-function bands.
pub fn render_escape_time(f: &RationalMap, window: &Window, width: usize, height: usize) -> Result<Image> {
    if !f.is_polynomial() || f.degree < 2 {
        return Err(Error::Precondition("escape-time rendering needs a polynomial of degree at least 2".into()));
    }
    check_size(width, height)?;
    let r_esc = default_escape_radius(f);
    let rgb = (0..width * height)
        .into_par_iter()
        .map(|k| {
            let z = pixel_center(window, width, height, k % width, k / width);
            let g = green_function(f, z, RENDER_ITERATIONS, Some(r_esc)).map(|e| e.value).unwrap_or(0.0);
            if g > 0.0 {
                band_color(g)
            } else {
                INTERIOR
            }
        })
        .collect();
    Ok(Image { width, height, rgb })
}

/// Log-scaled sample mass per pixel, grayscale on black.
pub fn render_measure_density(mu: &EmpiricalMeasure, window: &Window, width: usize, height: usize) -> Result<Image> {
    check_size(width, height)?;
    let mut mass = vec![0.0f64; width * height];
    for (z, w) in mu.points.iter().zip(&mu.weights) {
        if let Some((c, r)) = pixel_of(window, width, height, *z) {
            mass[r * width + c] += w;
        }
    }
    let positive: Vec<f64> = mass.iter().copied().filter(|m| *m > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let hi = positive.iter().copied().fold(0.0, f64::max);
    let lo = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let span = (hi / lo).ln();
    let rgb = mass
        .iter()
        .map(|&m| {
            if m <= 0.0 {
                INTERIOR
            } else {
                let t = if span > 0.0 { (m / lo).ln() / span } else { 1.0 };
                let v = (64.0 + 191.0 * t).round() as u8;
                [v, v, v]
            }
        })
        .collect();
    Ok(Image { width, height, rgb })
}

fn check_size(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 || width.saturating_mul(height) > 64_000_000 {
        return Err(Error::Precondition(format!("image size {width}x{height} out of range")));
    }
    Ok(())
}
