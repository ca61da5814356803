use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Row-major metric depth image; `0.0` marks an invalid pixel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Result<Self, GeometryError> {
        if values.len() != width as usize * height as usize {
            return Err(GeometryError::DepthSize {
                expected: width as usize * height as usize,
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(GeometryError::InvalidDepthValue(*v));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: u32, height: u32, value: f64) -> Self {
        Self {
            width,
            height,
            values: vec![value; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: f64) {
        let w = self.width as usize;
        self.values[y as usize * w + x as usize] = value;
    }

    pub fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied().filter(|v| *v > 0.0)
    }

    pub fn valid_count(&self) -> usize {
        self.valid_values().count()
    }

    /// Median of the valid pixels (mean of the two middle values for even counts).
    pub fn median(&self) -> Option<f64> {
        let mut vals: Vec<f64> = self.valid_values().collect();
        median_in_place(&mut vals)
    }

    pub fn scaled(&self, scale: f64) -> DepthMap {
        DepthMap {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| v * scale).collect(),
        }
    }
}

pub fn median_in_place(vals: &mut [f64]) -> Option<f64> {
    let n = vals.len();
    if n == 0 {
        return None;
    }
    let mid = n / 2;
    let (lower, upper_mid, _) = vals.select_nth_unstable_by(mid, f64::total_cmp);
    let upper_mid = *upper_mid;
    if n % 2 == 1 {
        Some(upper_mid)
    } else {
        let lower_mid = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(0.5 * (lower_mid + upper_mid))
    }
}
