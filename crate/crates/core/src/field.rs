//! Multi-channel scalar fields on a uniform periodic grid.
//!
//! Row index runs along y (meridional), column index along x (zonal). Every
//! derivative operation in the crate follows this convention.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// A validated multi-channel field stored as `(channel, row, col)` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    values: Vec<f64>,
    height: usize,
    width: usize,
    dx: f64,
    channel_names: Vec<String>,
}

impl GridField {
    /// Validates and wraps `values`. This is the only way to build a field.
    pub fn new(
        values: Vec<f64>,
        height: usize,
        width: usize,
        dx: f64,
        channel_names: Vec<String>,
    ) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::DegenerateGrid { height, width });
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidSpacing(dx));
        }
        if channel_names.is_empty() {
            return Err(Error::InvalidChannelNames("at least one channel required".into()));
        }
        let mut seen = HashSet::new();
        for name in &channel_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidChannelNames(format!("duplicate name `{name}`")));
            }
        }
        let expected = channel_names.len() * height * width;
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(Self {
            values,
            height,
            width,
            dx,
            channel_names,
        })
    }

    /// Convenience constructor for a single named channel.
    pub fn single(
        values: Vec<f64>,
        height: usize,
        width: usize,
        dx: f64,
        name: &str,
    ) -> Result<Self> {
        Self::new(values, height, width, dx, vec![name.to_string()])
    }

    /// Stacks per-channel planes into one field.
    pub fn from_channels(
        channels: Vec<(String, Vec<f64>)>,
        height: usize,
        width: usize,
        dx: f64,
    ) -> Result<Self> {
        let mut names = Vec::with_capacity(channels.len());
        let mut values = Vec::with_capacity(channels.len() * height * width);
        for (name, plane) in channels {
            if plane.len() != height * width {
                return Err(Error::DimensionMismatch {
                    expected: height * width,
                    actual: plane.len(),
                });
            }
            names.push(name);
            values.extend(plane);
        }
        Self::new(values, height, width, dx, names)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn channel_count(&self) -> usize {
        self.channel_names.len()
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    /// Cells per channel.
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn channel(&self, index: usize) -> Result<&[f64]> {
        self.check_channel(index)?;
        let n = self.plane_len();
        Ok(&self.values[index * n..(index + 1) * n])
    }

    pub fn channel_index(&self, name: &str) -> Result<usize> {
        self.channel_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    pub fn channel_by_name(&self, name: &str) -> Result<&[f64]> {
        self.channel(self.channel_index(name)?)
    }

    /// Value at `(channel, row, col)`; panics on out-of-range indices.
    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.values[(channel * self.height + row) * self.width + col]
    }

    pub fn check_channel(&self, index: usize) -> Result<()> {
        if index >= self.channel_count() {
            return Err(Error::ChannelOutOfRange {
                index,
                count: self.channel_count(),
            });
        }
        Ok(())
    }

    /// True when both fields have the same `H`, `W` and `dx`.
    pub fn same_grid(&self, other: &GridField) -> bool {
        self.height == other.height && self.width == other.width && self.dx == other.dx
    }

    pub fn ensure_same_grid(&self, other: &GridField) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{}x{} (dx {}) vs {}x{} (dx {})",
                self.height, self.width, self.dx, other.height, other.width, other.dx
            )))
        }
    }

    /// Same grid and same channel layout.
    pub fn ensure_same_layout(&self, other: &GridField) -> Result<()> {
        self.ensure_same_grid(other)?;
        if self.channel_names != other.channel_names {
            return Err(Error::GridMismatch(format!(
                "channels {:?} vs {:?}",
                self.channel_names, other.channel_names
            )));
        }
        Ok(())
    }

    /// A new field on the same grid with the same channel names.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(
            values,
            self.height,
            self.width,
            self.dx,
            self.channel_names.clone(),
        )
    }

    /// Extracts one channel as a single-channel field.
    pub fn select(&self, index: usize) -> Result<Self> {
        let plane = self.channel(index)?.to_vec();
        Self::new(
            plane,
            self.height,
            self.width,
            self.dx,
            vec![self.channel_names[index].clone()],
        )
    }
}

/// A coarse input paired with its fine-resolution target.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub input: GridField,
    pub target: GridField,
    pub factor: f64,
}

impl FieldPair {
    pub fn new(input: GridField, target: GridField) -> Result<Self> {
        if input.channel_names() != target.channel_names() {
            return Err(Error::GridMismatch(format!(
                "input channels {:?} vs target channels {:?}",
                input.channel_names(),
                target.channel_names()
            )));
        }
        let factor = target.height() as f64 / input.height() as f64;
        let width_factor = target.width() as f64 / input.width() as f64;
        if (factor - width_factor).abs() > 1e-12 || factor < 1.0 {
            return Err(Error::GridMismatch(format!(
                "inconsistent refinement: {}x{} -> {}x{}",
                input.height(),
                input.width(),
                target.height(),
                target.width()
            )));
        }
        Ok(Self {
            input,
            target,
            factor,
        })
    }
}

/// Per-channel sample statistics (population variance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

pub fn field_stats(field: &GridField) -> Vec<ChannelStats> {
    let n = field.plane_len() as f64;
    field
        .values()
        .chunks_exact(field.plane_len())
        .map(|plane| {
            let mean = plane.iter().sum::<f64>() / n;
            let variance = plane.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let min = plane.iter().copied().fold(f64::INFINITY, f64::min);
            let max = plane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ChannelStats {
                mean,
                variance,
                min,
                max,
            }
        })
        .collect()
}

/// Averages non-overlapping `factor x factor` blocks; output spacing is `dx * factor`.
pub fn block_average_downsample(field: &GridField, factor: usize) -> Result<GridField> {
    let (h, w) = (field.height(), field.width());
    if factor == 0 || h % factor != 0 || w % factor != 0 {
        return Err(Error::NotDivisible {
            height: h,
            width: w,
            factor,
        });
    }
    let (ch, cw) = (h / factor, w / factor);
    let norm = (factor * factor) as f64;
    let mut out = Vec::with_capacity(field.channel_count() * ch * cw);
    for plane in field.values().chunks_exact(h * w) {
        for r in 0..ch {
            for c in 0..cw {
                // Offsets from the block's first cell keep constant blocks exact.
                let anchor = plane[r * factor * w + c * factor];
                let mut acc = 0.0;
                for rr in r * factor..(r + 1) * factor {
                    let row = &plane[rr * w..(rr + 1) * w];
                    acc += row[c * factor..(c + 1) * factor].iter().map(|v| v - anchor).sum::<f64>();
                }
                out.push(anchor + acc / norm);
            }
        }
    }
    GridField::new(
        out,
        ch,
        cw,
        field.dx() * factor as f64,
        field.channel_names().to_vec(),
    )
}

/// Repeats every cell into a `factor x factor` block; output spacing is `dx / factor`.
pub fn nearest_upsample(field: &GridField, factor: usize) -> Result<GridField> {
    if factor == 0 {
        return Err(Error::InvalidParameter("upsample factor must be positive".into()));
    }
    let (h, w) = (field.height(), field.width());
    let (fh, fw) = (h * factor, w * factor);
    let mut out = Vec::with_capacity(field.channel_count() * fh * fw);
    for plane in field.values().chunks_exact(h * w) {
        for r in 0..fh {
            let src = &plane[(r / factor) * w..(r / factor + 1) * w];
            out.extend((0..fw).map(|c| src[c / factor]));
        }
    }
    GridField::new(
        out,
        fh,
        fw,
        field.dx() / factor as f64,
        field.channel_names().to_vec(),
    )
}
