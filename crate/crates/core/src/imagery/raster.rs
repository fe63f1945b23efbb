use crate::error::{Error, Result};

/// Row-major 8-bit image with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidCall(format!("empty image {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidCall(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidCall(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    /// Channel values of one pixel.
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Integer luma (BT.601 weights); identity for gray images.
    pub fn to_gray(&self) -> RasterImage {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| ((77 * p[0] as u32 + 150 * p[1] as u32 + 29 * p[2] as u32 + 128) >> 8) as u8)
            .collect();
        RasterImage {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Gray intensities as `f32`.
    pub fn luma_f32(&self) -> Vec<f32> {
        self.to_gray().data.iter().map(|&v| v as f32).collect()
    }

    /// Block-average downsample by an integer factor (used for previews).
    pub fn downsample(&self, factor: usize) -> RasterImage {
        let factor = factor.max(1);
        let w = (self.width / factor).max(1);
        let h = (self.height / factor).max(1);
        let mut data = Vec::with_capacity(w * h * self.channels);
        for by in 0..h {
            for bx in 0..w {
                for c in 0..self.channels {
                    let mut sum = 0u32;
                    let mut n = 0u32;
                    for y in by * factor..((by + 1) * factor).min(self.height) {
                        for x in bx * factor..((bx + 1) * factor).min(self.width) {
                            sum += self.pixel(x, y)[c] as u32;
                            n += 1;
                        }
                    }
                    data.push(((sum + n / 2) / n) as u8);
                }
            }
        }
        RasterImage {
            width: w,
            height: h,
            channels: self.channels,
            data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_is_validated() {
        assert!(RasterImage::new(0, 1, 1, vec![]).is_err());
        assert!(RasterImage::new(2, 2, 2, vec![0; 8]).is_err());
        assert!(RasterImage::new(2, 2, 3, vec![0; 11]).is_err());
        assert!(RasterImage::new(2, 2, 3, vec![0; 12]).is_ok());
    }

    #[test]
    fn gray_conversion() {
        let img = RasterImage::new(2, 1, 3, vec![255, 255, 255, 0, 0, 0]).unwrap();
        assert_eq!(img.to_gray().data(), &[255, 0]);
    }

    #[test]
    fn downsample_averages_blocks() {
        let img = RasterImage::from_fn(4, 2, |x, _| if x < 2 { 10 } else { 20 }).unwrap();
        let small = img.downsample(2);
        assert_eq!((small.width(), small.height()), (2, 1));
        assert_eq!(small.data(), &[10, 20]);
    }
}
