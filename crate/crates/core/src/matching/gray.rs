use crate::imagery::RasterImage;

/// Float intensity image used by the detector and descriptor.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl GrayImage {
    pub fn from_raster(img: &RasterImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img.luma_f32(),
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Separable Gaussian blur with clamped borders.
    pub fn gaussian_blur(&self, sigma: f64) -> GrayImage {
        let radius = (3.0 * sigma).ceil().max(1.0) as usize;
        let mut kernel: Vec<f32> = (0..=2 * radius)
            .map(|i| {
                let d = i as f64 - radius as f64;
                (-(d * d) / (2.0 * sigma * sigma)).exp() as f32
            })
            .collect();
        let sum: f32 = kernel.iter().sum();
        kernel.iter_mut().for_each(|k| *k /= sum);

        let (w, h) = (self.width, self.height);
        // Pad each line by `radius` replicated samples so the inner loop
        // needs no bounds logic.
        let mut line = vec![0.0f32; w + 2 * radius];
        let mut tmp = GrayImage::zeros(w, h);
        for y in 0..h {
            let src = &self.data[y * w..(y + 1) * w];
            convolve_line(src, &kernel, radius, &mut line, &mut tmp.data[y * w..(y + 1) * w]);
        }
        // Vertical pass accumulates whole rows, which keeps memory access
        // sequential.
        let mut out = GrayImage::zeros(w, h);
        for y in 0..h {
            let dst = &mut out.data[y * w..(y + 1) * w];
            for (i, k) in kernel.iter().enumerate() {
                let yy = (y + i).saturating_sub(radius).min(h - 1);
                let src = &tmp.data[yy * w..(yy + 1) * w];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += k * s;
                }
            }
        }
        out
    }
}

fn convolve_line(src: &[f32], kernel: &[f32], radius: usize, line: &mut [f32], dst: &mut [f32]) {
    let n = src.len();
    let line = &mut line[..n + 2 * radius];
    line[..radius].fill(src[0]);
    line[radius..radius + n].copy_from_slice(src);
    line[radius + n..].fill(src[n - 1]);
    for (i, d) in dst.iter_mut().enumerate() {
        *d = line[i..i + kernel.len()].iter().zip(kernel).map(|(a, b)| a * b).sum();
    }
}
