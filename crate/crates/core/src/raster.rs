//! Minimal floating-point raster with the resampling operations the pyramid needs.

use std::path::Path;

use crate::error::{PoseError, Result};

/// Row-major, channel-interleaved image with values nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        assert!(channels > 0, "raster needs at least one channel");
        Raster {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        let mut r = Self::new(width, height, channels);
        r.data.fill(value);
        r
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || data.len() != width * height * channels {
            return Err(PoseError::InvalidArgument(format!(
                "raster buffer of {} values does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Raster {
            width,
            height,
            channels,
            data,
        })
    }

    /// Grayscale raster from a per-pixel function.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Raster {
            width,
            height,
            channels: 1,
            data,
        }
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Bilinear sample at pixel-index coordinates, clamping to the border.
    pub fn sample_bilinear(&self, x: f64, y: f64, c: usize) -> f64 {
        let maxx = (self.width - 1) as f64;
        let maxy = (self.height - 1) as f64;
        let x = x.clamp(0.0, maxx);
        let y = y.clamp(0.0, maxy);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0, c) * (1.0 - fx) + self.get(x1, y0, c) * fx;
        let bot = self.get(x0, y1, c) * (1.0 - fx) + self.get(x1, y1, c) * fx;
        top * (1.0 - fy) + bot * fy
    }

    /// Resizes to `new_w x new_h`. Downsampling averages the covered source area;
    /// upsampling interpolates bilinearly.
    pub fn resize(&self, new_w: usize, new_h: usize) -> Raster {
        if new_w == self.width && new_h == self.height {
            return self.clone();
        }
        let mut out = Raster::new(new_w.max(1), new_h.max(1), self.channels);
        let sx = self.width as f64 / out.width as f64;
        let sy = self.height as f64 / out.height as f64;
        if sx >= 1.0 && sy >= 1.0 {
            let wx = box_weights(self.width, out.width, sx);
            let wy = box_weights(self.height, out.height, sy);
            for (oy, ry) in wy.iter().enumerate() {
                for (ox, rx) in wx.iter().enumerate() {
                    for c in 0..self.channels {
                        let mut acc = 0.0;
                        let mut wsum = 0.0;
                        for &(iy, wyv) in ry {
                            for &(ix, wxv) in rx {
                                let w = wxv * wyv;
                                acc += w * self.get(ix, iy, c);
                                wsum += w;
                            }
                        }
                        out.set(ox, oy, c, acc / wsum);
                    }
                }
            }
        } else {
            for oy in 0..out.height {
                for ox in 0..out.width {
                    let x = (ox as f64 + 0.5) * sx - 0.5;
                    let y = (oy as f64 + 0.5) * sy - 0.5;
                    for c in 0..self.channels {
                        let v = self.sample_bilinear(x, y, c);
                        out.set(ox, oy, c, v);
                    }
                }
            }
        }
        out
    }

    /// Rotates the content by `-angle` about the image center onto a square canvas
    /// of side `canvas`, so that a structure pointing along `angle` ends up pointing
    /// along `+x`. Samples outside the source clamp to its border.
    pub fn rotate_onto_canvas(&self, angle: f64, canvas: usize) -> Raster {
        let mut out = Raster::new(canvas, canvas, self.channels);
        let cx = self.width as f64 / 2.0;
        let cy = self.height as f64 / 2.0;
        let cc = canvas as f64 / 2.0;
        let (s, c) = angle.sin_cos();
        for oy in 0..canvas {
            for ox in 0..canvas {
                // output point u' maps back to C + R(angle) (u' - C')
                let ux = ox as f64 + 0.5 - cc;
                let uy = oy as f64 + 0.5 - cc;
                let sx = cx + c * ux - s * uy - 0.5;
                let sy = cy + s * ux + c * uy - 0.5;
                for ch in 0..self.channels {
                    let v = self.sample_bilinear(sx, sy, ch);
                    out.set(ox, oy, ch, v);
                }
            }
        }
        out
    }

    /// Side of the square canvas that holds this image under any rotation.
    pub fn rotation_canvas(&self) -> usize {
        ((self.width * self.width + self.height * self.height) as f64)
            .sqrt()
            .ceil() as usize
    }

    /// Shifts content right/down by `dx, dy` pixels, replicating the border.
    pub fn translate(&self, dx: isize, dy: isize) -> Raster {
        let mut out = Raster::new(self.width, self.height, self.channels);
        for y in 0..self.height {
            for x in 0..self.width {
                let sx = (x as isize - dx).clamp(0, self.width as isize - 1) as usize;
                let sy = (y as isize - dy).clamp(0, self.height as isize - 1) as usize;
                for c in 0..self.channels {
                    out.set(x, y, c, self.get(sx, sy, c));
                }
            }
        }
        out
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Raster {
        let mut out = Raster::new(w, h, self.channels);
        for y in 0..h {
            for x in 0..w {
                for c in 0..self.channels {
                    out.set(x, y, c, self.get(x0 + x, y0 + y, c));
                }
            }
        }
        out
    }

    pub fn load(path: &Path) -> Result<Raster> {
        let img = image::open(path).map_err(|e| PoseError::Image(format!("{}: {e}", path.display())))?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        let (w, h) = (w as usize, h as usize);
        let pixels = rgb.as_raw();
        let gray = pixels.chunks_exact(3).all(|p| p[0] == p[1] && p[1] == p[2]);
        let data: Vec<f64> = if gray {
            pixels.chunks_exact(3).map(|p| p[0] as f64 / 255.0).collect()
        } else {
            pixels.iter().map(|&v| v as f64 / 255.0).collect()
        };
        Raster::from_vec(w, h, if gray { 1 } else { 3 }, data)
    }

    /// Writes an 8-bit PNG (gray or RGB).
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        let (w, h) = (self.width as u32, self.height as u32);
        let res = match self.channels {
            1 => image::GrayImage::from_raw(w, h, bytes).map(|i| i.save(path)),
            3 => image::RgbImage::from_raw(w, h, bytes).map(|i| i.save(path)),
            c => {
                return Err(PoseError::Image(format!("cannot encode {c}-channel raster")));
            }
        };
        match res {
            Some(Ok(())) => Ok(()),
            Some(Err(e)) => Err(PoseError::Image(format!("{}: {e}", path.display()))),
            None => Err(PoseError::Image("buffer size mismatch".into())),
        }
    }
}

/// Per output pixel, the source pixels it covers and their coverage weights.
fn box_weights(src: usize, dst: usize, scale: f64) -> Vec<Vec<(usize, f64)>> {
    (0..dst)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = ((o + 1) as f64 * scale).min(src as f64);
            let mut v = Vec::new();
            let mut i = lo.floor() as usize;
            while (i as f64) < hi && i < src {
                let a = (i as f64).max(lo);
                let b = ((i + 1) as f64).min(hi);
                if b > a {
                    v.push((i, b - a));
                }
                i += 1;
            }
            if v.is_empty() {
                v.push((src.saturating_sub(1).min(lo as usize), 1.0));
            }
            v
        })
        .collect()
}
