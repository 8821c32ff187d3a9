//! Unit-interval RGB images and PNG decoding.

use std::path::Path;

use image::{DynamicImage, ImageReader};

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

/// An RGB image with samples in `[0, 1]`, row-major, channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != height * width * CHANNELS {
            return Err(Error::InvalidImage(format!(
                "{height}x{width}x{CHANNELS} image needs {} samples, got {}",
                height * width * CHANNELS,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidImage(format!(
                "sample {bad} outside [0, 1]"
            )));
        }
        Ok(Image {
            height,
            width,
            data,
        })
    }

    /// Builds an image from a per-pixel closure `(row, col) -> [r, g, b]`.
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> [f64; CHANNELS],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for r in 0..height {
            for c in 0..width {
                data.extend_from_slice(&f(r, c));
            }
        }
        Image::new(height, width, data)
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; CHANNELS]) -> Result<Self> {
        Image::from_fn(height, width, |_, _| rgb)
    }

    /// Caller guarantees the invariants (used for freshly clamped buffers).
    pub(crate) fn from_parts(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * CHANNELS);
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Image {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f64; CHANNELS] {
        let i = (row * self.width + col) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Iterates over pixels as `[r, g, b]` slices in row-major order.
    pub fn pixels(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(CHANNELS)
    }

    /// Samples of one channel, row-major.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(CHANNELS).copied().collect()
    }

    /// Grayscale intensity `(r + g + b) / 3` per pixel.
    pub fn grayscale(&self) -> Vec<f64> {
        self.pixels().map(|p| (p[0] + p[1] + p[2]) / 3.0).collect()
    }

    /// Quantizes to 8-bit RGB.
    pub fn to_rgb8(&self) -> image::RgbImage {
        let bytes = self.data.iter().map(|&v| to_u8(v)).collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions")
    }
}

pub(crate) fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Decodes an 8- or 16-bit PNG with one or three channels.
///
/// Samples are divided by the sample-type maximum (255 or 65535); grayscale
/// inputs are replicated into all three channels.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    let decoded = reader
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            image::ImageError::Unsupported(u) => Error::UnsupportedImage(u.to_string()),
            other => Error::Decode {
                path: path.to_path_buf(),
                message: other.to_string(),
            },
        })?;
    from_dynamic(decoded)
}

fn from_dynamic(img: DynamicImage) -> Result<Image> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(buf) => buf
            .into_raw()
            .into_iter()
            .flat_map(|v| [f64::from(v) / 255.0; CHANNELS])
            .collect(),
        DynamicImage::ImageRgb8(buf) => buf
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) / 255.0)
            .collect(),
        DynamicImage::ImageLuma16(buf) => buf
            .into_raw()
            .into_iter()
            .flat_map(|v| [f64::from(v) / 65535.0; CHANNELS])
            .collect(),
        DynamicImage::ImageRgb16(buf) => buf
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) / 65535.0)
            .collect(),
        other => {
            return Err(Error::UnsupportedImage(format!(
                "expected 8/16-bit gray or RGB, got {:?}",
                other.color()
            )))
        }
    };
    Image::new(h, w, data)
}

/// Writes an image as 8-bit RGB PNG.
pub fn save_png(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    save_rgb8(&image.to_rgb8(), path)
}

pub(crate) fn save_rgb8(buf: &image::RgbImage, path: &Path) -> Result<()> {
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| map_encode_err(path, e))
}

pub(crate) fn save_gray8(buf: &image::GrayImage, path: &Path) -> Result<()> {
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| map_encode_err(path, e))
}

fn map_encode_err(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_and_bad_shapes() {
        assert!(Image::new(1, 1, vec![0.0, 0.5, 1.5]).is_err());
        assert!(Image::new(0, 1, vec![]).is_err());
        assert!(Image::new(1, 2, vec![0.0; 3]).is_err());
        assert!(Image::new(1, 1, vec![0.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn grayscale_is_channel_mean() {
        let img = Image::new(1, 1, vec![0.0, 0.3, 0.6]).unwrap();
        assert!((img.grayscale()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn channel_extraction() {
        let img = Image::from_fn(2, 2, |r, c| [r as f64 * 0.5, c as f64 * 0.5, 1.0]).unwrap();
        assert_eq!(img.channel(0), vec![0.0, 0.0, 0.5, 0.5]);
        assert_eq!(img.channel(1), vec![0.0, 0.5, 0.0, 0.5]);
        assert_eq!(img.channel(2), vec![1.0; 4]);
    }
}
