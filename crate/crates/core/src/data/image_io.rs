//! Image decoding and PNG writing through the `image` crate.

use std::path::Path;

use crate::{Error, Result, Tensor};

/// Decodes any supported image into an RGB tensor `[3, H, W]` in `[0, 1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "image file not found")));
    }
    let img = image::open(path)
        .map_err(|e| Error::Data(format!("cannot decode {}: {e}", path.display())))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut data = vec![0.0; 3 * h * w];
    for (x, y, px) in img.enumerate_pixels() {
        for c in 0..3 {
            data[c * h * w + y as usize * w + x as usize] = px[c] as f64 / 255.0;
        }
    }
    Tensor::new(&[3, h, w], data)
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a `[3, H, W]` (or `[1, 3, H, W]`) tensor as an RGB PNG.
pub fn save_rgb_png(image: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let shape = image.shape();
    let (h, w) = match shape {
        [3, h, w] | [1, 3, h, w] => (*h, *w),
        _ => return Err(Error::dim(format!("expected an RGB image tensor, got {shape:?}"))),
    };
    let d = image.data();
    let buf = image::RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let i = y as usize * w + x as usize;
        image::Rgb([to_byte(d[i]), to_byte(d[h * w + i]), to_byte(d[2 * h * w + i])])
    });
    buf.save(path).map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))
}

/// Writes a row-major grey map with values in `[0, 1]` as a PNG.
pub fn save_gray_png(values: &[f64], height: usize, width: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if values.len() != height * width {
        return Err(Error::dim(format!("{} values for a {height}x{width} image", values.len())));
    }
    let buf = image::GrayImage::from_fn(width as u32, height as u32, |x, y| {
        image::Luma([to_byte(values[y as usize * width + x as usize])])
    });
    buf.save(path).map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_quantises_to_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let img = Tensor::from_fn(&[3, 4, 5], |i| (i % 7) as f64 / 6.0);
        save_rgb_png(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.shape(), &[3, 4, 5]);
        assert!(back.max_abs_diff(&img) <= 0.5 / 255.0 + 1e-12);
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = load_image("/nonexistent/face.png").unwrap_err().to_string();
        assert!(err.contains("/nonexistent/face.png"), "{err}");
    }
}
