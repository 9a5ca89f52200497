//! Binary PPM (P6) frames and their tensor form.

use std::io::{BufReader, BufWriter};
use std::path::Path;

use image::codecs::pnm::{PnmDecoder, PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ImageEncoder, RgbImage};

use crate::error::{Error, Result};
use crate::nn::Tensor;

pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let dec = PnmDecoder::new(BufReader::new(f))
        .map_err(|e| Error::Data(format!("{}: not a PPM image: {e}", path.display())))?;
    if dec.subtype() != PnmSubtype::Pixmap(SampleEncoding::Binary) {
        return Err(Error::Data(format!("{}: expected binary PPM (P6)", path.display())));
    }
    let img = DynamicImage::from_decoder(dec)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    Ok(img.to_rgb8())
}

pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    PnmEncoder::new(BufWriter::new(f))
        .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
        .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::Rgb8)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// `3×H×W` tensor with values `c / 255 - 0.5`.
pub fn image_to_tensor(img: &RgbImage) -> Tensor {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.as_raw();
    Tensor::from_fn(&[3, h, w], |i| {
        let (c, p) = (i / (h * w), i % (h * w));
        raw[p * 3 + c] as f32 / 255.0 - 0.5
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p6_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.ppm");
        let img = RgbImage::from_fn(7, 5, |x, y| image::Rgb([x as u8 * 30, y as u8 * 40, 255]));
        write_ppm(&p, &img).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"P6"));
        assert_eq!(read_ppm(&p).unwrap(), img);
        let t = image_to_tensor(&img);
        assert_eq!(t.shape(), &[3, 5, 7]);
        assert_eq!(t.data()[2 * 35 + 7 + 3], 0.5);
        assert_eq!(t.data()[0], -0.5);
    }

    #[test]
    fn rejects_other_formats() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.ppm");
        std::fs::write(&p, b"P3\n1 1\n255\n0 0 0\n").unwrap();
        assert!(read_ppm(&p).is_err());
        std::fs::write(&p, b"garbage").unwrap();
        assert!(read_ppm(&p).is_err());
    }
}
