//! Raster types and file I/O.
//!
//! Grayscale input comes from binary PGM (P5, maxval 255) or PNG. Disparity
//! maps are read and written in the KITTI 16-bit encoding, where a stored
//! value `v` means disparity `v / 256` and `v == 0` marks an invalid pixel.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb, RgbImage};

use crate::error::{Error, Result};

/// An 8-bit single-channel raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Range(format!("empty image {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} bytes for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.data.chunks_exact(self.width)
    }

    pub fn same_size(&self, other: &GrayImage) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Per-pixel disparity with an explicit validity mask.
///
/// Invalid cells store `0.0`; consumers must consult the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
    valid: Vec<bool>,
}

impl DisparityMap {
    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn from_parts(width: usize, height: usize, values: Vec<f32>, valid: Vec<bool>) -> Result<Self> {
        if values.len() != width * height || valid.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} values / {} mask entries for a {width}x{height} map",
                values.len(),
                valid.len()
            )));
        }
        let mut map = Self {
            width,
            height,
            values,
            valid,
        };
        for (v, ok) in map.values.iter_mut().zip(&map.valid) {
            if !*ok {
                *v = 0.0;
            }
        }
        Ok(map)
    }

    /// A fully valid map built from integer disparities.
    pub fn from_disparities(width: usize, height: usize, d: &[u16]) -> Result<Self> {
        Self::from_parts(
            width,
            height,
            d.iter().map(|&v| f32::from(v)).collect(),
            vec![true; d.len()],
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    /// Disparity at `(x, y)`, or `None` when the pixel is invalid.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        let i = y * self.width + x;
        self.valid[i].then_some(self.values[i])
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, d: f32) {
        let i = y * self.width + x;
        self.values[i] = d;
        self.valid[i] = true;
    }

    #[inline]
    pub fn invalidate(&mut self, x: usize, y: usize) {
        let i = y * self.width + x;
        self.values[i] = 0.0;
        self.valid[i] = false;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn same_size(&self, other: &DisparityMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<DisparityMap> {
        check_window(self.width, self.height, x0, y0, w, h)?;
        let mut values = Vec::with_capacity(w * h);
        let mut valid = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let start = y * self.width + x0;
            values.extend_from_slice(&self.values[start..start + w]);
            valid.extend_from_slice(&self.valid[start..start + w]);
        }
        DisparityMap::from_parts(w, h, values, valid)
    }
}

/// How [`write_disparity`] encodes a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisparityFormat {
    /// KITTI 16-bit PNG: `round(d * 256)`, invalid as 0.
    Raw16,
    /// 8-bit RGB PNG, far (blue) to near (red), invalid black.
    Colorized { d_max: usize },
}

fn check_window(width: usize, height: usize, x0: usize, y0: usize, w: usize, h: usize) -> Result<()> {
    let fits = w > 0
        && h > 0
        && x0.checked_add(w).is_some_and(|r| r <= width)
        && y0.checked_add(h).is_some_and(|b| b <= height);
    if fits {
        Ok(())
    } else {
        Err(Error::Range(format!(
            "window ({x0}, {y0}, {w}x{h}) exceeds {width}x{height} image"
        )))
    }
}

/// Copy of the `w`×`h` window whose top-left corner is `(x0, y0)`.
pub fn crop_roi(img: &GrayImage, x0: usize, y0: usize, w: usize, h: usize) -> Result<GrayImage> {
    check_window(img.width, img.height, x0, y0, w, h)?;
    let mut data = Vec::with_capacity(w * h);
    for y in y0..y0 + h {
        let start = y * img.width + x0;
        data.extend_from_slice(&img.data[start..start + w]);
    }
    GrayImage::new(w, h, data)
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// Load an 8-bit grayscale raster from PGM (P5) or PNG.
///
/// 16-bit PNGs are down-shifted by 8 bits. RGB(A) PNGs, such as the KITTI
/// color frames, are converted to luma.
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P5") {
        return decode_pgm(&bytes).map_err(|reason| Error::decode(path, reason));
    }
    let img = image::load_from_memory(&bytes).map_err(|e| Error::decode(path, e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(|v| (v >> 8) as u8).collect(),
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) | DynamicImage::ImageLumaA8(_) => {
            img.to_luma8().into_raw()
        }
        other => {
            return Err(Error::decode(
                path,
                format!("unsupported pixel format {:?}", other.color()),
            ))
        }
    };
    GrayImage::new(w, h, data).map_err(|e| Error::decode(path, e.to_string()))
}

fn decode_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    // Header: "P5" <ws> width <ws> height <ws> maxval <single ws> raster.
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err("malformed header".into());
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or("malformed header")?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("malformed header".into());
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}, expected 255"));
    }
    let n = width * height;
    let raster = bytes.get(pos..pos + n).ok_or("truncated raster")?;
    GrayImage::new(width, height, raster.to_vec()).map_err(|e| e.to_string())
}

/// Save as PGM when the extension is `.pgm`, PNG otherwise.
pub fn save_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if is_pgm(path) {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        write!(w, "P5\n{} {}\n255\n", img.width, img.height)
            .and_then(|_| w.write_all(&img.data))
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    } else {
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
            ImageBuffer::from_raw(img.width as u32, img.height as u32, img.data.clone())
                .expect("length checked at construction");
        save_png(DynamicImage::ImageLuma8(buf), path)
    }
}

pub(crate) fn save_png(img: DynamicImage, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| Error::encode(path, e.to_string()))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Load a KITTI-encoded 16-bit disparity PNG.
pub fn load_kitti_disparity(path: impl AsRef<Path>) -> Result<DisparityMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|e| Error::decode(path, e.to_string()))?;
    let DynamicImage::ImageLuma16(buf) = img else {
        return Err(Error::decode(
            path,
            format!("expected 16-bit grayscale, found {:?}", img.color()),
        ));
    };
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    let raw = buf.into_raw();
    let valid: Vec<bool> = raw.iter().map(|&v| v != 0).collect();
    let values = raw.iter().map(|&v| f32::from(v) / 256.0).collect();
    DisparityMap::from_parts(w, h, values, valid)
}

/// Encode a map for writing; see [`DisparityFormat`].
pub fn encode_disparity(map: &DisparityMap, mode: DisparityFormat) -> DynamicImage {
    let (w, h) = (map.width as u32, map.height as u32);
    match mode {
        DisparityFormat::Raw16 => {
            let raw: Vec<u16> = map
                .values
                .iter()
                .zip(&map.valid)
                .map(|(&d, &ok)| {
                    if ok {
                        // A valid zero disparity has no distinct KITTI code; keep it valid.
                        ((d * 256.0).round().clamp(0.0, 65535.0) as u16).max(1)
                    } else {
                        0
                    }
                })
                .collect();
            DynamicImage::ImageLuma16(ImageBuffer::from_raw(w, h, raw).expect("sized"))
        }
        DisparityFormat::Colorized { d_max } => {
            let mut out = RgbImage::new(w, h);
            for (i, px) in out.pixels_mut().enumerate() {
                if map.valid[i] {
                    *px = disparity_color(map.values[i], d_max);
                }
            }
            DynamicImage::ImageRgb8(out)
        }
    }
}

/// Write a disparity map as a PNG in the requested encoding.
pub fn write_disparity(map: &DisparityMap, path: impl AsRef<Path>, mode: DisparityFormat) -> Result<()> {
    save_png(encode_disparity(map, mode), path.as_ref())
}

/// Hue ramp from blue (d = 0, far) to red (d = d_max - 1, near).
pub fn disparity_color(d: f32, d_max: usize) -> Rgb<u8> {
    let span = (d_max.max(2) - 1) as f32;
    let t = (d / span).clamp(0.0, 1.0);
    hue_to_rgb(240.0 * (1.0 - t))
}

fn hue_to_rgb(hue: f32) -> Rgb<u8> {
    let h = hue / 60.0;
    let sector = (h.floor() as i32).clamp(0, 5);
    let f = h - sector as f32;
    let up = (255.0 * f).round() as u8;
    let down = (255.0 * (1.0 - f)).round() as u8;
    match sector {
        0 => Rgb([255, up, 0]),
        1 => Rgb([down, 255, 0]),
        2 => Rgb([0, 255, up]),
        3 => Rgb([0, down, 255]),
        4 => Rgb([up, 0, 255]),
        _ => Rgb([255, 0, down]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn decodes_handwritten_pgm() {
        let dir = tmp();
        let p = dir.path().join("a.pgm");
        let mut bytes = b"P5\n# comment\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 64, 128, 255]);
        fs::write(&p, bytes).unwrap();
        let img = load_gray(&p).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.data(), &[0, 64, 128, 255]);
    }

    #[test]
    fn missing_file_is_an_error() {
        let err = load_gray("/nonexistent/definitely/missing.pgm").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn rejects_bad_maxval_and_truncation() {
        let dir = tmp();
        let p = dir.path().join("b.pgm");
        fs::write(&p, b"P5 2 2 65535\n\0\0\0\0\0\0\0\0").unwrap();
        assert!(matches!(load_gray(&p), Err(Error::Decode { .. })));
        fs::write(&p, b"P5 4 4 255\n\0\0").unwrap();
        assert!(matches!(load_gray(&p), Err(Error::Decode { .. })));
        fs::write(&p, b"P5 x 4 255\n").unwrap();
        assert!(matches!(load_gray(&p), Err(Error::Decode { .. })));
    }

    #[test]
    fn sixteen_bit_png_is_downshifted() {
        let dir = tmp();
        let p = dir.path().join("c.png");
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(2, 1, vec![0x1234, 0xff00]).unwrap();
        save_png(DynamicImage::ImageLuma16(buf), &p).unwrap();
        assert_eq!(load_gray(&p).unwrap().data(), &[0x12, 0xff]);
    }

    #[test]
    fn kitti_encoding() {
        let dir = tmp();
        let p = dir.path().join("d.png");
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(3, 1, vec![256, 0, 8960]).unwrap();
        save_png(DynamicImage::ImageLuma16(buf), &p).unwrap();
        let d = load_kitti_disparity(&p).unwrap();
        assert_eq!(d.get(0, 0), Some(1.0));
        assert_eq!(d.get(1, 0), None);
        assert_eq!(d.get(2, 0), Some(35.0));
    }

    #[test]
    fn kitti_loader_rejects_8_bit() {
        let dir = tmp();
        let p = dir.path().join("e.png");
        save_gray(&GrayImage::filled(2, 2, 7).unwrap(), &p).unwrap();
        assert!(matches!(load_kitti_disparity(&p), Err(Error::Decode { .. })));
    }

    #[test]
    fn crop_identity_and_bounds() {
        let img = GrayImage::from_fn(5, 4, |x, y| (x * 10 + y) as u8).unwrap();
        assert_eq!(crop_roi(&img, 0, 0, 5, 4).unwrap(), img);
        let c = crop_roi(&img, 1, 2, 3, 2).unwrap();
        assert_eq!(c.get(0, 0), img.get(1, 2));
        assert_eq!(c.get(2, 1), img.get(3, 3));
        assert!(matches!(crop_roi(&img, 5, 0, 1, 1), Err(Error::Range(_))));
        assert!(matches!(crop_roi(&img, 0, 0, 0, 1), Err(Error::Range(_))));
    }

    #[test]
    fn kitti_sized_roi() {
        let img = GrayImage::filled(1242, 375, 3).unwrap();
        let roi = crop_roi(&img, 0, 0, 640, 360).unwrap();
        assert_eq!((roi.width(), roi.height()), (640, 360));
    }

    #[test]
    fn colorized_endpoints_and_invalid() {
        let mut m = DisparityMap::invalid(3, 1);
        let img = encode_disparity(&m, DisparityFormat::Colorized { d_max: 60 }).to_rgb8();
        assert!(img.pixels().all(|p| p.0 == [0, 0, 0]));
        m.set(0, 0, 0.0);
        m.set(1, 0, 59.0);
        let img = encode_disparity(&m, DisparityFormat::Colorized { d_max: 60 }).to_rgb8();
        assert_eq!(img.get_pixel(0, 0).0, [0, 0, 255]);
        assert_eq!(img.get_pixel(1, 0).0, [255, 0, 0]);
        assert_eq!(img.get_pixel(2, 0).0, [0, 0, 0]);
    }

    #[test]
    fn raw16_round_trip() {
        let dir = tmp();
        let p = dir.path().join("r.png");
        let m = DisparityMap::from_parts(
            3,
            2,
            vec![0.5, 12.25, 59.996, 3.0, 0.0, 7.1],
            vec![true, true, true, false, false, true],
        )
        .unwrap();
        write_disparity(&m, &p, DisparityFormat::Raw16).unwrap();
        let back = load_kitti_disparity(&p).unwrap();
        assert_eq!(back.valid_mask(), m.valid_mask());
        for (a, b) in back.values().iter().zip(m.values()) {
            assert!((a - b).abs() <= 1.0 / 256.0);
        }
    }

    #[test]
    fn unwritable_path() {
        let m = DisparityMap::invalid(2, 2);
        let err = write_disparity(&m, "/nonexistent-dir/x.png", DisparityFormat::Raw16).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
