//! On-disk encodings.
//!
//! Images are 8-bit RGB PNG, instance maps are 16-bit single-channel PNG.
//! Encoder settings are pinned (no interlacing, fixed filter and
//! compression) so identical pixels always produce identical bytes. All
//! writes go through a temp-file-plus-rename so interrupted runs never
//! leave half-written files behind.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{LabelRaster, Raster, RgbRaster};

/// Largest instance id representable by the 16-bit map encoding.
pub const MAX_INSTANCE_ID: u32 = u16::MAX as u32;

fn fixed_encoder<'a, W: Write>(
    w: W,
    width: u32,
    height: u32,
    color: png::ColorType,
    depth: png::BitDepth,
) -> png::Encoder<'a, W> {
    let mut enc = png::Encoder::new(w, width, height);
    enc.set_color(color);
    enc.set_depth(depth);
    enc.set_compression(png::Compression::Fast);
    enc.set_filter(png::Filter::NoFilter);
    enc
}

/// Write `bytes` to `path` atomically (temp file in the same directory,
/// then rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::other("path has no file name")))?;
    let tmp = dir.join(format!(".{}.tmp", file_name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Encode an RGB raster with the pinned settings.
pub fn encode_rgb_png(image: &RgbRaster) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    {
        let enc = fixed_encoder(
            &mut bytes,
            image.width(),
            image.height(),
            png::ColorType::Rgb,
            png::BitDepth::Eight,
        );
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::png("<memory>", e))?;
        let flat: Vec<u8> = image.as_slice().iter().flatten().copied().collect();
        writer
            .write_image_data(&flat)
            .map_err(|e| Error::png("<memory>", e))?;
    }
    Ok(bytes)
}

pub fn write_rgb_png(path: &Path, image: &RgbRaster) -> Result<()> {
    let bytes = encode_rgb_png(image)?;
    write_atomic(path, &bytes)
}

pub fn read_rgb_png(path: &Path) -> Result<RgbRaster> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| Error::png(path, e))?;
    let mut buf = vec![0u8; reader.output_buffer_size().ok_or_else(|| {
        Error::png(path, "output buffer size overflow")
    })?];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::png(path, e))?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::png(
            path,
            format!(
                "expected 8-bit RGB, found {:?} {:?}",
                info.color_type, info.bit_depth
            ),
        ));
    }
    let n = info.width as usize * info.height as usize;
    let mut data = Vec::with_capacity(n);
    for px in buf[..info.buffer_size()].chunks_exact(3) {
        data.push([px[0], px[1], px[2]]);
    }
    Raster::from_vec(info.height, info.width, data)
}

/// Encode an instance map as 16-bit grayscale; ids above
/// [`MAX_INSTANCE_ID`] do not fit the format and are an error.
pub fn encode_label_png(map: &LabelRaster) -> Result<Vec<u8>> {
    let mut flat = Vec::with_capacity(map.len() * 2);
    for &v in map.as_slice() {
        if v > MAX_INSTANCE_ID {
            return Err(Error::Manifest(format!(
                "instance id {v} exceeds the 16-bit map encoding"
            )));
        }
        flat.extend_from_slice(&(v as u16).to_be_bytes());
    }
    let mut bytes = Vec::new();
    {
        let enc = fixed_encoder(
            &mut bytes,
            map.width(),
            map.height(),
            png::ColorType::Grayscale,
            png::BitDepth::Sixteen,
        );
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::png("<memory>", e))?;
        writer
            .write_image_data(&flat)
            .map_err(|e| Error::png("<memory>", e))?;
    }
    Ok(bytes)
}

pub fn write_label_png(path: &Path, map: &LabelRaster) -> Result<()> {
    let bytes = encode_label_png(map)?;
    write_atomic(path, &bytes)
}

pub fn read_label_png(path: &Path) -> Result<LabelRaster> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| Error::png(path, e))?;
    let mut buf = vec![0u8; reader.output_buffer_size().ok_or_else(|| {
        Error::png(path, "output buffer size overflow")
    })?];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::png(path, e))?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(Error::png(
            path,
            format!(
                "expected 16-bit grayscale, found {:?} {:?}",
                info.color_type, info.bit_depth
            ),
        ));
    }
    let mut data = Vec::with_capacity(info.width as usize * info.height as usize);
    for px in buf[..info.buffer_size()].chunks_exact(2) {
        data.push(u32::from(u16::from_be_bytes([px[0], px[1]])));
    }
    Raster::from_vec(info.height, info.width, data)
}

/// Write any serializable value as pretty JSON, atomically.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::json(path, e))
}

/// Buffered writer wrapper used for line-oriented logs; flushes and renames
/// on `finish`.
pub struct AtomicLineWriter {
    tmp: std::path::PathBuf,
    dest: std::path::PathBuf,
    writer: BufWriter<fs::File>,
}

impl AtomicLineWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let file_name = path
            .file_name()
            .ok_or_else(|| Error::io(path, std::io::Error::other("path has no file name")))?;
        let tmp = dir.join(format!(".{}.tmp", file_name.to_string_lossy()));
        let file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        Ok(AtomicLineWriter {
            tmp,
            dest: path.to_path_buf(),
            writer: BufWriter::new(file),
        })
    }

    pub fn write_line(&mut self, line: &str) -> Result<()> {
        self.writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.write_all(b"\n"))
            .map_err(|e| Error::io(&self.tmp, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::io(&self.tmp, e))?;
        drop(self.writer);
        fs::rename(&self.tmp, &self.dest).map_err(|e| Error::io(&self.dest, e))
    }
}
