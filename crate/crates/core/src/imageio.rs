//! 8-bit PNG and binary PGM/PPM import/export.
//!
//! Import maps `[0, 255]` to `[0, 1]` by division. Export clips to `[0, 1]`,
//! scales by 255 and rounds half away from zero.

use std::io::{BufRead, Cursor, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{clip01, ImageBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    /// PGM (gray) or PPM (RGB), chosen from the channel count.
    Pnm,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("png") => Ok(ImageFormat::Png),
            Some("pgm" | "ppm" | "pnm") => Ok(ImageFormat::Pnm),
            _ => Err(Error::Data(format!(
                "unsupported image extension: {}",
                path.display()
            ))),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_image(path: &Path) -> Result<ImageBuffer> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let fmt = ImageFormat::from_path(path)?;
    decode(&bytes, fmt).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_image(path: &Path, img: &ImageBuffer) -> Result<()> {
    let bytes = encode(img, ImageFormat::from_path(path)?)?;
    std::fs::write(path, bytes).map_err(io_err(path))
}

pub fn decode(bytes: &[u8], fmt: ImageFormat) -> Result<ImageBuffer> {
    match fmt {
        ImageFormat::Png => decode_png(bytes),
        ImageFormat::Pnm => decode_pnm(bytes),
    }
}

pub fn encode(img: &ImageBuffer, fmt: ImageFormat) -> Result<Vec<u8>> {
    let (h, w, c) = img.dims();
    let interleaved = to_bytes(img);
    match fmt {
        ImageFormat::Png => {
            let mut out = Vec::new();
            let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
            enc.set_color(if c == 1 {
                png::ColorType::Grayscale
            } else {
                png::ColorType::Rgb
            });
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc
                .write_header()
                .map_err(|e| Error::Data(format!("png encode: {e}")))?;
            writer
                .write_image_data(&interleaved)
                .map_err(|e| Error::Data(format!("png encode: {e}")))?;
            writer
                .finish()
                .map_err(|e| Error::Data(format!("png encode: {e}")))?;
            Ok(out)
        }
        ImageFormat::Pnm => {
            let magic = if c == 1 { "P5" } else { "P6" };
            let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
            out.extend_from_slice(&interleaved);
            Ok(out)
        }
    }
}

/// Quantizes to interleaved 8-bit samples.
pub fn to_bytes(img: &ImageBuffer) -> Vec<u8> {
    let img = clip01(img);
    let (h, w, c) = img.dims();
    let mut out = Vec::with_capacity(h * w * c);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                out.push((img.get(ch, y, x) * 255.0).round() as u8);
            }
        }
    }
    out
}

/// Builds an image from interleaved 8-bit samples.
pub fn from_bytes(height: usize, width: usize, channels: usize, bytes: &[u8]) -> Result<ImageBuffer> {
    if bytes.len() != height * width * channels {
        return Err(Error::Data("pixel buffer has the wrong length".into()));
    }
    let mut data = vec![0.0f32; bytes.len()];
    for (i, b) in bytes.iter().enumerate() {
        let ch = i % channels;
        let p = i / channels;
        data[ch * height * width + p] = *b as f32 / 255.0;
    }
    ImageBuffer::new(height, width, channels, data)
}

fn decode_png(bytes: &[u8]) -> Result<ImageBuffer> {
    let perr = |e: png::DecodingError| Error::Data(format!("png decode: {e}"));
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = dec.read_info().map_err(perr)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Data("png too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(perr)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Data(format!("unsupported png depth {:?}", info.bit_depth)));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let src_ch = info.color_type.samples();
    let keep = match info.color_type {
        png::ColorType::Grayscale | png::ColorType::GrayscaleAlpha => 1,
        png::ColorType::Rgb | png::ColorType::Rgba => 3,
        png::ColorType::Indexed => {
            return Err(Error::Data("indexed png was not expanded".into()))
        }
    };
    let mut pixels = Vec::with_capacity(w * h * keep);
    for row in buf[..info.buffer_size()].chunks_exact(info.line_size) {
        for px in row[..w * src_ch].chunks_exact(src_ch) {
            pixels.extend_from_slice(&px[..keep]);
        }
    }
    from_bytes(h, w, keep, &pixels)
}

fn decode_pnm(bytes: &[u8]) -> Result<ImageBuffer> {
    let mut cur = Cursor::new(bytes);
    let mut token = || -> Result<String> {
        let mut tok = Vec::new();
        loop {
            let buf = cur.fill_buf().map_err(|e| Error::Data(e.to_string()))?;
            let Some(&b) = buf.first() else { break };
            cur.consume(1);
            if b == b'#' {
                let mut skip = Vec::new();
                cur.read_until(b'\n', &mut skip).map_err(|e| Error::Data(e.to_string()))?;
                if !tok.is_empty() {
                    break;
                }
                continue;
            }
            if b.is_ascii_whitespace() {
                if tok.is_empty() {
                    continue;
                }
                break;
            }
            tok.push(b);
        }
        String::from_utf8(tok).map_err(|_| Error::Data("bad pnm header".into()))
    };
    let magic = token()?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        m => return Err(Error::Data(format!("unsupported pnm magic {m:?}"))),
    };
    let num = |s: String| -> Result<usize> {
        s.parse().map_err(|_| Error::Data(format!("bad pnm header field {s:?}")))
    };
    let w = num(token()?)?;
    let h = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval != 255 {
        return Err(Error::Data(format!("only 8-bit pnm (maxval 255) is supported, got {maxval}")));
    }
    let mut pixels = Vec::new();
    cur.read_to_end(&mut pixels).map_err(|e| Error::Data(e.to_string()))?;
    if pixels.len() < w * h * channels {
        return Err(Error::Data("truncated pnm data".into()));
    }
    pixels.truncate(w * h * channels);
    from_bytes(h, w, channels, &pixels)
}
