use std::fs;
use std::io::Write;
use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::mathdiff::Vec3;

use super::CoverageMap;

const MAGIC: &str = "RTCOVERAGE 1";

/// Writes a text header followed by `nx·ny` little-endian f64 gains,
/// row-major with x varying fastest:
///
/// ```text
/// RTCOVERAGE 1
/// nx 64
/// ny 64
/// origin_m -64 -64
/// cell_m 2
/// height_m 1.5
/// frequency_hz 3500000000
/// end
/// ```
pub fn write_coverage(path: &Path, map: &CoverageMap) -> Result<()> {
    let mut buf = Vec::with_capacity(256 + map.gain.len() * 8);
    writeln!(buf, "{MAGIC}").unwrap();
    writeln!(buf, "nx {}", map.nx).unwrap();
    writeln!(buf, "ny {}", map.ny).unwrap();
    writeln!(buf, "origin_m {} {}", map.origin[0], map.origin[1]).unwrap();
    writeln!(buf, "cell_m {}", map.cell_size).unwrap();
    writeln!(buf, "height_m {}", map.height).unwrap();
    writeln!(buf, "frequency_hz {}", map.frequency_hz).unwrap();
    writeln!(buf, "end").unwrap();
    for g in &map.gain {
        buf.extend_from_slice(&g.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_coverage(path: &Path) -> Result<CoverageMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column: 1,
        message,
    };
    let mut pos = 0;
    let mut lines = Vec::new();
    loop {
        let nl = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| parse_err(lines.len() + 1, "header is not terminated by 'end'".into()))?;
        let line = std::str::from_utf8(&bytes[pos..pos + nl])
            .map_err(|_| parse_err(lines.len() + 1, "header is not UTF-8".into()))?
            .to_string();
        pos += nl + 1;
        if line == "end" {
            break;
        }
        lines.push(line);
    }
    if lines.first().map(String::as_str) != Some(MAGIC) {
        return Err(parse_err(1, format!("expected '{MAGIC}'")));
    }
    let field = |key: &str| -> Result<(usize, Vec<f64>)> {
        let (i, l) = lines
            .iter()
            .enumerate()
            .find(|(_, l)| l.split_whitespace().next() == Some(key))
            .ok_or_else(|| parse_err(lines.len() + 1, format!("missing header field '{key}'")))?;
        let vals = l
            .split_whitespace()
            .skip(1)
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| parse_err(i + 1, format!("bad number '{t}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((i + 1, vals))
    };
    let scalar = |key: &str| -> Result<f64> {
        let (line, v) = field(key)?;
        match v.as_slice() {
            [x] => Ok(*x),
            _ => Err(parse_err(line, format!("'{key}' takes one value"))),
        }
    };
    let nx = scalar("nx")? as usize;
    let ny = scalar("ny")? as usize;
    let (oline, origin) = field("origin_m")?;
    if origin.len() != 2 {
        return Err(parse_err(oline, "'origin_m' takes two values".into()));
    }
    let data = &bytes[pos..];
    if data.len() != nx * ny * 8 {
        return Err(parse_err(
            lines.len() + 2,
            format!("expected {} bytes of gain data, found {}", nx * ny * 8, data.len()),
        ));
    }
    let gain = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(CoverageMap {
        origin: [origin[0], origin[1]],
        cell_size: scalar("cell_m")?,
        nx,
        ny,
        height: scalar("height_m")?,
        frequency_hz: scalar("frequency_hz")?,
        gain,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PngOptions {
    /// Gains at or below this (and zero cells) get the lowest color.
    pub floor_db: f64,
    /// Top of the color ramp; `None` uses the map maximum.
    pub ceiling_db: Option<f64>,
    /// Polylines (world coordinates) drawn on top in white.
    pub overlay: Vec<Vec<Vec3>>,
    /// Pixels per cell; 0 picks one so the image is at least 512 px wide.
    pub scale: usize,
}

impl Default for PngOptions {
    fn default() -> Self {
        Self {
            floor_db: -150.0,
            ceiling_db: None,
            overlay: Vec::new(),
            scale: 0,
        }
    }
}

const RAMP: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

fn ramp(t: f64) -> Rgb<u8> {
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (t.floor() as usize).min(RAMP.len() - 2);
    let f = t - i as f64;
    let mut c = [0u8; 3];
    for k in 0..3 {
        c[k] = (RAMP[i][k] + f * (RAMP[i + 1][k] - RAMP[i][k])).round() as u8;
    }
    Rgb(c)
}

/// Renders the map in dB to an RGB image, north (+y) up.
pub fn render_png(map: &CoverageMap, opts: &PngOptions, path: &Path) -> Result<()> {
    let scale = if opts.scale > 0 {
        opts.scale
    } else {
        (512 / map.nx.max(map.ny).max(1)).max(1)
    };
    let db: Vec<f64> = map
        .gain
        .iter()
        .map(|&g| if g > 0.0 { 10.0 * g.log10() } else { f64::NEG_INFINITY })
        .collect();
    let top = opts
        .ceiling_db
        .unwrap_or_else(|| db.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let span = if top.is_finite() && top > opts.floor_db {
        top - opts.floor_db
    } else {
        1.0
    };
    let (w, h) = (map.nx * scale, map.ny * scale);
    let mut img = RgbImage::new(w as u32, h as u32);
    for iy in 0..map.ny {
        for ix in 0..map.nx {
            let v = db[iy * map.nx + ix];
            let t = if v.is_finite() { (v - opts.floor_db) / span } else { 0.0 };
            let color = ramp(t);
            for dy in 0..scale {
                for dx in 0..scale {
                    let px = ix * scale + dx;
                    let py = h - 1 - (iy * scale + dy);
                    img.put_pixel(px as u32, py as u32, color);
                }
            }
        }
    }
    let to_px = |p: &Vec3| {
        (
            (p.x - map.origin[0]) / map.cell_size * scale as f64,
            h as f64 - (p.y - map.origin[1]) / map.cell_size * scale as f64,
        )
    };
    for line in &opts.overlay {
        for seg in line.windows(2) {
            let (x0, y0) = to_px(&seg[0]);
            let (x1, y1) = to_px(&seg[1]);
            let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
            for s in 0..=steps {
                let f = s as f64 / steps as f64;
                let (x, y) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
                if x >= 0.0 && y >= 0.0 && (x as usize) < w && (y as usize) < h {
                    img.put_pixel(x as u32, y as u32, Rgb([255, 255, 255]));
                }
            }
        }
    }
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))
}
