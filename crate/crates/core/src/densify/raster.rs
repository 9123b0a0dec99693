//! Pixel-level counterparts of mosaic and mixup, with binary PPM I/O.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl Raster {
    pub fn solid(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Self { width, height, data }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        write!(w, "P6\n{} {}\n255\n", self.width, self.height).map_err(|e| Error::io(path, e))?;
        w.write_all(&self.data).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_ppm(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let bad = |msg: &str| Error::Load {
            path: path.to_path_buf(),
            reason: msg.to_string(),
        };
        let mut header = Vec::new();
        while header.len() < 4 {
            let mut line = String::new();
            if r.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
                return Err(bad("truncated PPM header"));
            }
            let line = line.split('#').next().unwrap_or("");
            header.extend(line.split_whitespace().map(str::to_string));
        }
        if header[0] != "P6" || header[3] != "255" {
            return Err(bad("only binary 8-bit PPM (P6, maxval 255) is supported"));
        }
        let width: u32 = header[1].parse().map_err(|_| bad("bad width"))?;
        let height: u32 = header[2].parse().map_err(|_| bad("bad height"))?;
        let mut data = vec![0u8; width as usize * height as usize * 3];
        r.read_exact(&mut data).map_err(|e| Error::io(path, e))?;
        Ok(Self { width, height, data })
    }
}

pub enum ComposeMode {
    /// Four sources into the quadrants, in top-left, top-right, bottom-left, bottom-right order.
    Mosaic,
    /// Two sources, `ratio * first + (1 - ratio) * second`.
    Mixup { ratio: f64 },
}

/// Composes rasters to match the annotation transforms.
///
/// Returns `None` (with a warning) when any input raster is missing.
pub fn compose_raster(inputs: &[Option<&Raster>], mode: ComposeMode) -> Result<Option<Raster>> {
    let expected = match mode {
        ComposeMode::Mosaic => 4,
        ComposeMode::Mixup { .. } => 2,
    };
    if inputs.len() != expected {
        return Err(Error::input(format!(
            "raster composition needs {expected} inputs, got {}",
            inputs.len()
        )));
    }
    let Some(rasters) = inputs.iter().copied().collect::<Option<Vec<&Raster>>>() else {
        log::warn!("skipping raster composition: missing input raster");
        return Ok(None);
    };
    Ok(Some(match mode {
        ComposeMode::Mosaic => mosaic_raster(&rasters),
        ComposeMode::Mixup { ratio } => mixup_raster(rasters[0], rasters[1], ratio)?,
    }))
}

fn mosaic_raster(src: &[&Raster]) -> Raster {
    let (w, h) = (src[0].width, src[0].height);
    let mut out = Raster::solid(w, h, [0, 0, 0]);
    let (half_w, half_h) = (w / 2, h / 2);
    for y in 0..h {
        for x in 0..w {
            let (qx, lx, qw) = if x < half_w {
                (0, x, half_w)
            } else {
                (1, x - half_w, w - half_w)
            };
            let (qy, ly, qh) = if y < half_h {
                (0, y, half_h)
            } else {
                (1, y - half_h, h - half_h)
            };
            let s = src[qy * 2 + qx];
            // nearest-neighbour downsample of the whole source into the quadrant
            let sx = (((lx as f64 + 0.5) * s.width as f64 / qw as f64) as u32).min(s.width - 1);
            let sy = (((ly as f64 + 0.5) * s.height as f64 / qh as f64) as u32).min(s.height - 1);
            out.set(x, y, s.pixel(sx, sy));
        }
    }
    out
}

fn mixup_raster(a: &Raster, b: &Raster, ratio: f64) -> Result<Raster> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::input("mixup rasters must share dimensions"));
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::input(format!("mixup ratio must lie in [0, 1], got {ratio}")));
    }
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| (ratio * x as f64 + (1.0 - ratio) * y as f64).round() as u8)
        .collect();
    Ok(Raster {
        width: a.width,
        height: a.height,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densify::{mosaic4, ImageAnnotations};
    use crate::geometry::BBox;
    use crate::matching::Target;

    const COLORS: [[u8; 3]; 4] = [[255, 0, 0], [0, 255, 0], [0, 0, 255], [255, 255, 0]];

    #[test]
    fn mosaic_quadrants_keep_source_colors() {
        let srcs: Vec<Raster> = COLORS.iter().map(|&c| Raster::solid(8, 6, c)).collect();
        let refs: Vec<Option<&Raster>> = srcs.iter().map(Some).collect();
        let m = compose_raster(&refs, ComposeMode::Mosaic).unwrap().unwrap();
        for y in 0..6 {
            for x in 0..8 {
                let q = (y / 3) * 2 + x / 4;
                assert_eq!(m.pixel(x, y), COLORS[q as usize]);
            }
        }
    }

    #[test]
    fn mixup_white_black_is_mid_gray() {
        let white = Raster::solid(4, 4, [255; 3]);
        let black = Raster::solid(4, 4, [0; 3]);
        let g = compose_raster(&[Some(&white), Some(&black)], ComposeMode::Mixup { ratio: 0.5 })
            .unwrap()
            .unwrap();
        assert!(g.data.iter().all(|&v| (v as f64 - 127.5).abs() <= 1.0));
    }

    #[test]
    fn missing_raster_is_skipped() {
        let white = Raster::solid(4, 4, [255; 3]);
        let out = compose_raster(&[Some(&white), None], ComposeMode::Mixup { ratio: 0.5 }).unwrap();
        assert!(out.is_none());
    }

    #[test]
    fn box_corners_land_in_their_quadrant() {
        // Each source has one box painted white on black; after mosaic the
        // transformed box corners must sample white.
        let (w, h) = (64u32, 48u32);
        let boxes = [
            (0.3, 0.4, 0.4, 0.5),
            (0.6, 0.5, 0.5, 0.3),
            (0.5, 0.5, 0.6, 0.6),
            (0.7, 0.7, 0.3, 0.4),
        ];
        let mut rasters = Vec::new();
        let mut anns = Vec::new();
        for (k, &(cx, cy, bw, bh)) in boxes.iter().enumerate() {
            let bbox = BBox::new(cx, cy, bw, bh);
            let c = bbox.to_corners();
            let mut r = Raster::solid(w, h, [0; 3]);
            for y in 0..h {
                for x in 0..w {
                    let (fx, fy) = ((x as f64 + 0.5) / w as f64, (y as f64 + 0.5) / h as f64);
                    if fx >= c.x0 && fx <= c.x1 && fy >= c.y0 && fy <= c.y1 {
                        r.set(x, y, [255; 3]);
                    }
                }
            }
            rasters.push(r);
            anns.push(ImageAnnotations::new(k as u64, w, h, vec![Target::new(bbox, 0)]));
        }
        let refs: Vec<_> = rasters.iter().map(Some).collect();
        let m = compose_raster(&refs, ComposeMode::Mosaic).unwrap().unwrap();
        let a = mosaic4(&anns[0], &anns[1], &anns[2], &anns[3]).unwrap();
        for (k, t) in a.targets.iter().enumerate() {
            let c = t.bbox.to_corners();
            // sample one pixel inside each corner
            for (fx, fy) in [(c.x0, c.y0), (c.x1, c.y0), (c.x0, c.y1), (c.x1, c.y1)] {
                let ix = (fx * w as f64).clamp(0.0, (w - 1) as f64);
                let iy = (fy * h as f64).clamp(0.0, (h - 1) as f64);
                let px = if fx == c.x0 { ix.ceil() + 1.0 } else { ix.floor() - 1.0 } as u32;
                let py = if fy == c.y0 { iy.ceil() + 1.0 } else { iy.floor() - 1.0 } as u32;
                assert_eq!(m.pixel(px, py), [255; 3], "target {k} corner ({fx}, {fy})");
                let quadrant = (py / (h / 2)) * 2 + px / (w / 2);
                assert_eq!(quadrant as usize, k);
            }
        }
    }

    #[test]
    fn ppm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ppm");
        let mut r = Raster::solid(3, 2, [1, 2, 3]);
        r.set(2, 1, [200, 100, 50]);
        r.write_ppm(&path).unwrap();
        assert_eq!(Raster::read_ppm(&path).unwrap(), r);
    }
}
