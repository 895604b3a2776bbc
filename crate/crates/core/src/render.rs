//! Map and image export: exact CSV, 8-bit PGM and colour PNG for viewing.
//! Frequency maps are drawn with DC at the centre.

use std::path::Path;

use image::{GrayImage, Luma, Rgb, RgbImage};

use crate::error::Result;
use crate::montecarlo::FreqMap;
use crate::plane::{centered, signed_freq, Plane};
use crate::scene::min_max;

/// Display range over valid entries, falling back to `[0, 1]`.
pub fn valid_range(map: &FreqMap) -> (f64, f64) {
    let (lo, hi) = map.valid_values().filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if lo.is_finite() && hi > lo {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn level(x: f64, lo: f64, hi: f64) -> f64 {
    if !x.is_finite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// Five-stop blue-to-yellow ramp.
fn colour(t: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 5] = [[68., 1., 84.], [59., 82., 139.], [33., 145., 140.], [94., 201., 98.], [253., 231., 37.]];
    let x = t * 4.0;
    let i = (x.floor() as usize).min(3);
    let f = x - i as f64;
    let mut c = [0u8; 3];
    for k in 0..3 {
        c[k] = (STOPS[i][k] + f * (STOPS[i + 1][k] - STOPS[i][k])).round() as u8;
    }
    c
}

pub fn write_map_pgm(map: &FreqMap, range: (f64, f64), path: &Path) -> Result<()> {
    let v = centered(&map.values);
    let ok = centered(&map.valid);
    let m = v.side() as u32;
    let img = GrayImage::from_fn(m, m, |x, y| {
        let (i, j) = (y as usize, x as usize);
        Luma([if ok[(i, j)] { (255.0 * level(v[(i, j)], range.0, range.1)).round() as u8 } else { 0 }])
    });
    img.save_with_format(path, image::ImageFormat::Pnm)?;
    Ok(())
}

pub fn write_map_png(map: &FreqMap, range: (f64, f64), path: &Path) -> Result<()> {
    let v = centered(&map.values);
    let ok = centered(&map.valid);
    let m = v.side() as u32;
    let img = RgbImage::from_fn(m, m, |x, y| {
        let (i, j) = (y as usize, x as usize);
        Rgb(if ok[(i, j)] { colour(level(v[(i, j)], range.0, range.1)) } else { [0, 0, 0] })
    });
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// `kx,ky,value` for valid bins. Infinite values are written as `inf`.
pub fn write_map_csv(map: &FreqMap, header: &str, path: &Path) -> Result<()> {
    let m = map.values.side();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["kx", "ky", header])?;
    for i in 0..m {
        for j in 0..m {
            if map.valid[(i, j)] {
                w.write_record([signed_freq(i, m).to_string(), signed_freq(j, m).to_string(), map.values[(i, j)].to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Pixel image rescaled to 8 bits over its own range.
pub fn write_image_pgm(p: &Plane<f64>, path: &Path) -> Result<()> {
    let (lo, hi) = min_max(p.data());
    let s = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
    let m = p.side() as u32;
    let img = GrayImage::from_fn(m, m, |x, y| Luma([((p[(y as usize, x as usize)] - lo) * s).round() as u8]));
    img.save_with_format(path, image::ImageFormat::Pnm)?;
    Ok(())
}

pub fn write_image_png(p: &Plane<f64>, path: &Path) -> Result<()> {
    let (lo, hi) = min_max(p.data());
    let s = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
    let m = p.side() as u32;
    let img = GrayImage::from_fn(m, m, |x, y| Luma([((p[(y as usize, x as usize)] - lo) * s).round() as u8]));
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// Writes `stem.csv`, `stem.pgm` and `stem.png` for a frequency map.
pub fn write_map_set(map: &FreqMap, header: &str, dir: &Path, stem: &str) -> Result<Vec<std::path::PathBuf>> {
    let range = valid_range(map);
    let paths: Vec<_> = ["csv", "pgm", "png"].iter().map(|e| dir.join(format!("{stem}.{e}"))).collect();
    write_map_csv(map, header, &paths[0])?;
    write_map_pgm(map, range, &paths[1])?;
    write_map_png(map, range, &paths[2])?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colour_ends() {
        assert_eq!(colour(0.0), [68, 1, 84]);
        assert_eq!(colour(1.0), [253, 231, 37]);
    }

    #[test]
    fn masked_bins_are_black_and_absent() {
        let dir = tempfile::tempdir().unwrap();
        let values = Plane::from_fn(4, |i, j| (i + j) as f64);
        let valid = Plane::from_fn(4, |i, _| i != 2);
        let map = FreqMap { values, valid };
        let paths = write_map_set(&map, "v", dir.path(), "m").unwrap();
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(text.lines().count(), 1 + 12);
        assert!(!text.contains("NaN"));
        let img = image::open(&paths[1]).unwrap().into_luma8();
        // bin row 2 is signed frequency -2, drawn at the top row
        assert!((0..4).all(|x| img.get_pixel(x, 0)[0] == 0));
    }
}
