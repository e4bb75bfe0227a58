use std::path::Path;

use ndarray::Array2;

use crate::distributions::{DiscreteDistribution, SupportGrid};
use crate::error::{Error, Result};

/// Binary greymap with the largest weight mapped to 255.
pub fn encode_pgm(dist: &DiscreteDistribution, grid: &SupportGrid) -> Result<Vec<u8>> {
    let (rows, cols) = grid.lattice_shape().ok_or(Error::NonRectangularGrid)?;
    if dist.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            got: dist.len(),
        });
    }
    let peak = dist.weights().iter().cloned().fold(0.0, f64::max);
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(
        dist.weights()
            .iter()
            .map(|&w| if peak > 0.0 { (255.0 * w / peak).round() as u8 } else { 0 }),
    );
    Ok(out)
}

pub fn write_pgm(dist: &DiscreteDistribution, grid: &SupportGrid, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_pgm(dist, grid)?)?;
    Ok(())
}

fn header_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    let bad = |msg: &str| Error::Parse {
        line: 1,
        msg: msg.to_string(),
    };
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(bad("header ends early")),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    Ok(&bytes[start..*pos])
}

fn header_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    let tok = header_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse {
            line: 1,
            msg: format!("bad header field {:?}", String::from_utf8_lossy(tok)),
        })
}

/// Reads an 8-bit binary greymap into raw pixel values.
pub fn parse_pgm(bytes: &[u8]) -> Result<Array2<f64>> {
    let mut pos = 0;
    if header_token(bytes, &mut pos)? != b"P5" {
        return Err(Error::Parse {
            line: 1,
            msg: "not a binary greymap".into(),
        });
    }
    let cols = header_number(bytes, &mut pos)?;
    let rows = header_number(bytes, &mut pos)?;
    let maxval = header_number(bytes, &mut pos)?;
    if !(1..=255).contains(&maxval) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unsupported maxval {maxval}"),
        });
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let size = rows.checked_mul(cols).ok_or(Error::TruncatedFile {
        expected: usize::MAX,
        found: bytes.len(),
    })?;
    let raster = bytes.get(pos..).unwrap_or_default();
    if raster.len() < size {
        return Err(Error::TruncatedFile {
            expected: pos.saturating_add(size),
            found: bytes.len(),
        });
    }
    Ok(Array2::from_shape_fn((rows, cols), |(r, c)| f64::from(raster[r * cols + c])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_is_white() {
        let grid = SupportGrid::lattice(2, 2).unwrap();
        let bytes = encode_pgm(&DiscreteDistribution::uniform(4).unwrap(), &grid).unwrap();
        assert_eq!(&bytes[..11], b"P5\n2 2\n255\n");
        assert_eq!(&bytes[11..], &[255; 4]);
    }

    #[test]
    fn point_mass_is_one_pixel() {
        let grid = SupportGrid::lattice(3, 2).unwrap();
        let d = DiscreteDistribution::new(vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let img = parse_pgm(&encode_pgm(&d, &grid).unwrap()).unwrap();
        assert_eq!(img.dim(), (3, 2));
        assert_eq!(img[[1, 1]], 255.0);
        assert_eq!(img.sum(), 255.0);
    }

    #[test]
    fn argmax_survives_round_trip() {
        let grid = SupportGrid::lattice(4, 5).unwrap();
        let masses: Vec<f64> = (0..20).map(|i| ((i * 7) % 20) as f64 + 1.0).collect();
        let d = DiscreteDistribution::from_masses(masses).unwrap();
        let argmax = |v: &mut dyn Iterator<Item = f64>| {
            v.enumerate().fold((0, f64::MIN), |b, (i, x)| if x > b.1 { (i, x) } else { b }).0
        };
        let img = parse_pgm(&encode_pgm(&d, &grid).unwrap()).unwrap();
        assert_eq!(
            argmax(&mut d.weights().iter().cloned()),
            argmax(&mut img.iter().cloned())
        );
    }

    #[test]
    fn line_support_is_not_an_image() {
        let grid = SupportGrid::linspace(0.0, 1.0, 4).unwrap();
        assert!(matches!(
            encode_pgm(&DiscreteDistribution::uniform(4).unwrap(), &grid),
            Err(Error::NonRectangularGrid)
        ));
    }

    #[test]
    fn comments_and_truncation() {
        let img = parse_pgm(b"P5 # c\n1 2\n# x\n255\n\x01\x02").unwrap();
        assert_eq!(img.into_raw_vec_and_offset().0, vec![1.0, 2.0]);
        assert!(matches!(parse_pgm(b"P5\n2 2\n255\n\x01"), Err(Error::TruncatedFile { .. })));
        assert!(parse_pgm(b"P2\n1 1\n255\n1").is_err());
    }
}
