use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};

/// Rescales `img` by `scale` (nearest neighbor) and pastes it on a blank
/// `canvas x canvas` image with its top-left corner at `offset`.
pub fn preprocess_image(
    img: &Array2<f64>,
    scale: f64,
    offset: (usize, usize),
    canvas: usize,
) -> Result<Array2<f64>> {
    if !(0.5..=2.0).contains(&scale) {
        return Err(Error::InvalidParameter(format!("scale {scale} outside [0.5, 2]")));
    }
    let (h, w) = img.dim();
    let (sh, sw) = scaled_dims(h, w, scale);
    let (r0, c0) = offset;
    if r0.saturating_add(sh) > canvas || c0.saturating_add(sw) > canvas {
        return Err(Error::OutOfCanvas {
            size: (sh, sw),
            row: r0,
            col: c0,
            canvas,
        });
    }
    let mut out = Array2::zeros((canvas, canvas));
    for r in 0..sh {
        let src_r = r * h / sh;
        for c in 0..sw {
            out[[r0 + r, c0 + c]] = img[[src_r, c * w / sw]];
        }
    }
    Ok(out)
}

pub fn scaled_dims(h: usize, w: usize, scale: f64) -> (usize, usize) {
    let s = |x: usize| ((x as f64 * scale).round() as usize).max(1);
    (s(h), s(w))
}

/// Draws a scale in `[lo, hi]` and a uniformly placed offset that fits `canvas`.
pub fn random_placement<R: Rng>(
    rng: &mut R,
    dims: (usize, usize),
    scale_range: (f64, f64),
    canvas: usize,
) -> Result<(f64, (usize, usize))> {
    let (lo, hi) = scale_range;
    let scale = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let (sh, sw) = scaled_dims(dims.0, dims.1, scale);
    if sh > canvas || sw > canvas {
        return Err(Error::OutOfCanvas {
            size: (sh, sw),
            row: 0,
            col: 0,
            canvas,
        });
    }
    let row = rng.random_range(0..=canvas - sh);
    let col = rng.random_range(0..=canvas - sw);
    Ok((scale, (row, col)))
}

/// A 28x28 hand-drawn-looking seven with jittered strokes, for runs without
/// a dataset on disk.
pub fn synthetic_seven<R: Rng>(rng: &mut R) -> Array2<f64> {
    let mut j = |v: f64| v + rng.random_range(-1.5..1.5);
    let top = ((j(6.0), j(7.0)), (j(6.0), j(20.0)));
    let stem = (top.1, (j(22.0), j(11.0)));
    let width = 1.0 + rng.random_range(0.0..1.0);
    let mut img = Array2::zeros((28, 28));
    for ((a, b), (c, d)) in [top, stem] {
        for r in 0..28 {
            for col in 0..28 {
                let dist = segment_distance((r as f64, col as f64), (a, b), (c, d));
                let v = 255.0 * (1.0 - (dist - width).max(0.0)).clamp(0.0, 1.0);
                let px: &mut f64 = &mut img[[r, col]];
                *px = px.max(v);
            }
        }
    }
    img
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (ex * ex + ey * ey).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp() -> Array2<f64> {
        Array2::from_shape_fn((28, 28), |(r, c)| (r * 28 + c) as f64 + 1.0)
    }

    #[test]
    fn identity_placement() {
        let out = preprocess_image(&ramp(), 1.0, (0, 0), 56).unwrap();
        assert_eq!(out.slice(ndarray::s![..28, ..28]), ramp());
        assert_eq!(out.sum(), ramp().sum());
    }

    #[test]
    fn double_fills_canvas() {
        let out = preprocess_image(&ramp(), 2.0, (0, 0), 56).unwrap();
        assert!(out.iter().all(|&v| v > 0.0));
        assert_eq!(out[[55, 55]], ramp()[[27, 27]]);
        for off in [(0, 1), (1, 0), (3, 3)] {
            assert!(matches!(
                preprocess_image(&ramp(), 2.0, off, 56),
                Err(Error::OutOfCanvas { .. })
            ));
        }
    }

    #[test]
    fn half_scale_region() {
        let out = preprocess_image(&ramp(), 0.5, (5, 9), 56).unwrap();
        let nonzero: Vec<_> = out.indexed_iter().filter(|(_, &v)| v != 0.0).map(|(i, _)| i).collect();
        assert_eq!(nonzero.len(), 14 * 14);
        assert!(nonzero.iter().all(|&(r, c)| (5..19).contains(&r) && (9..23).contains(&c)));
    }

    #[test]
    fn placements_fit_and_repeat() {
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (s, off) = random_placement(&mut a, (28, 28), (0.5, 2.0), 56).unwrap();
            assert_eq!((s, off), random_placement(&mut b, (28, 28), (0.5, 2.0), 56).unwrap());
            assert!(preprocess_image(&ramp(), s, off, 56).is_ok());
        }
        assert_eq!(synthetic_seven(&mut a), synthetic_seven(&mut b));
        assert!(synthetic_seven(&mut a).sum() > 0.0);
    }
}
