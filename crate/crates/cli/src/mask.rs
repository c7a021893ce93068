//! Missing-data masks.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smoothntf_core::{Shape, WeightMask};

use crate::error::{IoError, IoResult};
use crate::netpbm::read_pgm;

#[derive(Debug, Clone, PartialEq)]
pub enum MaskSpec {
    /// Every entry missing independently with probability `fraction`.
    Uniform { fraction: f64, seed: u64 },
    /// `round(fraction · H·W)` pixel positions missing in every channel.
    Pixelwise { fraction: f64, seed: u64 },
    /// Pixels with value 0 in a grayscale image are missing in every channel.
    FromPgm(PathBuf),
}

impl MaskSpec {
    /// Same kind with a different seed; PGM masks are unaffected.
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            MaskSpec::Uniform { fraction, .. } => MaskSpec::Uniform { fraction, seed },
            MaskSpec::Pixelwise { fraction, .. } => MaskSpec::Pixelwise { fraction, seed },
            other => other,
        }
    }
}

/// `uniform:F`, `pixelwise:F` or `pgm:PATH`; seeds default to 0.
impl FromStr for MaskSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, arg) = s.split_once(':').ok_or_else(|| format!("mask {s:?} is not KIND:ARG"))?;
        let fraction = || arg.parse::<f64>().map_err(|_| format!("bad fraction {arg:?}"));
        match kind {
            "uniform" => Ok(MaskSpec::Uniform { fraction: fraction()?, seed: 0 }),
            "pixelwise" => Ok(MaskSpec::Pixelwise { fraction: fraction()?, seed: 0 }),
            "pgm" => Ok(MaskSpec::FromPgm(PathBuf::from(arg))),
            _ => Err(format!("unknown mask kind {kind:?}; expected uniform, pixelwise or pgm")),
        }
    }
}

fn check_fraction(fraction: f64) -> IoResult<()> {
    if (0.0..1.0).contains(&fraction) {
        Ok(())
    } else {
        Err(IoError::Invalid(format!("missing fraction must lie in [0, 1), got {fraction}")))
    }
}

pub fn uniform_mask(shape: &Shape, fraction: f64, rng: &mut impl Rng) -> IoResult<WeightMask> {
    check_fraction(fraction)?;
    Ok(WeightMask::from_observed(shape.clone(), |_| rng.random::<f64>() >= fraction))
}

fn pixel_count(shape: &Shape) -> IoResult<(usize, usize)> {
    let dims = shape.dims();
    if !(2..=3).contains(&dims.len()) {
        return Err(IoError::Invalid(format!("pixel masks need an HxW or HxWxC shape, got {dims:?}")));
    }
    Ok((dims[0] * dims[1], dims.get(2).copied().unwrap_or(1)))
}

pub fn make_mask(shape: &Shape, spec: &MaskSpec) -> IoResult<WeightMask> {
    match spec {
        MaskSpec::Uniform { fraction, seed } => uniform_mask(shape, *fraction, &mut ChaCha8Rng::seed_from_u64(*seed)),
        MaskSpec::Pixelwise { fraction, seed } => {
            check_fraction(*fraction)?;
            let (pixels, channels) = pixel_count(shape)?;
            let missing = (fraction * pixels as f64).round() as usize;
            let mut order: Vec<usize> = (0..pixels).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
            let mut keep = vec![true; pixels];
            for &p in &order[..missing] {
                keep[p] = false;
            }
            Ok(WeightMask::from_observed(shape.clone(), |flat| keep[flat / channels]))
        }
        MaskSpec::FromPgm(path) => mask_from_pgm(shape, path),
    }
}

fn mask_from_pgm(shape: &Shape, path: &Path) -> IoResult<WeightMask> {
    let (pixels, channels) = pixel_count(shape)?;
    let image = read_pgm(path)?;
    if image.dims() != &shape.dims()[..2] {
        return Err(IoError::Invalid(format!(
            "{}: mask is {:?} but the data is {:?}",
            path.display(),
            image.dims(),
            &shape.dims()[..2]
        )));
    }
    debug_assert_eq!(image.values().len(), pixels);
    let values = image.values();
    Ok(WeightMask::from_observed(shape.clone(), |flat| values[flat / channels] != 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netpbm::write_pgm;
    use smoothntf_core::DenseTensor;

    fn shape(d: &[usize]) -> Shape {
        Shape::new(d.to_vec()).unwrap()
    }

    #[test]
    fn pixelwise_removes_whole_pixels() {
        let s = shape(&[10, 10, 3]);
        let w = make_mask(&s, &MaskSpec::Pixelwise { fraction: 0.8, seed: 5 }).unwrap();
        let mut missing_pixels = 0;
        for p in 0..100 {
            let obs: Vec<bool> = (0..3).map(|c| w.is_observed(p * 3 + c)).collect();
            assert!(obs.iter().all(|&o| o == obs[0]));
            missing_pixels += usize::from(!obs[0]);
        }
        assert_eq!(missing_pixels, 80);
    }

    #[test]
    fn zero_fraction_keeps_everything() {
        let s = shape(&[4, 5, 3]);
        for spec in [MaskSpec::Uniform { fraction: 0.0, seed: 1 }, MaskSpec::Pixelwise { fraction: 0.0, seed: 1 }] {
            assert_eq!(make_mask(&s, &spec).unwrap().observed_count(), 60);
        }
        assert!(make_mask(&s, &MaskSpec::Uniform { fraction: 1.0, seed: 1 }).is_err());
        assert!(make_mask(&s, &MaskSpec::Pixelwise { fraction: -0.1, seed: 1 }).is_err());
    }

    #[test]
    fn uniform_fraction_is_close_and_seeded() {
        let s = shape(&[40, 40, 10]);
        let spec = MaskSpec::Uniform { fraction: 0.3, seed: 9 };
        let w = make_mask(&s, &spec).unwrap();
        let frac = 1.0 - w.observed_count() as f64 / 16000.0;
        assert!((frac - 0.3).abs() < 0.02, "{frac}");
        assert_eq!(w, make_mask(&s, &spec).unwrap());
    }

    #[test]
    fn pgm_masks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        write_pgm(&path, &DenseTensor::filled(shape(&[3, 4]), 255.0)).unwrap();
        let w = make_mask(&shape(&[3, 4, 3]), &MaskSpec::FromPgm(path.clone())).unwrap();
        assert_eq!(w.observed_count(), 36);
        let scribble = DenseTensor::from_fn(shape(&[3, 4]), |i| if i == [1, 2] { 0.0 } else { 200.0 }).unwrap();
        write_pgm(&path, &scribble).unwrap();
        let w = make_mask(&shape(&[3, 4, 3]), &MaskSpec::FromPgm(path.clone())).unwrap();
        assert_eq!(w.observed_count(), 33);
        assert!(!w.is_observed((4 + 2) * 3 + 1));
        assert!(make_mask(&shape(&[4, 4, 3]), &MaskSpec::FromPgm(path)).is_err());
    }

    #[test]
    fn parses_specs() {
        assert_eq!("uniform:0.5".parse(), Ok(MaskSpec::Uniform { fraction: 0.5, seed: 0 }));
        assert_eq!("pixelwise:0.8".parse(), Ok(MaskSpec::Pixelwise { fraction: 0.8, seed: 0 }));
        assert_eq!("pgm:a/b.pgm".parse(), Ok(MaskSpec::FromPgm("a/b.pgm".into())));
        assert!("scribble".parse::<MaskSpec>().is_err());
        assert!("uniform:x".parse::<MaskSpec>().is_err());
    }
}
