//! A normalized model on disk: `lambda.dnt` (length `R`) and
//! `factor_<n>.dnt` (`I_n × R`) for `n = 1, …, N`.

use std::path::Path;

use smoothntf_core::{DenseTensor, Matrix, NormalizedFactorModel, Shape};

use crate::dnt::{read_tensor, write_tensor};
use crate::error::{IoError, IoResult};
use crate::fsutil::create_dir;

pub fn write_model(dir: &Path, model: &NormalizedFactorModel) -> IoResult<()> {
    create_dir(dir)?;
    let rank = model.lambda().len();
    write_tensor(&dir.join("lambda.dnt"), &DenseTensor::new(Shape::new(vec![rank])?, model.lambda().to_vec())?)?;
    for (n, f) in model.factors().iter().enumerate() {
        let t = DenseTensor::new(Shape::new(vec![f.rows(), f.cols()])?, f.as_slice().to_vec())?;
        write_tensor(&dir.join(format!("factor_{}.dnt", n + 1)), &t)?;
    }
    Ok(())
}

pub fn read_model(dir: &Path) -> IoResult<NormalizedFactorModel> {
    let lambda = read_tensor(&dir.join("lambda.dnt"))?;
    if lambda.dims().len() != 1 {
        return Err(IoError::Invalid(format!("{}: lambda must be a vector", dir.display())));
    }
    let mut factors = Vec::new();
    loop {
        let path = dir.join(format!("factor_{}.dnt", factors.len() + 1));
        if !path.exists() {
            break;
        }
        let t = read_tensor(&path)?;
        let [rows, cols] = *t.dims() else {
            return Err(IoError::Invalid(format!("{}: factors must be matrices", path.display())));
        };
        factors.push(Matrix::from_vec(rows, cols, t.into_values())?);
    }
    if factors.is_empty() {
        return Err(IoError::Invalid(format!("{}: no factor files", dir.display())));
    }
    Ok(NormalizedFactorModel::new(lambda.into_values(), factors)?)
}
