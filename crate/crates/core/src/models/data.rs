//! Regression datasets: CSV ingestion and seeded synthetic generators.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal, StudentT};

use crate::error::{NgviError, Result};

/// `M` responses with their `d` covariates (one row per datum).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub z: DMatrix<f64>,
    pub y: DVector<f64>,
    pub standardized: bool,
}

impl Dataset {
    pub fn new(z: DMatrix<f64>, y: DVector<f64>) -> Result<Dataset> {
        if z.nrows() != y.len() {
            return Err(NgviError::DimensionMismatch { expected: z.nrows(), got: y.len() });
        }
        if z.nrows() == 0 || z.ncols() == 0 {
            return Err(NgviError::InvalidArgument("dataset must have at least one row and one covariate".into()));
        }
        if z.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(NgviError::InvalidArgument("dataset contains non-finite values".into()));
        }
        Ok(Dataset { z, y, standardized: false })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    /// Shifts and scales every covariate column to mean 0 and sample
    /// standard deviation 1. Constant columns are only centered.
    pub fn standardize(mut self) -> Dataset {
        for mut col in self.z.column_iter_mut() {
            let (mean, sd) = mean_sd(&col.iter().copied().collect::<Vec<_>>());
            col.apply(|v| *v -= mean);
            if sd > 0.0 {
                col.apply(|v| *v /= sd);
            }
        }
        self.standardized = true;
        self
    }

    /// Standardizes the response as well.
    pub fn standardize_response(mut self) -> Dataset {
        let (mean, sd) = mean_sd(self.y.as_slice());
        self.y.apply(|v| *v -= mean);
        if sd > 0.0 {
            self.y.apply(|v| *v /= sd);
        }
        self
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if n > 1.0 { xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Reads a comma-separated file with a header row.
///
/// `covariates` defaults to every column other than `response`.
pub fn load_csv(
    path: impl AsRef<Path>,
    response: &str,
    covariates: Option<&[String]>,
    standardize: bool,
) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers: Vec<String> =
        reader.headers().map_err(|e| csv_error(path, e))?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| NgviError::Schema(format!("column '{name}' not found in {}", path.display())))
    };
    let y_idx = find(response)?;
    let z_names: Vec<String> = match covariates {
        Some(c) => c.to_vec(),
        None => headers.iter().filter(|h| h.as_str() != response).cloned().collect(),
    };
    let z_idx = z_names.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;

    let mut ys = Vec::new();
    let mut zs = Vec::new();
    for (row, record) in reader.records().enumerate() {
        // Row numbers are 1-based and count the header line.
        let row = row + 2;
        let record = record.map_err(|e| csv_error(path, e))?;
        let parse = |idx: usize, name: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| NgviError::Parse {
                row,
                column: name.to_string(),
                message: format!("'{raw}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(NgviError::Parse { row, column: name.to_string(), message: "non-finite value".into() });
            }
            Ok(v)
        };
        ys.push(parse(y_idx, response)?);
        for (idx, name) in z_idx.iter().zip(&z_names) {
            zs.push(parse(*idx, name)?);
        }
    }
    let m = ys.len();
    if m == 0 {
        return Err(NgviError::EmptyInput(format!("{} has no data rows", path.display())));
    }
    let data = Dataset::new(DMatrix::from_row_slice(m, z_idx.len(), &zs), DVector::from_vec(ys))?;
    Ok(if standardize { data.standardize() } else { data })
}

fn csv_error(path: &Path, e: csv::Error) -> NgviError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => NgviError::io(path, io),
            _ => unreachable!(),
        }
    } else {
        NgviError::Schema(format!("{}: {e}", path.display()))
    }
}

/// Linear-Gaussian regression data: standardized normal covariates,
/// `x_true ~ N(0, I)` and `y = zᵀx_true + ε`, `ε ~ N(0, 1)`.
pub fn synthetic_linear(m: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::<f64>::from_fn(m, d, |_, _| rng.sample(StandardNormal));
    let z = Dataset { z, y: DVector::zeros(m), standardized: false }.standardize().z;
    let x_true = DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
    let y = &z * x_true + DVector::<f64>::from_fn(m, |_, _| rng.sample(StandardNormal));
    Dataset { z, y, standardized: true }
}

/// Logistic-regression data: covariates uniform on `[-5, 5]^d` and
/// `y ~ Bernoulli(1 / (1 + exp(−⟨x_star, z⟩)))` with every component of
/// `x_star` equal to `x_star_value`.
pub fn synthetic_logistic(m: usize, d: usize, x_star_value: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::<f64>::from_fn(m, d, |_, _| rng.random_range(-5.0..=5.0));
    let x_star = DVector::from_element(d, x_star_value);
    let s = &z * x_star;
    let y = s.map(|s| {
        let p = 1.0 / (1.0 + (-s).exp());
        let b = Bernoulli::new(p).expect("probability in [0, 1]");
        if b.sample(&mut rng) { 1.0 } else { 0.0 }
    });
    Dataset { z, y, standardized: false }
}

/// Heavy-tailed regression data: standardized normal covariates,
/// `x_true ~ N(0, I)`, `y = zᵀx_true + ε` with Student-t noise of `dof`
/// degrees of freedom, and the response standardized as well.
pub fn synthetic_student(m: usize, d: usize, dof: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::<f64>::from_fn(m, d, |_, _| rng.sample(StandardNormal));
    let z = Dataset { z, y: DVector::zeros(m), standardized: false }.standardize().z;
    let x_true = DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
    let t = StudentT::new(dof).expect("dof > 0");
    let y = &z * x_true + DVector::<f64>::from_fn(m, |_, _| t.sample(&mut rng));
    Dataset { z, y, standardized: true }.standardize_response()
}
