//! Observations, datasets, and parameter vectors.
//!
//! A [`Dataset`] is an immutable table of observations: a covariate vector
//! plus either a real-valued response or a ±1 class label per row. Bootstrap
//! resampling and the simulation generators produce fresh `Dataset`s; nothing
//! mutates one in place. Rows are stored contiguously so the samplers can
//! stream over them without pointer chasing.

use std::io;

use crate::error::{Error, Result};

/// Response attached to one observation: a real scalar or a ±1 label.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Response {
    Real(f64),
    Label(i8),
}

/// One row: covariates plus response. For regression losses the intercept is
/// carried as a leading constant-1 covariate; the classification loss keeps
/// its explicit intercept instead.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub covariates: Vec<f64>,
    pub response: Response,
}

impl Observation {
    pub fn real(covariates: Vec<f64>, y: f64) -> Self {
        Observation { covariates, response: Response::Real(y) }
    }

    pub fn label(covariates: Vec<f64>, y: i8) -> Self {
        Observation { covariates, response: Response::Label(y) }
    }
}

/// Parameter vector; only finite entries are admitted, so anything that makes
/// it into a posterior chain is guaranteed NaN/Inf-free.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("parameter vector must be non-empty"));
        }
        if let Some(k) = components.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("parameter component {k} is not finite")));
        }
        Ok(ParamVector(components))
    }

    /// Shorthand used throughout the tests; panics on non-finite input.
    pub fn from_slice(components: &[f64]) -> Self {
        ParamVector::new(components.to_vec()).expect("finite components")
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(v: ParamVector) -> Vec<f64> {
        v.0
    }
}

#[derive(Clone, Debug, PartialEq)]
enum ResponseColumn {
    Real(Vec<f64>),
    Label(Vec<i8>),
}

/// Immutable table of observations with a homogeneous response column.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    xs: Vec<f64>, // row-major, n * dim
    ys: ResponseColumn,
}

impl Dataset {
    /// Build from owned rows. All rows must share one covariate dimension and
    /// one response kind; labels must be exactly -1 or +1.
    pub fn from_observations(rows: Vec<Observation>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("dataset must contain at least one observation"));
        }
        let dim = rows[0].covariates.len();
        let mut xs = Vec::with_capacity(n * dim);
        let ys = match rows[0].response {
            Response::Real(_) => {
                let mut col = Vec::with_capacity(n);
                for (i, row) in rows.iter().enumerate() {
                    if row.covariates.len() != dim {
                        return Err(Error::invalid(format!(
                            "row {i} has covariate dimension {} (expected {dim})",
                            row.covariates.len()
                        )));
                    }
                    match row.response {
                        Response::Real(y) => col.push(y),
                        Response::Label(_) => {
                            return Err(Error::invalid(format!(
                                "row {i} is label-valued in a real-response dataset"
                            )))
                        }
                    }
                    xs.extend_from_slice(&row.covariates);
                }
                ResponseColumn::Real(col)
            }
            Response::Label(_) => {
                let mut col = Vec::with_capacity(n);
                for (i, row) in rows.iter().enumerate() {
                    if row.covariates.len() != dim {
                        return Err(Error::invalid(format!(
                            "row {i} has covariate dimension {} (expected {dim})",
                            row.covariates.len()
                        )));
                    }
                    match row.response {
                        Response::Label(l) if l == 1 || l == -1 => col.push(l),
                        Response::Label(l) => {
                            return Err(Error::invalid(format!("row {i} has label {l}, want -1 or +1")))
                        }
                        Response::Real(_) => {
                            return Err(Error::invalid(format!(
                                "row {i} is real-valued in a label-response dataset"
                            )))
                        }
                    }
                    xs.extend_from_slice(&row.covariates);
                }
                ResponseColumn::Label(col)
            }
        };
        Ok(Dataset { dim, xs, ys })
    }

    /// Regression-style dataset: real responses.
    pub fn from_regression(covariates: Vec<Vec<f64>>, responses: Vec<f64>) -> Result<Self> {
        if covariates.len() != responses.len() {
            return Err(Error::invalid("covariate and response counts differ"));
        }
        let rows = covariates
            .into_iter()
            .zip(responses)
            .map(|(x, y)| Observation::real(x, y))
            .collect();
        Dataset::from_observations(rows)
    }

    /// Responses only (empty covariate vectors); the shape used by the
    /// scalar squared-error model.
    pub fn from_responses(responses: Vec<f64>) -> Result<Self> {
        let n = responses.len();
        Dataset::from_regression(vec![Vec::new(); n], responses)
    }

    /// Classification dataset: ±1 labels.
    pub fn from_classification(covariates: Vec<Vec<f64>>, labels: Vec<i8>) -> Result<Self> {
        if covariates.len() != labels.len() {
            return Err(Error::invalid("covariate and label counts differ"));
        }
        let rows = covariates
            .into_iter()
            .zip(labels)
            .map(|(x, y)| Observation::label(x, y))
            .collect();
        Dataset::from_observations(rows)
    }

    pub fn n(&self) -> usize {
        match &self.ys {
            ResponseColumn::Real(v) => v.len(),
            ResponseColumn::Label(v) => v.len(),
        }
    }

    pub fn covariate_dim(&self) -> usize {
        self.dim
    }

    pub fn is_label_valued(&self) -> bool {
        matches!(self.ys, ResponseColumn::Label(_))
    }

    pub fn covariates(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn response(&self, i: usize) -> Response {
        match &self.ys {
            ResponseColumn::Real(v) => Response::Real(v[i]),
            ResponseColumn::Label(v) => Response::Label(v[i]),
        }
    }

    pub fn row(&self, i: usize) -> Observation {
        Observation { covariates: self.covariates(i).to_vec(), response: self.response(i) }
    }

    /// Flat row-major covariate storage (n × covariate_dim).
    pub(crate) fn covariates_flat(&self) -> &[f64] {
        &self.xs
    }

    pub(crate) fn real_responses(&self) -> Option<&[f64]> {
        match &self.ys {
            ResponseColumn::Real(v) => Some(v),
            ResponseColumn::Label(_) => None,
        }
    }

    pub(crate) fn labels(&self) -> Option<&[i8]> {
        match &self.ys {
            ResponseColumn::Label(v) => Some(v),
            ResponseColumn::Real(_) => None,
        }
    }

    /// New dataset gathering the given row indices (bootstrap support).
    pub fn resample(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::invalid("resample index list is empty"));
        }
        let mut xs = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            xs.extend_from_slice(self.covariates(i));
        }
        let ys = match &self.ys {
            ResponseColumn::Real(v) => ResponseColumn::Real(indices.iter().map(|&i| v[i]).collect()),
            ResponseColumn::Label(v) => ResponseColumn::Label(indices.iter().map(|&i| v[i]).collect()),
        };
        Ok(Dataset { dim: self.dim, xs, ys })
    }

    /// Read `x1..xp,y` CSV with a header row. `label_response` selects ±1
    /// integer labels for the `y` column instead of reals.
    pub fn read_csv<R: io::Read>(reader: R, label_response: bool) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.is_empty() {
            return Err(Error::invalid("CSV has no columns"));
        }
        let p = headers.len() - 1;
        for (k, name) in headers.iter().enumerate() {
            let expected = if k < p { format!("x{}", k + 1) } else { "y".to_string() };
            if name.trim() != expected {
                return Err(Error::invalid(format!(
                    "CSV header column {k} is {name:?}, expected {expected:?} (schema x1..xp,y)"
                )));
            }
        }
        let mut rows = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != p + 1 {
                return Err(Error::invalid(format!("CSV row {i} has {} fields, expected {}", record.len(), p + 1)));
            }
            let mut covs = Vec::with_capacity(p);
            for field in record.iter().take(p) {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("CSV row {i}: bad covariate {field:?}")))?;
                covs.push(v);
            }
            let yfield = record.get(p).unwrap().trim();
            let response = if label_response {
                let l: i64 = yfield
                    .parse()
                    .map_err(|_| Error::invalid(format!("CSV row {i}: bad label {yfield:?}")))?;
                match l {
                    1 => Response::Label(1),
                    -1 => Response::Label(-1),
                    _ => return Err(Error::invalid(format!("CSV row {i}: label {l} not in {{-1,+1}}"))),
                }
            } else {
                let y: f64 = yfield
                    .parse()
                    .map_err(|_| Error::invalid(format!("CSV row {i}: bad response {yfield:?}")))?;
                Response::Real(y)
            };
            rows.push(Observation { covariates: covs, response });
        }
        Dataset::from_observations(rows)
    }

    /// Write the dataset in the same `x1..xp,y` schema accepted by
    /// [`Dataset::read_csv`].
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim).map(|k| format!("x{k}")).collect();
        header.push("y".to_string());
        wtr.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = self.covariates(i).iter().map(|v| v.to_string()).collect();
            rec.push(match self.response(i) {
                Response::Real(y) => y.to_string(),
                Response::Label(l) => l.to_string(),
            });
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
