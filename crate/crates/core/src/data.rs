//! Row-oriented datasets: a flat feature matrix plus an optional response column.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Responses {
    None,
    Real(Vec<f64>),
    Label(Vec<u8>),
}

impl Responses {
    fn len(&self) -> Option<usize> {
        match self {
            Responses::None => None,
            Responses::Real(v) => Some(v.len()),
            Responses::Label(v) => Some(v.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Response {
    None,
    Real(f64),
    Label(u8),
}

/// Borrowed view of one row.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub features: &'a [f64],
    pub response: Response,
}

impl<'a> Observation<'a> {
    pub fn new(features: &'a [f64], response: Response) -> Self {
        Self { features, response }
    }

    /// Scalar target: the real response when present, otherwise the first feature.
    pub fn target(&self) -> f64 {
        match self.response {
            Response::Real(y) => y,
            _ => self.features[0],
        }
    }

    pub fn label(&self) -> Option<u8> {
        match self.response {
            Response::Label(l) => Some(l),
            _ => None,
        }
    }

    pub fn real_response(&self) -> Option<f64> {
        match self.response {
            Response::Real(y) => Some(y),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    responses: Responses,
}

impl Dataset {
    /// `features` is row-major with `dim` columns.
    pub fn new(dim: usize, features: Vec<f64>, responses: Responses) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        if features.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "{} feature values do not fill rows of width {dim}",
                features.len()
            )));
        }
        let n = features.len() / dim;
        if n < 2 {
            return Err(Error::invalid(format!("dataset needs at least 2 rows, got {n}")));
        }
        if let Some(m) = responses.len() {
            if m != n {
                return Err(Error::invalid(format!("{m} responses for {n} rows")));
            }
        }
        if let Responses::Label(labels) = &responses {
            if let Some(bad) = labels.iter().find(|&&l| l > 1) {
                return Err(Error::invalid(format!("class label {bad} not in {{0,1}}")));
            }
        }
        Ok(Self {
            dim,
            features,
            responses,
        })
    }

    /// One-dimensional data without responses.
    pub fn scalar(values: Vec<f64>) -> Result<Self> {
        Self::new(1, values, Responses::None)
    }

    pub fn regression(dim: usize, features: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::new(dim, features, Responses::Real(y))
    }

    pub fn classification(dim: usize, features: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        Self::new(dim, features, Responses::Label(labels))
    }

    pub fn n(&self) -> usize {
        self.features.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn responses(&self) -> &Responses {
        &self.responses
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row(&self, i: usize) -> Observation<'_> {
        let response = match &self.responses {
            Responses::None => Response::None,
            Responses::Real(v) => Response::Real(v[i]),
            Responses::Label(v) => Response::Label(v[i]),
        };
        Observation::new(self.feature_row(i), response)
    }

    pub fn rows(&self) -> impl Iterator<Item = Observation<'_>> + '_ {
        (0..self.n()).map(move |i| self.row(i))
    }

    /// First `m` rows as a new dataset.
    pub fn head(&self, m: usize) -> Result<Dataset> {
        let m = m.min(self.n());
        let responses = match &self.responses {
            Responses::None => Responses::None,
            Responses::Real(v) => Responses::Real(v[..m].to_vec()),
            Responses::Label(v) => Responses::Label(v[..m].to_vec()),
        };
        Dataset::new(self.dim, self.features[..m * self.dim].to_vec(), responses)
    }

    /// Reinterpret real responses as class labels; every value must be exactly 0 or 1.
    pub fn into_labeled(self) -> Result<Dataset> {
        match self.responses {
            Responses::Label(_) => Ok(self),
            Responses::None => Err(Error::invalid("dataset has no response column")),
            Responses::Real(ys) => {
                let labels = ys
                    .iter()
                    .enumerate()
                    .map(|(i, &y)| match y {
                        y if y == 0.0 => Ok(0u8),
                        y if y == 1.0 => Ok(1u8),
                        y => Err(Error::invalid(format!("row {}: label {y} not in {{0,1}}", i + 1))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Dataset::new(self.dim, self.features, Responses::Label(labels))
            }
        }
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Dataset> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    /// Parse CSV with a header row of `x1..xd` plus an optional `y` column,
    /// in any column order. Responses are read as reals.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| csv_error(e, 1))?
            .clone();

        let mut seen = HashSet::new();
        let mut feature_cols: Vec<(usize, usize)> = Vec::new();
        let mut y_col = None;
        for (c, name) in header.iter().enumerate() {
            if !seen.insert(name.to_string()) {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("duplicate column `{name}`"),
                });
            }
            if name == "y" {
                y_col = Some(c);
            } else if let Some(k) = name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
                if k == 0 {
                    return Err(Error::Parse {
                        line: 1,
                        message: "feature columns start at x1".into(),
                    });
                }
                feature_cols.push((k, c));
            } else {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("unexpected column `{name}` (expected x1..xd and optional y)"),
                });
            }
        }
        feature_cols.sort_unstable();
        let dim = feature_cols.len();
        if dim == 0 {
            return Err(Error::Parse {
                line: 1,
                message: "no feature columns".into(),
            });
        }
        if let Some(pos) = feature_cols.iter().enumerate().position(|(i, &(k, _))| k != i + 1) {
            return Err(Error::Parse {
                line: 1,
                message: format!("missing column `x{}`", pos + 1),
            });
        }

        let mut features = Vec::new();
        let mut ys = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let line = r as u64 + 2;
            let record = record.map_err(|e| csv_error(e, line))?;
            if record.len() != header.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", header.len(), record.len()),
                });
            }
            for &(k, c) in &feature_cols {
                features.push(parse_field(&record[c], line, &format!("x{k}"))?);
            }
            if let Some(c) = y_col {
                ys.push(parse_field(&record[c], line, "y")?);
            }
        }
        let responses = if y_col.is_some() {
            Responses::Real(ys)
        } else {
            Responses::None
        };
        Dataset::new(dim, features, responses)
    }
}

fn parse_field(raw: &str, line: u64, column: &str) -> Result<f64> {
    let v: f64 = raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("column `{column}`: cannot parse `{raw}` as a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("column `{column}`: non-finite value `{raw}`"),
        });
    }
    Ok(v)
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e
        .position()
        .map(|p| p.line())
        .unwrap_or(fallback_line);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_shape() {
        assert!(Dataset::scalar(vec![1.0]).is_err());
        assert!(Dataset::new(2, vec![1.0, 2.0, 3.0], Responses::None).is_err());
        assert!(Dataset::regression(1, vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(Dataset::classification(1, vec![1.0, 2.0], vec![0, 2]).is_err());
        let d = Dataset::regression(2, vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0]).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.row(1).features, &[3.0, 4.0]);
        assert_eq!(d.row(1).target(), 6.0);
    }

    #[test]
    fn parses_csv_any_column_order() {
        let text = "y,x2,x1\n1.5,2,3\n2.5,4,5\n";
        let d = Dataset::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(d.dim(), 2);
        assert_eq!(d.features(), &[3.0, 2.0, 5.0, 4.0]);
        assert_eq!(d.responses(), &Responses::Real(vec![1.5, 2.5]));
    }

    #[test]
    fn duplicate_header_names_column() {
        let err = Dataset::from_csv_reader("x1,x1,y\n1,2,3\n4,5,6\n".as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 1);
                assert!(message.contains("`x1`"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_value_reports_line() {
        let err = Dataset::from_csv_reader("x1,y\n1,2\n3,abc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = Dataset::from_csv_reader("x1,y\n1,2\n3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = Dataset::from_csv_reader("x2,y\n1,2\n3,4\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err:?}");
    }

    #[test]
    fn labels_conversion() {
        let d = Dataset::regression(1, vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 1.0]).unwrap();
        let l = d.into_labeled().unwrap();
        assert_eq!(l.row(2).label(), Some(1));
        let bad = Dataset::regression(1, vec![0.0, 1.0], vec![0.0, 0.5]).unwrap();
        assert!(bad.into_labeled().is_err());
    }
}
