use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{parse_expression, Expression, ParseError, Scope};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("dimension must be at least 3, got {0}")]
    DimensionTooSmall(usize),
    #[error("{what}: expected {expected} entries, found {found}")]
    Shape {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("metric not symmetric at ({0},{1})")]
    NotSymmetric(usize, usize),
    #[error("invalid coordinate name `{0}`")]
    BadCoordinate(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("sample box interval {index} is invalid: [{lo}, {hi}]")]
    BadInterval { index: usize, lo: f64, hi: f64 },
    #[error("in {field}: {source}")]
    Parse {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("metric file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A coordinate chart with metric components given as expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub name: String,
    pub coordinates: Vec<String>,
    pub parameters: BTreeMap<String, f64>,
    /// Full `n × n` grid; `components[i][j] == components[j][i]`.
    pub components: Vec<Vec<Expression>>,
    pub sample_box: Vec<(f64, f64)>,
    /// Conformal scalar σ.
    pub sigma: Option<Expression>,
    /// Candidate fundamental vector, lower index.
    pub vector_a: Option<Vec<Expression>>,
}

/// On-disk JSON layout of a [`MetricSpec`]. Field order is the export order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricFile {
    pub name: String,
    pub dimension: usize,
    pub coordinates: Vec<String>,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    pub metric: Vec<Vec<String>>,
    pub sample_box: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<String>,
    #[serde(default, rename = "vector_A", skip_serializing_if = "Option::is_none")]
    pub vector_a: Option<Vec<String>>,
}

fn valid_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl MetricSpec {
    pub fn dimension(&self) -> usize {
        self.coordinates.len()
    }

    /// Parses and validates a chart given as expression strings.
    ///
    /// `metric` may be the full grid or only its upper triangle
    /// (row `i` holding entries `j >= i`).
    pub fn from_strings(
        name: &str,
        coordinates: &[&str],
        parameters: &[(&str, f64)],
        metric: &[Vec<&str>],
        sample_box: &[(f64, f64)],
        sigma: Option<&str>,
        vector_a: Option<&[&str]>,
    ) -> Result<Self, SpecError> {
        let n = coordinates.len();
        let full: Vec<Vec<String>> = if metric.iter().enumerate().all(|(i, row)| row.len() == n - i)
            && metric.len() == n
            && n > 1
        {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let (a, b) = if i <= j { (i, j) } else { (j, i) };
                            metric[a][b - a].to_string()
                        })
                        .collect()
                })
                .collect()
        } else {
            metric
                .iter()
                .map(|row| row.iter().map(|s| s.to_string()).collect())
                .collect()
        };
        let file = MetricFile {
            name: name.to_string(),
            dimension: n,
            coordinates: coordinates.iter().map(|s| s.to_string()).collect(),
            parameters: parameters
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
            metric: full,
            sample_box: sample_box.iter().map(|&(a, b)| [a, b]).collect(),
            sigma: sigma.map(str::to_string),
            vector_a: vector_a.map(|v| v.iter().map(|s| s.to_string()).collect()),
        };
        MetricSpec::from_file(&file)
    }

    pub fn from_file(file: &MetricFile) -> Result<Self, SpecError> {
        let n = file.coordinates.len();
        if file.dimension != n {
            return Err(SpecError::Shape {
                what: "coordinates".into(),
                expected: file.dimension,
                found: n,
            });
        }
        if n < 3 {
            return Err(SpecError::DimensionTooSmall(n));
        }
        for (k, c) in file.coordinates.iter().enumerate() {
            if !valid_identifier(c) {
                return Err(SpecError::BadCoordinate(c.clone()));
            }
            if file.coordinates[..k].contains(c) {
                return Err(SpecError::DuplicateName(c.clone()));
            }
        }
        let param_names: Vec<String> = file.parameters.keys().cloned().collect();
        for p in &param_names {
            if !valid_identifier(p) {
                return Err(SpecError::BadCoordinate(p.clone()));
            }
            if file.coordinates.contains(p) {
                return Err(SpecError::DuplicateName(p.clone()));
            }
        }
        let scope = Scope::new(&file.coordinates, &param_names);
        let parse = |field: String, text: &str| {
            parse_expression(text, &scope).map_err(|source| SpecError::Parse { field, source })
        };

        if file.metric.len() != n {
            return Err(SpecError::Shape {
                what: "metric rows".into(),
                expected: n,
                found: file.metric.len(),
            });
        }
        let mut components = Vec::with_capacity(n);
        for (i, row) in file.metric.iter().enumerate() {
            if row.len() != n {
                return Err(SpecError::Shape {
                    what: format!("metric row {i}"),
                    expected: n,
                    found: row.len(),
                });
            }
            let parsed = row
                .iter()
                .enumerate()
                .map(|(j, text)| parse(format!("metric[{i}][{j}]"), text))
                .collect::<Result<Vec<_>, _>>()?;
            components.push(parsed);
        }
        for i in 0..n {
            for j in i + 1..n {
                if components[i][j] != components[j][i] {
                    return Err(SpecError::NotSymmetric(i, j));
                }
            }
        }

        if file.sample_box.len() != n {
            return Err(SpecError::Shape {
                what: "sample_box".into(),
                expected: n,
                found: file.sample_box.len(),
            });
        }
        for (index, &[lo, hi]) in file.sample_box.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(SpecError::BadInterval { index, lo, hi });
            }
        }

        let sigma = file
            .sigma
            .as_deref()
            .map(|s| parse("sigma".into(), s))
            .transpose()?;
        let vector_a = match &file.vector_a {
            None => None,
            Some(v) if v.len() != n => {
                return Err(SpecError::Shape {
                    what: "vector_A".into(),
                    expected: n,
                    found: v.len(),
                })
            }
            Some(v) => Some(
                v.iter()
                    .enumerate()
                    .map(|(i, s)| parse(format!("vector_A[{i}]"), s))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        };

        Ok(MetricSpec {
            name: file.name.clone(),
            coordinates: file.coordinates.clone(),
            parameters: file.parameters.clone(),
            components,
            sample_box: file.sample_box.iter().map(|&[a, b]| (a, b)).collect(),
            sigma,
            vector_a,
        })
    }

    pub fn to_file(&self) -> MetricFile {
        let show = |e: &Expression| e.display(&self.coordinates).to_string();
        MetricFile {
            name: self.name.clone(),
            dimension: self.dimension(),
            coordinates: self.coordinates.clone(),
            parameters: self.parameters.clone(),
            metric: self
                .components
                .iter()
                .map(|row| row.iter().map(show).collect())
                .collect(),
            sample_box: self.sample_box.iter().map(|&(a, b)| [a, b]).collect(),
            sigma: self.sigma.as_ref().map(show),
            vector_a: self
                .vector_a
                .as_ref()
                .map(|v| v.iter().map(show).collect()),
        }
    }

    /// Pretty-printed JSON document, byte-stable for a given spec.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("metric file serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let file: MetricFile = serde_json::from_str(text)?;
        MetricSpec::from_file(&file)
    }

    pub fn load(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
            path: path.display().to_string(),
            source,
        })?;
        MetricSpec::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), SpecError> {
        std::fs::write(path, self.to_json()).map_err(|source| SpecError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Scope for parsing further expressions over this chart.
    pub fn parameter_names(&self) -> Vec<String> {
        self.parameters.keys().cloned().collect()
    }

    /// Parses an expression in this chart's coordinates and parameters.
    pub fn parse(&self, text: &str) -> Result<Expression, ParseError> {
        let params = self.parameter_names();
        parse_expression(text, &Scope::new(&self.coordinates, &params))
    }

    /// Centre of the sample box.
    pub fn box_center(&self) -> Vec<f64> {
        self.sample_box.iter().map(|&(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dimension()
            && point
                .iter()
                .zip(&self.sample_box)
                .all(|(x, &(a, b))| *x >= a && *x <= b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minkowski() -> MetricSpec {
        MetricSpec::from_strings(
            "flat",
            &["t", "x", "y", "z"],
            &[],
            &[
                vec!["-1", "0", "0", "0"],
                vec!["1", "0", "0"],
                vec!["1", "0"],
                vec!["1"],
            ],
            &[(-1.0, 1.0); 4],
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn upper_triangle_expands_to_full_grid() {
        let m = minkowski();
        assert_eq!(m.components.len(), 4);
        assert!(m.components.iter().all(|r| r.len() == 4));
        assert_eq!(m.components[3][3], Expression::Constant(1.0));
    }

    #[test]
    fn asymmetric_grid_is_rejected() {
        let err = MetricSpec::from_strings(
            "bad",
            &["a", "b", "c"],
            &[],
            &[
                vec!["1", "a", "0"],
                vec!["b", "1", "0"],
                vec!["0", "0", "1"],
            ],
            &[(0.0, 1.0); 3],
            None,
            None,
        )
        .unwrap_err();
        assert_eq!(err.to_string(), "metric not symmetric at (0,1)");
    }

    #[test]
    fn low_dimension_is_rejected() {
        let err = MetricSpec::from_strings(
            "plane",
            &["x", "y"],
            &[],
            &[vec!["1", "0"], vec!["0", "1"]],
            &[(0.0, 1.0); 2],
            None,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, SpecError::DimensionTooSmall(2)));
    }

    #[test]
    fn json_round_trip_is_stable() {
        let m = minkowski();
        let text = m.to_json();
        let back = MetricSpec::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), text);
        let keys: Vec<usize> = ["\"name\"", "\"dimension\"", "\"coordinates\"", "\"parameters\"", "\"metric\"", "\"sample_box\""]
            .iter()
            .map(|k| text.find(k).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }
}
