//! Ingestion of the UCI Adult census files (and any file following the same
//! comma-separated layout: attribute columns followed by one income label).

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::data::DataUniverse;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// Column layout of an Adult-style file. The label is always the last column.
#[derive(Debug, Clone)]
pub struct AdultSchema {
    pub columns: Vec<ColumnKind>,
    /// Label text mapped to 1; every other label maps to 0. A trailing `.`
    /// (as in `adult.test`) is stripped before comparison.
    pub positive_label: String,
    pub missing_marker: String,
}

impl AdultSchema {
    /// The 14-attribute layout of `adult.data` / `adult.test`.
    pub fn standard() -> Self {
        use ColumnKind::*;
        Self {
            columns: vec![
                Numeric,     // age
                Categorical, // workclass
                Numeric,     // fnlwgt
                Categorical, // education
                Numeric,     // education-num
                Categorical, // marital-status
                Categorical, // occupation
                Categorical, // relationship
                Categorical, // race
                Categorical, // sex
                Numeric,     // capital-gain
                Numeric,     // capital-loss
                Numeric,     // hours-per-week
                Categorical, // native-country
            ],
            positive_label: ">50K".into(),
            missing_marker: "?".into(),
        }
    }

    fn width(&self) -> usize {
        self.columns.len() + 1
    }
}

/// Result of ingestion: the encoded universe plus bookkeeping needed to
/// reproduce the encoding.
#[derive(Debug, Clone)]
pub struct AdultData {
    pub universe: DataUniverse,
    /// Data rows seen across all files, before dropping rows with missing values.
    pub rows_read: usize,
    pub rows_dropped: usize,
    /// For each categorical column, its categories in first-appearance order
    /// (the integer code is the position). `None` for numeric columns.
    pub categories: Vec<Option<Vec<String>>>,
}

/// Reads and concatenates Adult-layout files.
///
/// Blank lines and lines starting with `|` (the header of `adult.test`) are
/// skipped. Rows containing the missing marker in any field are dropped.
pub fn load_adult_csv<P: AsRef<Path>>(paths: &[P], schema: &AdultSchema) -> Result<AdultData> {
    let mut sources = Vec::with_capacity(paths.len());
    for p in paths {
        let path: PathBuf = p.as_ref().to_path_buf();
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        sources.push(text);
    }
    parse_adult(sources.iter().map(String::as_str), schema)
}

/// Parses already-loaded file contents; see [`load_adult_csv`].
pub fn parse_adult<'a>(
    sources: impl IntoIterator<Item = &'a str>,
    schema: &AdultSchema,
) -> Result<AdultData> {
    let p = schema.columns.len();
    let mut codes: Vec<HashMap<String, usize>> = vec![HashMap::new(); p];
    let mut categories: Vec<Option<Vec<String>>> = schema
        .columns
        .iter()
        .map(|k| (*k == ColumnKind::Categorical).then(Vec::new))
        .collect();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut rows_read = 0;
    let mut rows_dropped = 0;

    for text in sources {
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('|') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != schema.width() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!(
                        "expected {} columns, found {}",
                        schema.width(),
                        fields.len()
                    ),
                });
            }
            rows_read += 1;
            if fields.iter().any(|f| *f == schema.missing_marker) {
                rows_dropped += 1;
                continue;
            }
            for (j, (field, kind)) in fields.iter().zip(&schema.columns).enumerate() {
                let value = match kind {
                    ColumnKind::Numeric => field.parse::<f64>().map_err(|e| Error::Parse {
                        line: line_no,
                        message: format!("column {}: {field:?}: {e}", j + 1),
                    })?,
                    ColumnKind::Categorical => {
                        let next = codes[j].len();
                        let code = *codes[j].entry((*field).to_string()).or_insert_with(|| {
                            if let Some(list) = categories[j].as_mut() {
                                list.push((*field).to_string());
                            }
                            next
                        });
                        code as f64
                    }
                };
                features.push(value);
            }
            let label = fields[p].trim_end_matches('.');
            labels.push(if label == schema.positive_label { 1.0 } else { 0.0 });
        }
    }

    if labels.is_empty() {
        return Err(Error::EmptyUniverse);
    }
    let universe = DataUniverse::new(features, labels, p)?;
    Ok(AdultData {
        universe,
        rows_read,
        rows_dropped,
        categories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_col() -> AdultSchema {
        AdultSchema {
            columns: vec![ColumnKind::Categorical, ColumnKind::Numeric],
            positive_label: ">50K".into(),
            missing_marker: "?".into(),
        }
    }

    #[test]
    fn categories_encode_in_first_appearance_order() {
        let text = "a, 1, <=50K\nb, 2, >50K\na, 3, >50K.\n";
        let data = parse_adult([text], &two_col()).unwrap();
        let u = &data.universe;
        let col0: Vec<f64> = u.record_ids().map(|i| u.features(i)[0]).collect();
        assert_eq!(col0, vec![0.0, 1.0, 0.0]);
        assert_eq!(u.labels(), &[0.0, 1.0, 1.0]);
        assert_eq!(data.categories[0].as_deref(), Some(&["a".to_string(), "b".to_string()][..]));
        assert!(data.categories[1].is_none());
    }

    #[test]
    fn missing_rows_are_dropped_but_counted() {
        let text = "a, 1, <=50K\n?, 2, >50K\nb, 3, >50K\n";
        let data = parse_adult([text], &two_col()).unwrap();
        assert_eq!(data.rows_read, 3);
        assert_eq!(data.rows_dropped, 1);
        assert_eq!(data.universe.len(), 2);
        // code assignment is unaffected by the dropped row
        assert_eq!(data.universe.features(1)[0], 1.0);
    }

    #[test]
    fn wrong_width_names_the_line() {
        let text = "a, 1, <=50K\n\nb, 2\n";
        match parse_adult([text], &two_col()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_an_empty_universe() {
        assert!(matches!(
            parse_adult([""], &two_col()),
            Err(Error::EmptyUniverse)
        ));
        assert!(matches!(
            parse_adult(["|1x3 Cross validator\n"], &two_col()),
            Err(Error::EmptyUniverse)
        ));
    }

    #[test]
    fn unreadable_file_is_an_io_error() {
        let r = load_adult_csv(&["/nonexistent/adult.data"], &AdultSchema::standard());
        assert!(matches!(r, Err(Error::Io { .. })));
    }

    #[test]
    fn ingestion_is_deterministic() {
        let text = "x, 1, <=50K\ny, 2, >50K\nz, 3, <=50K\n";
        let a = parse_adult([text], &two_col()).unwrap().universe.to_csv();
        let b = parse_adult([text], &two_col()).unwrap().universe.to_csv();
        assert_eq!(a, b);
    }
}
