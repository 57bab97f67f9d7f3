//! CSV and JSON forms of a [`Spectrum`]. Floats are written in shortest round-trip form, so
//! reading back reproduces the spectrum bit for bit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EigenClass, EigenvalueRecord, Spectrum};

const HEADER: [&str; 6] = ["j", "re", "im", "class", "multiplicity", "residual"];
const STRIP_PREFIX: &str = "# strip_height=";

#[derive(Debug, Error)]
pub enum SpectrumIoError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed spectrum file: {0}")]
    Format(String),
}

/// One row of the serialized table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumRow {
    pub j: i64,
    pub re: f64,
    pub im: f64,
    pub class: EigenClass,
    pub multiplicity: usize,
    pub residual: f64,
}

impl From<&EigenvalueRecord> for SpectrumRow {
    fn from(r: &EigenvalueRecord) -> Self {
        Self {
            j: r.index,
            re: r.value.re,
            im: r.value.im,
            class: r.class,
            multiplicity: r.multiplicity,
            residual: r.residual,
        }
    }
}

impl From<SpectrumRow> for EigenvalueRecord {
    fn from(r: SpectrumRow) -> Self {
        Self {
            index: r.j,
            value: Complex64::new(r.re, r.im),
            multiplicity: r.multiplicity,
            class: r.class,
            residual: r.residual,
        }
    }
}

/// JSON mirror of the CSV table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumDocument {
    pub strip_height: f64,
    pub card_i1: usize,
    pub card_i2: usize,
    pub records: Vec<SpectrumRow>,
}

impl From<&Spectrum> for SpectrumDocument {
    fn from(s: &Spectrum) -> Self {
        Self {
            strip_height: s.strip_height,
            card_i1: s.card_i1,
            card_i2: s.card_i2,
            records: s.records.iter().map(SpectrumRow::from).collect(),
        }
    }
}

pub fn spectrum_to_csv(spectrum: &Spectrum) -> Result<String, SpectrumIoError> {
    let mut out = format!("{STRIP_PREFIX}{:e}\n", spectrum.strip_height).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(HEADER)?;
        for r in &spectrum.records {
            w.write_record([
                r.index.to_string(),
                format!("{:e}", r.value.re),
                format!("{:e}", r.value.im),
                r.class.as_str().to_string(),
                r.multiplicity.to_string(),
                format!("{:e}", r.residual),
            ])?;
        }
        w.flush().map_err(|e| SpectrumIoError::Format(e.to_string()))?;
    }
    String::from_utf8(out).map_err(|e| SpectrumIoError::Format(e.to_string()))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T, SpectrumIoError> {
    let raw = rec.get(i).ok_or_else(|| SpectrumIoError::Format(format!("missing column {}", HEADER[i])))?;
    raw.trim().parse().map_err(|_| SpectrumIoError::Format(format!("bad {} value {raw:?}", HEADER[i])))
}

pub fn spectrum_from_csv(text: &str) -> Result<Spectrum, SpectrumIoError> {
    let first = text.lines().next().unwrap_or_default();
    let strip_height: f64 = first
        .strip_prefix(STRIP_PREFIX)
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| SpectrumIoError::Format("missing strip_height line".into()))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().map(str::trim).ne(HEADER) {
        return Err(SpectrumIoError::Format(format!("unexpected header {header:?}")));
    }
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let class_raw: String = field(&rec, 3)?;
        let class = EigenClass::parse(&class_raw)
            .ok_or_else(|| SpectrumIoError::Format(format!("unknown class {class_raw:?}")))?;
        records.push(EigenvalueRecord {
            index: field(&rec, 0)?,
            value: Complex64::new(field(&rec, 1)?, field(&rec, 2)?),
            class,
            multiplicity: field(&rec, 4)?,
            residual: field(&rec, 5)?,
        });
    }
    Ok(Spectrum::from_records(records, strip_height))
}

pub fn spectrum_to_json(spectrum: &Spectrum) -> Result<String, SpectrumIoError> {
    Ok(serde_json::to_string_pretty(&SpectrumDocument::from(spectrum))?)
}

pub fn spectrum_from_json(text: &str) -> Result<Spectrum, SpectrumIoError> {
    let doc: SpectrumDocument = serde_json::from_str(text)?;
    let spectrum = Spectrum::from_records(doc.records.into_iter().map(Into::into).collect(), doc.strip_height);
    if (spectrum.card_i1, spectrum.card_i2) != (doc.card_i1, doc.card_i2) {
        return Err(SpectrumIoError::Format("cardinalities disagree with records".into()));
    }
    Ok(spectrum)
}
