use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Int(u64),
    Float(f64),
    Text(String),
}

impl From<u64> for Field {
    fn from(v: u64) -> Self {
        Field::Int(v)
    }
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as u64)
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Float(v)
    }
}

impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Text(v.to_string())
    }
}

impl From<String> for Field {
    fn from(v: String) -> Self {
        Field::Text(v)
    }
}

/// Nine significant digits; plain decimals for moderate magnitudes,
/// scientific notation otherwise.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..9).contains(&exp) {
        format!("{:.*}", (8 - exp) as usize, x)
    } else {
        sci
    }
}

fn render(field: &Field) -> String {
    match field {
        Field::Int(v) => v.to_string(),
        Field::Float(v) => format_float(*v),
        Field::Text(s) => {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.clone()
            }
        }
    }
}

pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
    columns: usize,
}

impl CsvWriter {
    /// Creates the file (and its parent directory) and writes the header.
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let io = |source| Error::Io { path: path.to_path_buf(), source };
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir).map_err(io)?;
            }
        }
        let file = File::create(path).map_err(io)?;
        let mut w = Self { path: path.to_path_buf(), out: BufWriter::new(file), columns: header.len() };
        writeln!(w.out, "{}", header.join(",")).map_err(io)?;
        Ok(w)
    }

    pub fn row(&mut self, fields: &[Field]) -> Result<()> {
        if fields.len() != self.columns {
            return Err(Error::Contract(format!("row has {} fields, header {}", fields.len(), self.columns)));
        }
        let line: Vec<String> = fields.iter().map(render).collect();
        writeln!(self.out, "{}", line.join(",")).map_err(|source| Error::Io { path: self.path.clone(), source })
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.out.flush().map_err(|source| Error::Io { path: self.path.clone(), source })?;
        Ok(self.path)
    }
}
