//! Report files. CSV is RFC 4180 with LF record terminators; JSON is
//! pretty-printed in struct field order. Wall time never enters these
//! files; it goes to `<name>.meta.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::CliError;

pub struct Reports {
    dir: PathBuf,
}

fn write_failed(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Failed(format!("cannot write `{}`: {e}", path.display()))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Serializes `rows` as CSV with a header taken from the first row.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Serialize)]
struct Meta<'a> {
    command: &'a str,
    wall_seconds: f64,
    threads: usize,
    version: &'a str,
}

impl Reports {
    pub fn new(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| write_failed(&dir, e))?;
        Ok(Reports { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    fn write(&self, file: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.path(file);
        fs::write(&path, text).map_err(|e| write_failed(&path, e))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        self.write(&format!("{name}.json"), &to_json(value))
    }

    pub fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<PathBuf, CliError> {
        let path = self.path(&format!("{name}.csv"));
        let text = to_csv(rows).map_err(|e| write_failed(&path, e))?;
        self.write(&format!("{name}.csv"), &text)
    }

    pub fn meta(&self, name: &str, elapsed: Duration) -> Result<PathBuf, CliError> {
        let meta = Meta {
            command: name,
            wall_seconds: elapsed.as_secs_f64(),
            threads: rayon::current_num_threads(),
            version: env!("CARGO_PKG_VERSION"),
        };
        self.write(&format!("{name}.meta.json"), &to_json(&meta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        id: usize,
        value: f64,
        label: &'static str,
        flag: bool,
        missing: Option<f64>,
    }

    #[test]
    fn csv_is_rfc4180_with_lf() {
        let rows = [
            Row { id: 0, value: 0.1, label: "plain", flag: true, missing: None },
            Row { id: 1, value: -2.5e-17, label: "has,comma \"q\"", flag: false, missing: Some(1.0) },
        ];
        let s = to_csv(&rows).unwrap();
        assert_eq!(
            s,
            "id,value,label,flag,missing\n0,0.1,plain,true,\n1,-2.5e-17,\"has,comma \"\"q\"\"\",false,1.0\n"
        );
        assert!(!s.contains('\r'));
    }

    #[test]
    fn json_ends_with_newline_and_keeps_field_order() {
        let s = to_json(&Row { id: 2, value: 1.5, label: "x", flag: false, missing: None });
        let order: Vec<usize> =
            ["\"id\"", "\"value\"", "\"label\"", "\"flag\"", "\"missing\""].iter().map(|k| s.find(k).unwrap()).collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]));
        assert!(s.ends_with("}\n"));
    }
}
