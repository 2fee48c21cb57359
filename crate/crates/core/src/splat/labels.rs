//! Label sidecar aligned to kernel order: `.csv`/`.txt` holds one integer
//! per line, anything else is a flat little-endian `i32` array.

use std::path::Path;

use crate::error::{Error, Result};

fn is_text(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("csv") | Some("txt")
    )
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<i32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::at_path(path, e))?;
    if is_text(path) {
        let text = String::from_utf8(bytes).map_err(|_| Error::format("label file is not UTF-8"))?;
        text.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .enumerate()
            .map(|(i, t)| {
                t.parse::<i32>()
                    .map_err(|_| Error::format(format!("label {i} is not an integer: `{t}`")))
            })
            .collect()
    } else {
        if bytes.len() % 4 != 0 {
            return Err(Error::format("binary label file length is not a multiple of 4"));
        }
        Ok(bytes
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[i32]) -> Result<()> {
    let path = path.as_ref();
    let bytes = if is_text(path) {
        let mut s = String::with_capacity(labels.len() * 3);
        for l in labels {
            s.push_str(&l.to_string());
            s.push('\n');
        }
        s.into_bytes()
    } else {
        labels.iter().flat_map(|l| l.to_le_bytes()).collect()
    };
    std::fs::write(path, bytes).map_err(|e| Error::at_path(path, e))
}
