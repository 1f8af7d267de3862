//! Configuration files and CSV outputs.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub mod config;
pub mod csv;

pub use config::{load_config, Config};
pub use csv::{read_diagnostics, read_snapshot, write_diagnostics, write_snapshot, write_sweep};

/// Shortest decimal that parses back to the same `f64`; zero is always `0`.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Write `bytes` to a sibling temporary file and rename it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(path, e))?;
        }
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn number_format_cases() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(1.5), "1.5");
        assert_eq!(format_number(1e-7), "1e-7");
        assert_eq!(format_number(0.1), "0.1");
        assert_eq!(format_number(-2.5e20), "-2.5e20");
    }

    proptest! {
        #[test]
        fn number_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let back: f64 = format_number(v).parse().unwrap();
            prop_assert!(back == v);
            prop_assert!(format_number(v).len() <= 24);
        }
    }
}
