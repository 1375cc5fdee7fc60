//! Text helpers. Floats are written with 17 significant digits so that
//! every `f64` round-trips exactly; output uses LF line endings only.

use std::fmt::Write as _;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Scientific notation with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_opt_float(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// Accumulates CSV text line by line.
#[derive(Debug, Default, Clone)]
pub struct CsvText {
    buf: String,
}

impl CsvText {
    pub fn new() -> Self {
        Self::default()
    }

    /// `# ...` comment line.
    pub fn comment(&mut self, text: &str) -> &mut Self {
        let _ = writeln!(self.buf, "# {text}");
        self
    }

    pub fn row<I, S>(&mut self, cells: I) -> &mut Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for c in cells {
            if !first {
                self.buf.push(',');
            }
            first = false;
            self.buf.push_str(c.as_ref());
        }
        self.buf.push('\n');
        self
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Reads whitespace- or newline-separated floats; `#` starts a comment.
pub fn parse_vector_text(text: &str) -> Result<DVector<f64>> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("");
        for tok in content.split_whitespace() {
            let x: f64 = tok.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("invalid number `{tok}`"),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("non-finite value `{tok}`"),
                });
            }
            values.push(x);
        }
    }
    if values.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no values".into(),
        });
    }
    Ok(DVector::from_vec(values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 8.9564e-11, 0.0] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn rows_and_comments() {
        let mut c = CsvText::new();
        c.comment("hello")
            .row(["a", "b"])
            .row(vec![String::from("1"), String::new()]);
        assert_eq!(c.finish(), "# hello\na,b\n1,\n");
    }

    #[test]
    fn vector_text() {
        let v = parse_vector_text("# p_I\n1 2\n3.5 # last\n\n").unwrap();
        assert_eq!(v.as_slice(), &[1.0, 2.0, 3.5]);
        assert!(matches!(
            parse_vector_text("1\nx"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_vector_text("# nothing").is_err());
        assert!(parse_vector_text("inf").is_err());
    }
}
