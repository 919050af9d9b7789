//! Plain CSV output with fixed float formatting.

use std::io::{self, BufWriter, Write};

/// 17 significant digits in scientific notation; round-trips every f64.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Comma-separated rows terminated by `\n`. Fields are written verbatim.
pub struct CsvWriter<W: Write> {
    out: BufWriter<W>,
    width: usize,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(out: W, header: &[&str]) -> io::Result<Self> {
        let mut w = CsvWriter { out: BufWriter::new(out), width: header.len() };
        writeln!(w.out, "{}", header.join(","))?;
        Ok(w)
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> io::Result<()> {
        debug_assert_eq!(fields.len(), self.width);
        let line: Vec<&str> = fields.iter().map(|f| f.as_ref()).collect();
        writeln!(self.out, "{}", line.join(","))
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}
