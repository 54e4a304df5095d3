//! CSV conventions shared by every table the crate emits: header row,
//! `.` decimal separator, LF line endings, shortest round-trip float text.

use std::io::Write;

pub fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// Locale-independent float text that parses back to the same bits.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:?}")
    }
}
