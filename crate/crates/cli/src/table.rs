//! CSV in one dialect: comma separator, `.` decimal point, LF line endings.

use anyhow::{Context, Result};

pub fn write_csv(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().context("flushing CSV")?;
    Ok(String::from_utf8(bytes).expect("CSV fields are ASCII"))
}

/// Rows of numbers without a header. Blank lines and lines starting with
/// `#` are skipped.
pub fn read_numeric_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().with_context(|| format!("line {line}: not a number: {f:?}")))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_lf_and_reads_back() {
        let out = write_csv(&["a".into(), "b".into()], &[vec!["1".into(), "0.5".into()]]).unwrap();
        assert_eq!(out, "a,b\n1,0.5\n");
        let rows = read_numeric_csv("# comment\n1, 2\n\n3,4\n").unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn reports_bad_number_with_line() {
        let err = read_numeric_csv("1,2\n3,x\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
