//! Matrices as CSV: one record per row, each cell `"re,im"`.

use std::io::Write;

use mtto_core::CMatrix;

/// Shortest round-trip decimal for both parts, with an exponent for very
/// small or large magnitudes.
pub fn format_cell(z: mtto_core::Complex64) -> String {
    format!("{:?},{:?}", z.re, z.im)
}

/// Inverse of [`format_cell`].
pub fn parse_cell(cell: &str) -> Option<mtto_core::Complex64> {
    let (re, im) = cell.split_once(',')?;
    Some(mtto_core::Complex64::new(re.trim().parse().ok()?, im.trim().parse().ok()?))
}

/// Reads a matrix written by [`write_matrix`].
pub fn read_matrix<R: std::io::Read>(input: R) -> Result<CMatrix, String> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows: Vec<Vec<mtto_core::Complex64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| e.to_string())?;
        let row = record
            .iter()
            .map(|cell| parse_cell(cell).ok_or_else(|| format!("bad cell {cell:?}")))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("ragged rows".into());
    }
    Ok(CMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn write_matrix<W: Write>(out: W, m: &CMatrix) -> csv::Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for i in 0..m.nrows() {
        writer.write_record((0..m.ncols()).map(|j| format_cell(m[(i, j)])))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn matrix_to_string(m: &CMatrix) -> String {
    let mut buf = Vec::new();
    write_matrix(&mut buf, m).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use mtto_core::Complex64;

    #[test]
    fn cells_are_quoted_pairs() {
        let m = CMatrix::from_row_slice(2, 2, &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(-0.5, 2.0), Complex64::new(1e-20, -3.0)]);
        assert_eq!(matrix_to_string(&m), "\"0.0,0.0\",\"1.0,0.0\"\n\"-0.5,2.0\",\"1e-20,-3.0\"\n");
    }

    #[test]
    fn round_trip_through_csv_reader() {
        let m = CMatrix::from_fn(3, 2, |i, j| Complex64::new(i as f64 / 3.0, -(j as f64) * 0.1));
        let text = matrix_to_string(&m);
        assert_eq!(read_matrix(text.as_bytes()).unwrap(), m);
        assert!(read_matrix("\"1,0\"\n\"1,0\",\"2,0\"\n".as_bytes()).is_err());
        assert!(read_matrix("\"1;0\"\n".as_bytes()).is_err());
    }
}
