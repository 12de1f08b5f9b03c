//! Complex numbers as `[re, im]` pairs, vectors as lists of pairs and matrices
//! as row-major lists of rows.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub(crate) fn pair(z: &Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub(crate) fn from_pair(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

pub mod complex {
    use super::*;

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        pair(z).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        <[f64; 2]>::deserialize(d).map(from_pair)
    }
}

pub mod vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &DVector<Complex64>, s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(pair).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<Complex64>, D::Error> {
        let raw = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(DVector::from_iterator(raw.len(), raw.into_iter().map(from_pair)))
    }
}

pub mod matrix {
    use super::*;

    pub(crate) fn to_rows(m: &DMatrix<Complex64>) -> Vec<Vec<[f64; 2]>> {
        m.row_iter()
            .map(|r| r.iter().map(pair).collect())
            .collect()
    }

    pub(crate) fn from_rows<E: serde::de::Error>(rows: Vec<Vec<[f64; 2]>>) -> Result<DMatrix<Complex64>, E> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(E::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_row_iterator(
            nrows,
            ncols,
            rows.into_iter().flatten().map(from_pair),
        ))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<Complex64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<Complex64>, D::Error> {
        from_rows(Vec::<Vec<[f64; 2]>>::deserialize(d)?)
    }
}

pub mod option_matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Option<DMatrix<Complex64>>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(matrix::to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<Complex64>>, D::Error> {
        Option::<Vec<Vec<[f64; 2]>>>::deserialize(d)?
            .map(matrix::from_rows)
            .transpose()
    }
}
