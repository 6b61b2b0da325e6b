//! Serde adapters encoding complex numbers as `[re, im]` pairs.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

pub fn to_pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn from_pair(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

/// A single complex number.
pub mod scalar {
    use super::*;

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        to_pair(*z).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        <[f64; 2]>::deserialize(d).map(from_pair)
    }
}

/// A sequence of complex numbers.
pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|z| to_pair(*z))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        Ok(Vec::<[f64; 2]>::deserialize(d)?
            .into_iter()
            .map(from_pair)
            .collect())
    }
}

/// A complex matrix, row-major, as nested arrays of pairs.
pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Array2<Complex64>, s: S) -> Result<S::Ok, S::Error> {
        m.rows()
            .into_iter()
            .map(|row| row.iter().map(|z| to_pair(*z)).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<Complex64>, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        let flat: Vec<Complex64> = rows.into_iter().flatten().map(from_pair).collect();
        Array2::from_shape_vec((n, m), flat).map_err(D::Error::custom)
    }
}
