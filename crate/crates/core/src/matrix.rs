//! Dense matrix helpers and the nested-array JSON form shared by every document.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub fn row_sums(m: &Array2<f64>) -> Array1<f64> {
    m.sum_axis(Axis(1))
}

pub fn col_sums(m: &Array2<f64>) -> Array1<f64> {
    m.sum_axis(Axis(0))
}

/// `diag(scale) * m`
pub fn scale_rows(m: &Array2<f64>, scale: &Array1<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for (mut row, &s) in out.outer_iter_mut().zip(scale.iter()) {
        row *= s;
    }
    out
}

/// `m * diag(scale)`
pub fn scale_cols(m: &Array2<f64>, scale: &Array1<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for mut row in out.outer_iter_mut() {
        row *= scale;
    }
    out
}

/// `m^power` by repeated multiplication; `power = 0` gives the identity.
pub fn matrix_power(m: &Array2<f64>, power: usize) -> Array2<f64> {
    let mut out = Array2::eye(m.nrows());
    for _ in 0..power {
        out = out.dot(m);
    }
    out
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn ensure_len(context: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context: context.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    let mut out = Array2::zeros((nrows, ncols));
    for (i, row) in rows.iter().enumerate() {
        ensure_len(&format!("matrix row {i}"), ncols, row.len())?;
        for (j, &x) in row.iter().enumerate() {
            out[[i, j]] = x;
        }
    }
    Ok(out)
}

pub fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

/// Serde adapter: `Array2<f64>` as row-major nested arrays.
pub mod nested {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Array2<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Array2<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter: `Array1<f64>` as a flat array.
pub mod flat {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Array1<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        v.as_slice()
            .map(|x| x.to_vec())
            .unwrap_or_else(|| v.to_vec())
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Array1<f64>, D::Error> {
        Ok(Array1::from(Vec::<f64>::deserialize(d)?))
    }
}

/// Serde adapter for `Vec<Array1<f64>>`.
pub mod flat_list {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Array1<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
        v.iter().map(|x| x.to_vec()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Array1<f64>>, D::Error> {
        Ok(Vec::<Vec<f64>>::deserialize(d)?
            .into_iter()
            .map(Array1::from)
            .collect())
    }
}

/// Serde adapter for `Vec<Vec<Array1<f64>>>` (time × sensor grids).
pub mod flat_grid {
    use super::*;

    pub fn serialize<S: Serializer>(
        v: &[Vec<Array1<f64>>],
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        v.iter()
            .map(|row| row.iter().map(|x| x.to_vec()).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Vec<Array1<f64>>>, D::Error> {
        Ok(Vec::<Vec<Vec<f64>>>::deserialize(d)?
            .into_iter()
            .map(|row| row.into_iter().map(Array1::from).collect())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn power_zero_is_identity() {
        let m = array![[0.2, 0.8], [0.6, 0.4]];
        assert_eq!(matrix_power(&m, 0), Array2::<f64>::eye(2));
        let m3 = matrix_power(&m, 3);
        let direct = m.dot(&m).dot(&m);
        assert!((m3 - direct).iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(matches!(
            from_rows(&rows),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn row_and_column_scaling() {
        let m = array![[1.0, 2.0], [3.0, 4.0]];
        let s = array![2.0, 10.0];
        assert_eq!(scale_rows(&m, &s), array![[2.0, 4.0], [30.0, 40.0]]);
        assert_eq!(scale_cols(&m, &s), array![[2.0, 20.0], [6.0, 40.0]]);
    }
}
