//! Serde adapters: complex vectors as `[re, im]` pairs, matrices as nested
//! rows of pairs.

pub mod complex_vec {
    use crate::linalg::{C64, CVec};
    use serde::de::Deserializer;
    use serde::ser::Serializer;
    use serde::{Deserialize, Serialize};

    pub fn serialize<S: Serializer>(v: &CVec, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVec, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(CVec::from_iterator(pairs.len(), pairs.into_iter().map(|[re, im]| C64::new(re, im))))
    }
}

pub mod complex_mat {
    use crate::linalg::{C64, CMat};
    use serde::de::{Deserializer, Error as _};
    use serde::ser::Serializer;
    use serde::{Deserialize, Serialize};

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(CMat::from_fn(nrows, ncols, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
    }
}
