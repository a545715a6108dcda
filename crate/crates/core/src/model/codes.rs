//! 8-bit age codes and the MLP that maps them to per-age style statistics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::encoder::lookup;
use crate::nn::{Graph, ParamId, ParamStore, Scalar, Tensor, Var};

/// Number of style ages, `0..=99`.
pub const NUM_AGES: usize = 100;
pub const CODE_BITS: usize = 8;

/// Big-endian 8-bit expansion of `age + 1`.
pub fn age_to_binary(age: usize) -> Result<[u8; CODE_BITS]> {
    if age >= NUM_AGES {
        return Err(Error::Range(format!("age {age} outside [0, 99]")));
    }
    let v = age + 1;
    let mut bits = [0u8; CODE_BITS];
    for (i, b) in bits.iter_mut().enumerate() {
        *b = ((v >> (CODE_BITS - 1 - i)) & 1) as u8;
    }
    Ok(bits)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodeNorm {
    None,
    ColumnStandardize,
    ScaleUnit,
}

impl std::str::FromStr for CodeNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "column-standardize" => Ok(Self::ColumnStandardize),
            "scale-to-unit" => Ok(Self::ScaleUnit),
            other => Err(Error::config("code_norm", format!("unknown strategy `{other}`"))),
        }
    }
}

/// Raw codes `z` (100 x 8 bits) and their normalized form `Z0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryCodeMatrix {
    pub raw: Vec<[u8; CODE_BITS]>,
    pub normalized: Tensor<f64>,
}

impl BinaryCodeMatrix {
    pub fn build(norm: CodeNorm) -> Self {
        let raw: Vec<[u8; CODE_BITS]> = (0..NUM_AGES)
            .map(|a| age_to_binary(a).expect("age in range"))
            .collect();
        let mut z: Vec<f64> = raw.iter().flatten().map(|&b| b as f64).collect();
        match norm {
            CodeNorm::None => {}
            CodeNorm::ColumnStandardize => {
                for j in 0..CODE_BITS {
                    let col: Vec<f64> = (0..NUM_AGES).map(|i| z[i * CODE_BITS + j]).collect();
                    let mean = col.iter().sum::<f64>() / NUM_AGES as f64;
                    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / NUM_AGES as f64;
                    let std = var.sqrt();
                    for i in 0..NUM_AGES {
                        let v = &mut z[i * CODE_BITS + j];
                        *v = if std > 0.0 { (*v - mean) / std } else { 0.0 };
                    }
                }
            }
            CodeNorm::ScaleUnit => {
                for j in 0..CODE_BITS {
                    let max = (0..NUM_AGES).map(|i| z[i * CODE_BITS + j]).fold(0.0, f64::max);
                    if max > 0.0 {
                        (0..NUM_AGES).for_each(|i| z[i * CODE_BITS + j] /= max);
                    }
                }
            }
        }
        Self {
            raw,
            normalized: Tensor::new(&[NUM_AGES, CODE_BITS], z).expect("100x8"),
        }
    }
}

/// Layer widths of the mapping MLP.
pub const MAPPING_WIDTHS: [usize; 3] = [16, 32, 2];

#[derive(Clone, Debug)]
pub(crate) struct MappingParams {
    layers: Vec<(ParamId, ParamId)>,
}

impl MappingParams {
    pub(crate) fn init<T: Scalar, R: Rng>(store: &mut ParamStore<T>, rng: &mut R) -> Result<Self> {
        let mut din = CODE_BITS;
        let mut layers = Vec::new();
        for (i, &dout) in MAPPING_WIDTHS.iter().enumerate() {
            let w = store.insert_he(&format!("mapping.fc{}.weight", i + 1), &[dout, din], din, rng)?;
            let b = store.insert_zeros(&format!("mapping.fc{}.bias", i + 1), &[dout])?;
            layers.push((w, b));
            din = dout;
        }
        Ok(Self { layers })
    }

    pub(crate) fn bind(store: &ParamStore<impl Scalar>) -> Result<Self> {
        let layers = (1..=MAPPING_WIDTHS.len())
            .map(|i| {
                Ok((
                    lookup(store, &format!("mapping.fc{i}.weight"))?,
                    lookup(store, &format!("mapping.fc{i}.bias"))?,
                ))
            })
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    /// `Z0 (100 x 8) -> (S, T)`, each of length 100. ReLU after the first
    /// two layers, identity after the last.
    pub(crate) fn forward<T: Scalar>(&self, g: &mut Graph<'_, T>, z0: Var) -> Result<StyleTable> {
        let mut h = z0;
        let last = self.layers.len() - 1;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let (w, b) = (g.param(w), g.param(b));
            h = g.linear(h, w, Some(b))?;
            if i < last {
                h = g.relu(h)?;
            }
        }
        Ok(StyleTable {
            s: g.column(h, 0)?,
            t: g.column(h, 1)?,
        })
    }
}

/// Learned style standard deviations `s` and means `t`, one per style age.
#[derive(Clone, Copy, Debug)]
pub struct StyleTable {
    pub s: Var,
    pub t: Var,
}
