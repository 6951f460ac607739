//! Versioned JSON model files.
//!
//! ```json
//! {
//!   "header": {"metric": "VMAF", "M": 2, "T": 8, "f_c": 15, "w": 32, "version": 1},
//!   "norm_stats": {"mean": [...], "std": [...]},
//!   "weights": {
//!     "hidden_size": 50, "input_size": 5,
//!     "W_f": [[...]], "W_i": ..., "W_o": ..., "W_g": ...,
//!     "U_f": [[...]], ...,
//!     "b_f": [...], ...,
//!     "output_weight": [...], "output_bias": 0.0
//!   }
//! }
//! ```
//!
//! Numbers are written in shortest round-trip form, so a saved model loads
//! back bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{Gate, LstmParams};
use super::{LstmModel, ModelHeader, NormStats};
use crate::error::{Error, Result};

pub const MODEL_FILE_VERSION: u64 = 1;

type Rows = Vec<Vec<f64>>;

#[derive(Serialize, Deserialize)]
struct Weights {
    hidden_size: usize,
    input_size: usize,
    #[serde(rename = "W_f")]
    w_f: Rows,
    #[serde(rename = "W_i")]
    w_i: Rows,
    #[serde(rename = "W_o")]
    w_o: Rows,
    #[serde(rename = "W_g")]
    w_g: Rows,
    #[serde(rename = "U_f")]
    u_f: Rows,
    #[serde(rename = "U_i")]
    u_i: Rows,
    #[serde(rename = "U_o")]
    u_o: Rows,
    #[serde(rename = "U_g")]
    u_g: Rows,
    b_f: Vec<f64>,
    b_i: Vec<f64>,
    b_o: Vec<f64>,
    b_g: Vec<f64>,
    output_weight: Vec<f64>,
    output_bias: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    header: ModelHeader,
    norm_stats: NormStats,
    weights: Weights,
}

fn to_rows(flat: &[f64], cols: usize) -> Rows {
    flat.chunks(cols).map(<[f64]>::to_vec).collect()
}

fn from_rows(name: &str, rows: &Rows, n_rows: usize, n_cols: usize, dst: &mut [f64]) -> Result<()> {
    if rows.len() != n_rows || rows.iter().any(|r| r.len() != n_cols) {
        return Err(Error::parse(format!("weight `{name}` is not {n_rows}x{n_cols}")));
    }
    for (d, s) in dst.chunks_mut(n_cols).zip(rows) {
        d.copy_from_slice(s);
    }
    Ok(())
}

fn from_vec(name: &str, v: &[f64], len: usize, dst: &mut [f64]) -> Result<()> {
    if v.len() != len {
        return Err(Error::parse(format!("vector `{name}` has {} entries, expected {len}", v.len())));
    }
    dst.copy_from_slice(v);
    Ok(())
}

impl Weights {
    fn from_params(p: &LstmParams) -> Self {
        let (h, i) = (p.hidden(), p.input());
        Weights {
            hidden_size: h,
            input_size: i,
            w_f: to_rows(p.w(Gate::Forget), i),
            w_i: to_rows(p.w(Gate::Input), i),
            w_o: to_rows(p.w(Gate::Output), i),
            w_g: to_rows(p.w(Gate::Candidate), i),
            u_f: to_rows(p.u(Gate::Forget), h),
            u_i: to_rows(p.u(Gate::Input), h),
            u_o: to_rows(p.u(Gate::Output), h),
            u_g: to_rows(p.u(Gate::Candidate), h),
            b_f: p.bias(Gate::Forget).to_vec(),
            b_i: p.bias(Gate::Input).to_vec(),
            b_o: p.bias(Gate::Output).to_vec(),
            b_g: p.bias(Gate::Candidate).to_vec(),
            output_weight: p.head_weights().to_vec(),
            output_bias: p.head_bias(),
        }
    }

    fn to_params(&self) -> Result<LstmParams> {
        let (h, i) = (self.hidden_size, self.input_size);
        if h == 0 || i == 0 {
            return Err(Error::parse("hidden_size and input_size must be positive"));
        }
        let mut p = LstmParams::zeros(h, i);
        let gates = [
            (Gate::Forget, &self.w_f, &self.u_f, &self.b_f),
            (Gate::Input, &self.w_i, &self.u_i, &self.b_i),
            (Gate::Output, &self.w_o, &self.u_o, &self.b_o),
            (Gate::Candidate, &self.w_g, &self.u_g, &self.b_g),
        ];
        for (gate, w, u, b) in gates {
            let s = gate.suffix();
            from_rows(&format!("W_{s}"), w, h, i, p.w_mut(gate))?;
            from_rows(&format!("U_{s}"), u, h, h, p.u_mut(gate))?;
            from_vec(&format!("b_{s}"), b, h, p.bias_mut(gate))?;
        }
        from_vec("output_weight", &self.output_weight, h, p.head_weights_mut())?;
        p.set_head_bias(self.output_bias);
        Ok(p)
    }
}

pub fn model_to_json(model: &LstmModel) -> Result<String> {
    let file = ModelFile {
        header: model.header,
        norm_stats: model.norm.clone(),
        weights: Weights::from_params(&model.params),
    };
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::invalid(format!("model serialisation: {e}")))?;
    text.push('\n');
    Ok(text)
}

pub fn model_from_json(text: &str) -> Result<LstmModel> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::parse(format!("model file: {e}")))?;
    let version = value
        .get("header")
        .and_then(|h| h.get("version"))
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::parse("model file lacks header.version"))?;
    if version != MODEL_FILE_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: MODEL_FILE_VERSION,
        });
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| Error::parse(format!("model file: {e}")))?;
    let params = file.weights.to_params()?;
    LstmModel::new(file.header, file.norm_stats, params).map_err(|e| match e {
        Error::InvalidArgument(msg) => Error::parse(format!("model file: {msg}")),
        other => other,
    })
}

pub fn save_model(model: &LstmModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<LstmModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::metric::Metric;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> LstmModel {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut params = LstmParams::init(6, 5, &mut rng);
        params.set_head_bias(1.0 / 3.0);
        let norm = NormStats {
            mean: (0..5).map(|_| rng.gen::<f64>()).collect(),
            std: (0..5).map(|_| rng.gen_range(0.1..3.0)).collect(),
        };
        let header = ModelHeader {
            metric: Metric::Ssim,
            stages: 2,
            steps: 3,
            chunk_frames: 15,
            block_size: 32,
            version: MODEL_FILE_VERSION,
        };
        LstmModel::new(header, norm, params).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, m);
        let x = Matrix::from_fn(3, 5, |r, c| (r as f64 - c as f64) * 0.37);
        assert_eq!(
            back.forward(&x).unwrap().to_bits(),
            m.forward(&x).unwrap().to_bits()
        );
    }

    #[test]
    fn header_field_names() {
        let v: serde_json::Value = serde_json::from_str(&model_to_json(&model()).unwrap()).unwrap();
        assert_eq!(v["header"]["metric"], "SSIM");
        assert_eq!(v["header"]["M"], 2);
        assert_eq!(v["header"]["T"], 3);
        assert_eq!(v["weights"]["W_f"].as_array().unwrap().len(), 6);
        assert_eq!(v["weights"]["U_g"][0].as_array().unwrap().len(), 6);
    }

    #[test]
    fn future_version_rejected() {
        let text = model_to_json(&model()).unwrap().replace("\"version\": 1", "\"version\": 99");
        assert!(matches!(
            model_from_json(&text).unwrap_err(),
            Error::UnsupportedVersion { found: 99, .. }
        ));
    }

    #[test]
    fn truncated_file_is_parse_error() {
        let text = model_to_json(&model()).unwrap();
        assert!(matches!(
            model_from_json(&text[..text.len() / 2]).unwrap_err(),
            Error::Parse(_)
        ));
        assert!(matches!(model_from_json("").unwrap_err(), Error::Parse(_)));
    }

    #[test]
    fn wrong_shape_is_parse_error() {
        let mut v: serde_json::Value = serde_json::from_str(&model_to_json(&model()).unwrap()).unwrap();
        v["weights"]["b_o"] = serde_json::json!([0.0, 1.0]);
        assert!(matches!(
            model_from_json(&v.to_string()).unwrap_err(),
            Error::Parse(_)
        ));
    }
}
