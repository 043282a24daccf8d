use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use crate::catalog::Encoding;
use crate::error::{Error, Result};

pub const DEFAULT_LAYER_SIZES: [usize; 5] = [28, 16, 8, 16, 28];

const MAGIC: &[u8; 8] = b"XEFFAE\0\x01";
const FORMAT_VERSION: u32 = 1;

/// Fully connected layer, weights stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().enumerate().map(|(o, b)| {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Minibatch size; 0 means full batch.
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 16,
            seed: 7,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_mse: f64,
    pub final_mse: f64,
    pub epochs: usize,
    pub steps: u64,
}

/// Symmetric autoencoder: tanh on every hidden layer, identity on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    layer_sizes: Vec<usize>,
    layers: Vec<Dense>,
    seed: u64,
    training: Option<TrainConfig>,
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    format: String,
    version: u32,
    layer_sizes: Vec<usize>,
    hidden_activation: String,
    output_activation: String,
    seed: u64,
    training: Option<TrainConfig>,
    n_params: usize,
}

impl Autoencoder {
    /// Glorot-uniform weights, zero biases.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 3 || layer_sizes.len() % 2 == 0 {
            return Err(Error::invalid("autoencoder needs an odd number (>= 3) of layer sizes"));
        }
        if layer_sizes.first() != layer_sizes.last() || layer_sizes.contains(&0) {
            return Err(Error::invalid("input and output sizes must match and be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let limit = (6.0 / (inputs + outputs) as f64).sqrt();
                Dense {
                    inputs,
                    outputs,
                    weights: (0..inputs * outputs)
                        .map(|_| rng.random_range(-limit..limit))
                        .collect(),
                    bias: vec![0.0; outputs],
                }
            })
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            layers,
            seed,
            training: None,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn code_dim(&self) -> usize {
        self.layer_sizes[self.layer_sizes.len() / 2]
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flat parameters: per layer, weights row-major then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.bias);
        }
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::ShapeMismatch {
                expected: self.n_params(),
                got: params.len(),
            });
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("autoencoder parameters"));
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, r) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, r) = r.split_at(l.bias.len());
            l.bias.copy_from_slice(b);
            rest = r;
        }
        Ok(())
    }

    fn is_hidden(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len()
    }

    /// Activations of every layer, input first.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward(acts.last().expect("nonempty"), &mut out);
            if self.is_hidden(i) {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
        acts
    }

    pub fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        self.activations(x).pop().expect("output layer")
    }

    /// Bottleneck activation.
    pub fn encode(&self, x: &[f64]) -> Vec<f64> {
        self.activations(x).swap_remove(self.layers.len() / 2)
    }

    fn check_rows(&self, rows: &[Vec<f64>]) -> Result<()> {
        if rows.is_empty() {
            return Err(Error::Empty("training matrix"));
        }
        for r in rows {
            if r.len() != self.input_dim() {
                return Err(Error::ShapeMismatch {
                    expected: self.input_dim(),
                    got: r.len(),
                });
            }
        }
        Ok(())
    }

    /// Mean squared reconstruction error over all entries.
    pub fn mse(&self, rows: &[Vec<f64>]) -> Result<f64> {
        self.check_rows(rows)?;
        let total: f64 = rows
            .iter()
            .map(|x| {
                self.reconstruct(x)
                    .iter()
                    .zip(x)
                    .map(|(y, t)| (y - t).powi(2))
                    .sum::<f64>()
            })
            .sum();
        Ok(total / (rows.len() * self.input_dim()) as f64)
    }

    /// Loss and its gradient with respect to [`Self::params`] for a batch.
    pub fn loss_and_grad(&self, batch: &[&[f64]]) -> (f64, Vec<f64>) {
        let n_out = self.input_dim();
        let scale = 1.0 / (batch.len() * n_out) as f64;
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
            .collect();
        let mut loss = 0.0;
        for x in batch {
            let acts = self.activations(x);
            let out = acts.last().expect("output");
            // d loss / d pre-activation of the current layer
            let mut delta: Vec<f64> = out
                .iter()
                .zip(x.iter())
                .map(|(y, t)| {
                    loss += (y - t).powi(2);
                    2.0 * (y - t) * scale
                })
                .collect();
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let (gw, gb) = &mut grads[li];
                for o in 0..layer.outputs {
                    gb[o] += delta[o];
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    for (g, v) in row.iter_mut().zip(input) {
                        *g += delta[o] * v;
                    }
                }
                if li == 0 {
                    break;
                }
                let mut prev = vec![0.0; layer.inputs];
                for o in 0..layer.outputs {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += delta[o] * w;
                    }
                }
                // input to this layer is a tanh output
                for (p, a) in prev.iter_mut().zip(input) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
        let flat = grads.into_iter().flat_map(|(w, b)| w.into_iter().chain(b)).collect();
        (loss * scale, flat)
    }

    /// Trains with ADAM on minibatches reshuffled every epoch.
    pub fn train(&mut self, rows: &[Vec<f64>], cfg: &TrainConfig) -> Result<TrainReport> {
        self.check_rows(rows)?;
        if cfg.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        let initial_mse = self.mse(rows)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut state = AdamState::new(self.n_params(), cfg.adam);
        let mut params = self.params();
        let batch_size = if cfg.batch_size == 0 {
            rows.len()
        } else {
            cfg.batch_size.min(rows.len())
        };
        let mut order: Vec<usize> = (0..rows.len()).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch_size) {
                let batch: Vec<&[f64]> = chunk.iter().map(|&i| rows[i].as_slice()).collect();
                let (_, grads) = self.loss_and_grad(&batch);
                state.step(&mut params, &grads)?;
                self.set_params(&params)?;
            }
        }
        self.training = Some(*cfg);
        Ok(TrainReport {
            initial_mse,
            final_mse: self.mse(rows)?,
            epochs: cfg.epochs,
            steps: state.step_count,
        })
    }

    /// JSON header (length-prefixed) followed by little-endian f64 parameters.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let header = ModelHeader {
            format: "xeff-autoencoder".into(),
            version: FORMAT_VERSION,
            layer_sizes: self.layer_sizes.clone(),
            hidden_activation: "tanh".into(),
            output_activation: "identity".into(),
            seed: self.seed,
            training: self.training,
            n_params: self.n_params(),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for p in self.params() {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::ModelFormat("bad magic".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        if len > 1 << 20 {
            return Err(Error::ModelFormat(format!("header length {len} too large")));
        }
        let mut json = vec![0u8; len];
        r.read_exact(&mut json)?;
        let header: ModelHeader = serde_json::from_slice(&json)?;
        if header.version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {}", header.version)));
        }
        if header.hidden_activation != "tanh" || header.output_activation != "identity" {
            return Err(Error::ModelFormat("unsupported activations".into()));
        }
        let mut model = Self::new(&header.layer_sizes, header.seed)?;
        if header.n_params != model.n_params() {
            return Err(Error::ModelFormat("parameter count disagrees with layer sizes".into()));
        }
        let mut params = Vec::with_capacity(header.n_params);
        let mut buf = [0u8; 8];
        for _ in 0..header.n_params {
            r.read_exact(&mut buf)?;
            params.push(f64::from_le_bytes(buf));
        }
        model.set_params(&params)?;
        model.training = header.training;
        Ok(model)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = Vec::new();
        self.write_to(&mut v).expect("writing to a Vec cannot fail");
        v
    }
}

/// Convenience: encodings as dense rows.
pub fn to_rows(encodings: &[Encoding]) -> Vec<Vec<f64>> {
    encodings.iter().map(Encoding::to_f64).collect()
}

/// Initializes and trains the default-architecture autoencoder.
pub fn train_autoencoder(rows: &[Vec<f64>], cfg: &TrainConfig) -> Result<(Autoencoder, TrainReport)> {
    if rows.is_empty() {
        return Err(Error::Empty("training matrix"));
    }
    let mut model = Autoencoder::new(&DEFAULT_LAYER_SIZES, cfg.seed)?;
    let report = model.train(rows, cfg)?;
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_rows(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..28).map(|_| f64::from(u8::from(rng.random_bool(0.2)))).collect())
            .collect()
    }

    fn central_difference(model: &Autoencoder, batch: &[&[f64]], i: usize, h: f64) -> f64 {
        let mut p = model.params();
        let base = p[i];
        let mut m = model.clone();
        p[i] = base + h;
        m.set_params(&p).unwrap();
        let up = m.loss_and_grad(batch).0;
        p[i] = base - h;
        m.set_params(&p).unwrap();
        let down = m.loss_and_grad(batch).0;
        (up - down) / (2.0 * h)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let model = Autoencoder::new(&DEFAULT_LAYER_SIZES, 3).unwrap();
        let rows = random_rows(4, 11);
        let batch: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let (_, grad) = model.loss_and_grad(&batch);
        for i in (0..model.n_params()).step_by(37) {
            let fd = central_difference(&model, &batch, i, 1e-5);
            let denom = grad[i].abs().max(fd.abs()).max(1e-8);
            assert!((grad[i] - fd).abs() / denom < 1e-4, "param {i}: {} vs {fd}", grad[i]);
        }
    }

    #[test]
    fn one_hot_training_reduces_error() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let mut r = vec![0.0; 28];
                r[i % 28] = 1.0;
                r
            })
            .collect();
        let (_, report) = train_autoencoder(&rows, &TrainConfig {
            epochs: 200,
            ..TrainConfig::default()
        })
        .unwrap();
        assert!(report.final_mse < report.initial_mse, "{report:?}");
    }

    #[test]
    fn repeated_vector_is_memorized() {
        let row = random_rows(1, 5).pop().unwrap();
        let rows = vec![row; 50];
        let (_, report) = train_autoencoder(&rows, &TrainConfig {
            epochs: 300,
            ..TrainConfig::default()
        })
        .unwrap();
        assert!(report.final_mse < 0.01, "{report:?}");
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let rows = random_rows(30, 2);
        let cfg = TrainConfig {
            epochs: 20,
            ..TrainConfig::default()
        };
        let (a, ra) = train_autoencoder(&rows, &cfg).unwrap();
        let (b, rb) = train_autoencoder(&rows, &cfg).unwrap();
        assert_eq!(ra.final_mse.to_bits(), rb.final_mse.to_bits());
        assert_eq!(a, b);
    }

    #[test]
    fn empty_matrix_rejected() {
        assert!(matches!(
            train_autoencoder(&[], &TrainConfig::default()),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn binary_format_round_trips() {
        let rows = random_rows(10, 9);
        let (model, _) = train_autoencoder(&rows, &TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        })
        .unwrap();
        let bytes = model.to_bytes();
        let back = Autoencoder::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, model);
        assert!(Autoencoder::read_from(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn bottleneck_has_eight_units() {
        let model = Autoencoder::new(&DEFAULT_LAYER_SIZES, 1).unwrap();
        assert_eq!(model.encode(&[0.0; 28]).len(), 8);
    }
}
