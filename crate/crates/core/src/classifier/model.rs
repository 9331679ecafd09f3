use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::artifact;
use crate::error::{Error, Result};
use crate::features::{ClassIndex, FeatureKind, FeatureVector};

/// Probabilities are clamped to this distance from 0 and 1 inside the loss.
pub const LOSS_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Logistic function kept strictly inside (0, 1).
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Input -> hidden -> per-label sigmoid outputs.
///
/// Weight matrices are row-major: `w1` is `hidden_dim x input_dim`, `w2` is
/// `n_labels x hidden_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_labels: usize,
    pub hidden_activation: Activation,
    pub feature_kind: FeatureKind,
    pub label_index: ClassIndex,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Parameter gradients, same shapes as the model's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    fn zeros_like(m: &MlpModel) -> Self {
        Gradients {
            w1: vec![0.0; m.w1.len()],
            b1: vec![0.0; m.b1.len()],
            w2: vec![0.0; m.w2.len()],
            b2: vec![0.0; m.b2.len()],
        }
    }

    fn scale(&mut self, s: f64) {
        for v in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            v.iter_mut().for_each(|g| *g *= s);
        }
    }

    /// `(model, gradient)` slices in a fixed order: w1, b1, w2, b2.
    pub fn slices(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }
}

/// One training example: features and a 0/1 target per output label.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: FeatureVector,
    pub y: Vec<f64>,
}

struct Activations {
    z1: Vec<f64>,
    h: Vec<f64>,
    p: Vec<f64>,
}

impl MlpModel {
    /// Model with every weight and bias zero.
    pub fn zeros(
        input_dim: usize,
        hidden_dim: usize,
        label_index: ClassIndex,
        hidden_activation: Activation,
    ) -> Self {
        let n_labels = label_index.len();
        MlpModel {
            input_dim,
            hidden_dim,
            n_labels,
            hidden_activation,
            feature_kind: FeatureKind::Bow,
            label_index,
            w1: vec![0.0; hidden_dim * input_dim],
            b1: vec![0.0; hidden_dim],
            w2: vec![0.0; n_labels * hidden_dim],
            b2: vec![0.0; n_labels],
        }
    }

    /// Scaled-uniform initialization, `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`;
    /// biases start at zero.
    pub fn init<R: Rng>(
        input_dim: usize,
        hidden_dim: usize,
        label_index: ClassIndex,
        hidden_activation: Activation,
        rng: &mut R,
    ) -> Self {
        let mut m = MlpModel::zeros(input_dim, hidden_dim, label_index, hidden_activation);
        let a1 = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        m.w1.iter_mut().for_each(|w| *w = rng.random_range(-a1..a1));
        let a2 = (6.0 / (hidden_dim + m.n_labels) as f64).sqrt();
        m.w2.iter_mut().for_each(|w| *w = rng.random_range(-a2..a2));
        m
    }

    pub fn with_feature_kind(mut self, kind: FeatureKind) -> Self {
        self.feature_kind = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Format(format!("invalid classifier model: {m}")));
        if self.w1.len() != self.hidden_dim * self.input_dim
            || self.b1.len() != self.hidden_dim
            || self.w2.len() != self.n_labels * self.hidden_dim
            || self.b2.len() != self.n_labels
        {
            return bad("weight shapes disagree with declared dimensions".into());
        }
        if self.label_index.len() != self.n_labels || !self.label_index.is_bijection() {
            return bad("label_index is not a bijection onto the outputs".into());
        }
        let all = self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2);
        if all.into_iter().any(|v| !v.is_finite()) {
            return bad("non-finite weight".into());
        }
        Ok(())
    }

    fn check_input(&self, x: &FeatureVector) -> Result<()> {
        if x.dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: x.dim(),
            });
        }
        Ok(())
    }

    fn activations(&self, x: &FeatureVector) -> Activations {
        let n_in = self.input_dim;
        let mut z1 = self.b1.clone();
        match x {
            FeatureVector::Binary { indices, .. } => {
                for (h, z) in z1.iter_mut().enumerate() {
                    let row = &self.w1[h * n_in..(h + 1) * n_in];
                    *z += indices.iter().map(|&i| row[i as usize]).sum::<f64>();
                }
            }
            FeatureVector::Dense(v) => {
                for (h, z) in z1.iter_mut().enumerate() {
                    let row = &self.w1[h * n_in..(h + 1) * n_in];
                    *z += row.iter().zip(v).map(|(w, xi)| w * xi).sum::<f64>();
                }
            }
        }
        let h: Vec<f64> = z1.iter().map(|&z| self.hidden_activation.apply(z)).collect();
        let nh = self.hidden_dim;
        let p = (0..self.n_labels)
            .map(|k| {
                let row = &self.w2[k * nh..(k + 1) * nh];
                let z = self.b2[k] + row.iter().zip(&h).map(|(w, hi)| w * hi).sum::<f64>();
                sigmoid(z)
            })
            .collect();
        Activations { z1, h, p }
    }

    /// Per-label probabilities, each strictly inside (0, 1).
    pub fn forward(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.activations(x).p)
    }

    /// Binary cross-entropy summed over labels.
    pub fn loss(&self, x: &FeatureVector, y: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        self.check_targets(y)?;
        Ok(bce(&self.activations(x).p, y))
    }

    fn check_targets(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.n_labels {
            return Err(Error::DimensionMismatch {
                expected: self.n_labels,
                actual: y.len(),
            });
        }
        if y.iter().any(|&t| t != 0.0 && t != 1.0) {
            return Err(Error::InvalidArgument("targets must be 0 or 1".into()));
        }
        Ok(())
    }

    /// Mean loss over `batch`.
    pub fn mean_loss(&self, batch: &[Example]) -> Result<f64> {
        let mut total = 0.0;
        for ex in batch {
            total += self.loss(&ex.x, &ex.y)?;
        }
        Ok(total / batch.len().max(1) as f64)
    }

    /// Gradient of the mean batch loss with respect to every parameter.
    pub fn gradients(&self, batch: &[Example]) -> Result<Gradients> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut g = Gradients::zeros_like(self);
        let (n_in, nh) = (self.input_dim, self.hidden_dim);
        let mut delta1 = vec![0.0; nh];
        for ex in batch {
            self.check_input(&ex.x)?;
            self.check_targets(&ex.y)?;
            let a = self.activations(&ex.x);
            delta1.iter_mut().for_each(|d| *d = 0.0);
            for k in 0..self.n_labels {
                let d2 = a.p[k] - ex.y[k];
                if d2 == 0.0 {
                    continue;
                }
                g.b2[k] += d2;
                let w_row = &self.w2[k * nh..(k + 1) * nh];
                let g_row = &mut g.w2[k * nh..(k + 1) * nh];
                for j in 0..nh {
                    g_row[j] += d2 * a.h[j];
                    delta1[j] += d2 * w_row[j];
                }
            }
            for j in 0..nh {
                let d1 = delta1[j] * self.hidden_activation.derivative(a.z1[j]);
                if d1 == 0.0 {
                    continue;
                }
                g.b1[j] += d1;
                let g_row = &mut g.w1[j * n_in..(j + 1) * n_in];
                match &ex.x {
                    FeatureVector::Binary { indices, .. } => {
                        for &i in indices {
                            g_row[i as usize] += d1;
                        }
                    }
                    FeatureVector::Dense(v) => {
                        for (gi, xi) in g_row.iter_mut().zip(v) {
                            *gi += d1 * xi;
                        }
                    }
                }
            }
        }
        g.scale(1.0 / batch.len() as f64);
        Ok(g)
    }

    /// Mutable parameter slices in the same order as [`Gradients::slices`].
    pub fn params_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn params(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    /// Class ids whose probability is at least `threshold`.
    pub fn predict_labels(&self, x: &FeatureVector, threshold: f64) -> Result<BTreeSet<String>> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold must lie in (0, 1), got {threshold}"
            )));
        }
        let p = self.forward(x)?;
        Ok(self
            .label_index
            .classes()
            .into_iter()
            .zip(p)
            .filter(|&(_, pk)| pk >= threshold)
            .map(|(c, _)| c.to_string())
            .collect())
    }
}

pub(crate) fn bce(p: &[f64], y: &[f64]) -> f64 {
    p.iter()
        .zip(y)
        .map(|(&pk, &yk)| {
            let pk = pk.clamp(LOSS_CLAMP, 1.0 - LOSS_CLAMP);
            -(yk * pk.ln() + (1.0 - yk) * (1.0 - pk).ln())
        })
        .sum()
}

pub fn save_model(path: &Path, model: &MlpModel) -> Result<()> {
    artifact::write_json(path, "mlp", model)
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    let m: MlpModel = artifact::read_json(path, "mlp")?;
    m.validate()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn labels(n: usize) -> ClassIndex {
        ClassIndex::from_classes((0..n).map(|i| format!("l{i}")))
    }

    fn random_model(seed: u64) -> MlpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = MlpModel::init(10, 8, labels(5), Activation::Relu, &mut rng);
        for b in m.b1.iter_mut().chain(m.b2.iter_mut()) {
            *b = rng.random_range(-0.5..0.5);
        }
        m
    }

    fn random_dense(rng: &mut ChaCha8Rng, n: usize) -> FeatureVector {
        FeatureVector::Dense((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn zero_model_outputs_half() {
        let m = MlpModel::zeros(4, 3, labels(6), Activation::Relu);
        let p = m.forward(&FeatureVector::Dense(vec![1.0, -2.0, 3.0, 0.5])).unwrap();
        assert!(p.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn saturated_bias() {
        let mut m = MlpModel::zeros(4, 3, labels(3), Activation::Relu);
        m.b2[1] = 20.0;
        let p = m.forward(&FeatureVector::zeros(4)).unwrap();
        assert!(p[1] > 0.999 && p[1] < 1.0);
        assert_eq!(p[0], 0.5);
    }

    #[test]
    fn outputs_stay_open_interval() {
        let mut m = MlpModel::zeros(2, 2, labels(2), Activation::Relu);
        m.b2 = vec![800.0, -800.0];
        let p = m.forward(&FeatureVector::zeros(2)).unwrap();
        assert!(p[0] < 1.0 && p[1] > 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let m = MlpModel::zeros(4, 3, labels(2), Activation::Relu);
        assert!(matches!(
            m.forward(&FeatureVector::zeros(5)),
            Err(Error::DimensionMismatch { expected: 4, actual: 5 })
        ));
        assert!(m.loss(&FeatureVector::zeros(4), &[1.0]).is_err());
    }

    // Straight matrix arithmetic, independent of the sparse/dense dispatch above.
    fn oracle_forward(m: &MlpModel, x: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; m.hidden_dim];
        for j in 0..m.hidden_dim {
            let mut s = m.b1[j];
            for i in 0..m.input_dim {
                s += m.w1[j * m.input_dim + i] * x[i];
            }
            h[j] = if s > 0.0 { s } else { 0.0 };
        }
        (0..m.n_labels)
            .map(|k| {
                let mut s = m.b2[k];
                for j in 0..m.hidden_dim {
                    s += m.w2[k * m.hidden_dim + j] * h[j];
                }
                1.0 / (1.0 + (-s).exp())
            })
            .collect()
    }

    #[test]
    fn forward_matches_matrix_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for seed in 0..10 {
            let m = random_model(seed);
            let x = random_dense(&mut rng, 10);
            let got = m.forward(&x).unwrap();
            let want = oracle_forward(&m, &x.to_dense());
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
            let sparse = FeatureVector::binary(10, vec![1, 4, 7]).unwrap();
            let got = m.forward(&sparse).unwrap();
            let want = oracle_forward(&m, &sparse.to_dense());
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
            assert_eq!(m.forward(&x).unwrap(), m.forward(&x).unwrap());
        }
    }

    #[test]
    fn loss_values() {
        let m = MlpModel::zeros(3, 2, labels(4), Activation::Relu);
        let l = m.loss(&FeatureVector::zeros(3), &[1.0, 0.0, 1.0, 1.0]).unwrap();
        assert!((l - 4.0 * std::f64::consts::LN_2).abs() < 1e-12);

        let mut sat = MlpModel::zeros(3, 2, labels(2), Activation::Relu);
        sat.b2 = vec![60.0, -60.0];
        let l = sat.loss(&FeatureVector::zeros(3), &[1.0, 0.0]).unwrap();
        assert!(l < 1e-11);
        assert!(sat.loss(&FeatureVector::zeros(3), &[0.5, 0.0]).is_err());
    }

    #[test]
    fn loss_matches_oracle_recomputation() {
        let m = random_model(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_dense(&mut rng, 10);
        let y = [1.0, 0.0, 0.0, 1.0, 1.0];
        let p = oracle_forward(&m, &x.to_dense());
        let want: f64 = p
            .iter()
            .zip(&y)
            .map(|(p, y)| -(y * p.ln() + (1.0 - y) * (1.0 - p).ln()))
            .sum();
        assert!((m.loss(&x, &y).unwrap() - want).abs() < 1e-12);
    }

    fn fd_check(m: &MlpModel, batch: &[Example]) -> f64 {
        let g = m.gradients(batch).unwrap();
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        let mut probe = m.clone();
        for (slot, grad) in g.slices().iter().enumerate() {
            for i in 0..grad.len() {
                let orig = probe.params_mut()[slot][i];
                probe.params_mut()[slot][i] = orig + eps;
                let up = probe.mean_loss(batch).unwrap();
                probe.params_mut()[slot][i] = orig - eps;
                let down = probe.mean_loss(batch).unwrap();
                probe.params_mut()[slot][i] = orig;
                let numeric = (up - down) / (2.0 * eps);
                let analytic = grad[i];
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..3 {
            let m = random_model(100 + seed);
            let batch: Vec<Example> = (0..4)
                .map(|_| Example {
                    x: random_dense(&mut rng, 10),
                    y: (0..5).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect(),
                })
                .collect();
            assert!(fd_check(&m, &batch) < 1e-4);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut tanh = MlpModel::init(6, 4, labels(3), Activation::Tanh, &mut rng);
        tanh.b2 = vec![0.3, -0.2, 0.1];
        let batch = vec![Example {
            x: FeatureVector::binary(6, vec![0, 3, 5]).unwrap(),
            y: vec![1.0, 0.0, 1.0],
        }];
        assert!(fd_check(&tanh, &batch) < 1e-4);
    }

    #[test]
    fn gradient_vanishes_at_bias_only_optimum() {
        // Zero inputs and zero weights leave only b2 in play; the mean BCE over
        // the batch is minimized at b2[k] = logit(mean target of label k).
        let batch: Vec<Example> = [[1.0, 1.0], [0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]
            .iter()
            .map(|y| Example { x: FeatureVector::zeros(3), y: y.to_vec() })
            .collect();
        let mut m = MlpModel::zeros(3, 2, labels(2), Activation::Relu);
        m.b2 = vec![0.0, (0.25f64 / 0.75).ln()];
        let g = m.gradients(&batch).unwrap();
        for s in g.slices() {
            for v in s {
                assert!(v.abs() < 1e-15, "{v}");
            }
        }
        m.b2[0] = 0.1;
        assert!(m.gradients(&batch).unwrap().b2[0] > 1e-3);
    }

    #[test]
    fn identical_batch_equals_single_example() {
        let m = random_model(5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ex = Example {
            x: random_dense(&mut rng, 10),
            y: vec![0.0, 1.0, 0.0, 0.0, 1.0],
        };
        let one = m.gradients(std::slice::from_ref(&ex)).unwrap();
        let three = m.gradients(&[ex.clone(), ex.clone(), ex]).unwrap();
        for (a, b) in one.slices().iter().zip(three.slices()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn predict_boundary_rules() {
        let m = MlpModel::zeros(2, 2, labels(3), Activation::Relu);
        let x = FeatureVector::zeros(2);
        assert_eq!(m.predict_labels(&x, 0.5).unwrap().len(), 3);
        assert!(m.predict_labels(&x, 0.999999).unwrap().is_empty());
        assert!(m.predict_labels(&x, 1.0).is_err());
    }

    #[test]
    fn saturated_model_predicts_gold_set() {
        // input i lights hidden unit i which drives label i
        let mut m = MlpModel::zeros(3, 3, labels(3), Activation::Relu);
        for i in 0..3 {
            m.w1[i * 3 + i] = 1.0;
            m.w2[i * 3 + i] = 40.0;
            m.b2[i] = -20.0;
        }
        let x = FeatureVector::binary(3, vec![0, 2]).unwrap();
        let got = m.predict_labels(&x, 0.5).unwrap();
        assert_eq!(got, BTreeSet::from(["l0".to_string(), "l2".to_string()]));
    }

    #[test]
    fn model_file_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mlp");
        let m = random_model(8);
        save_model(&path, &m).unwrap();
        assert_eq!(load_model(&path).unwrap(), m);

        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format(_))));
        std::fs::write(&path, text.replacen("orthoplan-mlp", "orthoplan-xyz", 1)).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format(_))));
    }
}
