use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, NnlmError, Real};

/// Fully connected layer, `y = x W + b` with `W` of shape `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

impl<F: Real> Dense<F> {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }
}

/// Embedding `U` (`K x D`), hidden layers, and the output layer (`last x K`).
/// Also used to hold gradients, which have the same shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    pub embedding: Array2<F>,
    pub hidden: Vec<Dense<F>>,
    pub output: Dense<F>,
}

impl<F: Real> ModelParams<F> {
    pub fn zeros(config: &ModelConfig) -> Self {
        let shapes = config.layer_shapes();
        let (hidden, output) = shapes.split_at(shapes.len() - 1);
        ModelParams {
            embedding: Array2::zeros((config.vocab_size, config.embed_dim)),
            hidden: hidden.iter().map(|&(i, o)| Dense::zeros(i, o)).collect(),
            output: Dense::zeros(output[0].0, output[0].1),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.nrows()
    }

    /// Tensor names in declaration (and file) order.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = vec!["embedding".to_string()];
        for i in 0..self.hidden.len() {
            names.push(format!("hidden.{i}.weight"));
            names.push(format!("hidden.{i}.bias"));
        }
        names.push("output.weight".into());
        names.push("output.bias".into());
        names
    }

    /// `(rows, cols, values)` of every tensor, row-major, in declaration order.
    /// Biases are `1 x n`.
    pub fn tensors(&self) -> Vec<(usize, usize, &[F])> {
        let mut out = vec![matrix(&self.embedding)];
        for layer in &self.hidden {
            out.push(matrix(&layer.weight));
            out.push(vector(&layer.bias));
        }
        out.push(matrix(&self.output.weight));
        out.push(vector(&self.output.bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        let mut out = vec![self.embedding.as_slice_mut().expect("standard layout")];
        for layer in &mut self.hidden {
            out.push(layer.weight.as_slice_mut().expect("standard layout"));
            out.push(layer.bias.as_slice_mut().expect("standard layout"));
        }
        out.push(self.output.weight.as_slice_mut().expect("standard layout"));
        out.push(self.output.bias.as_slice_mut().expect("standard layout"));
        out
    }

    /// Whether every tensor has the shape `config` implies.
    pub fn matches(&self, config: &ModelConfig) -> bool {
        let expected = ModelParams::<F>::zeros(config);
        let shape = |p: &ModelParams<F>| -> Vec<(usize, usize)> {
            p.tensors().iter().map(|&(r, c, _)| (r, c)).collect()
        };
        shape(self) == shape(&expected)
    }

    /// `self -= lr * grads`, then rejects any non-finite result.
    pub fn sgd_step(&mut self, grads: &ModelParams<F>, lr: F) -> Result<(), NnlmError> {
        let names = self.tensor_names();
        for ((p, g), name) in self.tensors_mut().into_iter().zip(grads.tensors()).zip(names) {
            let g = g.2;
            let mut finite = true;
            for (x, &d) in p.iter_mut().zip(g) {
                *x = *x - lr * d;
                finite &= x.is_finite();
            }
            if !finite {
                return Err(NnlmError::NonFiniteParams { tensor: name });
            }
        }
        Ok(())
    }
}

fn matrix<F>(a: &Array2<F>) -> (usize, usize, &[F]) {
    (a.nrows(), a.ncols(), a.as_slice().expect("standard layout"))
}

fn vector<F>(a: &Array1<F>) -> (usize, usize, &[F]) {
    (1, a.len(), a.as_slice().expect("standard layout"))
}

/// Glorot-uniform weights in `+-sqrt(6 / (fan_in + fan_out))`, zero biases.
/// The embedding is drawn the same way with `fan_in = K`, `fan_out = D`.
pub fn init_params<F: Real>(config: &ModelConfig, seed: u64) -> ModelParams<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::<F>::zeros(config);
    fill_glorot(&mut params.embedding, &mut rng);
    for layer in &mut params.hidden {
        fill_glorot(&mut layer.weight, &mut rng);
    }
    fill_glorot(&mut params.output.weight, &mut rng);
    params
}

fn fill_glorot<F: Real>(w: &mut Array2<F>, rng: &mut ChaCha8Rng) {
    let bound = (6.0 / (w.nrows() + w.ncols()) as f64).sqrt();
    for x in w.iter_mut() {
        *x = F::from_f64(bound * (2.0 * rng.random::<f64>() - 1.0));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnlm::InputMode;
    use crate::ForgettingFactor;

    fn config() -> ModelConfig {
        ModelConfig::new(
            InputMode::Fofe1,
            50,
            400,
            vec![400, 400],
            Some(ForgettingFactor::new(0.7).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let a: ModelParams<f32> = init_params(&config(), 3);
        let b: ModelParams<f32> = init_params(&config(), 3);
        assert_eq!(a, b);
        let c: ModelParams<f32> = init_params(&config(), 4);
        assert_ne!(a, c);
    }

    #[test]
    fn glorot_bounds_and_zero_biases() {
        let p: ModelParams<f64> = init_params(&config(), 11);
        let bound = (6.0f64 / 800.0).sqrt();
        assert!((bound - 0.0866).abs() < 1e-4);
        let w = &p.hidden[1].weight;
        assert_eq!(w.dim(), (400, 400));
        assert!(w.iter().all(|x| x.abs() <= bound));
        // The draw should actually reach close to the bound.
        assert!(w.iter().fold(0.0f64, |m, x| m.max(x.abs())) > 0.99 * bound);
        for layer in p.hidden.iter().chain(std::iter::once(&p.output)) {
            assert!(layer.bias.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn tensor_listing_is_consistent() {
        let p: ModelParams<f32> = init_params(&config(), 0);
        let names = p.tensor_names();
        let tensors = p.tensors();
        assert_eq!(names.len(), tensors.len());
        assert_eq!(names[0], "embedding");
        assert_eq!((tensors[0].0, tensors[0].1), (50, 400));
        assert_eq!((tensors[6].0, tensors[6].1), (1, 50));
        assert!(p.matches(&config()));
    }

    #[test]
    fn sgd_step_rejects_non_finite() {
        let mut p: ModelParams<f64> = init_params(&config(), 0);
        let mut g = ModelParams::<f64>::zeros(&config());
        g.hidden[0].bias[3] = f64::NAN;
        assert_eq!(
            p.sgd_step(&g, 0.1).unwrap_err(),
            NnlmError::NonFiniteParams { tensor: "hidden.0.bias".into() }
        );
    }
}
