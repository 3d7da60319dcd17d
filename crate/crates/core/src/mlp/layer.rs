use ndarray::{Array1, Array2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn as_u8(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

/// Learned scale/shift plus running statistics used at inference.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    /// Weight given to the newest batch statistic.
    pub momentum: f64,
    pub epsilon: f64,
}

impl BatchNormState {
    pub fn new(width: usize, momentum: f64, epsilon: f64) -> Self {
        Self {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
            momentum,
            epsilon,
        }
    }
}

/// `weights` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
    pub batch_norm: Option<BatchNormState>,
    pub dropout_rate: f64,
}

impl DenseLayer {
    pub fn input_width(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_width(&self) -> usize {
        self.weights.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len()
            + self.biases.len()
            + self.batch_norm.as_ref().map_or(0, |bn| bn.gamma.len() + bn.beta.len())
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        let out = self.output_width();
        if self.biases.len() != out {
            return Err(format!("{} biases for {out} units", self.biases.len()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        if let Some(bn) = &self.batch_norm {
            let lens = [bn.gamma.len(), bn.beta.len(), bn.running_mean.len(), bn.running_var.len()];
            if lens.iter().any(|&l| l != out) {
                return Err(format!("batch-norm vectors {lens:?} for {out} units"));
            }
            if bn.epsilon.is_nan() || bn.epsilon <= 0.0 {
                return Err(format!("batch-norm epsilon {} must be positive", bn.epsilon));
            }
            if bn.running_var.iter().any(|&v| v.is_nan() || v < 0.0) {
                return Err("negative running variance".into());
            }
        }
        let all_finite = self.weights.iter().chain(&self.biases).all(|v| v.is_finite());
        if !all_finite {
            return Err("non-finite parameter".into());
        }
        Ok(())
    }
}
