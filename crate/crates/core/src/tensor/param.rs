use super::Tensor;

/// A named trainable leaf.
#[derive(Clone, Debug)]
pub struct Parameter {
    name: String,
    tensor: Tensor,
    decay: bool,
}

impl Parameter {
    /// `decay` marks whether the optimizer applies weight decay to it.
    pub fn new(name: impl Into<String>, tensor: Tensor, decay: bool) -> Self {
        Parameter {
            name: name.into(),
            tensor: tensor.requires_grad(),
            decay,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tensor(&self) -> &Tensor {
        &self.tensor
    }

    pub fn shape(&self) -> &[usize] {
        self.tensor.shape()
    }

    pub fn numel(&self) -> usize {
        self.tensor.numel()
    }

    pub fn decays(&self) -> bool {
        self.decay
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.tensor.grad()
    }

    pub fn zero_grad(&self) {
        self.tensor.zero_grad()
    }
}
