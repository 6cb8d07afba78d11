use super::tensor::Tensor;

pub fn leaky_relu(x: &Tensor, slope: f32) -> Tensor {
    Tensor {
        shape: x.shape,
        data: x.data.iter().map(|&v| if v > 0.0 { v } else { slope * v }).collect(),
    }
}

/// Gradient through a leaky ReLU given its input.
pub fn leaky_relu_backward(x: &Tensor, dy: &Tensor, slope: f32) -> Tensor {
    Tensor {
        shape: x.shape,
        data: x
            .data
            .iter()
            .zip(&dy.data)
            .map(|(&v, &g)| if v > 0.0 { g } else { slope * g })
            .collect(),
    }
}

#[inline]
pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}
