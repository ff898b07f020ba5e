use super::NnError;

/// Dense row-major `f32` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, NnError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NnError::ShapeMismatch {
                context: "tensor data length".into(),
                expected: shape,
                actual: vec![data.len()],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![0.0; n] }
    }

    pub fn full(shape: Vec<usize>, value: f32) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![value; n] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Size of the leading (batch) dimension.
    pub fn batch(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Number of elements per batch item.
    pub fn item_len(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    pub fn item(&self, b: usize) -> &[f32] {
        let n = self.item_len();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self, NnError> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(NnError::ShapeMismatch { context: "reshape".into(), expected: shape, actual: self.shape });
        }
        self.shape = shape;
        Ok(self)
    }

    /// Stack equally shaped items into a batch tensor `[B, item_shape..]`.
    pub fn stack(items: &[&[f32]], item_shape: &[usize]) -> Result<Self, NnError> {
        let n: usize = item_shape.iter().product();
        let mut data = Vec::with_capacity(n * items.len());
        for item in items {
            if item.len() != n {
                return Err(NnError::ShapeMismatch {
                    context: "stack".into(),
                    expected: item_shape.to_vec(),
                    actual: vec![item.len()],
                });
            }
            data.extend_from_slice(item);
        }
        let mut shape = Vec::with_capacity(item_shape.len() + 1);
        shape.push(items.len());
        shape.extend_from_slice(item_shape);
        Ok(Self { shape, data })
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
