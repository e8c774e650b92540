use rand::Rng;

use super::NnError;

/// Handle to a named parameter block inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockId(usize);

impl BlockId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// All trainable values of a model in one flat buffer, partitioned into
/// named blocks. Gradients use buffers of the same length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_zeros(&mut self, name: &str, shape: Vec<usize>) -> Result<BlockId, NnError> {
        if self.names.iter().any(|n| n == name) {
            return Err(NnError::Config(format!("duplicate parameter block {name}")));
        }
        let n: usize = shape.iter().product();
        self.names.push(name.to_string());
        self.shapes.push(shape);
        self.offsets.push(self.data.len());
        self.data.resize(self.data.len() + n, 0.0);
        Ok(BlockId(self.names.len() - 1))
    }

    /// Adds a block initialised uniformly in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn add_uniform<R: Rng>(
        &mut self,
        name: &str,
        shape: Vec<usize>,
        fan_in: usize,
        rng: &mut R,
    ) -> Result<BlockId, NnError> {
        let id = self.add_zeros(name, shape)?;
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        for v in self.block_mut(id) {
            *v = rng.random_range(-bound..bound);
        }
        Ok(id)
    }

    pub fn n_blocks(&self) -> usize {
        self.names.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = BlockId> {
        (0..self.names.len()).map(BlockId)
    }

    pub fn name(&self, id: BlockId) -> &str {
        &self.names[id.0]
    }

    pub fn shape(&self, id: BlockId) -> &[usize] {
        &self.shapes[id.0]
    }

    pub fn find(&self, name: &str) -> Option<BlockId> {
        self.names.iter().position(|n| n == name).map(BlockId)
    }

    pub fn range(&self, id: BlockId) -> std::ops::Range<usize> {
        let start = self.offsets[id.0];
        start..start + self.shapes[id.0].iter().product::<usize>()
    }

    pub fn block(&self, id: BlockId) -> &[f64] {
        &self.data[self.range(id)]
    }

    pub fn block_mut(&mut self, id: BlockId) -> &mut [f64] {
        let r = self.range(id);
        &mut self.data[r]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Zeroed buffer for accumulating gradients.
    pub fn zeros_like(&self) -> Vec<f64> {
        vec![0.0; self.data.len()]
    }

    /// Replaces the values of a block, checking its length.
    pub fn set_block(&mut self, id: BlockId, values: &[f64]) -> Result<(), NnError> {
        let dst = self.block_mut(id);
        if dst.len() != values.len() {
            return Err(NnError::Shape { layer: "param block".into(), expected: dst.len(), got: values.len() });
        }
        dst.copy_from_slice(values);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn blocks_are_contiguous_and_named() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut p = ParamSet::new();
        let a = p.add_uniform("a", vec![2, 3], 3, &mut rng).unwrap();
        let b = p.add_zeros("b", vec![4]).unwrap();
        assert_eq!(p.range(a), 0..6);
        assert_eq!(p.range(b), 6..10);
        assert_eq!(p.find("b"), Some(b));
        assert!(p.block(a).iter().all(|v| v.abs() <= 1.0 / 3f64.sqrt()));
        assert!(p.add_zeros("a", vec![1]).is_err());
    }
}
