/// One flag per node of a cubic grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeMask {
    nodes_per_axis: usize,
    bits: Vec<bool>,
}

impl NodeMask {
    pub fn new(nodes_per_axis: usize) -> Self {
        Self {
            nodes_per_axis,
            bits: vec![false; nodes_per_axis.pow(3)],
        }
    }

    pub fn from_bits(nodes_per_axis: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), nodes_per_axis.pow(3));
        Self { nodes_per_axis, bits }
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, on: bool) {
        self.bits[idx] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Set indices in ascending order.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    pub fn is_subset_of(&self, other: &NodeMask) -> bool {
        self.bits.len() == other.bits.len()
            && self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }
}
