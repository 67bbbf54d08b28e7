/// Binary aggregation tree over per-site rates.
///
/// Internal nodes are always recomputed as the sum of their two children,
/// never patched by differences, so the tree stays bitwise coherent.
#[derive(Debug, Clone)]
pub struct SumTree {
    size: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(leaves: &[f64]) -> Self {
        let size = leaves.len().next_power_of_two().max(1);
        let mut nodes = vec![0.0; 2 * size];
        nodes[size..size + leaves.len()].copy_from_slice(leaves);
        for i in (1..size).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        Self { size, nodes }
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    #[inline]
    pub fn leaf(&self, i: usize) -> f64 {
        self.nodes[self.size + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: f64) {
        let mut p = self.size + i;
        self.nodes[p] = v;
        while p > 1 {
            p >>= 1;
            self.nodes[p] = self.nodes[2 * p] + self.nodes[2 * p + 1];
        }
    }

    /// Leaf index whose cumulative interval contains `u` in [0, total).
    /// Rounding at the top end never selects a zero-rate leaf.
    #[inline]
    pub fn find(&self, mut u: f64) -> usize {
        let mut p = 1;
        while p < self.size {
            let left = self.nodes[2 * p];
            let right = self.nodes[2 * p + 1];
            if u < left || right <= 0.0 {
                p *= 2;
            } else {
                u -= left;
                p = 2 * p + 1;
            }
        }
        p - self.size
    }

    /// Largest deviation between stored nodes and a rebuild from the leaves.
    pub fn coherence_error(&self) -> f64 {
        let rebuilt = SumTree::new(&self.nodes[self.size..]);
        self.nodes[1..]
            .iter()
            .zip(&rebuilt.nodes[1..])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
