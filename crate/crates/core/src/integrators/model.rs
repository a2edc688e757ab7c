use crate::dense::DenseMatrix;
use crate::error::Result;
use crate::sampling::AdjacencyMap;

/// Right-hand side `F(t, V)` of a matrix differential equation `dV/dt = F(t, V)`.
///
/// Implementations must be pure: the same inputs give bit-identical outputs.
pub trait MdeModel: Send + Sync {
    /// Spatial dimension `n`.
    fn nrows(&self) -> usize;

    /// Number of columns (samples) `s`.
    fn ncols(&self) -> usize;

    /// Rows that row `i` of `F` reads from `V`.
    fn row_adjacency(&self) -> &AdjacencyMap;

    /// Columns that column `j` of `F` reads from `V`. Most models treat columns
    /// independently and keep the default.
    fn col_adjacency(&self) -> Option<&AdjacencyMap> {
        None
    }

    /// `F(:, cols)`, given `v` holding `V(:, [cols, extra])` in that order.
    ///
    /// `extra` is empty unless [`MdeModel::col_adjacency`] is set.
    fn rhs_cols(&self, t: f64, v: &DenseMatrix, cols: &[usize], extra: &[usize]) -> Result<DenseMatrix>;

    /// `F(rows, :)`, given `v` holding `V([rows, adjacent], :)` in that order.
    fn rhs_rows(&self, t: f64, v: &DenseMatrix, rows: &[usize], adjacent: &[usize]) -> Result<DenseMatrix>;

    /// `F` on the whole state.
    fn rhs_full(&self, t: f64, v: &DenseMatrix) -> Result<DenseMatrix> {
        let cols: Vec<usize> = (0..self.ncols()).collect();
        self.rhs_cols(t, v, &cols, &[])
    }
}

/// Position of each global index inside a stacked `[primary, secondary]` block.
///
/// Models use this to read neighbor values from the compact inputs handed to
/// [`MdeModel::rhs_rows`] and [`MdeModel::rhs_cols`].
pub struct LocalIndex {
    slot: Vec<usize>,
}

impl LocalIndex {
    pub fn new(bound: usize, primary: &[usize], secondary: &[usize]) -> Self {
        let mut slot = vec![usize::MAX; bound];
        for (k, &i) in primary.iter().chain(secondary).enumerate() {
            slot[i] = k;
        }
        Self { slot }
    }

    /// Slot of global index `i`. Panics if `i` was not supplied, which means
    /// the model's declared adjacency is too narrow.
    pub fn get(&self, i: usize) -> usize {
        let k = self.slot[i];
        assert!(k != usize::MAX, "index {i} missing from the supplied neighborhood");
        k
    }
}
