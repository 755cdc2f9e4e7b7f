use crate::config::ProblemConfig;
use crate::error::Result;

/// Role of a lattice node in the discrete problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeClass {
    Interior,
    /// On the flat boundary `x_n = 0`, strictly inside the rim.
    Gamma,
    Dirichlet,
}

/// Uniform lattice on the half-box `[-L, L]^{n-1} x [0, L]`.
///
/// Flat indices are row-major with the normal axis `x_n` varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfGrid {
    n: usize,
    l: f64,
    h: f64,
    cells: usize,
    shape: Vec<usize>,
    strides: Vec<usize>,
    classes: Vec<NodeClass>,
}

impl HalfGrid {
    pub fn new(config: &ProblemConfig) -> Result<Self> {
        config.validate()?;
        let m = config.cells()?;
        let n = config.n;
        let mut shape = vec![2 * m + 1; n];
        shape[n - 1] = m + 1;
        let mut strides = vec![1; n];
        for a in (0..n - 1).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        let len: usize = shape.iter().product();
        let mut grid = HalfGrid {
            n,
            l: config.l,
            h: config.l / m as f64,
            cells: m,
            shape,
            strides,
            classes: Vec::with_capacity(len),
        };
        let mut idx = vec![0; n];
        for flat in 0..len {
            grid.unflatten_into(flat, &mut idx);
            let class = grid.classify(&idx);
            grid.classes.push(class);
        }
        Ok(grid)
    }

    fn classify(&self, idx: &[usize]) -> NodeClass {
        let n = self.n;
        let tangential_inside = idx[..n - 1]
            .iter()
            .zip(&self.shape)
            .all(|(&i, &s)| i > 0 && i + 1 < s);
        if !tangential_inside || idx[n - 1] == self.shape[n - 1] - 1 {
            NodeClass::Dirichlet
        } else if idx[n - 1] == 0 {
            NodeClass::Gamma
        } else {
            NodeClass::Interior
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.l
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// `L/h`.
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class(&self, flat: usize) -> NodeClass {
        self.classes[flat]
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.classes
    }

    pub fn is_free(&self, flat: usize) -> bool {
        self.classes[flat] != NodeClass::Dirichlet
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn unflatten_into(&self, mut flat: usize, idx: &mut [usize]) {
        for a in 0..self.n {
            idx[a] = flat / self.strides[a];
            flat %= self.strides[a];
        }
    }

    pub fn unflatten(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.n];
        self.unflatten_into(flat, &mut idx);
        idx
    }

    /// Coordinate of lattice index `i` along `axis`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        if axis + 1 == self.n {
            i as f64 * self.h
        } else {
            (i as f64 - self.cells as f64) * self.h
        }
    }

    /// Lower corner of the box along `axis`.
    pub fn origin(&self, axis: usize) -> f64 {
        if axis + 1 == self.n {
            0.0
        } else {
            -self.l
        }
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let idx = self.unflatten(flat);
        idx.iter()
            .enumerate()
            .map(|(a, &i)| self.coord(a, i))
            .collect()
    }

    /// Whether lattice index `i` sits on a face of the box along `axis`.
    pub fn on_face(&self, axis: usize, i: usize) -> bool {
        i == 0 || i + 1 == self.shape[axis]
    }

    /// Flat indices of the bottom face (`x_n = 0`), rim included.
    pub fn bottom_face(&self) -> impl Iterator<Item = usize> + '_ {
        let last = self.n - 1;
        (0..self.len()).filter(move |&f| (f / self.strides[last]).is_multiple_of(self.shape[last]))
    }

    /// Trapezoid weight of a bottom-face node: one half per tangential axis
    /// on which the node sits at the rim.
    pub fn bottom_weight(&self, idx: &[usize]) -> f64 {
        (0..self.n - 1)
            .filter(|&a| self.on_face(a, idx[a]))
            .fold(1.0, |w, _| w * 0.5)
    }
}

/// Builds the lattice for `config`.
pub fn build_grid(config: &ProblemConfig) -> Result<HalfGrid> {
    HalfGrid::new(config)
}
