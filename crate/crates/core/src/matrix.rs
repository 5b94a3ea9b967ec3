//! Dense real symmetric matrices, sized for single-excitation Hamiltonians
//! (a few hundred rows at most).

/// Row-major dense symmetric matrix. Both triangles are stored so `get` is
/// branch-free; `set` writes the mirrored entry to keep exact symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        SymmetricMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets `H[i][j]` and `H[j][i]`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
        self.data[j * self.n + i] = value;
    }

    /// Adds to `H[i][j]` and `H[j][i]` (diagonal entries are added once).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] += value;
        if i != j {
            self.data[j * self.n + i] += value;
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "dimension mismatch");
        let mut y = vec![0.0; self.n];
        for (i, out) in y.iter_mut().enumerate() {
            let row = self.row(i);
            let mut acc = 0.0;
            for (h, xv) in row.iter().zip(x) {
                acc += h * xv;
            }
            *out = acc;
        }
        y
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest `|H[i][j] - H[j][i]|`; zero by construction, kept as a guard for
    /// tests and for matrices assembled outside this module.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_mirrors_and_matvec_applies_both_triangles() {
        let mut m = SymmetricMatrix::zeros(3);
        m.set(0, 1, 2.0);
        m.set(2, 2, -1.0);
        assert_eq!(m.get(1, 0), 2.0);
        let y = m.matvec(&[1.0, 1.0, 1.0]);
        assert_eq!(y, vec![2.0, 2.0, -1.0]);
        assert_eq!(m.asymmetry(), 0.0);
    }

    #[test]
    fn norm_inf_is_max_row_sum() {
        let mut m = SymmetricMatrix::zeros(2);
        m.set(0, 0, 1.0);
        m.set(0, 1, -3.0);
        assert_eq!(m.norm_inf(), 4.0);
    }
}
