//! Observation storage shared by the acquisition layer and the BO loop.

use ndarray::{Array1, Array2};

/// Rows of `(x, y, grad_y)` observations.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub x: Vec<Array1<f64>>,
    pub y: Vec<f64>,
    pub grad: Vec<Array1<f64>>,
}

impl Dataset {
    pub fn push(&mut self, x: Array1<f64>, y: f64, grad: Array1<f64>) {
        self.x.push(x);
        self.y.push(y);
        self.grad.push(grad);
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, |x| x.len())
    }

    /// Inputs stacked into an `N x d` matrix.
    pub fn x_matrix(&self) -> Array2<f64> {
        let n = self.len();
        let d = self.dim();
        let mut out = Array2::zeros((n, d));
        for (i, row) in self.x.iter().enumerate() {
            out.row_mut(i).assign(row);
        }
        out
    }

    pub fn y_array(&self) -> Array1<f64> {
        Array1::from_vec(self.y.clone())
    }

    /// Gradients stacked into an `N x d` matrix.
    pub fn grad_matrix(&self) -> Array2<f64> {
        let n = self.len();
        let d = self.dim();
        let mut out = Array2::zeros((n, d));
        for (i, row) in self.grad.iter().enumerate() {
            out.row_mut(i).assign(row);
        }
        out
    }
}
