//! FFT preconditioner for translation-invariant operators on the torus.
//!
//! On a uniform periodic mesh every assembled operator commutes with grid
//! shifts, so it is diagonalized by the 2-D discrete Fourier transform. For the
//! scalar and componentwise-decoupled vector operators the preconditioner below
//! is an exact inverse (a pseudo-inverse on the constant mode when the operator
//! is singular), and CG converges in one or two iterations.

use std::sync::Arc;

use chorin_core::fem::{CsrMatrix, PeriodicMesh, Preconditioner, PreconditionerFactory, SharedPreconditioner};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Relative size below which a symbol entry is treated as the kernel.
const KERNEL_TOL: f64 = 1e-10;
/// Allowed relative deviation from an exactly shift-invariant stencil.
const CIRCULANT_TOL: f64 = 1e-12;

pub struct SpectralPreconditioner {
    n: usize,
    components: usize,
    inverse_symbol: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Jacobi fallback for operators that are not shift invariant.
pub struct JacobiPreconditioner {
    inverse_diagonal: Vec<f64>,
}

impl Preconditioner for JacobiPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), d) in z.iter_mut().zip(r).zip(&self.inverse_diagonal) {
            *zi = ri * d;
        }
    }
}

fn jacobi(op: &CsrMatrix) -> SharedPreconditioner {
    let inverse_diagonal = (0..op.nrows())
        .map(|i| {
            let d = op.get(i, i);
            if d != 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    Box::new(JacobiPreconditioner { inverse_diagonal })
}

/// Stencil of row `(0, component 0)`, as offsets `(di, dj)` on the grid.
/// Returns `None` when the operator is not shift invariant or couples components.
fn shift_invariant_stencil(op: &CsrMatrix, n: usize, components: usize) -> Option<Vec<((usize, usize), f64)>> {
    let (cols, vals) = op.row(0);
    let mut stencil = Vec::with_capacity(cols.len());
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (&col, &v) in cols.iter().zip(vals) {
        if col % components != 0 {
            if v.abs() > CIRCULANT_TOL * scale {
                return None;
            }
            continue;
        }
        let vertex = col / components;
        stencil.push(((vertex % n, vertex / n), v));
    }
    for row in 0..op.nrows() {
        let (c, vertex) = (row % components, row / components);
        let (i, j) = (vertex % n, vertex / n);
        let (cols, _) = op.row(row);
        let expected_nnz = stencil.len();
        let same_component = cols.iter().filter(|&&col| col % components == c).count();
        if same_component != expected_nnz {
            return None;
        }
        for &((di, dj), v) in &stencil {
            let col = components * ((i + di) % n + n * ((j + dj) % n)) + c;
            if (op.get(row, col) - v).abs() > CIRCULANT_TOL * scale {
                return None;
            }
        }
    }
    Some(stencil)
}

impl SpectralPreconditioner {
    /// Builds the preconditioner, or `None` if `op` is not shift invariant.
    pub fn new(mesh: &PeriodicMesh, op: &CsrMatrix, components: usize) -> Option<Self> {
        let n = mesh.n_cells();
        if op.nrows() != components * n * n || op.ncols() != op.nrows() {
            return None;
        }
        let stencil = shift_invariant_stencil(op, n, components)?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);

        // (A x)_v = Σ_d a_d x_{v+d}, so the symbol is Σ_d a_d e^{+iθ·d}.
        let mut symbol = vec![Complex::new(0.0, 0.0); n * n];
        for &((di, dj), v) in &stencil {
            symbol[di + n * dj] += v;
        }
        let mut plan = Fft2 {
            n,
            forward: forward.clone(),
            inverse: inverse.clone(),
        };
        plan.inverse_unscaled(&mut symbol);
        let max = symbol.iter().fold(0.0f64, |m, s| m.max(s.norm()));
        let inverse_symbol = symbol
            .iter()
            .map(|s| {
                if s.norm() <= KERNEL_TOL * max {
                    0.0
                } else {
                    1.0 / s.re
                }
            })
            .collect();
        Some(Self {
            n,
            components,
            inverse_symbol,
            forward,
            inverse,
        })
    }
}

struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn run(&mut self, data: &mut [Complex<f64>], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        fft.process(data);
        let mut column = vec![Complex::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                column[j] = data[i + n * j];
            }
            fft.process(&mut column);
            for j in 0..n {
                data[i + n * j] = column[j];
            }
        }
    }

    fn inverse_unscaled(&mut self, data: &mut [Complex<f64>]) {
        let fft = self.inverse.clone();
        self.run(data, &fft);
    }

    fn forward(&mut self, data: &mut [Complex<f64>]) {
        let fft = self.forward.clone();
        self.run(data, &fft);
    }
}

impl Preconditioner for SpectralPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.n;
        let mut plan = Fft2 {
            n,
            forward: self.forward.clone(),
            inverse: self.inverse.clone(),
        };
        let scale = 1.0 / (n * n) as f64;
        let mut data = vec![Complex::new(0.0, 0.0); n * n];
        for c in 0..self.components {
            for (v, d) in data.iter_mut().enumerate() {
                *d = Complex::new(r[self.components * v + c], 0.0);
            }
            plan.forward(&mut data);
            for (d, s) in data.iter_mut().zip(&self.inverse_symbol) {
                *d *= s * scale;
            }
            plan.inverse_unscaled(&mut data);
            for (v, d) in data.iter().enumerate() {
                z[self.components * v + c] = d.re;
            }
        }
    }
}

/// Uses the FFT inverse where the operator allows it, Jacobi otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct SpectralFactory;

impl PreconditionerFactory for SpectralFactory {
    fn build(&self, mesh: &PeriodicMesh, op: &CsrMatrix, components: usize) -> SharedPreconditioner {
        match SpectralPreconditioner::new(mesh, op, components) {
            Some(pc) => Box::new(pc),
            None => {
                log::debug!("operator is not shift invariant; falling back to Jacobi");
                jacobi(op)
            }
        }
    }
}

/// Diagonal scaling only.
#[derive(Debug, Clone, Copy, Default)]
pub struct JacobiFactory;

impl PreconditionerFactory for JacobiFactory {
    fn build(&self, _: &PeriodicMesh, op: &CsrMatrix, _: usize) -> SharedPreconditioner {
        jacobi(op)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chorin_core::fem::Discretization;

    #[test]
    fn exact_inverse_of_momentum_operator() {
        let disc = Discretization::new(6).unwrap();
        let op = disc.ops.mass_v.linear_combination(1.0, &disc.ops.stiff_v, 0.1);
        let pc = SpectralPreconditioner::new(&disc.mesh, &op, 2).unwrap();
        let x: Vec<f64> = (0..op.nrows()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let b = op.mul_vec(&x);
        let mut y = vec![0.0; x.len()];
        pc.apply(&b, &mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10, "{a} {b}");
        }
    }

    #[test]
    fn pseudo_inverse_of_stiffness() {
        let disc = Discretization::new(5).unwrap();
        let op = &disc.ops.stiff_s;
        let pc = SpectralPreconditioner::new(&disc.mesh, op, 1).unwrap();
        let mut x: Vec<f64> = (0..25).map(|i| ((i * 7) % 5) as f64).collect();
        let mean = x.iter().sum::<f64>() / 25.0;
        x.iter_mut().for_each(|v| *v -= mean);
        let mut y = vec![0.0; 25];
        pc.apply(&op.mul_vec(&x), &mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn coupling_operator_is_rejected() {
        let disc = Discretization::new(4).unwrap();
        let coupled = disc.ops.stiff_v.linear_combination(1.0, &disc.ops.mass_v, 1.0);
        assert!(SpectralPreconditioner::new(&disc.mesh, &coupled, 2).is_some());
        let not_square = &disc.ops.grad_coupling;
        assert!(SpectralPreconditioner::new(&disc.mesh, not_square, 2).is_none());
    }
}
