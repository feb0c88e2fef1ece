//! Dense reference implementations used as test oracles. Nothing here calls
//! the library's assembly or solvers.
#![allow(dead_code, clippy::needless_range_loop)]

pub type Dense = Vec<Vec<f64>>;

pub fn zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

pub fn matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

pub fn transpose(a: &Dense) -> Dense {
    let mut t = zeros(a[0].len(), a.len());
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            t[j][i] = *v;
        }
    }
    t
}

pub fn quad(a: &Dense, x: &[f64]) -> f64 {
    x.iter().zip(matvec(a, x)).map(|(a, b)| a * b).sum()
}

/// Gaussian elimination with partial pivoting.
pub fn lu_solve(a: &Dense, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        x.swap(col, piv);
        assert!(m[col][col].abs() > 1e-300, "singular matrix");
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
                x[r] -= f * x[col];
            }
        }
    }
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (x[r] - s) / m[r][r];
    }
    x
}

/// Solves the singular system `K x = b` with `Σ w_i x_i = 0` through the
/// bordered matrix `[K w; wᵀ 0]`.
pub fn bordered_solve(k: &Dense, w: &[f64], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut a = zeros(n + 1, n + 1);
    for i in 0..n {
        a[i][..n].copy_from_slice(&k[i]);
        a[i][n] = w[i];
        a[n][i] = w[i];
    }
    let mut rhs = b.to_vec();
    rhs.push(0.0);
    let mut x = lu_solve(&a, &rhs);
    x.pop();
    x
}

/// Uniform periodic grid split along the `(i,j) → (i+1,j+1)` diagonal.
pub struct Grid {
    pub n: usize,
}

pub struct Element {
    pub nodes: [usize; 3],
    /// Unwrapped corner coordinates.
    pub corners: [[f64; 2]; 3],
}

impl Grid {
    pub fn vertex(&self, i: usize, j: usize) -> usize {
        (i % self.n) + self.n * (j % self.n)
    }

    pub fn elements(&self) -> Vec<Element> {
        let h = 1.0 / self.n as f64;
        let mut out = Vec::new();
        for j in 0..self.n {
            for i in 0..self.n {
                let p = |di: usize, dj: usize| [(i + di) as f64 * h, (j + dj) as f64 * h];
                out.push(Element {
                    nodes: [self.vertex(i, j), self.vertex(i + 1, j), self.vertex(i + 1, j + 1)],
                    corners: [p(0, 0), p(1, 0), p(1, 1)],
                });
                out.push(Element {
                    nodes: [self.vertex(i, j), self.vertex(i + 1, j + 1), self.vertex(i, j + 1)],
                    corners: [p(0, 0), p(1, 1), p(0, 1)],
                });
            }
        }
        out
    }

    pub fn n_vertices(&self) -> usize {
        self.n * self.n
    }
}

/// Area and constant gradients of the three hat functions, obtained by
/// inverting the affine map `[1 x y]` at the corners.
pub fn element_geometry(c: &[[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let m = vec![
        vec![1.0, c[0][0], c[0][1]],
        vec![1.0, c[1][0], c[1][1]],
        vec![1.0, c[2][0], c[2][1]],
    ];
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut grads = [[0.0; 2]; 3];
    for a in 0..3 {
        let mut e = vec![0.0; 3];
        e[a] = 1.0;
        let coef = lu_solve(&m, &e);
        grads[a] = [coef[1], coef[2]];
    }
    (det.abs() / 2.0, grads)
}

pub struct DenseOps {
    pub mass: Dense,
    pub stiff: Dense,
    pub mass_v: Dense,
    pub stiff_v: Dense,
    /// `G[(i,c), j] = ∫ ∂_c χ_j φ_i`
    pub grad: Dense,
}

pub fn dense_ops(n: usize) -> DenseOps {
    let g = Grid { n };
    let nv = g.n_vertices();
    let mut mass = zeros(nv, nv);
    let mut stiff = zeros(nv, nv);
    let mut grad = zeros(2 * nv, nv);
    for e in g.elements() {
        let (area, gr) = element_geometry(&e.corners);
        for a in 0..3 {
            for b in 0..3 {
                let (ia, ib) = (e.nodes[a], e.nodes[b]);
                mass[ia][ib] += if a == b { area / 6.0 } else { area / 12.0 };
                stiff[ia][ib] += area * (gr[a][0] * gr[b][0] + gr[a][1] * gr[b][1]);
                for c in 0..2 {
                    grad[2 * ia + c][ib] += area / 3.0 * gr[b][c];
                }
            }
        }
    }
    let widen = |s: &Dense| {
        let mut v = zeros(2 * nv, 2 * nv);
        for i in 0..nv {
            for j in 0..nv {
                for c in 0..2 {
                    v[2 * i + c][2 * j + c] = s[i][j];
                }
            }
        }
        v
    };
    DenseOps {
        mass_v: widen(&mass),
        stiff_v: widen(&stiff),
        mass,
        stiff,
        grad,
    }
}

/// Nested prolongation from `N` to `2N` by edge-midpoint averaging.
pub fn refine_nested(values: &[f64], components: usize, n: usize) -> Vec<f64> {
    let coarse = Grid { n };
    let fine = Grid { n: 2 * n };
    let mut out = vec![0.0; components * fine.n_vertices()];
    for fj in 0..2 * n {
        for fi in 0..2 * n {
            let (i, j) = (fi / 2, fj / 2);
            let corners: Vec<usize> = match (fi % 2, fj % 2) {
                (0, 0) => vec![coarse.vertex(i, j)],
                (1, 0) => vec![coarse.vertex(i, j), coarse.vertex(i + 1, j)],
                (0, 1) => vec![coarse.vertex(i, j), coarse.vertex(i, j + 1)],
                _ => vec![coarse.vertex(i, j), coarse.vertex(i + 1, j + 1)],
            };
            for c in 0..components {
                let s: f64 = corners.iter().map(|&v| values[components * v + c]).sum();
                out[components * fine.vertex(fi, fj) + c] = s / corners.len() as f64;
            }
        }
    }
    out
}

/// Small deterministic generator for test data (xorshift64*).
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.max(1))
    }

    pub fn uniform(&mut self) -> f64 {
        self.0 ^= self.0 >> 12;
        self.0 ^= self.0 << 25;
        self.0 ^= self.0 >> 27;
        let v = self.0.wrapping_mul(0x2545_f491_4f6c_dd1d);
        (v >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    pub fn vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.uniform()).collect()
    }
}

/// Neumaier summation.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &x in xs {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + comp
}
