//! Small dense symmetric solves for the barrier method's Newton systems.

use crate::scalar::Scalar;

/// Square matrix in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] += v;
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|x| *x = T::zero());
    }

    /// `self += scale * v v^T` for a sparse `v` given as `(index, value)`.
    pub fn add_outer(&mut self, v: &[(usize, T)], scale: T) {
        for &(i, a) in v {
            let sa = scale * a;
            for &(j, b) in v {
                self.data[i * self.n + j] += sa * b;
            }
        }
    }

    pub fn max_abs_diag(&self) -> T {
        (0..self.n).map(|i| self.get(i, i).abs()).fold(T::zero(), T::max)
    }

    /// Lower Cholesky factor of `self + shift * I`, or `None` if not positive definite.
    pub fn cholesky(&self, shift: T) -> Option<Cholesky<T>> {
        let n = self.n;
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let mut d = self.get(j, j) + shift;
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Some(Cholesky { n, l })
    }
}

pub struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Solves `L L^T x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }
}

/// Solves `(H + shift I) x = b` where the trailing variables form independent
/// blocks of `block` entries, each coupled only to itself and the leading
/// `dense` variables. The blocks are eliminated first, leaving a dense
/// Schur complement on the leading variables.
pub fn solve_bordered<T: Scalar>(h: &DenseMatrix<T>, b: &[T], dense: usize, block: usize, shift: T) -> Option<Vec<T>> {
    let n = h.dim();
    if block == 0 || dense == n {
        return h.cholesky(shift).map(|c| c.solve(b));
    }
    debug_assert_eq!((n - dense) % block, 0);
    let mut schur = DenseMatrix::zeros(dense);
    for i in 0..dense {
        for j in 0..dense {
            schur.data[i * dense + j] = h.get(i, j);
        }
    }
    let mut rhs: Vec<T> = b[..dense].to_vec();
    let mut factors = Vec::with_capacity((n - dense) / block);
    let mut coupled = Vec::new();
    let mut col = vec![T::zero(); block];
    for start in (dense..n).step_by(block) {
        let mut hbb = DenseMatrix::zeros(block);
        for i in 0..block {
            for j in 0..block {
                hbb.data[i * block + j] = h.get(start + i, start + j);
            }
        }
        let chol = hbb.cholesky(shift)?;
        coupled.clear();
        coupled.extend((0..dense).filter(|&r| (0..block).any(|i| h.get(r, start + i) != T::zero())));
        // X = H_BB^{-1} H_{B,R}, one column per coupled row
        let xs: Vec<Vec<T>> = coupled
            .iter()
            .map(|&r| {
                for i in 0..block {
                    col[i] = h.get(start + i, r);
                }
                chol.solve(&col)
            })
            .collect();
        let y = chol.solve(&b[start..start + block]);
        for &ra in coupled.iter() {
            for (c, &rc) in coupled.iter().enumerate() {
                let mut v = T::zero();
                for i in 0..block {
                    v += h.get(ra, start + i) * xs[c][i];
                }
                schur.data[ra * dense + rc] -= v;
            }
            let mut v = T::zero();
            for i in 0..block {
                v += h.get(ra, start + i) * y[i];
            }
            rhs[ra] -= v;
        }
        factors.push(chol);
    }
    let xd = schur.cholesky(shift)?.solve(&rhs);
    let mut x = xd.clone();
    for (bi, start) in (dense..n).step_by(block).enumerate() {
        for i in 0..block {
            let mut v = b[start + i];
            for (r, &xr) in xd.iter().enumerate() {
                let hv = h.get(start + i, r);
                if hv != T::zero() {
                    v -= hv * xr;
                }
            }
            col[i] = v;
        }
        x.extend(factors[bi].solve(&col));
    }
    Some(x)
}
