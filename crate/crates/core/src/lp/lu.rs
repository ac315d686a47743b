/// Dense LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub(crate) struct LuFactors {
    n: usize,
    /// Row-major; unit-lower `L` below the diagonal, `U` on and above it.
    lu: Vec<f64>,
    /// `perm[k]` is the original row placed at position `k`.
    perm: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Singular;

const SINGULAR_TOL: f64 = 1e-11;

impl LuFactors {
    pub(crate) fn factor(mut a: Vec<f64>, n: usize) -> Result<Self, Singular> {
        debug_assert_eq!(a.len(), n * n);
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
        for k in 0..n {
            let (mut piv, mut best) = (k, a[k * n + k].abs());
            for r in k + 1..n {
                let v = a[r * n + k].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best <= SINGULAR_TOL * scale {
                return Err(Singular);
            }
            if piv != k {
                for c in 0..n {
                    a.swap(k * n + c, piv * n + c);
                }
                perm.swap(k, piv);
            }
            let d = a[k * n + k];
            for r in k + 1..n {
                let f = a[r * n + k] / d;
                if f == 0.0 {
                    continue;
                }
                a[r * n + k] = f;
                let (top, bottom) = a.split_at_mut(r * n);
                let pivot_row = &top[k * n + k + 1..k * n + n];
                let row = &mut bottom[k + 1..n];
                for (x, p) in row.iter_mut().zip(pivot_row) {
                    *x -= f * p;
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    /// Solves `A x = b` in place.
    pub(crate) fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&y[..i]).map(|(l, v)| l * v).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..i * n + n];
            let s: f64 = row.iter().zip(&y[i + 1..]).map(|(u, v)| u * v).sum();
            y[i] = (y[i] - s) / self.lu[i * n + i];
        }
        b.copy_from_slice(&y);
    }

    /// Solves `A^T x = b` in place.
    pub(crate) fn solve_transpose(&self, b: &mut [f64]) {
        let n = self.n;
        let mut z = b.to_vec();
        // U^T z = b
        for i in 0..n {
            z[i] /= self.lu[i * n + i];
            let zi = z[i];
            if zi != 0.0 {
                for j in i + 1..n {
                    z[j] -= self.lu[i * n + j] * zi;
                }
            }
        }
        // L^T w = z
        for i in (0..n).rev() {
            let wi = z[i];
            if wi != 0.0 {
                for j in 0..i {
                    z[j] -= self.lu[i * n + j] * wi;
                }
            }
        }
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = z[k];
        }
    }
}
