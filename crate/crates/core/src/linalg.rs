//! Dense LU factorization with partial pivoting, sized for MNA systems of a
//! few hundred unknowns at most.

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n + c] += v;
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Relative pivot threshold below which the system is declared singular.
const PIVOT_EPS: f64 = 1e-14;

/// Solve `a * x = b`. On failure returns the column that had no usable
/// pivot, which identifies the unknown the system cannot determine.
pub fn solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, usize> {
    let n = a.dim();
    assert_eq!(b.len(), n);
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut m = a.data.clone();
    let mut rhs = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let tiny = a.max_abs() * PIVOT_EPS;

    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|r| (r, m[r * n + k].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot <= tiny || pivot == 0.0 {
            return Err(k);
        }
        if p != k {
            for c in 0..n {
                m.swap(k * n + c, p * n + c);
            }
            rhs.swap(k, p);
            perm.swap(k, p);
        }
        let d = m[k * n + k];
        for r in k + 1..n {
            let f = m[r * n + k] / d;
            if f == 0.0 {
                continue;
            }
            m[r * n + k] = 0.0;
            for c in k + 1..n {
                m[r * n + c] -= f * m[k * n + c];
            }
            rhs[r] -= f * rhs[k];
        }
    }

    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for c in r + 1..n {
            acc -= m[r * n + c] * x[c];
        }
        x[r] = acc / m[r * n + r];
    }
    Ok(x)
}
