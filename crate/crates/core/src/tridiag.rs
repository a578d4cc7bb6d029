//! Tridiagonal operators and the Thomas algorithm.

/// Tridiagonal matrix stored by diagonals.
///
/// Row `i` reads `lower[i] * v[i-1] + diag[i] * v[i] + upper[i] * v[i+1]`;
/// `lower[0]` and `upper[n-1]` are always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Zero pivot encountered in [`thomas_solve`], by row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularPivot(pub usize);

impl TridiagonalOperator {
    pub fn zeros(n: usize) -> Self {
        Self { lower: vec![0.0; n], diag: vec![0.0; n], upper: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `out = self * v`.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.len();
        assert_eq!(v.len(), n);
        assert_eq!(out.len(), n);
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.lower[i] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * v[i + 1];
            }
            out[i] = acc;
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        out
    }

    /// Exact matrix transpose.
    pub fn transpose(&self) -> Self {
        let n = self.len();
        let mut t = Self::zeros(n);
        t.diag.copy_from_slice(&self.diag);
        for i in 1..n {
            t.lower[i] = self.upper[i - 1];
            t.upper[i - 1] = self.lower[i];
        }
        t
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.apply(&vec![1.0; self.len()])
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.transpose().row_sums()
    }

    /// `(I + scale * A) v`.
    pub fn apply_identity_plus(&self, scale: f64, v: &[f64]) -> Vec<f64> {
        let mut out = self.apply(v);
        for (o, x) in out.iter_mut().zip(v) {
            *o = x + scale * *o;
        }
        out
    }

    /// Solves `(I - scale * A) x = rhs`.
    pub fn solve_identity_minus(&self, scale: f64, rhs: &[f64]) -> Result<Vec<f64>, SingularPivot> {
        let n = self.len();
        let lower: Vec<f64> = self.lower.iter().map(|l| -scale * l).collect();
        let upper: Vec<f64> = self.upper.iter().map(|u| -scale * u).collect();
        let diag: Vec<f64> = self.diag.iter().map(|d| 1.0 - scale * d).collect();
        let mut x = rhs.to_vec();
        debug_assert_eq!(x.len(), n);
        thomas_solve(&lower, &diag, &upper, &mut x)?;
        Ok(x)
    }
}

/// Solves the tridiagonal system in place, overwriting `rhs` with the solution.
///
/// No pivoting; intended for the diagonally dominant M-matrices produced by
/// the implicit time steps.
pub fn thomas_solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<(), SingularPivot> {
    let n = rhs.len();
    assert!(lower.len() == n && diag.len() == n && upper.len() == n);
    if n == 0 {
        return Ok(());
    }
    let mut c_prime = vec![0.0; n];
    let tiny = f64::MIN_POSITIVE.sqrt();

    let mut pivot = diag[0];
    if !pivot.is_finite() || pivot.abs() <= tiny {
        return Err(SingularPivot(0));
    }
    c_prime[0] = upper[0] / pivot;
    rhs[0] /= pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c_prime[i - 1];
        if !pivot.is_finite() || pivot.abs() <= tiny {
            return Err(SingularPivot(i));
        }
        c_prime[i] = upper[i] / pivot;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c_prime[i] * rhs[i + 1];
    }
    Ok(())
}
