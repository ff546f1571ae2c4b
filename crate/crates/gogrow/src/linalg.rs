//! Tridiagonal kernels: Thomas solves for the implicit steps and a
//! Sturm-sequence bisection eigensolver for symmetric tridiagonal matrices.

/// Solves a tridiagonal system in O(n) without pivoting.
///
/// `sub[i]` couples row `i+1` to `i`, `sup[i]` couples row `i` to `i+1`;
/// `diag` and `rhs` have length `n`. All our systems are strictly
/// diagonally dominant or shifted near-singular with a pivot guard applied
/// by the caller, so pivoting is not needed.
pub fn thomas_solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert!(n >= 1 && sub.len() == n - 1 && sup.len() == n - 1 && rhs.len() == n);
    let mut c = vec![0.0; n - 1];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    assert!(piv != 0.0, "zero pivot in tridiagonal solve");
    if n > 1 {
        c[0] = sup[0] / piv;
    }
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - sub[i - 1] * c[i - 1];
        assert!(piv != 0.0, "zero pivot in tridiagonal solve");
        if i < n - 1 {
            c[i] = sup[i] / piv;
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        d[i] = d[i] - c[i] * d[i + 1];
    }
    d
}

/// Symmetric tridiagonal matrix: `diag` (n) and `off` (n-1).
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// Gershgorin bounds containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i < n - 1 {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        // LDL^T pivots of (A - x I); sign changes count eigenvalues < x.
        // Guard tiny pivots so the recurrence never divides by zero.
        const PIVOT_GUARD: f64 = f64::MIN_POSITIVE / f64::EPSILON;
        let n = self.n();
        let mut count = 0;
        let mut d = self.diag[0] - x;
        if d < 0.0 {
            count += 1;
        }
        for i in 1..n {
            if d.abs() < PIVOT_GUARD {
                d = if d < 0.0 { -PIVOT_GUARD } else { PIVOT_GUARD };
            }
            d = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / d;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k` smallest eigenvalues by bisection on the Sturm count.
    pub fn smallest_eigenvalues(&self, k: usize) -> Vec<f64> {
        let k = k.min(self.n());
        let (glo, ghi) = self.gershgorin();
        let mut out = Vec::with_capacity(k);
        for idx in 0..k {
            let (mut lo, mut hi) = (glo, ghi);
            // invariant: count_below(lo) <= idx < count_below(hi)
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if hi - lo < 2.0 * f64::EPSILON * mid.abs().max(1.0) {
                    break;
                }
                if self.count_below(mid) > idx {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        out
    }

    /// Eigenvector for an eigenvalue estimate via shifted inverse iteration.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.n();
        // Small relative shift keeps the Thomas pivots away from exact zero.
        let (glo, ghi) = self.gershgorin();
        let scale = (ghi - glo).max(1.0);
        let shift = lambda + 1e-12 * scale;
        let diag: Vec<f64> = self.diag.iter().map(|&d| d - shift).collect();
        let mut v = vec![1.0; n];
        for _ in 0..4 {
            let w = thomas_solve(&self.off, &diag, &self.off, &v);
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(norm.is_finite() && norm > 0.0, "inverse iteration diverged");
            v = w.iter().map(|x| x / norm).collect();
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense_solve() {
        // A = [[2,1,0],[1,3,1],[0,1,2]], b = [1,2,3] -> x solves Ax=b
        let x = thomas_solve(&[1.0, 1.0], &[2.0, 3.0, 2.0], &[1.0, 1.0], &[1.0, 2.0, 3.0]);
        // residual check
        let r0 = 2.0 * x[0] + x[1] - 1.0;
        let r1 = x[0] + 3.0 * x[1] + x[2] - 2.0;
        let r2 = x[1] + 2.0 * x[2] - 3.0;
        for r in [r0, r1, r2] {
            assert!(r.abs() < 1e-12, "residual {r}");
        }
    }

    #[test]
    fn dirichlet_laplacian_eigenvalues() {
        // -u'' on (0, L) with Dirichlet ends, n interior nodes, h = L/(n+1):
        // lambda_k = (4/h^2) sin^2(k pi h / (2 L)), k = 1..n (closed form).
        let n = 200;
        let l = 1.0;
        let h = l / (n as f64 + 1.0);
        let t = SymTridiag {
            diag: vec![2.0 / (h * h); n],
            off: vec![-1.0 / (h * h); n - 1],
        };
        let got = t.smallest_eigenvalues(4);
        for (k, lam) in got.iter().enumerate() {
            let kk = (k + 1) as f64;
            let exact = 4.0 / (h * h) * (kk * std::f64::consts::PI * h / (2.0 * l)).sin().powi(2);
            assert!((lam - exact).abs() < 1e-8 * exact.max(1.0), "k={k}: {lam} vs {exact}");
        }
    }

    #[test]
    fn eigenvector_matches_sine_mode() {
        let n = 100;
        let h = 1.0 / (n as f64 + 1.0);
        let t = SymTridiag {
            diag: vec![2.0 / (h * h); n],
            off: vec![-1.0 / (h * h); n - 1],
        };
        let lam = t.smallest_eigenvalues(1)[0];
        let v = t.eigenvector(lam);
        let exact: Vec<f64> = (1..=n).map(|i| (std::f64::consts::PI * i as f64 * h).sin()).collect();
        let norm = exact.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dot: f64 = v.iter().zip(&exact).map(|(a, b)| a * b / norm).sum();
        assert!(dot.abs() > 0.999999, "cosine {dot}");
    }
}
