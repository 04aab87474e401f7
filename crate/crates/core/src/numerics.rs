//! Small numerical kernels shared by the solvers.

/// `ln(e^x + e^y)` without overflow.
pub fn log_add_exp(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    let mut sum = NeumaierSum::default();
    for &v in values {
        sum.add((v - max).exp());
    }
    max + sum.total().ln()
}

/// Compensated (Kahan-Babuska-Neumaier) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
    magnitude: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
        self.magnitude += value.abs();
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }

    /// Sum of absolute values of everything added, a scale for roundoff estimates.
    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::default();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Solves a tridiagonal system with the Thomas algorithm.
///
/// `sub[i]` multiplies `x[i-1]` in row `i` (so `sub[0]` is ignored) and
/// `sup[i]` multiplies `x[i+1]` (so the last entry is ignored).
/// Returns `None` when a pivot vanishes.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let m = diag.len();
    assert!(sub.len() == m && sup.len() == m && rhs.len() == m);
    if m == 0 {
        return Some(Vec::new());
    }
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return None;
    }
    c[0] = sup[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..m {
        pivot = diag[i] - sub[i] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return None;
        }
        c[i] = if i + 1 < m { sup[i] / pivot } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..m - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Some(x)
}

/// Composite Simpson weights on a uniform grid. An even node count closes the
/// last three intervals with the three-eighths rule.
pub fn simpson_weights(count: usize, h: f64) -> Vec<f64> {
    assert!(count >= 3, "Simpson quadrature needs at least three nodes");
    let mut w = vec![0.0; count];
    let odd_part = if count % 2 == 1 { count } else { count - 3 };
    if odd_part >= 3 {
        for i in 0..odd_part {
            w[i] = if i == 0 || i == odd_part - 1 {
                h / 3.0
            } else if i % 2 == 1 {
                4.0 * h / 3.0
            } else {
                2.0 * h / 3.0
            };
        }
    }
    if odd_part < count {
        let k = count - 4;
        for (j, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
            w[k + j] += 3.0 * h / 8.0 * c;
        }
    }
    w
}

/// Running integral `∫_{x_0}^{x_k} f` for every node, fourth order in `h` on
/// even-offset nodes and third order on the partial steps.
pub fn cumulative_simpson(values: &[f64], h: f64) -> Vec<f64> {
    let m = values.len();
    let mut out = vec![0.0; m];
    if m < 2 {
        return out;
    }
    if m == 2 {
        out[1] = 0.5 * h * (values[0] + values[1]);
        return out;
    }
    let mut acc = NeumaierSum::default();
    let mut k = 0;
    while k + 2 < m {
        let (f0, f1, f2) = (values[k], values[k + 1], values[k + 2]);
        out[k + 1] = acc.total() + h * (5.0 * f0 + 8.0 * f1 - f2) / 12.0;
        acc.add(h * (f0 + 4.0 * f1 + f2) / 3.0);
        out[k + 2] = acc.total();
        k += 2;
    }
    if k + 1 < m {
        let (f0, f1, f2) = (values[k - 1], values[k], values[k + 1]);
        out[k + 1] = acc.total() + h * (-f0 + 8.0 * f1 + 5.0 * f2) / 12.0;
    }
    out
}

/// Ordinary least-squares line through `(x, y)`; returns `(slope, intercept)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Gauss-Legendre nodes and weights mapped to `[lo, hi]`.
///
/// Roots of `P_m` by Newton iteration from the Chebyshev-like initial guess.
pub fn gauss_legendre(m: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    for i in 0..(m + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = mid - half * x;
        nodes[m - 1 - i] = mid + half * x;
        weights[i] = half * w;
        weights[m - 1 - i] = half * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if m == 0 {
        return (1.0, 0.0);
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// First and second derivatives on a uniform grid with the boundary handling
/// used by the radial solvers: zero slope and a mirrored ghost node at the
/// left end, second-order one-sided stencils at the right end.
pub fn radial_derivatives(values: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let m = values.len();
    assert!(m >= 4, "radial stencils need at least four nodes");
    let mut d1 = vec![0.0; m];
    let mut d2 = vec![0.0; m];
    d2[0] = 2.0 * (values[1] - values[0]) / (h * h);
    for k in 1..m - 1 {
        d1[k] = (values[k + 1] - values[k - 1]) / (2.0 * h);
        d2[k] = (values[k + 1] - 2.0 * values[k] + values[k - 1]) / (h * h);
    }
    let l = m - 1;
    d1[l] = (3.0 * values[l] - 4.0 * values[l - 1] + values[l - 2]) / (2.0 * h);
    d2[l] = (2.0 * values[l] - 5.0 * values[l - 1] + 4.0 * values[l - 2] - values[l - 3]) / (h * h);
    (d1, d2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_exp_handles_large_arguments() {
        assert!((log_add_exp(1000.0, 1000.0) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
        assert!((log_sum_exp(&[0.0, 0.0, 0.0, 0.0]) - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let s: NeumaierSum = [1.0, 1e100, 1.0, -1e100].into_iter().collect();
        assert_eq!(s.total(), 2.0);
    }

    #[test]
    fn thomas_matches_hand_solution() {
        // [2 1 0; 1 2 1; 0 1 2] x = [4 8 8] -> x = [1 2 3]
        let x = solve_tridiagonal(&[0.0, 1.0, 1.0], &[2.0, 2.0, 2.0], &[1.0, 1.0, 0.0], &[4.0, 8.0, 8.0]).unwrap();
        for (a, b) in x.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(solve_tridiagonal(&[0.0], &[0.0], &[0.0], &[1.0]).is_none());
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        for count in [4usize, 5, 6, 11, 12] {
            let h = 2.0 / (count - 1) as f64;
            let f: Vec<f64> = (0..count).map(|k| (k as f64 * h).powi(3)).collect();
            let w = simpson_weights(count, h);
            let total: f64 = w.iter().zip(&f).map(|(a, b)| a * b).sum();
            assert!((total - 4.0).abs() < 1e-12, "count {count}: {total}");
        }
    }

    #[test]
    fn cumulative_simpson_tracks_exponential() {
        let h = 0.01;
        let f: Vec<f64> = (0..401).map(|k| (k as f64 * h).exp()).collect();
        let c = cumulative_simpson(&f, h);
        for (k, v) in c.iter().enumerate() {
            let exact = (k as f64 * h).exp() - 1.0;
            assert!((v - exact).abs() < 1e-8 * (1.0 + exact), "node {k}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_high_degree_polynomials() {
        let (x, w) = gauss_legendre(16, 0.0, 1.0);
        let total: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(31)).sum();
        assert!((total - 1.0 / 32.0).abs() < 1e-15);
        let (_, w) = gauss_legendre(32, -1.0, 1.0);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let (m, b) = linear_fit(&x, &y);
        assert!((m - 3.0).abs() < 1e-14 && (b + 1.0).abs() < 1e-14);
    }

    #[test]
    fn radial_stencils_are_second_order() {
        let h = 0.01;
        let f: Vec<f64> = (0..200).map(|k| (k as f64 * h).cos()).collect();
        let (d1, d2) = radial_derivatives(&f, h);
        let l = f.len() - 1;
        let t = l as f64 * h;
        assert!((d1[l] + t.sin()).abs() < 1e-4);
        assert!((d2[l] + t.cos()).abs() < 1e-3);
        assert!((d2[0] + 1.0).abs() < 1e-4);
        assert_eq!(d1[0], 0.0);
    }
}
