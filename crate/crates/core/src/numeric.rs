//! Small numerical kernels shared by the modules: finite-difference weights
//! on nonuniform grids, least squares, quadrature and interpolation.

/// Finite-difference weights for the `m`-th derivative at `x0` from the
/// nodes `xs` (Fornberg's recursion).
pub fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// First derivative of sampled data at every node using a five-point stencil
/// (centred in the interior, shifted at the ends).
pub fn derivative5(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    assert!(n >= 5 && ys.len() == n);
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(2).min(n - 5);
            let stencil = &xs[start..start + 5];
            let w = fd_weights(xs[i], stencil, 1);
            w.iter().zip(&ys[start..start + 5]).map(|(a, b)| a * b).sum()
        })
        .collect()
}

/// Solves a small dense linear system by Gaussian elimination with partial
/// pivoting. Returns `None` for a singular matrix.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Least-squares fit `y ≈ Σ_j coef_j · columns_j`; returns coefficients and
/// the coefficient of determination.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let k = columns.len();
    let n = y.len();
    if n < k {
        return None;
    }
    // Modified Gram-Schmidt QR keeps the nearly collinear log columns
    // well conditioned.
    let mut q: Vec<Vec<f64>> = columns.to_vec();
    let mut r = vec![vec![0.0; k]; k];
    for j in 0..k {
        for i in 0..j {
            let d: f64 = (0..n).map(|t| q[i][t] * q[j][t]).sum();
            r[i][j] = d;
            for t in 0..n {
                q[j][t] -= d * q[i][t];
            }
        }
        let norm = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return None;
        }
        r[j][j] = norm;
        for t in 0..n {
            q[j][t] /= norm;
        }
    }
    let qty: Vec<f64> = (0..k).map(|j| (0..n).map(|t| q[j][t] * y[t]).sum()).collect();
    let mut coef = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|c| r[i][c] * coef[c]).sum();
        coef[i] = (qty[i] - s) / r[i][i];
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = (0..n)
        .map(|t| {
            let fit: f64 = (0..k).map(|j| coef[j] * columns[j][t]).sum();
            (y[t] - fit).powi(2)
        })
        .sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Some((coef, r2))
}

/// Slope and intercept of an ordinary least-squares line.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let ones = vec![1.0; x.len()];
    let (c, r2) = least_squares(&[x.to_vec(), ones], y)?;
    Some((c[0], c[1], r2))
}

/// Cumulative integral `∫_{x_0}^{x_i} f` of sampled data using the cubic
/// through the four nearest nodes on each interval (fourth order).
pub fn cumulative_integral(xs: &[f64], fs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    assert_eq!(n, fs.len());
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n < 4 {
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * (xs[i] - xs[i - 1]) * (fs[i] + fs[i - 1]);
        }
        return out;
    }
    for i in 0..n - 1 {
        let start = i.saturating_sub(1).min(n - 4);
        let nodes = &xs[start..start + 4];
        let vals = &fs[start..start + 4];
        out[i + 1] = out[i] + integrate_lagrange(nodes, vals, xs[i], xs[i + 1]);
    }
    out
}

/// Exact integral over `[a, b]` of the Lagrange interpolant through
/// `(nodes, vals)`, evaluated with three-point Gauss–Legendre (exact for
/// cubics).
fn integrate_lagrange(nodes: &[f64], vals: &[f64], a: f64, b: f64) -> f64 {
    const G: [(f64, f64); 3] = [
        (-0.774_596_669_241_483_4, 5.0 / 9.0),
        (0.0, 8.0 / 9.0),
        (0.774_596_669_241_483_4, 5.0 / 9.0),
    ];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    G.iter()
        .map(|&(x, w)| w * lagrange_eval(nodes, vals, mid + half * x))
        .sum::<f64>()
        * half
}

pub fn lagrange_eval(nodes: &[f64], vals: &[f64], x: f64) -> f64 {
    let mut total = 0.0;
    for (i, (&xi, &yi)) in nodes.iter().zip(vals).enumerate() {
        let mut l = 1.0;
        for (j, &xj) in nodes.iter().enumerate() {
            if i != j {
                l *= (x - xj) / (xi - xj);
            }
        }
        total += l * yi;
    }
    total
}

/// Cubic Hermite interpolation on `[x0, x1]`.
#[inline]
pub fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * d1
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Geometric grid of `n` points from `a` to `b` (both positive).
pub fn geometric_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > a && n >= 2);
    let (la, lb) = (a.ln(), b.ln());
    let mut g: Vec<f64> = (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect();
    g[0] = a;
    g[n - 1] = b;
    g
}

/// Index of the sample nearest to `x` in a sorted slice.
pub fn nearest_index(xs: &[f64], x: f64) -> usize {
    match xs.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(i) => i,
        Err(0) => 0,
        Err(i) if i >= xs.len() => xs.len() - 1,
        Err(i) => {
            if (x - xs[i - 1]).abs() <= (xs[i] - x).abs() {
                i - 1
            } else {
                i
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_weights_reproduce_polynomial_derivatives() {
        let xs = [0.0, 0.1, 0.25, 0.3, 0.5];
        let f = |x: f64| x.powi(4) - 2.0 * x.powi(3) + x;
        let df = |x: f64| 4.0 * x.powi(3) - 6.0 * x * x + 1.0;
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let d = derivative5(&xs, &ys);
        for (x, d) in xs.iter().zip(d) {
            assert!((d - df(*x)).abs() < 1e-12);
        }
    }

    #[test]
    fn cumulative_integral_is_exact_for_cubics() {
        let xs = geometric_grid(1.0, 3.0, 17);
        let ys: Vec<f64> = xs.iter().map(|&x| x * x * x - x).collect();
        let ci = cumulative_integral(&xs, &ys);
        let exact = |x: f64| x.powi(4) / 4.0 - x * x / 2.0 - (0.25 - 0.5);
        for (x, c) in xs.iter().zip(ci) {
            assert!((c - exact(*x)).abs() < 1e-12);
        }
    }

    #[test]
    fn simpson_and_least_squares() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let (s, i, r2) = linear_fit(&x, &y).unwrap();
        assert!((s - 3.0).abs() < 1e-12 && (i + 1.0).abs() < 1e-12 && r2 > 0.999_999);
    }
}
