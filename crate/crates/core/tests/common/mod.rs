//! Independent reference implementations used as oracles by the
//! integration and acceptance tests. Nothing here calls the library's basis
//! evaluation or linear algebra.

#![allow(dead_code)]

/// Clamped uniform knot vector of `2^m` cells of degree `r` on `[lo, hi]`.
pub fn clamped_knots(m: u32, r: usize, lo: f64, hi: f64) -> Vec<f64> {
    let cells = 1usize << m;
    let mut t = vec![lo; r + 1];
    for j in 1..cells {
        t.push(lo + (hi - lo) * j as f64 / cells as f64);
    }
    t.extend(std::iter::repeat_n(hi, r + 1));
    t
}

/// Cox–de Boor recursion for `B_{i,r}(x)`, right-continuous except at the
/// right end where the last basis function is closed.
pub fn cox_de_boor(t: &[f64], i: usize, r: usize, x: f64) -> f64 {
    if r == 0 {
        let hi = *t.last().unwrap();
        let inside = t[i] <= x && x < t[i + 1];
        let closes = x == hi && t[i] < t[i + 1] && t[i + 1] == hi;
        return if inside || closes { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    if t[i + r] > t[i] {
        v += (x - t[i]) / (t[i + r] - t[i]) * cox_de_boor(t, i, r - 1, x);
    }
    if t[i + r + 1] > t[i + 1] {
        v += (t[i + r + 1] - x) / (t[i + r + 1] - t[i + 1]) * cox_de_boor(t, i + 1, r - 1, x);
    }
    v
}

pub fn basis(m: u32, r: usize, lo: f64, hi: f64, x: f64) -> Vec<f64> {
    let t = clamped_knots(m, r, lo, hi);
    (0..(1usize << m) + r).map(|i| cox_de_boor(&t, i, r, x)).collect()
}

/// Gaussian elimination with partial pivoting; `None` for a singular system.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (top, bottom) = a.split_at_mut(row);
            for (target, source) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *target -= f * source;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Least-squares spline coefficients from the normal equations over the
/// points inside `[lo, hi]`, normalized by the total number of points.
pub fn brute_force_fit(m: u32, r: usize, lo: f64, hi: f64, xs: &[f64], ys: &[f64]) -> Option<Vec<f64>> {
    let d = (1usize << m) + r;
    let n = xs.len() as f64;
    let mut g = vec![vec![0.0; d]; d];
    let mut v = vec![0.0; d];
    for (&x, &y) in xs.iter().zip(ys) {
        if !(lo <= x && x <= hi) {
            continue;
        }
        let b = basis(m, r, lo, hi, x);
        for i in 0..d {
            v[i] += y * b[i] / n;
            for j in 0..d {
                g[i][j] += b[i] * b[j] / n;
            }
        }
    }
    solve(g, v)
}

/// Sample variance after dropping the first `skip` observations.
pub fn variance(xs: &[f64], skip: usize) -> f64 {
    let tail = &xs[skip..];
    let n = tail.len() as f64;
    let mean = tail.iter().sum::<f64>() / n;
    tail.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}
