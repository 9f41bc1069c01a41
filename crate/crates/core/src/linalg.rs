//! Small dense elimination routines shared by the solvers.

use crate::scalar::Scalar;

/// Reduced row echelon form in place. Returns the pivot columns.
pub fn rref<T: Scalar>(a: &mut [Vec<T>], cols: usize) -> Vec<usize> {
    let eps = T::pivot_eps();
    let rows = a.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let mut best = r;
        for i in r + 1..rows {
            if a[i][c].abs() > a[best][c].abs() {
                best = i;
            }
        }
        if a[best][c].abs() <= eps {
            continue;
        }
        a.swap(r, best);
        let p = a[r][c].clone();
        for x in a[r].iter_mut() {
            *x = x.clone() / p.clone();
        }
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in 0..a[i].len() {
                    let v = a[r][j].clone() * f.clone();
                    a[i][j] = a[i][j].clone() - v;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Solves `a x = b` for square nonsingular `a`.
pub fn solve_square<T: Scalar>(a: &[Vec<T>], b: &[T]) -> Option<Vec<T>> {
    let n = b.len();
    let mut m: Vec<Vec<T>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    let piv = rref(&mut m, n);
    if piv.len() < n {
        return None;
    }
    Some(m.into_iter().map(|r| r[n].clone()).collect())
}

pub fn rank<T: Scalar>(a: &[Vec<T>], cols: usize) -> usize {
    let mut m = a.to_vec();
    rref(&mut m, cols).len()
}

/// A nonzero `d` with `a d = 0`, if the kernel is nontrivial.
pub fn null_vector<T: Scalar>(a: &[Vec<T>], cols: usize) -> Option<Vec<T>> {
    let mut m = a.to_vec();
    let piv = rref(&mut m, cols);
    let free = (0..cols).find(|c| !piv.contains(c))?;
    let mut d = vec![T::zero(); cols];
    d[free] = T::one();
    for (r, &pc) in piv.iter().enumerate() {
        d[pc] = -m[r][free].clone();
    }
    Some(d)
}

/// Least squares through the normal equations. Free directions are set to
/// zero. Returns the solution and the residual vector `a x - b`.
pub fn least_squares<T: Scalar>(a: &[Vec<T>], b: &[T], cols: usize) -> (Vec<T>, Vec<T>) {
    let mut normal: Vec<Vec<T>> = (0..cols)
        .map(|j| {
            let mut row: Vec<T> = (0..cols)
                .map(|k| {
                    a.iter()
                        .fold(T::zero(), |acc, r| acc + r[j].clone() * r[k].clone())
                })
                .collect();
            row.push(
                a.iter()
                    .zip(b)
                    .fold(T::zero(), |acc, (r, bi)| acc + r[j].clone() * bi.clone()),
            );
            row
        })
        .collect();
    let piv = rref(&mut normal, cols);
    let mut x = vec![T::zero(); cols];
    for (r, &pc) in piv.iter().enumerate() {
        x[pc] = normal[r][cols].clone();
    }
    let res = a
        .iter()
        .zip(b)
        .map(|(r, bi)| crate::scalar::dot(r, &x) - bi.clone())
        .collect();
    (x, res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_solve() {
        let a: Vec<Vec<f64>> = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve_square(&a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
        assert!(solve_square(&[vec![1.0, 2.0], vec![2.0, 4.0]], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn kernel() {
        let a: Vec<Vec<f64>> = vec![vec![1.0, 1.0, 1.0], vec![0.0, 1.0, 2.0]];
        let d = null_vector(&a, 3).unwrap();
        for r in &a {
            assert!(crate::scalar::dot(r, &d).abs() < 1e-12);
        }
        assert!(null_vector(&[vec![1.0, 0.0], vec![0.0, 1.0]], 2).is_none());
    }

    #[test]
    fn inconsistent_least_squares() {
        let a: Vec<Vec<f64>> = vec![vec![1.0], vec![1.0]];
        let (x, r) = least_squares(&a, &[0.0, 2.0], 1);
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((r[0] - 1.0).abs() < 1e-12 && (r[1] + 1.0).abs() < 1e-12);
    }
}
