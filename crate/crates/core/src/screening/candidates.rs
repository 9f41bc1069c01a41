//! Candidate posteriors for the screening programs.
//!
//! Within each cell of the arrangement cut out by the principal's ex-post
//! indifference hyperplanes the ex-post choice is constant, so the virtual
//! objective is a maximum of linear functions there. Its concave envelope is
//! therefore attained at arrangement vertices, which makes the vertex set an
//! exact candidate set for the relaxed program.

use crate::linalg::solve_square;
use crate::model::{Belief, ScreeningModel};
use crate::scalar::{sum, Scalar};

const DEDUP_TOL: f64 = 1e-9;

fn push_unique<T: Scalar>(out: &mut Vec<Belief<T>>, b: Belief<T>) {
    if !out.iter().any(|x| x.approx_eq(&b, DEDUP_TOL)) {
        out.push(b);
    }
}

/// Normals of the ex-post indifference hyperplanes
/// `sum_i mu_i (w_i(q, y) - w_i(q, y')) = 0`, skipping identically tied pairs.
pub fn indifference_normals<T: Scalar>(model: &ScreeningModel<T>) -> Vec<Vec<T>> {
    let n = model.num_types();
    let mut out = Vec::new();
    for (q, ys) in model.actions.iter().enumerate() {
        for a in 0..ys.len() {
            for b in a + 1..ys.len() {
                let normal: Vec<T> = (0..n)
                    .map(|i| model.principal[i][q][a].clone() - model.principal[i][q][b].clone())
                    .collect();
                if normal.iter().any(|x| x.abs() > T::pivot_eps()) {
                    out.push(normal);
                }
            }
        }
    }
    out
}

/// Vertices of the arrangement of indifference hyperplanes and simplex
/// facets, intersected with the simplex.
pub fn arrangement_vertices<T: Scalar>(model: &ScreeningModel<T>) -> Vec<Belief<T>> {
    let n = model.num_types();
    let mut planes = indifference_normals(model);
    for i in 0..n {
        let mut e = vec![T::zero(); n];
        e[i] = T::one();
        planes.push(e);
    }
    let mut out = Vec::new();
    if n == 1 {
        out.push(Belief::degenerate(1, 0));
        return out;
    }
    let mut pick = Vec::with_capacity(n - 1);
    choose(&planes, n - 1, 0, &mut pick, &mut |rows| {
        let mut a: Vec<Vec<T>> = rows.iter().map(|r| (*r).clone()).collect();
        a.push(vec![T::one(); n]);
        let mut b = vec![T::zero(); n];
        b[n - 1] = T::one();
        if let Some(x) = solve_square(&a, &b) {
            let tol = T::lit(DEDUP_TOL);
            if x.iter().all(|v| *v >= -tol.clone()) {
                push_unique(&mut out, Belief::from_vec_unchecked(x).cleaned());
            }
        }
    });
    out
}

fn choose<'a, T>(
    planes: &'a [Vec<T>],
    k: usize,
    start: usize,
    pick: &mut Vec<&'a Vec<T>>,
    f: &mut impl FnMut(&[&'a Vec<T>]),
) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for j in start..planes.len() {
        if planes.len() - j < k - pick.len() {
            break;
        }
        pick.push(&planes[j]);
        choose(planes, k, j + 1, pick, f);
        pick.pop();
    }
}

/// All beliefs with coordinates in `{0, 1/d, ..., 1}`.
pub fn grid<T: Scalar>(n: usize, density: usize) -> Vec<Belief<T>> {
    let mut out = Vec::new();
    if n == 0 || density == 0 {
        return out;
    }
    let d = T::from_usize(density).unwrap();
    let mut counts = vec![0usize; n];
    fn fill<T: Scalar>(i: usize, left: usize, counts: &mut Vec<usize>, d: &T, out: &mut Vec<Belief<T>>) {
        let n = counts.len();
        if i == n - 1 {
            counts[i] = left;
            out.push(Belief::from_vec_unchecked(
                counts.iter().map(|&c| T::from_usize(c).unwrap() / d.clone()).collect(),
            ));
            return;
        }
        for c in 0..=left {
            counts[i] = c;
            fill(i + 1, left - c, counts, d, out);
        }
    }
    fill(0, density, &mut counts, &d, &mut out);
    out
}

/// Degenerate beliefs, the prior, arrangement vertices and a uniform grid.
pub fn default_candidates<T: Scalar>(model: &ScreeningModel<T>, density: usize) -> Vec<Belief<T>> {
    let n = model.num_types();
    let mut out = Vec::new();
    for i in 0..n {
        push_unique(&mut out, Belief::degenerate(n, i));
    }
    let s = sum(&model.prior);
    push_unique(
        &mut out,
        Belief::from_vec_unchecked(model.prior.iter().map(|p| p.clone() / s.clone()).collect()),
    );
    for b in arrangement_vertices(model) {
        push_unique(&mut out, b);
    }
    for b in grid(n, density) {
        push_unique(&mut out, b);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(grid::<f64>(3, 4).len(), 15);
        assert_eq!(grid::<f64>(2, 10).len(), 11);
        for b in grid::<f64>(4, 3) {
            assert!((b.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
