//! Lowest eigenpairs of the symmetric normalized graph Laplacian
//! `L = I - D^-1/2 W D^-1/2`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Graphs up to this size use a dense symmetric eigensolver; larger ones
/// use Lanczos with full reorthogonalization.
pub const DENSE_EIGEN_MAX: usize = 1024;

#[derive(Debug, Clone)]
pub struct Eigenpairs {
    /// Ascending eigenvalues of `L`.
    pub values: Vec<f64>,
    /// `vectors[r]` is the unit eigenvector for `values[r]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Normalized adjacency in CSR form.
struct NormAdj {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl NormAdj {
    fn new(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut deg = vec![0.0; n];
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            if i == j || !(w >= 0.0) {
                return Err(Error::invalid("laplacian: self loop or negative weight"));
            }
            rows[i].push((j, w));
            rows[j].push((i, w));
            deg[i] += w;
            deg[j] += w;
        }
        if deg.iter().any(|&d| d <= 0.0) {
            return Err(Error::Numerical("laplacian: isolated node (zero degree)".into()));
        }
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_unstable_by_key(|&(j, _)| j);
            for &(j, w) in row.iter() {
                cols.push(j);
                vals.push(w / (deg[i] * deg[j]).sqrt());
            }
            offsets.push(cols.len());
        }
        Ok(NormAdj { offsets, cols, vals })
    }

    fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n() {
            let mut s = 0.0;
            for k in self.offsets[i]..self.offsets[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[i] = s;
        }
    }

    fn dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in self.offsets[i]..self.offsets[i + 1] {
                m[(i, self.cols[k])] += self.vals[k];
            }
        }
        m
    }
}

/// Lowest `k` eigenpairs of the normalized Laplacian of an undirected
/// weighted graph given as `(i, j, w)` edges (each pair listed once).
pub fn lowest_laplacian_eigenpairs(n: usize, edges: &[(usize, usize, f64)], k: usize) -> Result<Eigenpairs> {
    if n == 0 || k == 0 {
        return Err(Error::invalid("laplacian: empty graph or zero eigenpairs requested"));
    }
    let adj = NormAdj::new(n, edges)?;
    let k = k.min(n);
    if n <= DENSE_EIGEN_MAX {
        dense_lowest(&adj, k)
    } else {
        lanczos_lowest(&adj, k)
    }
}

fn dense_lowest(adj: &NormAdj, k: usize) -> Result<Eigenpairs> {
    let n = adj.n();
    let lap = DMatrix::<f64>::identity(n, n) - adj.dense();
    let eig = lap
        .try_symmetric_eigen(1e-12, 10_000)
        .ok_or_else(|| Error::Numerical("laplacian: eigen-solver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order[..k].iter().map(|&r| eig.eigenvalues[r]).collect();
    let vectors = order[..k]
        .iter()
        .map(|&r| eig.eigenvectors.column(r).iter().copied().collect())
        .collect();
    Ok(Eigenpairs { values, vectors })
}

fn lanczos_lowest(adj: &NormAdj, k: usize) -> Result<Eigenpairs> {
    let n = adj.n();
    let m = n.min(4 * k + 64);
    // deterministic start vector, a function of the node index only
    let mut q: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (1.7 * i as f64).sin()).collect();
    let nq = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.iter_mut().for_each(|v| *v /= nq);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    let mut w = vec![0.0; n];
    for j in 0..m {
        basis.push(q.clone());
        adj.apply(&q, &mut w);
        let a: f64 = w.iter().zip(&q).map(|(x, y)| x * y).sum();
        alpha.push(a);
        // two passes of Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nb = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if j + 1 == m || nb < 1e-10 {
            break;
        }
        beta.push(nb);
        q = w.iter().map(|v| v / nb).collect();
    }

    let steps = alpha.len();
    let mut t = DMatrix::<f64>::zeros(steps, steps);
    for i in 0..steps {
        t[(i, i)] = alpha[i];
        if i + 1 < steps {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = t
        .try_symmetric_eigen(1e-12, 10_000)
        .ok_or_else(|| Error::Numerical("laplacian: tridiagonal eigen-solver did not converge".into()))?;
    // largest adjacency eigenvalues are the smallest Laplacian ones
    let mut order: Vec<usize> = (0..steps).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let take = k.min(steps);
    let mut values = Vec::with_capacity(take);
    let mut vectors = Vec::with_capacity(take);
    for &r in &order[..take] {
        values.push(1.0 - eig.eigenvalues[r]);
        let s: DVector<f64> = eig.eigenvectors.column(r).into_owned();
        let mut v = vec![0.0; n];
        for (c, b) in basis.iter().enumerate().take(steps) {
            let sc = s[c];
            v.iter_mut().zip(b).for_each(|(x, y)| *x += sc * y);
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        vectors.push(v);
    }
    Ok(Eigenpairs { values, vectors })
}
