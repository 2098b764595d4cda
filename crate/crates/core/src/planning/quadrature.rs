use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss–Hermite rule for the standard normal law: nodes and weights with
/// `Σ wₖ f(ξₖ) = E f(ξ)` exactly for polynomials of degree `< 2K`.
///
/// Computed from the Jacobi matrix of the probabilists' Hermite
/// polynomials (off-diagonal `√k`).
pub fn gauss_hermite(k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(k >= 1);
    let mut j = DMatrix::zeros(k, k);
    for i in 1..k {
        let b = (i as f64).sqrt();
        j[(i, i - 1)] = b;
        j[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..k)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Symmetrize away eigen-solver noise.
    for i in 0..k / 2 {
        let x = 0.5 * (pairs[k - 1 - i].0 - pairs[i].0);
        let w = 0.5 * (pairs[k - 1 - i].1 + pairs[i].1);
        pairs[i] = (-x, w);
        pairs[k - 1 - i] = (x, w);
    }
    if k % 2 == 1 {
        pairs[k / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    (
        pairs.iter().map(|p| p.0).collect(),
        pairs.iter().map(|p| p.1 / total).collect(),
    )
}

/// Tensor rule in `d` dimensions: `(node, weight)` pairs.
pub fn gauss_hermite_tensor(k: usize, d: usize) -> Vec<(Vec<f64>, f64)> {
    let (x, w) = gauss_hermite(k);
    let mut out = vec![(Vec::new(), 1.0)];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|(p, pw)| {
                x.iter().zip(&w).map(move |(xi, wi)| {
                    let mut q = p.clone();
                    q.push(*xi);
                    (q, pw * wi)
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_moments_are_exact() {
        let (x, w) = gauss_hermite(11);
        // E ξ^{2m} = (2m - 1)!!, exact up to degree 21.
        let mut dfact = 1.0;
        for m in 0..=10 {
            if m > 0 {
                dfact *= (2 * m - 1) as f64;
            }
            let even: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(2 * m)).sum();
            let odd: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(2 * m + 1)).sum();
            assert!(
                (even - dfact).abs() <= 1e-10 * dfact,
                "m={m}: {even} vs {dfact}"
            );
            assert!(odd.abs() < 1e-9 * dfact.max(1.0));
        }
    }
}
