use nalgebra::DMatrix;

use super::FitError;

// Smallest/largest singular value of the column-normalized Jacobian below
// which the parameters count as degenerate.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Uncertainties {
    pub sigmas: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// Residual variance factor s² = weighted SSE/(N − k).
    pub s2: f64,
}

/// Covariance s²·(JᵀWJ)⁻¹ of a weighted least-squares estimate.
///
/// `jacobian` is ∂model/∂θ at the optimum and `residuals` are model − data.
/// A (near) rank-deficient Jacobian is reported with the names of the
/// parameters that span its null direction.
pub fn estimate_uncertainties(
    jacobian: &DMatrix<f64>,
    residuals: &[f64],
    weights: &[f64],
    names: &[String],
) -> Result<Uncertainties, FitError> {
    let (n, k) = jacobian.shape();
    if residuals.len() != n || weights.len() != n || names.len() != k {
        return Err(FitError::Setup(format!(
            "Jacobian is {n}x{k} but got {} residuals, {} weights, {} names",
            residuals.len(),
            weights.len(),
            names.len()
        )));
    }
    if n <= k {
        return Err(FitError::InsufficientData { points: n, params: k });
    }
    let mut b = jacobian.clone();
    for i in 0..n {
        let s = weights[i].sqrt();
        for j in 0..k {
            b[(i, j)] *= s;
        }
    }
    let norms: Vec<f64> = (0..k).map(|j| b.column(j).norm()).collect();
    if let Some(j) = norms.iter().position(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(FitError::RankDeficient(vec![names[j].clone()]));
    }
    for (j, c) in norms.iter().enumerate() {
        b.column_mut(j).unscale_mut(*c);
    }

    let svd = b.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let sv = &svd.singular_values;
    let (i_min, s_min) = sv.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let s_max = sv.max();
    if !(s_min > RANK_TOLERANCE * s_max) {
        let null = v_t.row(i_min);
        let peak = null.amax();
        let involved = (0..k).filter(|&j| null[j].abs() >= 0.1 * peak).map(|j| names[j].clone()).collect();
        return Err(FitError::RankDeficient(involved));
    }

    let sse: f64 = residuals.iter().zip(weights).map(|(r, w)| w * r * r).sum();
    let s2 = sse / (n - k) as f64;
    let mut cov = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut acc = 0.0;
            for (l, s) in sv.iter().enumerate() {
                acc += v_t[(l, i)] * v_t[(l, j)] / (s * s);
            }
            cov[(i, j)] = s2 * acc / (norms[i] * norms[j]);
        }
    }
    let cov = (&cov + cov.transpose()) * 0.5;
    let sigmas = (0..k).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    Ok(Uncertainties {
        sigmas,
        covariance: cov,
        s2,
    })
}
