use nalgebra::{DMatrix, DVector};

use super::bounds::Transform;
use super::uncertainty::estimate_uncertainties;
use super::{FitError, FitOptions, FitProblem, FitResult, ParameterEstimate, Termination};

const LAMBDA_START: f64 = 1e-3;
const LAMBDA_MIN: f64 = 1e-12;
const LAMBDA_MAX: f64 = 1e32;

fn eval<F>(model: &F, x: &[f64], out: &mut [f64]) -> Result<(), FitError>
where
    F: Fn(&[f64], &mut [f64]) -> Result<(), FitError>,
{
    model(x, out)?;
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(FitError::Model(format!("non-finite model value at point {i}")));
    }
    Ok(())
}

/// Central-difference Jacobian ∂model/∂x (rows: points, columns: parameters).
///
/// The step is max(1e−6·|x|, 1e−9); next to a bound the difference turns
/// one-sided so the model is never evaluated outside its domain.
pub fn numeric_jacobian<F>(model: &F, x: &[f64], n_points: usize, transforms: &[Transform]) -> Result<DMatrix<f64>, FitError>
where
    F: Fn(&[f64], &mut [f64]) -> Result<(), FitError>,
{
    jacobian_scaled(model, x, n_points, transforms, 1.0)
}

pub(crate) fn jacobian_scaled<F>(
    model: &F,
    x: &[f64],
    n_points: usize,
    transforms: &[Transform],
    step_scale: f64,
) -> Result<DMatrix<f64>, FitError>
where
    F: Fn(&[f64], &mut [f64]) -> Result<(), FitError>,
{
    let k = x.len();
    let mut jac = DMatrix::zeros(n_points, k);
    let mut xp = x.to_vec();
    let mut plus = vec![0.0; n_points];
    let mut minus = vec![0.0; n_points];
    let mut centre: Option<Vec<f64>> = None;
    for j in 0..k {
        let h = step_scale * (1e-6 * x[j].abs()).max(1e-9);
        let t = transforms.get(j).copied().unwrap_or(Transform::Free);
        let (lo_ok, hi_ok) = (x[j] - h >= t.lower(), x[j] + h <= t.upper());
        let (a, b) = match (lo_ok, hi_ok) {
            (true, true) => (x[j] - h, x[j] + h),
            (false, _) => (x[j], x[j] + h),
            (_, false) => (x[j] - h, x[j]),
        };
        xp[j] = b;
        eval(model, &xp, &mut plus)?;
        if a == x[j] {
            if centre.is_none() {
                let mut c = vec![0.0; n_points];
                eval(model, x, &mut c)?;
                centre = Some(c);
            }
            minus.copy_from_slice(centre.as_ref().unwrap());
        } else {
            xp[j] = a;
            eval(model, &xp, &mut minus)?;
        }
        xp[j] = x[j];
        let span = b - a;
        for i in 0..n_points {
            jac[(i, j)] = (plus[i] - minus[i]) / span;
        }
    }
    Ok(jac)
}

/// Damped Gauss–Newton (Levenberg–Marquardt) minimization of the weighted
/// sum of squares Σ wᵢ (model(x)ᵢ − yᵢ)².
///
/// `model` receives the free parameters in the order of `problem.free` and
/// fills one prediction per data point. Running out of iterations yields a
/// result with `converged = false`.
pub fn levenberg_marquardt<F>(problem: &FitProblem, model: F, opts: &FitOptions) -> Result<FitResult, FitError>
where
    F: Fn(&[f64], &mut [f64]) -> Result<(), FitError>,
{
    problem.validate()?;
    let n = problem.data.len();
    let k = problem.free.len();
    if n <= k {
        return Err(FitError::InsufficientData { points: n, params: k });
    }
    let names = problem.names();
    let weights = problem.resolved_weights()?;
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(FitError::Setup(format!("weights must be finite and >= 0, got {w}")));
    }
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let y = &problem.data;
    let transforms: Vec<Transform> = problem.free.iter().map(Transform::of).collect();

    let external = |u: &DVector<f64>| -> Vec<f64> { u.iter().zip(&transforms).map(|(&u, t)| t.to_external(u)).collect() };
    let residuals = |m: &[f64]| -> DVector<f64> { DVector::from_iterator(n, (0..n).map(|i| sqrt_w[i] * (m[i] - y[i]))) };

    let mut u = DVector::from_iterator(k, problem.free.iter().zip(&transforms).map(|(p, t)| t.to_internal(p.initial)));
    let mut x = external(&u);
    let mut m = vec![0.0; n];
    eval(&model, &x, &mut m).map_err(|e| FitError::InvalidInitialPoint(e.to_string()))?;
    let mut r = residuals(&m);
    let mut sse = r.norm_squared();
    if !sse.is_finite() {
        return Err(FitError::InvalidInitialPoint("weighted SSE is not finite".into()));
    }

    let mut history = vec![sse];
    let mut lambda = LAMBDA_START;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    let mut trial_m = vec![0.0; n];

    'outer: while iterations < opts.max_iter {
        iterations += 1;
        let jx = numeric_jacobian(&model, &x, n, &transforms)?;
        let mut ju = jx;
        for j in 0..k {
            let d = transforms[j].derivative(u[j]);
            for i in 0..n {
                ju[(i, j)] *= sqrt_w[i] * d;
            }
        }
        let a = ju.tr_mul(&ju);
        let g = ju.tr_mul(&r);
        if iterations == 1 {
            if let Some(j) = (0..k).find(|&j| !(a[(j, j)] > 0.0) || !a[(j, j)].is_finite()) {
                return Err(FitError::SingularNormalEquations(names[j].clone()));
            }
        }
        let scaled_grad = if sse == 0.0 {
            0.0
        } else {
            (0..k)
                .map(|j| if a[(j, j)] > 0.0 { g[j].abs() / (a[(j, j)] * sse).sqrt() } else { 0.0 })
                .fold(0.0, f64::max)
        };
        if scaled_grad < opts.tol_grad {
            termination = Termination::Gradient;
            break;
        }

        loop {
            let mut damped = a.clone();
            for j in 0..k {
                damped[(j, j)] += lambda * a[(j, j)].max(f64::MIN_POSITIVE);
            }
            let step = match damped.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= 10.0;
                    if lambda > LAMBDA_MAX {
                        break 'outer;
                    }
                    continue;
                }
            };
            let u_new = &u + &step;
            let x_new = external(&u_new);
            let step_norm = x_new.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let rel_step = step_norm / (x_norm + opts.tol_step);
            let trial = eval(&model, &x_new, &mut trial_m).ok().map(|_| residuals(&trial_m));
            match trial {
                Some(r_new) if r_new.norm_squared() <= sse => {
                    u = u_new;
                    x = x_new;
                    r = r_new;
                    sse = r.norm_squared();
                    history.push(sse);
                    lambda = (lambda / 10.0).max(LAMBDA_MIN);
                    if rel_step < opts.tol_step {
                        termination = Termination::Step;
                        break 'outer;
                    }
                    break;
                }
                _ => {
                    if rel_step < opts.tol_step {
                        termination = Termination::Step;
                        break 'outer;
                    }
                    lambda *= 10.0;
                    if lambda > LAMBDA_MAX {
                        break 'outer;
                    }
                }
            }
        }
    }

    let jx = numeric_jacobian(&model, &x, n, &transforms)?;
    eval(&model, &x, &mut m)?;
    let raw: Vec<f64> = m.iter().zip(y).map(|(m, y)| m - y).collect();
    let unc = estimate_uncertainties(&jx, &raw, &weights, &names)?;

    Ok(FitResult {
        model: problem.model,
        parameters: names
            .iter()
            .zip(&x)
            .zip(&unc.sigmas)
            .map(|((name, &value), &sigma)| ParameterEstimate {
                name: name.clone(),
                value,
                sigma,
            })
            .collect(),
        fixed: problem.fixed.clone(),
        covariance: (0..k).map(|i| (0..k).map(|j| unc.covariance[(i, j)]).collect()).collect(),
        residual_norm: sse,
        iterations,
        converged: termination != Termination::MaxIterations,
        termination,
        points: n,
        sse_history: history,
    })
}
