//! Nelder–Mead pre-search followed by BFGS with central-difference gradients.

use nalgebra::{DMatrix, DVector};

pub(crate) const GRAD_STEP: f64 = 1e-6;
pub(crate) const GRAD_TOL: f64 = 1e-5;

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
}

fn eval(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

pub(crate) fn gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + GRAD_STEP;
        let up = eval(f, &probe);
        probe[i] = x[i] - GRAD_STEP;
        let down = eval(f, &probe);
        probe[i] = x[i];
        g[i] = (up - down) / (2.0 * GRAD_STEP);
    }
    g
}

fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], max_iter: usize) -> (Vec<f64>, f64, usize) {
    let d = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..d {
        let mut p = x0.to_vec();
        p[i] += 0.5;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(f, p)).collect();
    let mut iter = 0;
    while iter < max_iter {
        iter += 1;
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let (best, worst) = (vals[0], vals[d]);
        if worst.is_finite() && worst - best <= 1e-10 * (best.abs() + 1e-10) {
            break;
        }
        let centroid: Vec<f64> = (0..d).map(|j| pts[..d].iter().map(|p| p[j]).sum::<f64>() / d as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..d).map(|j| centroid[j] + t * (pts[d][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = eval(f, &xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = eval(f, &xe);
            if fe < fr {
                (pts[d], vals[d]) = (xe, fe);
            } else {
                (pts[d], vals[d]) = (xr, fr);
            }
        } else if fr < vals[d - 1] {
            (pts[d], vals[d]) = (xr, fr);
        } else {
            let (xc, fc) = if fr < vals[d] {
                let xc = along(-0.5);
                let fc = eval(f, &xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(f, &xc);
                (xc, fc)
            };
            if fc < vals[d].min(fr) {
                (pts[d], vals[d]) = (xc, fc);
            } else {
                for i in 1..=d {
                    let p: Vec<f64> = (0..d).map(|j| pts[0][j] + 0.5 * (pts[i][j] - pts[0][j])).collect();
                    vals[i] = eval(f, &p);
                    pts[i] = p;
                }
            }
        }
    }
    let best = (0..=d).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    (pts[best].clone(), vals[best], iter)
}

/// Newton step from a central-difference Hessian of the gradient.
fn newton_step(f: &dyn Fn(&[f64]) -> f64, x: &DVector<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let d = x.len();
    let h = 1e-4;
    let mut hess = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut up = x.clone();
        let mut down = x.clone();
        up[j] += h;
        down[j] -= h;
        let col = (gradient(f, up.as_slice()) - gradient(f, down.as_slice())) / (2.0 * h);
        hess.set_column(j, &col);
    }
    let hess = (&hess + hess.transpose()) * 0.5;
    hess.cholesky().map(|c| x - c.solve(g))
}

pub(crate) fn minimize(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], max_iter: usize) -> Outcome {
    let d = x0.len();
    let (start, _, nm_iter) = nelder_mead(f, x0, (200 * d).min(max_iter / 2));
    let mut x = DVector::from_vec(start);
    let mut fx = eval(f, x.as_slice());
    let mut g = gradient(f, x.as_slice());
    let mut h_inv = DMatrix::<f64>::identity(d, d);
    let mut fresh = true;
    let mut iter = nm_iter;
    let mut history = vec![fx];
    while g.norm() >= GRAD_TOL && iter < max_iter && fx.is_finite() {
        iter += 1;
        let stalled = history.len() > 20 && history[history.len() - 21] - fx <= 1e-12 * fx.abs();
        let step = if stalled { None } else { bfgs_step(f, &x, fx, &g, &h_inv) };
        let Some((x_new, f_new)) = step else {
            if !fresh && !stalled {
                h_inv = DMatrix::identity(d, d);
                fresh = true;
                continue;
            }
            // Stalled: polish with Newton steps while they shrink the gradient.
            match newton_step(f, &x, &g) {
                Some(xn) => {
                    let gn = gradient(f, xn.as_slice());
                    let fnew = eval(f, xn.as_slice());
                    if gn.norm() < g.norm() && fnew <= fx + 1e-9 * fx.abs() {
                        x = xn;
                        fx = fnew;
                        g = gn;
                        h_inv = DMatrix::identity(d, d);
                        fresh = true;
                        history.clear();
                        history.push(fx);
                        continue;
                    }
                    break;
                }
                None => break,
            }
        };
        let g_new = gradient(f, x_new.as_slice());
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                h_inv = DMatrix::identity(d, d) * (sy / y.dot(&y));
            }
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(d, d);
            let left = &i - &s * y.transpose() * rho;
            let right = &i - &y * s.transpose() * rho;
            h_inv = &left * &h_inv * &right + &s * s.transpose() * rho;
            fresh = false;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        history.push(fx);
    }
    let grad_norm = g.norm();
    Outcome {
        x: x.as_slice().to_vec(),
        value: fx,
        converged: grad_norm < GRAD_TOL && fx.is_finite(),
        iterations: iter,
        grad_norm,
    }
}

/// Armijo backtracking along the quasi-Newton direction (steepest descent if
/// that is not a descent direction).
fn bfgs_step(
    f: &dyn Fn(&[f64]) -> f64,
    x: &DVector<f64>,
    fx: f64,
    g: &DVector<f64>,
    h_inv: &DMatrix<f64>,
) -> Option<(DVector<f64>, f64)> {
    let mut dir = -(h_inv * g);
    let mut slope = g.dot(&dir);
    if !(slope < 0.0) {
        dir = -g.clone();
        slope = g.dot(&dir);
    }
    let mut t = 1.0;
    for _ in 0..60 {
        let cand = x + &dir * t;
        let fc = eval(f, cand.as_slice());
        if fc <= fx + 1e-4 * t * slope {
            return Some((cand, fc));
        }
        t *= 0.5;
    }
    None
}
