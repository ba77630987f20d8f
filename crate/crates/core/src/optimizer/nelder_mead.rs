//! Nelder–Mead simplex minimization inside a box. Trial points are projected
//! onto the box; a run that ends on a face is restarted once from its best
//! point with a smaller simplex.

use alloc::vec::Vec;

use crate::math::abs;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadSettings {
    pub max_evals: usize,
    /// Absolute spread of the simplex values at convergence.
    pub f_tol: f64,
    /// Simplex size at convergence, as a fraction of each box width.
    pub x_tol: f64,
    /// Initial simplex edge as a fraction of each box width.
    pub initial_step: f64,
    /// Edge factor applied when restarting from a point on the boundary.
    pub restart_shrink: f64,
}

impl Default for NelderMeadSettings {
    fn default() -> Self {
        NelderMeadSettings {
            max_evals: 2000,
            f_tol: 1e-12,
            x_tol: 1e-9,
            initial_step: 0.1,
            restart_shrink: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
    pub restarted: bool,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        if *v < lo {
            *v = lo;
        } else if *v > hi {
            *v = hi;
        }
    }
}

fn on_boundary(x: &[f64], lower: &[f64], upper: &[f64]) -> bool {
    x.iter().zip(lower).zip(upper).any(|((&v, &lo), &hi)| {
        let w = (hi - lo).max(f64::MIN_POSITIVE);
        (v - lo) <= 1e-7 * w || (hi - v) <= 1e-7 * w
    })
}

/// Minimizes `f` over `lower ≤ x ≤ upper` from `x0`. Non-finite function
/// values are treated as `+∞`.
pub fn minimize<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    settings: &NelderMeadSettings,
) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let mut first = run(
        &mut f,
        x0,
        lower,
        upper,
        settings,
        settings.initial_step,
        settings.max_evals,
    );
    if first.converged && on_boundary(&first.x, lower, upper) && first.evals < settings.max_evals {
        let budget = settings.max_evals - first.evals;
        let step = settings.initial_step * settings.restart_shrink;
        let second = run(
            &mut f,
            &first.x.clone(),
            lower,
            upper,
            settings,
            step,
            budget,
        );
        first.evals += second.evals;
        first.restarted = true;
        if second.f <= first.f {
            first.x = second.x;
            first.f = second.f;
        }
        first.converged = second.converged;
    }
    first
}

fn run<F>(
    f: &mut F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    settings: &NelderMeadSettings,
    step: f64,
    budget: usize,
) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut start = x0.to_vec();
    project(&mut start, lower, upper);
    if n == 0 {
        let v = eval(&start, &mut evals);
        return NelderMeadResult {
            x: start,
            f: v,
            evals,
            converged: true,
            restarted: false,
        };
    }
    let width: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| u - l).collect();

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(&start, &mut evals);
    simplex.push((start.clone(), f0));
    for i in 0..n {
        let mut v = start.clone();
        let h = step * width[i];
        v[i] = if v[i] + h <= upper[i] {
            v[i] + h
        } else {
            v[i] - h
        };
        project(&mut v, lower, upper);
        let fv = eval(&v, &mut evals);
        simplex.push((v, fv));
    }

    let mut converged = false;
    while evals < budget {
        // stable sort keeps the tie-break deterministic
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(core::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = abs(worst - best);
        let size = simplex[1..]
            .iter()
            .map(|(v, _)| {
                v.iter()
                    .zip(&simplex[0].0)
                    .zip(&width)
                    .map(|((a, b), w)| if *w > 0.0 { abs(a - b) / w } else { 0.0 })
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if (spread <= settings.f_tol && size <= settings.x_tol.max(1e-3)) || size <= settings.x_tol
        {
            converged = true;
            break;
        }

        let mut centroid = alloc::vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            project(&mut p, lower, upper);
            p
        };
        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let x = along(0.5);
            let v = eval(&x, &mut evals);
            (x, v)
        } else {
            let x = along(-0.5);
            let v = eval(&x, &mut evals);
            (x, v)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        // shrink towards the best vertex
        let best_x = simplex[0].0.clone();
        for k in 1..=n {
            let mut p: Vec<f64> = simplex[k]
                .0
                .iter()
                .zip(&best_x)
                .map(|(x, b)| b + 0.5 * (x - b))
                .collect();
            project(&mut p, lower, upper);
            let v = eval(&p, &mut evals);
            simplex[k] = (p, v);
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(core::cmp::Ordering::Equal));
    let (x, fx) = simplex.swap_remove(0);
    NelderMeadResult {
        x,
        f: fx,
        evals,
        converged,
        restarted: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_quadratic() {
        let r = minimize(
            |x| (x[0] - 0.3).powi(2) - 2.0,
            &[0.9],
            &[-1.0],
            &[2.0],
            &NelderMeadSettings {
                x_tol: 1e-12,
                f_tol: 0.0,
                ..NelderMeadSettings::default()
            },
        );
        assert!(r.converged);
        assert!((r.x[0] - 0.3).abs() < 1e-8);
        assert!((r.f + 2.0).abs() < 1e-15);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = minimize(
            f,
            &[-1.2, 1.0],
            &[-5.0, -5.0],
            &[5.0, 5.0],
            &NelderMeadSettings {
                max_evals: 5000,
                ..NelderMeadSettings::default()
            },
        );
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn constrained_minimum_on_face() {
        let r = minimize(
            |x| (x[0] - 3.0).powi(2) + (x[1] + 0.5).powi(2),
            &[0.0, 0.0],
            &[-1.0, -1.0],
            &[1.0, 1.0],
            &NelderMeadSettings::default(),
        );
        assert!((r.x[0] - 1.0).abs() < 1e-7);
        assert!((r.x[1] + 0.5).abs() < 1e-6);
        assert!(r.restarted);
    }

    #[test]
    fn non_finite_values_are_avoided() {
        let r = minimize(
            |x| {
                if x[0] < 0.0 {
                    f64::NAN
                } else {
                    (x[0] - 0.5).powi(2)
                }
            },
            &[0.2],
            &[-1.0],
            &[1.0],
            &NelderMeadSettings::default(),
        );
        assert!((r.x[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn budget_is_respected() {
        let mut calls = 0;
        let r = minimize(
            |x| {
                calls += 1;
                x[0].sin() + x[1].cos()
            },
            &[0.0, 0.0],
            &[-10.0, -10.0],
            &[10.0, 10.0],
            &NelderMeadSettings {
                max_evals: 15,
                ..NelderMeadSettings::default()
            },
        );
        assert!(r.evals <= 15 + 3);
        assert_eq!(r.evals, calls);
    }
}
