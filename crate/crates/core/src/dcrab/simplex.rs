//! Derivative-free Nelder-Mead simplex search.

/// Outcome of a [`nelder_mead`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    /// Objective value at `x` (maximized).
    pub value: f64,
    pub evaluations: usize,
    /// Stopped on the spread criterion rather than the evaluation budget.
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Maximizes `objective` starting from `x0` with an axis-aligned initial
/// simplex of edge `scale`. Stops when the spread of objective values over
/// the simplex drops below `tol` or after `max_evals` evaluations.
/// Non-finite objective values are treated as worst possible.
pub fn nelder_mead<F>(
    mut objective: F,
    x0: &[f64],
    scale: f64,
    max_evals: usize,
    tol: f64,
) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    let mut evals = 0usize;
    // internally minimize the negated objective
    let mut cost = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = objective(x);
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let c0 = cost(x0, &mut evals);
    simplex.push((x0.to_vec(), c0));
    for i in 0..dim {
        if evals >= max_evals {
            break;
        }
        let mut x = x0.to_vec();
        x[i] += scale;
        let c = cost(&x, &mut evals);
        simplex.push((x, c));
    }
    let finish = |simplex: &mut Vec<(Vec<f64>, f64)>, evals: usize, converged: bool| {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, c) = simplex.swap_remove(0);
        SimplexResult {
            x,
            value: -c,
            evaluations: evals,
            converged,
        }
    };
    if simplex.len() < dim + 1 || dim == 0 {
        return finish(&mut simplex, evals, dim == 0);
    }

    let mut centroid = vec![0.0; dim];
    let along = |c: &[f64], x: &[f64], coef: f64| -> Vec<f64> {
        c.iter()
            .zip(x)
            .map(|(ci, xi)| ci + coef * (xi - ci))
            .collect()
    };

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if (worst - best).abs() < tol {
            return finish(&mut simplex, evals, true);
        }
        if evals >= max_evals {
            return finish(&mut simplex, evals, false);
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for (x, _) in &simplex[..dim] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / dim as f64;
            }
        }
        let second_worst = simplex[dim - 1].1;

        let xr = along(&centroid, &simplex[dim].0, -REFLECT);
        let fr = cost(&xr, &mut evals);
        if fr < best {
            if evals >= max_evals {
                simplex[dim] = (xr, fr);
                continue;
            }
            let xe = along(&centroid, &xr, EXPAND);
            let fe = cost(&xe, &mut evals);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < second_worst {
            simplex[dim] = (xr, fr);
            continue;
        }
        if evals >= max_evals {
            if fr < worst {
                simplex[dim] = (xr, fr);
            }
            continue;
        }
        let outside = fr < worst;
        let target = if outside {
            xr.clone()
        } else {
            simplex[dim].0.clone()
        };
        let xc = along(&centroid, &target, CONTRACT);
        let fc = cost(&xc, &mut evals);
        if (outside && fc <= fr) || (!outside && fc < worst) {
            simplex[dim] = (xc, fc);
            continue;
        }
        if outside {
            simplex[dim] = (xr, fr);
        }
        // shrink toward the best vertex
        let x_best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            if evals >= max_evals {
                break;
            }
            let x = along(&x_best, &vertex.0, SHRINK);
            let c = cost(&x, &mut evals);
            *vertex = (x, c);
        }
    }
}
