//! Derivative-free Nelder-Mead minimizer.
//!
//! Constraints are handled by the objective returning `f64::INFINITY` outside
//! the feasible region, so the starting point and the initial simplex must be
//! feasible.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when the spread of objective values across the simplex falls
    /// below `tol * max(|f_best|, tol)`.
    pub tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` starting from `start` with initial simplex offsets `steps`.
///
/// The result is never worse than `f(start)`: the start is a simplex vertex
/// and the best vertex is only ever replaced by a strictly better point.
pub fn minimize<F>(mut f: F, start: &[f64], steps: &[f64], opts: NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let start_value = eval(start, &mut evals);
    if dim == 0 {
        return Minimum {
            x: Vec::new(),
            value: start_value,
            evals,
        };
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((start.to_vec(), start_value));
    for i in 0..dim {
        let mut x = start.to_vec();
        x[i] += steps[i];
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    loop {
        // Stable sort keeps earlier vertices first on ties, so runs are
        // reproducible and the start wins ties against its neighbours.
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        let scale = best.abs().max(opts.tol);
        if (worst - best).abs() <= opts.tol * scale || evals >= opts.max_evals {
            break;
        }

        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / dim as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = along(REFLECT);
        let fr = eval(&reflected, &mut evals);
        if fr < simplex[0].1 {
            let expanded = along(EXPAND);
            let fe = eval(&expanded, &mut evals);
            simplex[dim] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
            continue;
        }

        let (contracted, fc) = if fr < simplex[dim].1 {
            let x = along(CONTRACT);
            let v = eval(&x, &mut evals);
            (x, v)
        } else {
            let x = along(-CONTRACT);
            let v = eval(&x, &mut evals);
            (x, v)
        };
        if fc < simplex[dim].1.min(fr) {
            simplex[dim] = (contracted, fc);
            continue;
        }

        let anchor = simplex[0].0.clone();
        for (x, v) in simplex.iter_mut().skip(1) {
            for (xi, ai) in x.iter_mut().zip(&anchor) {
                *xi = ai + SHRINK * (*xi - ai);
            }
            *v = eval(x, &mut evals);
        }
        let spread = simplex
            .iter()
            .skip(1)
            .flat_map(|(x, _)| x.iter().zip(&anchor).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if spread < 1e-12 {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            break;
        }
    }

    let (x, value) = simplex.swap_remove(0);
    Minimum { x, value, evals }
}
