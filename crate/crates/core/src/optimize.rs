//! Bound-constrained derivative-free local minimization.
//!
//! The solver is a Nelder-Mead simplex search with dimension-adaptive
//! coefficients (Gao & Han, 2012). Every trial point is projected onto the
//! box before evaluation, so all evaluated and returned points are feasible.
//! A run ends when the objective spread over the simplex drops below
//! `ftol_abs`; the search then restarts from the best point with a fresh
//! simplex, and stops once a restart improves the best value by less than
//! `ftol_abs`.

use crate::error::{Result, SwrError};

/// Default absolute tolerance on objective values.
pub const DEFAULT_FTOL_ABS: f64 = 1e-8;

/// Default evaluation budget per problem dimension.
pub const DEFAULT_EVALS_PER_DIM: usize = 5000;

/// A minimization problem over a box `lower <= x <= upper`.
pub struct OptProblem<F>
where
    F: Fn(&[f64]) -> f64,
{
    dim: usize,
    objective: F,
    lower: Vec<f64>,
    upper: Vec<f64>,
    ftol_abs: f64,
    max_evals: usize,
}

impl<F> OptProblem<F>
where
    F: Fn(&[f64]) -> f64,
{
    /// A problem with all coordinates bounded below by zero and unbounded above.
    pub fn new(dim: usize, objective: F) -> Self {
        Self {
            dim,
            objective,
            lower: vec![0.0; dim],
            upper: vec![f64::INFINITY; dim],
            ftol_abs: DEFAULT_FTOL_ABS,
            max_evals: DEFAULT_EVALS_PER_DIM * dim.max(1),
        }
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn with_ftol_abs(mut self, ftol_abs: f64) -> Self {
        self.ftol_abs = ftol_abs;
        self
    }

    pub fn with_max_evals(mut self, max_evals: usize) -> Self {
        self.max_evals = max_evals;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(SwrError::InvalidParameter("problem dimension must be positive".into()));
        }
        if self.lower.len() != self.dim || self.upper.len() != self.dim {
            return Err(SwrError::LengthMismatch { left: self.dim, right: self.lower.len().min(self.upper.len()) });
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| l.is_nan() || u.is_nan() || l > u) {
            return Err(SwrError::InvalidParameter("lower bounds must not exceed upper bounds".into()));
        }
        if !(self.ftol_abs > 0.0) {
            return Err(SwrError::InvalidParameter("ftol_abs must be positive".into()));
        }
        if self.max_evals == 0 {
            return Err(SwrError::InvalidParameter("evaluation budget must be positive".into()));
        }
        Ok(())
    }
}

/// Best-so-far objective value after a given number of evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub evals: usize,
    pub best: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub n_evals: usize,
    pub converged: bool,
    /// One entry per improvement of the best value.
    pub trace: Vec<TracePoint>,
}

struct Evaluator<'p, F: Fn(&[f64]) -> f64> {
    problem: &'p OptProblem<F>,
    evals: usize,
    best_x: Vec<f64>,
    best_f: f64,
    trace: Vec<TracePoint>,
}

impl<'p, F: Fn(&[f64]) -> f64> Evaluator<'p, F> {
    fn clip(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.problem.lower).zip(&self.problem.upper) {
            *v = v.clamp(*l, *u);
        }
    }

    fn budget_left(&self) -> bool {
        self.evals < self.problem.max_evals
    }

    /// Evaluates a clipped copy of `x`. Non-finite values are treated as +inf.
    fn eval(&mut self, mut x: Vec<f64>) -> (Vec<f64>, f64) {
        self.clip(&mut x);
        let raw = (self.problem.objective)(&x);
        self.evals += 1;
        let f = if raw.is_nan() { f64::INFINITY } else { raw };
        if f < self.best_f {
            self.best_f = f;
            self.best_x.clone_from(&x);
            self.trace.push(TracePoint { evals: self.evals, best: f });
        }
        (x, f)
    }
}

struct Coefficients {
    reflect: f64,
    expand: f64,
    contract: f64,
    shrink: f64,
}

impl Coefficients {
    fn for_dim(n: usize) -> Self {
        if n < 2 {
            return Self { reflect: 1.0, expand: 2.0, contract: 0.5, shrink: 0.5 };
        }
        let n = n as f64;
        Self { reflect: 1.0, expand: 1.0 + 2.0 / n, contract: 0.75 - 1.0 / (2.0 * n), shrink: 1.0 - 1.0 / n }
    }
}

fn initial_step(x: f64) -> f64 {
    (0.2 * x.abs()).max(0.1)
}

/// Minimizes `problem` from `x0` (clipped into the box first).
pub fn minimize<F>(problem: &OptProblem<F>, x0: &[f64]) -> Result<OptResult>
where
    F: Fn(&[f64]) -> f64,
{
    problem.validate()?;
    if x0.len() != problem.dim {
        return Err(SwrError::LengthMismatch { left: problem.dim, right: x0.len() });
    }

    let mut ev = Evaluator { problem, evals: 0, best_x: x0.to_vec(), best_f: f64::INFINITY, trace: Vec::new() };
    let (start, f0) = ev.eval(x0.to_vec());
    if !f0.is_finite() {
        return Err(SwrError::Optimizer(format!("objective is not finite at the start point {start:?}")));
    }

    let coef = Coefficients::for_dim(problem.dim);
    let mut converged = false;
    let mut previous_run_best = f64::INFINITY;
    let mut runs = 0usize;

    while ev.budget_left() {
        run_simplex(&mut ev, &coef);
        runs += 1;
        let improvement = previous_run_best - ev.best_f;
        if runs > 1 && improvement < problem.ftol_abs {
            converged = true;
            break;
        }
        previous_run_best = ev.best_f;
    }

    Ok(OptResult { x: ev.best_x, f: ev.best_f, n_evals: ev.evals, converged, trace: ev.trace })
}

/// One Nelder-Mead run started from the evaluator's current best point.
fn run_simplex<F: Fn(&[f64]) -> f64>(ev: &mut Evaluator<'_, F>, coef: &Coefficients) {
    let n = ev.problem.dim;
    let ftol = ev.problem.ftol_abs;
    let origin = ev.best_x.clone();
    let origin_f = ev.best_f;

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((origin.clone(), origin_f));
    for i in 0..n {
        if !ev.budget_left() {
            return;
        }
        let step = initial_step(origin[i]);
        let mut v = origin.clone();
        v[i] = if origin[i] + step <= ev.problem.upper[i] { origin[i] + step } else { origin[i] - step };
        simplex.push(ev.eval(v));
    }

    let mut centroid = vec![0.0; n];
    while ev.budget_left() {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let f_best = simplex[0].1;
        let f_worst = simplex[n].1;
        if f_worst - f_best <= ftol {
            return;
        }
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let scale = simplex[0].0.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if diameter <= 1e-13 * scale {
            return;
        }

        centroid.fill(0.0);
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let worst = simplex[n].0.clone();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst).map(|(c, w)| c + t * (c - w)).collect() };

        let (xr, fr) = ev.eval(along(coef.reflect));
        if !ev.budget_left() {
            return;
        }
        if fr < f_best {
            let (xe, fe) = ev.eval(along(coef.reflect * coef.expand));
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) =
            if fr < f_worst { ev.eval(along(coef.reflect * coef.contract)) } else { ev.eval(along(-coef.contract)) };
        if fc < fr.min(f_worst) {
            simplex[n] = (xc, fc);
            continue;
        }

        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            if !ev.budget_left() {
                return;
            }
            let shrunk = best.iter().zip(&vertex.0).map(|(b, v)| b + coef.shrink * (v - b)).collect();
            *vertex = ev.eval(shrunk);
        }
    }
}
