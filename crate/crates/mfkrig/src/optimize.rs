//! Box-constrained minimization backends for the hyperparameter objectives.
//!
//! Three methods: a projected quasi-Newton local search with
//! finite-difference gradients, and two hybrid global methods (genetic
//! algorithm, self-adaptive differential evolution) whose best member is
//! refined by the local search. Objectives signal infeasibility by
//! returning `f64::INFINITY`; every run is deterministic given the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    LocalGradient,
    HybridGa,
    HybridDe,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::HybridDe, Method::HybridGa, Method::LocalGradient];

    pub fn name(&self) -> &'static str {
        match self {
            Method::LocalGradient => "BFGS",
            Method::HybridGa => "HybridGA",
            Method::HybridDe => "HSADE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub method: Method,
    /// Population size for the global phase; 0 selects max(20, 10 * dim).
    pub population: usize,
    pub max_generations: usize,
    pub max_local_iters: usize,
    pub objective_tolerance: f64,
    pub seed: u64,
}

impl OptimizerSpec {
    pub fn new(method: Method, seed: u64) -> Self {
        OptimizerSpec {
            method,
            population: 0,
            max_generations: 100,
            max_local_iters: 200,
            objective_tolerance: 1e-6,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimResult {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub evaluations: u64,
    pub converged: bool,
    /// Best objective value after each global generation / local iteration.
    pub history: Vec<f64>,
}

const FD_STEP: f64 = 1e-6;
const STAGNANT_GENERATIONS: usize = 10;

struct Tracker<'a> {
    objective: &'a mut dyn FnMut(&[f64]) -> f64,
    evaluations: u64,
    best_x: Option<Vec<f64>>,
    best_f: f64,
}

impl<'a> Tracker<'a> {
    fn new(objective: &'a mut dyn FnMut(&[f64]) -> f64) -> Self {
        Tracker {
            objective,
            evaluations: 0,
            best_x: None,
            best_f: f64::INFINITY,
        }
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let f = (self.objective)(x);
        let f = if f.is_finite() { f } else { f64::INFINITY };
        if f < self.best_f {
            self.best_f = f;
            self.best_x = Some(x.to_vec());
        }
        f
    }
}

fn clamp(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

fn center(bounds: &[(f64, f64)]) -> Vec<f64> {
    bounds.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect()
}

fn gradient(tracker: &mut Tracker, x: &[f64], f0: f64, bounds: &[(f64, f64)]) -> Option<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let (lo, hi) = bounds[i];
        let xp = (x[i] + FD_STEP).min(hi);
        let xm = (x[i] - FD_STEP).max(lo);
        if xp <= xm {
            g[i] = 0.0;
            continue;
        }
        let mut p = x.to_vec();
        p[i] = xp;
        let fp = tracker.eval(&p);
        p[i] = xm;
        let fm = tracker.eval(&p);
        // fall back to a one-sided difference when a probe crosses into an
        // infeasible region, so steps along a feasibility boundary still work
        g[i] = if fp.is_finite() && fm.is_finite() {
            (fp - fm) / (xp - xm)
        } else if fp.is_finite() && xp > x[i] {
            (fp - f0) / (xp - x[i])
        } else if fm.is_finite() && xm < x[i] {
            (f0 - fm) / (x[i] - xm)
        } else {
            return None;
        };
    }
    Some(g)
}

/// Projected BFGS from `x0`. Returns (x, f, converged, history).
fn local_search(
    tracker: &mut Tracker,
    bounds: &[(f64, f64)],
    x0: Vec<f64>,
    max_iters: usize,
    tol: f64,
) -> (Vec<f64>, f64, bool, Vec<f64>) {
    let n = bounds.len();
    let mut x = x0;
    clamp(&mut x, bounds);
    let mut f = tracker.eval(&x);
    let mut history = vec![f];
    if !f.is_finite() {
        return (x, f, false, history);
    }

    // inverse Hessian approximation, row-major
    let mut h = vec![0.0; n * n];
    let reset = |h: &mut Vec<f64>| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
    };
    reset(&mut h);

    let mut g = match gradient(tracker, &x, f, bounds) {
        Some(g) => g,
        None => return (x, f, false, history),
    };
    let mut converged = false;
    let eps = 1e-12;

    for _ in 0..max_iters {
        // project the gradient at active bounds, then take d = -H g_proj
        let mut gp = g.clone();
        for i in 0..n {
            let (lo, hi) = bounds[i];
            if (x[i] <= lo + eps && gp[i] > 0.0) || (x[i] >= hi - eps && gp[i] < 0.0) {
                gp[i] = 0.0;
            }
        }
        let gnorm = gp.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm <= 1e-10 * (1.0 + f.abs()) {
            converged = true;
            break;
        }
        let mut d = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                d[i] -= h[i * n + j] * gp[j];
            }
        }
        // keep the direction a descent direction for the projected gradient
        let slope: f64 = d.iter().zip(&gp).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            reset(&mut h);
            for i in 0..n {
                d[i] = -gp[i];
            }
        }
        let slope: f64 = d.iter().zip(&gp).map(|(a, b)| a * b).sum();

        // backtracking Armijo line search with projection onto the box
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            clamp(&mut xn, bounds);
            let fn_ = tracker.eval(&xn);
            if fn_.is_finite() && fn_ <= f + 1e-4 * alpha * slope {
                accepted = Some((xn, fn_));
                break;
            }
            alpha *= 0.5;
        }
        let (xn, fn_) = match accepted {
            Some(a) => a,
            None => {
                converged = true; // no progress possible along this direction
                break;
            }
        };

        let gn = match gradient(tracker, &xn, fn_, bounds) {
            Some(g) => g,
            None => {
                x = xn;
                f = fn_;
                history.push(f);
                break;
            }
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        let ss = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let yy = yv.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy > 1e-12 * ss * yy && sy > 0.0 {
            // BFGS inverse update
            let rho = 1.0 / sy;
            let mut hy = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    hy[i] += h[i * n + j] * yv[j];
                }
            }
            let yhy: f64 = yv.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += (1.0 + rho * yhy) * rho * s[i] * s[j]
                        - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        } else {
            reset(&mut h);
        }

        let df = (f - fn_).abs();
        x = xn;
        f = fn_;
        g = gn;
        history.push(f);
        if df <= tol * (1.0 + f.abs()) {
            converged = true;
            break;
        }
    }
    (x, f, converged, history)
}

fn feasible_start(
    tracker: &mut Tracker,
    bounds: &[(f64, f64)],
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64)> {
    let c = center(bounds);
    let fc = tracker.eval(&c);
    if fc.is_finite() {
        return Ok((c, fc));
    }
    for _ in 0..64 {
        let x: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
        let f = tracker.eval(&x);
        if f.is_finite() {
            return Ok((x, f));
        }
    }
    Err(Error::AllInfeasible)
}

fn random_population(
    pop: usize,
    bounds: &[(f64, f64)],
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    (0..pop)
        .map(|_| bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect())
        .collect()
}

fn ga_phase(
    tracker: &mut Tracker,
    bounds: &[(f64, f64)],
    pop_size: usize,
    max_generations: usize,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, f64, Vec<f64>) {
    let n = bounds.len();
    let mut pop = random_population(pop_size, bounds, rng);
    let mut fit: Vec<f64> = pop.iter().map(|x| tracker.eval(x)).collect();
    let mut history = Vec::new();
    let mut stagnant = 0usize;
    let mut best_prev = f64::INFINITY;

    for _ in 0..max_generations {
        let best_idx = (0..pop_size).min_by(|&a, &b| fit[a].total_cmp(&fit[b])).unwrap();
        let mut next = vec![pop[best_idx].clone()]; // elitism
        while next.len() < pop_size {
            let tournament = |rng: &mut ChaCha8Rng| {
                let a = rng.gen_range(0..pop_size);
                let b = rng.gen_range(0..pop_size);
                if fit[a] <= fit[b] { a } else { b }
            };
            let p1 = tournament(rng);
            let p2 = tournament(rng);
            let mut child = vec![0.0; n];
            for i in 0..n {
                // blend crossover with extrapolation margin
                let u: f64 = rng.gen_range(-0.25..1.25);
                child[i] = pop[p1][i] + u * (pop[p2][i] - pop[p1][i]);
                if rng.gen_bool(0.15) {
                    let range = bounds[i].1 - bounds[i].0;
                    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                    let u2: f64 = rng.gen_range(0.0..1.0);
                    let gauss =
                        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                    child[i] += 0.1 * range * gauss;
                }
            }
            clamp(&mut child, bounds);
            next.push(child);
        }
        pop = next;
        fit = pop.iter().map(|x| tracker.eval(x)).collect();
        let gen_best = fit.iter().cloned().fold(f64::INFINITY, f64::min);
        history.push(gen_best);
        if gen_best.is_finite() && best_prev.is_finite()
            && (best_prev - gen_best) <= tol * (1.0 + gen_best.abs())
        {
            stagnant += 1;
            if stagnant >= STAGNANT_GENERATIONS {
                break;
            }
        } else {
            stagnant = 0;
        }
        best_prev = best_prev.min(gen_best);
    }
    let best_idx = (0..pop_size).min_by(|&a, &b| fit[a].total_cmp(&fit[b])).unwrap();
    (pop[best_idx].clone(), fit[best_idx], history)
}

fn de_phase(
    tracker: &mut Tracker,
    bounds: &[(f64, f64)],
    pop_size: usize,
    max_generations: usize,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, f64, Vec<f64>) {
    let n = bounds.len();
    let mut pop = random_population(pop_size, bounds, rng);
    let mut fit: Vec<f64> = pop.iter().map(|x| tracker.eval(x)).collect();
    // per-member self-adapted control parameters
    let mut fmut: Vec<f64> = (0..pop_size).map(|_| rng.gen_range(0.1..0.9)).collect();
    let mut cr: Vec<f64> = (0..pop_size).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut history = Vec::new();
    let mut stagnant = 0usize;
    let mut best_prev = f64::INFINITY;

    for _ in 0..max_generations {
        for i in 0..pop_size {
            // re-sample control parameters with probability 0.1; keep them
            // only if the trial wins
            let f_i = if rng.gen_bool(0.1) { rng.gen_range(0.1..0.9) } else { fmut[i] };
            let cr_i = if rng.gen_bool(0.1) { rng.gen_range(0.0..1.0) } else { cr[i] };
            let mut picks = [0usize; 3];
            for slot in 0..3 {
                loop {
                    let c = rng.gen_range(0..pop_size);
                    if c != i && !picks[..slot].contains(&c) {
                        picks[slot] = c;
                        break;
                    }
                }
            }
            let [a, b, c] = picks;
            let jrand = rng.gen_range(0..n);
            let mut trial = pop[i].clone();
            for q in 0..n {
                if q == jrand || rng.gen_bool(cr_i) {
                    trial[q] = pop[a][q] + f_i * (pop[b][q] - pop[c][q]);
                }
            }
            clamp(&mut trial, bounds);
            let ft = tracker.eval(&trial);
            if ft <= fit[i] {
                pop[i] = trial;
                fit[i] = ft;
                fmut[i] = f_i;
                cr[i] = cr_i;
            }
        }
        let gen_best = fit.iter().cloned().fold(f64::INFINITY, f64::min);
        history.push(gen_best);
        if gen_best.is_finite() && best_prev.is_finite()
            && (best_prev - gen_best) <= tol * (1.0 + gen_best.abs())
        {
            stagnant += 1;
            if stagnant >= STAGNANT_GENERATIONS {
                break;
            }
        } else {
            stagnant = 0;
        }
        best_prev = best_prev.min(gen_best);
    }
    let best_idx = (0..pop_size).min_by(|&a, &b| fit[a].total_cmp(&fit[b])).unwrap();
    (pop[best_idx].clone(), fit[best_idx], history)
}

/// Minimize `objective` over the box `bounds`.
pub fn minimize<F>(mut objective: F, bounds: &[(f64, f64)], spec: &OptimizerSpec) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = bounds.len();
    if dim == 0 {
        return Err(Error::InvalidInput("empty bounds".into()));
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        // NaN bounds must be rejected too, hence not `lo >= hi`
        if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
            return Err(Error::InvalidInput(format!(
                "bounds[{i}] = [{lo}, {hi}] must satisfy lo < hi"
            )));
        }
    }
    let pop_size = if spec.population == 0 {
        (10 * dim).max(20)
    } else {
        spec.population
    };
    if spec.method == Method::HybridDe && pop_size < 4 {
        return Err(Error::InvalidInput(
            "differential evolution needs a population of at least 4".into(),
        ));
    }

    let mut obj = |x: &[f64]| objective(x);
    let mut tracker = Tracker::new(&mut obj);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tol = spec.objective_tolerance;

    let (converged, mut history) = match spec.method {
        Method::LocalGradient => {
            let (x0, _) = feasible_start(&mut tracker, bounds, &mut rng)?;
            let (_, _, conv, hist) =
                local_search(&mut tracker, bounds, x0, spec.max_local_iters, tol);
            (conv, hist)
        }
        Method::HybridGa | Method::HybridDe => {
            let (gx, gf, mut hist) = if spec.method == Method::HybridGa {
                ga_phase(&mut tracker, bounds, pop_size, spec.max_generations, tol, &mut rng)
            } else {
                de_phase(&mut tracker, bounds, pop_size, spec.max_generations, tol, &mut rng)
            };
            if gf.is_finite() {
                let (_, _, conv, lh) =
                    local_search(&mut tracker, bounds, gx, spec.max_local_iters, tol);
                hist.extend(lh);
                (conv, hist)
            } else {
                // no feasible member found by the global phase; try the local
                // fallback so all-infeasible is decided on real probes
                match feasible_start(&mut tracker, bounds, &mut rng) {
                    Ok((x0, _)) => {
                        let (_, _, conv, lh) =
                            local_search(&mut tracker, bounds, x0, spec.max_local_iters, tol);
                        hist.extend(lh);
                        (conv, hist)
                    }
                    Err(_) => (false, hist),
                }
            }
        }
    };

    let best_x = match tracker.best_x.take() {
        Some(x) if tracker.best_f.is_finite() => x,
        _ => return Err(Error::AllInfeasible),
    };
    // pin the invariant f_best == objective(x_best) by re-evaluating
    let f_best = tracker.eval(&best_x);
    history.push(f_best);
    Ok(OptimResult {
        x_best: best_x,
        f_best,
        evaluations: tracker.evaluations,
        converged,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(method: Method, seed: u64) -> OptimizerSpec {
        OptimizerSpec::new(method, seed)
    }

    #[test]
    fn quadratic_all_methods() {
        for method in Method::ALL {
            let r = minimize(|x| (x[0] - 0.3).powi(2), &[(0.0, 1.0)], &spec(method, 1)).unwrap();
            assert!((r.x_best[0] - 0.3).abs() <= 1e-4, "{method:?}: {:?}", r.x_best);
            assert!(r.f_best <= 1e-8, "{method:?}: {}", r.f_best);
        }
    }

    #[test]
    fn boundary_optimum() {
        for method in Method::ALL {
            let r = minimize(|x| (x[0] - 2.0).powi(2), &[(0.0, 1.0)], &spec(method, 3)).unwrap();
            assert!((r.x_best[0] - 1.0).abs() <= 1e-6, "{method:?}: {:?}", r.x_best);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        for method in Method::ALL {
            let f = |x: &[f64]| (x[0] + 0.2).powi(2) + (x[1] - 0.4).powi(2) + (x[0] * x[1]).sin();
            let a = minimize(f, &[(-1.0, 1.0), (-1.0, 1.0)], &spec(method, 99)).unwrap();
            let b = minimize(f, &[(-1.0, 1.0), (-1.0, 1.0)], &spec(method, 99)).unwrap();
            assert_eq!(a.x_best, b.x_best);
            assert_eq!(a.f_best, b.f_best);
            assert_eq!(a.evaluations, b.evaluations);
        }
    }

    #[test]
    fn all_infeasible_is_reported() {
        for method in Method::ALL {
            let r = minimize(|_| f64::INFINITY, &[(0.0, 1.0)], &spec(method, 5));
            assert!(matches!(r, Err(Error::AllInfeasible)), "{method:?}");
        }
    }

    #[test]
    fn sentinel_regions_are_avoided() {
        // objective infeasible on half the box; the minimum sits in the
        // feasible half
        for method in Method::ALL {
            let f = |x: &[f64]| {
                if x[0] < 0.5 {
                    f64::INFINITY
                } else {
                    (x[0] - 0.7).powi(2)
                }
            };
            let r = minimize(f, &[(0.0, 1.0)], &spec(method, 11)).unwrap();
            assert!((r.x_best[0] - 0.7).abs() <= 1e-3, "{method:?}: {:?}", r.x_best);
        }
    }

    #[test]
    fn iterates_respect_bounds() {
        for method in Method::ALL {
            let mut violated = false;
            let bounds = [(-0.5, 0.5), (0.0, 2.0)];
            let r = minimize(
                |x| {
                    if x[0] < -0.5 || x[0] > 0.5 || x[1] < 0.0 || x[1] > 2.0 {
                        violated = true;
                    }
                    x[0].powi(2) + (x[1] - 1.0).powi(2)
                },
                &bounds,
                &spec(method, 21),
            )
            .unwrap();
            assert!(!violated, "{method:?} probed outside the box");
            for (v, &(lo, hi)) in r.x_best.iter().zip(&bounds) {
                assert!(*v >= lo && *v <= hi);
            }
        }
    }

    #[test]
    fn f_best_matches_reevaluation() {
        for method in Method::ALL {
            let f = |x: &[f64]| (x[0] - 0.1).powi(2) + 0.3 * (7.0 * x[0]).cos() + 0.3;
            let r = minimize(f, &[(-1.0, 1.0)], &spec(method, 8)).unwrap();
            let fre = f(&r.x_best);
            assert!((r.f_best - fre).abs() <= 1e-12 * (1.0 + fre.abs()));
        }
    }

    fn multimodal_2d(x: &[f64]) -> f64 {
        x[0] * x[0] + x[1] * x[1]
            - 0.2 * ((3.0 * std::f64::consts::PI * x[0]).cos()
                + (3.0 * std::f64::consts::PI * x[1]).cos())
            + 0.4
    }

    #[test]
    fn hybrid_methods_find_global_optimum_of_multimodal_objective() {
        // dense-grid oracle for the global optimum
        let mut f_star = f64::INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                let x = [-1.0 + 2.0 * i as f64 / 400.0, -1.0 + 2.0 * j as f64 / 400.0];
                f_star = f_star.min(multimodal_2d(&x));
            }
        }
        for method in [Method::HybridGa, Method::HybridDe] {
            let mut hits = 0;
            for seed in 0..100 {
                let r = minimize(multimodal_2d, &[(-1.0, 1.0), (-1.0, 1.0)], &spec(method, seed))
                    .unwrap();
                if r.f_best <= f_star + 1e-3 {
                    hits += 1;
                }
            }
            assert!(hits >= 95, "{method:?} hit {hits}/100");
        }
    }

    #[test]
    fn hybrid_refinement_never_worsens_global_best() {
        // the history records the global phase; the final best must not exceed
        // any recorded generation best
        for method in [Method::HybridGa, Method::HybridDe] {
            let r = minimize(multimodal_2d, &[(-1.0, 1.0), (-1.0, 1.0)], &spec(method, 4)).unwrap();
            let global_min = r.history.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(r.f_best <= global_min + 1e-15);
        }
    }
}
