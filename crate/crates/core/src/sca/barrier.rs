//! Log-barrier interior-point method with damped Newton centering for
//! `maximize c^T x` subject to smooth convex constraints `f_i(x) <= 0`.

use crate::error::{Error, Result};
use crate::linalg::{solve_bordered, DenseMatrix};
use crate::scalar::Scalar;

/// Convex constraint `f(x) <= 0` with an analytic gradient and Hessian.
#[derive(Clone, Debug, PartialEq)]
pub enum Constraint<T> {
    /// `sum a_j x_j - rhs <= 0`
    Linear { terms: Vec<(usize, T)>, rhs: T },
    /// `2^{x[rate]} - 1 - x[aux] <= 0`
    ExpEpigraph { rate: usize, aux: usize },
    /// Convex upper bound on `x y` kept below `t`:
    /// `U(x[aux], y) - t <= 0` with `y = y0 + sum y_j x_j` and `t = sum t_j x_j`.
    ProductUpper {
        aux: usize,
        y_const: T,
        y_terms: Vec<(usize, T)>,
        t_terms: Vec<(usize, T)>,
        xn: T,
        yn: T,
    },
    /// Concave lower bound on `x y` kept above `t`, with `x` the tangent of
    /// `2^{rate} - 1` at `rate_n` and `y` constant:
    /// `t - L(x, y) <= 0`.
    ProductLower {
        rate: usize,
        rate_n: T,
        y: T,
        t_terms: Vec<(usize, T)>,
        xn: T,
        yn: T,
    },
}

/// `1/4 [(x+y)^2 - 2(x-y)(xn-yn) + (xn-yn)^2]`, a convex majorant of `x y`
/// that is tight when `x - y = xn - yn`.
#[inline]
pub fn product_upper_bound<T: Scalar>(x: T, y: T, xn: T, yn: T) -> T {
    let d = xn - yn;
    T::of(0.25) * ((x + y) * (x + y) - T::of(2.0) * (x - y) * d + d * d)
}

/// `1/4 [2(x+y)(xn+yn) - (xn+yn)^2 - (x-y)^2]`, a concave minorant of `x y`
/// that is tight when `x + y = xn + yn`.
#[inline]
pub fn product_lower_bound<T: Scalar>(x: T, y: T, xn: T, yn: T) -> T {
    let s = xn + yn;
    T::of(0.25) * (T::of(2.0) * (x + y) * s - s * s - (x - y) * (x - y))
}

/// Tangent of `2^r - 1` at `r_n`; a global under-estimator.
#[inline]
pub fn exp2_tangent<T: Scalar>(r: T, r_n: T) -> T {
    let base = r_n.exp2();
    base * (T::one() + T::LN_2() * (r - r_n)) - T::one()
}

#[inline]
fn dot<T: Scalar>(terms: &[(usize, T)], x: &[T]) -> T {
    terms.iter().map(|&(j, a)| a * x[j]).fold(T::zero(), |s, v| s + v)
}

impl<T: Scalar> Constraint<T> {
    pub fn value(&self, x: &[T]) -> T {
        match self {
            Constraint::Linear { terms, rhs } => dot(terms, x) - *rhs,
            Constraint::ExpEpigraph { rate, aux } => x[*rate].exp2() - T::one() - x[*aux],
            Constraint::ProductUpper {
                aux,
                y_const,
                y_terms,
                t_terms,
                xn,
                yn,
            } => {
                let y = *y_const + dot(y_terms, x);
                product_upper_bound(x[*aux], y, *xn, *yn) - dot(t_terms, x)
            }
            Constraint::ProductLower {
                rate,
                rate_n,
                y,
                t_terms,
                xn,
                yn,
            } => {
                let xv = exp2_tangent(x[*rate], *rate_n);
                dot(t_terms, x) - product_lower_bound(xv, *y, *xn, *yn)
            }
        }
    }

    /// Sparse gradient (indices may repeat).
    pub fn gradient(&self, x: &[T], out: &mut Vec<(usize, T)>) {
        out.clear();
        let half = T::of(0.5);
        match self {
            Constraint::Linear { terms, .. } => out.extend_from_slice(terms),
            Constraint::ExpEpigraph { rate, aux } => {
                out.push((*rate, T::LN_2() * x[*rate].exp2()));
                out.push((*aux, -T::one()));
            }
            Constraint::ProductUpper {
                aux,
                y_const,
                y_terms,
                t_terms,
                xn,
                yn,
            } => {
                let xv = x[*aux];
                let y = *y_const + dot(y_terms, x);
                let d = *xn - *yn;
                let dx = half * (xv + y) - half * d;
                let dy = half * (xv + y) + half * d;
                out.push((*aux, dx));
                out.extend(y_terms.iter().map(|&(j, a)| (j, a * dy)));
                out.extend(t_terms.iter().map(|&(j, a)| (j, -a)));
            }
            Constraint::ProductLower {
                rate,
                rate_n,
                y,
                t_terms,
                xn,
                yn,
            } => {
                let xv = exp2_tangent(x[*rate], *rate_n);
                let slope = rate_n.exp2() * T::LN_2();
                let dl_dx = half * (*xn + *yn) - half * (xv - *y);
                out.extend_from_slice(t_terms);
                out.push((*rate, -dl_dx * slope));
            }
        }
    }

    /// `h += scale * hess f(x)`
    pub fn add_hessian(&self, x: &[T], scale: T, h: &mut DenseMatrix<T>, scratch: &mut Vec<(usize, T)>) {
        match self {
            Constraint::Linear { .. } => {}
            Constraint::ExpEpigraph { rate, .. } => {
                h.add(*rate, *rate, scale * T::LN_2() * T::LN_2() * x[*rate].exp2());
            }
            Constraint::ProductUpper { aux, y_terms, .. } => {
                scratch.clear();
                scratch.push((*aux, T::one()));
                scratch.extend_from_slice(y_terms);
                h.add_outer(scratch, scale * T::of(0.5));
            }
            Constraint::ProductLower { rate, rate_n, .. } => {
                let slope = rate_n.exp2() * T::LN_2();
                h.add(*rate, *rate, scale * T::of(0.5) * slope * slope);
            }
        }
    }
}

/// `maximize c^T x` over the intersection of convex constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexProgram<T> {
    pub dim: usize,
    /// Leading variables that may be coupled to anything. The remaining ones
    /// come in independent groups of `block` (0 means no such structure),
    /// which the Newton solve eliminates blockwise.
    pub dense: usize,
    pub block: usize,
    pub objective: Vec<(usize, T)>,
    pub constraints: Vec<Constraint<T>>,
}

impl<T: Scalar> ConvexProgram<T> {
    pub fn objective_value(&self, x: &[T]) -> T {
        dot(&self.objective, x)
    }

    /// Largest constraint value at `x` (negative means strictly feasible).
    pub fn max_violation(&self, x: &[T]) -> T {
        self.constraints
            .iter()
            .map(|c| c.value(x))
            .fold(T::neg_infinity(), T::max)
    }

    fn barrier_value(&self, x: &[T], t: T) -> Option<T> {
        let mut phi = -t * self.objective_value(x);
        for c in &self.constraints {
            let f = c.value(x);
            if !(f < T::zero()) {
                return None;
            }
            phi -= (-f).ln();
        }
        phi.is_finite().then_some(phi)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierSettings<T> {
    pub t_initial: T,
    pub t_growth: T,
    pub t_final: T,
    /// Centering stops when half the squared Newton decrement falls below this.
    pub tol_kkt: T,
    pub max_newton_per_center: usize,
}

impl<T: Scalar> Default for BarrierSettings<T> {
    fn default() -> Self {
        Self {
            t_initial: T::one(),
            t_growth: T::of(10.0),
            t_final: T::of(1e8),
            tol_kkt: T::of(1e-8),
            max_newton_per_center: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierOutcome<T> {
    pub x: Vec<T>,
    pub objective: T,
    pub newton_steps: usize,
    /// Half squared Newton decrement at the final centering.
    pub kkt_residual: T,
    /// Duality-gap bound `m / t` of the final barrier weight.
    pub duality_gap: T,
}

/// Runs the barrier method from a strictly feasible `x0`.
pub fn solve_barrier<T: Scalar>(
    prog: &ConvexProgram<T>,
    x0: Vec<T>,
    settings: &BarrierSettings<T>,
) -> Result<BarrierOutcome<T>> {
    let n = prog.dim;
    if x0.len() != n {
        return Err(Error::Dimension(format!("barrier start has {} entries, program has {n}", x0.len())));
    }
    if prog.barrier_value(&x0, settings.t_initial).is_none() {
        return Err(Error::InfeasibleExpansion {
            violation: prog.max_violation(&x0).to_f64_lossy(),
        });
    }
    let mut x = x0;
    let mut t = settings.t_initial;
    let mut hess = DenseMatrix::zeros(n);
    let mut grad = vec![T::zero(); n];
    let mut cgrad = Vec::new();
    let mut scratch = Vec::new();
    let mut history = Vec::new();
    let mut steps = 0usize;
    let mut residual = T::zero();
    let slack_eps = T::of(64.0) * T::epsilon();

    loop {
        let mut centered = false;
        for _ in 0..settings.max_newton_per_center {
            hess.fill_zero();
            grad.iter_mut().for_each(|g| *g = T::zero());
            for &(j, cj) in &prog.objective {
                grad[j] -= t * cj;
            }
            for c in &prog.constraints {
                let f = c.value(&x);
                let inv = T::one() / (-f);
                c.gradient(&x, &mut cgrad);
                for &(j, g) in &cgrad {
                    grad[j] += g * inv;
                }
                hess.add_outer(&cgrad, inv * inv);
                c.add_hessian(&x, inv, &mut hess, &mut scratch);
            }
            let scale = hess.max_abs_diag().max(T::one());
            let neg_g: Vec<T> = grad.iter().map(|&g| -g).collect();
            let mut shift = T::zero();
            let dx = loop {
                if let Some(dx) = solve_bordered(&hess, &neg_g, prog.dense, prog.block, shift) {
                    break dx;
                }
                shift = if shift == T::zero() {
                    T::of(1e-14) * scale
                } else {
                    shift * T::of(100.0)
                };
                if shift > T::of(1e-4) * scale {
                    return Err(Error::NumericalIllConditioning(format!(
                        "Hessian not positive definite at t = {}",
                        t.to_f64_lossy()
                    )));
                }
            };
            let lambda_sq = -grad.iter().zip(&dx).map(|(&g, &d)| g * d).fold(T::zero(), |a, b| a + b);
            residual = lambda_sq * T::of(0.5);
            if !residual.is_finite() {
                return Err(Error::NumericalIllConditioning("non-finite Newton decrement".into()));
            }
            if residual <= settings.tol_kkt {
                centered = true;
                break;
            }
            let phi = prog.barrier_value(&x, t).expect("iterate is strictly feasible");
            let mut s = T::one();
            let mut accepted = None;
            while s > T::of(1e-16) {
                let trial: Vec<T> = x.iter().zip(&dx).map(|(&xi, &di)| xi + s * di).collect();
                if let Some(phi_new) = prog.barrier_value(&trial, t) {
                    if phi_new <= phi - T::of(0.25) * s * lambda_sq + slack_eps * phi.abs() {
                        accepted = Some((trial, phi_new));
                        break;
                    }
                }
                s *= T::of(0.5);
            }
            steps += 1;
            match accepted {
                Some((trial, phi_new)) => {
                    x = trial;
                    history.push(phi_new.to_f64_lossy());
                }
                None if residual <= T::of(1e-6) => {
                    // decrement below the resolution of the barrier value
                    centered = true;
                    break;
                }
                None => return Err(Error::BarrierDivergence { history }),
            }
        }
        if !centered {
            return Err(Error::BarrierDivergence { history });
        }
        if t >= settings.t_final {
            break;
        }
        t = (t * settings.t_growth).min(settings.t_final);
    }
    Ok(BarrierOutcome {
        objective: prog.objective_value(&x),
        x,
        newton_steps: steps,
        kkt_residual: residual,
        duality_gap: T::of(prog.constraints.len() as f64) / t,
    })
}
