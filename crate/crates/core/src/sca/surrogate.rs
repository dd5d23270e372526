//! Convex inner approximation of the secrecy problem around an iterate.
//!
//! Per (k, m) the rates are lifted into per-Hz slacks `zeta` and `gamma`:
//!
//! ```text
//! C_k  >= W zeta   <=>  (2^zeta - 1) * y1(p) <= p_k |g_k|^2
//! C_ke <= W gamma  <=>  p_k |w^H h_ke|^2 <= (2^gamma - 1) * y2
//! ```
//!
//! The first product is bounded above by a convex quadratic, with
//! `e >= 2^zeta - 1` kept as an exact epigraph constraint. In the second,
//! `2^gamma - 1` is replaced by its tangent and the product is bounded below
//! by a concave quadratic. Every feasible point of the model therefore satisfies
//! the true rate constraints.
//!
//! Only pairs with positive secrecy at the expansion point carry slacks. The
//! sum of `zeta - gamma` over that set lower-bounds the clipped objective
//! everywhere and equals it at the expansion point, so improving the model
//! never lowers the true sum secrecy rate.

use super::barrier::{exp2_tangent, Constraint, ConvexProgram};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::phy::{PowerAllocation, SecrecyProblem};
use crate::scalar::Scalar;

/// Linearization constants of one expansion point, per (k, m).
#[derive(Clone, Debug, PartialEq)]
pub struct SurrogatePoint<T> {
    pub x1n: Grid<T>,
    pub y1n: Grid<T>,
    pub x2n: Grid<T>,
    pub y2n: Grid<T>,
    /// `C_ke / W` at the expansion point.
    pub gamma_n: Grid<T>,
    /// `C_k / W` at the expansion point.
    pub zeta_n: Grid<T>,
    /// Whether the pair had positive secrecy (and so carries slacks).
    pub active: Grid<bool>,
}

/// Slack indices of one active (k, m).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellVars {
    pub k: usize,
    pub m: usize,
    pub zeta: usize,
    pub gamma: usize,
    pub aux: usize,
}

/// Convex subproblem: variables `[p (row-major K x M), (zeta, gamma, e) per active cell]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubproblemModel<T> {
    pub program: ConvexProgram<T>,
    pub point: SurrogatePoint<T>,
    pub cells: Vec<CellVars>,
    pub pairs: usize,
    pub blocks: usize,
    pub bandwidth: T,
    /// The expansion point itself, with slacks at the true rates.
    pub expansion: Vec<T>,
    /// Strictly feasible start near the expansion point.
    pub start: Vec<T>,
}

impl<T: Scalar> SubproblemModel<T> {
    pub fn power_of(&self, x: &[T]) -> PowerAllocation<T> {
        let n = self.pairs * self.blocks;
        PowerAllocation::from_grid(Grid::from_vec(self.pairs, self.blocks, x[..n].to_vec()).expect("power block"))
    }

    /// Surrogate objective in bits/s.
    pub fn objective_bits(&self, x: &[T]) -> T {
        self.program.objective_value(x) * self.bandwidth
    }
}

fn expansion_point<T: Scalar>(prob: &SecrecyProblem<T>, p: &PowerAllocation<T>) -> SurrogatePoint<T> {
    let (pairs, blocks) = (prob.pairs(), prob.blocks());
    let sv = Grid::from_fn(pairs, blocks, |k, m| {
        p.get(k, m) * prob.desired_gain(k, m) / prob.vue_denominator(p, k, m)
    });
    let se = Grid::from_fn(pairs, blocks, |k, m| {
        p.get(k, m) * prob.eve_signal_gain(k, m) / prob.eve_floor(k, m)
    });
    let zeta_n = sv.map(|&s| s.log2_1p());
    let gamma_n = se.map(|&s| s.log2_1p());
    let active = Grid::from_fn(pairs, blocks, |k, m| {
        let (cv, ce) = prob.capacities(p, k, m);
        cv - ce > T::zero()
    });
    SurrogatePoint {
        y1n: Grid::from_fn(pairs, blocks, |k, m| prob.vue_denominator(p, k, m)),
        y2n: Grid::from_fn(pairs, blocks, |k, m| prob.eve_floor(k, m)),
        x1n: sv,
        x2n: se,
        gamma_n,
        zeta_n,
        active,
    }
}

/// Builds the convex model around the feasible allocation `p_n`.
pub fn build_surrogate<T: Scalar>(prob: &SecrecyProblem<T>, p_n: &PowerAllocation<T>) -> Result<SubproblemModel<T>> {
    prob.check_box(p_n)?;
    let (pairs, blocks) = (prob.pairs(), prob.blocks());
    let np = pairs * blocks;
    let point = expansion_point(prob, p_n);
    let (floor, p_max) = (prob.floor(), prob.p_max());

    let mut constraints = Vec::new();
    for i in 0..np {
        constraints.push(Constraint::Linear {
            terms: vec![(i, -T::one())],
            rhs: -floor,
        });
        constraints.push(Constraint::Linear {
            terms: vec![(i, T::one())],
            rhs: p_max,
        });
    }

    let mut cells = Vec::new();
    let mut objective = Vec::new();
    let mut expansion: Vec<T> = p_n.as_slice().to_vec();
    for k in 0..pairs {
        for m in 0..blocks {
            if !point.active[(k, m)] {
                continue;
            }
            let base = np + 3 * cells.len();
            let cell = CellVars {
                k,
                m,
                zeta: base,
                gamma: base + 1,
                aux: base + 2,
            };
            cells.push(cell);
            objective.push((cell.zeta, T::one()));
            objective.push((cell.gamma, -T::one()));
            expansion.extend([point.zeta_n[(k, m)], point.gamma_n[(k, m)], point.x1n[(k, m)]]);

            let p_idx = k * blocks + m;
            let y_terms: Vec<(usize, T)> = (0..pairs)
                .filter(|&k2| k2 != k && prob.inter_gain(k, k2, m) > T::zero())
                .map(|k2| (k2 * blocks + m, prob.inter_gain(k, k2, m)))
                .collect();
            constraints.push(Constraint::ExpEpigraph {
                rate: cell.zeta,
                aux: cell.aux,
            });
            constraints.push(Constraint::ProductUpper {
                aux: cell.aux,
                y_const: prob.vue_floor(k, m),
                y_terms,
                t_terms: vec![(p_idx, prob.desired_gain(k, m))],
                xn: point.x1n[(k, m)],
                yn: point.y1n[(k, m)],
            });
            constraints.push(Constraint::ProductLower {
                rate: cell.gamma,
                rate_n: point.gamma_n[(k, m)],
                y: point.y2n[(k, m)],
                t_terms: vec![(p_idx, prob.eve_signal_gain(k, m))],
                xn: point.x2n[(k, m)],
                yn: point.y2n[(k, m)],
            });
            constraints.push(Constraint::Linear {
                terms: vec![(cell.zeta, -T::one())],
                rhs: T::zero(),
            });
            constraints.push(Constraint::Linear {
                terms: vec![(cell.gamma, -T::one())],
                rhs: T::zero(),
            });
        }
    }
    let program = ConvexProgram {
        dim: np + 3 * cells.len(),
        dense: np,
        block: 3,
        objective,
        constraints,
    };

    // the expansion point must satisfy its own model; the epigraph and
    // lower-bound rows hold with equality there, so allow rounding
    let violation = program
        .constraints
        .iter()
        .map(|c| {
            let scale = constraint_scale(c, &expansion);
            c.value(&expansion) / scale
        })
        .fold(T::neg_infinity(), T::max);
    if violation > T::of(1e-9) {
        return Err(Error::InfeasibleExpansion {
            violation: violation.to_f64_lossy(),
        });
    }

    let mut model = SubproblemModel {
        program,
        point,
        cells,
        pairs,
        blocks,
        bandwidth: prob.bandwidth(),
        start: Vec::new(),
        expansion,
    };
    model.start = strict_start(prob, &model)?;
    Ok(model)
}

/// Magnitude of the terms entering a constraint, used to judge rounding.
fn constraint_scale<T: Scalar>(c: &Constraint<T>, x: &[T]) -> T {
    let mag = |terms: &[(usize, T)]| terms.iter().map(|&(j, a)| (a * x[j]).abs()).fold(T::zero(), |s, v| s + v);
    let s = match c {
        Constraint::Linear { terms, rhs } => mag(terms) + rhs.abs(),
        Constraint::ExpEpigraph { rate, aux } => x[*rate].exp2() + x[*aux].abs(),
        Constraint::ProductUpper {
            y_const,
            y_terms,
            t_terms,
            xn,
            yn,
            ..
        } => mag(t_terms) + (*y_const + mag(y_terms)) * (T::one() + *xn) + *yn,
        Constraint::ProductLower { t_terms, xn, yn, .. } => mag(t_terms) + (*xn + T::one()) * *yn,
    };
    s.max(T::one())
}

/// Interior point close to the expansion point.
///
/// Powers move off the box faces, `e` is placed inside the interval where the
/// quadratic upper bound stays below the received signal, and `gamma` is
/// raised until the concave lower bound clears the wiretap signal.
fn strict_start<T: Scalar>(prob: &SecrecyProblem<T>, model: &SubproblemModel<T>) -> Result<Vec<T>> {
    let np = model.pairs * model.blocks;
    let (floor, p_max) = (prob.floor(), prob.p_max());
    let width = p_max - floor;
    let eta = T::of(1e-6) * width;
    let mut x = model.expansion.clone();
    for v in x.iter_mut().take(np) {
        *v = v.max(floor + eta).min(p_max - eta);
    }
    let p = model.power_of(&x);
    for cell in &model.cells {
        let (k, m) = (cell.k, cell.m);
        let pt = &model.point;

        // e-interval where U(e, y1) < t1:  e = dn - y +/- 2 sqrt(t1 - y dn)
        let y = prob.vue_denominator(&p, k, m);
        let t1 = p.get(k, m) * prob.desired_gain(k, m);
        let dn = pt.x1n[(k, m)] - pt.y1n[(k, m)];
        let disc = t1 - y * dn;
        if !(disc > T::zero()) {
            return Err(Error::InfeasibleExpansion {
                violation: (-disc).to_f64_lossy(),
            });
        }
        let root = T::of(2.0) * disc.sqrt();
        let hi = dn - y + root;
        let lo = (dn - y - root).max(T::zero());
        if !(hi > lo) {
            return Err(Error::InfeasibleExpansion {
                violation: (lo - hi).to_f64_lossy(),
            });
        }

        // gamma where the tangent reaches xn + 2 theta y2
        let y2 = pt.y2n[(k, m)];
        let x2n = pt.x2n[(k, m)];
        let g_n = pt.gamma_n[(k, m)];
        let slope = g_n.exp2() * T::LN_2();

        let mut rho = T::of(1e-3);
        loop {
            let e = hi - rho * (hi - lo);
            x[cell.aux] = e;
            x[cell.zeta] = (T::one() - rho) * e.log2_1p();
            let target = x2n + T::of(2.0) * rho * y2;
            x[cell.gamma] = g_n + (target - x2n) / slope;
            if cell_constraints_strict(&model.program, &x, cell) {
                break;
            }
            rho *= T::of(4.0);
            if rho > T::of(0.5) {
                return Err(Error::InfeasibleExpansion {
                    violation: model.program.max_violation(&x).to_f64_lossy(),
                });
            }
        }
        debug_assert!(exp2_tangent(x[cell.gamma], g_n) >= x2n);
    }
    let worst = model.program.max_violation(&x);
    if !(worst < T::zero()) {
        return Err(Error::InfeasibleExpansion {
            violation: worst.to_f64_lossy(),
        });
    }
    Ok(x)
}

fn cell_constraints_strict<T: Scalar>(prog: &ConvexProgram<T>, x: &[T], cell: &CellVars) -> bool {
    let touches = |c: &Constraint<T>| match c {
        Constraint::Linear { terms, .. } => terms.iter().any(|&(j, _)| j == cell.zeta || j == cell.gamma),
        Constraint::ExpEpigraph { rate, .. } => *rate == cell.zeta,
        Constraint::ProductUpper { aux, .. } => *aux == cell.aux,
        Constraint::ProductLower { rate, .. } => *rate == cell.gamma,
    };
    prog.constraints.iter().filter(|c| touches(c)).all(|c| c.value(x) < T::zero())
}
