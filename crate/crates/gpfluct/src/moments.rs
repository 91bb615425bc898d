//! Exact moment and cumulant polynomials in `n` for monomial observables on
//! the circle, and the limiting fluctuation parameters extracted from them.
//!
//! With `S_n = n^p · M_G(𝒳_n)`, the r-th moment of `M_G(𝒳_n)` expands over
//! set partitions of the `p·r` indices as `Σ_π n↓ℓ(π) · M_{G^r↓π}`, and the
//! r-th cumulant as `Σ_π κ(π, G) · n↓ℓ(π)`, where `κ(π, G)` is the joint
//! cumulant of the r row variables under index pattern π. Both sweeps are
//! exact rational computations backed by the circle reduction engine.

use crate::circle::{CircleError, CircleEvaluator, CircleValue};
use crate::multigraph::{GraphError, Multigraph, MAX_CANON_VERTICES};
use crate::poly::{FactorialPolynomial, StandardPolynomial};
use crate::rational::Rational;
use crate::setpart::{
    canonical_two_row_partition, enumerate_partitions, is_homogeneously_vanishing,
    row_graph_connected, RowLayout, SetPartError, SetPartition, TwoRowPattern,
};
use num::{BigInt, One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Largest cumulant order: the `𝔔(p·r)` sweep for `p = 3, r = 4` is the
/// desk-scale ceiling.
pub const MAX_CUMULANT_ORDER: usize = 4;

#[derive(Debug, Error)]
pub enum MomentsError {
    #[error("sweep over {0} positions exceeds the bound {MAX_CANON_VERTICES}")]
    SweepBound(usize),
    #[error("cumulant order {0} outside 1..={MAX_CUMULANT_ORDER}")]
    OrderBound(usize),
    #[error("r_max {0} outside 2..={MAX_CUMULANT_ORDER}")]
    RmaxBound(usize),
    #[error("partition layout p = {layout_p} does not match a graph on {vertices} vertices")]
    LayoutGraph { layout_p: usize, vertices: usize },
    #[error("graph class {0} required quadrature; exact polynomials are unavailable for it")]
    NotExact(String),
    #[error(transparent)]
    Circle(#[from] CircleError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    SetPart(#[from] SetPartError),
}

fn exact_m(ev: &mut CircleEvaluator, g: &Multigraph) -> Result<Rational, MomentsError> {
    let res = ev.evaluate(g)?;
    match res.value {
        CircleValue::Exact(r) => Ok(r),
        CircleValue::Approx(_) => Err(MomentsError::NotExact(
            res.fallback_graphs
                .first()
                .map(|k| k.hex())
                .unwrap_or_default(),
        )),
    }
}

/// `n^{pr} · E[(M_G(𝒳_n))^r]` on the circle, as an exact polynomial in the
/// falling-factorial basis: one term `M_{G^r↓π} · n↓ℓ(π)` per partition,
/// loopy contractions contributing 0.
pub fn exact_moment_polynomial(
    ev: &mut CircleEvaluator,
    g: &Multigraph,
    r: usize,
) -> Result<FactorialPolynomial, MomentsError> {
    if r == 0 {
        return Err(MomentsError::OrderBound(0));
    }
    let total = g.vertex_count() * r;
    if total == 0 || total > MAX_CANON_VERTICES {
        return Err(MomentsError::SweepBound(total));
    }
    let power = g.disjoint_power(r);
    let mut poly = FactorialPolynomial::zero();
    for pi in enumerate_partitions(total)? {
        let contracted = power.contract(&pi)?;
        if contracted.has_loop() {
            continue;
        }
        poly.add_term(pi.block_count(), exact_m(ev, &contracted)?);
    }
    Ok(poly)
}

/// Restriction of π to the given rows: keep their positions in row order,
/// re-index the ground set order-preservingly, and renumber blocks.
fn restrict_to_rows(pi: &SetPartition, layout: RowLayout, rows: &[usize]) -> SetPartition {
    let mut relabel: Vec<Option<usize>> = vec![None; pi.block_count()];
    let mut rgs = Vec::with_capacity(rows.len() * layout.p);
    let mut next = 0usize;
    for &k in rows {
        for pos in layout.row_positions(k) {
            let b = pi.block_index_of(pos);
            let id = match relabel[b] {
                Some(id) => id,
                None => {
                    relabel[b] = Some(next);
                    next += 1;
                    next - 1
                }
            };
            rgs.push(id);
        }
    }
    SetPartition::from_rgs(&rgs)
}

/// The joint cumulant `κ(π, G)` of the `r` row variables of `M_G` under
/// index pattern π, via Möbius inversion over partitions of the rows:
/// `Σ_ρ μ(ρ) Π_{C∈ρ} M_{G^{|C|}↓(π|_C)}(𝕋)`.
pub fn kappa_pi(
    ev: &mut CircleEvaluator,
    g: &Multigraph,
    pi: &SetPartition,
    layout: RowLayout,
) -> Result<Rational, MomentsError> {
    if layout.p != g.vertex_count() {
        return Err(MomentsError::LayoutGraph {
            layout_p: layout.p,
            vertices: g.vertex_count(),
        });
    }
    if pi.ground_set_size() != layout.total() {
        return Err(MomentsError::SetPart(SetPartError::LayoutMismatch {
            got: pi.ground_set_size(),
            expected: layout.total(),
        }));
    }
    let mut acc = Rational::zero();
    for rho in enumerate_partitions(layout.r)? {
        let mut prod = Rational::one();
        for rows in rho.blocks() {
            let restricted = restrict_to_rows(pi, layout, rows);
            let sub = g.disjoint_power(rows.len()).contract(&restricted)?;
            prod *= exact_m(ev, &sub)?;
            if prod.is_zero() {
                break;
            }
        }
        acc += Rational::from(BigInt::from(rho.moebius_to_top())) * prod;
    }
    Ok(acc)
}

/// Which cumulant-vanishing theorems to apply as sweep filters. The filters
/// are sound (the dropped terms are identically zero on the circle), so the
/// filtered and unfiltered sweeps must agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VanishingFilter {
    #[default]
    None,
    /// Drop π whose row graph is disconnected.
    DisconnectedRows,
    /// Additionally drop the homogeneously vanishing π (circle case).
    DisconnectedAndHomogeneous,
}

/// `κ^{(r)}(S_n)` for `S_n = n^p · M_G(𝒳_n)` as an exact polynomial:
/// `Σ_π κ(π, G) · n↓ℓ(π)`.
pub fn exact_cumulant_polynomial(
    ev: &mut CircleEvaluator,
    g: &Multigraph,
    r: usize,
) -> Result<FactorialPolynomial, MomentsError> {
    exact_cumulant_polynomial_filtered(ev, g, r, VanishingFilter::None)
}

pub fn exact_cumulant_polynomial_filtered(
    ev: &mut CircleEvaluator,
    g: &Multigraph,
    r: usize,
    filter: VanishingFilter,
) -> Result<FactorialPolynomial, MomentsError> {
    if r == 0 || r > MAX_CUMULANT_ORDER {
        return Err(MomentsError::OrderBound(r));
    }
    let p = g.vertex_count();
    let total = p * r;
    if total == 0 || total > MAX_CANON_VERTICES {
        return Err(MomentsError::SweepBound(total));
    }
    let layout = RowLayout::new(p, r)?;
    let mut poly = FactorialPolynomial::zero();
    for pi in enumerate_partitions(total)? {
        match filter {
            VanishingFilter::None => {}
            VanishingFilter::DisconnectedRows => {
                if !row_graph_connected(&pi, layout)? {
                    continue;
                }
            }
            VanishingFilter::DisconnectedAndHomogeneous => {
                if !row_graph_connected(&pi, layout)?
                    || is_homogeneously_vanishing(&pi, layout)?
                {
                    continue;
                }
            }
        }
        poly.add_term(pi.block_count(), kappa_pi(ev, g, &pi, layout)?);
    }
    Ok(poly)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `σ² > 0`: fluctuations of order n^{-1/2} with Gaussian limit.
    Generic,
    /// `σ² = 0`: fluctuations of order n^{-1}, limit determined by the a_r.
    HomogeneousSingular,
}

#[derive(Debug, Clone)]
pub struct LimitReport {
    /// Generic-normalized limiting variance `(1/p²) Σ_{k,l} κ(π_{k,l}, G)`.
    pub sigma_sq: Rational,
    /// Coefficient of `n^{2(p−1)}` in `κ^{(2)}(S_n)`.
    pub sigma_hom_sq: Rational,
    /// Limiting cumulants `a_r` of the rescaled fluctuations for
    /// `r = 2..=r_max`; absent when `sigma_hom_sq = 0`.
    pub a_r: Option<Vec<f64>>,
    pub regime: Regime,
}

/// Computes σ², σ²_hom and the limiting cumulants `a_r = v_{(p−1)r} /
/// (w_{2(p−1)})^{r/2}` from the leading coefficients of the exact cumulant
/// polynomials. Homogeneity is discovered (σ² = 0), never assumed.
pub fn limit_report(
    ev: &mut CircleEvaluator,
    g: &Multigraph,
    r_max: usize,
) -> Result<LimitReport, MomentsError> {
    if !(2..=MAX_CUMULANT_ORDER).contains(&r_max) {
        return Err(MomentsError::RmaxBound(r_max));
    }
    let p = g.vertex_count();
    let layout = RowLayout::new(p, 2)?;
    let mut sigma_sq = Rational::zero();
    for k in 1..=p {
        for l in 1..=p {
            let pi = canonical_two_row_partition(TwoRowPattern::Pair { k, l }, p)?;
            sigma_sq += kappa_pi(ev, g, &pi, layout)?;
        }
    }
    sigma_sq /= Rational::from(BigInt::from((p * p) as i64));

    let kappa2 = exact_cumulant_polynomial(ev, g, 2)?.to_standard();
    let w = kappa2.coeff(2 * (p - 1));
    let sigma_hom_sq = w.clone();

    let a_r = if w.is_positive() {
        let w_f = w.to_f64().unwrap_or(f64::NAN);
        let mut list = Vec::new();
        for r in 2..=r_max {
            let v = if r == 2 {
                w.clone()
            } else {
                exact_cumulant_polynomial(ev, g, r)?
                    .to_standard()
                    .coeff((p - 1) * r)
            };
            list.push(v.to_f64().unwrap_or(f64::NAN) / w_f.powf(r as f64 / 2.0));
        }
        Some(list)
    } else {
        None
    };

    let regime = if sigma_sq.is_zero() {
        Regime::HomogeneousSingular
    } else {
        Regime::Generic
    };
    Ok(LimitReport {
        sigma_sq,
        sigma_hom_sq,
        a_r,
        regime,
    })
}

/// Checks `|κ^{(r)}(S_n)|` at each given `n` against both cumulant bounds
/// with `A = 1`: the dependency-graph bound `N (2D)^{r−1} r^{r−2}` with
/// `N = n^p`, `D = p² n^{p−1}`, and the homogeneous bound
/// `(p²)^r (2r)^{r−1} n^{(p−1)r}`. Exact integer comparisons; `r = 1` is
/// trivially true.
pub fn cumulant_bound_check(
    ev: &mut CircleEvaluator,
    g: &Multigraph,
    r: usize,
    n_values: &[u64],
) -> Result<bool, MomentsError> {
    if r == 0 || r > MAX_CUMULANT_ORDER {
        return Err(MomentsError::OrderBound(r));
    }
    if r == 1 {
        return Ok(true);
    }
    let p = g.vertex_count() as u32;
    let poly = exact_cumulant_polynomial(ev, g, r)?;
    let rr = r as u32;
    for &n in n_values {
        let n_big = BigInt::from(n);
        let value = poly.evaluate(&n_big);
        let abs = if value.is_negative() { -value } else { value };

        let n_pow = |e: u32| n_big.pow(e);
        let generic = Rational::from(
            n_pow(p)
                * (BigInt::from(2) * BigInt::from(p * p) * n_pow(p - 1)).pow(rr - 1)
                * BigInt::from(r as u64).pow(rr - 2),
        );
        let homogeneous = Rational::from(
            BigInt::from(p * p).pow(rr)
                * (BigInt::from(2 * r as u64)).pow(rr - 1)
                * n_pow((p - 1) * rr),
        );
        if abs > generic || abs > homogeneous {
            return Ok(false);
        }
    }
    Ok(true)
}
