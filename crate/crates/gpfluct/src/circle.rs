//! Exact rational evaluation of monomial observables M_G on the unit circle
//! via graph reductions, with a deterministic quadrature fallback for graphs
//! the rules do not reach.
//!
//! The engine repeatedly applies, in priority order: isolated-vertex
//! deletion, connected-component and cut-vertex factorization, the pendant
//! rule, the degree-2 rule, and the degree-3 Fourier rule. Every firing
//! strictly decreases the vertex count of each remaining part, so the
//! reduction terminates even though the degree-2 rule raises edge
//! multiplicities. Exact values are memoized by canonical key.

use crate::multigraph::{CanonicalKey, GraphError, Multigraph, MAX_CANON_VERTICES};
use crate::rational::{rat, Rational};
use num::{BigInt, One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

/// Default absolute tolerance for the quadrature fallback.
pub const DEFAULT_QUAD_TOL: f64 = 1e-7;

/// Dimension cap for the fallback; adaptive quadrature beyond 6 circle
/// coordinates is not reliable at desk scale, so the engine refuses.
pub const MAX_QUAD_VERTICES: usize = 6;

#[derive(Debug, Error)]
pub enum CircleError {
    #[error("graph has {0} vertices; the exact engine supports at most {MAX_CANON_VERTICES}")]
    VertexBound(usize),
    #[error("quadrature fallback supports at most {MAX_QUAD_VERTICES} vertices, got {0}")]
    QuadratureBound(usize),
    #[error(
        "quadrature failed to reach tolerance {tol} for graph class {key}: estimated error {err}"
    )]
    QuadratureNonConvergence {
        key: String,
        tol: f64,
        err: f64,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A finite linear combination of multigraphs with exact coefficients.
/// Terms with the same canonical key are merged; zero coefficients are
/// dropped.
#[derive(Debug, Clone, Default)]
pub struct GraphCombination {
    terms: BTreeMap<CanonicalKey, (Rational, Multigraph)>,
}

impl GraphCombination {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, coeff: Rational, graph: Multigraph) {
        let key = graph
            .canonical_key()
            .expect("combination graphs stay within the vertex bound");
        let entry = self
            .terms
            .entry(key.clone())
            .or_insert_with(|| (Rational::zero(), graph));
        entry.0 += coeff;
        if entry.0.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Rational, &Multigraph)> {
        self.terms.values().map(|(c, g)| (c, g))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient_of(&self, g: &Multigraph) -> Rational {
        g.canonical_key()
            .ok()
            .and_then(|k| self.terms.get(&k).map(|(c, _)| c.clone()))
            .unwrap_or_else(Rational::zero)
    }
}

fn binom(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

// ---- small dense polynomials in the distance variable D -------------------

type DPoly = Vec<Rational>;

fn dp_add_term(p: &mut DPoly, deg: usize, c: Rational) {
    if c.is_zero() {
        return;
    }
    if p.len() <= deg {
        p.resize(deg + 1, Rational::zero());
    }
    p[deg] += c;
}

fn dp_add_scaled(p: &mut DPoly, q: &DPoly, scale: &Rational) {
    for (deg, c) in q.iter().enumerate() {
        dp_add_term(p, deg, c * scale);
    }
}

fn dp_mul(p: &DPoly, q: &DPoly) -> DPoly {
    let mut out = DPoly::new();
    for (i, a) in p.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for (j, b) in q.iter().enumerate() {
            dp_add_term(&mut out, i + j, a * b);
        }
    }
    out
}

fn dp_trim(mut p: DPoly) -> DPoly {
    while p.last().is_some_and(Zero::is_zero) {
        p.pop();
    }
    p
}

/// `(alpha + beta·D)^k` as a polynomial in D.
fn affine_pow(alpha: &Rational, beta: &Rational, k: usize) -> DPoly {
    let mut out = vec![Rational::one()];
    let base = dp_trim(vec![alpha.clone(), beta.clone()]);
    for _ in 0..k {
        out = dp_mul(&out, &base);
    }
    out
}

/// Polynomials in the integration variable t whose coefficients are
/// polynomials in D.
type TPoly = Vec<DPoly>;

fn tp_mul(p: &TPoly, q: &TPoly) -> TPoly {
    let mut out: TPoly = vec![DPoly::new(); p.len() + q.len()];
    for (i, a) in p.iter().enumerate() {
        if a.is_empty() {
            continue;
        }
        for (j, b) in q.iter().enumerate() {
            if b.is_empty() {
                continue;
            }
            let prod = dp_mul(a, b);
            dp_add_scaled(&mut out[i + j], &prod, &Rational::one());
        }
    }
    out
}

/// `∫_0^{alpha + beta·D} Σ_m c_m(D) t^m dt` as a polynomial in D.
fn tp_integrate(tp: &TPoly, alpha: &Rational, beta: &Rational) -> DPoly {
    let mut out = DPoly::new();
    for (m, cm) in tp.iter().enumerate() {
        if cm.is_empty() {
            continue;
        }
        let upper = affine_pow(alpha, beta, m + 1);
        let term = dp_mul(cm, &upper);
        dp_add_scaled(&mut out, &term, &rat(1, m as i64 + 1));
    }
    out
}

/// The polynomial `P(D)` with `∫_𝕋 d(x,y)^a d(x,z)^b dx = P(d(y,z))`, split
/// into the four range pieces of the circle distance and integrated
/// symbolically. For a = b = 1 this is `(2/3)D³ − (1/2)D² + 1/12`.
pub fn degree2_distance_polynomial(a: u32, b: u32) -> Vec<Rational> {
    let half = rat(1, 2);
    let zero = Rational::zero();
    let one = Rational::one();
    let minus_one = rat(-1, 1);

    // ∫_0^D t^a (D−t)^b dt
    let mut tp: TPoly = vec![DPoly::new(); (a + b + 1) as usize];
    for k in 0..=b {
        let sign = if k % 2 == 0 { 1 } else { -1 };
        let c = Rational::from(binom(b, k) * BigInt::from(sign));
        dp_add_term(&mut tp[(a + k) as usize], (b - k) as usize, c);
    }
    let mut total = tp_integrate(&tp, &zero, &one);

    // ∫_0^{1/2−D} t^a (D+t)^b dt  and the (a ↔ b) mirror
    for (a, b) in [(a, b), (b, a)] {
        let mut tp: TPoly = vec![DPoly::new(); (a + b + 1) as usize];
        for l in 0..=b {
            let c = Rational::from(binom(b, l));
            dp_add_term(&mut tp[(a + b - l) as usize], l as usize, c);
        }
        let piece = tp_integrate(&tp, &half, &minus_one);
        dp_add_scaled(&mut total, &piece, &one);
    }

    // ∫_{1/2−D}^{1/2} t^a (1−D−t)^b dt, substituted t = 1/2 − s:
    // ∫_0^D (1/2 − s)^a (1/2 − D + s)^b ds
    let mut f1: TPoly = vec![DPoly::new(); (a + 1) as usize];
    for i in 0..=a {
        let sign = if i % 2 == 0 { 1 } else { -1 };
        let mut c = Rational::from(binom(a, i) * BigInt::from(sign));
        for _ in 0..(a - i) {
            c *= &half;
        }
        dp_add_term(&mut f1[i as usize], 0, c);
    }
    let mut f2: TPoly = vec![DPoly::new(); (b + 1) as usize];
    for l in 0..=b {
        let base = affine_pow(&half, &minus_one, (b - l) as usize);
        dp_add_scaled(&mut f2[l as usize], &base, &Rational::from(binom(b, l)));
    }
    let piece = tp_integrate(&tp_mul(&f1, &f2), &zero, &one);
    dp_add_scaled(&mut total, &piece, &one);

    dp_trim(total)
}

// ---- reduction rules -------------------------------------------------------

/// Pendant rule: if `x` has all its edges to a single neighbor with
/// multiplicity `a`, then `M_G = M_{G∖x} / (2^a (a+1))`.
pub fn pendant_rule(g: &Multigraph, x: usize) -> Option<GraphCombination> {
    if x == 0 || x > g.vertex_count() || g.loop_mult(x) > 0 {
        return None;
    }
    let nb = g.neighbors(x);
    if nb.len() != 1 {
        return None;
    }
    let a = nb[0].1;
    let denom = BigInt::from(2).pow(a) * BigInt::from(a + 1);
    let mut comb = GraphCombination::new();
    comb.push(Rational::new(BigInt::one(), denom), g.remove_vertex(x));
    Some(comb)
}

/// Degree-2 rule: if `x` has exactly two distinct neighbors `y`, `z` with
/// multiplicities `a`, `b`, integrating out `x` replaces `M_G` by the
/// combination `Σ_j c_j · M_{(G∖x) + (y,z)^j}` where `Σ_j c_j D^j` is
/// `degree2_distance_polynomial(a, b)`.
pub fn degree2_rule(g: &Multigraph, x: usize) -> Option<GraphCombination> {
    if x == 0 || x > g.vertex_count() || g.loop_mult(x) > 0 {
        return None;
    }
    let nb = g.neighbors(x);
    if nb.len() != 2 {
        return None;
    }
    let ((y, a), (z, b)) = (nb[0], nb[1]);
    let poly = degree2_distance_polynomial(a, b);
    let base = g.remove_vertex(x);
    let shift = |v: usize| if v > x { v - 1 } else { v };
    let (y, z) = (shift(y), shift(z));
    let mut comb = GraphCombination::new();
    for (j, c) in poly.into_iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let mut term = base.clone();
        if j > 0 {
            term.add_edge(y, z, j as u32).unwrap();
        }
        comb.push(c, term);
    }
    Some(comb)
}

/// Degree-3 Fourier rule: if `x` has exactly three distinct neighbors, each
/// with multiplicity 1, then integrating out `x` gives
/// `(1/4)[F(u,v) + F(u,w) + F(v,w)] + 1/64` with
/// `F(s,t) = (2/3)d(s,t)³ − (1/2)d(s,t)² + 1/48`; the cross term of the
/// Fourier expansion vanishes because three odd frequencies cannot sum to 0.
pub fn degree3_fourier_rule(g: &Multigraph, x: usize) -> Option<GraphCombination> {
    if x == 0 || x > g.vertex_count() || g.loop_mult(x) > 0 {
        return None;
    }
    let nb = g.neighbors(x);
    if nb.len() != 3 || nb.iter().any(|&(_, m)| m != 1) {
        return None;
    }
    let base = g.remove_vertex(x);
    let shift = |v: usize| if v > x { v - 1 } else { v };
    let pairs = [
        (shift(nb[0].0), shift(nb[1].0)),
        (shift(nb[0].0), shift(nb[2].0)),
        (shift(nb[1].0), shift(nb[2].0)),
    ];
    let mut comb = GraphCombination::new();
    // constant part: 3 · (1/4)(1/48) + 1/64 = 1/32
    comb.push(rat(1, 32), base.clone());
    for (s, t) in pairs {
        let mut cubic = base.clone();
        cubic.add_edge(s, t, 3).unwrap();
        comb.push(rat(1, 6), cubic);
        let mut square = base.clone();
        square.add_edge(s, t, 2).unwrap();
        comb.push(rat(-1, 8), square);
    }
    Some(comb)
}

/// Articulation vertices of a connected loop-free graph (1-based).
fn articulation_vertices(g: &Multigraph) -> Vec<usize> {
    let n = g.vertex_count();
    let mut disc = vec![0usize; n + 1];
    let mut low = vec![0usize; n + 1];
    let mut out = BTreeSet::new();
    let mut timer = 1usize;

    fn dfs(
        g: &Multigraph,
        u: usize,
        parent: usize,
        timer: &mut usize,
        disc: &mut [usize],
        low: &mut [usize],
        out: &mut BTreeSet<usize>,
    ) {
        disc[u] = *timer;
        low[u] = *timer;
        *timer += 1;
        let mut children = 0;
        for (v, _) in g.neighbors(u) {
            if disc[v] == 0 {
                children += 1;
                dfs(g, v, u, timer, disc, low, out);
                low[u] = low[u].min(low[v]);
                if parent != 0 && low[v] >= disc[u] {
                    out.insert(u);
                }
            } else if v != parent {
                low[u] = low[u].min(disc[v]);
            }
        }
        if parent == 0 && children > 1 {
            out.insert(u);
        }
    }

    for start in 1..=n {
        if disc[start] == 0 {
            dfs(g, start, 0, &mut timer, &mut disc, &mut low, &mut out);
        }
    }
    out.into_iter().collect()
}

/// Splits a connected graph at a cut vertex `v`: one part per component of
/// `g − v`, each together with its own copy of `v`.
fn split_at_cut(g: &Multigraph, v: usize) -> Vec<Multigraph> {
    let n = g.vertex_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        if parent[x] != x {
            let r = find(parent, parent[x]);
            parent[x] = r;
        }
        parent[x]
    }
    for (a, b, _) in g.edges() {
        if a != v && b != v {
            let (x, y) = (find(&mut parent, a - 1), find(&mut parent, b - 1));
            parent[x] = y;
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for u in 1..=n {
        if u == v || g.is_isolated(u) {
            continue;
        }
        groups
            .entry(find(&mut parent, u - 1))
            .or_default()
            .push(u);
    }
    groups
        .into_values()
        .map(|mut vs| {
            vs.push(v);
            vs.sort_unstable();
            g.induced(&vs)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum CircleValue {
    Exact(Rational),
    Approx(f64),
}

impl CircleValue {
    pub fn as_f64(&self) -> f64 {
        match self {
            CircleValue::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            CircleValue::Approx(x) => *x,
        }
    }

    pub fn exact_value(&self) -> Option<&Rational> {
        match self {
            CircleValue::Exact(r) => Some(r),
            CircleValue::Approx(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvaluationResult {
    pub value: CircleValue,
    /// Canonical keys of the subgraphs that needed quadrature.
    pub fallback_graphs: Vec<CanonicalKey>,
    /// Per-fallback quadrature tolerance; present iff not exact.
    pub tolerance: Option<f64>,
}

impl EvaluationResult {
    pub fn exact(&self) -> bool {
        self.fallback_graphs.is_empty()
    }
}

#[derive(Debug, Clone)]
enum Reduced {
    Exact(Rational),
    Approx(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Action {
    SplitCut(usize),
    Pendant(usize),
    Degree2(usize),
    Degree3(usize),
}

/// Deterministic reduction engine with a per-instance memo table keyed by
/// canonical key. Not shared across threads; give each worker its own
/// evaluator.
pub struct CircleEvaluator {
    exact_memo: HashMap<CanonicalKey, Rational>,
    approx_memo: HashMap<CanonicalKey, f64>,
    quad_tol: f64,
    shuffle: Option<ChaCha8Rng>,
}

impl Default for CircleEvaluator {
    fn default() -> Self {
        Self::new()
    }
}

impl CircleEvaluator {
    pub fn new() -> Self {
        Self {
            exact_memo: HashMap::new(),
            approx_memo: HashMap::new(),
            quad_tol: DEFAULT_QUAD_TOL,
            shuffle: None,
        }
    }

    pub fn with_quad_tol(tol: f64) -> Self {
        let mut ev = Self::new();
        ev.quad_tol = tol;
        ev
    }

    /// Diagnostic mode: picks uniformly among all admissible rule firings
    /// instead of following the fixed priority. Used to check confluence.
    pub fn with_shuffled_rules(seed: u64) -> Self {
        let mut ev = Self::new();
        ev.shuffle = Some(ChaCha8Rng::seed_from_u64(seed));
        ev
    }

    /// M_G(𝕋): the integral of the product of circle distances (with edge
    /// multiplicity as power) over independent uniform points. Loopy input
    /// evaluates to exactly 0.
    pub fn evaluate(&mut self, g: &Multigraph) -> Result<EvaluationResult, CircleError> {
        if g.vertex_count() > MAX_CANON_VERTICES {
            return Err(CircleError::VertexBound(g.vertex_count()));
        }
        let mut fallbacks = BTreeSet::new();
        let value = self.reduce(g, &mut fallbacks)?;
        let tolerance = (!fallbacks.is_empty()).then_some(self.quad_tol);
        Ok(EvaluationResult {
            value: match value {
                Reduced::Exact(r) => CircleValue::Exact(r),
                Reduced::Approx(x) => CircleValue::Approx(x),
            },
            fallback_graphs: fallbacks.into_iter().collect(),
            tolerance,
        })
    }

    /// Convenience wrapper for callers that require exactness.
    pub fn evaluate_exact(&mut self, g: &Multigraph) -> Result<Option<Rational>, CircleError> {
        let res = self.evaluate(g)?;
        Ok(match res.value {
            CircleValue::Exact(r) => Some(r),
            CircleValue::Approx(_) => None,
        })
    }

    fn reduce(
        &mut self,
        g: &Multigraph,
        fallbacks: &mut BTreeSet<CanonicalKey>,
    ) -> Result<Reduced, CircleError> {
        if g.has_loop() {
            return Ok(Reduced::Exact(Rational::zero()));
        }
        let live: Vec<usize> = (1..=g.vertex_count())
            .filter(|&v| !g.is_isolated(v))
            .collect();
        let g = if live.len() == g.vertex_count() {
            g.clone()
        } else {
            g.induced(&live)
        };
        if g.vertex_count() == 0 {
            return Ok(Reduced::Exact(Rational::one()));
        }
        let key = g.canonical_key()?;
        if let Some(v) = self.exact_memo.get(&key) {
            return Ok(Reduced::Exact(v.clone()));
        }
        if let Some(&v) = self.approx_memo.get(&key) {
            fallbacks.insert(key);
            return Ok(Reduced::Approx(v));
        }

        let comps = g.connected_components();
        if comps.len() > 1 {
            let parts: Vec<Multigraph> = comps.iter().map(|c| g.induced(c)).collect();
            let value = self.product(&parts, fallbacks)?;
            self.memoize(key, &value);
            return Ok(value);
        }

        let value = match self.choose_action(&g) {
            Some(Action::SplitCut(v)) => {
                let parts = split_at_cut(&g, v);
                self.product(&parts, fallbacks)?
            }
            Some(action) => {
                let comb = match action {
                    Action::Pendant(v) => pendant_rule(&g, v),
                    Action::Degree2(v) => degree2_rule(&g, v),
                    Action::Degree3(v) => degree3_fourier_rule(&g, v),
                    Action::SplitCut(_) => unreachable!(),
                }
                .expect("chosen rule is applicable");
                self.combine(&comb, fallbacks)?
            }
            None => {
                let approx = quadrature_fallback(&g, self.quad_tol)?;
                fallbacks.insert(key.clone());
                self.approx_memo.insert(key.clone(), approx);
                return Ok(Reduced::Approx(approx));
            }
        };
        self.memoize(key, &value);
        Ok(value)
    }

    fn memoize(&mut self, key: CanonicalKey, value: &Reduced) {
        if let Reduced::Exact(r) = value {
            self.exact_memo.insert(key, r.clone());
        }
    }

    fn choose_action(&mut self, g: &Multigraph) -> Option<Action> {
        let n = g.vertex_count();
        let cuts = articulation_vertices(g);
        let pendants: Vec<usize> = (1..=n).filter(|&v| pendant_rule(g, v).is_some()).collect();
        let deg2: Vec<usize> = (1..=n).filter(|&v| degree2_rule(g, v).is_some()).collect();
        let deg3: Vec<usize> = (1..=n)
            .filter(|&v| degree3_fourier_rule(g, v).is_some())
            .collect();
        match &mut self.shuffle {
            None => cuts
                .first()
                .map(|&v| Action::SplitCut(v))
                .or_else(|| pendants.first().map(|&v| Action::Pendant(v)))
                .or_else(|| deg2.first().map(|&v| Action::Degree2(v)))
                .or_else(|| deg3.first().map(|&v| Action::Degree3(v))),
            Some(rng) => {
                let mut pool: Vec<Action> = Vec::new();
                pool.extend(cuts.iter().map(|&v| Action::SplitCut(v)));
                pool.extend(pendants.iter().map(|&v| Action::Pendant(v)));
                pool.extend(deg2.iter().map(|&v| Action::Degree2(v)));
                pool.extend(deg3.iter().map(|&v| Action::Degree3(v)));
                if pool.is_empty() {
                    None
                } else {
                    let i = rng.gen_range(0..pool.len());
                    Some(pool[i])
                }
            }
        }
    }

    fn product(
        &mut self,
        parts: &[Multigraph],
        fallbacks: &mut BTreeSet<CanonicalKey>,
    ) -> Result<Reduced, CircleError> {
        let mut values = Vec::with_capacity(parts.len());
        for part in parts {
            values.push(self.reduce(part, fallbacks)?);
        }
        if values
            .iter()
            .any(|v| matches!(v, Reduced::Exact(r) if r.is_zero()))
        {
            return Ok(Reduced::Exact(Rational::zero()));
        }
        if values.iter().all(|v| matches!(v, Reduced::Exact(_))) {
            let mut acc = Rational::one();
            for v in values {
                if let Reduced::Exact(r) = v {
                    acc *= r;
                }
            }
            Ok(Reduced::Exact(acc))
        } else {
            let mut acc = 1.0;
            for v in values {
                acc *= match v {
                    Reduced::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
                    Reduced::Approx(x) => x,
                };
            }
            Ok(Reduced::Approx(acc))
        }
    }

    fn combine(
        &mut self,
        comb: &GraphCombination,
        fallbacks: &mut BTreeSet<CanonicalKey>,
    ) -> Result<Reduced, CircleError> {
        let mut values = Vec::with_capacity(comb.len());
        for (coeff, graph) in comb.terms() {
            values.push((coeff.clone(), self.reduce(graph, fallbacks)?));
        }
        if values.iter().all(|(_, v)| matches!(v, Reduced::Exact(_))) {
            let mut acc = Rational::zero();
            for (coeff, v) in values {
                if let Reduced::Exact(r) = v {
                    acc += coeff * r;
                }
            }
            Ok(Reduced::Exact(acc))
        } else {
            let mut acc = 0.0;
            for (coeff, v) in values {
                let x = match v {
                    Reduced::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
                    Reduced::Approx(x) => x,
                };
                acc += coeff.to_f64().unwrap_or(f64::NAN) * x;
            }
            Ok(Reduced::Approx(acc))
        }
    }
}

// ---- quadrature fallback ---------------------------------------------------

fn circle_dist(s: f64, t: f64) -> f64 {
    let u = (s - t).abs();
    u.min(1.0 - u)
}

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

struct QuadCtx<'a> {
    g: &'a Multigraph,
    k: usize,
    level_budget: f64,
    gl: (Vec<f64>, Vec<f64>),
}

impl QuadCtx<'_> {
    /// Integrates coordinate `v` (1-based vertex), with `coords[0..v-1]`
    /// already fixed. The last coordinate is integrated exactly piecewise.
    fn level(&self, coords: &mut Vec<f64>, v: usize) -> Result<f64, (f64, f64)> {
        if v == self.k {
            return Ok(self.fixed_factor(coords) * self.exact_line(coords));
        }
        // seed panel boundaries at the kinks induced by already-fixed
        // neighbors of v
        let mut seeds = vec![0.0, 1.0];
        for (u, _) in self.g.neighbors(v) {
            if u < v {
                let c = coords[u - 1];
                seeds.push(c);
                seeds.push((c + 0.5).fract());
            }
        }
        seeds.sort_by(f64::total_cmp);
        seeds.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let mut total = 0.0;
        let mut err = 0.0;
        for w in seeds.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a < 1e-12 {
                continue;
            }
            let mut f = |x: f64, coords: &mut Vec<f64>| -> Result<f64, (f64, f64)> {
                coords[v - 1] = x;
                self.level(coords, v + 1)
            };
            let budget = self.level_budget * (b - a);
            let fa = f(a, coords)?;
            let fm = f(0.5 * (a + b), coords)?;
            let fb = f(b, coords)?;
            let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            let (val, e) =
                self.simpson(&mut f, coords, a, b, fa, fm, fb, whole, budget, 0)?;
            total += val;
            err += e;
        }
        if err > self.level_budget * 1.0001 {
            return Err((total, err));
        }
        Ok(total)
    }

    #[allow(clippy::too_many_arguments)]
    fn simpson(
        &self,
        f: &mut impl FnMut(f64, &mut Vec<f64>) -> Result<f64, (f64, f64)>,
        coords: &mut Vec<f64>,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        budget: f64,
        depth: usize,
    ) -> Result<(f64, f64), (f64, f64)> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm, coords)?;
        let frm = f(rm, coords)?;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * budget || depth >= 30 {
            return Ok((left + right + delta / 15.0, delta.abs() / 15.0));
        }
        let (lv, le) = self.simpson(f, coords, a, m, fa, flm, fm, left, budget / 2.0, depth + 1)?;
        let (rv, re) = self.simpson(f, coords, m, b, fm, frm, fb, right, budget / 2.0, depth + 1)?;
        Ok((lv + rv, le + re))
    }

    /// Product of the distance factors among the fixed vertices `1..k`.
    fn fixed_factor(&self, coords: &[f64]) -> f64 {
        let mut acc = 1.0;
        for (u, w, m) in self.g.edges() {
            if u < self.k && w < self.k {
                acc *= circle_dist(coords[u - 1], coords[w - 1]).powi(m as i32);
            }
        }
        acc
    }

    /// Exact piecewise Gauss–Legendre integral over the last coordinate: the
    /// integrand is a polynomial between consecutive kinks.
    fn exact_line(&self, coords: &[f64]) -> f64 {
        let nbs = self.g.neighbors(self.k);
        let mut cuts = vec![0.0, 1.0];
        for &(u, _) in &nbs {
            let c = coords[u - 1];
            cuts.push(c);
            cuts.push((c + 0.5).fract());
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let (nodes, weights) = &self.gl;
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a < 1e-14 {
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let mut piece = 0.0;
            for (x, wt) in nodes.iter().zip(weights) {
                let t = mid + half * x;
                let mut val = 1.0;
                for &(u, m) in &nbs {
                    val *= circle_dist(t, coords[u - 1]).powi(m as i32);
                }
                piece += wt * val;
            }
            total += half * piece;
        }
        total
    }
}

/// Deterministic adaptive quadrature of `M_G(𝕋)` to absolute tolerance
/// `tol`. One circle coordinate is pinned to 0 (the integrand is invariant
/// under rotation), the innermost coordinate is integrated exactly piecewise,
/// and the remaining coordinates use adaptive Simpson panels seeded at the
/// distance kinks.
pub fn quadrature_fallback(g: &Multigraph, tol: f64) -> Result<f64, CircleError> {
    if g.has_loop() {
        return Ok(0.0);
    }
    let live: Vec<usize> = (1..=g.vertex_count())
        .filter(|&v| !g.is_isolated(v))
        .collect();
    let g = g.induced(&live);
    let k = g.vertex_count();
    if k > MAX_QUAD_VERTICES {
        return Err(CircleError::QuadratureBound(k));
    }
    if k <= 1 {
        return Ok(1.0);
    }
    let max_deg: u32 = g.edges().map(|(_, _, m)| m).sum();
    let adaptive_dims = k.saturating_sub(2).max(1);
    let ctx = QuadCtx {
        g: &g,
        k,
        level_budget: tol / adaptive_dims as f64,
        gl: gauss_legendre((max_deg as usize) / 2 + 2),
    };
    let mut coords = vec![0.0; k];
    ctx.level(&mut coords, 2).map_err(|(_, err)| {
        CircleError::QuadratureNonConvergence {
            key: g.canonical_key().map(|k| k.hex()).unwrap_or_default(),
            tol,
            err,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle_plus(mult_extra: u32) -> Multigraph {
        let mut g = Multigraph::complete(3);
        if mult_extra > 0 {
            g.add_edge(1, 2, mult_extra).unwrap();
        }
        g
    }

    #[test]
    fn pendant_coefficients() {
        for (a, num, den) in [(1u32, 1i64, 4i64), (2, 1, 12), (3, 1, 32), (4, 1, 80)] {
            let comb = pendant_rule(&Multigraph::bond(a), 1).unwrap();
            let (coeff, rest) = comb.terms().next().unwrap();
            assert_eq!(coeff, &rat(num, den), "a = {}", a);
            assert_eq!(rest.vertex_count(), 1);
        }
        // inapplicable: middle of a path has two neighbors
        assert!(pendant_rule(&Multigraph::path(3), 2).is_none());
    }

    #[test]
    fn degree2_polynomial_simple_case() {
        let p = degree2_distance_polynomial(1, 1);
        assert_eq!(p, vec![rat(1, 12), rat(0, 1), rat(-1, 2), rat(2, 3)]);
        // D = 0 degenerates to the pendant value for a doubled edge
        assert_eq!(p[0], rat(1, 12));
        // D = 1/2: evaluates to 1/24
        let d = rat(1, 2);
        let mut val = Rational::zero();
        let mut pow = Rational::one();
        for c in &p {
            val += c * &pow;
            pow *= &d;
        }
        assert_eq!(val, rat(1, 24));
    }

    #[test]
    fn degree2_polynomial_matches_closed_forms() {
        // Closed-form coefficients, written independently of the symbolic
        // integration: beta term, two mixed binomial sums, boundary sum.
        fn closed_form(a: u32, b: u32) -> Vec<Rational> {
            let n = (a + b + 1) as usize;
            let mut out = vec![Rational::zero(); n + 1];
            // a! b! / (a+b+1)! on D^{a+b+1}
            let mut beta = Rational::one();
            for i in 1..=(a + b + 1) {
                beta /= Rational::from(BigInt::from(i));
            }
            for i in 1..=a {
                beta *= Rational::from(BigInt::from(i));
            }
            for i in 1..=b {
                beta *= Rational::from(BigInt::from(i));
            }
            out[n] += beta;
            for (a, b) in [(a, b), (b, a)] {
                for j in 0..=(a + b + 1) {
                    let mut c = Rational::zero();
                    for k in 0..=j.min(b) {
                        let sign = if (j - k) % 2 == 0 { 1 } else { -1 };
                        let num = binom(b, k)
                            * binom(a + b + 1 - k, a + b + 1 - j)
                            * BigInt::from(sign);
                        let den = BigInt::from(2).pow(a + b + 1 - j)
                            * BigInt::from(a + b + 1 - k);
                        c += Rational::new(num, den);
                    }
                    out[j as usize] += c;
                }
            }
            for j in 0..=(a + b) {
                let mut c = Rational::zero();
                for k in (0..=j).step_by(2) {
                    for l in 0..=k {
                        if k - l > a || l > b {
                            continue;
                        }
                        let sign = if (j + l) % 2 == 0 { 1 } else { -1 };
                        let num = binom(a, k - l)
                            * binom(b, l)
                            * binom(a + b - k, a + b - j)
                            * BigInt::from(sign);
                        c += Rational::new(num, BigInt::from(k + 1));
                    }
                }
                c /= Rational::from(BigInt::from(2).pow(a + b));
                out[(j + 1) as usize] += c;
            }
            while out.last().is_some_and(num::Zero::is_zero) {
                out.pop();
            }
            out
        }

        for a in 1..=4u32 {
            for b in 1..=4u32 {
                assert_eq!(
                    degree2_distance_polynomial(a, b),
                    closed_form(a, b),
                    "a = {}, b = {}",
                    a,
                    b
                );
            }
        }
    }

    #[test]
    fn degree2_constant_term_matches_pendant_merge() {
        // When the two neighbors coincide on the circle (D = 0), the value
        // must match the pendant rule with a+b edges.
        for a in 1..=3u32 {
            for b in 1..=3u32 {
                let p = degree2_distance_polynomial(a, b);
                let merged = a + b;
                let expected = Rational::new(
                    BigInt::one(),
                    BigInt::from(2).pow(merged) * BigInt::from(merged + 1),
                );
                assert_eq!(p[0], expected, "a = {}, b = {}", a, b);
            }
        }
    }

    #[test]
    fn fourier_rule_reproduces_k4_identity() {
        let comb = degree3_fourier_rule(&Multigraph::complete(4), 4).unwrap();
        assert_eq!(comb.len(), 3);
        assert_eq!(comb.coefficient_of(&triangle_plus(3)), rat(1, 2));
        assert_eq!(comb.coefficient_of(&triangle_plus(2)), rat(-3, 8));
        assert_eq!(comb.coefficient_of(&triangle_plus(0)), rat(1, 32));
    }

    #[test]
    fn fourier_rule_nonadjacent_constant() {
        // star K_{1,3}: three pairwise non-adjacent neighbors; the constant
        // term on the empty 3-vertex rest is 1/32
        let mut star = Multigraph::new(4);
        for v in 2..=4 {
            star.add_edge(1, v, 1).unwrap();
        }
        let comb = degree3_fourier_rule(&star, 1).unwrap();
        let empty = Multigraph::new(3);
        assert_eq!(comb.coefficient_of(&empty), rat(1, 32));
        // and full evaluation equals the cut-vertex factorization value (1/4)^3
        let mut ev = CircleEvaluator::new();
        let res = ev.evaluate(&star).unwrap();
        assert_eq!(res.value.exact_value().unwrap(), &rat(1, 64));
    }

    #[test]
    fn evaluate_basic_values() {
        let mut ev = CircleEvaluator::new();
        let one_vertex = Multigraph::new(1);
        assert_eq!(
            ev.evaluate(&one_vertex).unwrap().value.exact_value().unwrap(),
            &Rational::one()
        );
        assert_eq!(
            ev.evaluate(&Multigraph::bond(1))
                .unwrap()
                .value
                .exact_value()
                .unwrap(),
            &rat(1, 4)
        );
        assert_eq!(
            ev.evaluate(&Multigraph::bond(2))
                .unwrap()
                .value
                .exact_value()
                .unwrap(),
            &rat(1, 12)
        );
        // triangle: reduced by degree-2 then pendants
        assert_eq!(
            ev.evaluate(&Multigraph::complete(3))
                .unwrap()
                .value
                .exact_value()
                .unwrap(),
            &rat(13, 960)
        );
        // loopy graph evaluates to 0 exactly
        let mut loopy = Multigraph::new(2);
        loopy.add_edge(1, 1, 1).unwrap();
        loopy.add_edge(1, 2, 1).unwrap();
        let res = ev.evaluate(&loopy).unwrap();
        assert!(res.exact());
        assert_eq!(res.value.exact_value().unwrap(), &Rational::zero());
    }

    #[test]
    fn evaluate_k4_exactly() {
        let mut ev = CircleEvaluator::new();
        let res = ev.evaluate(&Multigraph::complete(4)).unwrap();
        assert!(res.exact());
        assert_eq!(res.value.exact_value().unwrap(), &rat(11, 71680));
    }

    #[test]
    fn quadrature_matches_exact_values() {
        let edge = quadrature_fallback(&Multigraph::bond(1), 1e-8).unwrap();
        assert!((edge - 0.25).abs() <= 1e-8, "edge: {}", edge);
        let double = quadrature_fallback(&Multigraph::bond(2), 1e-8).unwrap();
        assert!((double - 1.0 / 12.0).abs() <= 1e-8, "double: {}", double);
        let tri = quadrature_fallback(&Multigraph::complete(3), 1e-8).unwrap();
        assert!((tri - 13.0 / 960.0).abs() <= 1e-8, "triangle: {}", tri);
        let k4 = quadrature_fallback(&Multigraph::complete(4), 1e-6).unwrap();
        assert!(
            (k4 - 11.0 / 71680.0).abs() <= 1e-6,
            "k4: {} vs {}",
            k4,
            11.0 / 71680.0
        );
    }

    #[test]
    fn memoization_is_sound() {
        // batch evaluation against fresh engines
        let graphs = vec![
            Multigraph::path(3),
            Multigraph::complete(4),
            Multigraph::path(3).disjoint_power(2),
            triangle_plus(2),
        ];
        let mut shared = CircleEvaluator::new();
        for g in &graphs {
            let batch = shared.evaluate(g).unwrap();
            let fresh = CircleEvaluator::new().evaluate(g).unwrap();
            assert_eq!(
                batch.value.exact_value().unwrap(),
                fresh.value.exact_value().unwrap()
            );
        }
    }

    #[test]
    fn monotone_bound_holds() {
        let mut ev = CircleEvaluator::new();
        for g in [
            Multigraph::path(3),
            Multigraph::complete(3),
            Multigraph::complete(4),
            Multigraph::bond(4),
        ] {
            let value = ev.evaluate(&g).unwrap().value.exact_value().unwrap().clone();
            assert!(!value.is_negative());
            let bound = Rational::new(
                BigInt::one(),
                BigInt::from(2).pow(g.total_multiplicity() as u32),
            );
            assert!(value <= bound, "value {} above (1/2)^|E|", value);
        }
    }

    #[test]
    fn shuffled_rule_order_is_confluent_on_small_graphs() {
        let graphs = vec![
            Multigraph::path(4),
            Multigraph::complete(4),
            triangle_plus(2),
            Multigraph::path(3).disjoint_power(2),
        ];
        for g in &graphs {
            let reference = CircleEvaluator::new()
                .evaluate(g)
                .unwrap()
                .value
                .exact_value()
                .unwrap()
                .clone();
            for seed in 0..6 {
                let got = CircleEvaluator::with_shuffled_rules(seed)
                    .evaluate(g)
                    .unwrap()
                    .value
                    .exact_value()
                    .unwrap()
                    .clone();
                assert_eq!(got, reference, "seed {} on {:?}", seed, g);
            }
        }
    }
}
