//! Quadrature rules for the one-dimensional auxiliary integrals.
//!
//! Two schemes cover every integral in the laboratory:
//!
//! * composite Gauss-Legendre over an explicit panel list. Panel edges are
//!   placed on the breakpoints of the integrand (support edges of truncated
//!   powers, dyadic radii, sampling radii), so piecewise-polynomial
//!   integrands are integrated exactly and fractional-power cusps sit on
//!   panel boundaries where optional geometric grading absorbs them;
//! * Gauss-Jacobi with endpoint exponents, for integrands that are a smooth
//!   factor times (b-s)^alpha (s-a)^beta. The weight is absorbed into the
//!   quadrature weights, which makes the scalar subordination identity exact
//!   to machine precision.
//!
//! Nodes are always interior, so integrands may be singular at panel edges.

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;
use gauss_quad::{FiniteAboveNegOneF64, GaussJacobi, GaussLegendre};
use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::Mutex;
use std::sync::OnceLock;

/// Minimum node count accepted for any rule.
pub const MIN_NODES: usize = 8;

/// Public view of a rule's construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SchemeInfo<S> {
    Composite { panels: usize, points: usize },
    Jacobi { alpha: f64, beta: f64, a: S, b: S },
}

#[derive(Clone, Debug)]
enum Scheme<S> {
    /// Gauss-Legendre with `points` nodes on every panel `[edges[i], edges[i+1]]`.
    Composite { edges: Vec<S>, points: usize },
    /// Gauss-Jacobi on `[a, b]` with weight (b-s)^alpha (s-a)^beta absorbed.
    Jacobi {
        alpha: f64,
        beta: f64,
        a: S,
        b: S,
        points: usize,
    },
}

#[derive(Clone, Debug)]
pub struct QuadratureRule<S> {
    nodes: Vec<S>,
    weights: Vec<S>,
    scheme: Scheme<S>,
    declared_tol: S,
}

/// Options for breakpoint-aligned composite rules.
#[derive(Clone, Copy, Debug)]
pub struct PanelBuild<S> {
    /// Gauss-Legendre points per panel.
    pub points: usize,
    /// Geometric grading levels applied at both ends of every panel
    /// (0 disables grading).
    pub grade_levels: u32,
    /// Width contraction per grading level.
    pub grade_factor: f64,
    /// Split panels wider than this.
    pub max_width: Option<S>,
    /// Uniformly refine until at least this many panels exist.
    pub min_panels: Option<usize>,
}

impl<S: Scalar> Default for PanelBuild<S> {
    fn default() -> Self {
        Self {
            points: 4,
            grade_levels: 0,
            grade_factor: 8.0,
            max_width: None,
            min_panels: None,
        }
    }
}

fn legendre_ref(points: usize) -> Vec<(f64, f64)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Vec<(f64, f64)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().expect("legendre cache");
    cache
        .entry(points)
        .or_insert_with(|| {
            let deg = NonZeroUsize::new(points).expect("positive point count");
            let mut pairs = GaussLegendre::new(deg).into_node_weight_pairs().into_vec();
            pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
            pairs
        })
        .clone()
}

fn jacobi_ref(points: usize, alpha: f64, beta: f64) -> Result<Vec<(f64, f64)>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64, u64), Vec<(f64, f64)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().expect("jacobi cache");
    let key = (points, alpha.to_bits(), beta.to_bits());
    if let Some(hit) = cache.get(&key) {
        return Ok(hit.clone());
    }
    let deg = NonZeroUsize::new(points)
        .ok_or_else(|| CoreError::InvalidRule("zero-node jacobi rule".into()))?;
    let bad = |name: &str, v: f64| CoreError::InvalidRule(format!("jacobi exponent {name} = {v} must exceed -1"));
    let alpha_c = FiniteAboveNegOneF64::new(alpha).ok_or_else(|| bad("alpha", alpha))?;
    let beta_c = FiniteAboveNegOneF64::new(beta).ok_or_else(|| bad("beta", beta))?;
    let mut pairs = GaussJacobi::new(deg, alpha_c, beta_c)
        .into_node_weight_pairs()
        .into_vec();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    cache.insert(key, pairs.clone());
    Ok(pairs)
}

/// Expands `[a, b]` into graded sub-edges contracting toward both endpoints.
fn grade_interval<S: Scalar>(a: S, b: S, levels: u32, factor: f64, out: &mut Vec<S>) {
    out.push(a);
    if levels == 0 {
        return;
    }
    let half = (b - a) * S::lit(0.5);
    let mid = a + half;
    for k in (1..=levels).rev() {
        out.push(a + half * S::lit(factor.powi(-(k as i32))));
    }
    out.push(mid);
    for k in 1..=levels {
        out.push(b - half * S::lit(factor.powi(-(k as i32))));
    }
}

impl<S: Scalar> QuadratureRule<S> {
    /// Composite Gauss-Legendre over consecutive panels of `edges`.
    pub fn composite(edges: Vec<S>, points: usize, declared_tol: S) -> Result<Self> {
        if edges.len() < 2 {
            return Err(CoreError::InvalidRule("need at least one panel".into()));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CoreError::InvalidRule("edges must increase strictly".into()));
        }
        if points == 0 {
            return Err(CoreError::InvalidRule("zero points per panel".into()));
        }
        let reference = legendre_ref(points);
        let mut nodes = Vec::with_capacity(points * (edges.len() - 1));
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in edges.windows(2) {
            let half = (w[1] - w[0]) * S::lit(0.5);
            let mid = w[0] + half;
            for &(u, wu) in &reference {
                nodes.push(mid + half * S::lit(u));
                weights.push(half * S::lit(wu));
            }
        }
        let rule = Self {
            nodes,
            weights,
            scheme: Scheme::Composite { edges, points },
            declared_tol,
        };
        rule.validate()?;
        Ok(rule)
    }

    /// Single-panel Gauss-Legendre on `[a, b]`.
    pub fn gauss_legendre(points: usize, a: S, b: S, declared_tol: S) -> Result<Self> {
        Self::composite(vec![a, b], points, declared_tol)
    }

    /// Breakpoint-aligned composite rule on `[lo, hi]`.
    ///
    /// Breakpoints outside `(lo, hi)` are dropped; near-coincident edges are
    /// merged. Grading and width/count controls come from `opts`.
    pub fn from_breakpoints(lo: S, hi: S, breakpoints: &[S], opts: PanelBuild<S>) -> Result<Self> {
        if !(hi > lo) {
            return Err(CoreError::InvalidRule("empty integration interval".into()));
        }
        let span = hi - lo;
        let merge_eps = span * S::lit(1e-12);
        let mut edges = Vec::with_capacity(breakpoints.len() + 2);
        edges.push(lo);
        let mut sorted: Vec<S> = breakpoints
            .iter()
            .copied()
            .filter(|&t| t > lo + merge_eps && t < hi - merge_eps)
            .collect();
        sorted.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
        for t in sorted {
            if t - *edges.last().expect("nonempty") > merge_eps {
                edges.push(t);
            }
        }
        edges.push(hi);

        // Width cap, then uniform refinement up to the panel floor.
        if let Some(max_w) = opts.max_width {
            let mut widened = Vec::with_capacity(edges.len());
            for w in edges.windows(2) {
                widened.push(w[0]);
                let width = w[1] - w[0];
                if width > max_w {
                    let parts = (width / max_w).ceil().as_f64() as usize;
                    for p in 1..parts {
                        widened.push(w[0] + width * S::lit(p as f64 / parts as f64));
                    }
                }
            }
            widened.push(hi);
            edges = widened;
        }
        if let Some(min_panels) = opts.min_panels {
            let have = edges.len() - 1;
            if have < min_panels {
                let split = min_panels.div_ceil(have);
                let mut refined = Vec::with_capacity(have * split + 1);
                for w in edges.windows(2) {
                    for p in 0..split {
                        refined.push(w[0] + (w[1] - w[0]) * S::lit(p as f64 / split as f64));
                    }
                }
                refined.push(hi);
                edges = refined;
            }
        }
        if opts.grade_levels > 0 {
            let mut graded = Vec::with_capacity(edges.len() * (2 * opts.grade_levels as usize + 2));
            for w in edges.windows(2) {
                grade_interval(w[0], w[1], opts.grade_levels, opts.grade_factor, &mut graded);
            }
            graded.push(hi);
            edges = graded;
        }
        Self::composite(edges, opts.points, S::lit(1e-10))
    }

    /// Gauss-Jacobi rule for integrands (b-s)^alpha (s-a)^beta * smooth(s).
    ///
    /// The weight function is absorbed: `integrate(g)` approximates
    /// `int_a^b (b-s)^alpha (s-a)^beta g(s) ds`.
    pub fn gauss_jacobi(points: usize, alpha: f64, beta: f64, a: S, b: S, declared_tol: S) -> Result<Self> {
        if !(alpha > -1.0 && beta > -1.0) {
            return Err(CoreError::InvalidRule(format!(
                "jacobi exponents ({alpha}, {beta}) must exceed -1"
            )));
        }
        if !(b > a) {
            return Err(CoreError::InvalidRule("empty integration interval".into()));
        }
        let reference = jacobi_ref(points, alpha, beta)?;
        let half = (b - a) * S::lit(0.5);
        let scale = half.powf(S::lit(alpha + beta + 1.0));
        let mut nodes = Vec::with_capacity(points);
        let mut weights = Vec::with_capacity(points);
        for &(u, wu) in &reference {
            nodes.push(a + half * S::lit(u + 1.0));
            weights.push(scale * S::lit(wu));
        }
        let rule = Self {
            nodes,
            weights,
            scheme: Scheme::Jacobi {
                alpha,
                beta,
                a,
                b,
                points,
            },
            declared_tol,
        };
        rule.validate()?;
        Ok(rule)
    }

    fn validate(&self) -> Result<()> {
        if self.nodes.len() < MIN_NODES {
            return Err(CoreError::InvalidRule(format!(
                "{} nodes, need at least {MIN_NODES}",
                self.nodes.len()
            )));
        }
        if self.nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CoreError::InvalidRule("nodes must increase strictly".into()));
        }
        if self.weights.iter().any(|w| !(*w > S::zero()) || !w.is_finite()) {
            return Err(CoreError::InvalidRule("weights must be positive".into()));
        }
        Ok(())
    }

    /// Same scheme with every panel split `factor` ways (composite) or
    /// `factor` times the node count (Jacobi).
    pub fn refined(&self, factor: usize) -> Result<Self> {
        assert!(factor >= 1);
        match &self.scheme {
            Scheme::Composite { edges, points } => {
                let mut refined = Vec::with_capacity((edges.len() - 1) * factor + 1);
                for w in edges.windows(2) {
                    for p in 0..factor {
                        refined.push(w[0] + (w[1] - w[0]) * S::lit(p as f64 / factor as f64));
                    }
                }
                refined.push(*edges.last().expect("nonempty edges"));
                Self::composite(refined, *points, self.declared_tol)
            }
            Scheme::Jacobi {
                alpha,
                beta,
                a,
                b,
                points,
            } => Self::gauss_jacobi(points * factor, *alpha, *beta, *a, *b, self.declared_tol),
        }
    }

    /// Same edges with a coarser panel split (for order diagnostics). Panels
    /// are merged pairwise; breakpoint edges at odd positions are kept.
    pub fn coarsened(&self) -> Result<Self> {
        match &self.scheme {
            Scheme::Composite { edges, points } => {
                let kept: Vec<S> = edges
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i % 2 == 0 || *i == edges.len() - 1)
                    .map(|(_, e)| *e)
                    .collect();
                Self::composite(kept, *points, self.declared_tol)
            }
            Scheme::Jacobi {
                alpha,
                beta,
                a,
                b,
                points,
            } => Self::gauss_jacobi((points / 2).max(MIN_NODES), *alpha, *beta, *a, *b, self.declared_tol),
        }
    }

    pub fn nodes(&self) -> &[S] {
        &self.nodes
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn declared_tol(&self) -> S {
        self.declared_tol
    }

    pub fn with_declared_tol(mut self, tol: S) -> Self {
        self.declared_tol = tol;
        self
    }

    /// Scheme introspection, mainly so integrand builders can tell whether a
    /// Jacobi weight has already been absorbed into the weights.
    pub fn scheme_info(&self) -> SchemeInfo<S> {
        match &self.scheme {
            Scheme::Composite { edges, points } => SchemeInfo::Composite {
                panels: edges.len() - 1,
                points: *points,
            },
            Scheme::Jacobi { alpha, beta, a, b, .. } => SchemeInfo::Jacobi {
                alpha: *alpha,
                beta: *beta,
                a: *a,
                b: *b,
            },
        }
    }

    pub fn panel_count(&self) -> usize {
        match &self.scheme {
            Scheme::Composite { edges, .. } => edges.len() - 1,
            Scheme::Jacobi { .. } => 1,
        }
    }

    pub fn integrate<F: FnMut(S) -> S>(&self, mut f: F) -> S {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(S::zero(), |acc, (&t, &w)| acc + w * f(t))
    }
}

/// Geometric edge sequence from `lo` to `hi` with `per_octave` panels per
/// doubling (at least one panel).
pub fn geometric_edges<S: Scalar>(lo: S, hi: S, per_octave: usize) -> Vec<S> {
    assert!(hi > lo && lo > S::zero() && per_octave > 0);
    let octaves = (hi / lo).as_f64().log2();
    let count = ((octaves * per_octave as f64).ceil() as usize).max(1);
    let mut edges = Vec::with_capacity(count + 1);
    for i in 0..count {
        edges.push(lo * S::lit(2f64.powf(octaves * i as f64 / count as f64)));
    }
    edges.push(hi);
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::beta::beta;

    #[test]
    fn legendre_is_exact_to_degree() {
        // 4-point Gauss integrates degree 7 exactly.
        let rule = QuadratureRule::<f64>::composite(vec![0.0, 0.5, 1.0], 4, 1e-14).unwrap();
        let got = rule.integrate(|x| x.powi(7));
        assert!((got - 0.125).abs() < 1e-15, "got {got}");
        let linear = rule.integrate(|x| 3.0 * x - 1.0);
        assert!((linear - 0.5).abs() < 1e-15);
    }

    #[test]
    fn composite_edge_at_kink_is_exact() {
        let rule = QuadratureRule::<f64>::gauss_legendre(8, -1.0, 1.0, 1e-14).unwrap();
        let smooth = rule.integrate(|x| x.abs());
        assert!((smooth - 1.0).abs() > 1e-6, "kink should hurt a single panel");
        let split = QuadratureRule::<f64>::composite(vec![-1.0, 0.0, 1.0], 8, 1e-14).unwrap();
        let got = split.integrate(|x| x.abs());
        assert!((got - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jacobi_weight_convention() {
        // Weights absorb (b-s)^alpha (s-a)^beta: the unit integrand gives the
        // Beta-function moment.
        let (alpha, beta_e) = (-0.75, 0.25);
        let (a, b) = (0.5, 4.0);
        let rule = QuadratureRule::<f64>::gauss_jacobi(16, alpha, beta_e, a, b, 1e-12).unwrap();
        let got = rule.integrate(|_| 1.0);
        let expect = (b - a).powf(alpha + beta_e + 1.0) * beta(beta_e + 1.0, alpha + 1.0);
        assert!(
            ((got - expect) / expect).abs() < 1e-13,
            "got {got}, expect {expect}"
        );
        // Linear smooth factor against the same weight.
        let got = rule.integrate(|s| s);
        let expect = (b - a).powf(alpha + beta_e + 1.0)
            * (a * beta(beta_e + 1.0, alpha + 1.0) + (b - a) * beta(beta_e + 2.0, alpha + 1.0));
        assert!(((got - expect) / expect).abs() < 1e-13);
    }

    #[test]
    fn jacobi_rejects_nonintegrable_exponents() {
        assert!(QuadratureRule::<f64>::gauss_jacobi(8, -1.0, 0.0, 0.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn breakpoint_builder_filters_and_grades() {
        let opts = PanelBuild {
            points: 4,
            grade_levels: 2,
            grade_factor: 8.0,
            ..PanelBuild::default()
        };
        let rule =
            QuadratureRule::<f64>::from_breakpoints(0.0, 1.0, &[0.5, 0.5, -2.0, 3.0], opts).unwrap();
        // Two base panels, each graded into 2*(2+1) = 6 sub-panels.
        assert_eq!(rule.panel_count(), 12);
        assert!(rule.nodes().windows(2).all(|w| w[1] > w[0]));
        assert!(rule.weights().iter().all(|&w| w > 0.0));
        // Graded composite still integrates smooth functions accurately.
        let got = rule.integrate(|x| (3.0 * x).cos());
        let expect = 3f64.sin() / 3.0;
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn min_panel_floor_applies() {
        let opts = PanelBuild::<f64> {
            min_panels: Some(256),
            ..PanelBuild::default()
        };
        let rule = QuadratureRule::from_breakpoints(0.0, 2.0, &[1.4], opts).unwrap();
        assert!(rule.panel_count() >= 256);
    }

    #[test]
    fn refinement_and_coarsening_change_panel_count() {
        let rule = QuadratureRule::<f64>::composite(vec![0.0, 0.25, 1.0], 8, 1e-12).unwrap();
        assert_eq!(rule.refined(2).unwrap().panel_count(), 4);
        assert_eq!(rule.coarsened().unwrap().panel_count(), 1);
    }

    #[test]
    fn small_rules_are_rejected() {
        assert!(QuadratureRule::<f64>::gauss_legendre(4, 0.0, 1.0, 1e-12).is_err());
        assert!(QuadratureRule::<f64>::gauss_legendre(8, 0.0, 1.0, 1e-12).is_ok());
    }

    #[test]
    fn geometric_edges_cover_range() {
        let edges = geometric_edges(0.5_f64, 64.0, 2);
        assert_eq!(edges.first().copied(), Some(0.5));
        assert_eq!(edges.last().copied(), Some(64.0));
        assert!(edges.windows(2).all(|w| w[1] > w[0]));
        assert!(edges.len() >= 15);
    }

    #[test]
    fn works_at_f32() {
        let rule = QuadratureRule::<f32>::gauss_legendre(8, 0.0, 1.0, 1e-5).unwrap();
        let got = rule.integrate(|x| x * x);
        assert!((got - 1.0 / 3.0).abs() < 1e-6);
    }
}
