//! Pointwise multiplier symbols and the decomposition algebra among them.
//!
//! Every symbol here depends on a frequency xi only through the pair
//! (|xi'|^2, xi_n), reduced against a scale t or R to
//!
//!   a = |xi'|^2 / (R^2 xi_n^2),   w = |xi'|^2 / (t^2 xi_n^2).
//!
//! All evaluators short-circuit to 0 when their phi-factor vanishes, so the
//! reduced ratios are never formed at xi_n = 0.
//!
//! Truncated powers follow the open-set convention: (x)^sigma_+ is x^sigma
//! for x > 0 and 0 for x <= 0, so (x)^0_+ is the indicator of {x > 0}.
//! Negative powers at x = 0 also return 0; such hits are singular-boundary
//! events and are tallied in a process-wide counter so that quadratures can
//! assert their nodes stayed clear of the boundary.

use crate::bumps::BumpCatalog;
use crate::error::{CoreError, Result};
use crate::scalar::Scalar;
use std::sync::atomic::{AtomicU64, Ordering};

static SINGULAR_BOUNDARY_HITS: AtomicU64 = AtomicU64::new(0);

/// Number of times a negative truncated power was requested exactly at its
/// singular boundary (base = 0) since the last reset.
pub fn singular_boundary_hits() -> u64 {
    SINGULAR_BOUNDARY_HITS.load(Ordering::Relaxed)
}

pub fn reset_singular_boundary_hits() {
    SINGULAR_BOUNDARY_HITS.store(0, Ordering::Relaxed);
}

/// Truncated power (base)^sigma_+.
pub fn pow_plus<S: Scalar>(base: S, sigma: S) -> S {
    if !(base > S::zero()) {
        if sigma < S::zero() && base == S::zero() {
            SINGULAR_BOUNDARY_HITS.fetch_add(1, Ordering::Relaxed);
        }
        return S::zero();
    }
    let sf = sigma.as_f64();
    if sf == 0.0 {
        return S::one();
    }
    // Small integer exponents take the exact-product path.
    if sf.fract() == 0.0 && sf.abs() <= 16.0 {
        base.powi(sf as i32)
    } else {
        base.powf(sigma)
    }
}

/// A frequency in reduced form: |xi'|^2 and the last coordinate xi_n.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Freq<S> {
    pub perp_sq: S,
    pub axis: S,
}

impl<S: Scalar> Freq<S> {
    pub fn new(perp_sq: S, axis: S) -> Self {
        Self { perp_sq, axis }
    }

    pub fn from_coords(perp: &[S], axis: S) -> Self {
        let perp_sq = perp.iter().fold(S::zero(), |acc, &c| acc + c * c);
        Self { perp_sq, axis }
    }

    /// |xi'|^2 / (scale^2 xi_n^2). Callers must have excluded xi_n = 0.
    pub fn reduced(&self, scale: S) -> S {
        self.perp_sq / (scale * scale * self.axis * self.axis)
    }
}

fn dyadic<S: Scalar>(j: u32) -> S {
    S::lit(f64::powi(2.0, j as i32))
}

/// (1 - a - b)^lambda_+ phi(xi_n) phi(eta_n), the full cone symbol at scale R.
pub fn bilinear_cone<S: Scalar>(
    cat: &BumpCatalog<S>,
    xi: Freq<S>,
    eta: Freq<S>,
    lambda: S,
    r: S,
) -> S {
    let phi = cat.varphi(xi.axis) * cat.varphi(eta.axis);
    if phi == S::zero() {
        return S::zero();
    }
    let a = xi.reduced(r);
    let b = eta.reduced(r);
    pow_plus(S::one() - a - b, lambda) * phi
}

/// (1 - w)^nu_+ phi(xi_n), the linear cone symbol at scale t.
pub fn linear_cone<S: Scalar>(cat: &BumpCatalog<S>, xi: Freq<S>, nu: S, t: S) -> S {
    let phi = cat.varphi(xi.axis);
    if phi == S::zero() {
        return S::zero();
    }
    pow_plus(S::one() - xi.reduced(t), nu) * phi
}

/// ((1 - w)^{nu+1}_+ - (1 - w)^nu_+) phi(xi_n): the symbol of the
/// consecutive-order difference T^{nu+1}_t - T^nu_t. Equals
/// -w (1 - w)^nu_+ phi on {w < 1}, so it is nonpositive.
pub fn linear_cone_diff<S: Scalar>(cat: &BumpCatalog<S>, xi: Freq<S>, nu: S, t: S) -> S {
    let phi = cat.varphi(xi.axis);
    if phi == S::zero() {
        return S::zero();
    }
    let w = xi.reduced(t);
    let base = S::one() - w;
    (pow_plus(base, nu + S::one()) - pow_plus(base, nu)) * phi
}

/// j-th dyadic piece of the bilinear symbol: psi(2^j (1-a)) for j >= 2,
/// psi_1(a) for j = 1, times the full cone symbol.
pub fn piece_j<S: Scalar>(
    cat: &BumpCatalog<S>,
    xi: Freq<S>,
    eta: Freq<S>,
    lambda: S,
    r: S,
    j: u32,
) -> S {
    assert!(j >= 1, "dyadic piece index starts at 1");
    let phi = cat.varphi(xi.axis) * cat.varphi(eta.axis);
    if phi == S::zero() {
        return S::zero();
    }
    let a = xi.reduced(r);
    let b = eta.reduced(r);
    let cutoff = if j == 1 {
        crate::bumps::psi1(a)
    } else {
        crate::bumps::psi(dyadic::<S>(j) * (S::one() - a))
    };
    cutoff * pow_plus(S::one() - a - b, lambda) * phi
}

/// Selector for the second-level decomposition of the j = 1 piece.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubSelector {
    /// eta-side dyadic piece, index >= 2.
    Dyadic(u32),
    /// Smooth remainder: both reduced ratios small (a <= 3/4, b <= 3/16).
    One1,
    /// Boundary remainder: b in [3/32, 3/4].
    One2,
}

/// Pieces of the second-level (eta-side) decomposition of the j = 1 piece.
///
/// The dyadic piece keeps the factorized product
/// (1-b)^lambda_+ (1 - a/(1-b))^lambda_+, which agrees with (1-a-b)^lambda_+
/// on its support.
pub fn sub_piece<S: Scalar>(
    cat: &BumpCatalog<S>,
    xi: Freq<S>,
    eta: Freq<S>,
    lambda: S,
    r: S,
    sel: SubSelector,
) -> S {
    let phi = cat.varphi(xi.axis) * cat.varphi(eta.axis);
    if phi == S::zero() {
        return S::zero();
    }
    let a = xi.reduced(r);
    let b = eta.reduced(r);
    let psi1_a = crate::bumps::psi1(a);
    if psi1_a == S::zero() {
        return S::zero();
    }
    match sel {
        SubSelector::Dyadic(j) => {
            assert!(j >= 2, "eta-side dyadic piece index starts at 2");
            let one_minus_b = S::one() - b;
            if !(one_minus_b > S::zero()) {
                return S::zero();
            }
            psi1_a
                * phi
                * crate::bumps::psi(dyadic::<S>(j) * one_minus_b)
                * pow_plus(one_minus_b, lambda)
                * pow_plus(S::one() - a / one_minus_b, lambda)
        }
        SubSelector::One1 => {
            psi1_a * crate::bumps::psi1_low(b) * pow_plus(S::one() - a - b, lambda) * phi
        }
        SubSelector::One2 => {
            psi1_a * crate::bumps::psi1_high(b) * pow_plus(S::one() - a - b, lambda) * phi
        }
    }
}

/// psi(2^j (1-a)) (1 - a - t^2)^{mu-1}_+ phi(xi_n): the f-side factor of the
/// subordinated j-piece, with t relative to R (t in [0, 1]).
pub fn srt_symbol<S: Scalar>(
    cat: &BumpCatalog<S>,
    xi: Freq<S>,
    j: u32,
    mu: S,
    r: S,
    t: S,
) -> S {
    assert!(j >= 2, "subordinated piece index starts at 2");
    let phi = cat.varphi(xi.axis);
    if phi == S::zero() {
        return S::zero();
    }
    let a = xi.reduced(r);
    crate::bumps::psi(dyadic::<S>(j) * (S::one() - a)) * pow_plus(S::one() - a - t * t, mu - S::one()) * phi
}

/// psi(2^j (1-a)) (R^2 - |xi'|^2/xi_n^2 - t^2)^{mu-1}_+ phi(xi_n): the
/// absolute-scale companion of `srt_symbol`, with t in [0, R].
/// brt(xi, j, mu, R, R t) = R^{2(mu-1)} srt(xi, j, mu, R, t).
pub fn brt_symbol<S: Scalar>(
    cat: &BumpCatalog<S>,
    xi: Freq<S>,
    j: u32,
    mu: S,
    r: S,
    t: S,
) -> S {
    assert!(j >= 2, "subordinated piece index starts at 2");
    let phi = cat.varphi(xi.axis);
    if phi == S::zero() {
        return S::zero();
    }
    let a = xi.reduced(r);
    let rho_sq = xi.perp_sq / (xi.axis * xi.axis);
    crate::bumps::psi(dyadic::<S>(j) * (S::one() - a)) * pow_plus(r * r - rho_sq - t * t, mu - S::one()) * phi
}

/// (1 - a - t^2)^{mu-1}_+ phi(xi_n): `srt_symbol` without the dyadic cutoff,
/// used by the piece-free subordination of the full cone symbol.
pub fn srt_plain_symbol<S: Scalar>(cat: &BumpCatalog<S>, xi: Freq<S>, mu: S, r: S, t: S) -> S {
    let phi = cat.varphi(xi.axis);
    if phi == S::zero() {
        return S::zero();
    }
    pow_plus(S::one() - xi.reduced(r) - t * t, mu - S::one()) * phi
}

/// (R^2 - |xi'|^2/xi_n^2 - t^2)^{mu-1}_+ phi(xi_n).
pub fn brt_plain_symbol<S: Scalar>(cat: &BumpCatalog<S>, xi: Freq<S>, mu: S, r: S, t: S) -> S {
    let phi = cat.varphi(xi.axis);
    if phi == S::zero() {
        return S::zero();
    }
    let rho_sq = xi.perp_sq / (xi.axis * xi.axis);
    pow_plus(r * r - rho_sq - t * t, mu - S::one()) * phi
}

/// Psi(delta^{-1} (1 - w)) phi(xi_n): a smooth annulus of relative width
/// delta just inside the cone at scale t; supported on 1-w in [delta/4, delta].
pub fn smooth_annulus<S: Scalar>(cat: &BumpCatalog<S>, xi: Freq<S>, delta: S, t: S) -> S {
    let phi = cat.varphi(xi.axis);
    if phi == S::zero() {
        return S::zero();
    }
    let w = xi.reduced(t);
    crate::bumps::capital_psi((S::one() - w) / delta) * phi
}

/// Psi(2^gamma (1 - w)) 2^{nu gamma} (1 - w)^nu_+ w phi(xi_n): the
/// gamma-th annular piece of the order-nu cone symbol near its boundary.
pub fn tilde_gamma<S: Scalar>(cat: &BumpCatalog<S>, xi: Freq<S>, nu: S, gamma: u32, t: S) -> S {
    assert!(gamma >= 1, "annular index starts at 1");
    let phi = cat.varphi(xi.axis);
    if phi == S::zero() {
        return S::zero();
    }
    let w = xi.reduced(t);
    let base = S::one() - w;
    crate::bumps::capital_psi(dyadic::<S>(gamma) * base)
        * dyadic::<S>(gamma).powf(nu)
        * pow_plus(base, nu)
        * w
        * phi
}

/// psi_1^2(b) (1 - t^2 - b)^{mu-1}_+ phi(eta_n): the g-side factor of the
/// boundary remainder, with t relative to R (t in [0, sqrt(29/32)]).
pub fn h_symbol<S: Scalar>(cat: &BumpCatalog<S>, eta: Freq<S>, mu: S, r: S, t: S) -> S {
    let phi = cat.varphi(eta.axis);
    if phi == S::zero() {
        return S::zero();
    }
    let b = eta.reduced(r);
    crate::bumps::psi1_high(b) * pow_plus(S::one() - t * t - b, mu - S::one()) * phi
}

/// psi_1(a) phi(xi_n): the f-side factor of the boundary remainder.
pub fn bpsi1_symbol<S: Scalar>(cat: &BumpCatalog<S>, xi: Freq<S>, r: S) -> S {
    let phi = cat.varphi(xi.axis);
    if phi == S::zero() {
        return S::zero();
    }
    crate::bumps::psi1(xi.reduced(r)) * phi
}

/// A symbol kind together with its parameters. Linear kinds are functions of
/// one frequency, bilinear kinds of a pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SymbolDescriptor<S> {
    BilinearCone { lambda: S, r: S },
    LinearCone { nu: S, t: S },
    LinearConeDiff { nu: S, t: S },
    PieceJ { lambda: S, r: S, j: u32 },
    PieceOne { lambda: S, r: S },
    SubPieceJ { lambda: S, r: S, j: u32 },
    SubPieceOne1 { lambda: S, r: S },
    SubPieceOne2 { lambda: S, r: S },
    Srt { mu: S, r: S, t: S, j: u32 },
    Brt { mu: S, r: S, t: S, j: u32 },
    SrtPlain { mu: S, r: S, t: S },
    BrtPlain { mu: S, r: S, t: S },
    SmoothAnnulus { delta: S, t: S },
    TildeGamma { nu: S, gamma: u32, t: S },
    Hmu { mu: S, r: S, t: S },
    Bpsi1 { r: S },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arity {
    Linear,
    Bilinear,
}

impl<S: Scalar> SymbolDescriptor<S> {
    pub fn arity(&self) -> Arity {
        use SymbolDescriptor::*;
        match self {
            BilinearCone { .. } | PieceJ { .. } | PieceOne { .. } | SubPieceJ { .. }
            | SubPieceOne1 { .. } | SubPieceOne2 { .. } => Arity::Bilinear,
            _ => Arity::Linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        use SymbolDescriptor::*;
        let bad = |msg: String| Err(CoreError::InvalidDescriptor(msg));
        let pos = |x: S, name: &str| {
            if x > S::zero() && x.is_finite() {
                Ok(())
            } else {
                Err(CoreError::InvalidDescriptor(format!("{name} must be positive")))
            }
        };
        let nonneg = |x: S, name: &str| {
            if x >= S::zero() && x.is_finite() {
                Ok(())
            } else {
                Err(CoreError::InvalidDescriptor(format!("{name} must be nonnegative")))
            }
        };
        match *self {
            BilinearCone { lambda, r } | PieceOne { lambda, r } | SubPieceOne1 { lambda, r }
            | SubPieceOne2 { lambda, r } => {
                pos(lambda, "lambda")?;
                pos(r, "R")
            }
            PieceJ { lambda, r, j } | SubPieceJ { lambda, r, j } => {
                pos(lambda, "lambda")?;
                pos(r, "R")?;
                if j < 2 {
                    return bad(format!("piece index {j} < 2"));
                }
                Ok(())
            }
            LinearCone { nu, t } | LinearConeDiff { nu, t } => {
                if !(nu > -S::one()) {
                    return bad("order must exceed -1".into());
                }
                pos(t, "t")
            }
            Srt { mu, r, t, j } | Brt { mu, r, t, j } => {
                pos(mu, "mu")?;
                pos(r, "R")?;
                nonneg(t, "t")?;
                if j < 2 {
                    return bad(format!("piece index {j} < 2"));
                }
                Ok(())
            }
            SrtPlain { mu, r, t } | BrtPlain { mu, r, t } => {
                pos(mu, "mu")?;
                pos(r, "R")?;
                nonneg(t, "t")
            }
            SmoothAnnulus { delta, t } => {
                if !(delta > S::zero() && delta < S::one()) {
                    return bad("annulus width must lie in (0, 1)".into());
                }
                pos(t, "t")
            }
            TildeGamma { nu, gamma, t } => {
                if !(nu > -S::one()) {
                    return bad("order must exceed -1".into());
                }
                if gamma < 1 {
                    return bad("annular index must be >= 1".into());
                }
                pos(t, "t")
            }
            Hmu { mu, r, t } => {
                pos(mu, "mu")?;
                pos(r, "R")?;
                nonneg(t, "t")?;
                let cap = (S::lit(29.0) / S::lit(32.0)).sqrt();
                if t > cap {
                    return bad("t exceeds the boundary-remainder range".into());
                }
                Ok(())
            }
            Bpsi1 { r } => pos(r, "R"),
        }
    }

    /// Evaluates a linear kind. Panics on bilinear kinds; gate with `arity`.
    pub fn eval_linear(&self, cat: &BumpCatalog<S>, xi: Freq<S>) -> S {
        use SymbolDescriptor::*;
        match *self {
            LinearCone { nu, t } => linear_cone(cat, xi, nu, t),
            LinearConeDiff { nu, t } => linear_cone_diff(cat, xi, nu, t),
            Srt { mu, r, t, j } => srt_symbol(cat, xi, j, mu, r, t),
            Brt { mu, r, t, j } => brt_symbol(cat, xi, j, mu, r, t),
            SrtPlain { mu, r, t } => srt_plain_symbol(cat, xi, mu, r, t),
            BrtPlain { mu, r, t } => brt_plain_symbol(cat, xi, mu, r, t),
            SmoothAnnulus { delta, t } => smooth_annulus(cat, xi, delta, t),
            TildeGamma { nu, gamma, t } => tilde_gamma(cat, xi, nu, gamma, t),
            Hmu { mu, r, t } => h_symbol(cat, xi, mu, r, t),
            Bpsi1 { r } => bpsi1_symbol(cat, xi, r),
            _ => panic!("bilinear symbol evaluated at a single frequency"),
        }
    }

    /// Evaluates a bilinear kind. Panics on linear kinds; gate with `arity`.
    pub fn eval_bilinear(&self, cat: &BumpCatalog<S>, xi: Freq<S>, eta: Freq<S>) -> S {
        use SymbolDescriptor::*;
        match *self {
            BilinearCone { lambda, r } => bilinear_cone(cat, xi, eta, lambda, r),
            PieceJ { lambda, r, j } => piece_j(cat, xi, eta, lambda, r, j),
            PieceOne { lambda, r } => piece_j(cat, xi, eta, lambda, r, 1),
            SubPieceJ { lambda, r, j } => sub_piece(cat, xi, eta, lambda, r, SubSelector::Dyadic(j)),
            SubPieceOne1 { lambda, r } => sub_piece(cat, xi, eta, lambda, r, SubSelector::One1),
            SubPieceOne2 { lambda, r } => sub_piece(cat, xi, eta, lambda, r, SubSelector::One2),
            _ => panic!("linear symbol evaluated at a frequency pair"),
        }
    }
}
