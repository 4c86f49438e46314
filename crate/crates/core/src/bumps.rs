//! Smooth cutoffs built from the C^inf step h(x) = exp(-1/x).
//!
//! One master sigmoid `theta` generates the whole catalog: theta(s) is 1 for
//! s <= 1 and 0 for s >= 2. The dyadic family psi(s) = theta(s) - theta(2s)
//! telescopes exactly; psi evaluates theta(2s) on the bit-identical argument
//! that the next dyadic level sees (scaling by two is exact in floating
//! point), so partition residuals vanish identically where the partition is
//! resolved instead of merely being small.
//!
//! The catalog is evaluated pointwise, millions of times per experiment, so
//! every function short-circuits outside its support before touching `exp`.

use crate::error::CoreError;
use crate::scalar::Scalar;

/// C^inf step: exp(-1/x) for x > 0, zero otherwise.
pub fn h<S: Scalar>(x: S) -> S {
    if x > S::zero() {
        (-x.recip()).exp()
    } else {
        S::zero()
    }
}

/// Master sigmoid: 1 on (-inf, 1], 0 on [2, inf), smooth and nonincreasing.
pub fn theta<S: Scalar>(s: S) -> S {
    let one = S::one();
    let two = S::lit(2.0);
    if s <= one {
        return one;
    }
    if s >= two {
        return S::zero();
    }
    let rise = h(two - s);
    rise / (rise + h(s - one))
}

/// Dyadic bump psi(s) = theta(s) - theta(2s); support [1/2, 2], psi(1) = 1.
pub fn psi<S: Scalar>(s: S) -> S {
    theta(s) - theta(S::lit(2.0) * s)
}

/// Low cutoff psi1(t) = 1 - theta(4(1-t)); equals 1 on (-inf, 1/2],
/// vanishes for t >= 3/4.
pub fn psi1<S: Scalar>(t: S) -> S {
    S::one() - theta(S::lit(4.0) * (S::one() - t))
}

/// Rescaled dyadic bump Psi(s) = psi(2s); support [1/4, 1], Psi(1/2) = 1.
pub fn capital_psi<S: Scalar>(s: S) -> S {
    psi(S::lit(2.0) * s)
}

/// Piece of psi1 living near zero: psi1(s) * theta(32 s / 3).
/// Support intersected with [0, inf) lies in [0, 3/16].
pub fn psi1_low<S: Scalar>(s: S) -> S {
    psi1(s) * theta(S::lit(32.0 / 3.0) * s)
}

/// Complementary piece: psi1(s) * (1 - theta(32 s / 3)); support [3/32, 3/4].
pub fn psi1_high<S: Scalar>(s: S) -> S {
    psi1(s) * (S::one() - theta(S::lit(32.0 / 3.0) * s))
}

/// Residual of the dyadic partition of unity at `t`:
/// | psi1(t) + sum_{j=2}^{j_max} psi(2^j (1-t)) - 1 |.
///
/// By telescoping this equals theta(2^{j_max + 1} (1-t)) exactly, so it is
/// zero wherever 1 - t >= 2^{-j_max} and climbs to 1 as t -> 1.
pub fn partition_residual<S: Scalar>(t: S, j_max: u32) -> S {
    assert!(j_max >= 2, "partition starts at the dyadic level j = 2");
    let one = S::one();
    let mut acc = psi1(t);
    let mut arg = S::lit(4.0) * (one - t);
    for _ in 2..=j_max {
        acc += psi(arg);
        arg = arg + arg;
    }
    (acc - one).abs()
}

/// The frequency window for the last coordinate: smooth, supported in
/// [1/2, 2], identically 1 on a configurable plateau.
///
/// The optional symmetrized mode evaluates at |u| so that both frequency
/// half-lines pass the window; the default evaluates the argument as given,
/// which annihilates negative last-coordinate frequencies.
#[derive(Clone, Debug)]
pub struct BumpCatalog<S> {
    plateau_lo: S,
    plateau_hi: S,
    symmetrize: bool,
}

impl<S: Scalar> BumpCatalog<S> {
    /// Plateau [0.55, 1.9], argument taken as given.
    pub fn standard() -> Self {
        Self::with_plateau(S::lit(0.55), S::lit(1.9)).expect("default plateau is valid")
    }

    /// Requires 1/2 < lo < hi < 2.
    pub fn with_plateau(lo: S, hi: S) -> Result<Self, CoreError> {
        if !(lo > S::lit(0.5) && lo < hi && hi < S::lit(2.0)) {
            return Err(CoreError::InvalidPlateau {
                lo: lo.as_f64(),
                hi: hi.as_f64(),
            });
        }
        Ok(Self {
            plateau_lo: lo,
            plateau_hi: hi,
            symmetrize: false,
        })
    }

    /// Evaluate the window at |u| instead of u.
    pub fn symmetrized(mut self, on: bool) -> Self {
        self.symmetrize = on;
        self
    }

    pub fn is_symmetrized(&self) -> bool {
        self.symmetrize
    }

    pub fn plateau(&self) -> (S, S) {
        (self.plateau_lo, self.plateau_hi)
    }

    /// Window value at `u`: 0 outside (1/2, 2), 1 on the plateau.
    pub fn varphi(&self, u: S) -> S {
        let u = if self.symmetrize { u.abs() } else { u };
        let half = S::lit(0.5);
        let two = S::lit(2.0);
        if u <= half || u >= two {
            return S::zero();
        }
        let one = S::one();
        // Rising edge maps [1/2, plateau_lo] onto theta's [1, 2].
        let rise = one - theta(one + (u - half) / (self.plateau_lo - half));
        // Falling edge maps [plateau_hi, 2] onto theta's [1, 2].
        let fall = theta(one + (u - self.plateau_hi) / (two - self.plateau_hi));
        rise * fall
    }
}
