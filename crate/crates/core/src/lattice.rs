//! Periodic lattice, fields, and the discrete Fourier transform pair.
//!
//! The ambient space is the torus [-L/2, L/2)^n sampled at N points per axis,
//! with the last axis distinguished as the "cone axis": every frequency
//! splits as xi = (xi', xi_n). Transforms use the integral-approximating
//! normalization
//!
//!   F(xi_m) = (L/N)^n sum_k f(x_k) exp(-2 pi i xi_m . x_k),
//!   f(x_k)  = L^{-n}  sum_m F(xi_m) exp(+2 pi i xi_m . x_k),
//!
//! with frequencies xi_m = m / L, m in {-N/2, ..., N/2 - 1}^n. Under this
//! convention lattice norms approximate continuum norms directly and
//! Parseval reads (L/N)^n sum |f|^2 = L^{-n} sum |F|^2.
//!
//! Multiplier operators act exactly on band-limited inputs here, so any
//! failure downstream is a logic bug rather than discretization error.
//!
//! The optional half-cell offset (x_k[i] = -L/2 + (k_i + 1/2) L/N) keeps all
//! lattice points away from the x' = 0 and x_n = 0 hyperplanes; weighted
//! norms with |x'|^{-a} |x_n|^{-b} weights require it.

use crate::error::{CoreError, Result};
use crate::scalar::{LatticeScalar, Scalar};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

/// Lattice geometry: dimension, period, samples per axis, offset mode.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec<S> {
    n: usize,
    length: S,
    samples: usize,
    offset: bool,
}

impl<S: Scalar> GridSpec<S> {
    /// Centered lattice x_k[i] = -L/2 + k_i L/N. Requires n >= 3, even N, L > 0.
    pub fn new(n: usize, length: S, samples: usize) -> Result<Self> {
        if n < 3 {
            return Err(CoreError::InvalidGrid(format!("dimension {n} < 3")));
        }
        if samples == 0 || samples % 2 != 0 {
            return Err(CoreError::InvalidGrid(format!("samples {samples} must be even and positive")));
        }
        if !(length > S::zero()) || !length.is_finite() {
            return Err(CoreError::InvalidGrid("period must be positive".into()));
        }
        // Guard the flat index space.
        let total = (samples as f64).powi(n as i32);
        if total > 1e9 {
            return Err(CoreError::InvalidGrid(format!(
                "{samples}^{n} lattice points exceed the supported size"
            )));
        }
        Ok(Self {
            n,
            length,
            samples,
            offset: false,
        })
    }

    /// Half-cell offset lattice x_k[i] = -L/2 + (k_i + 1/2) L/N.
    pub fn new_offset(n: usize, length: S, samples: usize) -> Result<Self> {
        Ok(Self {
            offset: true,
            ..Self::new(n, length, samples)?
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> S {
        self.length
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn is_offset(&self) -> bool {
        self.offset
    }

    pub fn total(&self) -> usize {
        self.samples.pow(self.n as u32)
    }

    pub fn nyquist(&self) -> S {
        S::lit(self.samples as f64) / (S::lit(2.0) * self.length)
    }

    /// Spatial step L/N.
    pub fn dx(&self) -> S {
        self.length / S::lit(self.samples as f64)
    }

    /// Volume element (L/N)^n.
    pub fn cell_volume(&self) -> S {
        self.dx().powi(self.n as i32)
    }

    /// Coordinate of index k along any axis.
    pub fn coord(&self, k: usize) -> S {
        debug_assert!(k < self.samples);
        let shift = if self.offset { 0.5 } else { 0.0 };
        -self.length * S::lit(0.5) + self.dx() * S::lit(k as f64 + shift)
    }

    /// Frequency m/L for the signed integer index m.
    pub fn freq(&self, m: i64) -> S {
        S::lit(m as f64) / self.length
    }

    /// Signed frequency index for a shifted (storage) index.
    pub fn signed_of_shifted(&self, s: usize) -> i64 {
        s as i64 - (self.samples as i64) / 2
    }

    /// Storage index for a signed frequency index, if it lies in the box.
    pub fn shifted_of_signed(&self, m: i64) -> Option<usize> {
        let half = (self.samples as i64) / 2;
        if (-half..half).contains(&m) {
            Some((m + half) as usize)
        } else {
            None
        }
    }

    /// Checks that a spectral band lies inside the Nyquist box.
    pub fn validate_band(&self, band: &Band<S>) -> Result<()> {
        let ny = self.nyquist();
        let reach = band
            .xi_n_lo
            .abs()
            .max(band.xi_n_hi.abs())
            .max(band.radial_max);
        if reach > ny {
            return Err(CoreError::NyquistUncovered {
                requested: reach.as_f64(),
                nyquist: ny.as_f64(),
            });
        }
        Ok(())
    }
}

/// Runs `body(flat, digits)` for every lattice index in row-major order
/// (last axis fastest).
pub(crate) fn for_each_index<F: FnMut(usize, &[usize])>(n: usize, samples: usize, mut body: F) {
    let total = samples.pow(n as u32);
    let mut digits = vec![0usize; n];
    for flat in 0..total {
        body(flat, &digits);
        for axis in (0..n).rev() {
            digits[axis] += 1;
            if digits[axis] < samples {
                break;
            }
            digits[axis] = 0;
        }
    }
}

/// Spectral band: an interval for the last frequency coordinate and radial
/// bounds for |xi'|. With `symmetric` the mirrored interval for -xi_n is
/// included as well.
#[derive(Clone, Copy, Debug)]
pub struct Band<S> {
    pub xi_n_lo: S,
    pub xi_n_hi: S,
    pub radial_max: S,
    pub radial_min: S,
    pub symmetric: bool,
}

impl<S: Scalar> Band<S> {
    pub fn new(xi_n_lo: S, xi_n_hi: S, radial_max: S) -> Self {
        Self {
            xi_n_lo,
            xi_n_hi,
            radial_max,
            radial_min: S::zero(),
            symmetric: false,
        }
    }

    /// Excludes modes with |xi'| below `r`; used by square-function checks
    /// whose exact constants require xi' != 0.
    pub fn with_radial_min(mut self, r: S) -> Self {
        self.radial_min = r;
        self
    }

    pub fn symmetric(mut self, on: bool) -> Self {
        self.symmetric = on;
        self
    }

    /// Membership test on the reduced coordinates (|xi'|^2, xi_n).
    pub fn contains(&self, xpsq: S, xn: S) -> bool {
        let xn_ok = (xn > self.xi_n_lo && xn < self.xi_n_hi)
            || (self.symmetric && -xn > self.xi_n_lo && -xn < self.xi_n_hi);
        if !xn_ok {
            return false;
        }
        let r = xpsq.sqrt();
        r <= self.radial_max && r >= self.radial_min
    }
}

/// Complex samples on the lattice.
#[derive(Clone, Debug)]
pub struct SpatialField<S> {
    spec: GridSpec<S>,
    values: Vec<Complex<S>>,
}

/// Complex Fourier coefficients, stored with shifted indices
/// (storage index s corresponds to m = s - N/2 per axis, row-major).
#[derive(Clone, Debug)]
pub struct Spectrum<S> {
    spec: GridSpec<S>,
    coeffs: Vec<Complex<S>>,
}

/// Real nonnegative samples on the lattice (moduli, maximal functions,
/// square functions).
#[derive(Clone, Debug)]
pub struct RealField<S> {
    spec: GridSpec<S>,
    values: Vec<S>,
}

impl<S: Scalar> SpatialField<S> {
    pub fn zeros(spec: GridSpec<S>) -> Self {
        let total = spec.total();
        Self {
            spec,
            values: vec![Complex::new(S::zero(), S::zero()); total],
        }
    }

    pub fn from_values(spec: GridSpec<S>, values: Vec<Complex<S>>) -> Result<Self> {
        if values.len() != spec.total() {
            return Err(CoreError::InvalidGrid(format!(
                "{} values for a lattice of {} points",
                values.len(),
                spec.total()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CoreError::NonFinite("spatial field"));
        }
        Ok(Self { spec, values })
    }

    pub fn spec(&self) -> &GridSpec<S> {
        &self.spec
    }

    pub fn values(&self) -> &[Complex<S>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<S>] {
        &mut self.values
    }

    /// Lattice L^2 norm ((L/N)^n sum |f|^2)^{1/2}.
    pub fn l2_norm(&self) -> S {
        let sum = self
            .values
            .iter()
            .fold(S::zero(), |acc, z| acc + z.norm_sqr());
        (sum * self.spec.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> S {
        self.values
            .iter()
            .fold(S::zero(), |acc, z| acc.max(z.norm()))
    }

    pub fn modulus(&self) -> RealField<S> {
        RealField {
            spec: self.spec.clone(),
            values: self.values.iter().map(|z| z.norm()).collect(),
        }
    }

    pub fn scaled(&self, c: Complex<S>) -> Self {
        Self {
            spec: self.spec.clone(),
            values: self.values.iter().map(|z| z * c).collect(),
        }
    }

    /// Pointwise product on the lattice.
    pub fn mul_pointwise(&self, other: &Self) -> Self {
        assert_eq!(self.spec, other.spec, "fields on different lattices");
        Self {
            spec: self.spec.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.spec, other.spec, "fields on different lattices");
        Self {
            spec: self.spec.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Self, c: Complex<S>) {
        assert_eq!(self.spec, other.spec, "fields on different lattices");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b * c;
        }
    }
}

impl<S: Scalar> Spectrum<S> {
    pub fn zeros(spec: GridSpec<S>) -> Self {
        let total = spec.total();
        Self {
            spec,
            coeffs: vec![Complex::new(S::zero(), S::zero()); total],
        }
    }

    pub fn from_coeffs(spec: GridSpec<S>, coeffs: Vec<Complex<S>>) -> Result<Self> {
        if coeffs.len() != spec.total() {
            return Err(CoreError::InvalidGrid(format!(
                "{} coefficients for a lattice of {} modes",
                coeffs.len(),
                spec.total()
            )));
        }
        if coeffs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CoreError::NonFinite("spectrum"));
        }
        Ok(Self { spec, coeffs })
    }

    pub fn spec(&self) -> &GridSpec<S> {
        &self.spec
    }

    pub fn coeffs(&self) -> &[Complex<S>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex<S>] {
        &mut self.coeffs
    }

    /// Storage index of the signed mode vector, if inside the box.
    pub fn index_of(&self, m: &[i64]) -> Option<usize> {
        assert_eq!(m.len(), self.spec.n);
        let mut flat = 0usize;
        for &mi in m {
            flat = flat * self.spec.samples + self.spec.shifted_of_signed(mi)?;
        }
        Some(flat)
    }

    pub fn coeff(&self, m: &[i64]) -> Option<Complex<S>> {
        self.index_of(m).map(|i| self.coeffs[i])
    }

    pub fn set(&mut self, m: &[i64], value: Complex<S>) {
        let idx = self.index_of(m).expect("mode outside the frequency box");
        self.coeffs[idx] = value;
    }

    /// Writes the signed mode vector of a storage index into `out`.
    pub fn signed_mode(&self, flat: usize, out: &mut [i64]) {
        let mut rest = flat;
        for axis in (0..self.spec.n).rev() {
            out[axis] = self.spec.signed_of_shifted(rest % self.spec.samples);
            rest /= self.spec.samples;
        }
    }

    /// Spectral L^2 norm (L^{-n} sum |F|^2)^{1/2}.
    pub fn l2_norm(&self) -> S {
        let sum = self
            .coeffs
            .iter()
            .fold(S::zero(), |acc, z| acc + z.norm_sqr());
        (sum / self.spec.length.powi(self.spec.n as i32)).sqrt()
    }

    /// Indices and values of all nonzero coefficients.
    pub fn nonzero(&self) -> Vec<(usize, Complex<S>)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, z)| z.re != S::zero() || z.im != S::zero())
            .map(|(i, z)| (i, *z))
            .collect()
    }

    pub fn scale(&mut self, c: S) {
        for z in &mut self.coeffs {
            *z = Complex::new(z.re * c, z.im * c);
        }
    }
}

impl<S: Scalar> RealField<S> {
    pub fn zeros(spec: GridSpec<S>) -> Self {
        let total = spec.total();
        Self {
            spec,
            values: vec![S::zero(); total],
        }
    }

    pub fn from_values(spec: GridSpec<S>, values: Vec<S>) -> Result<Self> {
        if values.len() != spec.total() {
            return Err(CoreError::InvalidGrid("value count mismatch".into()));
        }
        Ok(Self { spec, values })
    }

    pub fn spec(&self) -> &GridSpec<S> {
        &self.spec
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.values
    }

    pub fn max_value(&self) -> S {
        self.values.iter().fold(S::zero(), |acc, &v| acc.max(v))
    }

    pub fn min_value(&self) -> S {
        self.values
            .iter()
            .fold(S::infinity(), |acc, &v| acc.min(v))
    }

    /// Pointwise maximum with another field.
    pub fn max_with(&mut self, other: &Self) {
        assert_eq!(self.spec, other.spec, "fields on different lattices");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a = a.max(*b);
        }
    }
}

/// FFT plans, phase tables, and the reduced-frequency table for one grid.
///
/// The transform of every lattice symbol in this laboratory depends on a
/// frequency only through (|xi'|^2, xi_n); `freq_table` caches that
/// decomposition for all N^n storage indices.
pub struct Transformer<S: LatticeScalar> {
    spec: GridSpec<S>,
    fwd: Arc<dyn Fft<S>>,
    inv: Arc<dyn Fft<S>>,
    /// Forward phase per shifted axis index: (-1)^m exp(-2 pi i m o / N).
    phase_fwd: Vec<Complex<S>>,
    /// Map from shifted (storage) axis index to raw DFT axis index.
    jmap: Vec<usize>,
    freq: Vec<(S, S)>,
}

impl<S: LatticeScalar> Transformer<S> {
    pub fn new(spec: GridSpec<S>) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft(spec.samples, FftDirection::Forward);
        let inv = planner.plan_fft(spec.samples, FftDirection::Inverse);
        let n_samp = spec.samples;
        let half = n_samp / 2;
        let offset = if spec.offset { 0.5 } else { 0.0 };
        let mut phase_fwd = Vec::with_capacity(n_samp);
        let mut jmap = Vec::with_capacity(n_samp);
        for s in 0..n_samp {
            let m = s as i64 - half as i64;
            let ang = -S::lit(2.0) * S::PI() * S::lit(m as f64) * S::lit(offset / n_samp as f64);
            let sign = if m.rem_euclid(2) == 0 { S::one() } else { -S::one() };
            phase_fwd.push(Complex::from_polar(S::one(), ang) * sign);
            jmap.push(((s + half) % n_samp) as usize);
        }
        let mut freq = vec![(S::zero(), S::zero()); spec.total()];
        for_each_index(spec.n, n_samp, |flat, digits| {
            let mut xpsq = S::zero();
            for &d in &digits[..spec.n - 1] {
                let f = spec.freq(spec.signed_of_shifted(d));
                xpsq += f * f;
            }
            let xn = spec.freq(spec.signed_of_shifted(digits[spec.n - 1]));
            freq[flat] = (xpsq, xn);
        });
        Self {
            spec,
            fwd,
            inv,
            phase_fwd,
            jmap,
            freq,
        }
    }

    pub fn spec(&self) -> &GridSpec<S> {
        &self.spec
    }

    /// (|xi'|^2, xi_n) per storage index.
    pub fn freq_table(&self) -> &[(S, S)] {
        &self.freq
    }

    fn fft_all_axes(&self, data: &mut [Complex<S>], plan: &Arc<dyn Fft<S>>) {
        let n = self.spec.n;
        let n_samp = self.spec.samples;
        let total = data.len();
        let mut line = vec![Complex::new(S::zero(), S::zero()); n_samp];
        let mut scratch =
            vec![Complex::new(S::zero(), S::zero()); plan.get_inplace_scratch_len()];
        for axis in 0..n {
            let stride = n_samp.pow((n - 1 - axis) as u32);
            let block = stride * n_samp;
            for base in (0..total).step_by(block) {
                for inner in 0..stride {
                    let start = base + inner;
                    for (q, slot) in line.iter_mut().enumerate() {
                        *slot = data[start + q * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (q, slot) in line.iter().enumerate() {
                        data[start + q * stride] = *slot;
                    }
                }
            }
        }
    }

    /// F(xi_m) = (L/N)^n sum_k f(x_k) exp(-2 pi i xi_m . x_k).
    pub fn forward(&self, f: &SpatialField<S>) -> Spectrum<S> {
        assert_eq!(&self.spec, f.spec(), "field from another lattice");
        let mut buf = f.values.clone();
        self.fft_all_axes(&mut buf, &self.fwd);
        let scale = self.spec.cell_volume();
        let mut out = Spectrum::zeros(self.spec.clone());
        let n = self.spec.n;
        let n_samp = self.spec.samples;
        for_each_index(n, n_samp, |flat, digits| {
            let mut j = 0usize;
            let mut phase = Complex::new(S::one(), S::zero());
            for &d in digits {
                j = j * n_samp + self.jmap[d];
                phase = phase * self.phase_fwd[d];
            }
            out.coeffs[flat] = buf[j] * phase * scale;
        });
        out
    }

    /// f(x_k) = L^{-n} sum_m F(xi_m) exp(+2 pi i xi_m . x_k).
    pub fn inverse(&self, spectrum: &Spectrum<S>) -> SpatialField<S> {
        assert_eq!(&self.spec, spectrum.spec(), "spectrum from another lattice");
        let n = self.spec.n;
        let n_samp = self.spec.samples;
        let mut buf = vec![Complex::new(S::zero(), S::zero()); spectrum.coeffs.len()];
        for_each_index(n, n_samp, |flat, digits| {
            let mut j = 0usize;
            let mut phase = Complex::new(S::one(), S::zero());
            for &d in digits {
                j = j * n_samp + self.jmap[d];
                phase = phase * self.phase_fwd[d].conj();
            }
            buf[j] = spectrum.coeffs[flat] * phase;
        });
        self.fft_all_axes(&mut buf, &self.inv);
        let scale = self.spec.length.powi(-(n as i32));
        for z in &mut buf {
            *z = Complex::new(z.re * scale, z.im * scale);
        }
        SpatialField {
            spec: self.spec.clone(),
            values: buf,
        }
    }

    /// Random trigonometric polynomial with unit lattice L^2 norm and
    /// spectrum exactly inside `band`. Deterministic in `seed`.
    pub fn band_limited(&self, band: &Band<S>, seed: u64) -> Result<(SpatialField<S>, Spectrum<S>)> {
        self.spec.validate_band(band)?;
        let mut modes = Vec::new();
        for (flat, &(xpsq, xn)) in self.freq.iter().enumerate() {
            if band.contains(xpsq, xn) {
                modes.push(flat);
            }
        }
        if modes.is_empty() {
            return Err(CoreError::EmptyBand);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = StandardNormal;
        let mut spectrum = Spectrum::zeros(self.spec.clone());
        for flat in modes {
            let re: f64 = normal.sample(&mut rng);
            let im: f64 = normal.sample(&mut rng);
            spectrum.coeffs[flat] = Complex::new(S::lit(re), S::lit(im));
        }
        let norm = spectrum.l2_norm();
        spectrum.scale(norm.recip());
        let field = self.inverse(&spectrum);
        Ok((field, spectrum))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn grid(n: usize, l: f64, samples: usize) -> GridSpec<f64> {
        GridSpec::new(n, l, samples).unwrap()
    }

    fn rand_field(t: &Transformer<f64>, seed: u64) -> SpatialField<f64> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..t.spec().total())
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        SpatialField::from_values(t.spec().clone(), values).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(2, 8.0, 16).is_err());
        assert!(GridSpec::new(3, 8.0, 15).is_err());
        assert!(GridSpec::new(3, -1.0, 16).is_err());
        assert!(GridSpec::new(3, 8.0, 16).is_ok());
    }

    #[test]
    fn constant_field_transforms_to_zero_mode() {
        let spec = grid(3, 8.0, 8);
        let t = Transformer::new(spec.clone());
        let f = SpatialField::from_values(
            spec.clone(),
            vec![Complex64::new(1.0, 0.0); spec.total()],
        )
        .unwrap();
        let spectrum = t.forward(&f);
        let ln = 8.0f64.powi(3);
        let zero = spectrum.coeff(&[0, 0, 0]).unwrap();
        assert!((zero.re - ln).abs() < 1e-9 * ln);
        assert!(zero.im.abs() < 1e-9);
        let energy_rest: f64 = spectrum
            .coeffs()
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            - zero.norm_sqr();
        assert!(energy_rest.abs() < 1e-16 * ln * ln);
    }

    #[test]
    fn pure_mode_round_trip() {
        for offset in [false, true] {
            let spec = if offset {
                GridSpec::new_offset(3, 4.0, 8).unwrap()
            } else {
                grid(3, 4.0, 8)
            };
            let t = Transformer::new(spec.clone());
            let m = [1i64, -2, 3];
            let mut expected = Spectrum::zeros(spec.clone());
            let ln = 4.0f64.powi(3);
            expected.set(&m, Complex64::new(ln, 0.0));
            let field = t.inverse(&expected);
            // Check the field is the plain exponential at the lattice points.
            let mut digits = vec![0usize; 3];
            let mut worst = 0.0f64;
            for_each_index(3, 8, |flat, d| {
                digits.copy_from_slice(d);
                let mut dot = 0.0;
                for (axis, &mi) in m.iter().enumerate() {
                    dot += (mi as f64 / 4.0) * spec.coord(digits[axis]);
                }
                let want = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * dot);
                worst = worst.max((field.values()[flat] - want).norm());
            });
            assert!(worst < 1e-12, "offset={offset} worst={worst}");
            let back = t.forward(&field);
            let err: f64 = back
                .coeffs()
                .iter()
                .zip(expected.coeffs())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "offset={offset} err={err}");
        }
    }

    #[test]
    fn round_trip_parseval_linearity() {
        for offset in [false, true] {
            let spec = if offset {
                GridSpec::new_offset(3, 8.0, 16).unwrap()
            } else {
                grid(3, 8.0, 16)
            };
            let t = Transformer::new(spec.clone());
            let f = rand_field(&t, 11);
            let g = rand_field(&t, 12);
            let sf = t.forward(&f);
            let back = t.inverse(&sf);
            let num = back.sub(&f).l2_norm();
            assert!(num / f.l2_norm() < 1e-12, "round trip, offset={offset}");
            // Parseval.
            assert!(
                (sf.l2_norm() - f.l2_norm()).abs() / f.l2_norm() < 1e-12,
                "parseval, offset={offset}"
            );
            // Linearity.
            let a = Complex64::new(0.3, -1.1);
            let mut combo = f.clone();
            combo.add_scaled(&g, a);
            let lhs = t.forward(&combo);
            let mut rhs = sf.clone();
            let sg = t.forward(&g);
            for (r, s) in rhs.coeffs_mut().iter_mut().zip(sg.coeffs()) {
                *r += s * a;
            }
            let diff: f64 = lhs
                .coeffs()
                .iter()
                .zip(rhs.coeffs())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(diff / lhs.l2_norm() < 1e-10, "linearity, offset={offset}");
        }
    }

    #[test]
    fn translation_multiplies_by_unimodular_phase() {
        let spec = grid(3, 8.0, 8);
        let t = Transformer::new(spec.clone());
        let f = rand_field(&t, 5);
        // Shift by one cell along the last axis: g(k) = f(k - 1 mod N).
        let mut shifted = SpatialField::zeros(spec.clone());
        for_each_index(3, 8, |flat, digits| {
            let prev = if digits[2] == 0 { 7 } else { digits[2] - 1 };
            let src = (digits[0] * 8 + digits[1]) * 8 + prev;
            shifted.values_mut()[flat] = f.values()[src];
        });
        let sf = t.forward(&f);
        let sg = t.forward(&shifted);
        let mut m = [0i64; 3];
        for (flat, (a, b)) in sf.coeffs().iter().zip(sg.coeffs()).enumerate() {
            sf.signed_mode(flat, &mut m);
            let phase = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * m[2] as f64 / 8.0);
            assert!((b - a * phase).norm() < 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn band_limited_respects_band_and_seed() {
        let spec = grid(3, 8.0, 16);
        let t = Transformer::new(spec.clone());
        let band = Band::new(0.5, 1.0, 0.6);
        let (f1, s1) = t.band_limited(&band, 77).unwrap();
        let (f2, _) = t.band_limited(&band, 77).unwrap();
        let (f3, _) = t.band_limited(&band, 78).unwrap();
        assert_eq!(f1.values(), f2.values());
        assert!(f1.sub(&f3).l2_norm() > 1e-3);
        assert!((f1.l2_norm() - 1.0).abs() < 1e-12);
        for (flat, &(xpsq, xn)) in t.freq_table().iter().enumerate() {
            let c = s1.coeffs()[flat];
            if !band.contains(xpsq, xn) {
                assert_eq!(c, Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn band_limited_single_mode_is_pure() {
        let spec = grid(3, 4.0, 8);
        let t = Transformer::new(spec.clone());
        // Only xi = (0, 0, 3/4) lies in this band.
        let band = Band::new(0.7, 0.8, 0.1);
        let (f, s) = t.band_limited(&band, 3).unwrap();
        assert_eq!(s.nonzero().len(), 1);
        assert!((f.l2_norm() - 1.0).abs() < 1e-12);
        let flat = s.nonzero()[0].0;
        let mut m = [0i64; 3];
        s.signed_mode(flat, &mut m);
        assert_eq!(m, [0, 0, 3]);
    }

    #[test]
    fn band_errors() {
        let spec = grid(3, 4.0, 8);
        let t = Transformer::new(spec);
        assert!(matches!(
            t.band_limited(&Band::new(0.71, 0.74, 0.1), 0),
            Err(CoreError::EmptyBand)
        ));
        assert!(matches!(
            t.band_limited(&Band::new(0.5, 3.0, 0.1), 0),
            Err(CoreError::NyquistUncovered { .. })
        ));
    }

    #[test]
    fn f32_round_trip() {
        let spec = GridSpec::<f32>::new(3, 4.0, 8).unwrap();
        let t = Transformer::new(spec.clone());
        let band = Band::new(0.5f32, 1.0, 0.6);
        let (f, _) = t.band_limited(&band, 9).unwrap();
        let back = t.inverse(&t.forward(&f));
        assert!(back.sub(&f).l2_norm() < 1e-5);
    }
}
