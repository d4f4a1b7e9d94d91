//! Model definitions and the derived scalar constants.
//!
//! A [`PolaronModel`] couples a quantum particle (dimension `d`, mass `m`,
//! coupling `alpha`) to a bosonic field through a radial form factor `v(|k|)`
//! and a radial dispersion `eps(|k|)`. Everything downstream is driven by a
//! handful of weighted k-space integrals of `|v|^2 / eps^q`, evaluated here by
//! d-dimensional radial quadrature.
//!
//! Convention: k-integrals carry the plain `dk` measure; position-space
//! kernels such as [`interaction_kernel`] are inverse transforms under the
//! same convention, without `(2*pi)` prefactors. In particular the kernel at
//! the origin equals the corresponding k-integral.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::{
    self, integrate_adaptive, integrate_fixed, QuadError, QuadratureSpec, RadialRule,
    ValueWithError,
};
use crate::special::{fourier_kernel, sphere_surface};

#[derive(Debug, Clone, Error)]
pub enum ModelError {
    #[error("dimension must be 1, 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("particle mass must be positive, got {0}")]
    BadMass(f64),
    #[error("coupling must be positive, got {0}")]
    BadCoupling(f64),
    #[error("form factor is identically zero on the sample grid")]
    ZeroFormFactor,
    #[error("dispersion must be positive; eps({r:.3e}) = {value:.3e}")]
    NonPositiveDispersion { r: f64, value: f64 },
    #[error("profile error: {0}")]
    Profile(#[from] ProfileError),
    #[error("model file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Error)]
pub enum ProfileError {
    #[error("decay_scale must be positive, got {0}")]
    BadDecayScale(f64),
    #[error("profile '{kind}' expects {expected} parameters, got {got}")]
    BadParams {
        kind: &'static str,
        expected: &'static str,
        got: usize,
    },
    #[error("tabulated profile needs at least 4 strictly increasing radii")]
    BadTable,
    #[error("tabulated profile evaluated at r={r:.3e}, beyond 1.5x its last knot {last:.3e}")]
    OutOfRange { r: f64, last: f64 },
}

/// Monotone cubic (Fritsch–Carlson) interpolation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tabulated {
    radii: Vec<f64>,
    values: Vec<f64>,
    tangents: Vec<f64>,
}

impl Tabulated {
    fn new(pairs: &[(f64, f64)]) -> Result<Self, ProfileError> {
        if pairs.len() < 4 {
            return Err(ProfileError::BadTable);
        }
        let radii: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let values: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        if radii.windows(2).any(|w| !(w[1] > w[0])) || radii[0] < 0.0 {
            return Err(ProfileError::BadTable);
        }
        let n = radii.len();
        let mut secants = vec![0.0; n - 1];
        for i in 0..n - 1 {
            secants[i] = (values[i + 1] - values[i]) / (radii[i + 1] - radii[i]);
        }
        let mut tangents = vec![0.0; n];
        tangents[0] = secants[0];
        tangents[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            if secants[i - 1] * secants[i] <= 0.0 {
                tangents[i] = 0.0;
            } else {
                tangents[i] = 0.5 * (secants[i - 1] + secants[i]);
            }
        }
        // Fritsch–Carlson limiter keeps the interpolant monotone per interval.
        for i in 0..n - 1 {
            if secants[i] == 0.0 {
                tangents[i] = 0.0;
                tangents[i + 1] = 0.0;
            } else {
                let a = tangents[i] / secants[i];
                let b = tangents[i + 1] / secants[i];
                let s = a * a + b * b;
                if s > 9.0 {
                    let t = 3.0 / s.sqrt();
                    tangents[i] = t * a * secants[i];
                    tangents[i + 1] = t * b * secants[i];
                }
            }
        }
        Ok(Self {
            radii,
            values,
            tangents,
        })
    }

    fn eval(&self, r: f64) -> Result<f64, ProfileError> {
        let last = *self.radii.last().unwrap();
        if r > 1.5 * last {
            return Err(ProfileError::OutOfRange { r, last });
        }
        if r >= last {
            // Flat extension up to the rejection radius.
            return Ok(*self.values.last().unwrap());
        }
        if r <= self.radii[0] {
            return Ok(self.values[0]);
        }
        let i = match self
            .radii
            .binary_search_by(|x| x.partial_cmp(&r).unwrap())
        {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let h = self.radii[i + 1] - self.radii[i];
        let t = (r - self.radii[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok(h00 * self.values[i]
            + h10 * h * self.tangents[i]
            + h01 * self.values[i + 1]
            + h11 * h * self.tangents[i + 1])
    }
}

/// Closed-form families plus a tabulated fallback; all functions of `|k|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileShape {
    /// `a * exp(-(r/w)^2 / 2)`; params `(a, w)`.
    Gaussian { amplitude: f64, width: f64 },
    /// `a * r^p` for `r <= cutoff` (no cutoff when absent), 0 beyond.
    Power {
        amplitude: f64,
        exponent: f64,
        cutoff: Option<f64>,
    },
    /// `sqrt(a + b r^2)`.
    SqrtQuadratic { a: f64, b: f64 },
    /// `offset + slope * r`.
    Linear { offset: f64, slope: f64 },
    Tabulated { table: Tabulated },
}

/// A radial profile: evaluable for all radii within its declared range.
///
/// `decay_scale` is the characteristic radial scale: for form factors the
/// radius beyond which `|v|` is negligible, for dispersions the scale used to
/// lay out sampling grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub shape: ProfileShape,
    pub decay_scale: f64,
}

impl RadialProfile {
    pub fn new(shape: ProfileShape, decay_scale: f64) -> Result<Self, ProfileError> {
        if !(decay_scale > 0.0) {
            return Err(ProfileError::BadDecayScale(decay_scale));
        }
        Ok(Self { shape, decay_scale })
    }

    pub fn gaussian(amplitude: f64, width: f64) -> Result<Self, ProfileError> {
        if !(width > 0.0) {
            return Err(ProfileError::BadParams {
                kind: "gaussian",
                expected: "positive width",
                got: 1,
            });
        }
        Self::new(ProfileShape::Gaussian { amplitude, width }, width)
    }

    pub fn power(amplitude: f64, exponent: f64, cutoff: Option<f64>) -> Result<Self, ProfileError> {
        let scale = cutoff.unwrap_or(1.0);
        Self::new(
            ProfileShape::Power {
                amplitude,
                exponent,
                cutoff,
            },
            scale,
        )
    }

    pub fn constant(value: f64) -> Result<Self, ProfileError> {
        Self::power(value, 0.0, None)
    }

    pub fn sqrt_quadratic(a: f64, b: f64) -> Result<Self, ProfileError> {
        Self::new(
            ProfileShape::SqrtQuadratic { a, b },
            (a.abs().sqrt() / b.abs().sqrt().max(1e-300)).max(1.0),
        )
    }

    pub fn linear(offset: f64, slope: f64) -> Result<Self, ProfileError> {
        Self::new(ProfileShape::Linear { offset, slope }, 1.0)
    }

    pub fn tabulated(pairs: &[(f64, f64)]) -> Result<Self, ProfileError> {
        let table = Tabulated::new(pairs)?;
        let last = *table.radii.last().unwrap();
        Self::new(ProfileShape::Tabulated { table }, last / 6.0)
    }

    pub fn eval(&self, r: f64) -> Result<f64, ProfileError> {
        match &self.shape {
            ProfileShape::Gaussian { amplitude, width } => {
                let t = r / width;
                Ok(amplitude * (-0.5 * t * t).exp())
            }
            ProfileShape::Power {
                amplitude,
                exponent,
                cutoff,
            } => {
                if let Some(rc) = cutoff {
                    if r > *rc {
                        return Ok(0.0);
                    }
                }
                if r == 0.0 && *exponent < 0.0 {
                    return Ok(f64::INFINITY);
                }
                Ok(amplitude * r.powf(*exponent))
            }
            ProfileShape::SqrtQuadratic { a, b } => Ok((a + b * r * r).sqrt()),
            ProfileShape::Linear { offset, slope } => Ok(offset + slope * r),
            ProfileShape::Tabulated { table } => table.eval(r),
        }
    }

    /// Largest radius at which the profile may be evaluated (`None` when
    /// unrestricted).
    pub fn max_radius(&self) -> Option<f64> {
        match &self.shape {
            ProfileShape::Tabulated { table } => Some(1.5 * table.radii.last().unwrap()),
            _ => None,
        }
    }

    /// Radius beyond which the profile is exactly zero, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.shape {
            ProfileShape::Power {
                cutoff: Some(rc), ..
            } => Some(*rc),
            ProfileShape::Tabulated { table } => Some(1.5 * table.radii.last().unwrap()),
            _ => None,
        }
    }
}

/// A polaron model: immutable after construction, safe to share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolaronModel {
    pub d: usize,
    pub m: f64,
    pub alpha: f64,
    pub v: RadialProfile,
    pub eps: RadialProfile,
}

impl PolaronModel {
    pub fn new(
        d: usize,
        m: f64,
        alpha: f64,
        v: RadialProfile,
        eps: RadialProfile,
    ) -> Result<Self, ModelError> {
        if !(1..=3).contains(&d) {
            return Err(ModelError::BadDimension(d));
        }
        if !(m > 0.0) {
            return Err(ModelError::BadMass(m));
        }
        if !(alpha > 0.0) {
            return Err(ModelError::BadCoupling(alpha));
        }
        let model = Self { d, m, alpha, v, eps };
        // Dispersion positivity and non-degenerate form factor, sampled on a
        // geometric grid.
        let grid = geometric_grid(1e-6 * model.eps.decay_scale, sample_ceiling(&model.eps), 512);
        let mut max_v: f64 = model.v.eval(0.0).map(|x| x.abs()).unwrap_or(0.0);
        if !max_v.is_finite() {
            max_v = 1.0; // singular-at-zero form factors count as nonzero
        }
        for &r in &grid {
            let e = model.eps.eval(r)?;
            if !(e > 0.0) {
                return Err(ModelError::NonPositiveDispersion { r, value: e });
            }
        }
        let e0 = model.eps.eval(0.0)?;
        if !(e0 > 0.0) {
            return Err(ModelError::NonPositiveDispersion { r: 0.0, value: e0 });
        }
        let v_grid = geometric_grid(1e-6 * model.v.decay_scale, sample_ceiling(&model.v), 512);
        for &r in &v_grid {
            if let Ok(x) = model.v.eval(r) {
                max_v = max_v.max(x.abs());
            }
        }
        if max_v == 0.0 {
            return Err(ModelError::ZeroFormFactor);
        }
        Ok(model)
    }

    pub fn from_json_str(s: &str) -> Result<Self, ModelError> {
        let raw: PolaronModel =
            serde_json::from_str(s).map_err(|e| ModelError::Parse(e.to_string()))?;
        Self::new(raw.d, raw.m, raw.alpha, raw.v, raw.eps)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    /// Radial integration cutoff for integrands weighted by `|v|^2`, clamped
    /// to the evaluable range of both profiles.
    pub fn radial_cutoff(&self, quad: &QuadratureSpec) -> f64 {
        let mut r_max = quad.r_max_multiplier * self.v.decay_scale;
        if let Some(cap) = self.v.max_radius() {
            r_max = r_max.min(cap);
        }
        if let Some(cap) = self.eps.max_radius() {
            r_max = r_max.min(cap);
        }
        r_max
    }
}

fn sample_ceiling(p: &RadialProfile) -> f64 {
    let hi = 1e3 * p.decay_scale;
    match p.max_radius() {
        Some(cap) => hi.min(cap),
        None => hi,
    }
}

fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (lo, hi) = (lo.max(1e-300), hi.max(lo * 2.0));
    let ratio = (hi / lo).powf(1.0 / (n as f64 - 1.0));
    (0..n).map(|i| lo * ratio.powi(i as i32)).collect()
}

/// `int |k|^power |v(k)|^2 eps(k)^(-eps_power) dk` over `R^d`, radially
/// reduced with the surface measure.
pub fn radial_integral(
    model: &PolaronModel,
    power: u32,
    eps_power: i32,
    quad: &QuadratureSpec,
) -> Result<ValueWithError, QuadError> {
    quad.validate()?;
    let d = model.d;
    let surface = sphere_surface(d);
    let rad_pow = power as i32 + d as i32 - 1;
    let f = |r: f64| -> f64 {
        let v = model.v.eval(r).unwrap_or(0.0);
        if v == 0.0 {
            return 0.0;
        }
        let e = model.eps.eval(r).unwrap_or(f64::INFINITY);
        r.powi(rad_pow) * v * v * e.powi(-eps_power)
    };
    let r_max = model.radial_cutoff(quad);
    let mut result = match quad.radial_rule {
        RadialRule::AdaptivePanelGauss => {
            integrate_adaptive(&f, 0.0, r_max, quad.rel_tol, quad.abs_tol, 8)?
        }
        RadialRule::FixedGaussLegendre => integrate_fixed(&f, 0.0, r_max, quad.radial_points),
    };
    // Tail handling: compactly supported integrands have none; otherwise the
    // octave probe either bounds it or reports divergence.
    let compact = model.v.support_radius().map(|s| s <= r_max).unwrap_or(false);
    if !compact {
        let probe_cap = model
            .v
            .max_radius()
            .into_iter()
            .chain(model.eps.max_radius())
            .fold(f64::INFINITY, f64::min);
        if probe_cap > 2.0 * r_max {
            let floor = quad.abs_tol.max(quad.rel_tol * result.value.abs()) * 1e-2;
            let tail = quad::probe_tail(&f, r_max, floor)?;
            result.error += tail;
        }
    }
    result.value *= surface;
    result.error *= surface;
    Ok(result)
}

/// Quadrature error estimates attached to [`ModelConstants`].
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct ConstantErrors {
    pub h_sq: f64,
    pub grad_h_sq: f64,
    pub lap_h_sq: f64,
    pub grad_eta_sq: f64,
    pub quartic_over_eps: f64,
    pub omega: f64,
    pub m_pek: f64,
    pub lambda_c: f64,
    pub theta_c: f64,
    pub mu_c: f64,
    pub alpha_m: f64,
}

/// Metadata for a sampled infimum.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SampledInf {
    pub value: f64,
    pub at_radius: f64,
    pub grid_points: usize,
    pub r_lo: f64,
    pub r_hi: f64,
}

/// Scalar constants derived from a model by quadrature. All fields except
/// `omega` are independent of the coupling; `omega` is reported at the
/// model's own `alpha` and [`ModelConstants::omega_at`] rescales it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConstants {
    pub d: usize,
    pub m: f64,
    /// Coupling the constants were computed at (only `omega` depends on it).
    pub alpha: f64,
    /// `int |v|^2/eps dk` — squared norm of the interaction kernel.
    pub h_sq: f64,
    /// `int k^2 |v|^2/eps dk`.
    pub grad_h_sq: f64,
    /// `int k^4 |v|^2/eps dk`.
    pub lap_h_sq: f64,
    /// `int k^2 |v|^2 dk`.
    pub grad_eta_sq: f64,
    /// `int k^4 |v|^2/eps dk` (same integral as `lap_h_sq`; kept as its own
    /// field because the mass certificate consumes it under this role).
    pub quartic_over_eps: f64,
    /// Harmonic frequency of the strong-coupling well at the model coupling:
    /// `omega^2 = (2 alpha / (d m)) * grad_h_sq`.
    pub omega: f64,
    /// Semiclassical mass scale `(2/d) int k^2 |v|^2/eps^3 dk`.
    pub m_pek: f64,
    /// `(1/2d) int k^2 |v|^2/eps^2 dk` — quadratic concentration rate.
    pub lambda_c: f64,
    /// `(1/24d) int k^4 |v|^2/eps^2 dk` — quartic concentration correction.
    pub theta_c: f64,
    /// `(1/(2d m_pek^2)) int k^4 |v|^2/eps^4 dk` — momentum-dependent
    /// concentration correction (without its P^2 factor).
    pub mu_c: f64,
    /// Coupling below which the weak-coupling branch of the ground-energy
    /// lower bound is the better one.
    pub alpha_m: f64,
    /// Sampled `inf eps` (spectral gap).
    pub gap: f64,
    /// Sampled `inf eps(k)/|k|` (critical velocity; +inf sentinel when the
    /// sampled infimum exceeds 1e12).
    pub crit_velocity: f64,
    pub err: ConstantErrors,
    pub gap_meta: SampledInf,
    pub crit_meta: SampledInf,
}

impl ModelConstants {
    /// Harmonic well frequency at an arbitrary coupling.
    pub fn omega_at(&self, alpha: f64) -> f64 {
        (2.0 * alpha / (self.d as f64 * self.m) * self.grad_h_sq).sqrt()
    }

    /// `grad_eta_sq / grad_h_sq`, the single-mode excitation scale entering
    /// the lower bounds.
    pub fn energy_ratio(&self) -> f64 {
        self.grad_eta_sq / self.grad_h_sq
    }

    /// Canonical (name, value, error) rows for CSV export.
    pub fn rows(&self) -> Vec<(&'static str, f64, f64)> {
        vec![
            ("h_sq", self.h_sq, self.err.h_sq),
            ("grad_h_sq", self.grad_h_sq, self.err.grad_h_sq),
            ("lap_h_sq", self.lap_h_sq, self.err.lap_h_sq),
            ("grad_eta_sq", self.grad_eta_sq, self.err.grad_eta_sq),
            (
                "quartic_over_eps",
                self.quartic_over_eps,
                self.err.quartic_over_eps,
            ),
            ("omega", self.omega, self.err.omega),
            ("m_pek", self.m_pek, self.err.m_pek),
            ("lambda_c", self.lambda_c, self.err.lambda_c),
            ("theta_c", self.theta_c, self.err.theta_c),
            ("mu_c", self.mu_c, self.err.mu_c),
            ("alpha_m", self.alpha_m, self.err.alpha_m),
            ("energy_ratio", self.energy_ratio(), 0.0),
            ("gap", self.gap, 0.0),
            ("crit_velocity", self.crit_velocity, 0.0),
        ]
    }
}

/// Populate every derived constant for a regular model.
pub fn compute_constants(
    model: &PolaronModel,
    quad: &QuadratureSpec,
) -> Result<ModelConstants, QuadError> {
    let d = model.d as f64;
    let m = model.m;
    let h = radial_integral(model, 0, 1, quad)?;
    let gh = radial_integral(model, 2, 1, quad)?;
    let lh = radial_integral(model, 4, 1, quad)?;
    let ge = radial_integral(model, 2, 0, quad)?;
    let k2e3 = radial_integral(model, 2, 3, quad)?;
    let k2e2 = radial_integral(model, 2, 2, quad)?;
    let k4e2 = radial_integral(model, 4, 2, quad)?;
    let k4e4 = radial_integral(model, 4, 4, quad)?;

    let omega = (2.0 * model.alpha / (d * m) * gh.value).sqrt();
    let m_pek = 2.0 / d * k2e3.value;
    let lambda_c = k2e2.value / (2.0 * d);
    let theta_c = k4e2.value / (24.0 * d);
    let mu_c = k4e4.value / (2.0 * d * m_pek * m_pek);
    let alpha_m = d / (8.0 * m)
        * ((4.0 * m * ge.value + lh.value) / gh.value.powf(1.5)).powi(2);

    let gap_meta = sampled_inf(&model.eps, |e, _r| e);
    let crit_meta = sampled_inf(&model.eps, |e, r| e / r);
    let crit_velocity = if crit_meta.value > 1e12 {
        f64::INFINITY
    } else {
        crit_meta.value
    };

    // First-order propagation for the derived scalars.
    let omega_err = if gh.value > 0.0 {
        0.5 * omega * gh.error / gh.value
    } else {
        0.0
    };
    let rel = |v: &ValueWithError| {
        if v.value != 0.0 {
            v.error / v.value.abs()
        } else {
            0.0
        }
    };
    let alpha_m_err =
        alpha_m * (2.0 * (ge.error * 4.0 * m + lh.error) / (4.0 * m * ge.value + lh.value).max(1e-300)
            + 3.0 * rel(&gh));

    Ok(ModelConstants {
        d: model.d,
        m,
        alpha: model.alpha,
        h_sq: h.value,
        grad_h_sq: gh.value,
        lap_h_sq: lh.value,
        grad_eta_sq: ge.value,
        quartic_over_eps: lh.value,
        omega,
        m_pek,
        lambda_c,
        theta_c,
        mu_c,
        alpha_m,
        gap: gap_meta.value,
        crit_velocity,
        err: ConstantErrors {
            h_sq: h.error,
            grad_h_sq: gh.error,
            lap_h_sq: lh.error,
            grad_eta_sq: ge.error,
            quartic_over_eps: lh.error,
            omega: omega_err,
            m_pek: 2.0 / d * k2e3.error,
            lambda_c: k2e2.error / (2.0 * d),
            theta_c: k4e2.error / (24.0 * d),
            mu_c: k4e4.error / (2.0 * d * m_pek * m_pek),
            alpha_m: alpha_m_err,
        },
        gap_meta,
        crit_meta,
    })
}

/// Sampled infimum of `f(eps(r), r)` over a geometric grid with golden-section
/// refinement around the best grid point. The r=0 candidate is included for
/// the plain dispersion (where it is evaluable and often the minimizer).
fn sampled_inf(eps: &RadialProfile, f: impl Fn(f64, f64) -> f64) -> SampledInf {
    let r_lo = 1e-6 * eps.decay_scale;
    let r_hi = sample_ceiling(eps);
    let n = 4096;
    let grid = geometric_grid(r_lo, r_hi, n);
    let mut best = (f64::INFINITY, r_lo);
    for &r in &grid {
        if let Ok(e) = eps.eval(r) {
            let val = f(e, r);
            if val < best.0 {
                best = (val, r);
            }
        }
    }
    // Asymptotic probes catch infima that the bounded grid only approaches
    // (only meaningful for closed-form profiles).
    if eps.max_radius().is_none() {
        for mult in [1e4, 1e6, 1e9] {
            let r = mult * eps.decay_scale;
            if let Ok(e) = eps.eval(r) {
                let val = f(e, r);
                if val < best.0 {
                    best = (val, r);
                }
            }
        }
    }
    // Golden-section refinement on the bracketing neighbours.
    let idx = grid.partition_point(|&r| r < best.1);
    let lo = if idx >= 2 { grid[idx - 2] } else { r_lo.min(best.1) };
    let hi = if idx + 1 < grid.len() {
        grid[idx + 1]
    } else {
        best.1
    };
    if hi > lo {
        let phi = 0.618_033_988_749_894_9;
        let (mut a, mut b) = (lo, hi);
        let g = |r: f64| eps.eval(r).map(|e| f(e, r)).unwrap_or(f64::INFINITY);
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let (mut f1, mut f2) = (g(x1), g(x2));
        for _ in 0..80 {
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = g(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = g(x2);
            }
        }
        let xm = 0.5 * (a + b);
        let fm = g(xm);
        if fm < best.0 {
            best = (fm, xm);
        }
    }
    SampledInf {
        value: best.0,
        at_radius: best.1,
        grid_points: n,
        r_lo,
        r_hi,
    }
}

/// One finiteness verdict inside a [`RegularityReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegralVerdict {
    pub name: String,
    pub finite: bool,
    pub value: f64,
    pub error: f64,
    pub detail: String,
}

/// Outcome of the model hypotheses checks. All verdicts are sampled, not
/// proved; the subadditivity field says so explicitly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityReport {
    pub integrals: Vec<IntegralVerdict>,
    pub regular: bool,
    pub massive: bool,
    pub gap: f64,
    pub superfluid: bool,
    pub crit_velocity: f64,
    pub subadditive_sampled: bool,
    pub subadditivity_pairs: usize,
    pub subadditivity_worst_violation: f64,
    pub gap_meta: SampledInf,
    pub crit_meta: SampledInf,
}

/// Check the integrability, gap, critical-velocity and subadditivity
/// hypotheses by quadrature and grid sampling.
pub fn validate_regularity(model: &PolaronModel, quad: &QuadratureSpec) -> RegularityReport {
    // Kernel in W^{2,2} <=> the first three; potential in W^{1,2} <=> the
    // last two (the plain |v|^2 integral is the base square-integrability).
    let cases: [(&'static str, u32, i32); 5] = [
        ("h_sq", 0, 1),
        ("grad_h_sq", 2, 1),
        ("lap_h_sq", 4, 1),
        ("eta_sq", 0, 0),
        ("grad_eta_sq", 2, 0),
    ];
    let integrals: Vec<IntegralVerdict> = cases
        .iter()
        .map(|&(name, p, q)| match radial_integral(model, p, q, quad) {
            Ok(v) => IntegralVerdict {
                name: name.to_string(),
                finite: v.value.is_finite(),
                value: v.value,
                error: v.error,
                detail: String::new(),
            },
            Err(e) => IntegralVerdict {
                name: name.to_string(),
                finite: false,
                value: f64::NAN,
                error: f64::NAN,
                detail: format!("{name} integral divergent: {e}"),
            },
        })
        .collect();
    let regular = integrals.iter().all(|v| v.finite);

    let gap_meta = sampled_inf(&model.eps, |e, _| e);
    let crit_meta = sampled_inf(&model.eps, |e, r| e / r);
    let crit_velocity = if crit_meta.value > 1e12 {
        f64::INFINITY
    } else {
        crit_meta.value
    };
    // Scale-aware threshold for "positive" sampled infima.
    let eps_scale = model
        .eps
        .eval(model.eps.decay_scale)
        .unwrap_or(1.0)
        .abs()
        .max(1e-300);
    let massive = gap_meta.value > 1e-9 * eps_scale;
    let superfluid = crit_velocity > 1e-7 * eps_scale / model.eps.decay_scale;

    // Collinear subadditivity samples on a geometric pair grid.
    let rs = geometric_grid(
        1e-3 * model.eps.decay_scale,
        sample_ceiling(&model.eps) / 2.0,
        48,
    );
    let mut pairs = 0usize;
    let mut worst: f64 = 0.0;
    for &r1 in &rs {
        for &r2 in &rs {
            if let (Ok(e1), Ok(e2), Ok(e12)) = (
                model.eps.eval(r1),
                model.eps.eval(r2),
                model.eps.eval(r1 + r2),
            ) {
                pairs += 1;
                worst = worst.max(e12 - (e1 + e2));
            }
        }
    }
    let subadditive_sampled = worst <= 1e-12 * eps_scale;

    RegularityReport {
        integrals,
        regular,
        massive,
        gap: gap_meta.value,
        superfluid,
        crit_velocity,
        subadditive_sampled,
        subadditivity_pairs: pairs,
        subadditivity_worst_violation: worst,
        gap_meta,
        crit_meta,
    }
}

/// Attractive interaction kernel of the semiclassical functional:
/// `g(r) = int (|v|^2/eps)(k) e^{ik.x} dk` at `|x| = r`.
pub fn interaction_kernel(
    model: &PolaronModel,
    r: f64,
    quad: &QuadratureSpec,
) -> Result<f64, QuadError> {
    radial_transform(model, r, 0, 1, quad)
}

/// Mass-formula kernel `R(r) = int k^2 (|v|^2/eps^3)(k) e^{ik.x} dk`; its
/// value at the origin is `(d/2) m_pek`.
pub fn mass_kernel(model: &PolaronModel, r: f64, quad: &QuadratureSpec) -> Result<f64, QuadError> {
    radial_transform(model, r, 2, 3, quad)
}

fn radial_transform(
    model: &PolaronModel,
    r: f64,
    power: u32,
    eps_power: i32,
    quad: &QuadratureSpec,
) -> Result<f64, QuadError> {
    quad.validate()?;
    if r < 0.0 {
        return Err(QuadError::InvalidSpec(format!("negative radius {r}")));
    }
    let d = model.d;
    let surface = sphere_surface(d);
    let rad_pow = power as i32 + d as i32 - 1;
    let f = |q: f64| -> f64 {
        let v = model.v.eval(q).unwrap_or(0.0);
        if v == 0.0 {
            return 0.0;
        }
        let e = model.eps.eval(q).unwrap_or(f64::INFINITY);
        q.powi(rad_pow) * v * v * e.powi(-eps_power) * fourier_kernel(d, q * r)
    };
    let r_max = model.radial_cutoff(quad);
    // More seed panels when the oscillation is fast relative to the cutoff.
    let oscillations = (r * r_max / std::f64::consts::PI).ceil() as usize;
    let seeds = (8 + oscillations).min(64);
    let out = integrate_adaptive(&f, 0.0, r_max, quad.rel_tol, quad.abs_tol, seeds)?;
    Ok(surface * out.value)
}
