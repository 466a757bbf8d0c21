//! Diffusion coefficients (degenerate and regularized), reaction kinetics,
//! and parameter sets for the biofilm, porous-medium, and quorum-sensing
//! models.
//!
//! The biomass diffusion coefficient `D(u) = delta * u^alpha / (1-u)^beta`
//! vanishes at `u = 0` and blows up as `u -> 1`. Its regularized surrogate
//! `D_eps` is bounded and globally Lipschitz:
//!
//! ```text
//!            | delta * eps^alpha                          u < 0
//! D_eps(u) = | delta * (u+eps)^alpha / (1-u)^beta         0 <= u <= 1-eps
//!            | delta * eps^(-beta)                        u >= 1-eps
//! ```
//!
//! With `eps = 0` the degenerate coefficient is evaluated with the argument
//! clamped to `[0, 1 - CLAMP_GUARD]`, which keeps the right-hand side a
//! total function; near-singular states are then handled by step rejection
//! in the integrator rather than by a crash.

use core::fmt;

use crate::math;

/// Clamp guard for the degenerate (`eps = 0`) coefficient. The coefficient
/// is undefined at `u = 1` and, for non-integer alpha, below `u = 0`.
pub const CLAMP_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ParamError {
    Negative(&'static str, f64),
    ExponentBelowOne(&'static str, f64),
    BadRegularization(f64),
    /// PME exponent must exceed 1, and t0/r0 must be positive.
    BadPme(&'static str, f64),
}

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamError::Negative(name, v) => write!(f, "parameter {name} = {v} must be >= 0"),
            ParamError::ExponentBelowOne(name, v) => {
                write!(f, "exponent {name} = {v} must be >= 1")
            }
            ParamError::BadRegularization(e) => {
                write!(f, "regularization epsilon = {e} must lie in [0, 1)")
            }
            ParamError::BadPme(name, v) => write!(f, "PME parameter {name} = {v} out of range"),
        }
    }
}

/// Regularization parameter for the singular diffusion coefficient.
/// `epsilon = 0` selects the degenerate coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularization {
    epsilon: f64,
}

impl Regularization {
    pub const NONE: Regularization = Regularization { epsilon: 0.0 };

    pub fn new(epsilon: f64) -> Result<Regularization, ParamError> {
        if !(epsilon >= 0.0 && epsilon < 1.0) {
            return Err(ParamError::BadRegularization(epsilon));
        }
        Ok(Regularization { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_degenerate(&self) -> bool {
        self.epsilon == 0.0
    }
}

/// Dimensionless parameters of the two-species biofilm model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiofilmParams {
    /// Cell lysis (decay) rate.
    pub k: f64,
    /// Monod half-saturation concentration.
    pub k_u: f64,
    /// Maximum substrate uptake rate.
    pub nu_u: f64,
    /// Nutrient diffusion coefficient.
    pub d_c: f64,
    /// Biomass motility coefficient.
    pub delta: f64,
    /// Porous-medium degeneracy exponent (>= 1).
    pub alpha: f64,
    /// Super-diffusion singularity exponent (>= 1).
    pub beta: f64,
    /// Concentration boundary layer thickness of the top Robin condition;
    /// 0 degenerates the condition to Dirichlet.
    pub lambda: f64,
}

impl Default for BiofilmParams {
    /// Reference parameter set of the growth-limited regime.
    fn default() -> BiofilmParams {
        BiofilmParams {
            k: 0.67,
            k_u: 0.13,
            nu_u: 530.0,
            d_c: 33.0,
            delta: 1e-8,
            alpha: 4.0,
            beta: 4.0,
            lambda: 0.0,
        }
    }
}

impl BiofilmParams {
    /// Nutrient-limited variant: lower bulk supply (K_U x5) and slower
    /// nutrient diffusion (d_c / 10).
    pub fn nutrient_limited() -> BiofilmParams {
        BiofilmParams {
            k_u: 0.65,
            d_c: 3.3,
            ..BiofilmParams::default()
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, v) in [
            ("k", self.k),
            ("k_u", self.k_u),
            ("nu_u", self.nu_u),
            ("d_c", self.d_c),
            ("delta", self.delta),
            ("lambda", self.lambda),
        ] {
            if !(v >= 0.0) {
                return Err(ParamError::Negative(name, v));
            }
        }
        if !(self.alpha >= 1.0) {
            return Err(ParamError::ExponentBelowOne("alpha", self.alpha));
        }
        if !(self.beta >= 1.0) {
            return Err(ParamError::ExponentBelowOne("beta", self.beta));
        }
        Ok(())
    }

    /// The model assumes biomass motility far below nutrient diffusion.
    /// Violations are legal but worth surfacing to the user.
    pub fn scale_separation_warning(&self) -> Option<&'static str> {
        if self.d_c <= self.delta {
            Some("d_c <= delta: nutrient diffusion should dominate biomass motility")
        } else {
            None
        }
    }
}

/// Quorum-sensing extension: biofilm parameters plus autoinducer kinetics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QsParams {
    pub base: BiofilmParams,
    /// Signal diffusion coefficient.
    pub d_s: f64,
    /// Base production rate.
    pub alpha_s: f64,
    /// Additional production rate once induced.
    pub beta_s: f64,
    /// Signal decay rate.
    pub psi: f64,
    /// Hill exponent of the induction switch.
    pub m_hill: f64,
}

impl Default for QsParams {
    fn default() -> QsParams {
        QsParams {
            base: BiofilmParams::default(),
            d_s: 16.5,
            alpha_s: 4500.0,
            beta_s: 45000.0,
            psi: 0.02,
            m_hill: 2.5,
        }
    }
}

impl QsParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        self.base.validate()?;
        for (name, v) in [
            ("d_s", self.d_s),
            ("alpha_s", self.alpha_s),
            ("beta_s", self.beta_s),
            ("psi", self.psi),
            ("m_hill", self.m_hill),
        ] {
            if !(v >= 0.0) {
                return Err(ParamError::Negative(name, v));
            }
        }
        Ok(())
    }
}

/// Porous medium equation with linear source, `u_t = div(u^m grad u) + k u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmeParams {
    /// Nonlinearity exponent m > 1.
    pub m_exp: f64,
    /// Linear growth rate.
    pub k_growth: f64,
    /// Initial time of the self-similar profile.
    pub t0: f64,
    /// Initial colony radius.
    pub r0: f64,
}

impl Default for PmeParams {
    fn default() -> PmeParams {
        PmeParams {
            m_exp: 4.0,
            k_growth: 3.0,
            t0: 0.1,
            r0: 0.1,
        }
    }
}

impl PmeParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.m_exp > 1.0) {
            return Err(ParamError::BadPme("m_exp", self.m_exp));
        }
        if !(self.t0 > 0.0) {
            return Err(ParamError::BadPme("t0", self.t0));
        }
        if !(self.r0 > 0.0) {
            return Err(ParamError::BadPme("r0", self.r0));
        }
        if !(self.k_growth >= 0.0) {
            return Err(ParamError::Negative("k_growth", self.k_growth));
        }
        Ok(())
    }
}

/// Biomass diffusion coefficient, regularized for `eps > 0` and clamped
/// degenerate for `eps = 0`. Total and non-negative for every finite `u`.
pub fn diffusion_coefficient(u: f64, params: &BiofilmParams, eps: Regularization) -> f64 {
    let e = eps.epsilon();
    if e == 0.0 {
        let uc = math::clamp(u, 0.0, 1.0 - CLAMP_GUARD);
        params.delta * math::pow(uc, params.alpha) / math::pow(1.0 - uc, params.beta)
    } else if u < 0.0 {
        params.delta * math::pow(e, params.alpha)
    } else if u >= 1.0 - e {
        params.delta * math::pow(e, -params.beta)
    } else {
        params.delta * math::pow(u + e, params.alpha) / math::pow(1.0 - u, params.beta)
    }
}

/// Derivative of [`diffusion_coefficient`] with respect to `u` (zero on the
/// constant branches).
pub fn diffusion_slope(u: f64, params: &BiofilmParams, eps: Regularization) -> f64 {
    let e = eps.epsilon();
    let (lo, hi) = if e == 0.0 {
        (0.0, 1.0 - CLAMP_GUARD)
    } else {
        (0.0, 1.0 - e)
    };
    if u < lo || u >= hi {
        return 0.0;
    }
    let num = math::pow(u + e, params.alpha);
    let den = math::pow(1.0 - u, params.beta);
    params.delta
        * (params.alpha * math::pow(u + e, params.alpha - 1.0) / den
            + params.beta * num / math::pow(1.0 - u, params.beta + 1.0))
}

/// PME diffusion coefficient `(u_+ + eps)^m`.
pub fn pme_diffusion_coefficient(u: f64, params: &PmeParams, eps: Regularization) -> f64 {
    math::pow(math::max(u, 0.0) + eps.epsilon(), params.m_exp)
}

/// Derivative of [`pme_diffusion_coefficient`] with respect to `u`.
pub fn pme_diffusion_slope(u: f64, params: &PmeParams, eps: Regularization) -> f64 {
    if u < 0.0 {
        return 0.0;
    }
    params.m_exp * math::pow(u + eps.epsilon(), params.m_exp - 1.0)
}

/// Biomass net growth `(c/(K_U + c) - k) * u`.
pub fn biomass_reaction(u: f64, c: f64, params: &BiofilmParams) -> f64 {
    (monod(c, params.k_u) - params.k) * u
}

/// Nutrient consumption magnitude `nu_U * c * u / (K_U + c)`; the assembly
/// applies it with a negative sign. Exactly zero at `c = 0`.
pub fn nutrient_reaction(u: f64, c: f64, params: &BiofilmParams) -> f64 {
    params.nu_u * monod(c, params.k_u) * u
}

/// Autoinducer net production `(alpha + beta * s^m/(1+s^m)) * u - psi * s`.
pub fn signal_reaction(u: f64, s: f64, params: &QsParams) -> f64 {
    (params.alpha_s + params.beta_s * hill(s, params.m_hill)) * u - params.psi * s
}

pub(crate) fn monod(c: f64, k_u: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c / (k_u + c)
    }
}

/// Monod derivative with respect to `c`.
pub(crate) fn monod_slope(c: f64, k_u: f64) -> f64 {
    let d = k_u + c;
    k_u / (d * d)
}

/// Hill switch `s_+^m / (1 + s_+^m)`.
pub(crate) fn hill(s: f64, m: f64) -> f64 {
    let sp = math::max(s, 0.0);
    let sm = math::pow(sp, m);
    sm / (1.0 + sm)
}

/// Hill derivative with respect to `s` (zero for `s <= 0`).
pub(crate) fn hill_slope(s: f64, m: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let sm = math::pow(s, m);
    let d = 1.0 + sm;
    m * math::pow(s, m - 1.0) / (d * d)
}
