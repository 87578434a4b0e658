//! Dynamic Variance-Gamma stochastic-volatility model.
//!
//! Discrete-time log-returns follow a conditional normal variance-mean
//! mixture whose Gamma mixing distribution has a time-varying shape driven
//! by an affine recursion:
//!
//! ```text
//! Y_t = r + λ·V_t + σ·√V_t·Z_t,    V_t | F_{t-1} ~ Gamma(a·h_t, 1),
//! h_t = α₀ + α₁·V_{t-1} + β₁·h_{t-1}.
//! ```
//!
//! The crate provides the mixture distribution kernel ([`mixture`]), the
//! state dynamics and simulation ([`dynamics`]), the recursive terminal
//! characteristic function ([`charfn`]), the conditional Esscher measure
//! change ([`esscher`]), semianalytical and Monte Carlo option pricing
//! ([`pricing`]), quadrature-based maximum likelihood over five nested
//! historical models ([`estimation`]) and option-surface calibration with
//! comparator models ([`calibration`]).

pub mod calibration;
pub mod charfn;
pub mod dynamics;
pub mod error;
pub mod esscher;
pub mod estimation;
mod integrate;
pub mod mixture;
pub mod optim;
pub mod pricing;
pub mod quadrature;

pub use error::{DvgError, Result};

pub use charfn::{coef_recursion, terminal_mgf, AffineGarchModel, CoefPath};
pub use dynamics::{
    simulate_p, simulate_q, step_state, submodel, DvgParams, PathSample, QParams, SimConfig,
    Submodel,
};
pub use esscher::{
    esscher_map, esscher_parameter, radon_nikodym_weight, to_risk_neutral, EsscherMap,
};
pub use mixture::{Moments, SvgParams, VgParams};
pub use pricing::{
    density_inversion, price_fourier, price_mc, DensityGrid, IntegrationConfig, McResult,
    OptionKind, PricingRequest,
};
pub use quadrature::GaussLaguerre;
