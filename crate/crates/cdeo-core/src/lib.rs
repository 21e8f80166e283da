//! Pricing lab for cheapest dominating European options (CDEOs) of American
//! claims in the Black-Scholes model.
//!
//! The library is organised around one question: given an American payoff
//! `g`, is there a European claim (in general a nonnegative measure on the
//! log-price line) whose value surface dominates `g` everywhere and coincides
//! with the American value throughout the continuation region?  The modules
//! provide the pieces needed to compute such a candidate and to test the
//! qualitative properties that certify it:
//!
//! * [`num_kernel`] — Gaussian density primitives, stable density ratios,
//!   the pricing kernel, and closed-form Black-Scholes put values/derivatives.
//! * [`payoff`] — one-sided American payoffs `g(x) = 1_{x<=K} * phi(x)`,
//!   their derivatives and structural validation.
//! * [`euro_pricer`] — European valuation of function payoffs and measure
//!   payoffs, their derivatives, and the zero-rate transformation identity.
//! * [`american_pricer`] — an independent American-option oracle
//!   (Crank-Nicolson/PSOR finite differences plus a CRR binomial tree).
//! * [`eao`] — embedded American options `am_T(f)` and the minimising
//!   maturity curve.
//! * [`cdeo`] — the discretized semi-infinite linear program, a dense
//!   revised-simplex engine with exact dual multipliers, and the
//!   constraint-generation (exchange) loop.
//! * [`verify`] — the minima curve, the H-function, and the full
//!   representability report against the finite-difference oracle.

pub mod american_pricer;
pub mod cdeo;
pub mod eao;
pub mod error;
pub mod euro_pricer;
pub mod ipm;
pub mod market;
pub mod num_kernel;
pub mod optim;
pub mod payoff;
pub mod quad;
pub mod simplex;
pub mod verify;

pub use error::{CdeoError, Result};
pub use market::MarketParams;
