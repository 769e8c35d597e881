//! Spatial birth-death population dynamics with two competition mechanisms.
//!
//! A population of point particles in `R^d` (or on a torus) evolves by
//! density-independent death at rate `m` and by dispersal births: a parent at
//! `y` sends offspring to `x` with kernel `a+(x - y)`, optionally enhanced by
//! crowding around the parent through a kernel `b+`. Competition acts through
//! a suppression kernel `phi` in one of two ways:
//!
//! * **establishment**: the newborn at `x` survives with probability
//!   `exp(-E(x))`, where `E(x)` is the interaction energy between `x` and the
//!   current population;
//! * **fecundity**: the parent's birth activity is damped by
//!   `exp(-E(y))` instead.
//!
//! The crate provides the model's rate kernels and their regularity
//! constants ([`kernels`]), combinatorial transforms on finite
//! configurations used to expand the generator in correlation-function form
//! ([`calculus`]), closed-form expansions of the birth rates together with
//! their small-parameter scalings and mean-field (Vlasov) limits, sufficient
//! conditions for well-posedness of the correlation evolution and for the
//! kinetic fixed-point construction ([`conditions`]), an exact event-driven
//! simulator ([`ibm`]), deterministic solvers for the kinetic equations
//! ([`kinetics`]), a mesoscopic-limit study harness ([`mesoscopic`]), and a
//! randomized self-verification suite ([`verify`]).

pub mod calculus;
pub mod conditions;
pub mod configuration;
pub mod error;
pub mod geometry;
pub mod ibm;
pub mod kernels;
pub mod kinetics;
pub mod mesoscopic;
pub mod model;
pub mod quadrature;
pub mod verify;

pub use error::CoreError;
