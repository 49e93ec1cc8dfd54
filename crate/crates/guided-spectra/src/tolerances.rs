//! Centralized numerical tolerances.
//!
//! Every comparison threshold used by the solvers lives here, with the
//! reasoning that fixed it. Tests compare against these constants rather
//! than repeating literals.

/// Maximum allowed |A - A*| entry for a matrix accepted as Hermitian.
/// Assembly produces exact conjugate pairs; anything larger is a bug.
pub const HERMITICITY: f64 = 1e-12;

/// A band narrower than this is reported flat. Guided sweeps resolve band
/// edges to ~1e-8, so 1e-6 separates genuine dispersion from solver noise
/// with two orders of margin.
pub const FLAT_BAND: f64 = 1e-6;

/// Discrete eigenvalues closer than this to the essential-spectrum
/// intervals are discarded by the sweep: the periodic truncation fills the
/// essential intervals with exact Floquet eigenvalues, so anything genuine
/// must clear them.
pub const ESSENTIAL_DISTANCE: f64 = 1e-6;

/// Residual norm per unit eigenvector norm for certifying an exact
/// eigenvector (flat-band vectors embedded into the cylinder window).
pub const EIGENVECTOR_RESIDUAL: f64 = 1e-9;

/// Maximum fraction of eigenvector mass allowed in the outer 20% shell of
/// transverse cells for a state accepted as localized. At window W = 50 a
/// state passing with mass 0.02 decays at least like e^{-0.04 n}, which at
/// binding distance ~2e-3 from a band edge still clears the 5e-3 agreement
/// tolerance against the exact dispersion solver, while extended Floquet
/// states carry ~0.2 of their mass in the shell and are rejected by a
/// factor of ten.
pub const LOCALIZATION_SHELL_MASS: f64 = 2e-2;

/// Fraction of the window counted as the outer shell by the localization
/// filter.
pub const LOCALIZATION_SHELL_FRACTION: f64 = 0.2;

/// Discrete eigenvalues must move less than this when the window grows from
/// W = 50 to W = 60 (screened exponential decay of bound states).
pub const WINDOW_STABILITY: f64 = 1e-6;

/// The lowest unperturbed band must reach 0 at least this closely on any
/// grid containing the origin.
pub const ZERO_IN_SPECTRUM: f64 = 1e-6;

/// Clustering width for grouping repeated eigenvalues of the (small, exact)
/// guide Laplacian into eigenspaces.
pub const GUIDE_EIGENVALUE_CLUSTER: f64 = 1e-8;

/// Numerical allowance added to real-valued certificate margins. The
/// bracketing theorems are tight for some inputs (the bridge-deleted
/// bracket is an equality at the band minimum of every single-contact
/// guide), so the two independently computed sides agree only to
/// eigensolver roundoff; comparing them at zero slack would fail on
/// ~1e-14 noise. Any genuine violation exceeds this by orders.
pub const CERTIFICATE_SLACK: f64 = 1e-9;

/// Absolute tolerance of scalar root searches (dispersion relations).
pub const ROOT_FINDING: f64 = 1e-10;

/// Interval width at which one-dimensional extremum refinement stops.
pub const REFINEMENT_INTERVAL: f64 = 1e-7;

/// Sample count per pole-free interval when scanning a scalar dispersion
/// relation for sign changes.
pub const DISPERSION_SCAN_SAMPLES: usize = 64;

/// Agreement required between a rational closed form of a contact
/// potential and its dense-solve evaluation.
pub const CONTACT_POTENTIAL_MATCH: f64 = 1e-10;
