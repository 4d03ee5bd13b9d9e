//! Numerical checks of the identities a weak solution and its Galerkin
//! approximations satisfy: weak-form residuals, energy bounds, the L^2
//! identity, the sphere functional and pointwise orthogonality.

mod checks;
mod ledger;
mod weak;

pub use checks::{
    energy_ledger_check, mass_identity_check, orthogonality_probe, sphere_report, BoundConstants, EnergyCheck,
    EnergyPoint, MassCheck, OrthogonalityReport, SphereReport,
};
pub use ledger::{
    sphere_functional, sphere_violation, DiagnosticsLedger, LedgerRecorder, LedgerRow, LEDGER_COLUMNS,
};
pub use weak::{
    standard_battery, weak_residual, Pairings, Profile, TestFunction, WeakAccumulator, WeakEntry, WeakEvaluator,
    WeakForm, WeakResidualReport, BATTERY_MODES,
};

#[cfg(test)]
mod tests;
