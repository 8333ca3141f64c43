//! The algebraic identities checked on random data: skew-symmetry,
//! deconvolution, filter contraction and the discrete divergence.
//!
//! `cargo run --release --example property_suite`

use leray_fem::verification::{run_property_suite, PropertySuiteConfig};

fn main() {
    let suite = run_property_suite(&PropertySuiteConfig::default()).expect("suite set-up");
    for c in &suite.checks {
        println!(
            "{:<6} {:<48} {:.3e} (tol {:.0e})",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    println!("{} of {} passed", suite.checks.iter().filter(|c| c.passed).count(), suite.checks.len());
}
