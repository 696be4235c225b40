//! Bisquare ρ, ψ, ψ' and weights for the tuning constants used by default.
//!
//! cargo run --example kernels

use marloc::rho::{gaussian_consistency_constant, RhoKernel, K0_DEFAULT, K1_LOCATION_90, K1_LOCATION_95, K1_REGRESSION};

fn main() {
    for (label, k) in [
        ("S-scale", K0_DEFAULT),
        ("MM regression", K1_REGRESSION),
        ("MM90 location", K1_LOCATION_90),
        ("MM95 location", K1_LOCATION_95),
    ] {
        let r = RhoKernel::tukey(k);
        println!("{label:<14} k = {k:<5} E rho(Z) = {:.4}", r.gaussian_expectation());
    }
    println!("exact consistency constant for delta = 0.5: {:.4}\n", gaussian_consistency_constant(0.5));

    let r = RhoKernel::tukey(K1_REGRESSION);
    println!("{:>6} {:>8} {:>8} {:>8} {:>8}", "t", "rho", "psi", "psi'", "w");
    for i in -8..=8 {
        let t = i as f64 * 0.5;
        println!(
            "{t:>6.1} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            r.rho(t),
            r.psi(t),
            r.psi_prime(t),
            r.weight(t)
        );
    }
}
