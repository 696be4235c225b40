//! M-scale of a residual sample: robust to a block of gross outliers, and an
//! exact fit when half the residuals vanish.
//!
//! cargo run --example m_scale

use marloc::rho::{RhoKernel, K0_DEFAULT};
use marloc::scale::{solve_m_scale, ScaleProblem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> marloc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let normal = Normal::new(0.0, 2.0).unwrap();
    let mut r: Vec<f64> = (0..200).map(|_| normal.sample(&mut rng)).collect();
    let kernel = RhoKernel::tukey(K0_DEFAULT);

    let clean = solve_m_scale(&ScaleProblem::new(&r, kernel, 0.5))?;
    let sd = (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt();
    println!("clean:        M-scale {:.4}, rms {sd:.4}, {} iterations", clean.scale, clean.iterations);

    for v in r.iter_mut().take(60) {
        *v = 1e4;
    }
    let dirty = solve_m_scale(&ScaleProblem::new(&r, kernel, 0.5))?;
    let sd = (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt();
    println!("30% at 1e4:   M-scale {:.4}, rms {sd:.1}", dirty.scale);

    let lhs = r.iter().map(|v| kernel.rho(v / dirty.scale)).sum::<f64>() / r.len() as f64;
    println!("mean rho(r/s) = {lhs:.12}");

    let mut tied = vec![0.0; 120];
    tied.extend((0..80).map(|i| i as f64));
    let exact = solve_m_scale(&ScaleProblem::new(&tied, kernel, 0.5))?;
    println!("60% zeros:    scale {}, exact fit {}", exact.scale, exact.exact_fit);
    Ok(())
}
