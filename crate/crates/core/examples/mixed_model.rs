// Simulates perplexities with a known switch effect and sentence
// difficulty, then recovers them with the mixed model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use switchgram::analysis::{build_design, fit_mixed, Coding, FitOptions, PerplexityMatrix};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let design = build_design(6, Coding::Binary)?;
    let (n, g, p) = (300, design.matrix.nrows(), design.ncols());
    let mut beta = vec![0.0; p];
    beta[0] = 40.0;
    beta[1] = -6.0; // b0 on lowers perplexity
    beta[design.interaction_column(0, 1)] = 2.5;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = Normal::new(0.0, 2.0)?;
    let e = Normal::new(0.0, 1.0)?;
    let mean = &design.matrix * nalgebra::DVector::from_vec(beta.clone());
    let mut values = nalgebra::DMatrix::zeros(n, g);
    for i in 0..n {
        let ui = u.sample(&mut rng);
        for k in 0..g {
            values[(i, k)] = mean[k] + ui + e.sample(&mut rng);
        }
    }
    let l = PerplexityMatrix::new(values, design.row_names.clone())?;
    let fit = fit_mixed(&l, &design, FitOptions::default())?;
    println!("{:>8} {:>8} {:>9} {:>7}", "term", "true", "estimate", "se");
    for (i, label) in fit.labels.iter().enumerate().filter(|(i, _)| *i < 8 || beta[*i] != 0.0) {
        println!("{label:>8} {:8.3} {:9.3} {:7.3}", beta[i], fit.beta[i], fit.stderr[i]);
    }
    println!("sigma2_dif {:.3} (true 4), sigma2 {:.3} (true 1)", fit.sigma2_dif, fit.sigma2);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("mixed model");
}
