//! Regenerates the committed critical-value table:
//!   cargo run -p mepgof --example golden_gen --release > crates/core/data/limit_critical_values.csv
//! Optional first argument overrides the path count (default 1e6).

use mepgof::limitlaws::*;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let paths: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(GOLDEN_PATHS);
    let mut rows = Vec::new();
    for functional in [LimitFunctional::Cvm, LimitFunctional::Ad] {
        let k = functional.default_grid();
        let root_seed = mepgof::rng::DEFAULT_ROOT_SEED;
        let t0 = Instant::now();
        let sample = sample_limit_law(functional, k, paths, default_limit_seed(root_seed)).unwrap();
        eprintln!(
            "{} k={k} paths={paths}: mean={:.4} ({:?})",
            functional.name(),
            sample.mean(),
            t0.elapsed()
        );
        for alpha in [0.10, 0.05, 0.01] {
            let cv = sample.critical_value(alpha).unwrap();
            eprintln!("  alpha={alpha}: cv={cv:.6}");
            rows.push(GoldenRow { functional, alpha, k, n_paths: paths, root_seed, critical_value: cv });
        }
    }
    print!("{}", render_golden_csv(&rows));
}
