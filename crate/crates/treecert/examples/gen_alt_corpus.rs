//! Writes the seeded alternate-format model corpus used by the
//! translation-validation tests.
//!
//! ```text
//! cargo run -p treecert --example gen_alt_corpus -- crates/treecert/tests/fixtures/alt
//! ```

use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::SeedableRng;
use treecert::format::alt;
use treecert::synth::random_alt_model;

/// (features, classes, trees, max depth)
const SHAPES: [(usize, usize, usize, usize); 12] = [
    (1, 2, 1, 1),
    (1, 2, 3, 3),
    (2, 2, 5, 4),
    (2, 3, 4, 2),
    (3, 4, 6, 5),
    (4, 2, 10, 3),
    (5, 10, 8, 4),
    (8, 3, 2, 8),
    (16, 5, 12, 5),
    (64, 10, 25, 5),
    (3, 7, 1, 10),
    (6, 2, 40, 2),
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).ok_or("usage: gen_alt_corpus <output dir>")?);
    std::fs::create_dir_all(&dir)?;
    for (i, &(features, classes, trees, depth)) in SHAPES.iter().enumerate() {
        let mut rng = StdRng::seed_from_u64(1000 + i as u64);
        let model = random_alt_model(&mut rng, features, classes, trees, depth);
        let path = dir.join(format!("model_{i:02}.txt"));
        std::fs::write(&path, alt::serialize(&model))?;
        println!("{}", path.display());
    }
    Ok(())
}
