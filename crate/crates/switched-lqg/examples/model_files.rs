//! The `lqg-model v1` text format: save a generated plant with both
//! controllers, load it back, and confirm the round trip is bit-exact.
//!
//! ```text
//! cargo run --example model_files
//! ```

use switched_lqg::model::{
    load_model, random_stable_system, save_model, synth_optimal_controller, zero_fallback,
};

fn main() -> switched_lqg::Result<()> {
    let sys = random_stable_system(3, 2, 1, 2, 0.8)?;
    let primary = synth_optimal_controller(&sys)?;
    let fallback = zero_fallback(&sys)?;

    let dir = std::env::temp_dir().join("switched-lqg-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("demo.lqg");
    save_model(&path, &sys, Some(&primary), Some(&fallback))?;

    println!("wrote {}:\n", path.display());
    println!("{}", std::fs::read_to_string(&path)?);

    let loaded = load_model(&path)?;
    assert_eq!(loaded.system, sys);
    assert_eq!(loaded.primary.as_ref(), Some(&primary));
    assert_eq!(loaded.fallback.as_ref(), Some(&fallback));
    println!("round trip: bit-exact");
    Ok(())
}
