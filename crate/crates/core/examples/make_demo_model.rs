//! Regenerates `assets/demo.model` from the seeded synthetic demo corpus.
//!
//! cargo run --release -p longseg --example make_demo_model [-- OUT]

use std::path::PathBuf;

use longseg::segmenter::{FeatureModel, TrainConfig};
use longseg::synth::demo_corpus;

fn main() -> anyhow::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets/demo.model"));
    let (model, report) = FeatureModel::train(&demo_corpus(200, 4..=12, 7), longseg::synth::demo_features(), &TrainConfig::default())?;
    for (i, loss) in report.epoch_losses.iter().enumerate() {
        println!("epoch {} loss {loss:.6}", i + 1);
    }
    model.save(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}
