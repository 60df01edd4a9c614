//! Writes seeded synthetic DA corpora for trying out the pipeline.
//!
//! Usage: `make_corpus <dir> [train_sources] [test_sources]`

use std::path::PathBuf;

use mteval_core::corpus::tsv::write_segments;
use mteval_core::encoder::HashedProvider;
use mteval_core::synthetic::{generate_da, SyntheticConfig};

fn main() -> mteval_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data".to_string()));
    let train: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let test: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let provider = HashedProvider::new(32, 2, 7)?;

    let train_cfg = SyntheticConfig {
        sources: train,
        seed: 1,
        id_prefix: "train".to_string(),
        ..SyntheticConfig::default()
    };
    write_segments(&dir.join("train.tsv"), &generate_da(&train_cfg, &provider)?)?;

    let mut records = Vec::new();
    for (i, lp) in ["xx-yy", "xx-zz"].iter().enumerate() {
        let cfg = SyntheticConfig {
            sources: test / 2,
            seed: 2 + i as u64,
            lang_pair: lp.to_string(),
            id_prefix: format!("{lp}-"),
            ..SyntheticConfig::default()
        };
        records.extend(generate_da(&cfg, &provider)?);
    }
    write_segments(&dir.join("test.tsv"), &records)?;
    println!("wrote {} and {}", dir.join("train.tsv").display(), dir.join("test.tsv").display());
    Ok(())
}
