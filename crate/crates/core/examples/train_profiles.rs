//! Regenerates `data/profiles/*.profile` from `data/corpora/*.txt`.
//!
//! Run with `cargo run -p webcorpus-core --example train_profiles`.

use std::fs;
use std::path::Path;

use webcorpus_core::langid::train_profile;
use webcorpus_core::Lang;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    for lang in Lang::BUNDLED {
        let corpus = fs::read_to_string(data.join(format!("corpora/{lang}.txt")))?;
        let profile = train_profile(&corpus, lang)?;
        let out = data.join(format!("profiles/{lang}.profile"));
        fs::write(&out, profile.to_file_string())?;
        println!("{}: {} n-grams", out.display(), profile.ngrams.len());
    }
    Ok(())
}
