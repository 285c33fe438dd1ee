//! Writes a synthetic dataset in the binary and CSV formats, reads both back,
//! and lists the leave-one-subject-out folds.

use ldgcn::data::{
    load_dataset, loso_splits, save_dataset, synth_generate, DatasetFormat, SynthConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = synth_generate(&SynthConfig {
        n_per_class: 10,
        ..SynthConfig::default()
    })?;
    let dir = std::env::temp_dir().join(format!("ldgcn-dataset-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    for name in ["windows.eegd", "windows.csv"] {
        let path = dir.join(name);
        let format = DatasetFormat::from_path(&path);
        save_dataset(&path, &data, format)?;
        let back = load_dataset(&path, format)?;
        let bytes = std::fs::metadata(&path)?.len();
        println!(
            "{name}: {bytes} bytes, identical after reload: {}",
            back == data
        );
    }
    for fold in loso_splits(&data)? {
        println!(
            "fold for subject {}: {} train, {} test",
            fold.subject,
            fold.train.len(),
            fold.test.len()
        );
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}
