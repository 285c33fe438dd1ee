//! Decomposes a synthetic 6 Hz + 25 Hz window into δ/θ/α/β bands and prints
//! each band's share of the wavelet-domain energy.

use ldgcn::signal::{
    compute_bdst, decompose_bands, to_frequency, BandEdges, EegWindow, Wavelet, SAMPLE_RATE,
    WINDOW_LEN,
};

fn main() -> ldgcn::Result<()> {
    let samples: Vec<f64> = (0..WINDOW_LEN)
        .map(|i| {
            let t = i as f64 / SAMPLE_RATE;
            (2.0 * std::f64::consts::PI * 6.0 * t).sin()
                + 0.3 * (2.0 * std::f64::consts::PI * 25.0 * t).sin()
        })
        .collect();
    let window = EegWindow::new(samples, SAMPLE_RATE, 1, None)?;
    let freq = to_frequency(&window, Wavelet::Db4)?;
    let bands = decompose_bands(&freq, SAMPLE_RATE, &BandEdges::default())?;

    let energies = bands.energies();
    let total: f64 = energies.iter().sum();
    for (name, e) in ["delta", "theta", "alpha", "beta"].iter().zip(energies) {
        println!("{name:>5}: {:5.1}%", 100.0 * e / total);
    }
    let bdst = compute_bdst(&bands);
    let peak = bdst
        .values
        .iter()
        .cloned()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    println!(
        "BDST length {} with peak magnitude {peak:.3}",
        bdst.values.len()
    );
    Ok(())
}
