//! Trains the default model on synthetic windows and scores it on a second,
//! independently generated set of subjects.

use ldgcn::data::{synth_generate, SynthConfig};
use ldgcn::pipeline::{evaluate_windows, train_windows, PipelineConfig};

fn main() -> ldgcn::Result<()> {
    let train = synth_generate(&SynthConfig {
        n_per_class: 60,
        seed: 1,
        ..SynthConfig::default()
    })?
    .windows()?;
    let test = synth_generate(&SynthConfig {
        n_per_class: 30,
        seed: 2,
        first_subject: 3,
        ..SynthConfig::default()
    })?
    .windows()?;

    let mut pc = PipelineConfig::default();
    pc.train.epochs = 20;
    let (params, history) = train_windows(&train, &pc)?;
    for e in &history.epochs {
        println!(
            "epoch {:>2}: loss {:.4}, train acc {:.3}",
            e.epoch, e.mean_loss, e.accuracy
        );
    }
    let (_, m) = evaluate_windows(&params, &pc.model, &test, &pc)?;
    println!(
        "held out: acc {:.3}, precision {:.3}, recall {:.3}, specificity {:.3}, F1 {:.3}",
        m.accuracy, m.precision, m.recall, m.specificity, m.f1
    );
    Ok(())
}
