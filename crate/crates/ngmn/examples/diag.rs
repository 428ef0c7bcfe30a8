use ngmn::activations::Activation;
use ngmn::decision::AlphaMode;
use ngmn::network::{self, ModelConfig, TrainOptions};
use ngmn::synth;

fn main() {
    let sig = Activation::sigmoid();
    for sep in [6.0, 8.0] {
        for noise in [0.5, 1.0] {
            for (mode, mname) in [(AlphaMode::SelfTuned, "aw"), (AlphaMode::Uniform, "uni")] {
                let mut good = 0;
                let mut pairs = Vec::new();
                for seed in 0..10u64 {
                    let data = synth::blobs(600, 10, 3, sep, noise, 42);
                    let y = data.one_hot();
                    let config = ModelConfig {
                        hidden_widths: vec![10, 8],
                        activation: sig,
                        lambda: 0.5,
                        alpha_mode: mode,
                        seed,
                    };
                    let options = TrainOptions { max_iter: 10, tol: 0.0, ..TrainOptions::default() };
                    let model = network::train(&data.x, &y, &config, &options).unwrap();
                    let acc = network::model_accuracy(&model, &data.x, &data.labels).unwrap();
                    let mut conv = None;
                    for w in model.trace.windows(2) {
                        let rel = (w[1].loss - w[0].loss).abs() / w[0].loss.abs().max(1e-12);
                        if rel < 1e-3 { conv = Some(w[1].iter); break; }
                    }
                    if acc >= 0.95 && conv.is_some() { good += 1; pairs.push((seed, acc, conv)); }
                }
                println!("sig sep {sep} noise {noise} {mname}: {good}/10 pass both; {pairs:?}");
            }
        }
    }
}
