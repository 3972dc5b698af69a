//! Compares SoftMax and weighted SoftMax (sigma = 2) on glyph datasets over
//! seeds 1-3 and train sizes 500 and 2000, at a chosen training budget.
//!
//! ```text
//! cargo run --release --example loss_sweep -- [epochs] [lr] [batch] [test_noise]
//! ```
//!
//! With a large budget both losses reach every test sample's bin and the
//! median error bottoms out near the within-bin floor (about 2.7 deg at K=36).

use viewpoint::circular::{CircularLabelSpace, KernelConfig};
use viewpoint::glyph::{make_glyph_dataset, render_glyph_with, GlyphOptions, LabelDistribution};
use viewpoint::metrics::EvalReport;
use viewpoint::trainer::{fit, predict, LossKind, Samples, TrainConfig};

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args()
        .nth(i)
        .map(|s| s.parse().unwrap_or_else(|_| panic!("bad argument {s:?}")))
        .unwrap_or(default)
}

fn main() {
    let epochs: usize = arg(1, 3);
    let lr: f64 = arg(2, 5e-4);
    let batch: usize = arg(3, 32);
    let noise: f64 = arg(4, viewpoint::glyph::DEFAULT_NOISE);
    let k = 36;
    let space = CircularLabelSpace::new(k).unwrap();

    let test_manifest =
        make_glyph_dataset(360, &LabelDistribution::uniform_counts(360, k), space, 999).unwrap();
    let opts = GlyphOptions {
        size: 64,
        noise,
        symmetric: false,
    };
    let mut test = Samples {
        dim: 64 * 64,
        ..Samples::default()
    };
    for r in &test_manifest.rows {
        let g = render_glyph_with(r.glyph_theta().unwrap(), r.seed, &opts).unwrap();
        test.push(&g.pixels, r.azimuth_bin, r.azimuth_deg).unwrap();
    }

    println!("epochs={epochs} lr={lr} batch={batch} test_noise={noise}");
    println!("n,seed,loss,median_error_deg,accuracy,final_train_loss");
    for n in [500usize, 2000] {
        for seed in 1..=3u64 {
            let m = make_glyph_dataset(n, &LabelDistribution::uniform_counts(n, k), space, seed)
                .unwrap();
            let train = Samples::from_manifest(&m, 64).unwrap();
            for (name, loss) in [
                ("sm", LossKind::SoftMax),
                (
                    "wsm",
                    LossKind::Weighted(KernelConfig::squared(2.0).unwrap()),
                ),
            ] {
                let cfg = TrainConfig {
                    k,
                    loss,
                    epochs,
                    learning_rate: lr,
                    batch_size: batch,
                    seed,
                    ..TrainConfig::default()
                };
                let out = fit(&train, &cfg).unwrap();
                let (_, bins) = predict(&out.params, &test).unwrap();
                let pred: Vec<f64> = bins.iter().map(|&b| space.bin_to_degrees(b)).collect();
                let r = EvalReport::evaluate(name, &pred, &test.azimuth_deg, k, 10.0).unwrap();
                println!(
                    "{n},{seed},{name},{:.3},{:.3},{:.4}",
                    r.median_angular_error_deg,
                    r.overall_accuracy(&test.azimuth_deg),
                    out.log.last().unwrap().loss
                );
            }
        }
    }
}
