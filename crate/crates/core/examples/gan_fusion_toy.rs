//! Trains a one-dimensional GAN whose generator input and target share a
//! distribution; a well-trained discriminator ends near chance.

use fuselab::fusion::GeneratorLoss;
use fuselab::training::{train_gan_toy, GanToyConfig};

fn main() {
    for generator_loss in [GeneratorLoss::NonSaturating, GeneratorLoss::Saturating] {
        println!("{generator_loss:?}");
        for seed in 0..4 {
            let r = train_gan_toy(&GanToyConfig {
                seed,
                generator_loss,
                ..GanToyConfig::default()
            })
            .unwrap();
            let tail = &r.adversarial_curve[r.adversarial_curve.len() - 100..];
            println!(
                "  seed {seed}: D accuracy {:.3} (initial {:.3}), fakes N({:.2}, {:.2}), late J_adv {:.3} (-2 ln 2 = {:.3})",
                r.discriminator_accuracy,
                r.initial_discriminator_accuracy,
                r.fake_mean,
                r.fake_std,
                tail.iter().sum::<f64>() / tail.len() as f64,
                -2.0 * 2f64.ln()
            );
        }
    }
}
