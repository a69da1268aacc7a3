//! Fits a standalone Auto-Fusion module to a cloud of latent pairs and shows
//! the reconstruction loss falling, then fuses one pair.

use fuselab::fusion::{fuse, reconstruction_loss, AutoFusion, Fusion};
use fuselab::numcore::{Graph, ParamStore, Tensor};
use fuselab::training::{Optimizer, OptimizerKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const D: usize = 6;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::new();
    let auto = AutoFusion::new(&mut store, "auto", D, D, &mut rng).unwrap();
    let params = auto.params();
    let mut opt = Optimizer::new(OptimizerKind::default(), 1e-2);

    // Visual latents drive half of the text latent, so the pair is compressible.
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..64)
        .map(|_| {
            let v: Vec<f64> = (0..D).map(|_| rng.random_range(-0.8..0.8)).collect();
            let t = (0..D).map(|i| if i % 2 == 0 { -v[i] } else { rng.random_range(-0.8..0.8) }).collect();
            (v, t)
        })
        .collect();

    for step in 0..=400 {
        let mut g = Graph::new();
        let mut losses = Vec::new();
        for (v, t) in pairs.iter().skip(step % 4 * 16).take(16) {
            let (v, t) = (g.constant(Tensor::vector(v)).unwrap(), g.constant(Tensor::vector(t)).unwrap());
            let out = auto.forward(&mut g, &store, v, t).unwrap();
            losses.push(reconstruction_loss(&mut g, out.joint, out.reconstruction).unwrap());
        }
        let stacked: Vec<_> = losses.iter().map(|&l| g.reshape(l, &[1]).unwrap()).collect();
        let all = g.concat(&stacked, 0).unwrap();
        let loss = g.mean(all).unwrap();
        if step % 50 == 0 {
            println!("step {step:>3}  J_auto {:.5}", g.scalar(loss));
        }
        g.backward(loss).unwrap();
        g.export_param_grads(&mut store);
        opt.step(&mut store, &params);
    }

    let fusion = Fusion::Auto(auto);
    let (v, t) = &pairs[0];
    let out = fuse(v, t, &fusion, &store, &mut rng).unwrap();
    let fmt = |x: &[f64]| x.iter().map(|a| format!("{a:+.2}")).collect::<Vec<_>>().join(" ");
    println!("z      {} | {}", fmt(v), fmt(t));
    println!("z_hat  {}", fmt(&out.reconstruction.unwrap()));
    println!("z_fuse {}", fmt(&out.z_fuse));
}
