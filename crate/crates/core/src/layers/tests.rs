use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::numcore::{grad_check_params, Graph, ParamStore, Tensor};

fn text_encoder(store: &mut ParamStore, latent: usize, seed: u64) -> RecurrentTextEncoder {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RecurrentTextEncoder::new(
        store,
        "text",
        TextEncoderConfig {
            vocab_size: 12,
            embed_dim: 5,
            hidden_dim: 3,
            latent_dim: latent,
        },
        &mut rng,
    )
}

fn zero_all(store: &mut ParamStore) {
    let n = store.num_values();
    store.assign_flat(&vec![0.0; n]).unwrap();
}

#[test]
fn dense_identity_weights() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let layer = DenseLayer::new(&mut store, "d", 3, 3, Activation::Identity, &mut rng);
    store
        .set_value(layer.weight, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
        .unwrap();
    store.set_value(layer.bias, &[0.0; 3]).unwrap();
    assert_eq!(dense_forward(&[0.5, -2.0, 7.0], &layer, &store).unwrap(), vec![0.5, -2.0, 7.0]);
}

#[test]
fn dense_zero_softmax_is_uniform() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let layer = DenseLayer::new(&mut store, "d", 4, 2, Activation::Softmax, &mut rng);
    zero_all(&mut store);
    assert_eq!(dense_forward(&[1.0, 2.0, 3.0, 4.0], &layer, &store).unwrap(), vec![0.5, 0.5]);
}

#[test]
fn dense_hand_arithmetic() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let layer = DenseLayer::new(&mut store, "d", 2, 1, Activation::Identity, &mut rng);
    store.set_value(layer.weight, &[1.0, 1.0]).unwrap();
    store.set_value(layer.bias, &[1.0]).unwrap();
    assert_eq!(dense_forward(&[2.0, 3.0], &layer, &store).unwrap(), vec![6.0]);
    assert!(matches!(
        dense_forward(&[2.0], &layer, &store),
        Err(Error::Dimension { .. })
    ));
}

#[test]
fn single_token_attends_to_itself() {
    let mut store = ParamStore::new();
    let enc = text_encoder(&mut store, 4, 1);
    let (z, attn) = encode_text(&[3], &enc, &store).unwrap();
    assert_eq!(attn, vec![1.0]);
    assert_eq!(z.len(), 4);
}

#[test]
fn zero_parameters_give_zero_text_latent() {
    let mut store = ParamStore::new();
    let enc = text_encoder(&mut store, 4, 2);
    zero_all(&mut store);
    let (z, attn) = encode_text(&[1, 5, 7, 2], &enc, &store).unwrap();
    assert!(z.iter().all(|v| *v == 0.0), "{z:?}");
    assert!(attn.iter().all(|a| (*a - 0.25).abs() < 1e-15));
}

#[test]
fn text_latent_has_configured_dimension() {
    let mut store = ParamStore::new();
    let enc = text_encoder(&mut store, 64, 3);
    let (z, attn) = encode_text(&[1, 2, 3, 4, 5, 6], &enc, &store).unwrap();
    assert_eq!(z.len(), 64);
    assert_eq!(attn.len(), 6);
    assert!((attn.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn empty_sequence_is_rejected() {
    let mut store = ParamStore::new();
    let enc = text_encoder(&mut store, 4, 4);
    assert!(matches!(encode_text(&[], &enc, &store), Err(Error::Input(_))));
}

#[test]
fn out_of_vocabulary_ids_map_to_oov_slot() {
    let mut store = ParamStore::new();
    let enc = text_encoder(&mut store, 4, 5);
    let a = encode_text(&[0, 3], &enc, &store).unwrap();
    let b = encode_text(&[999, 3], &enc, &store).unwrap();
    assert_eq!(a, b);
}

#[test]
fn tied_directions_are_symmetric_on_palindromes() {
    let mut store = ParamStore::new();
    let enc = text_encoder(&mut store, 4, 6);
    // tie the backward direction to the forward one
    let w = store.get(enc.forward_cell.weight).data().to_vec();
    let b = store.get(enc.forward_cell.bias).data().to_vec();
    store.set_value(enc.backward_cell.weight, &w).unwrap();
    store.set_value(enc.backward_cell.bias, &b).unwrap();
    // mirror the attention query across the two halves
    let q = store.get(enc.query).data().to_vec();
    let half = q.len() / 2;
    let mirrored: Vec<f64> = q[..half].iter().chain(&q[..half]).copied().collect();
    store.set_value(enc.query, &mirrored).unwrap();

    let seq = [4, 7, 2, 7, 4];
    let (_, attn) = encode_text(&seq, &enc, &store).unwrap();
    for t in 0..seq.len() {
        assert!((attn[t] - attn[seq.len() - 1 - t]).abs() < 1e-12, "{attn:?}");
    }
    let reversed: Vec<usize> = seq.iter().rev().copied().collect();
    assert_eq!(encode_text(&reversed, &enc, &store).unwrap().1, attn);
}

fn conv_encoder(store: &mut ParamStore, latent: usize, seed: u64) -> ConvVisualEncoder {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ConvVisualEncoder::new(store, "visual", 1, [3, 4], latent, &mut rng)
}

#[test]
fn zero_grid_with_zero_biases_gives_zero_visual_latent() {
    let mut store = ParamStore::new();
    let enc = conv_encoder(&mut store, 8, 1);
    for id in [enc.biases[0], enc.biases[1], enc.projection.bias] {
        let n = store.get(id).numel();
        store.set_value(id, &vec![0.0; n]).unwrap();
    }
    let z = encode_visual(&Tensor::zeros(&[8, 8, 1]), &enc, &store).unwrap();
    assert!(z.iter().all(|v| *v == 0.0));
}

#[test]
fn visual_encoding_is_deterministic_and_sized() {
    let grid = {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        Tensor::from_fn(&[16, 16, 1], |_| rng.random_range(0.0..1.0))
    };
    let run = || {
        let mut store = ParamStore::new();
        let enc = conv_encoder(&mut store, 64, 42);
        encode_visual(&grid, &enc, &store).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.len(), 64);
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn latent_size_is_independent_of_grid_size() {
    let mut store = ParamStore::new();
    let enc = conv_encoder(&mut store, 8, 3);
    for side in [6, 7, 10, 16] {
        let z = encode_visual(&Tensor::filled(&[side, side + 1, 1], 0.3), &enc, &store).unwrap();
        assert_eq!(z.len(), 8);
    }
}

#[test]
fn grid_smaller_than_receptive_field_is_rejected() {
    let mut store = ParamStore::new();
    let enc = conv_encoder(&mut store, 8, 3);
    assert!(matches!(
        encode_visual(&Tensor::zeros(&[5, 8, 1]), &enc, &store),
        Err(Error::Dimension { .. })
    ));
    assert!(matches!(
        encode_visual(&Tensor::zeros(&[8, 8, 2]), &enc, &store),
        Err(Error::Dimension { .. })
    ));
}

#[test]
fn text_encoder_gradients_over_long_sequences() {
    let mut store = ParamStore::new();
    let enc = text_encoder(&mut store, 4, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for len in [1, 5, 20] {
        let tokens: Vec<usize> = (0..len).map(|_| rng.random_range(0..12)).collect();
        let report = grad_check_params(
            &mut store,
            |g, s| {
                let e = enc.encode(g, s, &tokens)?;
                g.squared_norm(e.latent)
            },
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(report.passed, "len {len}: {}", report.max_rel_err);
    }
}

#[test]
fn visual_encoder_gradients() {
    let mut store = ParamStore::new();
    let enc = conv_encoder(&mut store, 4, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let grid = Tensor::from_fn(&[7, 8, 1], |_| rng.random_range(-1.0..1.0));
    let report = grad_check_params(
        &mut store,
        |g, s| {
            let x = g.constant(grid.clone())?;
            let z = enc.encode(g, s, x)?;
            g.squared_norm(z)
        },
        1e-5,
        1e-4,
    )
    .unwrap();
    assert!(report.passed, "{}", report.max_rel_err);
}

#[test]
fn dense_gradients_for_every_activation() {
    for act in [
        Activation::Identity,
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::Relu,
        Activation::Softmax,
    ] {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let layer = DenseLayer::new(&mut store, "d", 4, 3, act, &mut rng);
        let bias = store.get(layer.bias).numel();
        let b: Vec<f64> = (0..bias).map(|_| rng.random_range(-0.5..0.5)).collect();
        store.set_value(layer.bias, &b).unwrap();
        let x = Tensor::vector(&[0.3, -0.7, 1.1, 0.2]);
        let w = Tensor::vector(&[0.9, -0.4, 0.6]);
        let report = grad_check_params(
            &mut store,
            |g, s| {
                let xv = g.constant(x.clone())?;
                let y = layer.forward(g, s, xv)?;
                let wv = g.constant(w.clone())?;
                let p = g.mul(y, wv)?;
                g.sum(p)
            },
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(report.passed, "{act:?}: {}", report.max_rel_err);
    }
}

#[test]
fn feature_encoder_projects_to_latent() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let enc = VisualEncoder::new(
        &mut store,
        "visual",
        VisualEncoderConfig::Features {
            feature_dim: 6,
            latent_dim: 4,
        },
        &mut rng,
    );
    let mut g = Graph::new();
    let x = g.constant(Tensor::vector(&[0.1; 6])).unwrap();
    let z = enc.encode(&mut g, &store, x).unwrap();
    assert_eq!(g.value(z).shape(), &[4]);
}
