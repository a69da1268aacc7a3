//! Computes precision, recall, F1 and accuracy for a 6-class prediction run,
//! then the same run merged to the binary hate / no-hate space.

use fuselab::datakit::{merge_to_binary, LabelSpace};
use fuselab::metrics::{evaluate_labels, render_per_class, render_table, ReportRow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let space = LabelSpace::mmhs();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // A skewed truth distribution and a predictor that is right 60% of the time.
    let truths: Vec<usize> = (0..500)
        .map(|_| if rng.random_bool(0.6) { 0 } else { rng.random_range(1..space.len()) })
        .collect();
    let preds: Vec<usize> = truths
        .iter()
        .map(|&t| if rng.random_bool(0.6) { t } else { rng.random_range(0..space.len()) })
        .collect();

    let multi = evaluate_labels(&truths, &preds, &space).unwrap();
    let to_binary = |ids: &[usize]| ids.iter().map(|&l| merge_to_binary(l, &space).unwrap()).collect::<Vec<_>>();
    let binary = evaluate_labels(&to_binary(&truths), &to_binary(&preds), &LabelSpace::binary()).unwrap();

    let rows = [
        ReportRow {
            model: "noisy".into(),
            input_modes: "text + visual".into(),
            fusion: "6-class".into(),
            report: multi.clone(),
        },
        ReportRow {
            model: "noisy".into(),
            input_modes: "text + visual".into(),
            fusion: "binary".into(),
            report: binary,
        },
    ];
    println!("{}", render_table(&rows));
    println!("{}", render_per_class(&multi));
}
