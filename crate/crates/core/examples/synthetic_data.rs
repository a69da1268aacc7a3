//! Generates the two synthetic multimodal tasks and shows what each modality
//! alone can tell about the label.

use fuselab::datakit::{
    bayes_single_modality_accuracy, generate_synthetic, mutual_information_bits, write_jsonl, SyntheticSpec,
    SyntheticTask,
};

fn main() {
    let out_dir = std::env::temp_dir().join("fuselab-synthetic");
    std::fs::create_dir_all(&out_dir).unwrap();
    for task in [SyntheticTask::XorCrossmodal, SyntheticTask::UnimodalSeparable] {
        let data = generate_synthetic(&SyntheticSpec::new(task, 2000, 7)).unwrap();
        let labels: Vec<usize> = data.dataset.publications.iter().map(|p| p.label).collect();
        let bits = |b: &[bool]| b.iter().map(|&x| usize::from(x)).collect::<Vec<_>>();
        let (visual_opt, text_opt) = bayes_single_modality_accuracy(task);

        println!("{task:?}");
        println!("  label histogram        {:?}", data.dataset.label_histogram());
        println!("  I(visual bit; label)   {:.4} bits", mutual_information_bits(&bits(&data.visual_bits), &labels));
        println!("  I(text bit; label)     {:.4} bits", mutual_information_bits(&bits(&data.text_bits), &labels));
        println!("  best unimodal accuracy visual {visual_opt:.2}, text {text_opt:.2}");
        let first = &data.dataset.publications[0];
        println!("  first sample text      {:?}", first.text);

        let path = out_dir.join(format!("{task:?}.jsonl").to_lowercase());
        write_jsonl(&data.dataset, &path).unwrap();
        println!("  written to {}", path.display());
    }
}
