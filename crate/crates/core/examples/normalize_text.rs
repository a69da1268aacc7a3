//! Normalizes social-media text and derives the entity tuple and TF-IDF
//! features used by the text-only baselines.
//!
//! ```text
//! cargo run --example normalize_text -- "@bob this is sooo coool #bestdayever"
//! ```

use fuselab::textprep::{extract_entity_tuple, normalize, pos_tag, Lexicons, TfidfModel};

fn main() {
    let lex = Lexicons::bundled();
    let mut inputs: Vec<String> = std::env::args().skip(1).collect();
    if inputs.is_empty() {
        inputs = vec![
            "@fiery_eyes, this is soooo coool borther! ;) #coolforever".into(),
            "teh dog quickly chased a happy cat :D http://t.co/x".into(),
            "I hate mondays #WorstDayEver".into(),
        ];
    }

    let mut docs = Vec::new();
    for raw in &inputs {
        let text = normalize(raw, lex);
        println!("raw:        {raw}");
        println!("normalized: {}", text.surface());
        let tags: Vec<String> = pos_tag(&text, lex).iter().map(|(w, t)| format!("{w}/{t:?}")).collect();
        println!("tags:       {}", tags.join(" "));
        println!("tuple:      {:?}\n", extract_entity_tuple(&text, lex).slots());
        docs.push(text.words().map(str::to_owned).collect::<Vec<_>>());
    }

    let tfidf = TfidfModel::fit(&docs).expect("non-empty corpus");
    println!("tf-idf vocabulary: {} terms", tfidf.dim());
    for (raw, doc) in inputs.iter().zip(&docs) {
        let v = tfidf.transform(doc);
        let mut top: Vec<(String, f64)> = doc.iter().map(|w| (w.clone(), v.get(tfidf.index(w).unwrap()))).collect();
        top.sort_by(|a, b| b.1.total_cmp(&a.1));
        top.dedup();
        top.truncate(3);
        println!("{raw:?}: {top:?}");
    }
}
