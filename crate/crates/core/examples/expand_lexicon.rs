//! Fills a native lexicon out to a post vocabulary, first through
//! pretrained vectors and then by mean filling, and reports coverage.

use std::path::Path;

use gazekex::dataset::{load_posts, vocabulary};
use gazekex::expansion::{expand_lexicon, mean_fill, EmbeddingTable, Ranker};
use gazekex::gaze::{self, GazeLexicon, OsecFormat, Regularization, Source};

fn main() -> gazekex::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let records = gaze::ingest_osec(&fixtures.join("osec_news.tsv"), OsecFormat::GenericTsv, 4)?;
    let native = GazeLexicon::build(&gaze::average_trt(&records, 4)?, Regularization::NONE, None, "osec_news", "news")?;
    let vocab = vocabulary(&load_posts(&fixtures.join("overfit_posts.jsonl"))?);
    let vectors = EmbeddingTable::load(&fixtures.join("embeddings.txt"))?;

    println!("native coverage {:.3}", gaze::coverage(&native, &vocab, true)?);

    let expanded = expand_lexicon(&native, &vocab, Some(&vectors), None)?;
    let mean = mean_fill(&native, &vocab);
    for (name, lex) in [("expanded", &expanded), ("mean-filled", &mean)] {
        let added = lex.entries().values().filter(|e| e.source != Source::Native).count();
        println!("{name:>11}: +{added} words, coverage {:.3}", gaze::coverage(lex, &vocab, true)?);
    }

    let in_vocab: Vec<String> = vocab.iter().filter(|w| native.contains(w)).cloned().collect();
    let mut ranker = Ranker::new(&in_vocab, Some(&vectors), None)?;
    if let Some(word) = vocab.iter().find(|w| !native.contains(w) && vectors.contains(w)) {
        let ranking = ranker.rank(word);
        let top: Vec<String> = ranking
            .candidates
            .iter()
            .take(3)
            .map(|c| format!("{} ({:.2})", c.word, c.similarity))
            .collect();
        println!("{word}: nearest natives {}, value {:.3}", top.join(", "), expanded.value(word).unwrap_or(f64::NAN));
    }
    Ok(())
}
