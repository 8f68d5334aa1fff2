//! Builds reading-time lexicons from the two fixture eye-tracking corpora
//! under each regularization, then combines them.

use std::path::Path;

use gazekex::gaze::{self, FrequencyLexicon, GazeLexicon, OsecFormat, Regularization};

fn main() -> gazekex::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let freq = FrequencyLexicon::load(&fixtures.join("frequency.tsv"))?;
    let avg = |file: &str| -> gazekex::Result<gaze::AvgMap> {
        let records = gaze::ingest_osec(&fixtures.join(file), OsecFormat::GenericTsv, 4)?;
        gaze::average_trt(&records, 4)
    };
    let news = avg("osec_news.tsv")?;
    let wiki = avg("osec_wiki.tsv")?;

    for label in ["none", "freq", "len", "freq+len"] {
        let reg: Regularization = label.parse()?;
        let lex = GazeLexicon::build(&news, reg, Some(&freq), "osec_news", "news")?;
        let bins: Vec<usize> = ["the", "climate", "senate"]
            .iter()
            .filter_map(|w| lex.value(w))
            .map(gaze::discretize)
            .collect::<gazekex::Result<_>>()?;
        println!("{label:>9}: {} words, bins for the/climate/senate {bins:?}", lex.len());
    }

    let a = GazeLexicon::build(&news, Regularization::NONE, None, "osec_news", "news")?;
    let b = GazeLexicon::build(&wiki, Regularization::NONE, None, "osec_wiki", "wikipedia")?;
    let both = gaze::combine(&a, &b, Regularization::BOTH, Some(&freq))?;
    println!("combined {}: {} shared words", both.meta.corpus, both.len());
    Ok(())
}
