//! Compares where attention lands on the gold keyphrase with and without
//! gaze supervision.

use gazekex::eval::{attention_rank, median_rank, rank_histogram};
use gazekex::synthetic;
use gazekex::tagger::{train, ModelConfig, Tagger, Variant};

fn trained(variant: Variant, posts: &[gazekex::dataset::Post]) -> gazekex::Result<Tagger> {
    let config = ModelConfig {
        variant,
        epochs: 10,
        word_emb_dim: 16,
        char_emb_dim: 8,
        char_hidden: 8,
        char_word_dim: 8,
        word_hidden: 16,
        attention_dim: 8,
        ..ModelConfig::default()
    };
    let mut t = Tagger::new(config, Some(synthetic::keyphrase_lexicon()), Some(synthetic::embeddings(16, 5)))?;
    train(&mut t, posts, &[])?;
    Ok(t)
}

fn main() -> gazekex::Result<()> {
    let posts = synthetic::posts(90, 21);
    let (train_posts, test_posts) = posts.split_at(60);
    let att = trained(Variant::Att, train_posts)?;
    let ha = trained(Variant::Ha, train_posts)?;

    let ranks = |t: &Tagger| test_posts.iter().map(|p| attention_rank(t, p)).collect::<gazekex::Result<Vec<_>>>();
    let (ra, rh) = (ranks(&att)?, ranks(&ha)?);
    println!("median rank: att {:?}, ha {:?}", median_rank(&ra), median_rank(&rh));
    println!("rank\tatt\tha");
    for row in rank_histogram(&ra, &rh).iter().take(8) {
        println!("{}\t{}\t{}", row.rank, row.count_a, row.count_b);
    }
    Ok(())
}
