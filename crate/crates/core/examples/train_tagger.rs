//! Trains the gaze-supervised tagger on synthetic posts and scores it.

use gazekex::eval::evaluate;
use gazekex::synthetic;
use gazekex::tagger::{train, ModelConfig, Tagger, Variant};

fn main() -> gazekex::Result<()> {
    let posts = synthetic::posts(80, 3);
    let (train_posts, test_posts) = posts.split_at(60);
    let config = ModelConfig {
        variant: Variant::Ha,
        epochs: 6,
        word_emb_dim: 16,
        char_emb_dim: 8,
        char_hidden: 8,
        char_word_dim: 8,
        word_hidden: 16,
        attention_dim: 8,
        ..ModelConfig::default()
    };
    let mut tagger = Tagger::new(config, Some(synthetic::keyphrase_lexicon()), Some(synthetic::embeddings(16, 5)))?;
    let log = train(&mut tagger, train_posts, test_posts)?;
    print!("{}", log.to_text());

    let score = evaluate(&tagger, test_posts)?;
    println!("test P {:.3} R {:.3} F1 {:.3}", score.precision, score.recall, score.f1);

    let post = &test_posts[0];
    let pred = tagger.predict(post.tokens())?;
    let phrases = gazekex::eval::span_phrases(post.tokens(), &pred.spans);
    println!("{:?} -> {phrases:?}", post.tokens().join(" "));
    Ok(())
}
