//! Turns raw tweets into tagged posts by treating an inside hashtag as the
//! keyphrase, then splits them.

use gazekex::dataset::{self, DatasetMode, RawTweet};

fn main() -> gazekex::Result<()> {
    for tag in ["WhiteHouse", "iPhoneRelease", "Vote2016Now", "TCOT"] {
        println!("#{tag} -> {:?}", dataset::segment_hashtag(tag));
    }

    let tweet = RawTweet {
        id: "demo".into(),
        text: "Debate tonight on #ClimatePolicy at the state house".into(),
    };
    let post = dataset::tweet_to_post(&tweet).expect("one inside hashtag");
    let tags = dataset::spans_to_tags(post.gold_spans(), post.len())?;
    for (token, tag) in post.tokens().iter().zip(&tags) {
        println!("{token:>10} {tag}");
    }

    let tweets = gazekex::synthetic::tweets(40, 8, 1);
    let (posts, stats) = dataset::build_dataset_with_stats(&tweets, DatasetMode::Generic);
    let split = dataset::split(&posts, [0.8, 0.1, 0.1], 13)?;
    println!(
        "kept {} of {} ({stats:?}); split {}/{}/{}",
        posts.len(),
        tweets.len(),
        split.train.len(),
        split.dev.len(),
        split.test.len()
    );
    Ok(())
}
