// Initial confidence scores from logits and token log-probabilities.

use multicalib::io::{score_csv, ScoreKind};
use multicalib::scoring::{inverse_perplexity_score, multiple_choice_score, true_false_score, SequenceLogProbs, TokenLogits};

fn main() -> multicalib::Result<()> {
    let logits = TokenLogits::new([("True", 3.1), ("False", 1.4), ("Maybe", 0.2)])?;
    println!("true/false score: {:.4}", logits.true_false("True", "False")?);
    println!("same with shifted logits: {:.4}", true_false_score(103.1, 101.4)?);

    // four prompt tokens, then a three-token answer
    let seq = SequenceLogProbs::new(vec![-2.0, -0.5, -1.2, -0.1, -0.3, -0.05, -0.9], 4)?;
    println!("inverse perplexity of the answer: {:.4}", inverse_perplexity_score(&seq));

    println!("multiple choice (A-D): {:.4}", multiple_choice_score(&[2.0, 0.5, 0.1, -1.0])?);

    let csv = "logit_true,logit_false,label,g:math\n2.0,0.1,1,1\n-0.4,0.3,0,0\n";
    print!("{}", score_csv(csv, ScoreKind::TrueFalse)?);
    Ok(())
}
