// Rouge-L between answers, and the correctness label a most-likely answer
// gets against its gold references.
//
// ```bash
// cargo run -p cleanse --example rouge_correctness
// ```

use cleanse::evaluation::{correctness_label, DEFAULT_ROUGE_THRESHOLD};
use cleanse::rouge::{lcs_length, rouge_l, rouge_l_beta, tokenize};

pub fn run_example() -> anyhow::Result<()> {
    let gold = vec!["Barack Obama".to_string(), "President Obama".to_string()];
    for answer in ["barack obama.", "Obama", "Michelle Obama", "George W. Bush"] {
        let c = correctness_label(answer, &gold, DEFAULT_ROUGE_THRESHOLD, 1.0)?;
        println!("{answer:<16} rouge {:.3}  correct {}", c.rouge, c.correct);
    }

    let a = tokenize("The cat sat on the mat");
    let b = tokenize("the cat lay on a mat!");
    println!("tokens {:?}", a.tokens());
    println!("lcs {}", lcs_length(a.tokens(), b.tokens()));
    println!(
        "F1 {:.4}  F2 {:.4}",
        rouge_l("The cat sat on the mat", "the cat lay on a mat!"),
        rouge_l_beta("The cat sat on the mat", "the cat lay on a mat!", 2.0)
    );

    anyhow::ensure!(correctness_label("barack obama.", &gold, 0.7, 1.0)?.correct);
    anyhow::ensure!(!correctness_label("George W. Bush", &gold, 0.7, 1.0)?.correct);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
