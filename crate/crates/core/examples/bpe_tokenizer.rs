//! Train a BPE vocabulary, tokenize, and round-trip it through its file format.
//!
//! cargo run --example bpe_tokenizer

use universa::bpe::{train_bpe, BpeModel};

fn main() -> universa::Result<()> {
    let corpus = [
        "the quiet river runs under the old stone bridge",
        "the old bridge is quiet in the morning",
        "rain runs over the stone walls",
    ];
    let bpe = train_bpe(&corpus, 60)?;
    println!("vocabulary {} pieces, {} merges", bpe.vocab_size(), bpe.merges().len());
    for (l, r) in bpe.merges().iter().take(5) {
        println!("  merge {l} + {r}");
    }

    let text = "The old river";
    let tokens = bpe.encode(text);
    let pieces: Vec<&str> = tokens.ids.iter().map(|&id| bpe.piece(id).unwrap()).collect();
    println!("{text:?} -> {:?} {pieces:?}", tokens.ids);
    println!("decoded: {:?}", bpe.decode(&tokens)?);
    println!("unseen word: {:?}", bpe.encode("zebra").ids);

    let dir = std::env::temp_dir().join("universa-bpe-example");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bpe.txt");
    bpe.save(&path)?;
    let reloaded = BpeModel::load(&path)?;
    assert_eq!(reloaded, bpe);
    println!("saved and reloaded {}", path.display());
    Ok(())
}
