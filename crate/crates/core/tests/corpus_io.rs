use std::fs;

use dishrec::corpus::{generate_synthetic, load_corpus, save_corpus, GeneratorConfig, CORPUS_FILES};
use dishrec::Error;

fn small() -> dishrec::corpus::Corpus {
    generate_synthetic(&GeneratorConfig { n_users: 30, ..GeneratorConfig::desk() }, 2).unwrap()
}

#[test]
fn round_trip_is_lossless_and_byte_stable() {
    let corpus = small();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    save_corpus(&corpus, a.path()).unwrap();
    let back = load_corpus(a.path()).unwrap();
    assert_eq!(back, corpus);
    save_corpus(&back, b.path()).unwrap();
    for f in CORPUS_FILES {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn truncated_line_reports_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    save_corpus(&small(), dir.path()).unwrap();
    let path = dir.path().join("users.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let cut = lines[2].len() / 2;
    lines[2].truncate(cut);
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    match load_corpus(dir.path()) {
        Err(Error::Parse { path: p, line, .. }) => {
            assert!(p.ends_with("users.jsonl"), "{}", p.display());
            assert_eq!(line, 3);
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn dangling_ingredient_is_an_integrity_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut corpus = small();
    corpus.recipes[0].ingredients.push(10_000);
    save_corpus(&corpus, dir.path()).unwrap();
    assert!(matches!(load_corpus(dir.path()), Err(Error::Integrity(_))));
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    save_corpus(&small(), dir.path()).unwrap();
    fs::remove_file(dir.path().join("recipes.jsonl")).unwrap();
    assert!(matches!(load_corpus(dir.path()), Err(Error::Io { .. })));
}
