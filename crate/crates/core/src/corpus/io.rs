use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{Corpus, HealthTag, HealthTriple, Ingredient, InteractionSet, Recipe, UserInteractions, UserProfile};
use crate::error::{Error, Result};

/// The six files making up a corpus directory.
pub const CORPUS_FILES: [&str; 6] = [
    "ingredients.jsonl",
    "recipes.jsonl",
    "tags.jsonl",
    "users.jsonl",
    "triples.jsonl",
    "interactions.jsonl",
];

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("corpus records serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn save_corpus(corpus: &Corpus, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_jsonl(&dir.join(CORPUS_FILES[0]), &corpus.ingredients)?;
    write_jsonl(&dir.join(CORPUS_FILES[1]), &corpus.recipes)?;
    write_jsonl(&dir.join(CORPUS_FILES[2]), &corpus.tags)?;
    write_jsonl(&dir.join(CORPUS_FILES[3]), &corpus.users)?;
    write_jsonl(&dir.join(CORPUS_FILES[4]), &corpus.triples)?;
    write_jsonl(&dir.join(CORPUS_FILES[5]), &corpus.interactions.users)
}

/// Loads and validates a corpus directory. The category count is the largest
/// category referenced by a recipe or a tag group, plus one.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Corpus> {
    let dir = dir.as_ref();
    let ingredients: Vec<Ingredient> = read_jsonl(&dir.join(CORPUS_FILES[0]))?;
    let recipes: Vec<Recipe> = read_jsonl(&dir.join(CORPUS_FILES[1]))?;
    let tags: Vec<HealthTag> = read_jsonl(&dir.join(CORPUS_FILES[2]))?;
    let users: Vec<UserProfile> = read_jsonl(&dir.join(CORPUS_FILES[3]))?;
    let triples: Vec<HealthTriple> = read_jsonl(&dir.join(CORPUS_FILES[4]))?;
    let interactions: Vec<UserInteractions> = read_jsonl(&dir.join(CORPUS_FILES[5]))?;
    let n_categories = recipes
        .iter()
        .flat_map(|r| r.categories.iter())
        .chain(tags.iter().map(|t| &t.group))
        .max()
        .map_or(0, |&c| c as usize + 1);
    let corpus = Corpus {
        n_categories,
        ingredients,
        recipes,
        tags,
        users,
        triples,
        interactions: InteractionSet { users: interactions },
    };
    corpus.validate()?;
    Ok(corpus)
}
