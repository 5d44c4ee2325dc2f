use std::io::BufRead;
use std::path::Path;

use serde::Deserialize;

use super::relations::{RelationList, RelationNormalizer};
use super::sentence::AnnotatedSentence;
use super::tokenize::{Tokenizer, WordTokenizer};
use crate::error::{Error, Result};
use crate::triple::Triple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DatasetFormat {
    #[default]
    Jsonl,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    id: Option<String>,
    text: String,
    #[serde(default)]
    triples: Vec<RawTriple>,
}

#[derive(Debug, Deserialize)]
struct RawTriple {
    s: String,
    p: String,
    o: String,
}

/// Everything needed to turn raw records into [`AnnotatedSentence`]s.
pub struct DatasetLoader {
    pub tokenizer: Box<dyn Tokenizer>,
    pub normalizer: RelationNormalizer,
    pub relations: RelationList,
}

impl DatasetLoader {
    pub fn new(relations: RelationList) -> Self {
        DatasetLoader {
            tokenizer: Box::new(WordTokenizer),
            normalizer: RelationNormalizer::nyt(),
            relations,
        }
    }

    pub fn with_normalizer(mut self, normalizer: RelationNormalizer) -> Self {
        self.normalizer = normalizer;
        self
    }

    pub fn with_tokenizer(mut self, tokenizer: Box<dyn Tokenizer>) -> Self {
        self.tokenizer = tokenizer;
        self
    }

    pub fn load(&self, path: &Path, format: DatasetFormat) -> Result<Vec<AnnotatedSentence>> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        match format {
            DatasetFormat::Jsonl => self.read_jsonl(std::io::BufReader::new(file), path),
        }
    }

    pub fn read_jsonl(&self, reader: impl BufRead, path: &Path) -> Result<Vec<AnnotatedSentence>> {
        let mut out = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(self.parse_line(&line, i + 1)?);
        }
        Ok(out)
    }

    /// Parses one record; `line_no` is 1-based and also the default id.
    pub fn parse_line(&self, line: &str, line_no: usize) -> Result<AnnotatedSentence> {
        let rec: RawRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let mut triples = Vec::with_capacity(rec.triples.len());
        for t in rec.triples {
            let p = self.normalizer.normalize(&t.p)?;
            if !self.relations.contains(&p) {
                return Err(Error::Validation(format!(
                    "line {line_no}: unknown predicate `{}` in triple ({}, {}, {})",
                    t.p, t.s, t.p, t.o
                )));
            }
            triples.push(Triple::new(t.s, p, t.o));
        }
        let id = rec.id.unwrap_or_else(|| line_no.to_string());
        AnnotatedSentence::new(id, rec.text, triples, self.tokenizer.as_ref())
    }
}

pub fn load_dataset(
    path: &Path,
    format: DatasetFormat,
    loader: &DatasetLoader,
) -> Result<Vec<AnnotatedSentence>> {
    loader.load(path, format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn loader() -> DatasetLoader {
        DatasetLoader::new(RelationList::new(["founders", "location contains"]))
    }

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_single_record() {
        let f = write(
            r#"{"text":"Bill Gates founded Microsoft.","triples":[{"s":"Bill Gates","p":"founders","o":"Microsoft"}]}"#,
        );
        let ds = loader().load(f.path(), DatasetFormat::Jsonl).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].triples.len(), 1);
        assert_eq!(ds[0].id, "1");
        assert_eq!(ds[0].triples[0], Triple::new("Bill Gates", "founders", "Microsoft"));
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let f = write("");
        assert!(loader().load(f.path(), DatasetFormat::Jsonl).unwrap().is_empty());
    }

    #[test]
    fn unknown_predicate_is_a_validation_error() {
        let f = write(r#"{"text":"A met B","triples":[{"s":"A","p":"met","o":"B"}]}"#);
        let err = loader().load(f.path(), DatasetFormat::Jsonl).unwrap_err();
        match err {
            Error::Validation(msg) => assert!(msg.contains("(A, met, B)"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_names_line_number() {
        let f = write("{\"text\":\"ok\",\"triples\":[]}\n{not json\n");
        match loader().load(f.path(), DatasetFormat::Jsonl).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn structured_relations_are_normalized_on_load() {
        let f = write(
            r#"{"id":"n1","text":"New York contains Brooklyn","triples":[{"s":"New York","p":"/location/location/contains","o":"Brooklyn"}]}"#,
        );
        let ds = loader().load(f.path(), DatasetFormat::Jsonl).unwrap();
        assert_eq!(ds[0].triples[0].p, "location contains");
        assert_eq!(ds[0].id, "n1");
    }
}
