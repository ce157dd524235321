#![no_main]

use libfuzzer_sys::fuzz_target;
use nextstep_core::ingest::{load_corpus_str, parse_corpus_str, parse_record, write_corpus_jsonl};
use nextstep_core::{AliasTable, Taxonomies};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for line in text.lines() {
        let _ = parse_record(line);
    }
    let _ = parse_corpus_str(text);
    let taxonomies = Taxonomies::builtin();
    let aliases = AliasTable::new();
    if let Ok((corpus, stats)) = load_corpus_str(text, &aliases, &taxonomies) {
        assert_eq!(corpus.len(), stats.users);
        let mut buf = Vec::new();
        write_corpus_jsonl(&corpus, &mut buf).unwrap();
        let (again, _) = load_corpus_str(std::str::from_utf8(&buf).unwrap(), &aliases, &taxonomies).unwrap();
        assert_eq!(again, corpus);
    }
});
