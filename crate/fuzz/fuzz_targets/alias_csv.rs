#![no_main]

use libfuzzer_sys::fuzz_target;
use nextstep_core::ingest::AliasTable;
use nextstep_core::StepKind;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = AliasTable::from_csv_str(text) {
        for line in text.lines() {
            if let Some((title, kind)) = table.normalize_title(line, Some(StepKind::Job)) {
                assert_eq!(table.normalize_title(&title, Some(kind)), Some((title, kind)));
            }
        }
    }
});
