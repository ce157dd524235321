//! Dates, concept ids, kinds, methods and field tags.
#![no_main]

use libfuzzer_sys::fuzz_target;
use nextstep_core::{ConceptId, FieldTag, Method, StepKind, YearMonth};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(ym) = text.parse::<YearMonth>() {
        assert_eq!(ym.to_string().parse::<YearMonth>().unwrap(), ym);
    }
    if let Ok(id) = text.parse::<ConceptId>() {
        assert_eq!(id.to_string().parse::<ConceptId>().unwrap(), id);
    }
    if let Ok(kind) = text.parse::<StepKind>() {
        assert_eq!(kind.as_str().parse::<StepKind>().unwrap(), kind);
    }
    if let Ok(method) = text.parse::<Method>() {
        assert_eq!(method.token().parse::<Method>().unwrap(), method);
    }
    if let Ok(tag) = FieldTag::new(text) {
        assert_eq!(FieldTag::new(tag.as_str()).unwrap(), tag);
    }
});
