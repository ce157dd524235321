#![no_main]

use libfuzzer_sys::fuzz_target;
use nextstep_core::Taxonomy;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(tax) = Taxonomy::from_csv_str(text) {
        let mut buf = Vec::new();
        tax.write_csv(&mut buf).unwrap();
        let again = Taxonomy::from_csv_str(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(again, tax);
    }
});
