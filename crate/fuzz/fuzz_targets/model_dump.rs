#![no_main]

use libfuzzer_sys::fuzz_target;
use nextstep_core::FrequencyModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = FrequencyModel::from_dump_str(text) {
        let again = FrequencyModel::from_dump_str(&model.to_dump_string()).unwrap();
        assert_eq!(again, model);
    }
});
