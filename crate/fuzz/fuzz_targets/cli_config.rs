#![no_main]

use libfuzzer_sys::fuzz_target;
use nextstep_cli::{ConfigFile, Flags, Settings};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(file) = ConfigFile::from_toml_str(text) {
        let _ = Settings::resolve(&Flags::default(), file);
    }
});
