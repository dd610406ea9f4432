#![no_main]
use libfuzzer_sys::fuzz_target;
use privcalc::Schema;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(s) = Schema::from_json(src) {
        assert_eq!(Schema::from_json(&s.to_json()).unwrap(), s);
    }
});
