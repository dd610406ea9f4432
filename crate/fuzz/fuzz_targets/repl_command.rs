#![no_main]
use libfuzzer_sys::fuzz_target;
use privcalc::repl::parse_command;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    let _ = parse_command(line);
});
