#![no_main]
use libfuzzer_sys::fuzz_target;
use privcalc::plan::Plan;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(plan) = Plan::from_json(src) {
        if let Ok(compiled) = plan.compile() {
            let _ = compiled.check_budget();
        }
    }
});
