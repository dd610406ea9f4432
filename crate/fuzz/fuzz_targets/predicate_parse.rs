#![no_main]
use libfuzzer_sys::fuzz_target;
use privcalc::predicate::{self, Predicate};
use privcalc::{CellKind, Schema};

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    let _ = predicate::parse(src);
    let schema =
        Schema::of(&[("age", CellKind::Int64), ("score", CellKind::Float64), ("name", CellKind::String)]).unwrap();
    if let Ok(p) = Predicate::parse(src, &schema) {
        let _ = p.satisfiable();
        let _ = p.overlaps(&p);
    }
});
