#![no_main]
use libfuzzer_sys::fuzz_target;
use privcalc::{CellKind, Dataset, Schema};

fuzz_target!(|data: &[u8]| {
    let schema = Schema::of(&[("age", CellKind::Int64), ("score", CellKind::Float64), ("ok", CellKind::Bool)]).unwrap();
    let _ = Dataset::from_csv_reader(schema, data);
});
