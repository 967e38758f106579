#![no_main]

use cascade_nmp::experiment::{read_rows, summarize};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_rows(data) {
        let _ = summarize(&rows);
    }
});
