#![no_main]

use cascade_nmp::experiment::parse_sets;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    if let Ok(sets) = parse_sets(text, n as usize) {
        for s in &sets {
            assert!(s.iter().all(|k| k < n as usize));
        }
    }
});
