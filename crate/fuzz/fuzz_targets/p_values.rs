#![no_main]

use cascade_nmp::experiment::{parse_p_values, parse_usize_list};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(ps) = parse_p_values(text) {
        assert!(ps.iter().all(|p| (0.0..=1.0).contains(p)));
    }
    let _ = parse_usize_list(text);
});
