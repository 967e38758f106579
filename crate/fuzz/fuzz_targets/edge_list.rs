#![no_main]

use cascade_nmp::Network;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(net) = Network::parse_edge_list_bytes(data, 0.5) {
        for e in 0..net.edge_count() {
            assert!((0.0..=1.0).contains(&net.prob(e)));
        }
        let _ = net.coreness();
    }
});
