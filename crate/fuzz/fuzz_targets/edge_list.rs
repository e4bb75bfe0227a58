#![no_main]

use dwb::NetworkGraph;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(graph) = NetworkGraph::parse_edge_list(text) {
        assert!(graph.is_connected());
    }
});
