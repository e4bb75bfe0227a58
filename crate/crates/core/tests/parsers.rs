//! Every decoder must reject malformed input with an error, never a panic.

use dwb::cli::experiment::parse_distribution_rows;
use dwb::cli::idx::{encode_idx_images, encode_idx_labels};
use dwb::cli::{parse_idx_images, parse_idx_labels, parse_pgm, ExperimentConfig};
use dwb::NetworkGraph;
use ndarray::Array2;
use proptest::prelude::*;

fn idx_like() -> impl Strategy<Value = Vec<u8>> {
    let header = (prop_oneof![Just(0x0803u32), Just(0x0801u32), any::<u32>()], 0u32..6, 0u32..6, 0u32..6);
    (header, proptest::collection::vec(any::<u8>(), 0..200)).prop_map(|((magic, n, r, c), body)| {
        let mut v = magic.to_be_bytes().to_vec();
        for x in [n, r, c] {
            v.extend_from_slice(&x.to_be_bytes());
        }
        v.extend(body);
        v
    })
}

proptest! {
    #[test]
    fn idx_images_never_panic(bytes in prop_oneof![idx_like(), proptest::collection::vec(any::<u8>(), 0..64)]) {
        if let Ok(images) = parse_idx_images(&bytes) {
            prop_assert_eq!(encode_idx_images(&images).len() <= bytes.len(), true);
        }
    }

    #[test]
    fn idx_labels_never_panic(bytes in prop_oneof![idx_like(), proptest::collection::vec(any::<u8>(), 0..64)]) {
        if let Ok(labels) = parse_idx_labels(&bytes) {
            prop_assert_eq!(encode_idx_labels(&labels).len() <= bytes.len(), true);
        }
    }

    #[test]
    fn idx_images_round_trip(r in 1usize..5, c in 1usize..5, pixels in proptest::collection::vec(any::<u8>(), 50)) {
        let img = Array2::from_shape_fn((r, c), |(i, j)| pixels[i * c + j] as f64);
        let back = parse_idx_images(&encode_idx_images(&[img.clone(), img.clone()])).unwrap();
        prop_assert_eq!(back, vec![img.clone(), img]);
    }

    #[test]
    fn pgm_never_panics(
        head in "P5[ \n]{1,2}[0-9]{1,2}[ \t]+[0-9]{1,2}(\n#[a-z ]{0,6})?\n[0-9]{1,3}\n",
        body in proptest::collection::vec(any::<u8>(), 0..100),
        noise in proptest::collection::vec(any::<u8>(), 0..40),
    ) {
        let mut bytes = head.into_bytes();
        bytes.extend(body);
        if let Ok(img) = parse_pgm(&bytes) {
            prop_assert!(img.iter().all(|v| (0.0..=255.0).contains(v)));
        }
        let _ = parse_pgm(&noise);
    }

    #[test]
    fn config_never_panics(text in "([a-z_]{1,16}[ ]?=[ ]?[-a-z0-9._,/]{0,12}\n|#[^\n]{0,8}\n|[^\n]{0,10}\n){0,8}") {
        if let Ok(cfg) = ExperimentConfig::parse(&text) {
            prop_assert!(cfg.validate().is_ok());
        }
    }

    #[test]
    fn edge_list_never_panics(text in "([0-9]{1,2}( [0-9]{1,2})?\n|[^\n]{0,6}\n){0,10}") {
        if let Ok(g) = NetworkGraph::parse_edge_list(&text) {
            prop_assert!(g.is_connected());
            let again = NetworkGraph::parse_edge_list(&g.to_edge_list()).unwrap();
            prop_assert_eq!(again.edges(), g.edges());
        }
    }

    #[test]
    fn distribution_rows_never_panic(text in "([-0-9.e, ]{0,20}\n){0,5}") {
        if let Ok(rows) = parse_distribution_rows(&text) {
            for q in rows {
                let sum: f64 = q.weights().iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
                prop_assert!(q.weights().iter().all(|&w| w >= 0.0));
            }
        }
    }
}
