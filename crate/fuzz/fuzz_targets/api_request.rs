//! Request bodies of the options and evaluate endpoints.
#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use nextstep_core::synthgen::{generate, synthetic_taxonomies, GenParams};
use nextstep_service::{options, EvaluateRequest, OptionsRequest, Snapshot, PAGE_SIZE};

fn snapshot() -> &'static Snapshot {
    static SNAPSHOT: OnceLock<Snapshot> = OnceLock::new();
    SNAPSHOT.get_or_init(|| {
        let params = GenParams {
            seed: 1,
            n_users: 50,
            ..GenParams::default()
        };
        let corpus = generate(&params).unwrap();
        let (corpus, _) = nextstep_core::ingest::filter_trajectories(corpus);
        Snapshot::trained(synthetic_taxonomies(&params).unwrap(), corpus).unwrap()
    })
}

fuzz_target!(|data: &[u8]| {
    if let Ok(req) = serde_json::from_slice::<OptionsRequest>(data) {
        if let Ok(page) = options(snapshot(), &req) {
            assert!(page.top_concepts.len() <= PAGE_SIZE);
            assert!(page.top_concepts.windows(2).all(|w| w[0].count >= w[1].count));
        }
    }
    let _ = serde_json::from_slice::<EvaluateRequest>(data);
});
