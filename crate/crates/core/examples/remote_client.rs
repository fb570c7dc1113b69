//! Talks to an OpenAI-compatible chat-completions server: one rewrite and
//! one cited answer. The key is read from GEO_API_KEY.
//!
//!     GEO_BASE_URL=http://localhost:8000/v1 GEO_MODEL=my-model \
//!         cargo run --example remote_client

use geo_evolve::engine::{ChatClient, Engine, RemoteEngine, RemoteParams};
use geo_evolve::engine::dataset::{synthetic_dataset, SyntheticSpec};
use geo_evolve::genotype::seed_genotypes;
use geo_evolve::impressions::compute_impressions;

fn main() {
    let mut params = RemoteParams::default();
    if let Ok(url) = std::env::var("GEO_BASE_URL") {
        params.base_url = url;
    }
    if let Ok(model) = std::env::var("GEO_MODEL") {
        params.model = model;
    }
    params.max_retries = 1;
    println!("endpoint {}/chat/completions, model {}", params.base_url, params.model);
    let engine = RemoteEngine::new(ChatClient::new(params));

    let inst = &synthetic_dataset(&SyntheticSpec { queries: 1, ..Default::default() })[0];
    let strategy = &seed_genotypes()[2];
    match engine.rewrite(inst.candidates.target(), strategy, &inst.query) {
        Ok(doc) => println!("rewrite:\n{}\n", doc.text),
        Err(e) => {
            eprintln!("rewrite failed: {e}");
            return;
        }
    }
    match engine.synthesize_answer(&inst.query, &inst.candidates) {
        Ok(ans) => {
            let s = compute_impressions(&ans, inst.candidates.target_citation());
            println!("answer has {} sentences; target overall {:.3}", ans.len(), s.overall);
        }
        Err(e) => eprintln!("synthesis failed: {e}"),
    }
}
