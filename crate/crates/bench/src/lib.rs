//! Benchmark helpers: canonical inputs for the pipeline benches.

use ilc_core::controller::{build_reference, CampaignConfig, Reference};
use ilc_core::plant::LorenzPlant;
use ilc_core::surrogate::ParamSpace;

/// A campaign config sized for benching: full sampling protocol, default
/// operating point.
pub fn bench_config() -> CampaignConfig {
    let space = ParamSpace::new(&[("rho", 15.0, 50.0)]).expect("static bounds");
    CampaignConfig::defaults(space, 97)
}

/// Reference fingerprint for distance benches.
pub fn bench_reference() -> Reference {
    build_reference(&LorenzPlant::default(), &bench_config()).expect("reference build")
}
