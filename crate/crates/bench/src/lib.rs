//! Shared fixtures for the benchmarks in `benches/`.

use mtto_core::sampling::{random_spec, random_symbol, seeded, SpecSampler};
use mtto_core::{make_inner, GridChoice, InnerFunction, InnerFunctionSpec, SymbolSpec};

/// A pure inner function with `dim K_Θ` equal to `dim` and fiber dimension `d`.
pub fn fixture(d: usize, dim: usize, seed: u64) -> InnerFunction {
    make_inner(&fixture_spec(d, dim, seed), GridChoice::default()).expect("sampled specs are inner")
}

pub fn fixture_spec(d: usize, dim: usize, seed: u64) -> InnerFunctionSpec {
    let sampler = SpecSampler {
        max_d: d,
        max_factors: dim,
        max_model_dim: dim,
        ..SpecSampler::default()
    };
    let mut rng = seeded(seed);
    loop {
        let spec = random_spec(&mut rng, &sampler);
        if spec.d == d && mtto_core::inner::expected_model_dim(&spec) == dim {
            return spec;
        }
    }
}

pub fn symbols(d: usize, count: usize, band: usize, seed: u64) -> Vec<SymbolSpec> {
    let mut rng = seeded(seed);
    (0..count).map(|_| random_symbol(&mut rng, d, band)).collect()
}
