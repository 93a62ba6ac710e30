mod oracles;

use brainhgt::model::Variant;
use oracles::gate;

#[test]
fn full_model_gradients_match_central_differences() {
    for seed in [1, 2, 3] {
        let report = gate::run(Variant::Full, seed);
        for (name, err) in &report.errors {
            assert!(*err < 1e-4, "seed {seed}: {name} relative error {err:e}");
        }
        // The locality mask parameters must actually be exercised.
        for (name, norm) in &report.norms {
            if name.ends_with("hop") || name.ends_with("gamma_raw") {
                assert!(*norm > 1e-8, "seed {seed}: {name} gradient vanished");
            }
        }
    }
}

#[test]
fn every_variant_passes_the_gate() {
    for variant in [Variant::NoLsra, Variant::NoPrior, Variant::NoEntmax, Variant::NoClustering] {
        let (name, err) = gate::run(variant, 11).worst();
        assert!(err < 1e-4, "{}: {name} relative error {err:e}", variant.name());
    }
}
