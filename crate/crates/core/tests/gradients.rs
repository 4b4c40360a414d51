mod common;

use common::{layer_checks, model_gradient_check, small_batch};
use geom_deeponet::dataset::fit_stats;
use geom_deeponet::geometry::ShapeFamily;
use geom_deeponet::model::{GeomConfig, Model, ModelConfig, VanillaConfig};

const TOL: f64 = 1e-5;

#[test]
fn layers_and_ops_match_central_differences() {
    for seed in 0..5 {
        for (name, err) in layer_checks(seed) {
            assert!(err < TOL, "{name} seed {seed}: {err:e}");
        }
    }
}

fn model_with_stats(cfg: ModelConfig, seed: u64, family: ShapeFamily, c: usize) -> (Model, geom_deeponet::dataset::ResampledBatch) {
    let (batch, cases) = small_batch(family, c, 4, 16, seed);
    let mut model = Model::init(cfg, seed).unwrap();
    model.set_stats(fit_stats(&cases).unwrap()).unwrap();
    (model, batch)
}

#[test]
fn geom_scalar_loss_gradients() {
    for seed in 0..3 {
        let (m, b) = model_with_stats(ModelConfig::Geom(GeomConfig::compact(9, 1, 8)), seed, ShapeFamily::CuboidWithVoid, 1);
        let err = model_gradient_check(&m, &b);
        assert!(err < TOL, "seed {seed}: {err:e}");
    }
}

#[test]
fn geom_vector_loss_gradients() {
    for seed in 0..3 {
        let (m, b) = model_with_stats(ModelConfig::Geom(GeomConfig::compact(9, 4, 8)), seed, ShapeFamily::CuboidWithVoid, 4);
        let err = model_gradient_check(&m, &b);
        assert!(err < TOL, "seed {seed}: {err:e}");
    }
}

#[test]
fn vanilla_loss_gradients() {
    for seed in 0..3 {
        let (m, b) = model_with_stats(ModelConfig::Vanilla(VanillaConfig::compact(4, 8)), seed, ShapeFamily::BeamWithHole, 1);
        let err = model_gradient_check(&m, &b);
        assert!(err < TOL, "seed {seed}: {err:e}");
    }
}
