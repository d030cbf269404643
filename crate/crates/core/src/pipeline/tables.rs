use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::genome::{preset_framing, DISTANCE_FACTOR, INITIAL_ELEVATION, SEED_SPAN};
use crate::error::Result;
use crate::generators::{generate_mesh, lookup, tree, LevelOfDetail};
use crate::loss::{render_semantic, render_views, stripe_decompose, tree_similarity, DEFAULT_STRIPES};
use crate::optim::{collect_quality_tables, QualityTables, TableConfig};
use crate::params::ParameterVector;
use crate::render::{mse, Camera, Rasterizer, DEFAULT_FOV_Y};

type Objective = Box<dyn Fn(&[f64]) -> f64 + Sync>;

/// Quality tables over the generator genes of `generator`. Each objective
/// of the family is a random model seen from a random azimuth; candidates
/// score `-MSE` of their silhouette, or the stripe similarity for trees.
pub fn collect_generator_tables(generator: &str, cfg: &TableConfig, resolution: u32, seed: u64) -> Result<QualityTables> {
    let info = lookup(generator)?;
    let presets: Vec<ParameterVector> = info.presets().into_iter().map(|p| p.vector).collect();
    let (center, radius, _) = preset_framing(generator, &presets)?;
    let rasterizer = Rasterizer::default();
    let space = info.space.clone();
    let lod = LevelOfDetail::new(info.base_lod);
    let id = info.id;
    let excluded = info.mask_excluded_parts;

    let family = |rng: &mut ChaCha8Rng| -> Objective {
        let genes: Vec<f64> = (0..space.len()).map(|_| rng.gen()).collect();
        let az = rng.gen_range(0.0..2.0 * PI);
        let tree_seed = rng.gen_range(0..SEED_SPAN);
        let target = ParameterVector::from_genes(&genes, &space).expect("genes drawn in [0, 1]");
        let cam = Camera::new(az, INITIAL_ELEVATION, DISTANCE_FACTOR * radius, DEFAULT_FOV_Y, resolution)
            .expect("valid camera")
            .with_target(center);
        let space = space.clone();
        if info.differentiable {
            let reference = generate_mesh(id, &target, lod, 0)
                .and_then(|m| render_views(&rasterizer, &m, excluded, std::slice::from_ref(&cam)))
                .map(|mut v| v.remove(0));
            Box::new(move |x: &[f64]| {
                let Ok(reference) = &reference else { return -1.0 };
                ParameterVector::from_genes(x, &space)
                    .and_then(|p| generate_mesh(id, &p, lod, 0))
                    .and_then(|m| render_views(&rasterizer, &m, excluded, std::slice::from_ref(&cam)))
                    .and_then(|v| mse(&v[0], reference))
                    .map_or(-1.0, |(l, _)| -l)
            })
        } else {
            let reference = tree::generate(&target, tree_seed)
                .and_then(|m| render_semantic(&rasterizer, &m, &cam))
                .and_then(|s| stripe_decompose(&s, DEFAULT_STRIPES));
            Box::new(move |x: &[f64]| {
                let Ok(reference) = &reference else { return 0.0 };
                ParameterVector::from_genes(x, &space)
                    .and_then(|p| tree::generate(&p, tree_seed))
                    .and_then(|m| render_semantic(&rasterizer, &m, &cam))
                    .and_then(|s| stripe_decompose(&s, DEFAULT_STRIPES))
                    .and_then(|s| tree_similarity(reference, &s))
                    .unwrap_or(0.0)
            })
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    collect_quality_tables(family, space.len(), cfg, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dish_tables_have_generator_shape() {
        let cfg = TableConfig {
            sample_count: 40,
            objectives: 4,
            bins: 4,
            ..TableConfig::default()
        };
        let t = collect_generator_tables("dish", &cfg, 32, 3).unwrap();
        assert_eq!(t.gene_count(), lookup("dish").unwrap().space.len());
        assert_eq!(t.q_table[0].len(), 4);
        t.check().unwrap();
        assert_eq!(collect_generator_tables("dish", &cfg, 32, 3).unwrap(), t);
        assert!(collect_generator_tables("dish", &TableConfig { sample_count: 0, ..cfg }, 32, 3).is_err());
    }
}
