//! Procedural mesh generators and their registry.

pub mod building;
pub mod dish;
pub mod mesh;
pub mod spline;
pub mod tree;

use std::path::Path;
use std::sync::OnceLock;

use crate::autodiff::Jacobian;
use crate::error::{Error, Result};
use crate::params::{ParamSpace, ParameterVector, Preset, PresetFile};

pub use mesh::{MeshBuilder, TriangleMesh};
pub use tree::TreeSkeleton;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct LevelOfDetail {
    pub tier: u32,
}

impl LevelOfDetail {
    pub const fn new(tier: u32) -> Self {
        Self { tier }
    }
}

/// Static description of one generator.
#[derive(Clone, Debug)]
pub struct GeneratorInfo {
    pub id: &'static str,
    pub space: ParamSpace,
    pub max_lod: u32,
    pub differentiable: bool,
    /// Parts that are not part of the object's mask (e.g. window glass).
    pub mask_excluded_parts: &'static [&'static str],
    /// Lowest tier that shows every discrete feature in the mask; the first
    /// optimization stage starts here.
    pub base_lod: u32,
}

impl GeneratorInfo {
    pub fn check_lod(&self, lod: LevelOfDetail) -> Result<()> {
        if lod.tier > self.max_lod {
            return Err(Error::LodOutOfRange {
                generator: self.id.to_owned(),
                tier: lod.tier,
                max: self.max_lod,
            });
        }
        Ok(())
    }

    pub fn presets(&self) -> Vec<Preset> {
        builtin_presets(self.id).expect("builtin presets are valid")
    }
}

pub fn generator_registry() -> &'static [GeneratorInfo] {
    static REGISTRY: OnceLock<Vec<GeneratorInfo>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        vec![
            GeneratorInfo {
                id: "dish",
                space: dish::space(),
                max_lod: dish::MAX_TIER,
                differentiable: true,
                mask_excluded_parts: &[],
                base_lod: 0,
            },
            GeneratorInfo {
                id: "building",
                space: building::space(),
                max_lod: building::MAX_TIER,
                differentiable: true,
                mask_excluded_parts: &["window"],
                base_lod: 2,
            },
            GeneratorInfo {
                id: "tree",
                space: tree::space(),
                max_lod: 0,
                differentiable: false,
                mask_excluded_parts: &[],
                base_lod: 0,
            },
        ]
    })
}

pub fn lookup(id: &str) -> Result<&'static GeneratorInfo> {
    generator_registry()
        .iter()
        .find(|g| g.id == id)
        .ok_or_else(|| Error::UnknownGenerator(id.to_owned()))
}

pub(crate) fn check_space(
    params: &ParameterVector,
    expected: &ParamSpace,
    generator: &str,
    lod: LevelOfDetail,
    max_tier: u32,
) -> Result<()> {
    if params.space() != expected {
        let names: Vec<String> = params.space().iter().map(|s| s.name.clone()).collect();
        return Err(Error::Validation(vec![format!(
            "parameters [{}] do not match the `{generator}` generator",
            names.join(", ")
        )]));
    }
    if lod.tier > max_tier {
        return Err(Error::LodOutOfRange {
            generator: generator.to_owned(),
            tier: lod.tier,
            max: max_tier,
        });
    }
    Ok(())
}

/// Mesh plus `d(positions)/d(params)` from a differentiable generator.
pub fn generate_differentiable(
    id: &str,
    params: &ParameterVector,
    lod: LevelOfDetail,
) -> Result<(TriangleMesh, Jacobian)> {
    match id {
        "dish" => dish::generate(params, lod),
        "building" => building::generate(params, lod),
        "tree" => Err(Error::NotDifferentiable(id.to_owned())),
        other => Err(Error::UnknownGenerator(other.to_owned())),
    }
}

/// Mesh from any generator; `seed` only matters for stochastic ones.
pub fn generate_mesh(id: &str, params: &ParameterVector, lod: LevelOfDetail, seed: u64) -> Result<TriangleMesh> {
    match id {
        "tree" => {
            lookup(id)?.check_lod(lod)?;
            tree::generate(params, seed)
        }
        _ => generate_differentiable(id, params, lod).map(|(m, _)| m),
    }
}

const PRESETS: &[(&str, &str)] = &[
    ("dish", include_str!("../../presets/dish/mug.json")),
    ("dish", include_str!("../../presets/dish/tea_cup.json")),
    ("dish", include_str!("../../presets/dish/bowl.json")),
    ("dish", include_str!("../../presets/dish/jar.json")),
    ("dish", include_str!("../../presets/dish/vase.json")),
    ("dish", include_str!("../../presets/dish/tumbler.json")),
    ("building", include_str!("../../presets/building/house.json")),
    ("building", include_str!("../../presets/building/townhouse.json")),
    ("building", include_str!("../../presets/building/apartment.json")),
    ("building", include_str!("../../presets/building/tower.json")),
    ("building", include_str!("../../presets/building/warehouse.json")),
    ("tree", include_str!("../../presets/tree/oak.json")),
    ("tree", include_str!("../../presets/tree/pine.json")),
    ("tree", include_str!("../../presets/tree/birch.json")),
    ("tree", include_str!("../../presets/tree/shrub.json")),
];

/// Presets shipped with the library for `id`.
pub fn builtin_presets(id: &str) -> Result<Vec<Preset>> {
    let info = lookup(id)?;
    PRESETS
        .iter()
        .filter(|(g, _)| *g == id)
        .map(|(_, text)| {
            let file: PresetFile = serde_json::from_str(text)?;
            Preset::from_file(&file, &info.space)
        })
        .collect()
}

/// Loads every `*.json` preset in `dir` (sorted by file name) for `id`.
pub fn load_presets_dir(dir: &Path, id: &str) -> Result<Vec<Preset>> {
    let info = lookup(id)?;
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let file = PresetFile::read(p)?;
            if file.generator != id {
                return Err(Error::format(p, format!("preset is for `{}`, expected `{id}`", file.generator)));
            }
            Preset::from_file(&file, &info.space).map_err(|e| Error::format(p, e.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lookup() {
        assert!(lookup("dish").unwrap().differentiable);
        assert!(lookup("building").unwrap().differentiable);
        assert!(!lookup("tree").unwrap().differentiable);
        assert!(matches!(lookup("teapot"), Err(Error::UnknownGenerator(_))));
    }

    #[test]
    fn builtin_presets_generate() {
        for info in generator_registry() {
            let presets = info.presets();
            assert!(presets.len() >= 4, "{}", info.id);
            for p in presets {
                let m = generate_mesh(info.id, &p.vector, LevelOfDetail::new(info.max_lod), p.seed.unwrap_or(0))
                    .unwrap();
                m.check().unwrap();
                assert!(!m.is_empty(), "{}", p.name);
            }
        }
    }

    #[test]
    fn tree_is_not_differentiable() {
        let v = tree::space().midpoint();
        assert!(matches!(
            generate_differentiable("tree", &v, LevelOfDetail::new(0)),
            Err(Error::NotDifferentiable(_))
        ));
    }

    #[test]
    fn lod_out_of_range() {
        let v = dish::space().midpoint();
        assert!(matches!(
            generate_mesh("dish", &v, LevelOfDetail::new(4), 0),
            Err(Error::LodOutOfRange { .. })
        ));
        let t = tree::space().midpoint();
        assert!(generate_mesh("tree", &t, LevelOfDetail::new(1), 0).is_err());
    }
}
