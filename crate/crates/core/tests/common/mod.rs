#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use hdrssl::dataset::{Manifest, PipelineConfig, SceneManifest};
use hdrssl::exposure_domain::reexpose;
use hdrssl::imgcore::io::write_png16;
use hdrssl::imgcore::HdrImage;

pub const GAMMA: f32 = 2.2;
pub const EVS: [f32; 3] = [-2.0, 0.0, 2.0];

pub struct Texture {
    waves: Vec<[f32; 3]>,
}

impl Texture {
    pub fn new(seed: u64, n: usize, max_freq: f32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves = (0..n)
            .map(|_| {
                let theta = rng.random_range(0.0..std::f32::consts::TAU);
                let f = rng.random_range(0.2 * max_freq..max_freq);
                [
                    f * theta.cos(),
                    f * theta.sin(),
                    rng.random_range(0.0..std::f32::consts::TAU),
                ]
            })
            .collect();
        Self { waves }
    }

    pub fn at(&self, x: f32, y: f32) -> f32 {
        let s: f32 = self
            .waves
            .iter()
            .map(|w| (w[0] * x + w[1] * y + w[2]).sin())
            .sum();
        s / self.waves.len() as f32
    }
}

/// Textured radiance with a few stops of range; a square moves `step`
/// pixels per frame when `step` is nonzero.
pub fn radiance(step: f32) -> impl Fn(usize, f32, f32) -> f32 {
    let coarse = Texture::new(11, 4, 0.05);
    let fine = Texture::new(12, 8, 0.8);
    let square = Texture::new(13, 5, 0.6);
    move |k, x, y| {
        let d = step * (k as f32 - 1.0);
        let (u, v) = (x - 150.0 - d, y - 80.0 - d);
        if step != 0.0 && (0.0..16.0).contains(&u) && (0.0..16.0).contains(&v) {
            return 0.25 * (1.0 + 0.8 * square.at(u, v)).max(0.05);
        }
        let s = 0.5 + 0.3 * coarse.at(x, y) + 0.4 * fine.at(x, y);
        (-5.5 + 6.0 * s).exp2()
    }
}

/// Writes the three 16-bit frames of a scene and returns its manifest entry.
pub fn write_scene(
    dir: &Path,
    id: &str,
    (w, h): (usize, usize),
    rad: impl Fn(usize, f32, f32) -> f32,
) -> SceneManifest {
    let frames = [0, 1, 2].map(|k| {
        let hdr = HdrImage::from_fn(w, h, |x, y| {
            let v = rad(k, x as f32, y as f32);
            [v, 0.92 * v, 0.85 * v]
        })
        .unwrap();
        let p = dir.join(format!("{id}_{k}.png"));
        write_png16(&reexpose(&hdr, EVS[k], GAMMA, Some(16)), &p).unwrap();
        p
    });
    SceneManifest {
        id: id.to_string(),
        dataset: "synthetic".to_string(),
        frames,
        ev: EVS,
        flows: None,
    }
}

/// Two small scenes, one static and one with a moving square.
pub fn small_manifest(dir: &Path) -> Manifest {
    Manifest {
        scenes: vec![
            write_scene(dir, "still", (256, 192), radiance(0.0)),
            write_scene(dir, "moving", (256, 192), radiance(4.0)),
        ],
    }
}

pub fn write_inputs(dir: &Path, manifest: &Manifest, cfg: &PipelineConfig) -> (PathBuf, PathBuf) {
    let m = dir.join("manifest.toml");
    std::fs::write(&m, manifest.to_toml_string()).unwrap();
    let c = dir.join("config.toml");
    std::fs::write(&c, cfg.to_toml_string()).unwrap();
    (m, c)
}

/// SHA-256 over relative paths and contents of every file under `root`.
pub fn hash_tree(root: &Path) -> String {
    let mut h = Sha256::new();
    for e in WalkDir::new(root).sort_by_file_name() {
        let e = e.unwrap();
        if e.file_type().is_file() {
            h.update(e.path().strip_prefix(root).unwrap().to_string_lossy().as_bytes());
            h.update([0]);
            h.update(std::fs::read(e.path()).unwrap());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
