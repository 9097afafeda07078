use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("malformed manifest: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scene {scene}: {reason}")]
    Invalid { scene: String, reason: String },
}

/// One exposure triplet. Frames are ordered short, reference, long.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub id: String,
    #[serde(default = "default_dataset")]
    pub dataset: String,
    pub frames: [PathBuf; 3],
    /// Absolute exposure values of the three frames, in stops.
    pub ev: [f32; 3],
    /// Precomputed flows `1->0, 0->1, 1->2, 2->1` in `.flo` format.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flows: Option<[PathBuf; 4]>,
}

fn default_dataset() -> String {
    "default".to_string()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default, rename = "scene")]
    pub scenes: Vec<SceneManifest>,
}

impl SceneManifest {
    fn invalid(&self, reason: impl Into<String>) -> ManifestError {
        ManifestError::Invalid {
            scene: self.id.clone(),
            reason: reason.into(),
        }
    }

    /// EVs strictly increasing, usable id, and every referenced file
    /// present.
    pub fn validate(&self) -> Result<(), ManifestError> {
        if self.id.is_empty() || self.id.contains(['/', '\\']) || self.id.starts_with('.') {
            return Err(self.invalid("id must be a plain directory name"));
        }
        if self.dataset.is_empty() || self.dataset.contains([',', '\n']) {
            return Err(self.invalid("dataset name must be non-empty without commas"));
        }
        if !self.ev.iter().all(|e| e.is_finite()) || !(self.ev[0] < self.ev[1] && self.ev[1] < self.ev[2]) {
            return Err(self.invalid(format!("EVs {:?} are not strictly increasing", self.ev)));
        }
        let flows = self.flows.iter().flatten();
        for p in self.frames.iter().chain(flows) {
            if !p.is_file() {
                return Err(self.invalid(format!("missing file {}", p.display())));
            }
        }
        Ok(())
    }
}

impl Manifest {
    /// Parses a manifest; relative paths are resolved against `base`.
    pub fn from_toml_str(s: &str, base: &Path) -> Result<Self, ManifestError> {
        let mut m: Manifest = toml::from_str(s)?;
        for sc in &mut m.scenes {
            for p in sc.frames.iter_mut() {
                *p = base.join(&*p);
            }
            if let Some(flows) = sc.flows.as_mut() {
                for p in flows.iter_mut() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ManifestError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("manifest always serializes")
    }

    /// Scene ids must be unique; each scene is validated separately so one
    /// bad entry can be skipped.
    pub fn duplicate_ids(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut dup = Vec::new();
        for s in &self.scenes {
            if !seen.insert(s.id.as_str()) {
                dup.push(s.id.clone());
            }
        }
        dup
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
[[scene]]
id = "a"
frames = ["a0.png", "a1.png", "a2.png"]
ev = [-2.0, 0.0, 2.0]

[[scene]]
id = "b"
dataset = "video"
frames = ["/abs/b0.png", "b1.png", "b2.png"]
ev = [0.0, 1.0, 3.0]
flows = ["f10.flo", "f01.flo", "f12.flo", "f21.flo"]
"#;

    #[test]
    fn parses_and_resolves_paths() {
        let m = Manifest::from_toml_str(TEXT, Path::new("/data")).unwrap();
        assert_eq!(m.scenes.len(), 2);
        assert_eq!(m.scenes[0].dataset, "default");
        assert_eq!(m.scenes[0].frames[1], PathBuf::from("/data/a1.png"));
        assert_eq!(m.scenes[1].frames[0], PathBuf::from("/abs/b0.png"));
        assert_eq!(
            m.scenes[1].flows.as_ref().unwrap()[3],
            PathBuf::from("/data/f21.flo")
        );
        assert!(m.duplicate_ids().is_empty());
    }

    #[test]
    fn validation() {
        let dir = tempfile::tempdir().unwrap();
        for f in ["a0.png", "a1.png", "a2.png"] {
            std::fs::write(dir.path().join(f), b"x").unwrap();
        }
        let m = Manifest::from_toml_str(TEXT, dir.path()).unwrap();
        assert!(m.scenes[0].validate().is_ok());
        assert!(m.scenes[1].validate().is_err());
        let mut bad = m.scenes[0].clone();
        bad.ev = [0.0, 0.0, 1.0];
        assert!(bad.validate().is_err());
        bad.ev = [0.0, 1.0, 2.0];
        bad.id = "../x".into();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn empty_manifest_is_valid() {
        let m = Manifest::from_toml_str("", Path::new(".")).unwrap();
        assert!(m.scenes.is_empty());
    }

    #[test]
    fn unknown_keys_rejected() {
        let t = "[[scene]]\nid='a'\nframes=['a','b','c']\nev=[0.0,1.0,2.0]\nextra=1\n";
        assert!(Manifest::from_toml_str(t, Path::new(".")).is_err());
    }
}
