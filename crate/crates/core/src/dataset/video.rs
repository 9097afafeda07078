use std::path::{Path, PathBuf};

use thiserror::Error;

use super::manifest::{Manifest, SceneManifest};

#[derive(Debug, Error)]
pub enum VideoError {
    #[error("EV pattern {0:?} must list at least one number")]
    BadPattern(String),
    #[error("listing {path}: {source}")]
    List { path: String, source: std::io::Error },
}

/// Parses a comma-separated EV cycle such as `-2,0,2`.
pub fn parse_ev_pattern(s: &str) -> Result<Vec<f32>, VideoError> {
    let evs: Option<Vec<f32>> = s
        .split(',')
        .map(|p| p.trim().parse::<f32>().ok().filter(|v| v.is_finite()))
        .collect();
    match evs {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(VideoError::BadPattern(s.to_string())),
    }
}

/// Every window of three consecutive frames whose EVs (frame `i` gets
/// `pattern[i % len]`) are pairwise distinct, sorted short to long.
pub fn triplets_from_frames(frames: &[PathBuf], pattern: &[f32], dataset: &str) -> Manifest {
    let mut scenes = Vec::new();
    for start in 0..frames.len().saturating_sub(2) {
        let mut w: Vec<(f32, &PathBuf)> = (start..start + 3)
            .map(|i| (pattern[i % pattern.len()], &frames[i]))
            .collect();
        w.sort_by(|a, b| a.0.total_cmp(&b.0));
        if !(w[0].0 < w[1].0 && w[1].0 < w[2].0) {
            continue;
        }
        scenes.push(SceneManifest {
            id: format!("{dataset}_{start:05}"),
            dataset: dataset.to_string(),
            frames: [w[0].1.clone(), w[1].1.clone(), w[2].1.clone()],
            ev: [w[0].0, w[1].0, w[2].0],
            flows: None,
        });
    }
    Manifest { scenes }
}

/// Image files of `dir` (png, tif, tiff) in lexicographic order.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>, VideoError> {
    let err = |source| VideoError::List {
        path: dir.display().to_string(),
        source,
    };
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).map_err(err)? {
        let p = e.map_err(err)?.path();
        let ext = p
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if p.is_file() && matches!(ext.as_deref(), Some("png" | "tif" | "tiff")) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<PathBuf> {
        (0..n).map(|i| PathBuf::from(format!("f{i}.png"))).collect()
    }

    #[test]
    fn alternating_three_stop_cycle() {
        let m = triplets_from_frames(&names(5), &[-2.0, 0.0, 2.0], "v");
        assert_eq!(m.scenes.len(), 3);
        let s = &m.scenes[1];
        assert_eq!(s.id, "v_00001");
        assert_eq!(s.ev, [-2.0, 0.0, 2.0]);
        // f1 (0), f2 (+2), f3 (-2) sorted by EV
        assert_eq!(
            s.frames,
            [PathBuf::from("f3.png"), "f1.png".into(), "f2.png".into()]
        );
    }

    #[test]
    fn two_level_alternation_has_no_triplets() {
        let m = triplets_from_frames(&names(6), &[0.0, 2.0], "v");
        assert!(m.scenes.is_empty());
    }

    #[test]
    fn pattern_parsing() {
        assert_eq!(parse_ev_pattern("-2, 0,2").unwrap(), vec![-2.0, 0.0, 2.0]);
        assert!(parse_ev_pattern("").is_err());
        assert!(parse_ev_pattern("1,x").is_err());
    }

    #[test]
    fn short_lists() {
        assert!(triplets_from_frames(&names(2), &[0.0, 1.0, 2.0], "v")
            .scenes
            .is_empty());
    }
}
