use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::exposure_domain::MaskKind;
use crate::imgcore::io::{read_ldr, read_pfm, write_pfm, write_png16, IoError};
use crate::imgcore::Raster;
use crate::motion_domain::{GainStats, LabelSource, SubsetTag, SupervisionPair};

pub const FRAME_FILES: [&str; 3] = ["short.png", "medium.png", "long.png"];
pub const LABEL_FILE: &str = "label.pfm";
pub const META_FILE: &str = "meta.txt";

#[derive(Debug, Error)]
pub enum PairError {
    #[error("corrupt pair at {path}: {reason}")]
    CorruptPair { path: PathBuf, reason: String },
    #[error("writing {path}: {source}")]
    Write { path: PathBuf, source: IoError },
}

/// Directory of a pair: `<root>/<scene>/<tag>/<index>`.
pub fn pair_dir(root: &Path, scene_id: &str, tag: SubsetTag, index: usize) -> PathBuf {
    root.join(scene_id).join(tag.as_str()).join(format!("{index:05}"))
}

/// Text record written next to the images, one `key=value` per line.
pub fn encode_meta(pair: &SupervisionPair) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        writeln!(s, "{k}={v}").expect("writing to a String cannot fail");
    };
    kv("scene_id", pair.scene_id.clone());
    kv("dataset", pair.dataset.clone());
    kv("index", pair.index.to_string());
    kv("origin", format!("{},{}", pair.origin.0, pair.origin.1));
    kv("tag", pair.tag.to_string());
    kv("source", pair.source.as_str().to_string());
    kv("width", pair.label.width().to_string());
    kv("height", pair.label.height().to_string());
    kv("ev", format!("{},{},{}", pair.ev[0], pair.ev[1], pair.ev[2]));
    kv("gamma", pair.gamma.to_string());
    let sh = pair.shifts;
    kv(
        "shifts",
        format!(
            "{},{};{},{};{},{}",
            sh[0][0], sh[0][1], sh[1][0], sh[1][1], sh[2][0], sh[2][1]
        ),
    );
    if let Some(g) = &pair.gain {
        kv("gain_kind", g.kind.as_str().to_string());
        kv("gain_peak", g.peak_gain.to_string());
        kv("gain_coverage", g.coverage.to_string());
        kv("gain_target", g.target_fraction.to_string());
    }
    if let Some(db) = pair.consistency_db {
        kv("consistency_db", db.to_string());
    }
    kv("seed", pair.seed.to_string());
    s
}

/// Parsed form of the metadata record, without the image payloads.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMeta {
    pub scene_id: String,
    pub dataset: String,
    pub index: usize,
    pub origin: (usize, usize),
    pub tag: SubsetTag,
    pub source: LabelSource,
    pub width: usize,
    pub height: usize,
    pub ev: [f32; 3],
    pub gamma: f32,
    pub shifts: [[i32; 2]; 3],
    pub gain: Option<GainStats>,
    pub consistency_db: Option<f64>,
    pub seed: u64,
}

fn parse_list<T: std::str::FromStr, const N: usize>(s: &str, sep: char) -> Option<[T; N]> {
    let v: Vec<T> = s
        .split(sep)
        .map(|p| p.trim().parse().ok())
        .collect::<Option<_>>()?;
    v.try_into().ok()
}

pub fn decode_meta(text: &str) -> Result<PairMeta, String> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {} has no '='", n + 1))?;
        map.insert(k.trim(), v.trim());
    }
    let get = |k: &str| map.get(k).copied().ok_or_else(|| format!("missing key {k}"));
    fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T, String> {
        v.parse().map_err(|_| format!("bad value for {k}: {v:?}"))
    }
    let origin: [usize; 2] = parse_list(get("origin")?, ',').ok_or("bad origin")?;
    let shifts: [String; 3] = parse_list(get("shifts")?, ';').ok_or("bad shifts")?;
    let mut sh = [[0i32; 2]; 3];
    for (k, s) in shifts.iter().enumerate() {
        sh[k] = parse_list(s, ',').ok_or("bad shifts")?;
    }
    let gain = match map.get("gain_kind") {
        Some(kind) => Some(GainStats {
            kind: MaskKind::parse(kind).ok_or_else(|| format!("unknown gain_kind {kind}"))?,
            peak_gain: num("gain_peak", get("gain_peak")?)?,
            coverage: num("gain_coverage", get("gain_coverage")?)?,
            target_fraction: num("gain_target", get("gain_target")?)?,
        }),
        None => None,
    };
    let consistency_db = match map.get("consistency_db") {
        Some(v) => Some(num("consistency_db", v)?),
        None => None,
    };
    let source = get("source")?;
    Ok(PairMeta {
        scene_id: get("scene_id")?.to_string(),
        dataset: get("dataset")?.to_string(),
        index: num("index", get("index")?)?,
        origin: (origin[0], origin[1]),
        tag: get("tag")?.parse()?,
        source: LabelSource::parse(source).ok_or_else(|| format!("unknown source {source}"))?,
        width: num("width", get("width")?)?,
        height: num("height", get("height")?)?,
        ev: parse_list(get("ev")?, ',').ok_or("bad ev")?,
        gamma: num("gamma", get("gamma")?)?,
        shifts: sh,
        gain,
        consistency_db,
        seed: num("seed", get("seed")?)?,
    })
}

/// Writes the three 16-bit frames, the PFM label and the metadata record.
/// Returns the pair directory.
pub fn write_pair(pair: &SupervisionPair, root: &Path) -> Result<PathBuf, PairError> {
    let dir = pair_dir(root, &pair.scene_id, pair.tag, pair.index);
    let werr = |path: PathBuf| move |source: IoError| PairError::Write { path, source };
    std::fs::create_dir_all(&dir).map_err(|e| werr(dir.clone())(e.into()))?;
    for (img, name) in pair.ldr.iter().zip(FRAME_FILES) {
        let p = dir.join(name);
        write_png16(img, &p).map_err(werr(p))?;
    }
    let p = dir.join(LABEL_FILE);
    write_pfm(&pair.label, &p).map_err(werr(p))?;
    let p = dir.join(META_FILE);
    std::fs::write(&p, encode_meta(pair)).map_err(|e| werr(p.clone())(e.into()))?;
    Ok(dir)
}

pub fn read_meta(dir: &Path) -> Result<PairMeta, PairError> {
    let corrupt = |reason: String| PairError::CorruptPair {
        path: dir.to_path_buf(),
        reason,
    };
    let text =
        std::fs::read_to_string(dir.join(META_FILE)).map_err(|e| corrupt(format!("{META_FILE}: {e}")))?;
    decode_meta(&text).map_err(|e| corrupt(format!("{META_FILE}: {e}")))
}

pub fn read_pair(dir: &Path) -> Result<SupervisionPair, PairError> {
    let corrupt = |reason: String| PairError::CorruptPair {
        path: dir.to_path_buf(),
        reason,
    };
    let meta = read_meta(dir)?;
    let label = read_pfm(dir.join(LABEL_FILE)).map_err(|e| corrupt(format!("{LABEL_FILE}: {e}")))?;
    let mut frames = Vec::with_capacity(3);
    for name in FRAME_FILES {
        let img = read_ldr(dir.join(name)).map_err(|e| corrupt(format!("{name}: {e}")))?;
        frames.push(img);
    }
    for (img, name) in std::iter::once((&label as &dyn Raster, LABEL_FILE))
        .chain(frames.iter().map(|f| (f as &dyn Raster, "frame")))
    {
        if (img.width(), img.height()) != (meta.width, meta.height) {
            return Err(corrupt(format!(
                "{name} is {}x{}, meta says {}x{}",
                img.width(),
                img.height(),
                meta.width,
                meta.height
            )));
        }
    }
    let ldr: [_; 3] = frames.try_into().expect("three frames were read");
    Ok(SupervisionPair {
        scene_id: meta.scene_id,
        dataset: meta.dataset,
        index: meta.index,
        origin: meta.origin,
        tag: meta.tag,
        source: meta.source,
        ldr,
        label,
        ev: meta.ev,
        gamma: meta.gamma,
        shifts: meta.shifts,
        gain: meta.gain,
        consistency_db: meta.consistency_db,
        seed: meta.seed,
    })
}

/// Warnings for a stored record that disagrees with what the config and
/// manifest imply.
pub fn validate_pair_meta(meta: &PairMeta, expected_ev: [f32; 3], gamma: f32) -> Vec<String> {
    let mut w = Vec::new();
    if meta.ev != expected_ev {
        w.push(format!(
            "pair {}/{}/{}: EVs {:?} differ from expected {:?}",
            meta.scene_id, meta.tag, meta.index, meta.ev, expected_ev
        ));
    }
    if meta.gamma != gamma {
        w.push(format!(
            "pair {}/{}/{}: gamma {} differs from expected {}",
            meta.scene_id, meta.tag, meta.index, meta.gamma, gamma
        ));
    }
    if meta.tag.is_exposure_domain() != matches!(meta.source, LabelSource::SyntheticExposure) {
        w.push(format!(
            "pair {}/{}/{}: tag {} does not match label source {}",
            meta.scene_id,
            meta.tag,
            meta.index,
            meta.tag,
            meta.source.as_str()
        ));
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::{HdrImage, LdrImage};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pair(seed: u64) -> SupervisionPair {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (9, 6);
        let mut frame = || {
            let d: Vec<f32> = (0..w * h * 3).map(|_| rng.random::<f32>()).collect();
            LdrImage::new(w, h, d, 16).unwrap()
        };
        let ldr = [frame(), frame(), frame()];
        let label: Vec<f32> = (0..w * h * 3).map(|_| rng.random::<f32>() * 8.0).collect();
        SupervisionPair {
            scene_id: "scene_1".into(),
            dataset: "set".into(),
            index: 17,
            origin: (64, 128),
            tag: SubsetTag::Edm,
            source: LabelSource::SyntheticExposure,
            ldr,
            label: HdrImage::new(w, h, label).unwrap(),
            ev: [-2.5, 0.0, 1.75],
            gamma: 2.2,
            shifts: [[21, -19], [0, 0], [-18, 22]],
            gain: Some(GainStats {
                kind: MaskKind::SyntheticLine,
                peak_gain: 2.5,
                coverage: 0.123_456_789,
                target_fraction: 0.5,
            }),
            consistency_db: None,
            seed: u64::MAX - 3,
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = random_pair(1);
        let at = write_pair(&p, dir.path()).unwrap();
        assert_eq!(at, dir.path().join("scene_1/EDM/00017"));
        let q = read_pair(&at).unwrap();
        assert_eq!(q.label, p.label);
        for k in 0..3 {
            for (a, b) in p.ldr[k].samples().iter().zip(q.ldr[k].samples()) {
                assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-7);
            }
        }
        let strip = |mut s: SupervisionPair| {
            s.ldr = q.ldr.clone();
            s
        };
        assert_eq!(strip(p), q);
    }

    #[test]
    fn motion_pair_meta_round_trips() {
        let mut p = random_pair(2);
        p.gain = None;
        p.tag = SubsetTag::Md;
        p.source = LabelSource::StaticFusion;
        p.consistency_db = Some(47.123_456_789_012);
        let m = decode_meta(&encode_meta(&p)).unwrap();
        assert_eq!(m.consistency_db, p.consistency_db);
        assert_eq!(m.gain, None);
        assert_eq!(m.tag, SubsetTag::Md);
    }

    #[test]
    fn missing_label_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let at = write_pair(&random_pair(3), dir.path()).unwrap();
        std::fs::remove_file(at.join(LABEL_FILE)).unwrap();
        assert!(matches!(read_pair(&at), Err(PairError::CorruptPair { .. })));
    }

    #[test]
    fn malformed_meta_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let at = write_pair(&random_pair(4), dir.path()).unwrap();
        std::fs::write(at.join(META_FILE), "tag=XX\n").unwrap();
        assert!(matches!(read_pair(&at), Err(PairError::CorruptPair { .. })));
    }

    #[test]
    fn ev_mismatch_warns() {
        let p = random_pair(5);
        let m = decode_meta(&encode_meta(&p)).unwrap();
        assert!(validate_pair_meta(&m, p.ev, p.gamma).is_empty());
        let w = validate_pair_meta(&m, [-2.0, 0.0, 2.0], p.gamma);
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("EVs"));
    }
}
