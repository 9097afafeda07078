mod common;

use hdrssl::dataset::{
    pair_dir, read_meta, read_pair, run_pipeline, scan_root, validate_pair_meta, Manifest, PipelineConfig,
    META_FILE,
};
use hdrssl::exposure_domain::ExposureThresholds;
use hdrssl::imgcore::io::read_ldr;
use hdrssl::imgcore::{MetricConfig, Raster, REFERENCE};
use hdrssl::motion_domain::{consistency_psnr, LabelSource, SubsetTag, SupervisionPair};
use walkdir::WalkDir;

use common::*;

fn pairs_under(root: &std::path::Path) -> Vec<SupervisionPair> {
    WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() == META_FILE)
        .map(|e| read_pair(e.path().parent().unwrap()).unwrap())
        .collect()
}

#[test]
fn tree_matches_report_and_invariants_hold() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_manifest(dir.path());
    let out = dir.path().join("out");
    let cfg = PipelineConfig::default();
    let report = run_pipeline(&manifest, &out, &cfg).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    assert_eq!(scan_root(&out).unwrap(), report.stats);

    let pairs = pairs_under(&out);
    assert_eq!(pairs.len() as u64, report.stats.total());
    for tag in SubsetTag::ALL {
        assert!(report.stats.subset_total(tag) > 0, "no {tag} pairs");
    }
    let refs: Vec<_> = manifest
        .scenes
        .iter()
        .map(|s| (s.id.clone(), read_ldr(&s.frames[REFERENCE]).unwrap()))
        .collect();
    for p in &pairs {
        assert!(p.label.samples().iter().all(|v| v.is_finite() && *v >= 0.0));
        let meta = read_meta(&pair_dir(&out, &p.scene_id, p.tag, p.index)).unwrap();
        assert!(validate_pair_meta(&meta, EVS, GAMMA).is_empty());
        match p.tag {
            SubsetTag::Md => {
                // raw, unshifted LDR straight from the reference frame
                assert_eq!(p.shifts, [[0, 0]; 3]);
                let frame = &refs.iter().find(|r| r.0 == p.scene_id).unwrap().1;
                let n = p.label.width();
                assert_eq!(p.ldr[1], frame.crop(p.origin.0, p.origin.1, n, n).unwrap());
                if p.source == LabelSource::StaticFusion {
                    let db = consistency_psnr(
                        &p.label,
                        &p.ldr[1],
                        0.0,
                        GAMMA,
                        &ExposureThresholds::default(),
                        &MetricConfig::default(),
                    )
                    .unwrap();
                    assert!(db >= 45.0, "MD pair {} re-checks at {db} dB", p.index);
                }
            }
            SubsetTag::Ed | SubsetTag::Edm => {
                assert_eq!(p.source, LabelSource::SyntheticExposure);
                assert!(p.gain.is_some());
            }
            SubsetTag::Mdm => assert_ne!(p.source, LabelSource::SyntheticExposure),
        }
        if matches!(p.tag, SubsetTag::Edm | SubsetTag::Mdm) {
            assert_eq!(p.shifts[1], [0, 0]);
            assert!(p.shifts[0] != [0, 0] && p.shifts[2] != [0, 0]);
        }
    }
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_manifest(dir.path());
    let mut hashes = Vec::new();
    for workers in [1, 4] {
        let out = dir.path().join(format!("out_{workers}"));
        let cfg = PipelineConfig {
            workers,
            seed: 7,
            ..PipelineConfig::default()
        };
        run_pipeline(&manifest, &out, &cfg).unwrap();
        hashes.push(hash_tree(&out));
    }
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn seed_changes_exposure_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = Manifest {
        scenes: vec![write_scene(dir.path(), "s", (192, 128), radiance(0.0))],
    };
    let run = |seed| {
        let out = dir.path().join(format!("out_{seed}"));
        run_pipeline(
            &manifest,
            &out,
            &PipelineConfig {
                seed,
                ..PipelineConfig::default()
            },
        )
        .unwrap();
        hash_tree(&out)
    };
    assert_ne!(run(1), run(2));
}

#[test]
fn broken_scene_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = small_manifest(dir.path());
    let mut broken = manifest.scenes[0].clone();
    broken.id = "broken".into();
    broken.frames[2] = dir.path().join("missing.png");
    manifest.scenes.push(broken);
    let out = dir.path().join("out");
    let report = run_pipeline(&manifest, &out, &PipelineConfig::default()).unwrap();
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].0, "broken");
    assert_eq!(report.scenes.len(), 2);
    assert!(!out.join("broken").exists());
}

#[test]
fn empty_manifest_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let report = run_pipeline(&Manifest { scenes: vec![] }, &out, &PipelineConfig::default()).unwrap();
    assert!(report.stats.is_empty());
    assert!(out.is_dir());
}

#[test]
fn disabled_augmentation_yields_only_base_subsets() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_manifest(dir.path());
    let out = dir.path().join("out");
    let cfg = PipelineConfig {
        pseudo_static: false,
        free_moving: false,
        ..PipelineConfig::default()
    };
    let report = run_pipeline(&manifest, &out, &cfg).unwrap();
    assert_eq!(report.stats.subset_total(SubsetTag::Edm), 0);
    assert_eq!(report.stats.subset_total(SubsetTag::Mdm), 0);
    for p in pairs_under(&out) {
        assert_eq!(p.shifts, [[0, 0]; 3]);
    }
}
