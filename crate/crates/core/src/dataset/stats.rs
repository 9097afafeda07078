use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;
use walkdir::WalkDir;

use crate::motion_domain::SubsetTag;

use super::pairio::{read_meta, PairError, META_FILE};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no supervision pairs under {0}")]
    EmptyDataset(String),
    #[error(transparent)]
    Pair(#[from] PairError),
    #[error("scanning {path}: {source}")]
    Walk { path: String, source: walkdir::Error },
}

/// Pair counts per input dataset and subset, in `SubsetTag::ALL` order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetStats {
    pub counts: BTreeMap<String, [u64; 4]>,
}

fn slot(tag: SubsetTag) -> usize {
    SubsetTag::ALL
        .iter()
        .position(|t| *t == tag)
        .expect("ALL lists every tag")
}

fn pct(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

impl DatasetStats {
    pub fn add(&mut self, dataset: &str, tag: SubsetTag, n: u64) {
        self.counts.entry(dataset.to_string()).or_default()[slot(tag)] += n;
    }

    /// Associative, order-independent merge.
    pub fn merge(&mut self, other: &DatasetStats) {
        for (ds, c) in &other.counts {
            let e = self.counts.entry(ds.clone()).or_default();
            for k in 0..4 {
                e[k] += c[k];
            }
        }
    }

    pub fn count(&self, dataset: &str, tag: SubsetTag) -> u64 {
        self.counts.get(dataset).map_or(0, |c| c[slot(tag)])
    }

    pub fn dataset_total(&self, dataset: &str) -> u64 {
        self.counts.get(dataset).map_or(0, |c| c.iter().sum())
    }

    pub fn subset_total(&self, tag: SubsetTag) -> u64 {
        self.counts.values().map(|c| c[slot(tag)]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().flat_map(|c| c.iter()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Share of subset `tag` within one dataset; sums to 100 per dataset.
    pub fn percent_of_dataset(&self, dataset: &str, tag: SubsetTag) -> f64 {
        pct(self.count(dataset, tag), self.dataset_total(dataset))
    }

    /// Share of the pairs of all datasets together.
    pub fn percent_of_total(&self, dataset: &str, tag: SubsetTag) -> f64 {
        pct(self.count(dataset, tag), self.total())
    }

    /// Markdown table: one column per dataset plus a `Sum` column, cells in
    /// percent of all pairs, and a `Total` row whose `Sum` cell is the
    /// italicized pair count.
    pub fn render_table(&self) -> String {
        let names: Vec<&String> = self.counts.keys().collect();
        let total = self.total();
        let mut s = String::new();
        let header: Vec<&str> = names.iter().map(|n| n.as_str()).collect();
        writeln!(s, "| Subset | {} | Sum |", header.join(" | ")).unwrap();
        writeln!(s, "|---|{}---|", "---|".repeat(names.len())).unwrap();
        for tag in SubsetTag::ALL {
            let cells: Vec<String> = names
                .iter()
                .map(|n| format!("{:.2}", self.percent_of_total(n, tag)))
                .collect();
            let sum = pct(self.subset_total(tag), total);
            writeln!(s, "| {} | {} | {:.2} |", tag, cells.join(" | "), sum).unwrap();
        }
        let cells: Vec<String> = names
            .iter()
            .map(|n| format!("{:.2}", pct(self.dataset_total(n), total)))
            .collect();
        writeln!(s, "| Total | {} | *{}* |", cells.join(" | "), total).unwrap();
        s
    }

    /// Machine-readable rows: dataset, subset, count, percent of dataset,
    /// percent of total.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "dataset",
            "subset",
            "count",
            "percent_of_dataset",
            "percent_of_total",
        ])
        .expect("in-memory write");
        for ds in self.counts.keys() {
            for tag in SubsetTag::ALL {
                w.write_record([
                    ds.clone(),
                    tag.to_string(),
                    self.count(ds, tag).to_string(),
                    format!("{:.4}", self.percent_of_dataset(ds, tag)),
                    format!("{:.4}", self.percent_of_total(ds, tag)),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv of UTF-8 fields")
    }
}

/// Counts every pair stored under `root` by reading its metadata record.
pub fn scan_root(root: &Path) -> Result<DatasetStats, StatsError> {
    let mut stats = DatasetStats::default();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|source| StatsError::Walk {
            path: root.display().to_string(),
            source,
        })?;
        if entry.file_type().is_file() && entry.file_name() == META_FILE {
            let dir = entry.path().parent().expect("a file has a parent");
            let meta = read_meta(dir)?;
            stats.add(&meta.dataset, meta.tag, 1);
        }
    }
    Ok(stats)
}

/// [`scan_root`] that refuses an empty tree.
pub fn stats_report(root: &Path) -> Result<DatasetStats, StatsError> {
    let stats = scan_root(root)?;
    if stats.is_empty() {
        return Err(StatsError::EmptyDataset(root.display().to_string()));
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with(counts: [u64; 4]) -> DatasetStats {
        let mut s = DatasetStats::default();
        for (tag, n) in SubsetTag::ALL.iter().zip(counts) {
            s.add("k", *tag, n);
        }
        s
    }

    #[test]
    fn even_split() {
        let s = with([10, 0, 10, 0]);
        assert_eq!(s.percent_of_dataset("k", SubsetTag::Md), 50.0);
        assert_eq!(s.percent_of_dataset("k", SubsetTag::Edm), 0.0);
    }

    #[test]
    fn arithmetic_example() {
        let s = with([30, 27, 23, 20]);
        let p: Vec<f64> = SubsetTag::ALL
            .iter()
            .map(|t| s.percent_of_dataset("k", *t))
            .collect();
        assert_eq!(p, vec![30.0, 27.0, 23.0, 20.0]);
        assert_eq!(s.total(), 100);
    }

    #[test]
    fn two_datasets_table_layout() {
        let mut s = with([30, 27, 23, 20]);
        s.add("v", SubsetTag::Md, 100);
        let t = s.render_table();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "| Subset | k | v | Sum |");
        assert_eq!(lines[4], "| MD | 11.50 | 50.00 | 61.50 |");
        assert_eq!(lines[6], "| Total | 50.00 | 50.00 | *200* |");
    }

    #[test]
    fn per_dataset_percentages_sum_to_100() {
        let mut s = with([3, 7, 11, 13]);
        s.add("v", SubsetTag::Ed, 9);
        s.add("v", SubsetTag::Mdm, 2);
        for ds in ["k", "v"] {
            let sum: f64 = SubsetTag::ALL.iter().map(|t| s.percent_of_dataset(ds, *t)).sum();
            assert!((sum - 100.0).abs() < 0.01);
        }
    }

    #[test]
    fn merge_is_order_independent() {
        let a = with([1, 2, 3, 4]);
        let mut b = DatasetStats::default();
        b.add("v", SubsetTag::Ed, 5);
        let mut ab = a.clone();
        ab.merge(&b);
        let mut ba = b.clone();
        ba.merge(&a);
        assert_eq!(ab, ba);
    }

    #[test]
    fn csv_rows() {
        let s = with([1, 1, 1, 1]);
        let csv = s.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "k,ED,1,25.0000,25.0000");
    }

    #[test]
    fn empty_root_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            stats_report(dir.path()),
            Err(StatsError::EmptyDataset(_))
        ));
    }
}
