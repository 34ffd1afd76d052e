//! Thumbnails, convergence tables and the matched-versus-mismatched summary.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::runner::{cell_image_path, create_dir, write_text, CellResult, ResultsTable};
use crate::io::{read_image_raw, write_image_pgm};
use crate::Result;

/// Rank of the matched adjoint among the adjoints tried for one forward kind.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRank {
    pub dataset: String,
    pub algo: String,
    pub filter: String,
    pub fwd: String,
    /// 1 is best; `None` when the matched cell diverged or failed.
    pub matched_rank: Option<usize>,
    /// Cells that entered the ranking.
    pub ranked: usize,
    /// Adjoints whose cells diverged or failed and were left out.
    pub excluded: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub groups: Vec<GroupRank>,
    pub text: String,
}

impl ReportSummary {
    /// Groups whose matched adjoint ranks first, and the group count.
    pub fn dominance(&self) -> (usize, usize) {
        (self.groups.iter().filter(|g| g.matched_rank == Some(1)).count(), self.groups.len())
    }
}

fn rankable(r: &CellResult) -> bool {
    r.error.is_none() && !r.diverged && r.psnr.is_finite()
}

pub(super) fn rank_groups(rows: &[CellResult]) -> Vec<GroupRank> {
    let mut keys: Vec<(&str, &str, &str, &str)> = Vec::new();
    for r in rows.iter().filter(|r| r.algo != "forward") {
        let k = (r.dataset.as_str(), r.algo.as_str(), r.filter.as_str(), r.fwd.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut out = Vec::new();
    for (dataset, algo, filter, fwd) in keys {
        let members: Vec<&CellResult> = rows
            .iter()
            .filter(|r| r.dataset == dataset && r.algo == algo && r.filter == filter && r.fwd == fwd)
            .collect();
        let Some(matched) = members.iter().find(|r| r.adj == fwd) else { continue };
        let ranked: Vec<&&CellResult> = members.iter().filter(|r| rankable(r)).collect();
        let matched_rank =
            rankable(matched).then(|| 1 + ranked.iter().filter(|r| r.psnr > matched.psnr).count());
        out.push(GroupRank {
            dataset: dataset.into(),
            algo: algo.into(),
            filter: filter.into(),
            fwd: fwd.into(),
            matched_rank,
            ranked: ranked.len(),
            excluded: members.iter().filter(|r| !rankable(r)).map(|r| r.adj.clone()).collect(),
        });
    }
    out
}

fn summary_text(groups: &[GroupRank]) -> String {
    let mut s = String::new();
    for g in groups {
        let rank = match g.matched_rank {
            Some(r) => format!("matched rank {r} of {}", g.ranked),
            None => "matched cell diverged".to_string(),
        };
        let _ = write!(s, "{} {} {} fwd={}: {rank}", g.dataset, g.algo, g.filter, g.fwd);
        if !g.excluded.is_empty() {
            let _ = write!(s, " (diverged: {})", g.excluded.join(" "));
        }
        s.push('\n');
    }
    let dominant = groups.iter().filter(|g| g.matched_rank == Some(1)).count();
    let _ = writeln!(s, "coupling dominance: {dominant}/{}", groups.len());
    s
}

/// Writes `summary.txt`, `thumbnails/<id>.pgm` and
/// `convergence/<dataset>_<algo>_<fwd>_<adj>_<id>.csv` under `dir`. Images
/// and traces missing from memory are taken from `dir/cells` when present.
pub fn emit_report(results: &ResultsTable, dir: &Path) -> Result<ReportSummary> {
    let thumbs = dir.join("thumbnails");
    let conv = dir.join("convergence");
    create_dir(&thumbs)?;
    create_dir(&conv)?;
    for r in results.rows.iter().filter(|r| !r.id.is_empty()) {
        let stored = cell_image_path(dir, &r.id);
        let img = match &r.image {
            Some(img) => Some(img.clone()),
            None if stored.exists() => Some(read_image_raw(&stored)?),
            None => None,
        };
        if let Some(img) = img {
            write_image_pgm(&thumbs.join(format!("{}.pgm", r.id)), &img)?;
        }
        let trace_file = dir.join("cells").join(format!("{}.trace.csv", r.id));
        let trace = match &r.trace {
            Some(t) => Some(t.to_csv()),
            None if trace_file.exists() => Some(
                fs::read_to_string(&trace_file)
                    .map_err(|source| crate::Error::Io { path: trace_file.display().to_string(), source })?,
            ),
            None => None,
        };
        if let Some(t) = trace {
            let name = format!("{}_{}_{}_{}_{}.csv", r.dataset, r.algo, r.fwd, r.adj, r.id);
            write_text(&conv.join(name), &t)?;
        }
    }
    let groups = rank_groups(&results.rows);
    let text = summary_text(&groups);
    write_text(&dir.join("summary.txt"), &text)?;
    Ok(ReportSummary { groups, text })
}
