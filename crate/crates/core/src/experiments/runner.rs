//! Runs experiment cells grouped by dataset, in parallel within a group.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::spec::{ExperimentSpec, Method};
use super::{generate_dataset, reference_image};
use crate::fbp::fbp_reconstruct;
use crate::io::write_image_raw;
use crate::metrics::psnr;
use crate::solvers::{poisson_weights, reconstruct, Algorithm, ConvergenceTrace};
use crate::{reconstruction_circle_mask, Error, ImageGrid, ProjectorKind, ProjectorPair, Result, Sinogram};

pub const RESULTS_HEADER: &str = "dataset,fwd,adj,algo,filter,psnr,final_cost,diverged,iters";

#[derive(Debug, Clone)]
pub struct MatrixOptions {
    /// Grid size every preset is scaled to.
    pub size: usize,
    /// Where results, images and traces go; nothing is written when unset.
    pub out_dir: Option<PathBuf>,
    /// Most real-space weights cached at once per dataset.
    pub cache_budget: usize,
}

impl Default for MatrixOptions {
    fn default() -> Self {
        MatrixOptions { size: super::REFERENCE_SIZE, out_dir: None, cache_budget: 160 << 20 }
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    /// Content hash of the cell's specification.
    pub id: String,
    pub dataset: String,
    pub fwd: String,
    pub adj: String,
    pub algo: String,
    pub filter: String,
    pub psnr: f64,
    pub final_cost: f64,
    pub diverged: bool,
    pub iters: usize,
    /// Set when the cell could not be computed at all.
    pub error: Option<String>,
    /// Reconstruction, absent for forward cells and failures.
    pub image: Option<ImageGrid>,
    pub trace: Option<ConvergenceTrace>,
}

impl CellResult {
    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.dataset,
            self.fwd,
            self.adj,
            self.algo,
            self.filter,
            self.psnr,
            self.final_cost,
            self.diverged,
            self.iters
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct ResultsTable {
    pub rows: Vec<CellResult>,
}

impl ResultsTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(RESULTS_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    /// Reads a results CSV back; ids, errors, images and traces are left empty.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == RESULTS_HEADER => {}
            other => return Err(Error::Parse(format!("unexpected results header {other:?}"))),
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            let bad = |what: &str| Error::Parse(format!("results line {}: bad {what}", i + 2));
            if f.len() != 9 {
                return Err(bad("column count"));
            }
            rows.push(CellResult {
                id: String::new(),
                dataset: f[0].into(),
                fwd: f[1].into(),
                adj: f[2].into(),
                algo: f[3].into(),
                filter: f[4].into(),
                psnr: f[5].parse().map_err(|_| bad("psnr"))?,
                final_cost: f[6].parse().map_err(|_| bad("final_cost"))?,
                diverged: f[7].parse().map_err(|_| bad("diverged"))?,
                iters: f[8].parse().map_err(|_| bad("iters"))?,
                error: None,
                image: None,
                trace: None,
            });
        }
        Ok(ResultsTable { rows })
    }

    /// Reads `results.csv` from a results directory, with ids and errors
    /// from `manifest.csv` when it is there.
    pub fn load(dir: &Path) -> Result<Self> {
        let read = |p: &Path| fs::read_to_string(p).map_err(|source| Error::Io { path: p.display().to_string(), source });
        let mut table = ResultsTable::from_csv(&read(&dir.join("results.csv"))?)?;
        let manifest = dir.join("manifest.csv");
        if manifest.exists() {
            for (line, row) in read(&manifest)?.lines().skip(1).zip(table.rows.iter_mut()) {
                let mut f = line.splitn(3, ',');
                f.next();
                row.id = f.next().unwrap_or("").to_string();
                row.error = f.next().filter(|e| !e.is_empty()).map(str::to_string);
            }
        }
        Ok(table)
    }

    pub fn errored(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// `id,error` per row, linking rows to their files.
    pub fn manifest_csv(&self) -> String {
        let mut s = String::from("row,id,error\n");
        for (i, r) in self.rows.iter().enumerate() {
            let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            let _ = writeln!(s, "{},{},{}", i + 1, r.id, err);
        }
        s
    }

    /// Writes `results.csv`, `manifest.csv` and per-cell images and traces
    /// under `cells/`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let cells = dir.join("cells");
        create_dir(&cells)?;
        write_text(&dir.join("results.csv"), &self.to_csv())?;
        write_text(&dir.join("manifest.csv"), &self.manifest_csv())?;
        for r in &self.rows {
            if let Some(img) = &r.image {
                write_image_raw(&cells.join(format!("{}.raw", r.id)), img)?;
            }
            if let Some(t) = &r.trace {
                write_text(&cells.join(format!("{}.trace.csv", r.id)), &t.to_csv())?;
            }
        }
        Ok(())
    }
}

pub(super) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })
}

pub(super) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

struct Group {
    s: Sinogram,
    reference: ImageGrid,
    mask: ImageGrid,
    weights: Option<Sinogram>,
    pairs: BTreeMap<ProjectorKind, ProjectorPair>,
}

fn prepare(first: &ExperimentSpec, members: &[&ExperimentSpec], opts: &MatrixOptions) -> Result<Group> {
    let s = generate_dataset(&first.dataset)?;
    let size = first.dataset.cells;
    let weights = match first.dataset.counts_per_unit()? {
        Some(c) if members.iter().any(|m| matches!(&m.method, Method::Iterative(cfg) if cfg.algorithm == Algorithm::Pwls)) => {
            Some(poisson_weights(&s, c)?)
        }
        _ => None,
    };

    let mut uses: BTreeMap<ProjectorKind, usize> = BTreeMap::new();
    for m in members {
        let iterative = matches!(m.method, Method::Iterative(_));
        let kinds = match m.method {
            Method::Forward => vec![m.adjoint],
            Method::Fbp(_) => vec![m.adjoint],
            Method::Iterative(_) => vec![m.forward.unwrap_or(m.adjoint), m.adjoint],
        };
        for k in kinds {
            *uses.entry(k).or_default() += usize::from(iterative);
        }
    }
    let g = s.geometry().clone();
    let mut pairs = BTreeMap::new();
    for &k in uses.keys() {
        pairs.insert(k, ProjectorPair::new(k, &g)?);
    }
    let mut order: Vec<(ProjectorKind, usize)> = uses.into_iter().filter(|&(_, n)| n > 0).collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut spent = 0usize;
    for (k, _) in order {
        let pair = pairs.get_mut(&k).expect("pair built above");
        let need = pair.estimated_cache_weights();
        if need > 0 && spent + need <= opts.cache_budget && pair.precompute_weights() {
            spent += need;
        }
    }
    Ok(Group {
        s,
        reference: reference_image(size)?,
        mask: reconstruction_circle_mask(size),
        weights,
        pairs,
    })
}

fn blank(spec: &ExperimentSpec) -> CellResult {
    CellResult {
        id: spec.id(),
        dataset: spec.dataset.name.to_string(),
        fwd: spec.forward_token(),
        adj: spec.adjoint.to_string(),
        algo: spec.algo_token().to_string(),
        filter: spec.filter_token().to_string(),
        psnr: f64::NAN,
        final_cost: f64::NAN,
        diverged: false,
        iters: 0,
        error: None,
        image: None,
        trace: None,
    }
}

fn run_cell(spec: &ExperimentSpec, g: &Group) -> Result<CellResult> {
    let mut out = blank(spec);
    let pair = |k: ProjectorKind| g.pairs.get(&k).expect("every used kind is prepared");
    match &spec.method {
        Method::Forward => {
            let sino = pair(spec.adjoint).forward(&g.reference)?;
            out.psnr = psnr(&sino, &g.s, None)?;
        }
        Method::Fbp(filter) => {
            let img = fbp_reconstruct(&g.s, pair(spec.adjoint), *filter)?;
            out.psnr = psnr(&img, &g.reference, Some(&g.mask))?;
            out.image = Some(img);
        }
        Method::Iterative(cfg) => {
            let fwd = pair(spec.forward.expect("checked at parse time"));
            let w = if cfg.algorithm == Algorithm::Pwls { g.weights.as_ref() } else { None };
            let (img, trace) = reconstruct(&g.s, fwd, pair(spec.adjoint), cfg, w, Some(&g.reference))?;
            out.psnr = psnr(&img, &g.reference, Some(&g.mask))?;
            out.final_cost = trace.final_cost();
            out.diverged = trace.diverged;
            out.iters = trace.iterations();
            out.image = Some(img);
            out.trace = Some(trace);
        }
    }
    Ok(out)
}

/// Runs every cell at `opts.size`. A failing cell is recorded with its
/// error and the rest still run; divergence is a result, not a failure.
pub fn run_matrix(specs: &[ExperimentSpec], opts: &MatrixOptions) -> Result<ResultsTable> {
    let scaled: Vec<ExperimentSpec> = specs
        .iter()
        .map(|s| Ok(ExperimentSpec { dataset: s.dataset.scaled(opts.size)?, ..s.clone() }))
        .collect::<Result<_>>()?;

    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, s) in scaled.iter().enumerate() {
        groups.entry(s.dataset.label()).or_default().push(i);
    }
    let mut rows: Vec<Option<CellResult>> = vec![None; scaled.len()];
    for members in groups.values() {
        let refs: Vec<&ExperimentSpec> = members.iter().map(|&i| &scaled[i]).collect();
        match prepare(refs[0], &refs, opts) {
            Ok(group) => {
                let done: Vec<CellResult> = refs
                    .par_iter()
                    .map(|s| run_cell(s, &group).unwrap_or_else(|e| CellResult { error: Some(e.to_string()), ..blank(s) }))
                    .collect();
                for (&i, r) in members.iter().zip(done) {
                    rows[i] = Some(r);
                }
            }
            Err(e) => {
                for &i in members {
                    rows[i] = Some(CellResult { error: Some(e.to_string()), ..blank(&scaled[i]) });
                }
            }
        }
    }
    let table = ResultsTable { rows: rows.into_iter().map(|r| r.expect("every cell ran")).collect() };
    if let Some(dir) = &opts.out_dir {
        table.write(dir)?;
    }
    Ok(table)
}

/// Raw image path of a cell inside a results directory.
pub(super) fn cell_image_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("cells").join(format!("{id}.raw"))
}
