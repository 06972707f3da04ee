//! CSV outputs, bank coefficient files and the moment cache.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use subdiff_core::filterbank::AnalysisBank;
use subdiff_core::sim::NodeSignals;
use subdiff_core::theory::MomentSet;

/// Reads a bank file: one coefficient per line, filters separated by blank lines, `#`
/// starts a comment.
pub fn read_bank_file(path: &Path) -> Result<AnalysisBank> {
    let f = File::open(path).with_context(|| format!("opening bank file {}", path.display()))?;
    let mut filters: Vec<Vec<f64>> = Vec::new();
    let mut current = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            if !current.is_empty() {
                filters.push(std::mem::take(&mut current));
            }
            continue;
        }
        let x: f64 = text
            .parse()
            .with_context(|| format!("{}:{}: bad coefficient '{text}'", path.display(), i + 1))?;
        current.push(x);
    }
    if !current.is_empty() {
        filters.push(current);
    }
    Ok(AnalysisBank::from_filters(filters)?)
}

pub fn write_bank_file(path: &Path, bank: &AnalysisBank) -> Result<()> {
    let mut f = File::create(path)?;
    for (i, h) in bank.filters().iter().enumerate() {
        if i > 0 {
            writeln!(f)?;
        }
        for x in h {
            writeln!(f, "{x}")?;
        }
    }
    Ok(())
}

/// One MSD curve with its optional label columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCurve {
    pub msd_db: Vec<f64>,
    pub algorithm: Option<String>,
    pub mu: Option<f64>,
    pub n_d: Option<usize>,
}

impl LabeledCurve {
    pub fn plain(msd_db: Vec<f64>) -> Self {
        LabeledCurve {
            msd_db,
            algorithm: None,
            mu: None,
            n_d: None,
        }
    }
}

/// Writes `n,msd_db[,algorithm][,mu][,n_d]`; a label column appears when any curve has it.
pub fn write_curves<W: Write>(out: W, curves: &[LabeledCurve]) -> Result<()> {
    let with_alg = curves.iter().any(|c| c.algorithm.is_some());
    let with_mu = curves.iter().any(|c| c.mu.is_some());
    let with_nd = curves.iter().any(|c| c.n_d.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["n", "msd_db"];
    if with_alg {
        header.push("algorithm");
    }
    if with_mu {
        header.push("mu");
    }
    if with_nd {
        header.push("n_d");
    }
    w.write_record(&header)?;
    let opt = |x: Option<String>| x.unwrap_or_default();
    for c in curves {
        for (n, v) in c.msd_db.iter().enumerate() {
            let mut row = vec![n.to_string(), v.to_string()];
            if with_alg {
                row.push(opt(c.algorithm.clone()));
            }
            if with_mu {
                row.push(opt(c.mu.map(|m| m.to_string())));
            }
            if with_nd {
                row.push(opt(c.n_d.map(|m| m.to_string())));
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mu: f64,
    pub n_d: usize,
    pub sim_db: f64,
    /// `None` when the theory is unavailable or not mean-square stable at this point.
    pub theory_db: Option<f64>,
    pub diverged: bool,
}

/// Writes `mu,n_d,sim_db,theory_db,diverged`; a missing theory value is left empty.
pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["mu", "n_d", "sim_db", "theory_db", "diverged"])?;
    for r in rows {
        w.write_record([
            r.mu.to_string(),
            r.n_d.to_string(),
            r.sim_db.to_string(),
            r.theory_db.map(|x| x.to_string()).unwrap_or_default(),
            r.diverged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Raw sequences as `t,node,u,v,d` (node 1-based).
pub fn write_signals<W: Write>(out: W, signals: &[NodeSignals]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "node", "u", "v", "d"])?;
    for (k, s) in signals.iter().enumerate() {
        for t in 0..s.u.len() {
            w.write_record([
                t.to_string(),
                (k + 1).to_string(),
                s.u[t].to_string(),
                s.v[t].to_string(),
                s.d[t].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn push_matrix(
    w: &mut csv::Writer<File>,
    kind: &str,
    node: usize,
    sub: usize,
    m: &DMatrix<f64>,
) -> Result<()> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            w.write_record([
                kind,
                &node.to_string(),
                &sub.to_string(),
                &r.to_string(),
                &c.to_string(),
                &m[(r, c)].to_string(),
            ])?;
        }
    }
    Ok(())
}

/// Dumps a moment set as `kind,node,sub,row,col,value` rows. Values round-trip exactly.
pub fn save_moments(path: &Path, mom: &MomentSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["kind", "node", "sub", "row", "col", "value"])?;
    w.write_record(["samples", "0", "0", "0", "0", &mom.samples.to_string()])?;
    w.write_record(["max_rse", "0", "0", "0", "0", &mom.max_rse.to_string()])?;
    for k in 0..mom.nodes() {
        push_matrix(&mut w, "eb", k, 0, &mom.eb[k])?;
        push_matrix(&mut w, "ebb", k, 0, &mom.ebb[k])?;
        push_matrix(&mut w, "ett", k, 0, &mom.ett[k])?;
        for (i, p) in mom.p_upd[k].iter().enumerate() {
            w.write_record([
                "p",
                &k.to_string(),
                &i.to_string(),
                "0",
                "0",
                &p.to_string(),
            ])?;
        }
        if let Some(ea) = mom.ea.get(k) {
            for (i, a) in ea.iter().enumerate() {
                push_matrix(&mut w, "ea", k, i, a)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_moments(path: &Path) -> Result<MomentSet> {
    type Entry = (usize, usize, usize, usize, f64);
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut entries: Vec<(String, Entry)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 6 {
            bail!("{}: expected 6 columns", path.display());
        }
        let u = |i: usize| -> Result<usize> { Ok(rec[i].parse()?) };
        entries.push((
            rec[0].to_owned(),
            (u(1)?, u(2)?, u(3)?, u(4)?, rec[5].parse()?),
        ));
    }
    let dims = |kind: &str| -> (usize, usize, usize) {
        entries
            .iter()
            .filter(|(k, _)| k == kind)
            .fold((0, 0, 0), |(n, s, d), (_, e)| {
                (n.max(e.0 + 1), s.max(e.1 + 1), d.max(e.2 + 1))
            })
    };
    let (nodes, _, m) = dims("eb");
    let (_, n_sub, _) = dims("p");
    let (_, ea_sub, _) = dims("ea");
    let mut mom = MomentSet {
        eb: vec![DMatrix::zeros(m, m); nodes],
        ebb: vec![DMatrix::zeros(m * m, m * m); nodes],
        ett: vec![DMatrix::zeros(m, m); nodes],
        ea: if ea_sub > 0 {
            vec![vec![DMatrix::zeros(m, m); ea_sub]; nodes]
        } else {
            Vec::new()
        },
        p_upd: vec![vec![0.0; n_sub]; nodes],
        max_rse: 0.0,
        samples: 0,
    };
    for (kind, (k, i, row, col, v)) in entries {
        match kind.as_str() {
            "samples" => mom.samples = v as usize,
            "max_rse" => mom.max_rse = v,
            "eb" => mom.eb[k][(row, col)] = v,
            "ebb" => mom.ebb[k][(row, col)] = v,
            "ett" => mom.ett[k][(row, col)] = v,
            "ea" => mom.ea[k][i][(row, col)] = v,
            "p" => mom.p_upd[k][i] = v,
            other => bail!("{}: unknown row kind '{other}'", path.display()),
        }
    }
    Ok(mom)
}
