//! Minimal plotfile: a directory holding a text `Header` and one binary fab
//! dump per grid (see [`FArrayBox::write_binary`]).
//!
//! Each grid is written over its grown box, assembled from its storage
//! units, so dumps of the same data in different layouts are byte-identical.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fab::FArrayBox;
use crate::index_space::{IndexBox, IntVect};
use crate::level::{Geometry, MultiFab};

const HEADER_TAG: &str = "tilemesh-plotfile-1";

/// Contents of a plotfile read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Plotfile {
    pub domain: IndexBox,
    pub ncomp: usize,
    pub nghost: usize,
    pub grids: Vec<IndexBox>,
    pub fabs: Vec<FArrayBox>,
}

fn grid_file(g: usize) -> String {
    format!("grid_{g:05}.fab")
}

pub fn write_plotfile(dir: &Path, mf: &MultiFab, geom: &Geometry) -> Result<()> {
    fs::create_dir_all(dir)?;
    let ba = mf.boxarray();
    let mut header = format!(
        "{HEADER_TAG}\ndomain {}\nncomp {}\nnghost {}\nngrids {}\n",
        fmt_box(&geom.domain()),
        mf.ncomp(),
        mf.nghost(),
        ba.len()
    );
    for b in ba.boxes() {
        header.push_str(&format!("grid {}\n", fmt_box(b)));
    }
    fs::write(dir.join("Header"), header)?;
    for g in 0..ba.len() {
        let fab = mf.grid_fab(g)?;
        let file = fs::File::create(dir.join(grid_file(g)))?;
        fab.write_binary(BufWriter::new(file))?;
    }
    Ok(())
}

fn fmt_box(b: &IndexBox) -> String {
    let (lo, hi) = (b.lo(), b.hi());
    format!("{} {} {} {} {} {}", lo.x(), lo.y(), lo.z(), hi.x(), hi.y(), hi.z())
}

fn parse_box(s: &str) -> Result<IndexBox> {
    let v: Vec<i32> = s
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Format(format!("bad box '{s}': {e}")))?;
    if v.len() != 6 {
        return Err(Error::Format(format!("bad box '{s}'")));
    }
    Ok(IndexBox::new(IntVect::new(v[0], v[1], v[2]), IntVect::new(v[3], v[4], v[5])))
}

pub fn read_plotfile(dir: &Path) -> Result<Plotfile> {
    let header = fs::read_to_string(dir.join("Header"))?;
    let mut lines = header.lines();
    if lines.next() != Some(HEADER_TAG) {
        return Err(Error::Format("missing plotfile tag".into()));
    }
    let mut field = |key: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| Error::Format(format!("missing {key}")))?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(str::to_owned)
            .ok_or_else(|| Error::Format(format!("expected {key}, got '{line}'")))
    };
    let num = |s: String| s.parse::<usize>().map_err(|e| Error::Format(e.to_string()));
    let domain = parse_box(&field("domain")?)?;
    let ncomp = num(field("ncomp")?)?;
    let nghost = num(field("nghost")?)?;
    let ngrids = num(field("ngrids")?)?;
    let grids = (0..ngrids)
        .map(|_| parse_box(&field("grid")?))
        .collect::<Result<Vec<_>>>()?;
    let fabs = (0..ngrids)
        .map(|g| {
            let file = fs::File::open(dir.join(grid_file(g)))?;
            FArrayBox::read_binary(BufReader::new(file))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Plotfile {
        domain,
        ncomp,
        nghost,
        grids,
        fabs,
    })
}
