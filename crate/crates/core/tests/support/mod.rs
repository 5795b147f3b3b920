//! Brute-force oracles shared by the integration and acceptance tests.
//! Nothing here calls the plan or decomposition code it is used to check.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use tilemesh::{BoxArray, Geometry, IndexBox, IntVect, MultiFab};

/// Checks that `pieces` cover `target` with every point exactly once.
pub fn check_disjoint_cover(pieces: &[IndexBox], target: &IndexBox) -> Result<(), String> {
    let mut hits: HashMap<IntVect, usize> = HashMap::new();
    for b in pieces {
        if b.index_type() != target.index_type() {
            return Err(format!("piece {b} has the wrong index type for {target}"));
        }
        for p in b.points() {
            *hits.entry(p).or_default() += 1;
        }
    }
    for p in target.points() {
        match hits.remove(&p) {
            Some(1) => {}
            Some(n) => return Err(format!("{p} covered {n} times")),
            None => return Err(format!("{p} of {target} not covered")),
        }
    }
    if let Some(p) = hits.keys().next() {
        return Err(format!("{p} lies outside {target}"));
    }
    Ok(())
}

pub fn random_box_within(rng: &mut impl Rng, max_extent: i32) -> IndexBox {
    let lo = IntVect(std::array::from_fn(|_| rng.gen_range(-5..5)));
    let ext = IntVect(std::array::from_fn(|_| rng.gen_range(1..=max_extent)));
    IndexBox::new(lo, lo + ext - IntVect::UNIT)
}

/// Random disjoint grids inside `domain`: recursive random bisection, then
/// each leaf kept with probability `keep`.
pub fn random_boxarray(rng: &mut impl Rng, domain: &IndexBox, keep: f64) -> BoxArray {
    fn bisect(rng: &mut impl Rng, b: IndexBox, depth: u32, out: &mut Vec<IndexBox>) {
        let splittable: Vec<usize> = (0..3).filter(|&d| b.length(d) >= 2).collect();
        if depth == 0 || splittable.is_empty() || rng.gen_bool(0.25) {
            out.push(b);
            return;
        }
        let d = splittable[rng.gen_range(0..splittable.len())];
        let cut = b.lo()[d] + rng.gen_range(1..b.length(d) as i32);
        bisect(rng, b.with_hi(d, cut - 1), depth - 1, out);
        bisect(rng, b.with_lo(d, cut), depth - 1, out);
    }
    let mut leaves = Vec::new();
    bisect(rng, *domain, 4, &mut leaves);
    let mut kept: Vec<_> = leaves.iter().copied().filter(|_| rng.gen_bool(keep)).collect();
    if kept.is_empty() {
        kept.push(leaves[0]);
    }
    BoxArray::new(kept).expect("bisection leaves are disjoint")
}

/// Every valid source of ghost point `p`: all units and all periodic images
/// within `nghost / L + 1` periods per direction, searched exhaustively.
fn sources(mf: &MultiFab, geom: &Geometry, p: IntVect) -> Vec<(usize, IntVect)> {
    let dom = geom.domain();
    let range = |d: usize| {
        if geom.is_periodic(d) {
            let reach = (mf.nghost() / dom.length(d)) as i32 + 1;
            -reach..=reach
        } else {
            0..=0
        }
    };
    let mut out = Vec::new();
    for nz in range(2) {
        for ny in range(1) {
            for nx in range(0) {
                let n = [nx, ny, nz];
                let shift = IntVect(std::array::from_fn(|d| n[d] * dom.length(d) as i32));
                let q = p - shift;
                for (u, unit) in mf.units().iter().enumerate() {
                    if unit.valid.contains(q) {
                        out.push((u, q));
                    }
                }
            }
        }
    }
    out
}

/// Compares a filled MultiFab against its pre-fill state: every ghost cell
/// with a valid source must hold that source's value, every other ghost
/// cell and every valid cell must be unchanged.
pub fn check_ghost_fill(before: &MultiFab, after: &MultiFab, geom: &Geometry) -> Result<(), String> {
    for (u, unit) in before.units().iter().enumerate() {
        let filled = &after.unit(u).fab;
        for c in 0..before.ncomp() {
            for p in unit.fab.abox().points() {
                let got = filled.at(p, c).unwrap();
                let old = unit.fab.at(p, c).unwrap();
                if unit.valid.contains(p) {
                    if got.to_bits() != old.to_bits() {
                        return Err(format!("unit {u}: valid cell {p} changed"));
                    }
                    continue;
                }
                let src = sources(before, geom, p);
                let expect = match src.first() {
                    Some(&(s, q)) => {
                        let v = before.unit(s).fab.at(q, c).unwrap();
                        for &(s2, q2) in &src[1..] {
                            if before.unit(s2).fab.at(q2, c).unwrap().to_bits() != v.to_bits() {
                                return Err(format!("ghost {p} has conflicting sources"));
                            }
                        }
                        v
                    }
                    None => old,
                };
                if got.to_bits() != expect.to_bits() {
                    return Err(format!(
                        "unit {u} comp {c} ghost {p}: got {got}, expected {expect} ({} sources)",
                        src.len()
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Distinct value per (point, component), never produced by a fill.
pub fn tag_value(p: IntVect, c: usize) -> f64 {
    f64::from(p.x()) + 100.0 * f64::from(p.y()) + 10_000.0 * f64::from(p.z()) + 1_000_000.0 * c as f64
}
