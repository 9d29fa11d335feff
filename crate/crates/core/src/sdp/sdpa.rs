//! SDPA sparse text (`.dat-s`).
//!
//! SDPA reads `minimize Σ c_i x_i  subject to  X = Σ F_i x_i − F_0 ⪰ 0`
//! with block-diagonal `X`. A program `A x + s = b, s ∈ K` maps to
//! `F_i = −A_{:,i}` and `F_0 = −b`, block by block:
//!
//! * one diagonal (LP) block holds, in row order, a pair of entries `s, −s`
//!   for every zero-cone row and one entry for every nonnegative row;
//! * each PSD cone of side `n` becomes a dense block of side `n`, where
//!   svec position `(r, c)` is written at `(c+1, r+1)` divided by `√2`
//!   off the diagonal.
//!
//! Lines starting with `"` or `*` are comments. Our writer puts the cone
//! sequence, variable spans and metadata in `*`-comments so a round trip is
//! lossless; files without them are read as nonnegative LP rows plus PSD
//! blocks. Numbers are printed with the shortest round-trip decimal form.
//!
//! ```text
//! "sosgap SDPA sparse export
//! *cones nonneg:1 psd:1
//! 1
//! 2
//! -1 1
//! -1
//! 0 1 1 1 -3
//! 1 1 1 1 1
//! 1 2 1 1 1
//! ```

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Write as _;

use super::program::{ConeBlock, ConicProgram, ProgramMetadata, VariableSpan};
use crate::error::{Error, Result};

#[derive(Clone, Copy)]
enum RowSlot {
    /// Diagonal position(s) in the LP block; zero rows own `pos` and `pos + 1`.
    Lp {
        pos: usize,
        zero: bool,
    },
    Psd {
        block: usize,
        i: usize,
        j: usize,
        off_diag: bool,
    },
}

struct Layout {
    slots: Vec<RowSlot>,
    lp_size: usize,
    psd_sides: Vec<usize>,
}

fn layout(cones: &[ConeBlock]) -> Layout {
    let mut slots = Vec::new();
    let mut lp_size = 0;
    let mut psd_sides = Vec::new();
    for cone in cones {
        match *cone {
            ConeBlock::Zero(k) => {
                for _ in 0..k {
                    slots.push(RowSlot::Lp { pos: lp_size, zero: true });
                    lp_size += 2;
                }
            }
            ConeBlock::Nonneg(k) => {
                for _ in 0..k {
                    slots.push(RowSlot::Lp { pos: lp_size, zero: false });
                    lp_size += 1;
                }
            }
            ConeBlock::Psd(side) => {
                let block = psd_sides.len();
                psd_sides.push(side);
                for (r, c) in super::svec::svec_pairs(side) {
                    slots.push(RowSlot::Psd { block, i: c, j: r, off_diag: r != c });
                }
            }
        }
    }
    Layout { slots, lp_size, psd_sides }
}

/// Value written for an off-diagonal PSD entry.
fn scale_down(v: f64) -> f64 {
    v * FRAC_1_SQRT_2
}

/// Inverse of [`scale_down`] chosen so that re-export reproduces `w` exactly.
fn scale_up(w: f64) -> f64 {
    super::svec::exact_inverse(w, scale_down, w / FRAC_1_SQRT_2)
}

fn cone_text(c: &ConeBlock) -> String {
    match c {
        ConeBlock::Zero(k) => format!("zero:{k}"),
        ConeBlock::Nonneg(k) => format!("nonneg:{k}"),
        ConeBlock::Psd(k) => format!("psd:{k}"),
    }
}

pub fn write_sdpa(program: &ConicProgram) -> Result<String> {
    let lay = layout(program.cones());
    let lp_block = usize::from(lay.lp_size > 0);
    let mut out = String::from("\"sosgap SDPA sparse export\n");
    let cones: Vec<String> = program.cones().iter().map(cone_text).collect();
    writeln!(out, "*cones {}", cones.join(" ")).unwrap();
    if !program.variables().is_empty() {
        let spans: Vec<String> =
            program.variables().iter().map(|v| format!("{}:{}:{}", v.name, v.offset, v.len)).collect();
        writeln!(out, "*variables {}", spans.join(" ")).unwrap();
    }
    if let Some(meta) = program.metadata() {
        writeln!(out, "*metadata {}", serde_json::to_string(meta)?).unwrap();
    }
    writeln!(out, "{}", program.n_vars()).unwrap();
    writeln!(out, "{}", lp_block + lay.psd_sides.len()).unwrap();
    let mut blocks: Vec<String> = Vec::new();
    if lp_block == 1 {
        blocks.push(format!("-{}", lay.lp_size));
    }
    blocks.extend(lay.psd_sides.iter().map(|s| s.to_string()));
    writeln!(out, "{}", blocks.join(" ")).unwrap();
    let c: Vec<String> = program.objective_dense().iter().map(|v| v.to_string()).collect();
    writeln!(out, "{}", c.join(" ")).unwrap();

    // (matrix, block, i, j, value), 1-based
    let mut entries: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
    let mut push = |mat: usize, row: usize, v: f64| match lay.slots[row] {
        RowSlot::Lp { pos, zero } => {
            entries.push((mat, 1, pos + 1, pos + 1, v));
            if zero {
                entries.push((mat, 1, pos + 2, pos + 2, -v));
            }
        }
        RowSlot::Psd { block, i, j, off_diag } => {
            let v = if off_diag { scale_down(v) } else { v };
            entries.push((mat, lp_block + block + 1, i + 1, j + 1, v));
        }
    };
    for (row, &b) in program.b().iter().enumerate() {
        if b != 0.0 {
            push(0, row, -b);
        }
    }
    for &(row, col, v) in program.triplets() {
        push(col + 1, row, -v);
    }
    entries.sort_by_key(|e| (e.0, e.1, e.2, e.3));
    for (m, b, i, j, v) in entries {
        writeln!(out, "{m} {b} {i} {j} {v}").unwrap();
    }
    Ok(out)
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse(format!("SDPA line {line}: {}", msg.into()))
}

fn parse_cones(text: &str, line: usize) -> Result<Vec<ConeBlock>> {
    text.split_whitespace()
        .map(|tok| {
            let (kind, n) = tok.split_once(':').ok_or_else(|| parse_err(line, "bad cone"))?;
            let n: usize = n.parse().map_err(|_| parse_err(line, "bad cone size"))?;
            match kind {
                "zero" => Ok(ConeBlock::Zero(n)),
                "nonneg" => Ok(ConeBlock::Nonneg(n)),
                "psd" => Ok(ConeBlock::Psd(n)),
                _ => Err(parse_err(line, format!("unknown cone {kind}"))),
            }
        })
        .collect()
}

fn parse_spans(text: &str, line: usize) -> Result<Vec<VariableSpan>> {
    text.split_whitespace()
        .map(|tok| {
            let mut it = tok.rsplitn(3, ':');
            let len = it.next().and_then(|s| s.parse().ok());
            let offset = it.next().and_then(|s| s.parse().ok());
            match (it.next(), offset, len) {
                (Some(name), Some(offset), Some(len)) => Ok(VariableSpan { name: name.into(), offset, len }),
                _ => Err(parse_err(line, "bad variable span")),
            }
        })
        .collect()
}

pub fn read_sdpa(text: &str) -> Result<ConicProgram> {
    let mut cones: Option<Vec<ConeBlock>> = None;
    let mut variables = Vec::new();
    let mut metadata: Option<ProgramMetadata> = None;
    let mut data: Vec<(usize, String)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('*') {
            if let Some(c) = rest.strip_prefix("cones ") {
                cones = Some(parse_cones(c, k + 1)?);
            } else if let Some(v) = rest.strip_prefix("variables ") {
                variables = parse_spans(v, k + 1)?;
            } else if let Some(m) = rest.strip_prefix("metadata ") {
                metadata = Some(serde_json::from_str(m)?);
            }
            continue;
        }
        if line.is_empty() || line.starts_with('"') {
            continue;
        }
        let cleaned: String = line.chars().map(|c| if ",(){}".contains(c) { ' ' } else { c }).collect();
        data.push((k + 1, cleaned));
    }
    let mut lines = data.into_iter();
    let mut next = |what: &str| lines.next().ok_or_else(|| Error::Parse(format!("SDPA: missing {what}")));
    let num = |line: usize, tok: &str| -> Result<f64> {
        tok.parse::<f64>().map_err(|_| parse_err(line, format!("bad number {tok:?}")))
    };
    let int = |line: usize, tok: &str| -> Result<i64> {
        tok.parse::<i64>().map_err(|_| parse_err(line, format!("bad integer {tok:?}")))
    };

    let (l, t) = next("variable count")?;
    let m = int(l, t.split_whitespace().next().unwrap_or(""))?;
    let (l, t) = next("block count")?;
    let nblocks = int(l, t.split_whitespace().next().unwrap_or(""))?;
    if m < 0 || nblocks < 0 {
        return Err(parse_err(l, "negative count"));
    }
    let (m, nblocks) = (m as usize, nblocks as usize);
    let (l, t) = next("block structure")?;
    let sizes: Vec<i64> = t.split_whitespace().map(|tok| int(l, tok)).collect::<Result<_>>()?;
    if sizes.len() < nblocks || sizes.iter().take(nblocks).any(|&s| s == 0) {
        return Err(parse_err(l, "block structure does not match the block count"));
    }
    let sizes = &sizes[..nblocks];
    let (l, t) = next("objective")?;
    let mut c: Vec<f64> = Vec::with_capacity(m);
    for tok in t.split_whitespace() {
        c.push(num(l, tok)?);
    }
    // the objective may wrap over several lines
    while c.len() < m {
        let (l, t) = next("objective")?;
        for tok in t.split_whitespace() {
            c.push(num(l, tok)?);
        }
    }
    if c.len() != m {
        return Err(parse_err(l, "objective length differs from the variable count"));
    }

    let lp_blocks: Vec<usize> = (0..nblocks).filter(|&b| sizes[b] < 0).collect();
    if lp_blocks.len() > 1 {
        return Err(Error::Parse("SDPA: at most one diagonal block is supported".into()));
    }
    let lp_size = lp_blocks.first().map_or(0, |&b| (-sizes[b]) as usize);
    let psd_sides: Vec<usize> = sizes.iter().filter(|&&s| s > 0).map(|&s| s as usize).collect();
    let cones = match cones {
        Some(c) => c,
        None => {
            let mut c = Vec::new();
            if lp_size > 0 {
                c.push(ConeBlock::Nonneg(lp_size));
            }
            c.extend(psd_sides.iter().map(|&s| ConeBlock::Psd(s)));
            c
        }
    };
    let lay = layout(&cones);
    if lay.lp_size != lp_size || lay.psd_sides != psd_sides {
        return Err(Error::Parse("SDPA: cone comment disagrees with the block structure".into()));
    }
    if lp_blocks.first().is_some_and(|&b| b != 0) {
        return Err(Error::Parse("SDPA: the diagonal block must come first".into()));
    }
    let lp_offset = usize::from(lp_size > 0);

    // reverse index from (block, i, j) to (row, sign)
    let mut lp_pos: Vec<Option<(usize, f64)>> = vec![None; lp_size];
    let mut psd_pos: Vec<Vec<usize>> = psd_sides.iter().map(|&s| vec![usize::MAX; s * s]).collect();
    for (row, slot) in lay.slots.iter().enumerate() {
        match *slot {
            RowSlot::Lp { pos, zero } => {
                lp_pos[pos] = Some((row, 1.0));
                if zero {
                    lp_pos[pos + 1] = Some((row, -1.0));
                }
            }
            RowSlot::Psd { block, i, j, .. } => psd_pos[block][i * psd_sides[block] + j] = row,
        }
    }

    let n_rows = lay.slots.len();
    let mut b = vec![0.0; n_rows];
    let mut a: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
    // mirror entries of zero rows, checked after reading
    let mut mirror: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
    for (l, t) in lines {
        let toks: Vec<&str> = t.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(parse_err(l, "expected `matrix block i j value`"));
        }
        let mat = int(l, toks[0])?;
        let blk = int(l, toks[1])?;
        let (mut i, mut j) = (int(l, toks[2])?, int(l, toks[3])?);
        let v = num(l, toks[4])?;
        if mat < 0 || mat as usize > m || blk < 1 || blk as usize > nblocks || i < 1 || j < 1 {
            return Err(parse_err(l, "entry index out of range"));
        }
        if i > j {
            std::mem::swap(&mut i, &mut j);
        }
        let (blk, i, j) = (blk as usize - 1, i as usize - 1, j as usize - 1);
        let (row, value, is_mirror) = if sizes[blk] < 0 {
            if i != j || i >= lp_size {
                return Err(parse_err(l, "diagonal block entry off the diagonal"));
            }
            let (row, sign) = lp_pos[i].ok_or_else(|| parse_err(l, "unmapped diagonal entry"))?;
            (row, -sign * v, sign < 0.0)
        } else {
            let pb = blk - lp_offset;
            let side = psd_sides[pb];
            if j >= side {
                return Err(parse_err(l, "entry index out of range"));
            }
            let row = psd_pos[pb][i * side + j];
            let value = if i == j { -v } else { -scale_up(v) };
            (row, value, false)
        };
        let key = if mat == 0 { (row, usize::MAX) } else { (row, mat as usize - 1) };
        let target = if is_mirror { &mut mirror } else { &mut a };
        if target.insert(key, value).is_some() {
            return Err(parse_err(l, "repeated entry"));
        }
        if mat == 0 && !is_mirror {
            b[row] = value;
        }
    }
    for (key, v) in &mirror {
        if a.get(key) != Some(v) {
            return Err(Error::Parse("SDPA: zero-cone rows must come in negated pairs".into()));
        }
    }
    if mirror.len() != a.keys().filter(|(r, _)| matches!(lay.slots[*r], RowSlot::Lp { zero: true, .. })).count() {
        return Err(Error::Parse("SDPA: zero-cone rows must come in negated pairs".into()));
    }
    let triplets: Vec<(usize, usize, f64)> =
        a.into_iter().filter(|((_, c), _)| *c != usize::MAX).map(|((r, c), v)| (r, c, v)).collect();
    let objective: Vec<(usize, f64)> = c.into_iter().enumerate().filter(|(_, v)| *v != 0.0).collect();
    ConicProgram::new(m, objective, triplets, b, cones, variables, metadata)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{elementary_generators, Ring};
    use crate::sdp::{build_constrained, build_instance, build_unconstrained};

    fn tiny() -> ConicProgram {
        // minimize −λ subject to λ ≤ 3 written as a 1x1 PSD block
        ConicProgram::new(1, vec![(0, -1.0)], vec![(0, 0, 1.0)], vec![3.0], vec![ConeBlock::Psd(1)], vec![], None)
            .unwrap()
    }

    #[test]
    fn tiny_program_text() {
        let text = write_sdpa(&tiny()).unwrap();
        let expected = "\"sosgap SDPA sparse export\n*cones psd:1\n1\n1\n1\n-1\n0 1 1 1 -3\n1 1 1 1 -1\n";
        assert_eq!(text, expected);
        assert_eq!(read_sdpa(&text).unwrap(), tiny());
    }

    #[test]
    fn sos_programs_round_trip() {
        let inst = build_instance(&elementary_generators(2, Ring::IntegersModP(3)).unwrap(), 2).unwrap();
        for p in [build_unconstrained(&inst), build_constrained(&inst, 1.1, 0.01).unwrap()] {
            let text = write_sdpa(&p).unwrap();
            let back = read_sdpa(&text).unwrap();
            assert_eq!(write_sdpa(&back).unwrap(), text);
            assert_eq!(back.cones(), p.cones());
            assert_eq!(back.b(), p.b());
            assert_eq!(back.triplets().len(), p.triplets().len());
            for (x, y) in back.triplets().iter().zip(p.triplets()) {
                assert_eq!((x.0, x.1), (y.0, y.1));
                assert!((x.2 - y.2).abs() <= 1e-15 * y.2.abs());
            }
        }
    }

    #[test]
    fn foreign_file_without_comments() {
        let text = "2\n2\n{-1, 2}\n1.0 0.0\n0 2 1 2 0.5\n1 1 1 1 1\n2 2 1 1 1\n2 2 2 2 1\n";
        let p = read_sdpa(text).unwrap();
        assert_eq!(p.cones(), &[ConeBlock::Nonneg(1), ConeBlock::Psd(2)]);
        assert_eq!(p.n_rows(), 4);
        // F_0 off-diagonal 0.5 means b = −svec(F_0) = −√2/2 at position (1, 0)
        assert!((p.b()[2] + 0.5 * std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn malformed_rejected() {
        assert!(read_sdpa("1\n1\n1\n").is_err());
        assert!(read_sdpa("1\n1\n1\n1\n1 1 2 2 1\n").is_err());
        assert!(read_sdpa("*cones zero:1\n1\n1\n-2\n1\n1 1 1 1 1\n").is_err());
    }
}
