//! SDPA sparse (`.dat-s`) export and import.
//!
//! The matrix variable is the SDPA dual variable: the file describes
//! `max <F0, X>` subject to `<Fk, X> = ck`, `X` psd. A minimize program is
//! written with `F0` negated. A free scalar `x` is written as its own diagonal
//! block of size 2 holding `(u, v)` with `x = u - v`. Both facts are recorded
//! in `*` comment lines that [`import_sdpa`] reads back.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::program::{FormBuilder, LinearForm, RealConicProgram, Row, Sense, Var};

const SENSE_TAG: &str = "* sense:";
const FREE_TAG: &str = "* free scalars:";

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".to_string()
    } else if (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// SDPA text of `prog`.
pub fn to_sdpa_string(prog: &RealConicProgram) -> Result<String> {
    prog.validate()?;
    let n_psd = prog.psd_blocks.len();
    let free_block = |k: usize| n_psd + k + 1;
    let negate = prog.sense == Sense::Minimize;

    let mut out = String::new();
    out.push_str("* cxsdp SDPA sparse export\n");
    out.push_str("* convention: maximize <F0, X> subject to <Fk, X> = ck, X psd\n");
    if negate {
        let _ = writeln!(out, "{SENSE_TAG} minimize (objective negated)");
    } else {
        let _ = writeln!(out, "{SENSE_TAG} maximize");
    }
    if prog.n_free == 0 {
        let _ = writeln!(out, "{FREE_TAG} 0");
    } else {
        let _ = writeln!(
            out,
            "{FREE_TAG} {} (diagonal blocks {}..{} hold (u, v) with x = u - v)",
            prog.n_free,
            n_psd + 1,
            n_psd + prog.n_free
        );
    }
    let _ = writeln!(out, "{}", prog.n_rows());
    let _ = writeln!(out, "{}", n_psd + prog.n_free);
    let sizes: Vec<String> = prog
        .psd_blocks
        .iter()
        .map(|n| n.to_string())
        .chain(std::iter::repeat_n("-2".to_string(), prog.n_free))
        .collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let rhs: Vec<String> = prog.rows.iter().map(|r| format_number(r.rhs)).collect();
    let _ = writeln!(out, "{}", rhs.join(" "));

    let mut emit = |k: usize, form: &LinearForm, scale: f64| {
        for &(var, c) in form.terms() {
            let c = scale * c;
            match var {
                Var::Psd { block, i, j } => {
                    let _ = writeln!(out, "{k} {} {} {} {}", block + 1, i + 1, j + 1, format_number(c));
                }
                Var::Free(f) => {
                    let b = free_block(f);
                    let _ = writeln!(out, "{k} {b} 1 1 {}", format_number(c));
                    let _ = writeln!(out, "{k} {b} 2 2 {}", format_number(-c));
                }
            }
        }
    };
    emit(0, &prog.objective, if negate { -1.0 } else { 1.0 });
    for (r, row) in prog.rows.iter().enumerate() {
        emit(r + 1, &row.form, 1.0);
    }
    Ok(out)
}

/// Writes `prog` to `path` in SDPA sparse format.
pub fn export_sdpa(prog: &RealConicProgram, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = to_sdpa_string(prog)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads an SDPA sparse file.
pub fn import_sdpa(path: impl AsRef<Path>) -> Result<RealConicProgram> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sdpa(&text, path)
}

/// Parses SDPA sparse text; `origin` only labels error messages.
///
/// Diagonal (negative-size) blocks become PSD blocks with diagonal data only,
/// except the trailing blocks declared by the free-scalar comment, which are
/// decoded back into free scalars.
pub fn parse_sdpa(text: &str, origin: &Path) -> Result<RealConicProgram> {
    let err = |line: usize, msg: String| Error::Parse { path: origin.to_path_buf(), line, msg };

    let mut sense = Sense::Maximize;
    let mut n_free_decl = 0usize;
    // header values as (line, token)
    let mut header: Vec<(usize, String)> = Vec::new();
    let mut body_start = None;
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let mut needed: Option<usize> = None;
    for (ln, line) in lines.by_ref() {
        let trimmed = line.trim();
        if trimmed.starts_with('*') || trimmed.starts_with('"') {
            if let Some(rest) = trimmed.strip_prefix(SENSE_TAG) {
                if rest.trim_start().starts_with("minimize") {
                    sense = Sense::Minimize;
                }
            } else if let Some(rest) = trimmed.strip_prefix(FREE_TAG) {
                let tok = rest.split_whitespace().next().unwrap_or("");
                n_free_decl =
                    tok.parse().map_err(|_| err(ln, format!("bad free scalar count `{tok}`")))?;
            }
            continue;
        }
        if trimmed.is_empty() && header.len() < 2 {
            continue;
        }
        let toks = trimmed
            .split(|c: char| c.is_whitespace() || "{}(),".contains(c))
            .filter(|t| !t.is_empty());
        if header.len() < 2 {
            // the row and block counts may be followed by a comment
            if let Some(tok) = toks.into_iter().next() {
                header.push((ln, tok.to_string()));
            }
        } else {
            header.extend(toks.map(|t| (ln, t.to_string())));
        }
        if header.len() >= 2 && needed.is_none() {
            let nb: usize = header[1]
                .1
                .parse()
                .map_err(|_| err(header[1].0, format!("bad block count `{}`", header[1].1)))?;
            let m: usize = header[0]
                .1
                .parse()
                .map_err(|_| err(header[0].0, format!("bad row count `{}`", header[0].1)))?;
            needed = Some(2 + nb + m);
        }
        if let Some(n) = needed {
            if header.len() >= n {
                if header.len() > n {
                    return Err(err(ln, "unexpected tokens after the right-hand side".into()));
                }
                body_start = Some(ln);
                break;
            }
        }
    }
    let Some(header_end) = body_start else {
        return Err(err(text.lines().count(), "truncated header".into()));
    };
    let m: usize = header[0].1.parse().expect("checked above");
    let nb: usize = header[1].1.parse().expect("checked above");
    let mut sizes: Vec<i64> = Vec::with_capacity(nb);
    for (ln, tok) in &header[2..2 + nb] {
        let v: i64 = tok.parse().map_err(|_| err(*ln, format!("bad block size `{tok}`")))?;
        if v == 0 {
            return Err(err(*ln, "block of size 0".into()));
        }
        sizes.push(v);
    }
    let mut rhs = Vec::with_capacity(m);
    for (ln, tok) in &header[2 + nb..] {
        rhs.push(parse_f64(tok).ok_or_else(|| err(*ln, format!("bad number `{tok}`")))?);
    }

    if n_free_decl > nb {
        return Err(err(header_end, format!("{n_free_decl} free scalars but only {nb} blocks")));
    }
    let n_psd = nb - n_free_decl;
    for (b, &sz) in sizes.iter().enumerate().skip(n_psd) {
        if sz != -2 {
            return Err(err(header_end, format!("block {} encodes a free scalar but has size {sz}", b + 1)));
        }
    }

    // first line, u and v coefficients of each free scalar per constraint index
    let mut forms: Vec<FormBuilder> = (0..=m).map(|_| FormBuilder::new()).collect();
    let mut free_parts: Vec<std::collections::BTreeMap<usize, (usize, f64, f64)>> =
        vec![Default::default(); m + 1];
    for (ln, line) in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('*') || trimmed.starts_with('"') {
            continue;
        }
        let toks: Vec<&str> = trimmed
            .split(|c: char| c.is_whitespace() || "{}(),".contains(c))
            .filter(|t| !t.is_empty())
            .collect();
        if toks.len() != 5 {
            return Err(err(ln, format!("expected 5 fields, found {}", toks.len())));
        }
        let int = |t: &str, what: &str| -> Result<usize> {
            t.parse::<usize>().map_err(|_| err(ln, format!("bad {what} `{t}`")))
        };
        let k = int(toks[0], "constraint index")?;
        let blk = int(toks[1], "block index")?;
        let i = int(toks[2], "row index")?;
        let j = int(toks[3], "column index")?;
        let v = parse_f64(toks[4]).ok_or_else(|| err(ln, format!("bad number `{}`", toks[4])))?;
        if k > m {
            return Err(err(ln, format!("constraint index {k} exceeds {m}")));
        }
        if blk == 0 || blk > nb {
            return Err(err(ln, format!("block index {blk} outside 1..={nb}")));
        }
        let sz = sizes[blk - 1];
        let n = sz.unsigned_abs() as usize;
        if i == 0 || j == 0 || i > n || j > n {
            return Err(err(ln, format!("entry ({i},{j}) outside block {blk} of size {n}")));
        }
        if i > j {
            return Err(err(ln, format!("entry ({i},{j}) is below the diagonal; upper triangle required")));
        }
        if sz < 0 && i != j {
            return Err(err(ln, format!("off-diagonal entry ({i},{j}) in diagonal block {blk}")));
        }
        if blk > n_psd {
            let acc = free_parts[k].entry(blk - n_psd - 1).or_insert((ln, 0.0, 0.0));
            if i == 1 {
                acc.1 += v;
            } else {
                acc.2 += v;
            }
        } else {
            forms[k].add(Var::Psd { block: blk - 1, i: i - 1, j: j - 1 }, v);
        }
    }
    for (k, parts) in free_parts.into_iter().enumerate() {
        for (f, (ln, u, v)) in parts {
            if u != -v {
                return Err(err(
                    ln,
                    format!("free scalar {} has unequal split coefficients {u} and {v}", f + 1),
                ));
            }
            forms[k].add(Var::Free(f), u);
        }
    }

    let mut forms = forms.into_iter().map(FormBuilder::build);
    let mut objective = forms.next().expect("objective form");
    if sense == Sense::Minimize {
        let mut b = FormBuilder::new();
        for &(var, c) in objective.terms() {
            b.add(var, -c);
        }
        objective = b.build();
    }
    let rows = forms.zip(rhs).map(|(form, rhs)| Row { form, rhs }).collect();
    let prog = RealConicProgram {
        psd_blocks: sizes[..n_psd].iter().map(|s| s.unsigned_abs() as usize).collect(),
        n_free: n_free_decl,
        rows,
        objective,
        sense,
    };
    prog.validate().map_err(|e| err(header_end, e.to_string()))?;
    Ok(prog)
}

fn parse_f64(tok: &str) -> Option<f64> {
    tok.parse::<f64>().ok().filter(|v| v.is_finite())
}
