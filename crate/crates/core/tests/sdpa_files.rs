use std::path::{Path, PathBuf};

use cxsdp::cpop::gen_sphere_instance;
use cxsdp::program::{FormBuilder, RealConicProgram, Row, Sense, Var};
use cxsdp::reformulate::Form;
use cxsdp::relaxation::{assemble_hsos, size_report};
use cxsdp::sdpa::{export_sdpa, import_sdpa, parse_sdpa, to_sdpa_string};
use cxsdp::Error;
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// `max X[1,1]  s.t.  X[1,1] = 1` over a 1x1 block.
fn one_by_one() -> RealConicProgram {
    let mut obj = FormBuilder::new();
    obj.add(Var::psd(0, 0, 0), 1.0);
    let mut row = FormBuilder::new();
    row.add(Var::psd(0, 0, 0), 1.0);
    RealConicProgram {
        psd_blocks: vec![1],
        n_free: 0,
        rows: vec![Row { form: row.build(), rhs: 1.0 }],
        objective: obj.build(),
        sense: Sense::Maximize,
    }
}

#[test]
fn golden_fixture_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one.dat-s");
    export_sdpa(&one_by_one(), &out).unwrap();
    let written = std::fs::read(&out).unwrap();
    let golden = std::fs::read(fixture("one_by_one.dat-s")).unwrap();
    assert_eq!(String::from_utf8(written).unwrap(), String::from_utf8(golden).unwrap());
}

#[test]
fn golden_fixture_imports_to_the_program() {
    assert_eq!(import_sdpa(fixture("one_by_one.dat-s")).unwrap(), one_by_one());
}

#[test]
fn relaxation_exports_round_trip() {
    let p = gen_sphere_instance(2, 3).unwrap();
    let sizes = size_report(&p, 2).unwrap();
    for form in [Form::Dualview, Form::Naive] {
        let prog = assemble_hsos(&p, 2, form).unwrap().into_program();
        let text = to_sdpa_string(&prog).unwrap();
        let m: usize = text.lines().find(|l| !l.starts_with('*')).unwrap().trim().parse().unwrap();
        let expected = if form == Form::Dualview { sizes.m_dualview } else { sizes.m_naive };
        assert_eq!(m, expected);
        assert_eq!(parse_sdpa(&text, Path::new("mem")).unwrap(), prog);
    }
    assert_eq!(sizes.m_dualview, 36);
}

#[test]
fn lower_triangle_entry_reports_its_line() {
    let text = "* header\n1\n1\n3\n2\n0 1 1 1 1\n1 1 3 2 0.5\n";
    match parse_sdpa(text, Path::new("bad.dat-s")) {
        Err(Error::Parse { line, path, .. }) => {
            assert_eq!(line, 7);
            assert_eq!(path, Path::new("bad.dat-s"));
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn malformed_files() {
    for text in [
        "1\n1\n2\n",                   // missing right-hand side
        "1\n1\n2\n1\n0 1 1 1\n",       // four fields
        "1\n1\n2\n1\n2 1 1 1 1\n",     // row index past m
        "1\n1\n2\n1\n0 2 1 1 1\n",     // block index past count
        "1\n1\n2\n1\n0 1 1 3 1\n",     // outside the block
        "1\n1\n0\n1\n",                // empty block
        "1\n1\n2\n1\n0 1 1 1 nan\n",   // non-finite value
        "x\n1\n2\n1\n",                // bad count
    ] {
        assert!(parse_sdpa(text, Path::new("t")).is_err(), "accepted {text:?}");
    }
}

#[test]
fn no_rows_is_a_feasibility_program() {
    let p = parse_sdpa("0\n1\n2\n\n0 1 1 1 1\n", Path::new("t")).unwrap();
    assert_eq!(p.n_rows(), 0);
    assert_eq!(p.psd_blocks, vec![2]);
}

fn coefficient() -> impl Strategy<Value = f64> {
    prop_oneof![
        (-1e3..1e3f64),
        any::<f64>().prop_filter("finite nonzero", |v| v.is_finite() && *v != 0.0),
        Just(0.1),
        Just(-1e-300),
    ]
}

prop_compose! {
    fn program()(
        blocks in prop::collection::vec(1usize..5, 0..3),
        n_free in 0usize..3,
        minimize in any::<bool>(),
    )(
        rows in prop::collection::vec(
            (prop::collection::vec((0usize..64, coefficient()), 0..6), coefficient()),
            0..5,
        ),
        obj in prop::collection::vec((0usize..64, coefficient()), 0..6),
        blocks in Just(blocks),
        n_free in Just(n_free),
        minimize in Just(minimize),
    ) -> RealConicProgram {
        // variable k of the flattened coordinate list
        let mut vars = Vec::new();
        for (b, &n) in blocks.iter().enumerate() {
            for j in 0..n {
                for i in 0..=j {
                    vars.push(Var::psd(b, i, j));
                }
            }
        }
        vars.extend((0..n_free).map(Var::Free));
        if vars.is_empty() {
            vars.push(Var::Free(0));
        }
        let n_free = if blocks.is_empty() { n_free.max(1) } else { n_free };
        let form = |terms: &[(usize, f64)]| {
            let mut f = FormBuilder::new();
            for &(k, c) in terms {
                f.add(vars[k % vars.len()], c);
            }
            f.build()
        };
        RealConicProgram {
            psd_blocks: blocks,
            n_free,
            rows: rows.iter().map(|(t, rhs)| Row { form: form(t), rhs: *rhs }).collect(),
            objective: form(&obj),
            sense: if minimize { Sense::Minimize } else { Sense::Maximize },
        }
    }
}

proptest! {
    #[test]
    fn export_import_is_coefficient_exact(prog in program()) {
        prop_assume!(prog.validate().is_ok());
        let text = to_sdpa_string(&prog).unwrap();
        prop_assert_eq!(parse_sdpa(&text, Path::new("mem")).unwrap(), prog);
    }
}
