//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so the lines are printed as they complete.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use fivebrane::abelian::AbelianGroup;
use fivebrane::bundle_model::{divide_class, BaseSpace, Bundle, CohClass, Field};
use fivebrane::char_calc::{
    ch_from_chern, chern_ring, pontrjagin_from_spin, spin_classes, splitting_oracle, Validity,
};
use fivebrane::cover_cohomology::serre_page_check;
use fivebrane::cs_forms::{
    chern_character_form, cs_transgression, curvature, gauge_transform, power, pure_gauge,
    verify_transgression,
};
use fivebrane::graded_ring::GradedRing;
use fivebrane::obstruction::{
    anomaly_polynomial, anomaly_ring, structure_ladder, AnomalyModel, FivebraneNorm, LadderMode,
    LadderOptions, Level, Verdict,
};
use fivebrane::par::Execution;
use fivebrane::rational::{factorial, int, q};
use fivebrane::sample::{
    formal_root_ring, random_connection, random_gauge, random_ladder_input, random_roots,
    ConnectionSpec,
};
use fivebrane::{BigInt, BigRational};
use fivebrane_cli::document::{self, SectionKind, Value};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const FUZZ_BUDGET: Duration = Duration::from_secs(60);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn run_cli(args: &[&str]) -> Result<(i32, String), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fivebrane"))
        .args(args)
        .output()
        .map_err(|e| format!("could not start the binary: {e}"))?;
    let stdout = String::from_utf8(out.stdout).map_err(|_| "stdout is not UTF-8".to_string())?;
    Ok((out.status.code().unwrap_or(-1), stdout))
}

/// Entries of the single `[result]` block in a command's machine output.
fn result_block(text: &str) -> Result<BTreeMap<String, String>, String> {
    let doc = document::parse(text).map_err(|d| format!("machine output does not parse: {d}"))?;
    let sec = doc
        .sections
        .iter()
        .find(|s| s.kind == SectionKind::Result)
        .ok_or("no [result] block")?;
    let again = document::parse(&doc.render()).map_err(|d| d.to_string())?;
    ensure(again == doc, "machine block does not round-trip")?;
    Ok(sec
        .entries
        .iter()
        .map(|e| match &e.value {
            Value::Text(t) => (e.key.clone(), t.clone()),
            other => (e.key.clone(), other.render()),
        })
        .collect())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (code, out) = run_cli(&["ch-expand", "--k=4", "--format=kv"])?;
    let elapsed = start.elapsed();
    ensure(code == 0, format!("exit code {code}"))?;
    let block = result_block(&out)?;
    let text = block.get("ch4").ok_or("no ch4 in output")?;
    let ring = chern_ring(4, 8).map_err(|e| e.to_string())?;
    let got = ring.parse(text).map_err(|e| e.to_string())?;
    let expected = ring
        .parse("(c1^4 - 4*c1^2*c2 + 4*c1*c3 + 2*c2^2 - 4*c4)/24")
        .map_err(|e| e.to_string())?;
    let mut exps: Vec<Vec<u32>> = got.terms().map(|(e, _)| e.to_vec()).collect();
    exps.extend(expected.terms().map(|(e, _)| e.to_vec()));
    for e in &exps {
        ensure(
            got.coefficient(e) == expected.coefficient(e),
            format!("coefficient of {e:?} differs"),
        )?;
    }
    ensure(
        elapsed < Duration::from_secs(1),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "{} monomials match; output `{text}`",
        expected.num_terms()
    ))
}

fn criterion_2() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let start = Instant::now();
    let mut checks = 0;
    for _ in 0..200 {
        let gens = rng.random_range(1..=4);
        let len = rng.random_range(0..=6);
        let ring = formal_root_ring(gens, 8);
        let roots = random_roots(&mut rng, &ring, len);
        for k in 0..=8 {
            let (chern, ch) = splitting_oracle(&roots, k).map_err(|e| e.to_string())?;
            let newton = ch_from_chern(&chern, k).map_err(|e| e.to_string())?;
            ensure(
                newton == ch,
                format!("k = {k}: Newton engine disagrees with the oracle"),
            )?;
            // Power sum written out here as a second, local oracle.
            let mut direct = ring.zero();
            for r in &roots {
                direct = direct.add(&r.pow(k)).map_err(|e| e.to_string())?;
            }
            let direct = direct.scale(&BigRational::new(BigInt::from(1), factorial(k)));
            let direct = if k == 0 {
                ring.constant(int(len as i64))
            } else {
                direct
            };
            ensure(
                ch.render() == direct.render(),
                format!("k = {k}: oracle differs from the direct power sum"),
            )?;
            checks += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(
        elapsed < Duration::from_secs(10),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "{checks} (root list, k) pairs agree in {elapsed:.2?}"
    ))
}

fn criterion_3() -> Outcome {
    let mut x = BaseSpace::new("X", 8);
    x.declare(
        8,
        AbelianGroup::new(1, vec![2, 3]).unwrap(),
        vec!["u".into(), "t2".into(), "t3".into()],
    )
    .map_err(|e| e.to_string())?;
    let zero = x.zero(8);
    let u = x.generator_class("u").map_err(|e| e.to_string())?;
    let sols = divide_class(&zero, 6);
    ensure(
        sols.len() == 6,
        format!("divide_class(0, 6) gave {} solutions", sols.len()),
    )?;
    ensure(
        divide_class(&u, 6).is_empty(),
        "divide_class(u, 6) is not empty",
    )?;
    // Brute force over a window of ℤ ⊕ ℤ/2 ⊕ ℤ/3.
    let g = x.group(8);
    let mut brute = 0;
    for a in -12i64..=12 {
        for b in 0..2i64 {
            for c in 0..3i64 {
                let y =
                    CohClass::new(Arc::clone(&g), vec![int(a)], vec![b.into(), c.into()]).unwrap();
                let six_y = y.scale(&BigInt::from(6));
                ensure(six_y != u, "brute force found a sixth of u")?;
                if six_y.is_zero() {
                    brute += 1;
                    ensure(sols.contains(&y), format!("missing solution {y}"))?;
                }
            }
        }
    }
    ensure(brute == 6, format!("brute force found {brute} solutions"))?;
    Ok("6 solutions for 0, none for u; brute force agrees".into())
}

fn criterion_4() -> Outcome {
    let ring = anomaly_ring();
    let het = anomaly_polynomial(AnomalyModel::HeteroticDual)
        .vanish(&["p1", "ch2"])
        .map_err(|e| e.to_string())?;
    let expected = ring.parse("ch4 - p2/48").map_err(|e| e.to_string())?;
    ensure(
        het.value == expected,
        format!("heterotic reduces to {}", het.value),
    )?;
    ensure(
        het.value == anomaly_polynomial(AnomalyModel::Reduced).value,
        "reduced model differs from the substituted heterotic one",
    )?;
    let iia = anomaly_polynomial(AnomalyModel::TypeIiaDual)
        .vanish(&["p1"])
        .map_err(|e| e.to_string())?;
    let expected_iia = ring.parse("p2/48").map_err(|e| e.to_string())?;
    ensure(
        iia.value == expected_iia,
        format!("IIA reduces to {}", iia.value),
    )?;
    Ok(format!("{} and {}", het.value, iia.value))
}

fn criterion_5() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    let mut reports = 0;
    let mut seen = BTreeMap::new();
    for i in 0..1000 {
        let (_, tx, e) = random_ladder_input(&mut rng);
        for mode in [LadderMode::Manifold, LadderMode::Pair] {
            for norm in [FivebraneNorm::Six, FivebraneNorm::FortyEight] {
                let options = LadderOptions {
                    mode,
                    normalization: Some(norm),
                };
                let report = structure_ladder(&tx, e.as_ref(), options)
                    .map_err(|err| format!("input {i}: {err}"))?;
                let v = |l: Level| report.verdict(l);
                let chain = [
                    Level::Oriented,
                    Level::Spin,
                    Level::String,
                    Level::Fivebrane,
                ];
                for w in chain.windows(2) {
                    ensure(
                        v(w[1]) != Verdict::Admits || v(w[0]) == Verdict::Admits,
                        format!("input {i}: {} admits but {} does not", w[1], w[0]),
                    )?;
                }
                *seen.entry(v(Level::Fivebrane)).or_insert(0) += 1;
                reports += 1;
            }
        }
    }
    Ok(format!(
        "{reports} reports monotone; fivebrane verdicts {seen:?}"
    ))
}

/// Coefficients of ∏ 1/(1 − t^d) up to `n`.
fn generating_function(degrees: &[u32], n: usize) -> Vec<u64> {
    let mut series = vec![0u64; n + 1];
    series[0] = 1;
    for &d in degrees {
        let d = d as usize;
        for i in d..=n {
            series[i] += series[i - d];
        }
    }
    series
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let (code, out) = run_cli(&[
        "covers",
        "--series=bu",
        "--stage=6",
        "--maxdeg=12",
        "--format=kv",
    ])?;
    ensure(code == 0, format!("bu exit code {code}"))?;
    let bu = result_block(&out)?;
    let gens = bu.get("generators").ok_or("no generators")?;
    ensure(
        gens.starts_with("c3,"),
        format!("BU<6> generators `{gens}`"),
    )?;
    let (code, out) = run_cli(&[
        "covers",
        "--series=bso",
        "--stage=string",
        "--maxdeg=16",
        "--format=kv",
    ])?;
    ensure(code == 0, format!("bso exit code {code}"))?;
    let bso = result_block(&out)?;
    let ring = bso.get("ring").ok_or("no ring")?;
    ensure(
        ring == "P[p2, p3, p4, ...]",
        format!("BString ring `{ring}`"),
    )?;
    let oracle = generating_function(&[8, 12, 16], 16);
    for (d, &expected) in oracle.iter().enumerate() {
        let got: u64 = bso
            .get(&format!("betti.{d}"))
            .ok_or(format!("no betti.{d}"))?
            .parse()
            .map_err(|_| "bad Betti number")?;
        ensure(
            got == expected,
            format!("b{d} = {got}, generating function gives {expected}"),
        )?;
    }
    ensure(
        oracle[8] == 1 && oracle[12] == 1 && oracle[16] == 2,
        "oracle disagrees with b8=1, b12=1, b16=2",
    )?;
    let elapsed = start.elapsed();
    ensure(
        elapsed < Duration::from_secs(1),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "BU<6> = P[{gens}, ...]; BString {ring} with b8=1 b12=1 b16=2 in {elapsed:.2?}"
    ))
}

fn criterion_7() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let mut summary = Vec::new();
    for (j, dim, limit) in [
        (1u32, 4u8, Duration::from_secs(5)),
        (2, 5, Duration::from_secs(5)),
        (3, 6, Duration::from_secs(5)),
        (4, 8, Duration::from_secs(300)),
    ] {
        let start = Instant::now();
        let mut nontrivial = 0;
        for n in 0..20 {
            let spec = ConnectionSpec {
                dim,
                size: 1 + n % 3,
                max_degree: 2,
                density: 0.5,
                max_terms: 2,
            };
            let a = random_connection(&mut rng, spec);
            let check =
                verify_transgression(&a, j, Execution::default()).map_err(|e| e.to_string())?;
            ensure(
                check.exact,
                format!("j = {j}, connection {n}: dT != Tr(F^j)"),
            )?;
            if !check.character.trace_power.is_zero() {
                nontrivial += 1;
            }
        }
        let elapsed = start.elapsed();
        ensure(
            elapsed < limit,
            format!("j = {j} took {elapsed:?}, budget {limit:?}"),
        )?;
        summary.push(format!(
            "j={j}: 20 exact ({nontrivial} nonzero) in {elapsed:.2?}"
        ));
    }
    Ok(summary.join("; "))
}

fn criterion_8() -> Outcome {
    let mut rng = StdRng::seed_from_u64(8);
    for n in 0..10 {
        let size = 2 + n % 2;
        let (g, g_inv) = random_gauge(&mut rng, 4, size, 3, 2);
        let a = pure_gauge(&g, &g_inv).map_err(|e| e.to_string())?;
        let f = curvature(&a).map_err(|e| e.to_string())?;
        ensure(f.is_zero(), format!("sample {n}: F != 0"))?;
        let t3 = cs_transgression(&a, 2)
            .map_err(|e| e.to_string())?
            .unnormalized_form;
        let a3 = a
            .wedge(&a)
            .and_then(|x| x.wedge(&a))
            .map_err(|e| e.to_string())?
            .trace();
        ensure(
            t3 == a3.scale(&q(-1, 3)),
            format!("sample {n}: T3 != -1/3 Tr(A^3)"),
        )?;
    }
    Ok("10 polynomial gauges: F = 0 and T3 = -1/3 Tr(A^3)".into())
}

fn criterion_9() -> Outcome {
    let mut rng = StdRng::seed_from_u64(9);
    let mut checked = 0;
    for (j, dim, samples) in [(1u32, 4u8, 6), (2, 4, 6), (3, 6, 4), (4, 8, 3)] {
        for n in 0..samples {
            let size = 1 + n % 3;
            let mut spec = ConnectionSpec::new(dim, size);
            spec.max_degree = 1;
            spec.density = 0.4;
            spec.max_terms = 1;
            let a = random_connection(&mut rng, spec);
            let (g, g_inv) = random_gauge(&mut rng, dim, size, 2, 1);
            let ag = gauge_transform(&a, &g, &g_inv).map_err(|e| e.to_string())?;
            let f = curvature(&a).map_err(|e| e.to_string())?;
            let fg = curvature(&ag).map_err(|e| e.to_string())?;
            let lhs = chern_character_form(&fg, j)
                .map_err(|e| e.to_string())?
                .trace_power;
            let rhs = chern_character_form(&f, j)
                .map_err(|e| e.to_string())?
                .trace_power;
            ensure(
                lhs == rhs,
                format!("j = {j}, sample {n}: Tr((F^g)^j) != Tr(F^j)"),
            )?;
            // The untraced power transforms by conjugation.
            let pg = power(&fg, j, Execution::default()).map_err(|e| e.to_string())?;
            let p = power(&f, j, Execution::default()).map_err(|e| e.to_string())?;
            ensure(
                pg == p.conjugate_by(&g_inv, &g),
                format!("j = {j}, sample {n}: F^j not conjugated"),
            )?;
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} (connection, gauge) pairs invariant for j <= 4"
    ))
}

fn criterion_10() -> Outcome {
    let ring = GradedRing::new([("p1", 4), ("p2", 8), ("Q1", 4), ("Q2", 8)], 16)
        .map_err(|e| e.to_string())?;
    let g = |n: &str| ring.generator(n).unwrap();
    let (q1, q2) = spin_classes(&g("p1"), &g("p2")).map_err(|e| e.to_string())?;
    let (p1, p2) = pontrjagin_from_spin(&q1, &q2).map_err(|e| e.to_string())?;
    ensure(
        p1 == g("p1") && p2 == g("p2"),
        "p -> Q -> p is not the identity",
    )?;
    let (p1, p2) = pontrjagin_from_spin(&g("Q1"), &g("Q2")).map_err(|e| e.to_string())?;
    let (q1, q2) = spin_classes(&p1, &p2).map_err(|e| e.to_string())?;
    ensure(
        q1 == g("Q1") && q2 == g("Q2"),
        "Q -> p -> Q is not the identity",
    )?;
    ensure(
        q2 == ring
            .parse("p2/2 - p1^2/8")
            .unwrap()
            .substitute(
                &[
                    ("p1".to_string(), p1.clone()),
                    ("p2".to_string(), p2.clone()),
                ]
                .into(),
            )
            .unwrap(),
        "Q2 formula",
    )?;

    let mut x = BaseSpace::new("X", 10);
    x.declare(4, AbelianGroup::new(1, vec![]).unwrap(), vec!["u4".into()])
        .unwrap();
    x.declare(
        8,
        AbelianGroup::new(1, vec![2, 3]).unwrap(),
        vec!["u8".into(), "t2".into(), "t3".into()],
    )
    .unwrap();
    let x = Arc::new(x);
    let h8 = x.group(8);
    let mut rng = StdRng::seed_from_u64(10);
    for n in 0..50 {
        let mut class = || {
            CohClass::new(
                Arc::clone(&h8),
                vec![int(rng.random_range(-20..=20))],
                vec![rng.random_range(0..2).into(), rng.random_range(0..3).into()],
            )
            .unwrap()
        };
        let (qa, qb) = (class(), class());
        let mut a = Bundle::new("A", Arc::clone(&x), Field::Real, 4);
        let mut b = Bundle::new("B", Arc::clone(&x), Field::Real, 6);
        a.set_class("Q1", x.zero(4)).unwrap();
        b.set_class("Q1", x.zero(4)).unwrap();
        a.set_class("Q2", qa.clone()).unwrap();
        b.set_class("Q2", qb.clone()).unwrap();
        let s = a.direct_sum(&b).map_err(|e| e.to_string())?;
        let entry = s.entry("Q2").ok_or("sum has no Q2")?;
        ensure(
            entry.class == qa.add(&qb).unwrap(),
            format!("sample {n}: Q2 not additive"),
        )?;
        ensure(
            entry.validity == Validity::Exact,
            format!("sample {n}: validity {:?}", entry.validity),
        )?;
    }
    Ok("Q <-> p inverse exactly; Q2 additive with exact validity on 50 torsion samples".into())
}

fn criterion_11() -> Outcome {
    let (alg, report) =
        serre_page_check(&[("x3", 3)], &[("x3", int(1))], 8).map_err(|e| e.to_string())?;
    ensure(
        report.concentrated_in_degree_zero(),
        format!("cohomology {:?}", report.cohomology),
    )?;
    // Λ(x₃) ⊗ ℚ[y] has one basis element in degree 0 and in every degree ≥ 2.
    let expected_page: Vec<usize> = (0..=8).map(|d| usize::from(d != 1)).collect();
    ensure(
        report.page == expected_page,
        format!("page dims {:?}", report.page),
    )?;
    ensure(
        report.cohomology.len() == 9,
        "cohomology not computed through degree 8",
    )?;
    // d(x3·y^k) = k·x3·x3·y^{k-1} = 0 and d(y^k) = k·x3·y^{k-1}.
    let y3 = alg.multiply(
        &alg.multiply(&alg.generator("y").unwrap(), &alg.generator("y").unwrap()),
        &alg.generator("y").unwrap(),
    );
    let x3y2 = alg.multiply(
        &alg.generator("x3").unwrap(),
        &alg.multiply(&alg.generator("y").unwrap(), &alg.generator("y").unwrap()),
    );
    let three = BigRational::from_integer(3.into());
    let expected: fivebrane::cover_cohomology::Element =
        x3y2.iter().map(|(m, c)| (m.clone(), c * &three)).collect();
    ensure(alg.d(&y3) == expected, "d(y^3) != 3 x3 y^2")?;
    Ok(format!("H = {:?} through degree 8", report.cohomology))
}

fn corpus() -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .expect("corpus directory")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "fb"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let bytes = std::fs::read(&p).expect("readable corpus file");
            (p, bytes)
        })
        .collect()
}

const TOKENS: &[&str] = &[
    "[",
    "]",
    "=",
    "#",
    "\n",
    "\r\n",
    "\t",
    " ",
    "+",
    "-",
    "*",
    "/",
    "^",
    "(",
    ")",
    "<",
    ">",
    ",",
    "Z",
    "Z/",
    "Z/2<t>",
    "[space X]",
    "[bundle TX]",
    "[bundle E]",
    "[patch U]",
    "[connection A]",
    "[result]",
    "space = X",
    "field = real",
    "field = complex",
    "dimension = 8",
    "matrix_size = 2",
    "patch = U",
    "p1",
    "p2",
    "sixth_p2",
    "half_p1",
    "ch4",
    "c2",
    "Q2",
    "H3",
    "H8",
    "H0",
    "H99",
    "dx1",
    "dx9",
    "x1",
    "x9",
    "u8",
    "0",
    "1",
    "-7",
    "99999999999999999999999",
    "1/0",
    "x1^64",
    "(((((",
    "))",
    "[[",
    "]]",
    "é",
    "\u{2212}",
    "\0",
];

fn mutate(rng: &mut StdRng, input: &[u8], pool: &[Vec<u8>]) -> Vec<u8> {
    let mut v = input.to_vec();
    for _ in 0..rng.random_range(1..=4) {
        let at = if v.is_empty() {
            0
        } else {
            rng.random_range(0..=v.len())
        };
        match rng.random_range(0..7) {
            0 if !v.is_empty() => {
                let i = rng.random_range(0..v.len());
                v[i] = rng.random();
            }
            1 => {
                let t = TOKENS[rng.random_range(0..TOKENS.len())].as_bytes();
                v.splice(at..at, t.iter().copied());
            }
            2 if !v.is_empty() => {
                let end = (at + rng.random_range(1..=16)).min(v.len());
                v.drain(at.min(end)..end);
            }
            3 => {
                let lines: Vec<&[u8]> = v.split(|&b| b == b'\n').collect();
                let pick = lines[rng.random_range(0..lines.len())].to_vec();
                let mut out = pick;
                out.push(b'\n');
                v.splice(at..at, out);
            }
            4 => {
                let other = &pool[rng.random_range(0..pool.len())];
                let cut = rng.random_range(0..=other.len());
                v.truncate(at);
                v.extend_from_slice(&other[cut..]);
            }
            5 if !v.is_empty() => {
                let i = rng.random_range(0..v.len());
                v.insert(i, v[i]);
            }
            _ => {
                let i = rng.random_range(0..=v.len());
                v.insert(
                    i,
                    [b'a', b'1', b'_', b'.', 0xff, 0xc3][rng.random_range(0..6)],
                );
            }
        }
    }
    v
}

fn criterion_12() -> Outcome {
    let files = corpus();
    ensure(files.len() >= 5, "corpus is too small")?;
    for (path, bytes) in &files {
        let doc = document::parse_bytes(bytes).map_err(|d| format!("{}: {d}", path.display()))?;
        let rendered = doc.render();
        let again = document::parse(&rendered)
            .map_err(|d| format!("{}: rendered form fails: {d}", path.display()))?;
        ensure(
            again == doc,
            format!("{}: round trip changed the document", path.display()),
        )?;
        ensure(
            again.render() == rendered,
            format!("{}: rendering is not idempotent", path.display()),
        )?;
    }
    let mut pool: Vec<Vec<u8>> = files.into_iter().map(|(_, b)| b).collect();
    let seeds = pool.len();
    let mut rng = StdRng::seed_from_u64(12);
    let start = Instant::now();
    let (mut runs, mut accepted) = (0u64, 0u64);
    let mut failure: Option<String> = None;
    let hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    while start.elapsed() < FUZZ_BUDGET {
        let base = &pool[rng.random_range(0..pool.len())];
        let input = mutate(&mut rng, base, &pool);
        runs += 1;
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| {
            let lines = input.split(|&b| b == b'\n').count();
            match document::parse_bytes(&input) {
                Ok(doc) => {
                    let again = document::parse(&doc.render())
                        .map_err(|d| format!("rendered form fails: {d}"))?;
                    if again != doc {
                        return Err("round trip changed the document".to_string());
                    }
                    Ok(true)
                }
                Err(d)
                    if d.line >= 1 && d.line <= lines && d.column >= 1 && !d.message.is_empty() =>
                {
                    Ok(false)
                }
                Err(d) => Err(format!("diagnostic out of range: {d}")),
            }
        }));
        match outcome {
            Ok(Ok(true)) => {
                accepted += 1;
                if pool.len() < seeds + 256 {
                    pool.push(input);
                }
            }
            Ok(Ok(false)) => {}
            Ok(Err(m)) => {
                failure = Some(format!(
                    "{m} on input {:?}",
                    String::from_utf8_lossy(&input)
                ));
                break;
            }
            Err(_) => {
                failure = Some(format!(
                    "parser panicked on input {:?}",
                    String::from_utf8_lossy(&input)
                ));
                break;
            }
        }
    }
    panic::set_hook(hook);
    if let Some(f) = failure {
        return Err(f);
    }
    Ok(format!(
        "{seeds} corpus documents round-trip; {runs} fuzz inputs in {:.0?}, {accepted} accepted and round-tripped, the rest positioned diagnostics",
        start.elapsed()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("ch4 identity", criterion_1),
        ("oracle equivalence", criterion_2),
        ("fractional-class discriminator", criterion_3),
        ("anomaly reduction", criterion_4),
        ("ladder monotonicity", criterion_5),
        ("cover cohomology", criterion_6),
        ("transgression theorem", criterion_7),
        ("pure-gauge closed form", criterion_8),
        ("gauge invariance", criterion_9),
        ("Q-class arithmetic", criterion_10),
        ("Serre page check", criterion_11),
        ("parser robustness", criterion_12),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let label = format!("criterion {:>2} [{name}]", i + 1);
        if !filter.is_empty() && !filter.iter().any(|p| label.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("{label}: PASS ({took:.2?}) {detail}"),
            Err(why) => {
                failed += 1;
                println!("{label}: FAIL ({took:.2?}) {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
