//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod common;

use std::collections::BTreeSet;
use std::ops::RangeInclusive;
use std::process::Command;
use std::time::{Duration, Instant};

use num::{BigInt, BigRational, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use revstream::audit::{stability_matrix, Checker, StabilityCounts};
use revstream::episode::{serialize, Item, Mode, RevisionEpisode, SentinelSet, Trajectory};
use revstream::forge::{
    build_trajectory, diff_function_pair, BuildOptions, ForgeError, FunctionPair, Tier,
};
use revstream::harness::{
    cost_agent, cost_sor, decode_session, exact_slope, scaling_experiment, semantic_init,
    AgentSteps, EmbeddingInitSpec, Policy, SessionConfig, SorAccounting,
};
use revstream::render::{render, RenderEvent};
use revstream::scope::{brute_force_valid_set, Backend, ConstraintState};
use revstream::{detokenize, Profile, Token};

const BACKENDS: [Backend; 2] = [Backend::PositionList, Backend::SubstringIndex];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn alphabet(n: usize) -> Vec<Token> {
    (0..n)
        .map(|i| Token::from(((b'a' + i as u8) as char).to_string().as_str()))
        .collect()
}

fn random_buffer(rng: &mut ChaCha8Rng, sigma: &[Token], len: RangeInclusive<usize>) -> Vec<Token> {
    let len = rng.random_range(len);
    (0..len)
        .map(|_| sigma[rng.random_range(0..sigma.len())].clone())
        .collect()
}

fn is_substring(buffer: &[Token], span: &[Token]) -> bool {
    span.len() <= buffer.len() && buffer.windows(span.len()).any(|w| w == span)
}

fn walk(buffer: &[Token], span: &[Token], backend: Backend) -> ConstraintState {
    let mut state = ConstraintState::open(buffer.to_vec(), backend).unwrap();
    for t in span {
        state = state.advance(t).unwrap();
    }
    state
}

fn mask_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let started = Instant::now();
    let mut agree = 0;
    let cases = 1000;
    for _ in 0..cases {
        let sigma = alphabet(rng.random_range(1..=8));
        let buffer = random_buffer(&mut rng, &sigma, 1..=64);
        let start = rng.random_range(0..buffer.len());
        let len = rng.random_range(0..=buffer.len() - start);
        let partial = &buffer[start..start + len];
        let expected = brute_force_valid_set(&buffer, partial).unwrap();
        if BACKENDS
            .iter()
            .all(|&b| walk(&buffer, partial, b).valid_set() == expected)
        {
            agree += 1;
        }
    }
    let elapsed = started.elapsed();
    outcome(
        agree == cases && elapsed < Duration::from_secs(5),
        format!("{agree}/{cases} exact, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn substring_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let started = Instant::now();
    let (mut sound, mut complete, mut walks) = (0, 0, 0);
    let buffers = 500;
    for _ in 0..buffers {
        let sigma = alphabet(rng.random_range(1..=4));
        let buffer = random_buffer(&mut rng, &sigma, 1..=12);
        for backend in BACKENDS {
            // soundness: random masked walks
            let mut ok = true;
            for _ in 0..8 {
                let mut state = ConstraintState::open(buffer.clone(), backend).unwrap();
                loop {
                    let valid: Vec<Token> = state.valid_set().continuations.into_iter().collect();
                    if valid.is_empty() || (state.closure_allowed() && rng.random_bool(0.2)) {
                        break;
                    }
                    state = state
                        .advance(&valid[rng.random_range(0..valid.len())])
                        .unwrap();
                    walks += 1;
                    ok &= is_substring(&buffer, state.span());
                }
                let closed = state.close();
                ok &= state.span().is_empty()
                    || closed.is_ok_and(|w| buffer[w.start..w.end] == *state.span());
            }
            sound += usize::from(ok);

            // completeness: exhaustive walk to depth 8
            let mut reached = BTreeSet::new();
            let mut stack = vec![ConstraintState::open(buffer.clone(), backend).unwrap()];
            while let Some(state) = stack.pop() {
                if state.span_len() == 8 {
                    continue;
                }
                for t in state.valid_set().continuations {
                    let next = state.advance(&t).unwrap();
                    reached.insert(next.span().to_vec());
                    stack.push(next);
                }
            }
            let mut all = BTreeSet::new();
            for i in 0..buffer.len() {
                for j in i + 1..=(i + 8).min(buffer.len()) {
                    all.insert(buffer[i..j].to_vec());
                }
            }
            complete += usize::from(reached == all);
        }
    }
    let elapsed = started.elapsed();
    let total = 2 * buffers;
    outcome(
        sound == total && complete == total && elapsed < Duration::from_secs(10),
        format!(
            "sound {sound}/{total}, complete {complete}/{total} ({walks} masked steps), {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn rightmost_splice() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sentinels = SentinelSet::canonical();
    let cases = 1000;
    let mut exact = 0;
    for _ in 0..cases {
        let sigma = alphabet(rng.random_range(2..=5));
        let occurrences = |buffer: &[Token], s: &[Token]| -> Vec<usize> {
            (s.len()..=buffer.len())
                .filter(|&j| buffer[j - s.len()..j] == *s)
                .collect()
        };
        // an insertion can cut through an earlier copy, so redraw until k >= 2
        let (s, patch, buffer, ends) = loop {
            let s = random_buffer(&mut rng, &sigma, 1..=4);
            let patch = random_buffer(&mut rng, &sigma, 0..=4);
            let mut buffer = random_buffer(&mut rng, &sigma, 0..=30);
            for _ in 0..rng.random_range(2..=4) {
                let at = rng.random_range(0..=buffer.len());
                buffer.splice(at..at, s.iter().cloned());
            }
            let ends = occurrences(&buffer, &s);
            if ends.len() >= 2 {
                break (s, patch, buffer, ends);
            }
        };
        // reference: splice at the largest end index
        let j_star = *ends.iter().max().unwrap();
        let mut reference = buffer.clone();
        reference.splice(j_star - s.len()..j_star, patch.iter().cloned());

        let mut items: Vec<Item> = buffer.iter().cloned().map(Item::Code).collect();
        items.push(Item::Episode(
            RevisionEpisode::new(s.clone(), patch.clone()).unwrap(),
        ));
        let stream = serialize(&Trajectory::new(items), &sentinels);
        let (out, _) = render(&stream, &sentinels, Mode::Strict).unwrap();
        if detokenize(&out) == detokenize(&reference) {
            exact += 1;
        }
    }
    outcome(exact == cases, format!("{exact}/{cases} byte-exact"))
}

fn forge_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sentinels = SentinelSet::canonical();
    let pairs = common::corpus(&mut rng, 500);
    let (mut built, mut exact) = (0, 0);
    let (mut dup_total, mut dup_skipped, mut other_skips, mut widened) = (0, 0, 0, 0);
    for (i, p) in pairs.iter().enumerate() {
        let pair = FunctionPair {
            id: format!("p{i}"),
            vulnerable: p.vulnerable.clone(),
            patched: p.patched.clone(),
            meta: Default::default(),
        };
        let profile = if i % 2 == 0 {
            Profile::Char
        } else {
            Profile::Word
        };
        let options = BuildOptions {
            profile,
            latency_k: 8,
            seed: i as u64,
        };
        let duplicate = p.shape == common::Shape::DuplicateSpan;
        dup_total += usize::from(duplicate);
        let hunks = diff_function_pair(&pair, profile, 0).unwrap();
        match build_trajectory(&pair, &hunks, "", Tier::Relaxed, &options) {
            Ok(record) => {
                built += 1;
                let wider = record
                    .trajectory
                    .episodes()
                    .zip(&hunks)
                    .any(|(e, h)| e.scope().len() > h.del_span.len());
                widened += usize::from(duplicate && wider);
                let (out, _) = render(
                    &serialize(&record.trajectory, &sentinels),
                    &sentinels,
                    Mode::Strict,
                )
                .unwrap();
                if detokenize(&out) == p.patched {
                    exact += 1;
                }
            }
            Err(ForgeError::ScopeAmbiguityUnresolvable { .. }) if duplicate => dup_skipped += 1,
            Err(_) => other_skips += 1,
        }
    }
    let skip_rate = dup_skipped as f64 / dup_total as f64;
    outcome(
        built > 0 && exact == built && other_skips == 0 && skip_rate < 0.02,
        format!(
            "{exact}/{built} exact, duplicate-span skips {dup_skipped}/{dup_total} ({:.1}%, {widened} widened scopes), other skips {other_skips}",
            100.0 * skip_rate
        ),
    )
}

fn cost_closed_forms() -> Outcome {
    let agent = cost_agent(100, 10, 5, AgentSteps::Three, 0, &[]).total;
    let ours = cost_sor(100, 5, SorAccounting::Idealized, None, 0).total;
    let ls: Vec<u64> = (8..=14).map(|p| 1u64 << p).collect();
    let rows = scaling_experiment(&ls, 10, 5).unwrap();
    let slope_agent = exact_slope(
        &rows
            .iter()
            .map(|r| (r.l, r.delta_agent))
            .collect::<Vec<_>>(),
    );
    let slope_ours = exact_slope(
        &rows
            .iter()
            .map(|r| (r.l, r.delta_ours_measured))
            .collect::<Vec<_>>(),
    );
    let constant = rows
        .windows(2)
        .all(|w| w[0].delta_ours_measured == w[1].delta_ours_measured);
    outcome(
        agent == 225
            && ours == 106
            && slope_agent == Some((1, 1))
            && slope_ours == Some((0, 1))
            && constant,
        format!(
            "agent {agent}, ours {ours}, slopes {slope_agent:?} / {slope_ours:?} over {} rows",
            rows.len()
        ),
    )
}

fn transparency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let sentinels = SentinelSet::canonical();
    let sigma = alphabet(8);
    let mut failures = Vec::new();
    for len in [0, 1, 17, 1000, 100_000] {
        let stream = random_buffer(&mut rng, &sigma, len..=len);
        let (out, events) = render(&stream, &sentinels, Mode::Strict).unwrap();
        let appends = events
            .iter()
            .filter(|e| matches!(e, RenderEvent::Append { .. }))
            .count();
        let session =
            decode_session(&Policy::Scripted(stream.clone()), &SessionConfig::default()).unwrap();
        if out != stream
            || appends != len
            || events.len() != len
            || session.cost.measured_output != len as u64
        {
            failures.push(len);
        }
    }
    outcome(
        failures.is_empty(),
        format!("lengths up to 100000, failures {failures:?}"),
    )
}

fn episode_length() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sentinels = SentinelSet::canonical();
    let sigma = alphabet(6);
    let cases = 200;
    let mut exact = 0;
    for _ in 0..cases {
        let mut items = Vec::new();
        let (mut code, mut revision) = (0, 0);
        for _ in 0..rng.random_range(0..40) {
            if rng.random_bool(0.15) {
                let s = random_buffer(&mut rng, &sigma, 1..=5);
                let p = random_buffer(&mut rng, &sigma, 0..=5);
                revision += s.len() + p.len() + 5;
                items.push(Item::Episode(RevisionEpisode::new(s, p).unwrap()));
            } else {
                code += 1;
                items.push(Item::Code(sigma[rng.random_range(0..sigma.len())].clone()));
            }
        }
        let t = Trajectory::new(items);
        if serialize(&t, &sentinels).len() == code + revision
            && t.serialized_len() == code + revision
        {
            exact += 1;
        }
    }
    outcome(exact == cases, format!("{exact}/{cases} exact"))
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap()
}

fn semantic_init_precision() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let tolerance = rational(1e-12);
    let mut worst = 0.0f64;
    let mut ok = 0;
    let cases = 100;
    for _ in 0..cases {
        let dim = rng.random_range(1..=16);
        let n = rng.random_range(1..=12);
        let vectors: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..dim)
                    .map(|_| rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-3..4)))
                    .collect()
            })
            .collect();
        let weights: Option<Vec<f64>> = rng
            .random_bool(0.7)
            .then(|| (0..n).map(|_| rng.random_range(0.01..5.0)).collect());
        let got = semantic_init(&EmbeddingInitSpec {
            description_vectors: vectors.clone(),
            weights: weights.clone(),
        })
        .unwrap();

        let w: Vec<BigRational> = match &weights {
            Some(w) => w.iter().map(|&x| rational(x)).collect(),
            None => vec![BigRational::from_integer(BigInt::from(1)); n],
        };
        let z = w.iter().fold(BigRational::zero(), |a, b| a + b);
        let mut case_ok = true;
        for d in 0..dim {
            let sum = vectors
                .iter()
                .zip(&w)
                .fold(BigRational::zero(), |acc, (v, a)| acc + a * rational(v[d]));
            let reference = sum / &z;
            let err = (rational(got[d]) - &reference).abs();
            if reference.is_zero() {
                case_ok &= err.is_zero();
                continue;
            }
            let rel = err / reference.abs();
            worst = worst.max(rel.to_f64().unwrap_or(f64::INFINITY));
            case_ok &= rel <= tolerance;
        }
        ok += usize::from(case_ok);
    }
    let basis = semantic_init(&EmbeddingInitSpec {
        description_vectors: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        weights: None,
    })
    .unwrap();
    outcome(
        ok == cases && basis == [0.5, 0.5],
        format!("{ok}/{cases} within 1e-12 (worst relative error {worst:.2e}), basis {basis:?}"),
    )
}

fn stability() -> Outcome {
    let good = "int f(){return 0;}";
    let bad = "int f(){return 0;";
    let fixtures = [(good, good), (good, bad), (bad, good), (bad, bad)];
    let (counts, _) = stability_matrix(&fixtures, &Checker::Builtin).unwrap();
    let four = counts
        == StabilityCounts {
            stable: 1,
            regressed: 1,
            fixed: 1,
            stable_fail: 1,
        };

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pieces = ["(", ")", "{", "}", "a", ";", "'", "\""];
    let text = |rng: &mut ChaCha8Rng| -> String {
        (0..rng.random_range(0..12))
            .map(|_| pieces[rng.random_range(0..pieces.len())])
            .collect()
    };
    let mut totals_ok = 0;
    for _ in 0..100 {
        let pairs: Vec<(String, String)> = (0..rng.random_range(0..40))
            .map(|_| (text(&mut rng), text(&mut rng)))
            .collect();
        let (counts, cells) = stability_matrix(&pairs, &Checker::Builtin).unwrap();
        totals_ok += usize::from(counts.total() == pairs.len() && cells.len() == pairs.len());
    }
    outcome(
        four && totals_ok == 100,
        format!("fixtures {counts:?}, totals {totals_ok}/100"),
    )
}

fn run_bin(args: &[&str], dir: &std::path::Path) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_revstream"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "off")
        .output()
        .expect("run revstream");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let pairs = common::corpus(&mut rng, 200);
    std::fs::write(path.join("pairs.jsonl"), common::corpus_jsonl(&pairs)).unwrap();
    std::fs::write(path.join("general.jsonl"), common::general_jsonl(600)).unwrap();
    std::fs::write(path.join("table.json"), common::WEIGHT_TABLE).unwrap();

    let build = |out: &str, workers: &str| {
        let args = [
            "--seed",
            "42",
            "build-data",
            "--pairs",
            "pairs.jsonl",
            "--out",
            out,
            "--tier",
            "both",
            "--lambda",
            "1:3",
            "--general",
            "general.jsonl",
            "--workers",
            workers,
        ];
        let (code, stdout) = run_bin(&args, path);
        (
            code,
            stdout,
            std::fs::read(path.join(out)).unwrap_or_default(),
        )
    };
    let a = build("a.jsonl", "1");
    let b = build("b.jsonl", "1");
    let c = build("c.jsonl", "4");
    let build_same = a.0 == 0 && a == b && a.1 == c.1 && a.2 == c.2 && !a.2.is_empty();

    let simulate = || {
        run_bin(
            &[
                "--seed",
                "42",
                "simulate",
                "--policy",
                "stochastic",
                "--table",
                "table.json",
                "--bias",
                "1.5",
            ],
            path,
        )
    };
    let replay = || run_bin(&["simulate", "--policy", "a.jsonl", "--L", "64"], path);
    let (s1, s2) = (simulate(), simulate());
    let (r1, r2) = (replay(), replay());
    let simulate_same = s1.0 == 0 && s1 == s2 && r1.0 == 0 && r1 == r2;

    let records = a.2.iter().filter(|&&b| b == b'\n').count();
    outcome(
        build_same && simulate_same,
        format!("build-data {records} records identical across runs/workers: {build_same}; simulate identical: {simulate_same}"),
    )
}

fn performance(suite_started: Instant) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sigma = alphabet(16);
    let buffer = random_buffer(&mut rng, &sigma, 100_000..=100_000);
    let started = Instant::now();
    let root = ConstraintState::open(buffer.clone(), Backend::SubstringIndex).unwrap();
    let build = started.elapsed();

    let started = Instant::now();
    let mut steps = 0u64;
    while steps < 20_000 {
        // follow a real occurrence so walks can run long
        let from = rng.random_range(0..buffer.len() - 64);
        let mut state = root.clone();
        for t in &buffer[from..from + 64] {
            let mask = state.valid_set();
            assert!(mask.continuations.contains(t));
            state = state.advance(t).unwrap();
            steps += 1;
        }
        assert_eq!(state.close().unwrap().span.len(), 64);
    }
    let rate = steps as f64 / started.elapsed().as_secs_f64();
    let suite = suite_started.elapsed();
    outcome(
        rate >= 1e3 && suite < Duration::from_secs(300),
        format!(
            "{rate:.0} masked advance steps/s on a 100000-token buffer (index build {:.2}s); acceptance run {:.1}s",
            build.as_secs_f64(),
            suite.as_secs_f64()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let suite_started = Instant::now();
    let criteria: [Criterion; 10] = [
        ("mask-oracle equivalence", mask_oracle),
        ("strict substring soundness/completeness", substring_law),
        ("right-most splice law", rightmost_splice),
        ("forge round-trip", forge_round_trip),
        ("cost closed forms", cost_closed_forms),
        ("transparency identity", transparency),
        ("episode length formula", episode_length),
        ("semantic init precision", semantic_init_precision),
        ("stability matrix", stability),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    let mut report = |n: usize, name: &str, o: Outcome| {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} [{verdict}] {name}: {}", o.detail);
        failed += usize::from(!o.pass);
    };
    for (i, (name, check)) in criteria.iter().enumerate() {
        report(i + 1, name, check());
    }
    report(11, "desk-scale performance", performance(suite_started));
    println!("acceptance: {} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
