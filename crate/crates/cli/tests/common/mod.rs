//! Synthetic function-pair corpus shared by the CLI tests.

#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const STATEMENTS: &[&str] = &[
    "int a = 0;",
    "b += a;",
    "if (n > 0) return -1;",
    "buf[i] = c;",
    "strcpy(dst, src);",
    "len = strlen(src);",
    "memcpy(dst, src, len);",
    "free(ptr);",
    "ptr = NULL;",
    "i++;",
    "count = count * 2;",
    "gets(line);",
    "sprintf(out, \"%s\", name);",
    "x = y / z;",
    "while (p) p = p->next;",
    "char tmp[16];",
];

const FIXES: &[(&str, &str)] = &[
    ("strcpy(dst, src);", "strncpy(dst, src, sizeof(dst) - 1);"),
    ("gets(line);", "fgets(line, sizeof(line), stdin);"),
    (
        "sprintf(out, \"%s\", name);",
        "snprintf(out, sizeof(out), \"%s\", name);",
    ),
    (
        "memcpy(dst, src, len);",
        "memcpy(dst, src, len < cap ? len : cap);",
    ),
    ("x = y / z;", "x = z ? y / z : 0;"),
    ("return 0;", "return -1;"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    SingleReplace,
    MultiHunk,
    PureInsertion,
    PureDeletion,
    DuplicateSpan,
}

pub const SHAPES: [Shape; 5] = [
    Shape::SingleReplace,
    Shape::MultiHunk,
    Shape::PureInsertion,
    Shape::PureDeletion,
    Shape::DuplicateSpan,
];

pub struct Pair {
    pub shape: Shape,
    pub vulnerable: String,
    pub patched: String,
}

fn function(name: &str, body: &[String]) -> String {
    format!(
        "int {name}(char *dst, char *src, int n) {{\n    {}\n}}",
        body.join("\n    ")
    )
}

fn body(rng: &mut ChaCha8Rng, len: usize) -> Vec<String> {
    (0..len)
        .map(|_| STATEMENTS.choose(rng).unwrap().to_string())
        .collect()
}

pub fn synthetic_pair(rng: &mut ChaCha8Rng, shape: Shape, name: &str) -> Pair {
    loop {
        let len = rng.random_range(3..9);
        let mut vul = body(rng, len);
        let mut patched = vul.clone();
        match shape {
            Shape::SingleReplace => {
                let (bad, good) = *FIXES.choose(rng).unwrap();
                let at = rng.random_range(0..=vul.len());
                vul.insert(at, bad.to_string());
                patched.insert(at, good.to_string());
            }
            Shape::MultiHunk => {
                let hunks = rng.random_range(2..4);
                for _ in 0..hunks {
                    let (bad, good) = *FIXES.choose(rng).unwrap();
                    // unchanged statements keep the edits apart
                    let filler = STATEMENTS.choose(rng).unwrap().to_string();
                    vul.push(bad.to_string());
                    patched.push(good.to_string());
                    vul.push(filler.clone());
                    patched.push(filler);
                }
            }
            Shape::PureInsertion => {
                let at = rng.random_range(0..=patched.len());
                patched.insert(at, "if (!dst) return -1;".to_string());
            }
            Shape::PureDeletion => {
                let at = rng.random_range(0..vul.len());
                vul.insert(at, "gets(line);".to_string());
            }
            Shape::DuplicateSpan => {
                // the same statement twice; only the first occurrence is fixed
                let (bad, good) = *FIXES.choose(rng).unwrap();
                let first = rng.random_range(0..=vul.len());
                vul.insert(first, bad.to_string());
                patched.insert(first, good.to_string());
                // half the time adjacent, so trigger latency can run past the copy
                let second = if rng.random_bool(0.5) {
                    first + 1
                } else {
                    rng.random_range(first + 1..=vul.len())
                };
                vul.insert(second, bad.to_string());
                patched.insert(second, bad.to_string());
            }
        }
        let (vulnerable, patched) = (function(name, &vul), function(name, &patched));
        if vulnerable != patched {
            return Pair {
                shape,
                vulnerable,
                patched,
            };
        }
    }
}

/// `count` pairs cycling through every shape, one commit per pair.
pub fn corpus(rng: &mut ChaCha8Rng, count: usize) -> Vec<Pair> {
    (0..count)
        .map(|i| synthetic_pair(rng, SHAPES[i % SHAPES.len()], &format!("fn_{i}")))
        .collect()
}

pub fn corpus_jsonl(pairs: &[Pair]) -> String {
    let mut out = String::new();
    for (i, p) in pairs.iter().enumerate() {
        let line = json!({
            "id": format!("pair-{i:04}"),
            "vulnerable": p.vulnerable,
            "patched": p.patched,
            "spec": format!("Implement fn_{i} safely."),
            "meta": {"source_commit": format!("commit-{i:04}"), "cwe": "CWE-120", "language": "c", "function": format!("fn_{i}")},
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

pub fn general_jsonl(count: usize) -> String {
    (0..count)
        .map(|i| json!({"id": format!("gen-{i:04}"), "spec": "Write a helper.", "trajectory": format!("int helper_{i}(void) {{ return {i}; }}")}).to_string() + "\n")
        .collect()
}

pub const WEIGHT_TABLE: &str = r#"{
  "rows": {
    "": {"int": 2.0, "x": 1.0, "=": 1.0, "1": 1.0, ";": 1.0, " ": 3.0, "<|backtracking|>": 0.4, "<|eos|>": 0.1},
    "int": {" ": 5.0, "<|backtracking|>": 0.1},
    "x": {" ": 2.0, "=": 1.0, ";": 1.0, "<|backtracking|>": 0.3},
    ";": {" ": 1.0, "int": 1.0, "<|eos|>": 0.4, "<|backtracking|>": 0.5}
  },
  "max_code_tokens": 120,
  "max_scope_len": 4,
  "max_patch_len": 4
}"#;
