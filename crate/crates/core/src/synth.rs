//! Deterministic synthetic dumps with planted gold snippets.
//!
//! Questions are drawn from a fixed table of operations. An annotated
//! question's gold answer holds setup lines, the snippet implementing the
//! operation and sometimes a trailing line; the other answers implement
//! different operations with the same layout, so position and shape alone
//! cannot pick the snippet out. Unannotated questions supply the
//! title/code corpus for the correspondence model.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotation::{Annotation, Span, Status};
use crate::ingest::{render_code_blocks, AnswerEntry, BlockEntry, QuestionThread};
use crate::types::Language;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flavor {
    /// Python-like code, tag `python`.
    A,
    /// Java-like code, tag `java`.
    B,
}

impl Flavor {
    pub fn language(self) -> Language {
        match self {
            Flavor::A => Language::new("python"),
            Flavor::B => Language::new("java"),
        }
    }
}

struct Op {
    intent: &'static str,
    /// `{v}` is a list variable, `{s}` a string variable.
    a: &'static str,
    b: &'static str,
    import_a: Option<&'static str>,
}

const OPS: &[Op] = &[
    Op { intent: "sort a list", a: "sorted({v})", b: "Collections.sort({v})", import_a: None },
    Op { intent: "reverse a list", a: "{v}.reverse()", b: "Collections.reverse({v})", import_a: None },
    Op { intent: "get the length of a list", a: "len({v})", b: "{v}.size()", import_a: None },
    Op { intent: "find the maximum value in a list", a: "max({v})", b: "Collections.max({v})", import_a: None },
    Op { intent: "find the minimum value in a list", a: "min({v})", b: "Collections.min({v})", import_a: None },
    Op { intent: "shuffle a list randomly", a: "random.shuffle({v})", b: "Collections.shuffle({v})", import_a: Some("import random") },
    Op { intent: "remove duplicates from a list", a: "list(set({v}))", b: "new HashSet<>({v})", import_a: None },
    Op { intent: "join strings with a comma", a: "\",\".join({v})", b: "String.join(\",\", {v})", import_a: None },
    Op { intent: "split a string on spaces", a: "{s}.split(\" \")", b: "{s}.split(\" \")", import_a: None },
    Op { intent: "convert a string to upper case", a: "{s}.upper()", b: "{s}.toUpperCase()", import_a: None },
    Op { intent: "convert a string to lower case", a: "{s}.lower()", b: "{s}.toLowerCase()", import_a: None },
    Op { intent: "strip whitespace from a string", a: "{s}.strip()", b: "{s}.trim()", import_a: None },
    Op { intent: "parse an integer from a string", a: "int({s})", b: "Integer.parseInt({s})", import_a: None },
    Op { intent: "read a file line by line", a: "open(path).readlines()", b: "Files.readAllLines(path)", import_a: None },
    Op { intent: "sum a list of numbers", a: "sum({v})", b: "{v}.stream().mapToInt(Integer::intValue).sum()", import_a: None },
    Op { intent: "check if a list is empty", a: "len({v}) == 0", b: "{v}.isEmpty()", import_a: None },
    Op { intent: "copy a list", a: "{v}.copy()", b: "new ArrayList<>({v})", import_a: None },
    Op { intent: "count occurrences of an element in a list", a: "{v}.count(x)", b: "Collections.frequency({v}, x)", import_a: None },
    Op { intent: "get the current time in seconds", a: "time.time()", b: "System.currentTimeMillis() / 1000", import_a: Some("import time") },
    Op { intent: "replace a substring in a string", a: "{s}.replace(\"a\", \"b\")", b: "{s}.replace(\"a\", \"b\")", import_a: None },
];

const LIST_VARS: &[&str] = &["items", "data", "values", "nums", "xs"];
const STR_VARS: &[&str] = &["text", "line", "name", "word"];
const RESULT_VARS: &[&str] = &["result", "out", "res"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub flavor: Flavor,
    pub seed: u64,
    /// Questions with a planted, annotated snippet.
    pub annotated: usize,
    /// Unannotated how-to questions.
    pub unannotated: usize,
    /// Questions whose titles are not how-to requests.
    pub non_howto: usize,
}

impl SynthConfig {
    pub fn new(flavor: Flavor, seed: u64) -> Self {
        SynthConfig {
            flavor,
            seed,
            annotated: 20,
            unannotated: 300,
            non_howto: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthFixture {
    pub language: Language,
    /// `Posts.xml` contents.
    pub dump_xml: String,
    /// Threads as the generator built them, answers in rank order.
    pub threads: Vec<QuestionThread>,
    /// One `ok` annotation per annotated question.
    pub gold: Vec<Annotation>,
    /// Questions whose accepted answer has exactly one block, counted while generating.
    pub single_block_accepted: usize,
}

/// A generated code block and the 1-based line range of its snippet.
struct Block {
    lines: Vec<String>,
    snippet: (usize, usize),
}

struct Gen {
    flavor: Flavor,
    rng: ChaCha8Rng,
}

impl Gen {
    fn pick<'a>(&mut self, xs: &'a [&'a str]) -> &'a str {
        xs.choose(&mut self.rng).expect("non-empty")
    }

    fn title(&mut self, op: &Op) -> String {
        let intent = op.intent;
        let lang = match self.flavor {
            Flavor::A => "Python",
            Flavor::B => "Java",
        };
        match self.rng.random_range(0..5) {
            0 => format!("How to {intent}"),
            1 => format!("How do I {intent} in {lang}"),
            2 => format!("How can I {intent}?"),
            3 => format!("Best way to {intent}"),
            _ => {
                let mut c = intent.chars();
                let first = c.next().expect("non-empty").to_uppercase();
                format!("{first}{}", c.as_str())
            }
        }
    }

    fn setup_lines(&mut self, op: &Op, v: &str, s: &str) -> Vec<String> {
        let mut out = Vec::new();
        match self.flavor {
            Flavor::A => {
                if let Some(imp) = op.import_a {
                    out.push(imp.to_string());
                } else if self.rng.random_bool(0.2) {
                    out.push("import os".to_string());
                }
                if self.rng.random_bool(0.7) {
                    out.push(format!("{v} = [3, 1, 2]"));
                }
                if self.rng.random_bool(0.4) {
                    out.push(format!("{s} = \" a b c \""));
                }
            }
            Flavor::B => {
                if self.rng.random_bool(0.5) {
                    out.push("import java.util.*;".to_string());
                }
                if self.rng.random_bool(0.7) {
                    out.push(format!("List<Integer> {v} = new ArrayList<>(List.of(3, 1, 2));"));
                }
                if self.rng.random_bool(0.4) {
                    out.push(format!("String {s} = \" a b c \";"));
                }
            }
        }
        out
    }

    fn snippet_lines(&mut self, op: &Op, v: &str, s: &str) -> Vec<String> {
        let template = match self.flavor {
            Flavor::A => op.a,
            Flavor::B => op.b,
        };
        let expr = template.replace("{v}", v).replace("{s}", s);
        let r = self.pick(RESULT_VARS);
        let form = self.rng.random_range(0..4);
        match (self.flavor, form) {
            (Flavor::A, 0) => vec![expr],
            (Flavor::A, 1) => vec![format!("print({expr})")],
            (Flavor::A, 2) => vec![format!("{r} = {expr}"), format!("print({r})")],
            (Flavor::A, _) => vec![format!("{r} = {expr}")],
            (Flavor::B, 0) => vec![format!("{expr};")],
            (Flavor::B, 1) => vec![format!("System.out.println({expr});")],
            (Flavor::B, 2) => vec![format!("var {r} = {expr};"), format!("System.out.println({r});")],
            (Flavor::B, _) => vec![format!("var {r} = {expr};")],
        }
    }

    fn trailing_line(&mut self) -> String {
        let msg = self.pick(&["done", "ok", "finished"]);
        match self.flavor {
            Flavor::A => format!("print(\"{msg}\")"),
            Flavor::B => format!("System.out.println(\"{msg}\");"),
        }
    }

    /// Setup, snippet, and with some probability a trailing line.
    fn block(&mut self, op: &Op, with_setup: bool) -> Block {
        let v = self.pick(LIST_VARS);
        let s = self.pick(STR_VARS);
        let mut lines = if with_setup { self.setup_lines(op, v, s) } else { Vec::new() };
        let start = lines.len() + 1;
        lines.extend(self.snippet_lines(op, v, s));
        let end = lines.len();
        if self.rng.random_bool(0.3) {
            let t = self.trailing_line();
            lines.push(t);
        }
        Block {
            lines,
            snippet: (start, end),
        }
    }

    fn other_op(&mut self, op_index: usize) -> usize {
        loop {
            let j = self.rng.random_range(0..OPS.len());
            if j != op_index {
                return j;
            }
        }
    }
}

fn answer_html(blocks: &[Vec<String>]) -> String {
    format!("<p>Try this:</p>\n{}", render_code_blocks(blocks))
}

fn attr(s: &str) -> String {
    html_escape::encode_double_quoted_attribute(s).replace('\n', "&#xA;")
}

struct DumpWriter {
    xml: String,
}

impl DumpWriter {
    fn question(&mut self, id: u64, title: &str, tag: &str, views: u64, accepted: Option<u64>) {
        let acc = accepted.map(|a| format!(" AcceptedAnswerId=\"{a}\"")).unwrap_or_default();
        self.xml.push_str(&format!(
            "  <row Id=\"{id}\" PostTypeId=\"1\"{acc} Score=\"{}\" ViewCount=\"{views}\" Body=\"{}\" Title=\"{}\" Tags=\"{}\" />\n",
            views / 100,
            attr("<p>Question body.</p>"),
            attr(title),
            attr(&format!("<{tag}>"))
        ));
    }

    fn answer(&mut self, id: u64, parent: u64, score: i64, blocks: &[Vec<String>]) {
        self.xml.push_str(&format!(
            "  <row Id=\"{id}\" PostTypeId=\"2\" ParentId=\"{parent}\" Score=\"{score}\" Body=\"{}\" />\n",
            attr(&answer_html(blocks))
        ));
    }
}

struct PlannedAnswer {
    blocks: Vec<Vec<String>>,
    accepted: bool,
    score: i64,
}

/// Builds a dump, its threads and gold annotations from `cfg`.
pub fn generate(cfg: &SynthConfig) -> SynthFixture {
    let language = cfg.flavor.language();
    let mut g = Gen {
        flavor: cfg.flavor,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    let mut w = DumpWriter {
        xml: String::from("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<posts>\n"),
    };
    let mut threads = Vec::new();
    let mut gold = Vec::new();
    let mut single_block_accepted = 0;

    let mut emit = |w: &mut DumpWriter, qid: u64, title: &str, views: u64, answers: Vec<PlannedAnswer>| {
        let accepted = answers.iter().position(|a| a.accepted).map(|i| qid * 10 + i as u64 + 1);
        w.question(qid, title, language.as_str(), views, accepted);
        for (i, a) in answers.iter().enumerate() {
            w.answer(qid * 10 + i as u64 + 1, qid, a.score, &a.blocks);
        }
        let mut order: Vec<usize> = (0..answers.len()).collect();
        order.sort_by(|&x, &y| answers[y].score.cmp(&answers[x].score).then(x.cmp(&y)));
        let entries: Vec<AnswerEntry> = order
            .iter()
            .enumerate()
            .map(|(rank, &i)| AnswerEntry {
                answer_id: qid * 10 + i as u64 + 1,
                score: answers[i].score,
                accepted: answers[i].accepted,
                rank: rank + 1,
                blocks: answers[i]
                    .blocks
                    .iter()
                    .enumerate()
                    .map(|(index, lines)| BlockEntry {
                        index,
                        lines: lines.clone(),
                    })
                    .collect(),
            })
            .collect();
        if entries.iter().any(|a| a.accepted && a.blocks.len() == 1) {
            single_block_accepted += 1;
        }
        QuestionThread {
            question_id: qid,
            title: title.to_string(),
            language: language.clone(),
            view_count: Some(views),
            answers: entries,
        }
    };

    for i in 0..cfg.annotated {
        let qid = 1000 + i as u64;
        let op_index = g.rng.random_range(0..OPS.len());
        let op = &OPS[op_index];
        let title = g.title(op);
        let n_answers = g.rng.random_range(2..=3);
        let gold_pos = g.rng.random_range(0..n_answers);
        let gold_accepted = g.rng.random_bool(0.7);
        let mut answers = Vec::new();
        let mut gold_span = None;
        for pos in 0..n_answers {
            let score = g.rng.random_range(0..20) + if pos == gold_pos { 8 } else { 0 };
            if pos == gold_pos {
                let mut blocks = Vec::new();
                if g.rng.random_bool(0.2) {
                    // setup in a separate block before the snippet
                    let v = g.pick(LIST_VARS);
                    let s = g.pick(STR_VARS);
                    let setup = g.setup_lines(op, v, s);
                    if !setup.is_empty() {
                        blocks.push(setup);
                    }
                }
                let b = g.block(op, blocks.is_empty());
                gold_span = Some(Span {
                    block_index: blocks.len(),
                    line_start: b.snippet.0,
                    line_end: b.snippet.1,
                });
                blocks.push(b.lines);
                answers.push(PlannedAnswer {
                    blocks,
                    accepted: gold_accepted,
                    score,
                });
            } else {
                let other = g.other_op(op_index);
                let b = g.block(&OPS[other], true);
                answers.push(PlannedAnswer {
                    blocks: vec![b.lines],
                    accepted: false,
                    score,
                });
            }
        }
        if !gold_accepted {
            let pick = (gold_pos + 1) % n_answers;
            answers[pick].accepted = true;
        }
        let views = g.rng.random_range(100..100_000);
        threads.push(emit(&mut w, qid, &title, views, answers));
        gold.push(Annotation {
            question_id: qid,
            answer_id: qid * 10 + gold_pos as u64 + 1,
            intent: title.clone(),
            intent_span: Some([0, title.chars().count()]),
            rewritten_intent: Some(op.intent.to_string()),
            context_spans: Vec::new(),
            snippet_spans: vec![gold_span.expect("gold answer generated")],
            status: Status::Ok,
            annotator: "synth".to_string(),
            timestamp: 0,
        });
    }

    for i in 0..cfg.unannotated {
        let qid = 5000 + i as u64;
        let op_index = g.rng.random_range(0..OPS.len());
        let op = &OPS[op_index];
        let title = g.title(op);
        let mut blocks = vec![g.block(op, true).lines];
        if g.rng.random_bool(0.1) {
            let extra = g.block(op, false).lines;
            blocks.push(extra);
        }
        let mut answers = vec![PlannedAnswer {
            blocks,
            accepted: g.rng.random_bool(0.85),
            score: g.rng.random_range(5..30),
        }];
        if g.rng.random_bool(0.4) {
            let other = g.other_op(op_index);
            answers.push(PlannedAnswer {
                blocks: vec![g.block(&OPS[other], true).lines],
                accepted: false,
                score: g.rng.random_range(0..10),
            });
        }
        let views = g.rng.random_range(10..50_000);
        threads.push(emit(&mut w, qid, &title, views, answers));
    }

    for i in 0..cfg.non_howto {
        let qid = 9000 + i as u64;
        let op = &OPS[g.rng.random_range(0..OPS.len())];
        let title = format!("Why does my code fail when I {}", op.intent);
        let answers = vec![PlannedAnswer {
            blocks: vec![g.block(op, true).lines],
            accepted: true,
            score: 3,
        }];
        threads.push(emit(&mut w, qid, &title, 50, answers));
    }

    w.xml.push_str("</posts>\n");
    SynthFixture {
        language,
        dump_xml: w.xml,
        threads,
        gold,
        single_block_accepted,
    }
}

/// Threads with one 4-line block each and one gold span per question, so
/// exactly 10% of the enumerated candidates are positive.
pub fn positive_rate_fixture(seed: u64, questions: usize) -> (Vec<QuestionThread>, Vec<Annotation>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut threads = Vec::new();
    let mut gold = Vec::new();
    for i in 0..questions {
        let qid = i as u64 + 1;
        let lines: Vec<String> = (0..4).map(|j| format!("x{j} = f{}({j})", rng.random_range(0..100))).collect();
        let start = rng.random_range(1..=4);
        let end = rng.random_range(start..=4);
        threads.push(QuestionThread {
            question_id: qid,
            title: format!("How to do task {qid}"),
            language: Language::new("python"),
            view_count: Some(1),
            answers: vec![AnswerEntry {
                answer_id: qid * 10,
                score: 1,
                accepted: rng.random_bool(0.5),
                rank: 1,
                blocks: vec![BlockEntry { index: 0, lines }],
            }],
        });
        gold.push(Annotation {
            question_id: qid,
            answer_id: qid * 10,
            intent: format!("do task {qid}"),
            intent_span: None,
            rewritten_intent: None,
            context_spans: Vec::new(),
            snippet_spans: vec![Span {
                block_index: 0,
                line_start: start,
                line_end: end,
            }],
            status: Status::Ok,
            annotator: "synth".to_string(),
            timestamp: 0,
        });
    }
    (threads, gold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{assemble_threads, build_corr_corpus, parse_dump};

    #[test]
    fn dump_round_trips_to_the_generated_threads() {
        for flavor in [Flavor::A, Flavor::B] {
            let mut cfg = SynthConfig::new(flavor, 3);
            cfg.unannotated = 40;
            let fx = generate(&cfg);
            let (posts, stats) = parse_dump(fx.dump_xml.as_bytes()).unwrap();
            assert_eq!(stats.skipped, 0);
            let (threads, _) = assemble_threads(posts, &fx.language);
            assert_eq!(threads, fx.threads);
            assert_eq!(build_corr_corpus(&threads).len(), fx.single_block_accepted);
        }
    }

    #[test]
    fn gold_validates_and_is_deterministic() {
        let cfg = SynthConfig::new(Flavor::B, 9);
        let a = generate(&cfg);
        let b = generate(&cfg);
        assert_eq!(a.dump_xml, b.dump_xml);
        assert_eq!(a.gold.len(), 20);
        for ann in &a.gold {
            let t = a.threads.iter().find(|t| t.question_id == ann.question_id).unwrap();
            assert_eq!(ann.validate(t), Ok(()));
        }
        assert_ne!(generate(&SynthConfig::new(Flavor::B, 10)).dump_xml, a.dump_xml);
    }

    #[test]
    fn positive_rate_fixture_gold_is_valid() {
        let (threads, gold) = positive_rate_fixture(1, 30);
        for (t, g) in threads.iter().zip(&gold) {
            assert_eq!(g.validate(t), Ok(()));
        }
    }
}
