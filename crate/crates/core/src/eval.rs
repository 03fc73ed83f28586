//! Evaluation harness: file-level k-fold cross-validation, category
//! classification, top-k verb/noun correctness, and a seeded synthetic corpus
//! generator for desk-scale end-to-end checks.
//!
//! A recommendation for a test method counts as verb-correct when any of the
//! top-k candidate names carries the same verb part as the true name, and
//! noun-correct when any candidate shares at least one noun word. Methods are
//! grouped into three categories by how much the query (the callee name set)
//! gives away: getters/setters, methods whose query words contain a correct
//! word, and methods where they do not.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::acg::build_acg;
use crate::corpus::{ExtractedUnit, MethodRecord, SourceUnit};
use crate::embed::{train, EmbeddingTable, TrainConfig};
use crate::lexicon::{split_identifier, Lexicon};
use crate::recommend::recommend;
use crate::{Error, Result};

/// Correctness task: score the verb part or the noun part of a name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Verb,
    Noun,
}

/// Hint category of a test method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    /// Verb part is exactly `get` or `set`.
    GetterSetter,
    /// The query word set contains a correct verb (or noun).
    HintPresent,
    /// It does not; the hardest naming situation.
    HintAbsent,
}

/// correct / total counter pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub correct: u64,
    pub total: u64,
}

impl Counts {
    fn add(&mut self, correct: bool) {
        self.total += 1;
        if correct {
            self.correct += 1;
        }
    }

    pub fn merge(&mut self, other: Counts) {
        self.correct += other.correct;
        self.total += other.total;
    }

    pub fn ratio(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Per-category counters for one task, plus the merged non-getter rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CategoryCounts {
    pub getter_setter: Counts,
    pub hint_present: Counts,
    pub hint_absent: Counts,
    /// `hint_present` and `hint_absent` combined.
    pub merged: Counts,
}

impl CategoryCounts {
    fn add(&mut self, category: Category, correct: bool) {
        match category {
            Category::GetterSetter => self.getter_setter.add(correct),
            Category::HintPresent => {
                self.hint_present.add(correct);
                self.merged.add(correct);
            }
            Category::HintAbsent => {
                self.hint_absent.add(correct);
                self.merged.add(correct);
            }
        }
    }

    pub fn merge(&mut self, other: &CategoryCounts) {
        self.getter_setter.merge(other.getter_setter);
        self.hint_present.merge(other.hint_present);
        self.hint_absent.merge(other.hint_absent);
        self.merged.merge(other.merged);
    }

    pub fn task_total(&self) -> Counts {
        let mut all = Counts::default();
        all.merge(self.getter_setter);
        all.merge(self.hint_present);
        all.merge(self.hint_absent);
        all
    }
}

/// Methods dropped from scoring, by reason.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Exclusions {
    /// No callee name of the method is present in the embedding table
    /// (including methods with no callees at all): no query can be formed.
    pub no_known_callees: u64,
    /// Scoreable methods whose name has no verb part.
    pub no_verb: u64,
    /// Scoreable methods whose name has no noun words.
    pub no_noun: u64,
}

impl Exclusions {
    fn merge(&mut self, other: &Exclusions) {
        self.no_known_callees += other.no_known_callees;
        self.no_verb += other.no_verb;
        self.no_noun += other.no_noun;
    }
}

/// Counters for one cross-validation fold.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FoldReport {
    pub fold: usize,
    pub verb: CategoryCounts,
    pub noun: CategoryCounts,
}

/// Per-category counters aggregated over all folds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CategoryTotals {
    pub verb: CategoryCounts,
    pub noun: CategoryCounts,
}

/// Whole-corpus totals per task.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TaskTotals {
    pub verb: Counts,
    pub noun: Counts,
}

/// Full evaluation output.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub folds: Vec<FoldReport>,
    pub categories: CategoryTotals,
    pub tasks: TaskTotals,
    pub exclusions: Exclusions,
    /// Verb-task counts keyed by target verb; rendered as CSV, not JSON.
    #[serde(skip)]
    pub per_verb: BTreeMap<String, Counts>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        let mut json =
            serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        json.push('\n');
        json
    }

    /// Per-verb correctness as CSV, one row per target verb.
    pub fn per_verb_csv(&self) -> String {
        let mut csv = String::from("verb,correct,total\n");
        for (verb, counts) in &self.per_verb {
            let _ = writeln!(csv, "{verb},{},{}", counts.correct, counts.total);
        }
        csv
    }

    /// Plain-text table: one row per fold plus totals, one column per
    /// category, a percent and a fraction per cell.
    pub fn to_text(&self) -> String {
        fn cell(c: Counts) -> String {
            if c.total == 0 {
                "-       (0 / 0)".to_string()
            } else {
                format!("{:6.2}% ({} / {})", 100.0 * c.ratio(), c.correct, c.total)
            }
        }
        fn table(out: &mut String, task: &str, rows: &[(String, CategoryCounts)]) {
            let _ = writeln!(out, "== {task} task ==");
            let _ = writeln!(
                out,
                "{:<8}{:<28}{:<28}{:<28}{:<28}",
                "", "getter/setter", "hint present", "hint absent", "non-getter merged"
            );
            for (label, counts) in rows {
                let _ = writeln!(
                    out,
                    "{:<8}{:<28}{:<28}{:<28}{:<28}",
                    label,
                    cell(counts.getter_setter),
                    cell(counts.hint_present),
                    cell(counts.hint_absent),
                    cell(counts.merged)
                );
            }
        }
        let mut out = String::new();
        for (task, pick) in [
            ("verb", &(|f: &FoldReport| f.verb) as &dyn Fn(&FoldReport) -> CategoryCounts),
            ("noun", &|f: &FoldReport| f.noun),
        ] {
            let mut rows: Vec<(String, CategoryCounts)> = self
                .folds
                .iter()
                .map(|f| (format!("fold {}", f.fold), pick(f)))
                .collect();
            let total = if task == "verb" {
                self.categories.verb
            } else {
                self.categories.noun
            };
            rows.push(("total".to_string(), total));
            table(&mut out, task, &rows);
            let _ = writeln!(out);
        }
        let _ = writeln!(
            out,
            "excluded: {} without known callees, {} without a verb, {} without nouns",
            self.exclusions.no_known_callees, self.exclusions.no_verb, self.exclusions.no_noun
        );
        out
    }
}

/// Assign units to `k` folds: seeded shuffle, then round-robin. Every unit
/// lands in exactly one fold.
pub fn split_folds(units: &[SourceUnit], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidConfig("fold count must be >= 2".into()));
    }
    if units.len() < k {
        return Err(Error::TooFewUnits {
            units: units.len(),
            folds: k,
        });
    }
    Ok(fold_indices(units.len(), k, seed))
}

fn fold_indices(count: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (pos, unit) in order.into_iter().enumerate() {
        folds[pos % k].push(unit);
    }
    folds
}

/// Words available to the recommender for this method: the union of split
/// words over all callee names.
pub fn query_words(record: &MethodRecord) -> BTreeSet<String> {
    record
        .callees
        .iter()
        .flat_map(|c| split_identifier(c))
        .collect()
}

/// Hint category of a method under the given task.
pub fn categorize(record: &MethodRecord, task: Task, lexicon: &Lexicon) -> Category {
    let verb = lexicon.verb_of(&record.name);
    if matches!(verb.as_deref(), Some("get") | Some("set")) {
        return Category::GetterSetter;
    }
    let words = query_words(record);
    let hint = match task {
        Task::Verb => verb.map(|v| words.contains(&v)).unwrap_or(false),
        Task::Noun => !lexicon.nouns_of(&record.name).is_disjoint(&words),
    };
    if hint {
        Category::HintPresent
    } else {
        Category::HintAbsent
    }
}

#[derive(Debug, Clone, Default)]
struct MethodScore {
    no_known_callees: bool,
    /// (category, correct, target verb)
    verb: Option<(Category, bool, String)>,
    no_verb: bool,
    noun: Option<(Category, bool)>,
    no_noun: bool,
}

fn score_method(
    table: &EmbeddingTable,
    record: &MethodRecord,
    k: usize,
    lexicon: &Lexicon,
) -> MethodScore {
    let mut score = MethodScore::default();
    let list = match recommend(table, &record.callees, k) {
        Ok(list) => list,
        Err(_) => {
            score.no_known_callees = true;
            return score;
        }
    };
    let candidates: Vec<&str> = list.entries.iter().map(|c| c.name.as_str()).collect();

    match lexicon.verb_of(&record.name) {
        Some(target_verb) => {
            let correct = candidates
                .iter()
                .any(|c| lexicon.verb_of(c).as_deref() == Some(target_verb.as_str()));
            score.verb = Some((categorize(record, Task::Verb, lexicon), correct, target_verb));
        }
        None => score.no_verb = true,
    }

    let target_nouns = lexicon.nouns_of(&record.name);
    if target_nouns.is_empty() {
        score.no_noun = true;
    } else {
        let correct = candidates
            .iter()
            .any(|c| !lexicon.nouns_of(c).is_disjoint(&target_nouns));
        score.noun = Some((categorize(record, Task::Noun, lexicon), correct));
    }
    score
}

/// Fold-level scoring output.
#[derive(Debug, Clone, Default)]
pub struct FoldScores {
    pub verb: CategoryCounts,
    pub noun: CategoryCounts,
    pub exclusions: Exclusions,
    pub per_verb: BTreeMap<String, Counts>,
}

/// Score every test method against a trained table. Methods without a known
/// callee are excluded; methods without a verb (noun) are excluded from that
/// task only.
pub fn evaluate(
    table: &EmbeddingTable,
    test_methods: &[MethodRecord],
    k: usize,
    lexicon: &Lexicon,
    parallel: bool,
) -> FoldScores {
    let scores: Vec<MethodScore> = if parallel {
        test_methods
            .par_iter()
            .map(|r| score_method(table, r, k, lexicon))
            .collect()
    } else {
        test_methods
            .iter()
            .map(|r| score_method(table, r, k, lexicon))
            .collect()
    };

    let mut fold = FoldScores::default();
    for score in scores {
        if score.no_known_callees {
            fold.exclusions.no_known_callees += 1;
            continue;
        }
        if score.no_verb {
            fold.exclusions.no_verb += 1;
        }
        if score.no_noun {
            fold.exclusions.no_noun += 1;
        }
        if let Some((category, correct, target_verb)) = score.verb {
            fold.verb.add(category, correct);
            fold.per_verb.entry(target_verb).or_default().add(correct);
        }
        if let Some((category, correct)) = score.noun {
            fold.noun.add(category, correct);
        }
    }
    fold
}

/// Cross-validation configuration.
#[derive(Debug, Clone, Serialize)]
pub struct EvalConfig {
    pub folds: usize,
    pub top_k: usize,
    /// Seed for the fold assignment; fold `i` trains with
    /// `train.seed + i + 1`.
    pub seed: u64,
    pub train: TrainConfig,
    pub parallel: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 5,
            top_k: 10,
            seed: 1,
            train: TrainConfig::default(),
            parallel: false,
        }
    }
}

/// Evaluation output: the report plus the per-fold trained tables.
#[derive(Debug, Clone)]
pub struct EvaluationOutcome {
    pub report: EvaluationReport,
    pub fold_tables: Vec<EmbeddingTable>,
}

/// Run the full protocol: split units into folds, train on the complement of
/// each fold, score the fold's methods, and aggregate.
pub fn run_evaluation(
    extracted: &[ExtractedUnit],
    lexicon: &Lexicon,
    cfg: &EvalConfig,
) -> Result<EvaluationOutcome> {
    if cfg.folds < 2 {
        return Err(Error::InvalidConfig("fold count must be >= 2".into()));
    }
    if extracted.len() < cfg.folds {
        return Err(Error::TooFewUnits {
            units: extracted.len(),
            folds: cfg.folds,
        });
    }
    let folds = fold_indices(extracted.len(), cfg.folds, cfg.seed);

    let mut report = EvaluationReport::default();
    let mut fold_tables = Vec::with_capacity(cfg.folds);
    for (fold_no, fold) in folds.iter().enumerate() {
        let in_fold: BTreeSet<usize> = fold.iter().copied().collect();
        let train_records: Vec<MethodRecord> = extracted
            .iter()
            .enumerate()
            .filter(|(i, _)| !in_fold.contains(i))
            .flat_map(|(_, e)| e.records.iter().cloned())
            .collect();
        let test_records: Vec<MethodRecord> = fold
            .iter()
            .flat_map(|&i| extracted[i].records.iter().cloned())
            .collect();

        let graph = build_acg(&train_records);
        let train_cfg = TrainConfig {
            seed: cfg.train.seed.wrapping_add(fold_no as u64 + 1),
            ..cfg.train.clone()
        };
        let outcome = train(&graph, &train_cfg)?;

        let scores = evaluate(&outcome.table, &test_records, cfg.top_k, lexicon, cfg.parallel);
        report.categories.verb.merge(&scores.verb);
        report.categories.noun.merge(&scores.noun);
        report.exclusions.merge(&scores.exclusions);
        for (verb, counts) in &scores.per_verb {
            report.per_verb.entry(verb.clone()).or_default().merge(*counts);
        }
        report.folds.push(FoldReport {
            fold: fold_no + 1,
            verb: scores.verb,
            noun: scores.noun,
        });
        fold_tables.push(outcome.table);
    }
    report.tasks.verb = report.categories.verb.task_total();
    report.tasks.noun = report.categories.noun.task_total();
    Ok(EvaluationOutcome {
        report,
        fold_tables,
    })
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

/// One planned method of the synthetic corpus; the generator's plan doubles
/// as the extraction oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedMethod {
    pub family: usize,
    pub name: String,
    pub path: String,
    pub package_name: String,
    pub callees: BTreeSet<String>,
}

/// Generated corpus plus its plan.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub units: Vec<SourceUnit>,
    pub plan: Vec<PlannedMethod>,
}

impl SyntheticCorpus {
    /// All names belonging to one family: its method names plus its private
    /// callee pool.
    pub fn family_names(&self, family: usize) -> BTreeSet<String> {
        let mut names = BTreeSet::new();
        for method in self.plan.iter().filter(|m| m.family == family) {
            names.insert(method.name.clone());
            names.extend(method.callees.iter().cloned());
        }
        names
    }
}

const FAMILY_VERBS: &[&str] = &[
    "save", "load", "parse", "merge", "sort", "copy", "send", "fetch", "encode", "filter", "scan",
    "split", "trim", "push", "pull", "render", "apply", "verify", "export", "import", "sync",
    "flush", "clamp", "wrap", "emit", "track",
];

const FAMILY_NOUNS: &[&str] = &[
    "record", "header", "token", "bundle", "frame", "packet", "widget", "layout", "ledger",
    "cursor", "banner", "socket", "palette", "matrix", "tensor", "glyph", "prism", "quartz",
    "ribbon", "saddle", "tunnel", "valley", "willow", "zephyr", "garnet", "harbor",
];

const GREEK: &[&str] = &[
    "Alpha", "Beta", "Gamma", "Delta", "Epsilon", "Zeta", "Eta", "Theta", "Iota", "Kappa",
    "Lambda", "Mu", "Nu", "Xi", "Omicron", "Pi", "Rho", "Sigma", "Tau", "Upsilon", "Phi", "Chi",
    "Psi", "Omega",
];

fn variant_suffix(index: usize) -> String {
    let base = GREEK[index % GREEK.len()];
    let round = index / GREEK.len();
    if round == 0 {
        base.to_string()
    } else {
        format!("{base}{}", GREEK[(round - 1) % GREEK.len()])
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Generate a synthetic corpus. Family `i` owns a verb, a noun and a private
/// pool of `callee_pool_size` callee names; each of its `methods_per_family`
/// methods calls a random nonempty subset of the pool. The methods spread
/// over up to five files per family so that file-level fold splits leave
/// every family partly in the training side. Deterministic for a fixed seed.
pub fn generate_synthetic_corpus(
    families: usize,
    methods_per_family: usize,
    callee_pool_size: usize,
    seed: u64,
) -> Result<SyntheticCorpus> {
    if families < 2 {
        return Err(Error::InvalidConfig("at least 2 families required".into()));
    }
    if families > FAMILY_VERBS.len() {
        return Err(Error::InvalidConfig(format!(
            "at most {} families supported",
            FAMILY_VERBS.len()
        )));
    }
    if methods_per_family < 1 || callee_pool_size < 1 {
        return Err(Error::InvalidConfig(
            "methods per family and pool size must be >= 1".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut units = Vec::new();
    let mut plan = Vec::with_capacity(families * methods_per_family);

    for family in 0..families {
        let verb = FAMILY_VERBS[family];
        let noun = FAMILY_NOUNS[family];
        let pool: Vec<String> = (0..callee_pool_size)
            .map(|p| format!("{noun}{}", variant_suffix(p)))
            .collect();

        let package_name = format!("synth.{noun}");
        let file_count = methods_per_family.min(5);
        let class_names: Vec<String> = (0..file_count)
            .map(|k| format!("{}Service{}", capitalize(noun), GREEK[k]))
            .collect();
        let paths: Vec<String> = class_names
            .iter()
            .map(|c| format!("synth/{c}.java"))
            .collect();
        let mut file_methods: Vec<Vec<(String, BTreeSet<String>)>> = vec![Vec::new(); file_count];

        for m in 0..methods_per_family {
            let name = format!("{verb}{}{}", capitalize(noun), variant_suffix(m));
            let low = 3.min(callee_pool_size);
            let high = 8.min(callee_pool_size);
            let count = rng.random_range(low..=high).max(1);
            let mut picks: Vec<usize> = (0..callee_pool_size).collect();
            picks.shuffle(&mut rng);
            let callees: BTreeSet<String> =
                picks.into_iter().take(count).map(|p| pool[p].clone()).collect();

            let file = m % file_count;
            file_methods[file].push((name.clone(), callees.clone()));
            plan.push(PlannedMethod {
                family,
                name,
                path: paths[file].clone(),
                package_name: package_name.clone(),
                callees,
            });
        }

        for (file, methods) in file_methods.into_iter().enumerate() {
            let mut body = String::new();
            let _ = writeln!(body, "package {package_name};");
            let _ = writeln!(body);
            let _ = writeln!(body, "class {} {{", class_names[file]);
            for (pos, (name, callees)) in methods.iter().enumerate() {
                let _ = writeln!(body, "    void {name}() {{");
                for callee in callees {
                    let _ = writeln!(body, "        {callee}();");
                }
                let _ = writeln!(body, "    }}");
                if pos + 1 < methods.len() {
                    let _ = writeln!(body);
                }
            }
            let _ = writeln!(body, "}}");
            units.push(SourceUnit::new(paths[file].clone(), body));
        }
    }
    units.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(SyntheticCorpus { units, plan })
}
