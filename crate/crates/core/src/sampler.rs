//! Labeled input generation for each training distribution. Every emitted
//! label is validated against the formula oracle at generation time; hard
//! true-bit-count constraints hold for 100% of samples, not just in
//! expectation.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::formula::{Formula, FormulaKind};
use crate::rng::rng_from;
use crate::{Error, Result};

/// Retry budget for rejection loops (negatives that accidentally come out
/// true, infeasible multi-output combinations).
const RETRY_CAP: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    /// 0/1 input bits, length `num_vars`.
    pub input: Vec<u8>,
    /// 0/1 labels, one per output.
    pub labels: Vec<u8>,
}

impl Sample {
    pub fn ones(&self) -> usize {
        self.input.iter().filter(|&&b| b != 0).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub num_vars: usize,
    pub num_outputs: usize,
    /// Distribution descriptor, e.g. `paired`, `dnf4`, `consecutive_four`.
    pub spec: String,
    pub seed: u64,
    pub samples: Vec<Sample>,
    /// Multi-output combinations abandoned after the retry cap (the sample
    /// was regenerated with a fresh combination).
    pub skipped_combinations: u64,
}

impl Dataset {
    fn new(num_vars: usize, num_outputs: usize, spec: &str, seed: u64) -> Self {
        Dataset {
            num_vars,
            num_outputs,
            spec: spec.to_string(),
            seed,
            samples: Vec::new(),
            skipped_combinations: 0,
        }
    }

    fn push_checked(&mut self, input: Vec<u8>, formulas: &[&Formula]) -> Result<()> {
        let labels = formulas
            .iter()
            .map(|f| f.eval(&input).map(u8::from))
            .collect::<Result<Vec<u8>>>()?;
        self.samples.push(Sample { input, labels });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Fraction of samples whose first label is 1.
    pub fn positive_rate(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let pos = self.samples.iter().filter(|s| s.labels[0] != 0).count();
        pos as f64 / self.samples.len() as f64
    }

    /// One record per line: input bits, tab, labels; header carries the
    /// dimensions, spec name, and seed.
    pub fn to_file_string(&self) -> String {
        let mut out = format!(
            "# dataset num_vars={} outputs={} spec={} seed={}\n",
            self.num_vars, self.num_outputs, self.spec, self.seed
        );
        for s in &self.samples {
            for &b in &s.input {
                out.push(if b != 0 { '1' } else { '0' });
            }
            out.push('\t');
            for &b in &s.labels {
                out.push(if b != 0 { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_file_string(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty dataset file".into()))?;
        let mut num_vars = None;
        let mut outputs = None;
        let mut spec = String::new();
        let mut seed = 0u64;
        for part in header.trim_start_matches('#').split_whitespace() {
            if let Some(v) = part.strip_prefix("num_vars=") {
                num_vars = Some(v.parse().map_err(|e| Error::Parse(format!("bad num_vars: {e}")))?);
            } else if let Some(v) = part.strip_prefix("outputs=") {
                outputs = Some(v.parse().map_err(|e| Error::Parse(format!("bad outputs: {e}")))?);
            } else if let Some(v) = part.strip_prefix("spec=") {
                spec = v.to_string();
            } else if let Some(v) = part.strip_prefix("seed=") {
                seed = v.parse().map_err(|e| Error::Parse(format!("bad seed: {e}")))?;
            }
        }
        let num_vars = num_vars.ok_or_else(|| Error::Parse("missing num_vars=".into()))?;
        let num_outputs = outputs.ok_or_else(|| Error::Parse("missing outputs=".into()))?;
        let mut ds = Dataset::new(num_vars, num_outputs, &spec, seed);
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (inp, lab) = line
                .split_once('\t')
                .ok_or_else(|| Error::Parse(format!("line {}: missing tab", i + 2)))?;
            let parse_bits = |s: &str| -> Result<Vec<u8>> {
                s.chars()
                    .map(|c| match c {
                        '0' => Ok(0u8),
                        '1' => Ok(1u8),
                        other => Err(Error::Parse(format!("line {}: bad bit '{other}'", i + 2))),
                    })
                    .collect()
            };
            let input = parse_bits(inp)?;
            let labels = parse_bits(lab)?;
            if input.len() != num_vars || labels.len() != num_outputs {
                return Err(Error::Parse(format!("line {}: wrong record width", i + 2)));
            }
            ds.samples.push(Sample { input, labels });
        }
        Ok(ds)
    }
}

/// Distinct extra variables drawn uniformly from `candidates`.
fn choose_extra(rng: &mut ChaCha8Rng, candidates: &[usize], count: usize) -> Vec<usize> {
    candidates.choose_multiple(rng, count).copied().collect()
}

/// Paired-AND task inputs: a fair label coin, between two and six true bits,
/// positives satisfy a uniformly chosen pair clause.
pub fn sample_paired(formula: &Formula, n: usize, seed: u64) -> Result<Dataset> {
    if formula.kind() != FormulaKind::Dnf || formula.clauses().iter().any(|c| c.len() != 2) {
        return Err(Error::Argument("sample_paired expects a paired-AND DNF".into()));
    }
    let num_vars = formula.num_vars();
    let mut rng = rng_from(seed);
    let mut ds = Dataset::new(num_vars, 1, "paired", seed);
    for _ in 0..n {
        let want_positive = rng.gen_bool(0.5);
        let input = if want_positive {
            let clause = formula.clauses().choose(&mut rng).unwrap();
            let mut input = vec![0u8; num_vars];
            for v in clause.vars() {
                input[v] = 1;
            }
            let total = rng.gen_range(2..=6usize);
            let candidates: Vec<usize> =
                (0..num_vars).filter(|v| input[*v] == 0).collect();
            for v in choose_extra(&mut rng, &candidates, total - 2) {
                input[v] = 1;
            }
            input
        } else {
            let mut found = None;
            for _ in 0..RETRY_CAP {
                let total = rng.gen_range(2..=6usize);
                let all: Vec<usize> = (0..num_vars).collect();
                let mut input = vec![0u8; num_vars];
                for v in choose_extra(&mut rng, &all, total) {
                    input[v] = 1;
                }
                if !formula.eval(&input)? {
                    found = Some(input);
                    break;
                }
            }
            found.ok_or_else(|| {
                Error::Generation("paired negative sampling exhausted retries".into())
            })?
        };
        ds.push_checked(input, &[formula])?;
    }
    Ok(ds)
}

/// Four-variable-clause DNF inputs: positives satisfy one clause plus up to
/// two extra set bits; negatives satisfy exactly three of a clause's four
/// literals with four to six total set bits, re-drawn if accidentally true.
pub fn sample_dnf4(formula: &Formula, n: usize, seed: u64) -> Result<Dataset> {
    if formula.kind() != FormulaKind::Dnf
        || formula.clauses().is_empty()
        || formula.clauses().iter().any(|c| c.len() != 4)
        || formula.clauses().iter().any(|c| c.negated_vars().count() > 1)
    {
        return Err(Error::Argument(
            "sample_dnf4 expects a DNF of 4-literal clauses with at most one negation each".into(),
        ));
    }
    let num_vars = formula.num_vars();
    let mut rng = rng_from(seed);
    let mut ds = Dataset::new(num_vars, 1, "dnf4", seed);
    for _ in 0..n {
        let want_positive = rng.gen_bool(0.5);
        let input = if want_positive {
            let clause = formula.clauses().choose(&mut rng).unwrap();
            let mut input = vec![0u8; num_vars];
            for lit in clause.literals() {
                if !lit.negated {
                    input[lit.var] = 1;
                }
            }
            // Extras stay outside the clause so its satisfiability is
            // preserved (never sets a negated-literal variable).
            let extras = rng.gen_range(0..=2usize);
            let in_clause: Vec<bool> = {
                let mut m = vec![false; num_vars];
                for v in clause.vars() {
                    m[v] = true;
                }
                m
            };
            let candidates: Vec<usize> = (0..num_vars).filter(|&v| !in_clause[v]).collect();
            for v in choose_extra(&mut rng, &candidates, extras) {
                input[v] = 1;
            }
            input
        } else {
            let mut found = None;
            for _ in 0..RETRY_CAP {
                let clause = formula.clauses().choose(&mut rng).unwrap();
                let omit = rng.gen_range(0..clause.len());
                let mut input = vec![0u8; num_vars];
                for (i, lit) in clause.literals().iter().enumerate() {
                    if i == omit {
                        // break this literal: positive stays 0, negated gets set
                        if lit.negated {
                            input[lit.var] = 1;
                        }
                    } else if !lit.negated {
                        input[lit.var] = 1;
                    }
                }
                let ones = input.iter().filter(|&&b| b != 0).count();
                let total = rng.gen_range(ones.max(4)..=6usize);
                let in_clause: Vec<bool> = {
                    let mut m = vec![false; num_vars];
                    for v in clause.vars() {
                        m[v] = true;
                    }
                    m
                };
                let candidates: Vec<usize> =
                    (0..num_vars).filter(|&v| !in_clause[v] && input[v] == 0).collect();
                for v in choose_extra(&mut rng, &candidates, total - ones) {
                    input[v] = 1;
                }
                if !formula.eval(&input)? {
                    found = Some(input);
                    break;
                }
            }
            found.ok_or_else(|| {
                Error::Generation("dnf4 negative sampling exhausted retries".into())
            })?
        };
        ds.push_checked(input, &[formula])?;
    }
    Ok(ds)
}

/// All-variables-OR task: i.i.d. Bernoulli(0.043) bits, label is the OR.
pub fn sample_or(num_vars: usize, n: usize, seed: u64) -> Result<Dataset> {
    let formula = crate::formula::all_vars_or(num_vars)?;
    let mut rng = rng_from(seed);
    let mut ds = Dataset::new(num_vars, 1, "or", seed);
    for _ in 0..n {
        let input: Vec<u8> = (0..num_vars).map(|_| u8::from(rng.gen_bool(0.043))).collect();
        ds.push_checked(input, &[&formula])?;
    }
    Ok(ds)
}

/// CNF task: i.i.d. Bernoulli(0.75) bits, label from the oracle.
pub fn sample_cnf(formula: &Formula, n: usize, seed: u64) -> Result<Dataset> {
    if formula.kind() != FormulaKind::Cnf {
        return Err(Error::Argument("sample_cnf expects a CNF formula".into()));
    }
    let num_vars = formula.num_vars();
    let mut rng = rng_from(seed);
    let mut ds = Dataset::new(num_vars, 1, "cnf", seed);
    for _ in 0..n {
        let input: Vec<u8> = (0..num_vars).map(|_| u8::from(rng.gen_bool(0.75))).collect();
        ds.push_checked(input, &[formula])?;
    }
    Ok(ds)
}

/// Start positions of all runs of `run` consecutive ones (a 5-run yields two
/// positions).
pub fn run_positions(input: &[u8], run: usize) -> Vec<usize> {
    if input.len() < run {
        return Vec::new();
    }
    (0..=input.len() - run)
        .filter(|&i| input[i..i + run].iter().all(|&b| b != 0))
        .collect()
}

/// Consecutive-four vision inputs: six ones inside a random 8-wide window;
/// positives contain a 4-run, negatives a broken 3-of-4 plus three extras,
/// falling back to all zeros after 20 failed attempts.
pub fn sample_consecutive_four(num_vars: usize, n: usize, seed: u64) -> Result<Dataset> {
    if num_vars < 8 {
        return Err(Error::Argument("consecutive_four needs at least 8 variables".into()));
    }
    let formula = crate::formula::consecutive_four_formula(num_vars)?;
    let mut rng = rng_from(seed);
    let mut ds = Dataset::new(num_vars, 1, "consecutive_four", seed);
    for _ in 0..n {
        let want_positive = rng.gen_bool(0.5);
        let window = rng.gen_range(0..=num_vars - 8);
        let input = if want_positive {
            let run_start = window + rng.gen_range(0..=4usize);
            let mut input = vec![0u8; num_vars];
            for v in run_start..run_start + 4 {
                input[v] = 1;
            }
            let candidates: Vec<usize> =
                (window..window + 8).filter(|&v| input[v] == 0).collect();
            for v in choose_extra(&mut rng, &candidates, 2) {
                input[v] = 1;
            }
            input
        } else {
            let mut accepted = None;
            for _ in 0..20 {
                let run_start = window + rng.gen_range(0..=4usize);
                let omit = run_start + rng.gen_range(0..4usize);
                let mut input = vec![0u8; num_vars];
                for v in run_start..run_start + 4 {
                    if v != omit {
                        input[v] = 1;
                    }
                }
                let candidates: Vec<usize> =
                    (window..window + 8).filter(|&v| input[v] == 0).collect();
                for v in choose_extra(&mut rng, &candidates, 3) {
                    input[v] = 1;
                }
                if run_positions(&input, 4).is_empty() {
                    accepted = Some(input);
                    break;
                }
            }
            accepted.unwrap_or_else(|| vec![0u8; num_vars])
        };
        ds.push_checked(input, &[&formula])?;
    }
    Ok(ds)
}

/// Multi-output inputs: target combination uniform over all output patterns,
/// eight to ten true bits, satisfied outputs get a whole clause, unsatisfied
/// outputs get a broken one; oracle-mismatched attempts are re-drawn.
pub fn sample_multi(formulas: &[Formula], n: usize, seed: u64) -> Result<Dataset> {
    if formulas.is_empty() {
        return Err(Error::Argument("sample_multi needs at least one formula".into()));
    }
    let num_vars = formulas[0].num_vars();
    if formulas.iter().any(|f| f.num_vars() != num_vars) {
        return Err(Error::Dimension("formulas disagree on num_vars".into()));
    }
    let refs: Vec<&Formula> = formulas.iter().collect();
    let o = formulas.len();
    let mut rng = rng_from(seed);
    let mut ds = Dataset::new(num_vars, o, "multi", seed);
    while ds.samples.len() < n {
        let combo: Vec<u8> = (0..o).map(|_| u8::from(rng.gen_bool(0.5))).collect();
        let mut built = None;
        'attempts: for _ in 0..RETRY_CAP {
            let mut input = vec![0u8; num_vars];
            let mut forbidden = vec![false; num_vars];
            for (t, formula) in formulas.iter().enumerate() {
                let clause = match formula.clauses().choose(&mut rng) {
                    Some(c) => c,
                    None => continue 'attempts,
                };
                if combo[t] != 0 {
                    for lit in clause.literals() {
                        if lit.negated {
                            if input[lit.var] != 0 {
                                continue 'attempts;
                            }
                            forbidden[lit.var] = true;
                        } else {
                            if forbidden[lit.var] {
                                continue 'attempts;
                            }
                            input[lit.var] = 1;
                        }
                    }
                } else {
                    let omit = rng.gen_range(0..clause.len());
                    for (i, lit) in clause.literals().iter().enumerate() {
                        if i == omit {
                            if !lit.negated {
                                forbidden[lit.var] = true;
                            } else if !forbidden[lit.var] {
                                input[lit.var] = 1;
                            }
                        } else if !lit.negated {
                            if forbidden[lit.var] {
                                continue 'attempts;
                            }
                            input[lit.var] = 1;
                        } else {
                            if input[lit.var] != 0 {
                                continue 'attempts;
                            }
                            forbidden[lit.var] = true;
                        }
                    }
                }
            }
            let ones = input.iter().filter(|&&b| b != 0).count();
            if ones > 10 {
                continue 'attempts;
            }
            let target = rng.gen_range(ones.max(8)..=10usize);
            let candidates: Vec<usize> =
                (0..num_vars).filter(|&v| input[v] == 0 && !forbidden[v]).collect();
            if candidates.len() < target - ones {
                continue 'attempts;
            }
            for v in choose_extra(&mut rng, &candidates, target - ones) {
                input[v] = 1;
            }
            let ok = formulas
                .iter()
                .zip(&combo)
                .try_fold(true, |acc, (f, &want)| {
                    f.eval(&input).map(|got| acc && (u8::from(got) == want))
                })?;
            if ok {
                built = Some(input);
                break;
            }
        }
        match built {
            Some(input) => ds.push_checked(input, &refs)?,
            None => {
                ds.skipped_combinations += 1;
                if ds.skipped_combinations > 10 * n as u64 + 100 {
                    return Err(Error::Generation(
                        "multi-output sampling exhausted retries".into(),
                    ));
                }
            }
        }
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{random_cnf_pairs, random_dnf, random_paired_and};

    #[test]
    fn paired_balance_and_ranges() {
        let formula = random_paired_and(16, 41).unwrap();
        let ds = sample_paired(&formula, 4000, 42).unwrap();
        assert_eq!(ds.len(), 4000);
        let rate = ds.positive_rate();
        assert!((0.45..=0.55).contains(&rate), "positive rate {rate}");
        for s in &ds.samples {
            let ones = s.ones();
            assert!((2..=6).contains(&ones), "ones {ones}");
            assert_eq!(s.labels[0] != 0, formula.eval(&s.input).unwrap());
        }
    }

    #[test]
    fn paired_deterministic() {
        let formula = random_paired_and(16, 1).unwrap();
        let a = sample_paired(&formula, 200, 9).unwrap();
        let b = sample_paired(&formula, 200, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_file_string(), b.to_file_string());
    }

    #[test]
    fn empty_dataset() {
        let formula = random_paired_and(16, 1).unwrap();
        let ds = sample_paired(&formula, 0, 9).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn dnf4_constraints() {
        let formula = random_dnf(32, 8, 4, 0, 77).unwrap();
        let ds = sample_dnf4(&formula, 20000, 78).unwrap();
        let rate = ds.positive_rate();
        assert!((0.48..=0.52).contains(&rate), "positive rate {rate}");
        for s in &ds.samples {
            assert_eq!(s.labels[0] != 0, formula.eval(&s.input).unwrap());
            if s.labels[0] == 0 {
                let ones = s.ones();
                assert!((4..=6).contains(&ones), "negative ones {ones}");
            }
        }
    }

    #[test]
    fn dnf4_with_negated_literal() {
        let formula = random_dnf(32, 8, 4, 1, 5).unwrap();
        let ds = sample_dnf4(&formula, 2000, 6).unwrap();
        for s in &ds.samples {
            assert_eq!(s.labels[0] != 0, formula.eval(&s.input).unwrap());
        }
    }

    #[test]
    fn or_rate_near_half() {
        let ds = sample_or(16, 10000, 3).unwrap();
        let rate = ds.positive_rate();
        // 1 - (1-0.043)^16 ~= 0.505
        assert!((0.45..=0.56).contains(&rate), "positive rate {rate}");
        let zero = Sample { input: vec![0u8; 16], labels: vec![0] };
        assert_eq!(zero.labels[0], 0);
    }

    #[test]
    fn cnf_rate_matches_closed_form() {
        let formula = random_cnf_pairs(16, 11).unwrap();
        let ds = sample_cnf(&formula, 10000, 12).unwrap();
        // (1 - 0.25^2)^8 ~= 0.596
        let expect = (1.0f64 - 0.25 * 0.25).powi(8);
        let rate = ds.positive_rate();
        assert!((rate - expect).abs() < 0.03, "rate {rate} vs {expect}");
        assert!(formula.eval(&vec![1u8; 16]).unwrap());
        for s in ds.samples.iter().take(500) {
            assert_eq!(s.labels[0] != 0, formula.eval(&s.input).unwrap());
        }
    }

    #[test]
    fn consecutive_four_structure() {
        let ds = sample_consecutive_four(128, 3000, 8).unwrap();
        for s in &ds.samples {
            let runs = run_positions(&s.input, 4);
            assert_eq!(s.labels[0] != 0, !runs.is_empty());
            if s.labels[0] != 0 {
                assert_eq!(s.ones(), 6);
            }
        }
    }

    #[test]
    fn run_positions_counts_overlaps() {
        let mut input = vec![0u8; 16];
        for v in 4..9 {
            input[v] = 1;
        }
        assert_eq!(run_positions(&input, 4), vec![4, 5]);
        assert!(run_positions(&vec![0u8; 16], 4).is_empty());
    }

    #[test]
    fn multi_combination_balance() {
        let f0 = random_dnf(32, 8, 4, 0, 100).unwrap();
        let f1 = random_dnf(32, 8, 4, 0, 101).unwrap();
        let ds = sample_multi(&[f0.clone(), f1.clone()], 8000, 102).unwrap();
        let mut combo_counts = [0usize; 4];
        for s in &ds.samples {
            let ones = s.ones();
            assert!((8..=10).contains(&ones), "ones {ones}");
            assert_eq!(s.labels[0] != 0, f0.eval(&s.input).unwrap());
            assert_eq!(s.labels[1] != 0, f1.eval(&s.input).unwrap());
            combo_counts[(s.labels[0] * 2 + s.labels[1]) as usize] += 1;
        }
        for &c in &combo_counts {
            let frac = c as f64 / ds.len() as f64;
            assert!((0.2..=0.3).contains(&frac), "combo fraction {frac}");
        }
    }

    #[test]
    fn dataset_file_roundtrip() {
        let formula = random_paired_and(16, 2).unwrap();
        let ds = sample_paired(&formula, 50, 3).unwrap();
        let text = ds.to_file_string();
        let back = Dataset::from_file_string(&text).unwrap();
        assert_eq!(ds.num_vars, back.num_vars);
        assert_eq!(ds.samples, back.samples);
    }
}
