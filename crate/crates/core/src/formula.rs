//! Boolean formulas used as hidden target functions: DNF, CNF, and plain OR,
//! with generators for each family of random instances and a compact text
//! format (`(x3 & x11) | (x9 & !x13)`).

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::rng_from;
use crate::{Error, Result};

/// A possibly negated variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Literal { var, negated: false }
    }

    pub fn neg(var: usize) -> Self {
        Literal { var, negated: true }
    }

    fn satisfied(&self, input: &[u8]) -> bool {
        let bit = input[self.var] != 0;
        bit != self.negated
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "!x{}", self.var)
        } else {
            write!(f, "x{}", self.var)
        }
    }
}

/// An ordered list of literals over distinct variables, kept sorted by
/// variable index so formulas compare and print deterministically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    pub fn new(mut literals: Vec<Literal>) -> Result<Self> {
        literals.sort_by_key(|l| l.var);
        if literals.windows(2).any(|w| w[0].var == w[1].var) {
            return Err(Error::Argument("variable repeated within a clause".into()));
        }
        Ok(Clause { literals })
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.literals.iter().map(|l| l.var)
    }

    /// Variables of the clause's negated literals.
    pub fn negated_vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.literals.iter().filter(|l| l.negated).map(|l| l.var)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormulaKind {
    Dnf,
    Cnf,
    Or,
}

impl fmt::Display for FormulaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormulaKind::Dnf => write!(f, "dnf"),
            FormulaKind::Cnf => write!(f, "cnf"),
            FormulaKind::Or => write!(f, "or"),
        }
    }
}

/// A two-level Boolean formula over `num_vars` variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Formula {
    kind: FormulaKind,
    num_vars: usize,
    clauses: Vec<Clause>,
}

impl Formula {
    pub fn new(kind: FormulaKind, num_vars: usize, clauses: Vec<Clause>) -> Result<Self> {
        for clause in &clauses {
            if kind == FormulaKind::Or && clause.len() != 1 {
                return Err(Error::Argument(
                    "OR formulas must have single-literal clauses".into(),
                ));
            }
            if let Some(v) = clause.vars().find(|&v| v >= num_vars) {
                return Err(Error::Argument(format!(
                    "variable x{v} out of range (num_vars={num_vars})"
                )));
            }
        }
        Ok(Formula { kind, num_vars, clauses })
    }

    pub fn kind(&self) -> FormulaKind {
        self.kind
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Truth value on a 0/1 input vector of length `num_vars`.
    ///
    /// DNF is the OR of clause-ANDs, CNF the AND of clause-ORs, OR the
    /// disjunction of its literals. An empty DNF/OR is false, an empty CNF
    /// true.
    pub fn eval(&self, input: &[u8]) -> Result<bool> {
        if input.len() != self.num_vars {
            return Err(Error::Dimension(format!(
                "input length {} != num_vars {}",
                input.len(),
                self.num_vars
            )));
        }
        Ok(match self.kind {
            FormulaKind::Dnf => self
                .clauses
                .iter()
                .any(|c| c.literals.iter().all(|l| l.satisfied(input))),
            FormulaKind::Cnf => self
                .clauses
                .iter()
                .all(|c| c.literals.iter().any(|l| l.satisfied(input))),
            FormulaKind::Or => self
                .clauses
                .iter()
                .any(|c| c.literals.iter().any(|l| l.satisfied(input))),
        })
    }

    /// Set of variables appearing in at least one clause.
    pub fn used_vars(&self) -> BTreeSet<usize> {
        self.clauses.iter().flat_map(|c| c.vars()).collect()
    }

    /// For formulas whose clauses are all 2-literal: each variable's partner.
    pub fn pair_partner(&self) -> Result<Vec<Option<usize>>> {
        let mut partner = vec![None; self.num_vars];
        for clause in &self.clauses {
            if clause.len() != 2 {
                return Err(Error::Argument("pair_partner requires 2-literal clauses".into()));
            }
            let a = clause.literals[0].var;
            let b = clause.literals[1].var;
            partner[a] = Some(b);
            partner[b] = Some(a);
        }
        Ok(partner)
    }

    /// Column order grouping each clause's variables together (clause by
    /// clause, then unused variables ascending). Used for sorted heat maps.
    pub fn clause_column_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = Vec::with_capacity(self.num_vars);
        let mut seen = vec![false; self.num_vars];
        for clause in &self.clauses {
            for v in clause.vars() {
                if !seen[v] {
                    seen[v] = true;
                    order.push(v);
                }
            }
        }
        for v in 0..self.num_vars {
            if !seen[v] {
                order.push(v);
            }
        }
        order
    }

    /// Inner DNF of the double-De-Morgan rewrite of a positive CNF: the DNF
    /// of negated literals whose negation equals the input formula, so
    /// `eval(cnf, x) == !eval(dual, x)` for every x.
    pub fn demorgan_dual(&self) -> Result<Formula> {
        if self.kind != FormulaKind::Cnf {
            return Err(Error::Argument("demorgan_dual requires a CNF formula".into()));
        }
        if self.clauses.iter().any(|c| c.literals.iter().any(|l| l.negated)) {
            return Err(Error::Argument("demorgan_dual requires positive literals".into()));
        }
        let clauses = self
            .clauses
            .iter()
            .map(|c| Clause::new(c.vars().map(Literal::neg).collect()))
            .collect::<Result<Vec<_>>>()?;
        Formula::new(FormulaKind::Dnf, self.num_vars, clauses)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (outer, inner) = match self.kind {
            FormulaKind::Dnf => (" | ", " & "),
            FormulaKind::Cnf => (" & ", " | "),
            FormulaKind::Or => (" | ", ""),
        };
        let mut first = true;
        for clause in &self.clauses {
            if !first {
                write!(f, "{outer}")?;
            }
            first = false;
            if self.kind == FormulaKind::Or {
                write!(f, "{}", clause.literals[0])?;
            } else {
                write!(f, "(")?;
                let lits: Vec<String> = clause.literals.iter().map(|l| l.to_string()).collect();
                write!(f, "{}", lits.join(inner))?;
                write!(f, ")")?;
            }
        }
        Ok(())
    }
}

/// Random DNF of `num_vars/2` pairwise ANDs where every variable appears in
/// exactly one clause.
pub fn random_paired_and(num_vars: usize, seed: u64) -> Result<Formula> {
    let perm = shuffled_vars(num_vars, seed)?;
    let clauses = perm
        .chunks(2)
        .map(|pair| Clause::new(vec![Literal::pos(pair[0]), Literal::pos(pair[1])]))
        .collect::<Result<Vec<_>>>()?;
    Formula::new(FormulaKind::Dnf, num_vars, clauses)
}

/// Random CNF of `num_vars/2` two-variable OR clauses partitioning the
/// variables.
pub fn random_cnf_pairs(num_vars: usize, seed: u64) -> Result<Formula> {
    let perm = shuffled_vars(num_vars, seed)?;
    let clauses = perm
        .chunks(2)
        .map(|pair| Clause::new(vec![Literal::pos(pair[0]), Literal::pos(pair[1])]))
        .collect::<Result<Vec<_>>>()?;
    Formula::new(FormulaKind::Cnf, num_vars, clauses)
}

fn shuffled_vars(num_vars: usize, seed: u64) -> Result<Vec<usize>> {
    if num_vars % 2 != 0 {
        return Err(Error::Argument(format!("num_vars must be even, got {num_vars}")));
    }
    let mut rng = rng_from(seed);
    let mut vars: Vec<usize> = (0..num_vars).collect();
    vars.shuffle(&mut rng);
    Ok(vars)
}

/// Random DNF with `k` clauses of `clause_size` distinct variables each,
/// exactly `negatives_per_clause` of them negated.
pub fn random_dnf(
    num_vars: usize,
    k: usize,
    clause_size: usize,
    negatives_per_clause: usize,
    seed: u64,
) -> Result<Formula> {
    if clause_size > num_vars {
        return Err(Error::Argument(format!(
            "clause_size {clause_size} exceeds num_vars {num_vars}"
        )));
    }
    if negatives_per_clause > clause_size {
        return Err(Error::Argument(format!(
            "negatives_per_clause {negatives_per_clause} exceeds clause_size {clause_size}"
        )));
    }
    let mut rng = rng_from(seed);
    let mut clauses = Vec::with_capacity(k);
    for _ in 0..k {
        let mut vars: Vec<usize> = (0..num_vars).collect();
        vars.shuffle(&mut rng);
        vars.truncate(clause_size);
        let mut negated = vec![false; clause_size];
        let mut positions: Vec<usize> = (0..clause_size).collect();
        positions.shuffle(&mut rng);
        for &p in positions.iter().take(negatives_per_clause) {
            negated[p] = true;
        }
        let literals = vars
            .iter()
            .zip(&negated)
            .map(|(&v, &n)| Literal { var: v, negated: n })
            .collect();
        clauses.push(Clause::new(literals)?);
    }
    Formula::new(FormulaKind::Dnf, num_vars, clauses)
}

/// Random DNF of `k` clauses of `clause_size` positive literals where no
/// variable appears in two clauses (requires `k * clause_size <= num_vars`).
pub fn random_disjoint_dnf(
    num_vars: usize,
    k: usize,
    clause_size: usize,
    seed: u64,
) -> Result<Formula> {
    if k * clause_size > num_vars {
        return Err(Error::Argument(format!(
            "{k} disjoint clauses of size {clause_size} need more than {num_vars} variables"
        )));
    }
    let mut rng = rng_from(seed);
    let mut vars: Vec<usize> = (0..num_vars).collect();
    vars.shuffle(&mut rng);
    let clauses = vars
        .chunks(clause_size)
        .take(k)
        .map(|chunk| Clause::new(chunk.iter().map(|&v| Literal::pos(v)).collect()))
        .collect::<Result<Vec<_>>>()?;
    Formula::new(FormulaKind::Dnf, num_vars, clauses)
}

/// The OR of all `num_vars` variables.
pub fn all_vars_or(num_vars: usize) -> Result<Formula> {
    let clauses = (0..num_vars)
        .map(|v| Clause::new(vec![Literal::pos(v)]))
        .collect::<Result<Vec<_>>>()?;
    Formula::new(FormulaKind::Or, num_vars, clauses)
}

/// The consecutive-four target as a DNF: the OR over all windows of the AND
/// of four consecutive variables.
pub fn consecutive_four_formula(num_vars: usize) -> Result<Formula> {
    if num_vars < 4 {
        return Err(Error::Argument("need at least 4 variables".into()));
    }
    let clauses = (0..=num_vars - 4)
        .map(|i| Clause::new((i..i + 4).map(Literal::pos).collect()))
        .collect::<Result<Vec<_>>>()?;
    Formula::new(FormulaKind::Dnf, num_vars, clauses)
}

// --- text format ---------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum Token {
    LParen,
    RParen,
    And,
    Or,
    Lit(usize, bool),
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b' ' | b'\t' => i += 1,
            b'(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            b')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            b'&' => {
                tokens.push(Token::And);
                i += 1;
            }
            b'|' => {
                tokens.push(Token::Or);
                i += 1;
            }
            b'!' | b'x' => {
                let negated = bytes[i] == b'!';
                if negated {
                    i += 1;
                    if i >= bytes.len() || bytes[i] != b'x' {
                        return Err(Error::Parse("expected 'x' after '!'".into()));
                    }
                }
                i += 1; // consume 'x'
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if start == i {
                    return Err(Error::Parse("expected variable index after 'x'".into()));
                }
                let var: usize = text[start..i]
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad variable index: {e}")))?;
                tokens.push(Token::Lit(var, negated));
            }
            c => return Err(Error::Parse(format!("unexpected character '{}'", c as char))),
        }
    }
    Ok(tokens)
}

/// Parse the text form back into a formula. `kind` and `num_vars` come from
/// the file header; the text itself carries only the clause structure.
pub fn parse_formula(kind: FormulaKind, num_vars: usize, text: &str) -> Result<Formula> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Formula::new(kind, num_vars, Vec::new());
    }
    let (outer, inner) = match kind {
        FormulaKind::Dnf => (Token::Or, Token::And),
        FormulaKind::Cnf => (Token::And, Token::Or),
        FormulaKind::Or => (Token::Or, Token::Or),
    };
    let mut clauses = Vec::new();
    let mut pos = 0;
    loop {
        let clause = parse_clause(&tokens, &mut pos, inner)?;
        clauses.push(clause);
        if pos == tokens.len() {
            break;
        }
        if tokens[pos] != outer {
            return Err(Error::Parse(format!("expected clause separator at token {pos}")));
        }
        pos += 1;
    }
    Formula::new(kind, num_vars, clauses)
}

fn parse_clause(tokens: &[Token], pos: &mut usize, inner: Token) -> Result<Clause> {
    let parenthesized = tokens.get(*pos) == Some(&Token::LParen);
    if parenthesized {
        *pos += 1;
    }
    let mut literals = Vec::new();
    loop {
        match tokens.get(*pos) {
            Some(&Token::Lit(var, negated)) => {
                literals.push(Literal { var, negated });
                *pos += 1;
            }
            _ => return Err(Error::Parse(format!("expected literal at token {}", *pos))),
        }
        if parenthesized {
            match tokens.get(*pos) {
                Some(&Token::RParen) => {
                    *pos += 1;
                    break;
                }
                Some(&t) if t == inner => *pos += 1,
                _ => return Err(Error::Parse(format!("expected ')' or operator at token {}", *pos))),
            }
        } else {
            // bare clause: single literal
            break;
        }
    }
    Clause::new(literals)
}

/// File form: a header line `# formula kind=<kind> num_vars=<n>` followed by
/// the formula text.
pub fn to_file_string(formula: &Formula) -> String {
    format!(
        "# formula kind={} num_vars={}\n{}\n",
        formula.kind(),
        formula.num_vars(),
        formula
    )
}

pub fn from_file_string(text: &str) -> Result<Formula> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty formula file".into()))?;
    let mut kind = None;
    let mut num_vars = None;
    for part in header.trim_start_matches('#').split_whitespace() {
        if let Some(v) = part.strip_prefix("kind=") {
            kind = Some(match v {
                "dnf" => FormulaKind::Dnf,
                "cnf" => FormulaKind::Cnf,
                "or" => FormulaKind::Or,
                other => return Err(Error::Parse(format!("unknown kind '{other}'"))),
            });
        } else if let Some(v) = part.strip_prefix("num_vars=") {
            num_vars = Some(v.parse().map_err(|e| Error::Parse(format!("bad num_vars: {e}")))?);
        }
    }
    let kind = kind.ok_or_else(|| Error::Parse("missing kind= in header".into()))?;
    let num_vars = num_vars.ok_or_else(|| Error::Parse("missing num_vars= in header".into()))?;
    let body: String = lines.collect::<Vec<_>>().join("\n");
    parse_formula(kind, num_vars, body.trim())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(num_vars: usize, ones: &[usize]) -> Vec<u8> {
        let mut v = vec![0u8; num_vars];
        for &i in ones {
            v[i] = 1;
        }
        v
    }

    #[test]
    fn eval_single_clause_dnf() {
        let f = Formula::new(
            FormulaKind::Dnf,
            16,
            vec![Clause::new(vec![Literal::pos(3), Literal::pos(11)]).unwrap()],
        )
        .unwrap();
        assert!(f.eval(&bits(16, &[3, 11])).unwrap());
        assert!(!f.eval(&bits(16, &[3])).unwrap());
    }

    #[test]
    fn eval_cnf_matches_truth_table() {
        // (x3 | x11) & (x9 | x12) checked against brute-force enumeration of
        // the four participating variables.
        let f = Formula::new(
            FormulaKind::Cnf,
            16,
            vec![
                Clause::new(vec![Literal::pos(3), Literal::pos(11)]).unwrap(),
                Clause::new(vec![Literal::pos(9), Literal::pos(12)]).unwrap(),
            ],
        )
        .unwrap();
        assert!(f.eval(&bits(16, &[3, 9])).unwrap());
        assert!(!f.eval(&bits(16, &[3])).unwrap());
        let vars = [3usize, 11, 9, 12];
        for mask in 0u32..16 {
            let mut input = vec![0u8; 16];
            for (i, &v) in vars.iter().enumerate() {
                input[v] = ((mask >> i) & 1) as u8;
            }
            let expected = (input[3] | input[11] != 0) && (input[9] | input[12] != 0);
            assert_eq!(f.eval(&input).unwrap(), expected, "mask {mask}");
        }
    }

    #[test]
    fn eval_rejects_wrong_length() {
        let f = random_paired_and(16, 1).unwrap();
        assert!(matches!(f.eval(&bits(15, &[])), Err(Error::Dimension(_))));
    }

    #[test]
    fn paired_and_uses_every_var_once() {
        let f = random_paired_and(16, 7).unwrap();
        assert_eq!(f.clauses().len(), 8);
        let mut counts = vec![0usize; 16];
        for clause in f.clauses() {
            assert_eq!(clause.len(), 2);
            for v in clause.vars() {
                counts[v] += 1;
            }
        }
        assert!(counts.iter().all(|&c| c == 1));
    }

    #[test]
    fn paired_and_small() {
        let f = random_paired_and(4, 3).unwrap();
        assert_eq!(f.clauses().len(), 2);
        assert!(random_paired_and(5, 3).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(random_paired_and(16, 9).unwrap(), random_paired_and(16, 9).unwrap());
        assert_eq!(
            random_dnf(32, 8, 4, 1, 5).unwrap(),
            random_dnf(32, 8, 4, 1, 5).unwrap()
        );
        assert_eq!(random_cnf_pairs(16, 2).unwrap(), random_cnf_pairs(16, 2).unwrap());
    }

    #[test]
    fn random_dnf_shapes() {
        let f = random_dnf(32, 8, 4, 0, 11).unwrap();
        assert_eq!(f.clauses().len(), 8);
        for c in f.clauses() {
            assert_eq!(c.len(), 4);
            assert_eq!(c.negated_vars().count(), 0);
        }
        let g = random_dnf(32, 2, 4, 1, 11).unwrap();
        for c in g.clauses() {
            assert_eq!(c.len(), 4);
            assert_eq!(c.negated_vars().count(), 1);
        }
        let empty = random_dnf(32, 0, 4, 0, 11).unwrap();
        assert!(!empty.eval(&vec![1u8; 32]).unwrap());
        assert!(random_dnf(4, 1, 5, 0, 1).is_err());
        assert!(random_dnf(8, 1, 4, 5, 1).is_err());
    }

    #[test]
    fn cnf_pairs_partition_and_all_ones_true() {
        let f = random_cnf_pairs(16, 13).unwrap();
        assert_eq!(f.clauses().len(), 8);
        let used: Vec<usize> = f.clauses().iter().flat_map(|c| c.vars()).collect();
        let mut sorted = used.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..16).collect::<Vec<_>>());
        assert!(f.eval(&vec![1u8; 16]).unwrap());
    }

    #[test]
    fn demorgan_dual_structure() {
        let cnf = Formula::new(
            FormulaKind::Cnf,
            12,
            vec![Clause::new(vec![Literal::pos(3), Literal::pos(11)]).unwrap()],
        )
        .unwrap();
        let dual = cnf.demorgan_dual().unwrap();
        assert_eq!(dual.kind(), FormulaKind::Dnf);
        assert_eq!(
            dual.clauses()[0].literals(),
            &[Literal::neg(3), Literal::neg(11)]
        );

        let empty = Formula::new(FormulaKind::Cnf, 4, vec![]).unwrap();
        assert_eq!(empty.demorgan_dual().unwrap().clauses().len(), 0);

        let dnf = random_paired_and(8, 1).unwrap();
        assert!(dnf.demorgan_dual().is_err());
    }

    #[test]
    fn demorgan_dual_equivalence_exhaustive() {
        let cnf = random_cnf_pairs(8, 21).unwrap();
        let dual = cnf.demorgan_dual().unwrap();
        for mask in 0u32..256 {
            let input: Vec<u8> = (0..8).map(|i| ((mask >> i) & 1) as u8).collect();
            assert_eq!(cnf.eval(&input).unwrap(), !dual.eval(&input).unwrap());
        }
    }

    #[test]
    fn text_roundtrip() {
        let f = random_dnf(32, 5, 4, 1, 17).unwrap();
        let text = f.to_string();
        let back = parse_formula(FormulaKind::Dnf, 32, &text).unwrap();
        assert_eq!(f, back);

        let c = random_cnf_pairs(16, 3).unwrap();
        let back = parse_formula(FormulaKind::Cnf, 16, &c.to_string()).unwrap();
        assert_eq!(c, back);

        let o = all_vars_or(8).unwrap();
        assert_eq!(o.to_string(), "x0 | x1 | x2 | x3 | x4 | x5 | x6 | x7");
        let back = parse_formula(FormulaKind::Or, 8, &o.to_string()).unwrap();
        assert_eq!(o, back);
    }

    #[test]
    fn file_roundtrip() {
        let f = random_dnf(32, 3, 4, 1, 23).unwrap();
        let back = from_file_string(&to_file_string(&f)).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn clause_column_order_groups_clause_vars_first() {
        let f = Formula::new(
            FormulaKind::Dnf,
            6,
            vec![Clause::new(vec![Literal::pos(4), Literal::pos(1)]).unwrap()],
        )
        .unwrap();
        assert_eq!(f.clause_column_order(), vec![1, 4, 0, 2, 3, 5]);
    }
}
