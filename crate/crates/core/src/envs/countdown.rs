//! Countdown: combine the given numbers with `+ − × ÷` to reach a target.
//!
//! An answer is an ordered list of binary steps `lhs op rhs = result`. Every
//! operand must be taken from the pool of still-available numbers (the initial
//! numbers plus earlier results, each consumed at most once). Intermediate
//! values are positive integers and division must be exact. Not every number
//! has to be used; the answer is correct when the last step's result equals
//! the target.
//!
//! Token alphabet: the ten digits, the four operators, `=`, the step
//! separator `;` and an end marker.

use std::collections::HashSet;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Level, Token, Verdict};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

impl Op {
    pub const ALL: [Op; 4] = [Op::Add, Op::Sub, Op::Mul, Op::Div];

    /// The exact result, if it is a positive integer.
    pub fn apply(self, a: u64, b: u64) -> Option<u64> {
        match self {
            Op::Add => a.checked_add(b),
            Op::Sub => (a > b).then(|| a - b),
            Op::Mul => a.checked_mul(b).filter(|&v| v > 0),
            Op::Div => (b != 0 && a % b == 0 && a / b > 0).then(|| a / b),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Op::Add => '+',
            Op::Sub => '-',
            Op::Mul => '*',
            Op::Div => '/',
        }
    }

    pub fn from_symbol(c: char) -> Option<Op> {
        match c {
            '+' => Some(Op::Add),
            '-' => Some(Op::Sub),
            '*' | 'x' | '×' => Some(Op::Mul),
            '/' | '÷' => Some(Op::Div),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub lhs: u64,
    pub op: Op,
    pub rhs: u64,
    pub result: u64,
}

impl std::fmt::Display for Step {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}{}={}", self.lhs, self.op.symbol(), self.rhs, self.result)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountdownTask {
    pub numbers: Vec<u64>,
    pub target: u64,
    pub level: Level,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountdownAnswer {
    pub steps: Vec<Step>,
}

impl std::fmt::Display for CountdownAnswer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for CountdownAnswer {
    type Err = String;

    /// Parses `a+b=c;c*d=e`. Arithmetic is not checked here.
    fn from_str(s: &str) -> Result<Self, String> {
        let mut steps = Vec::new();
        for part in s.split(';').map(str::trim) {
            let (expr, result) = part
                .split_once('=')
                .ok_or_else(|| format!("step `{part}` has no `=`"))?;
            let op_pos = expr
                .char_indices()
                .skip(1)
                .find(|(_, c)| Op::from_symbol(*c).is_some())
                .map(|(i, _)| i)
                .ok_or_else(|| format!("step `{part}` has no operator"))?;
            let op = Op::from_symbol(expr[op_pos..].chars().next().unwrap()).unwrap();
            let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("`{t}`: {e}"));
            steps.push(Step {
                lhs: num(&expr[..op_pos])?,
                op,
                rhs: num(&expr[op_pos + 1..])?,
                result: num(result)?,
            });
        }
        Ok(CountdownAnswer { steps })
    }
}

// Token layout.
pub const TOK_ADD: Token = 10;
pub const TOK_SUB: Token = 11;
pub const TOK_MUL: Token = 12;
pub const TOK_DIV: Token = 13;
pub const TOK_EQ: Token = 14;
pub const TOK_SEP: Token = 15;
pub const TOK_END: Token = 16;

pub const VOCAB: [&str; 17] = [
    "0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "+", "-", "*", "/", "=", ";", "<end>",
];

pub fn op_token(op: Op) -> Token {
    match op {
        Op::Add => TOK_ADD,
        Op::Sub => TOK_SUB,
        Op::Mul => TOK_MUL,
        Op::Div => TOK_DIV,
    }
}

pub fn token_op(tok: Token) -> Option<Op> {
    match tok {
        TOK_ADD => Some(Op::Add),
        TOK_SUB => Some(Op::Sub),
        TOK_MUL => Some(Op::Mul),
        TOK_DIV => Some(Op::Div),
        _ => None,
    }
}

pub fn is_digit(tok: Token) -> bool {
    tok < 10
}

pub fn push_number(out: &mut Vec<Token>, n: u64) {
    out.extend(n.to_string().bytes().map(|b| (b - b'0') as Token));
}

/// Token rendering of an answer, terminated by the end marker.
pub fn render(answer: &CountdownAnswer) -> Vec<Token> {
    let mut out = Vec::new();
    for (i, s) in answer.steps.iter().enumerate() {
        if i > 0 {
            out.push(TOK_SEP);
        }
        push_number(&mut out, s.lhs);
        out.push(op_token(s.op));
        push_number(&mut out, s.rhs);
        out.push(TOK_EQ);
        push_number(&mut out, s.result);
    }
    out.push(TOK_END);
    out
}

/// Longest accepted decimal literal; keeps products inside `u64`.
const MAX_DIGITS: usize = 9;

/// Parses a token stream. `None` means the stream is not a well-formed answer:
/// a grammar error, a missing end marker, a leading zero, an overlong number,
/// or no steps at all.
pub fn parse(tokens: &[Token]) -> Option<CountdownAnswer> {
    let (&last, body) = tokens.split_last()?;
    if last != TOK_END || body.is_empty() {
        return None;
    }
    let mut steps = Vec::new();
    for part in body.split(|&t| t == TOK_SEP) {
        steps.push(parse_step(part)?);
    }
    Some(CountdownAnswer { steps })
}

fn parse_number(tokens: &[Token]) -> Option<u64> {
    if tokens.is_empty() || tokens.len() > MAX_DIGITS || !tokens.iter().all(|&t| is_digit(t)) {
        return None;
    }
    if tokens[0] == 0 && tokens.len() > 1 {
        return None;
    }
    Some(tokens.iter().fold(0u64, |acc, &d| acc * 10 + d as u64))
}

fn parse_step(tokens: &[Token]) -> Option<Step> {
    let op_pos = tokens.iter().position(|&t| token_op(t).is_some())?;
    let eq_pos = tokens.iter().position(|&t| t == TOK_EQ)?;
    if eq_pos < op_pos {
        return None;
    }
    Some(Step {
        lhs: parse_number(&tokens[..op_pos])?,
        op: token_op(tokens[op_pos])?,
        rhs: parse_number(&tokens[op_pos + 1..eq_pos])?,
        result: parse_number(&tokens[eq_pos + 1..])?,
    })
}

fn take(pool: &mut Vec<u64>, v: u64) -> bool {
    match pool.iter().position(|&x| x == v) {
        Some(i) => {
            pool.swap_remove(i);
            true
        }
        None => false,
    }
}

/// Classifies an answer against a task.
pub fn verify(task: &CountdownTask, answer: &CountdownAnswer) -> Verdict {
    if answer.steps.is_empty() {
        return Verdict::Malformed;
    }
    let mut pool = task.numbers.clone();
    for s in &answer.steps {
        if !take(&mut pool, s.lhs) || !take(&mut pool, s.rhs) {
            return Verdict::Malformed;
        }
        match s.op.apply(s.lhs, s.rhs) {
            Some(v) if v == s.result => pool.push(v),
            _ => return Verdict::Malformed,
        }
    }
    if answer.steps.last().map(|s| s.result) == Some(task.target) {
        Verdict::Correct
    } else {
        Verdict::WrongAnswer
    }
}

/// Exhaustive search over operand pairs, orders and operators.
///
/// Returns the first solution found in a fixed enumeration order, or `None`
/// when the target is unreachable.
pub fn solve(task: &CountdownTask) -> Option<CountdownAnswer> {
    let mut pool = task.numbers.clone();
    pool.sort_unstable();
    let mut steps = Vec::new();
    let mut dead = HashSet::new();
    if search(&pool, task.target, &mut steps, &mut dead) {
        Some(CountdownAnswer { steps })
    } else {
        None
    }
}

fn search(pool: &[u64], target: u64, steps: &mut Vec<Step>, dead: &mut HashSet<Vec<u64>>) -> bool {
    if pool.len() < 2 || dead.contains(pool) {
        return false;
    }
    for i in 0..pool.len() {
        for j in 0..pool.len() {
            if i == j || (j < i && pool[i] == pool[j]) {
                continue;
            }
            for op in Op::ALL {
                // Commutative operators only need one operand order.
                if matches!(op, Op::Add | Op::Mul) && j < i {
                    continue;
                }
                let Some(v) = op.apply(pool[i], pool[j]) else {
                    continue;
                };
                steps.push(Step {
                    lhs: pool[i],
                    op,
                    rhs: pool[j],
                    result: v,
                });
                if v == target {
                    return true;
                }
                let mut next: Vec<u64> = pool
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i && k != j)
                    .map(|(_, &x)| x)
                    .collect();
                next.push(v);
                next.sort_unstable();
                if search(&next, target, steps, dead) {
                    return true;
                }
                steps.pop();
            }
        }
    }
    dead.insert(pool.to_vec());
    false
}

/// Generator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountdownParams {
    /// Numbers are drawn uniformly from `[1, max_number]`.
    pub max_number: u64,
    /// Largest allowed target (and intermediate value while building it).
    pub max_target: u64,
}

impl Default for CountdownParams {
    fn default() -> Self {
        CountdownParams {
            max_number: 99,
            max_target: 999,
        }
    }
}

/// One task from a dedicated stream. The target is the value of a random
/// expression that uses every number exactly once, so the operand count is
/// the difficulty; the instance is then certified by [`solve`].
pub fn generate_one(level: Level, params: &CountdownParams, rng: &mut Rng) -> (CountdownTask, CountdownAnswer) {
    let n = level.countdown_operands();
    loop {
        let numbers: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=params.max_number)).collect();
        let mut pool = numbers.clone();
        while pool.len() > 1 {
            let i = rng.gen_range(0..pool.len());
            let a = pool.swap_remove(i);
            let j = rng.gen_range(0..pool.len());
            let b = pool.swap_remove(j);
            let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
            let options: Vec<u64> = Op::ALL
                .iter()
                .filter_map(|op| op.apply(hi, lo))
                .filter(|&v| v <= params.max_target)
                .collect();
            // Subtraction (a ≠ b) or division (a = b) always qualifies.
            pool.push(options[rng.gen_range(0..options.len())]);
        }
        let task = CountdownTask {
            numbers,
            target: pool[0],
            level,
        };
        if let Some(cert) = solve(&task) {
            debug_assert_eq!(verify(&task, &cert), Verdict::Correct);
            return (task, cert);
        }
    }
}

/// `count` certified tasks. Task `i` uses a stream derived from a master seed
/// drawn from `rng` and the index `i`, so any subset can be regenerated alone.
pub fn generate(level: Level, count: usize, params: &CountdownParams, rng: &mut Rng) -> Vec<(CountdownTask, CountdownAnswer)> {
    let master: u64 = rng.gen();
    (0..count)
        .map(|i| generate_one(level, params, &mut rng::derived(master, &[i as u64])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(numbers: &[u64], target: u64) -> CountdownTask {
        CountdownTask {
            numbers: numbers.to_vec(),
            target,
            level: Level::from_index(numbers.len().saturating_sub(2).min(4)).unwrap(),
        }
    }

    fn ans(s: &str) -> CountdownAnswer {
        s.parse().unwrap()
    }

    #[test]
    fn verify_examples() {
        assert_eq!(verify(&task(&[3, 4], 7), &ans("3+4=7")), Verdict::Correct);
        assert_eq!(verify(&task(&[2, 3, 5], 17), &ans("3*5=15;15+2=17")), Verdict::Correct);
        assert_eq!(verify(&task(&[2, 3], 7), &ans("2+3=7")), Verdict::Malformed);
    }

    #[test]
    fn verify_rejects_bad_bookkeeping() {
        let t = task(&[2, 3, 5], 10);
        // Reuses 5.
        assert_eq!(verify(&t, &ans("5+5=10")), Verdict::Malformed);
        // Negative intermediate.
        assert_eq!(verify(&t, &ans("2-3=1")), Verdict::Malformed);
        // Inexact division.
        assert_eq!(verify(&t, &ans("5/2=2")), Verdict::Malformed);
        // Consumes an intermediate that was already consumed.
        assert_eq!(verify(&t, &ans("2+3=5;5+5=10;5+5=10")), Verdict::Malformed);
        assert_eq!(verify(&t, &ans("2*5=10")), Verdict::Correct);
        assert_eq!(verify(&t, &ans("2+3=5")), Verdict::WrongAnswer);
        assert_eq!(verify(&t, &CountdownAnswer::default()), Verdict::Malformed);
    }

    #[test]
    fn solver_examples() {
        let sol = solve(&task(&[3, 4], 12)).unwrap();
        assert_eq!(sol.to_string(), "3*4=12");
        assert!(solve(&task(&[3, 4], 11)).is_none());
        let t = task(&[1, 1, 1, 1, 1, 1], 6);
        let sol = solve(&t).unwrap();
        assert_eq!(sol.steps.len(), 5);
        assert!(sol.steps.iter().all(|s| s.op == Op::Add));
        assert_eq!(verify(&t, &sol), Verdict::Correct);
    }

    #[test]
    fn solver_can_use_a_single_number() {
        // The only non-empty answer is a neutral step.
        let t = task(&[7, 1], 7);
        let sol = solve(&t).unwrap();
        assert_eq!(verify(&t, &sol), Verdict::Correct);
    }

    #[test]
    fn token_round_trip() {
        let a = ans("12+7=19;19*3=57");
        let toks = render(&a);
        assert_eq!(*toks.last().unwrap(), TOK_END);
        assert_eq!(parse(&toks).unwrap(), a);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse(&[]).is_none());
        assert!(parse(&[TOK_END]).is_none());
        assert!(parse(&[1, TOK_ADD, 2, TOK_EQ, 3]).is_none()); // no end marker
        assert!(parse(&[0, 1, TOK_ADD, 2, TOK_EQ, 3, TOK_END]).is_none()); // leading zero
        assert!(parse(&[1, TOK_ADD, 2, TOK_EQ, 3, TOK_SEP, TOK_END]).is_none());
        assert!(parse(&[TOK_EQ, TOK_ADD, TOK_END]).is_none());
        assert!(parse(&[1; 20].iter().copied().chain([TOK_ADD, 1, TOK_EQ, 1, TOK_END]).collect::<Vec<_>>()).is_none());
    }

    #[test]
    fn generated_tasks_are_certified() {
        let mut rng = crate::rng::seeded(11);
        for level in Level::ALL {
            for (t, cert) in generate(level, 5, &CountdownParams::default(), &mut rng) {
                assert_eq!(t.numbers.len(), level.countdown_operands());
                assert!(t.numbers.iter().all(|&x| (1..=99).contains(&x)));
                assert_eq!(verify(&t, &cert), Verdict::Correct);
            }
        }
    }
}
