//! Feature maps for the two task families.
//!
//! Both maps share one layout: a phase one-hot, a bias, a few prefix summary
//! counts, and a set of hint channels. Each hint channel is a multi-hot vector
//! over the vocabulary marking the tokens that some simple rule recommends, so
//! the diagonal weight `W[(channel, v), v]` expresses how much the policy trusts
//! that rule.

use std::collections::HashSet;

use super::{Cursor, FeatureMap, PolicyParams, SparseFeatures};
use crate::envs::blocksworld::{self as bw, Action, Atom, Block, World};
use crate::envs::countdown::{self as cd, Op};
use crate::envs::{Family, Payload, TaskInstance, Token};

pub fn feature_map(family: Family) -> Box<dyn FeatureMap> {
    match family {
        Family::Countdown => Box::new(CountdownFeatures),
        Family::Blocksworld => Box::new(BlocksworldFeatures),
    }
}

/// The untrained starting policy. It trusts the format and legality channels
/// but none of the goal-seeking ones.
pub fn base_prior(family: Family) -> PolicyParams {
    match family {
        Family::Countdown => {
            let mut p = PolicyParams::zeros(&cd::VOCAB, cd::TOK_END, CountdownFeatures.dim(), 1.0).unwrap();
            for (ch, w) in [(CdChannel::Syntax, 3.0), (CdChannel::Avail, 8.0), (CdChannel::Arith, 8.0)] {
                for v in 0..cd::VOCAB.len() as Token {
                    *p.weight_mut(CountdownFeatures::channel_index(ch, v), v) = w;
                }
            }
            p
        }
        Family::Blocksworld => {
            let mut p = PolicyParams::zeros(&bw::VOCAB, bw::TOK_END, BlocksworldFeatures.dim(), 1.0).unwrap();
            for (ch, w) in [(BwChannel::Syntax, 4.0), (BwChannel::Applicable, 4.0)] {
                for v in 0..bw::VOCAB.len() as Token {
                    *p.weight_mut(BlocksworldFeatures::channel_index(ch, v), v) = w;
                }
            }
            p
        }
    }
}

fn digits(n: u64) -> Vec<Token> {
    let mut out = Vec::new();
    cd::push_number(&mut out, n);
    out
}

/// Next digit of `n` after the typed prefix `typed`, if `typed` is a proper
/// prefix of `n`.
fn next_digit(n: u64, typed: &[Token]) -> Option<Token> {
    let d = digits(n);
    (d.len() > typed.len() && d.starts_with(typed)).then(|| d[typed.len()])
}

fn remove_one(pool: &[u64], v: u64) -> Option<Vec<u64>> {
    let i = pool.iter().position(|&x| x == v)?;
    let mut out = pool.to_vec();
    out.remove(i);
    Some(out)
}

/// All legal steps `(a, op, b, result)` on a multiset.
fn steps_on(pool: &[u64]) -> Vec<(u64, Op, u64, u64)> {
    let mut out = Vec::new();
    for i in 0..pool.len() {
        for j in 0..pool.len() {
            if i == j {
                continue;
            }
            for op in Op::ALL {
                if let Some(r) = op.apply(pool[i], pool[j]) {
                    out.push((pool[i], op, pool[j], r));
                }
            }
        }
    }
    out.sort_unstable_by_key(|&(a, op, b, r)| (a, op as u8, b, r));
    out.dedup();
    out
}

fn after_step(pool: &[u64], a: u64, b: u64, r: u64) -> Vec<u64> {
    let mut next = remove_one(pool, a).unwrap();
    next = remove_one(&next, b).unwrap();
    next.push(r);
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdPhase {
    StepStart,
    Lhs,
    OpDone,
    Rhs,
    EqDone,
    Res,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdChannel {
    /// Grammatical continuations.
    Syntax,
    /// Digits that spell a still-available number, then an operator or `=`
    /// once one is complete.
    Avail,
    /// Operators and right operands giving a legal result, the correct result
    /// digits and, once the result is written, the terminators.
    Arith,
    /// Moves that reach the target in the current step.
    Hit,
    /// Moves after which one more step reaches the target.
    Reach2,
}

const CD_CHANNELS: usize = 5;
const CD_PHASES: usize = 7;
const CD_SUMMARY: usize = 4;
const CD_V: usize = cd::VOCAB.len();

/// Features for Countdown answers.
#[derive(Debug, Clone, Copy, Default)]
pub struct CountdownFeatures;

impl CountdownFeatures {
    pub fn channel_index(ch: CdChannel, token: Token) -> usize {
        CD_PHASES + CD_SUMMARY + ch as usize * CD_V + token as usize
    }
}

impl FeatureMap for CountdownFeatures {
    fn dim(&self) -> usize {
        CD_PHASES + CD_SUMMARY + CD_CHANNELS * CD_V
    }

    fn vocab_size(&self) -> usize {
        CD_V
    }

    fn cursor<'a>(&'a self, task: &'a TaskInstance) -> Box<dyn Cursor + 'a> {
        let (numbers, target) = match &task.payload {
            Payload::Countdown(t) => (t.numbers.clone(), t.target),
            Payload::Blocksworld(_) => (Vec::new(), 0),
        };
        let mut c = CdCursor {
            target,
            pool: numbers,
            phase: CdPhase::StepStart,
            steps_done: 0,
            typed: Vec::new(),
            lhs: 0,
            op: Op::Add,
            rhs: 0,
            broken: false,
            moves: Vec::new(),
            hit: HashSet::new(),
            reach2: HashSet::new(),
        };
        if matches!(task.payload, Payload::Blocksworld(_)) {
            c.phase = CdPhase::Invalid;
        }
        c.refresh_plans();
        Box::new(c)
    }
}

struct CdCursor {
    target: u64,
    pool: Vec<u64>,
    phase: CdPhase,
    steps_done: usize,
    typed: Vec<Token>,
    lhs: u64,
    op: Op,
    rhs: u64,
    broken: bool,
    moves: Vec<(u64, Op, u64, u64)>,
    hit: HashSet<(u64, Op, u64)>,
    reach2: HashSet<(u64, Op, u64)>,
}

impl CdCursor {
    fn refresh_plans(&mut self) {
        self.moves = steps_on(&self.pool);
        self.hit.clear();
        self.reach2.clear();
        for &(a, op, b, r) in &self.moves {
            if r == self.target {
                self.hit.insert((a, op, b));
            } else {
                let next = after_step(&self.pool, a, b, r);
                if steps_on(&next).iter().any(|m| m.3 == self.target) {
                    self.reach2.insert((a, op, b));
                }
            }
        }
    }

    fn typed_value(&self) -> Option<u64> {
        if self.typed.is_empty() || (self.typed[0] == 0 && self.typed.len() > 1) {
            return None;
        }
        Some(self.typed.iter().fold(0u64, |acc, &d| acc * 10 + d as u64))
    }

    fn expected(&self) -> Option<u64> {
        self.op.apply(self.lhs, self.rhs)
    }

    fn finish_step(&mut self) {
        let result = self.typed_value();
        let next = remove_one(&self.pool, self.lhs).and_then(|p| remove_one(&p, self.rhs));
        match (next, result) {
            (Some(mut p), Some(r)) if Some(r) == self.expected() => {
                p.push(r);
                self.pool = p;
                self.refresh_plans();
            }
            _ => self.broken = true,
        }
        self.steps_done += 1;
    }

    /// Marks tokens for a set of candidate moves filtered by the current phase.
    fn mark_moves(&self, moves: &HashSet<(u64, Op, u64)>, out: &mut [bool; CD_V]) {
        for &(a, op, b) in moves {
            match self.phase {
                CdPhase::StepStart | CdPhase::Lhs => {
                    if let Some(d) = next_digit(a, &self.typed) {
                        out[d as usize] = true;
                    }
                    if self.phase == CdPhase::Lhs && self.typed_value() == Some(a) {
                        out[cd::op_token(op) as usize] = true;
                    }
                }
                CdPhase::OpDone | CdPhase::Rhs => {
                    if a != self.lhs || op != self.op {
                        continue;
                    }
                    if let Some(d) = next_digit(b, &self.typed) {
                        out[d as usize] = true;
                    }
                    if self.phase == CdPhase::Rhs && self.typed_value() == Some(b) {
                        out[cd::TOK_EQ as usize] = true;
                    }
                }
                _ => {}
            }
        }
    }

    fn channel(&self, ch: CdChannel) -> [bool; CD_V] {
        let mut out = [false; CD_V];
        let digit_ok = |out: &mut [bool; CD_V], typed: &[Token]| {
            let leading_zero = typed.first() == Some(&0);
            if !leading_zero && typed.len() < 9 {
                for d in 0..10 {
                    out[d] = true;
                }
            }
        };
        let complete = !self.typed.is_empty();
        match ch {
            CdChannel::Syntax => match self.phase {
                CdPhase::StepStart | CdPhase::OpDone | CdPhase::EqDone => digit_ok(&mut out, &[]),
                CdPhase::Lhs => {
                    digit_ok(&mut out, &self.typed);
                    for op in Op::ALL {
                        out[cd::op_token(op) as usize] = true;
                    }
                }
                CdPhase::Rhs => {
                    digit_ok(&mut out, &self.typed);
                    out[cd::TOK_EQ as usize] = true;
                }
                CdPhase::Res => {
                    digit_ok(&mut out, &self.typed);
                    out[cd::TOK_SEP as usize] = true;
                    out[cd::TOK_END as usize] = true;
                }
                CdPhase::Invalid => {}
            },
            _ if self.broken || self.phase == CdPhase::Invalid => {}
            CdChannel::Avail => match self.phase {
                CdPhase::StepStart | CdPhase::Lhs => {
                    if self.pool.len() >= 2 {
                        for &n in &self.pool {
                            if let Some(d) = next_digit(n, &self.typed) {
                                out[d as usize] = true;
                            }
                        }
                        if self.phase == CdPhase::Lhs && complete {
                            if let Some(v) = self.typed_value() {
                                if self.pool.contains(&v) {
                                    for op in Op::ALL {
                                        out[cd::op_token(op) as usize] = true;
                                    }
                                }
                            }
                        }
                    }
                }
                CdPhase::OpDone | CdPhase::Rhs => {
                    if let Some(rest) = remove_one(&self.pool, self.lhs) {
                        for &n in &rest {
                            if let Some(d) = next_digit(n, &self.typed) {
                                out[d as usize] = true;
                            }
                        }
                        if self.phase == CdPhase::Rhs && self.typed_value().is_some_and(|v| rest.contains(&v)) {
                            out[cd::TOK_EQ as usize] = true;
                        }
                    }
                }
                _ => {}
            },
            CdChannel::Arith => match self.phase {
                CdPhase::Lhs => {
                    if let Some(a) = self.typed_value() {
                        for &(ma, op, _, _) in &self.moves {
                            if ma == a {
                                out[cd::op_token(op) as usize] = true;
                            }
                        }
                    }
                }
                CdPhase::OpDone | CdPhase::Rhs => {
                    for &(ma, op, b, _) in &self.moves {
                        if ma == self.lhs && op == self.op {
                            if let Some(d) = next_digit(b, &self.typed) {
                                out[d as usize] = true;
                            }
                            if self.phase == CdPhase::Rhs && self.typed_value() == Some(b) {
                                out[cd::TOK_EQ as usize] = true;
                            }
                        }
                    }
                }
                CdPhase::EqDone | CdPhase::Res => {
                    if let Some(r) = self.expected() {
                        if let Some(d) = next_digit(r, &self.typed) {
                            out[d as usize] = true;
                        }
                        if self.typed_value() == Some(r) {
                            out[cd::TOK_SEP as usize] = true;
                            out[cd::TOK_END as usize] = true;
                        }
                    }
                }
                _ => {}
            },
            CdChannel::Hit => match self.phase {
                CdPhase::EqDone | CdPhase::Res => {
                    if let Some(r) = self.expected().filter(|&r| r == self.target) {
                        if let Some(d) = next_digit(r, &self.typed) {
                            out[d as usize] = true;
                        }
                    }
                    if self.phase == CdPhase::Res {
                        match self.typed_value() {
                            Some(v) if v == self.target => out[cd::TOK_END as usize] = true,
                            Some(_) => out[cd::TOK_SEP as usize] = true,
                            None => {}
                        }
                    }
                }
                _ => self.mark_moves(&self.hit, &mut out),
            },
            CdChannel::Reach2 => match self.phase {
                CdPhase::EqDone | CdPhase::Res => {
                    if self.reach2.contains(&(self.lhs, self.op, self.rhs)) {
                        if let Some(r) = self.expected() {
                            if let Some(d) = next_digit(r, &self.typed) {
                                out[d as usize] = true;
                            }
                            if self.typed_value() == Some(r) {
                                out[cd::TOK_SEP as usize] = true;
                            }
                        }
                    }
                }
                _ => self.mark_moves(&self.reach2, &mut out),
            },
        }
        out
    }
}

impl Cursor for CdCursor {
    fn features(&mut self, out: &mut SparseFeatures) {
        out.clear();
        out.push((self.phase as usize, 1.0));
        out.push((CD_PHASES, 1.0));
        out.push((CD_PHASES + 1, self.steps_done as f64 / 4.0));
        out.push((CD_PHASES + 2, self.pool.len() as f64 / 6.0));
        out.push((CD_PHASES + 3, self.typed.len() as f64 / 3.0));
        for ch in [CdChannel::Syntax, CdChannel::Avail, CdChannel::Arith, CdChannel::Hit, CdChannel::Reach2] {
            for (v, on) in self.channel(ch).into_iter().enumerate() {
                if on {
                    out.push((CountdownFeatures::channel_index(ch, v as Token), 1.0));
                }
            }
        }
    }

    fn push(&mut self, token: Token) {
        let syntax = self.channel(CdChannel::Syntax);
        if (token as usize) >= CD_V || !syntax[token as usize] {
            self.phase = CdPhase::Invalid;
            return;
        }
        use CdPhase::*;
        if cd::is_digit(token) {
            self.typed.push(token);
            self.phase = match self.phase {
                StepStart => Lhs,
                OpDone => Rhs,
                EqDone => Res,
                p => p,
            };
            return;
        }
        match (self.phase, token) {
            (Lhs, t) if cd::token_op(t).is_some() => {
                self.lhs = self.typed_value().unwrap_or(0);
                self.op = cd::token_op(t).unwrap();
                self.typed.clear();
                self.phase = OpDone;
            }
            (Rhs, cd::TOK_EQ) => {
                self.rhs = self.typed_value().unwrap_or(0);
                self.typed.clear();
                self.phase = EqDone;
            }
            (Res, cd::TOK_SEP) => {
                self.finish_step();
                self.typed.clear();
                self.phase = StepStart;
            }
            (Res, cd::TOK_END) => {
                self.finish_step();
                self.typed.clear();
                self.phase = Invalid;
            }
            _ => self.phase = Invalid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BwPhase {
    Start,
    PickupArg,
    PutdownArg,
    StackArg1,
    UnstackArg1,
    StackArg2,
    UnstackArg2,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BwChannel {
    Syntax,
    /// Tokens that complete to an action whose preconditions hold.
    Applicable,
    /// Tokens of actions chosen by a goal-directed rule, and the end token
    /// once the goal holds.
    GoalDirected,
}

const BW_CHANNELS: usize = 3;
const BW_PHASES: usize = 8;
const BW_SUMMARY: usize = 4;
const BW_V: usize = bw::VOCAB.len();

/// Features for Blocksworld plans.
#[derive(Debug, Clone, Copy, Default)]
pub struct BlocksworldFeatures;

impl BlocksworldFeatures {
    pub fn channel_index(ch: BwChannel, token: Token) -> usize {
        BW_PHASES + BW_SUMMARY + ch as usize * BW_V + token as usize
    }
}

impl FeatureMap for BlocksworldFeatures {
    fn dim(&self) -> usize {
        BW_PHASES + BW_SUMMARY + BW_CHANNELS * BW_V
    }

    fn vocab_size(&self) -> usize {
        BW_V
    }

    fn cursor<'a>(&'a self, task: &'a TaskInstance) -> Box<dyn Cursor + 'a> {
        match &task.payload {
            Payload::Blocksworld(t) => Box::new(BwCursor {
                world: t.initial.clone(),
                goal: &t.goal,
                phase: BwPhase::Start,
                first: 0,
                actions_done: 0,
                broken: false,
            }),
            Payload::Countdown(_) => Box::new(BwCursor {
                world: World::new(Vec::new(), None),
                goal: &[],
                phase: BwPhase::Invalid,
                first: 0,
                actions_done: 0,
                broken: true,
            }),
        }
    }
}

struct BwCursor<'a> {
    world: World,
    goal: &'a [Atom],
    phase: BwPhase,
    first: Block,
    actions_done: usize,
    broken: bool,
}

/// Whether `b` already rests where the goal wants it, all the way down.
fn well_placed(w: &World, goal: &[Atom], b: Block) -> bool {
    let want_on = goal.iter().find_map(|a| match *a {
        Atom::On(x, y) if x == b => Some(y),
        _ => None,
    });
    let want_table = goal.contains(&Atom::OnTable(b));
    if w.held == Some(b) {
        return false;
    }
    match (w.below(b), want_on) {
        (Some(y), Some(t)) => y == t && well_placed(w, goal, y),
        (None, Some(_)) => false,
        (Some(y), None) => !want_table && well_placed(w, goal, y),
        (None, None) => true,
    }
}

/// Actions recommended by a misplaced-block rule.
fn goal_directed(w: &World, goal: &[Atom]) -> Vec<Action> {
    let mut out = Vec::new();
    match w.held {
        Some(x) => {
            let target = goal.iter().find_map(|a| match *a {
                Atom::On(b, y) if b == x => Some(y),
                _ => None,
            });
            match target {
                Some(y) if w.is_clear(y) && well_placed(w, goal, y) => out.push(Action::Stack(x, y)),
                _ => out.push(Action::Putdown(x)),
            }
        }
        None => {
            for (a, _) in w.successors() {
                let good = match a {
                    Action::Unstack(x, _) => !well_placed(w, goal, x),
                    Action::Pickup(x) => goal.iter().any(|g| match *g {
                        Atom::On(b, y) => b == x && w.is_clear(y) && well_placed(w, goal, y),
                        Atom::Holding(b) => b == x,
                        _ => false,
                    }),
                    _ => false,
                };
                if good {
                    out.push(a);
                }
            }
        }
    }
    out
}

fn action_tokens(a: Action) -> [Option<Token>; 3] {
    match a {
        Action::Pickup(x) => [Some(bw::TOK_PICKUP), Some(bw::block_token(x)), None],
        Action::Putdown(x) => [Some(bw::TOK_PUTDOWN), Some(bw::block_token(x)), None],
        Action::Stack(x, y) => [Some(bw::TOK_STACK), Some(bw::block_token(x)), Some(bw::block_token(y))],
        Action::Unstack(x, y) => [Some(bw::TOK_UNSTACK), Some(bw::block_token(x)), Some(bw::block_token(y))],
    }
}

impl BwCursor<'_> {
    fn head(&self) -> Option<Token> {
        match self.phase {
            BwPhase::PickupArg => Some(bw::TOK_PICKUP),
            BwPhase::PutdownArg => Some(bw::TOK_PUTDOWN),
            BwPhase::StackArg1 | BwPhase::StackArg2 => Some(bw::TOK_STACK),
            BwPhase::UnstackArg1 | BwPhase::UnstackArg2 => Some(bw::TOK_UNSTACK),
            _ => None,
        }
    }

    /// Marks the token each candidate action contributes at the current position.
    fn mark(&self, actions: &[Action], out: &mut [bool; BW_V]) {
        for &a in actions {
            let toks = action_tokens(a);
            match self.phase {
                BwPhase::Start => out[toks[0].unwrap() as usize] = true,
                BwPhase::PickupArg | BwPhase::PutdownArg | BwPhase::StackArg1 | BwPhase::UnstackArg1 => {
                    if toks[0] == self.head() {
                        out[toks[1].unwrap() as usize] = true;
                    }
                }
                BwPhase::StackArg2 | BwPhase::UnstackArg2 => {
                    if toks[0] == self.head() && toks[1] == Some(bw::block_token(self.first)) {
                        out[toks[2].unwrap() as usize] = true;
                    }
                }
                BwPhase::Invalid => {}
            }
        }
    }

    fn channel(&self, ch: BwChannel) -> [bool; BW_V] {
        let mut out = [false; BW_V];
        match ch {
            BwChannel::Syntax => match self.phase {
                BwPhase::Start => {
                    for t in [bw::TOK_PICKUP, bw::TOK_PUTDOWN, bw::TOK_STACK, bw::TOK_UNSTACK, bw::TOK_END] {
                        out[t as usize] = true;
                    }
                }
                BwPhase::Invalid => {}
                _ => {
                    for b in 0..bw::MAX_BLOCKS as Block {
                        out[bw::block_token(b) as usize] = true;
                    }
                }
            },
            _ if self.broken || self.phase == BwPhase::Invalid => {}
            BwChannel::Applicable => {
                let acts: Vec<Action> = self.world.successors().into_iter().map(|(a, _)| a).collect();
                self.mark(&acts, &mut out);
                if self.phase == BwPhase::Start {
                    out[bw::TOK_END as usize] = true;
                }
            }
            BwChannel::GoalDirected => {
                if self.phase == BwPhase::Start && self.world.satisfies(self.goal) {
                    out[bw::TOK_END as usize] = true;
                } else {
                    self.mark(&goal_directed(&self.world, self.goal), &mut out);
                }
            }
        }
        out
    }

    fn apply(&mut self, a: Action) {
        match self.world.apply(a) {
            Some(w) => self.world = w,
            None => self.broken = true,
        }
        self.actions_done += 1;
        self.phase = BwPhase::Start;
    }
}

impl Cursor for BwCursor<'_> {
    fn features(&mut self, out: &mut SparseFeatures) {
        out.clear();
        out.push((self.phase as usize, 1.0));
        out.push((BW_PHASES, 1.0));
        out.push((BW_PHASES + 1, if self.world.held.is_some() { 1.0 } else { 0.0 }));
        out.push((BW_PHASES + 2, self.actions_done as f64 / 8.0));
        let sat = self.goal.iter().filter(|a| self.world.holds(a)).count();
        out.push((BW_PHASES + 3, sat as f64 / self.goal.len().max(1) as f64));
        for ch in [BwChannel::Syntax, BwChannel::Applicable, BwChannel::GoalDirected] {
            for (v, on) in self.channel(ch).into_iter().enumerate() {
                if on {
                    out.push((BlocksworldFeatures::channel_index(ch, v as Token), 1.0));
                }
            }
        }
    }

    fn push(&mut self, token: Token) {
        use BwPhase::*;
        let block = bw::token_block(token);
        self.phase = match (self.phase, token, block) {
            (Start, bw::TOK_PICKUP, _) => PickupArg,
            (Start, bw::TOK_PUTDOWN, _) => PutdownArg,
            (Start, bw::TOK_STACK, _) => StackArg1,
            (Start, bw::TOK_UNSTACK, _) => UnstackArg1,
            (PickupArg, _, Some(x)) => {
                self.apply(Action::Pickup(x));
                return;
            }
            (PutdownArg, _, Some(x)) => {
                self.apply(Action::Putdown(x));
                return;
            }
            (StackArg1, _, Some(x)) => {
                self.first = x;
                StackArg2
            }
            (UnstackArg1, _, Some(x)) => {
                self.first = x;
                UnstackArg2
            }
            (StackArg2, _, Some(y)) => {
                self.apply(Action::Stack(self.first, y));
                return;
            }
            (UnstackArg2, _, Some(y)) => {
                self.apply(Action::Unstack(self.first, y));
                return;
            }
            _ => Invalid,
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{generate, GenParams, Level};
    use crate::policy::{decode, DecodeMode};

    fn channel_tokens(fm: &dyn FeatureMap, task: &TaskInstance, prefix: &[Token], idx: impl Fn(Token) -> usize) -> Vec<Token> {
        let f = fm.features(task, prefix);
        (0..fm.vocab_size() as Token).filter(|&v| f[idx(v)] > 0.0).collect()
    }

    fn cd_task(numbers: &[u64], target: u64) -> TaskInstance {
        let t = cd::CountdownTask {
            numbers: numbers.to_vec(),
            target,
            level: Level::Easy,
        };
        let a = cd::solve(&t).unwrap();
        TaskInstance {
            id: "t".into(),
            level: Level::Easy,
            payload: Payload::Countdown(t),
            certificate: crate::envs::Certificate::Countdown(a),
        }
    }

    #[test]
    fn countdown_hit_channel() {
        let task = cd_task(&[3, 4, 10], 12);
        let fm = CountdownFeatures;
        let hit = |p: &[Token]| channel_tokens(&fm, &task, p, |v| CountdownFeatures::channel_index(CdChannel::Hit, v));
        // 3*4 and 4*3 reach 12 in one step.
        assert_eq!(hit(&[]), vec![3, 4]);
        assert_eq!(hit(&[3]), vec![cd::TOK_MUL]);
        assert_eq!(hit(&[3, cd::TOK_MUL]), vec![4]);
        assert_eq!(hit(&[3, cd::TOK_MUL, 4, cd::TOK_EQ, 1, 2]), vec![cd::TOK_END]);
        let reach = |p: &[Token]| channel_tokens(&fm, &task, p, |v| CountdownFeatures::channel_index(CdChannel::Reach2, v));
        assert!(reach(&[]).is_empty());
        // 70 = (3+4)*10 needs two steps.
        let task = cd_task(&[3, 4, 10], 70);
        let hit = |p: &[Token]| channel_tokens(&fm, &task, p, |v| CountdownFeatures::channel_index(CdChannel::Hit, v));
        let reach = |p: &[Token]| channel_tokens(&fm, &task, p, |v| CountdownFeatures::channel_index(CdChannel::Reach2, v));
        assert!(hit(&[]).is_empty());
        assert_eq!(reach(&[]), vec![3, 4]);
        assert_eq!(reach(&[3, cd::TOK_ADD]), vec![4]);
        assert_eq!(reach(&[3, cd::TOK_ADD, 4, cd::TOK_EQ, 7]), vec![cd::TOK_SEP]);
        assert_eq!(hit(&[3, cd::TOK_ADD, 4, cd::TOK_EQ, 7, cd::TOK_SEP]), vec![1, 7]);
    }

    #[test]
    fn countdown_syntax_matches_parser() {
        let task = cd_task(&[3, 4], 7);
        let fm = CountdownFeatures;
        let syn = |p: &[Token]| channel_tokens(&fm, &task, p, |v| CountdownFeatures::channel_index(CdChannel::Syntax, v));
        assert_eq!(syn(&[]), (0..10).collect::<Vec<_>>());
        assert_eq!(syn(&[0]), vec![cd::TOK_ADD, cd::TOK_SUB, cd::TOK_MUL, cd::TOK_DIV]);
        assert!(syn(&[cd::TOK_ADD]).is_empty());
        let res = syn(&[3, cd::TOK_ADD, 4, cd::TOK_EQ, 7]);
        assert!(res.contains(&cd::TOK_SEP) && res.contains(&cd::TOK_END));
    }

    #[test]
    fn blocksworld_goal_rule_solves_generated_tasks() {
        // Following the goal-directed channel greedily solves most instances.
        let mut rng = crate::rng::seeded(4);
        let mut p = base_prior(Family::Blocksworld);
        for v in 0..bw::VOCAB.len() as Token {
            *p.weight_mut(BlocksworldFeatures::channel_index(BwChannel::GoalDirected, v), v) = 20.0;
        }
        let fm = BlocksworldFeatures;
        let mut solved = 0;
        let tasks = generate(Family::Blocksworld, Level::Hard, 20, &GenParams::default(), &mut rng);
        for t in &tasks {
            let r = decode(&p, &fm, t, DecodeMode::Greedy, &mut rng, 40).unwrap();
            solved += t.is_correct(&r.tokens) as usize;
        }
        assert!(solved >= 15, "solved {solved}/20");
    }

    #[test]
    fn base_countdown_policy_is_mostly_well_formed() {
        let mut rng = crate::rng::seeded(9);
        let p = base_prior(Family::Countdown);
        let fm = CountdownFeatures;
        let tasks = generate(Family::Countdown, Level::Medium, 20, &GenParams::default(), &mut rng);
        let mut ok = 0;
        for t in &tasks {
            let r = decode(&p, &fm, t, DecodeMode::plain(1.0), &mut rng, 64).unwrap();
            ok += (t.verdict(&r.tokens) != crate::envs::Verdict::Malformed) as usize;
        }
        assert!(ok >= 15, "well-formed {ok}/20");
    }
}
