//! Blocksworld with the classical four-operator encoding.
//!
//! Blocks are identified by letters `A..F`. A world state is a set of stacks
//! (bottom to top) plus at most one block in the hand. Goals are partial
//! states: conjunctions of `on(x,y)`, `ontable(x)`, `clear(x)` and
//! `holding(x)` atoms.

use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Level, Token, Verdict};
use crate::rng::{self, Rng};

pub const MAX_BLOCKS: usize = 6;

pub type Block = u8;

pub fn block_name(b: Block) -> char {
    (b'A' + b) as char
}

pub fn parse_block(c: char) -> Option<Block> {
    let c = c.to_ascii_uppercase();
    (('A'..='F').contains(&c)).then(|| c as u8 - b'A')
}

/// A physical configuration in canonical form (stacks sorted by bottom block).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct World {
    pub stacks: Vec<Vec<Block>>,
    pub held: Option<Block>,
}

impl World {
    pub fn new(mut stacks: Vec<Vec<Block>>, held: Option<Block>) -> Self {
        stacks.retain(|s| !s.is_empty());
        stacks.sort();
        World { stacks, held }
    }

    pub fn hand_empty(&self) -> bool {
        self.held.is_none()
    }

    pub fn blocks(&self) -> Vec<Block> {
        let mut all: Vec<Block> = self.stacks.iter().flatten().copied().chain(self.held).collect();
        all.sort_unstable();
        all
    }

    /// Each block appears exactly once and ids are `0..n`.
    pub fn is_consistent(&self) -> bool {
        let all = self.blocks();
        all.len() <= MAX_BLOCKS && all.iter().enumerate().all(|(i, &b)| b as usize == i)
    }

    fn locate(&self, b: Block) -> Option<(usize, usize)> {
        self.stacks.iter().enumerate().find_map(|(si, s)| s.iter().position(|&x| x == b).map(|p| (si, p)))
    }

    pub fn is_clear(&self, b: Block) -> bool {
        matches!(self.locate(b), Some((si, p)) if p + 1 == self.stacks[si].len())
    }

    pub fn on_table(&self, b: Block) -> bool {
        matches!(self.locate(b), Some((_, 0)))
    }

    /// The block directly below `b`, if `b` sits on another block.
    pub fn below(&self, b: Block) -> Option<Block> {
        match self.locate(b) {
            Some((si, p)) if p > 0 => Some(self.stacks[si][p - 1]),
            _ => None,
        }
    }

    pub fn holds(&self, atom: &Atom) -> bool {
        match *atom {
            Atom::On(x, y) => self.below(x) == Some(y),
            Atom::OnTable(x) => self.on_table(x),
            Atom::Clear(x) => self.is_clear(x),
            Atom::Holding(x) => self.held == Some(x),
        }
    }

    pub fn satisfies(&self, goal: &[Atom]) -> bool {
        goal.iter().all(|a| self.holds(a))
    }

    /// The successor state, or `None` when a precondition fails.
    pub fn apply(&self, action: Action) -> Option<World> {
        let mut stacks = self.stacks.clone();
        let held = match action {
            Action::Pickup(x) => {
                if self.held.is_some() {
                    return None;
                }
                let si = stacks.iter().position(|s| s.len() == 1 && s[0] == x)?;
                stacks.remove(si);
                Some(x)
            }
            Action::Putdown(x) => {
                if self.held != Some(x) {
                    return None;
                }
                stacks.push(vec![x]);
                None
            }
            Action::Stack(x, y) => {
                if self.held != Some(x) || x == y {
                    return None;
                }
                let si = stacks.iter().position(|s| s.last() == Some(&y))?;
                stacks[si].push(x);
                None
            }
            Action::Unstack(x, y) => {
                if self.held.is_some() {
                    return None;
                }
                let si = stacks
                    .iter()
                    .position(|s| s.len() >= 2 && s[s.len() - 1] == x && s[s.len() - 2] == y)?;
                stacks[si].pop();
                Some(x)
            }
        };
        Some(World::new(stacks, held))
    }

    /// Applicable actions in a fixed enumeration order.
    pub fn successors(&self) -> Vec<(Action, World)> {
        let mut out = Vec::new();
        match self.held {
            Some(x) => {
                out.push((Action::Putdown(x), self.apply(Action::Putdown(x)).unwrap()));
                let mut tops: Vec<Block> = self.stacks.iter().filter_map(|s| s.last().copied()).collect();
                tops.sort_unstable();
                for y in tops {
                    out.push((Action::Stack(x, y), self.apply(Action::Stack(x, y)).unwrap()));
                }
            }
            None => {
                let mut stacks = self.stacks.clone();
                stacks.sort_by_key(|s| *s.last().unwrap());
                for s in &stacks {
                    let top = *s.last().unwrap();
                    let a = if s.len() == 1 {
                        Action::Pickup(top)
                    } else {
                        Action::Unstack(top, s[s.len() - 2])
                    };
                    out.push((a, self.apply(a).unwrap()));
                }
            }
        }
        out
    }

    pub fn relabel(&self, perm: &[Block]) -> World {
        World::new(
            self.stacks.iter().map(|s| s.iter().map(|&b| perm[b as usize]).collect()).collect(),
            self.held.map(|b| perm[b as usize]),
        )
    }
}

impl std::fmt::Display for World {
    /// `AB|C` lists stacks bottom to top; a held block is shown as `+D`.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let stacks: Vec<String> = self.stacks.iter().map(|s| s.iter().map(|&b| block_name(b)).collect()).collect();
        f.write_str(&stacks.join("|"))?;
        if let Some(h) = self.held {
            write!(f, "+{}", block_name(h))?;
        }
        Ok(())
    }
}

impl std::str::FromStr for World {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (body, held) = match s.split_once('+') {
            Some((b, h)) => {
                let mut cs = h.chars();
                let held = cs.next().and_then(parse_block).ok_or_else(|| format!("bad held block in `{s}`"))?;
                if cs.next().is_some() {
                    return Err(format!("more than one held block in `{s}`"));
                }
                (b, Some(held))
            }
            None => (s, None),
        };
        let stacks = if body.is_empty() {
            Vec::new()
        } else {
            body.split('|')
                .map(|st| st.chars().map(|c| parse_block(c).ok_or_else(|| format!("bad block `{c}`"))).collect())
                .collect::<Result<Vec<Vec<Block>>, String>>()?
        };
        let w = World::new(stacks, held);
        if !w.is_consistent() {
            return Err(format!("inconsistent world `{s}`"));
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Atom {
    On(Block, Block),
    OnTable(Block),
    Clear(Block),
    Holding(Block),
}

impl Atom {
    pub fn relabel(&self, perm: &[Block]) -> Atom {
        let p = |b: Block| perm[b as usize];
        match *self {
            Atom::On(x, y) => Atom::On(p(x), p(y)),
            Atom::OnTable(x) => Atom::OnTable(p(x)),
            Atom::Clear(x) => Atom::Clear(p(x)),
            Atom::Holding(x) => Atom::Holding(p(x)),
        }
    }
}

impl std::fmt::Display for Atom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Atom::On(x, y) => write!(f, "on({},{})", block_name(x), block_name(y)),
            Atom::OnTable(x) => write!(f, "ontable({})", block_name(x)),
            Atom::Clear(x) => write!(f, "clear({})", block_name(x)),
            Atom::Holding(x) => write!(f, "holding({})", block_name(x)),
        }
    }
}

impl std::str::FromStr for Atom {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (name, rest) = s.split_once('(').ok_or_else(|| format!("bad atom `{s}`"))?;
        let args: Vec<Block> = rest
            .strip_suffix(')')
            .ok_or_else(|| format!("bad atom `{s}`"))?
            .split(',')
            .map(|a| {
                let mut cs = a.trim().chars();
                match (cs.next(), cs.next()) {
                    (Some(c), None) => parse_block(c).ok_or_else(|| format!("bad block in `{s}`")),
                    _ => Err(format!("bad block in `{s}`")),
                }
            })
            .collect::<Result<_, _>>()?;
        match (name, args.as_slice()) {
            ("on", [x, y]) => Ok(Atom::On(*x, *y)),
            ("ontable", [x]) => Ok(Atom::OnTable(*x)),
            ("clear", [x]) => Ok(Atom::Clear(*x)),
            ("holding", [x]) => Ok(Atom::Holding(*x)),
            _ => Err(format!("bad atom `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Pickup(Block),
    Putdown(Block),
    Stack(Block, Block),
    Unstack(Block, Block),
}

impl Action {
    pub fn relabel(&self, perm: &[Block]) -> Action {
        let p = |b: Block| perm[b as usize];
        match *self {
            Action::Pickup(x) => Action::Pickup(p(x)),
            Action::Putdown(x) => Action::Putdown(p(x)),
            Action::Stack(x, y) => Action::Stack(p(x), p(y)),
            Action::Unstack(x, y) => Action::Unstack(p(x), p(y)),
        }
    }

    pub fn inverse(&self) -> Action {
        match *self {
            Action::Pickup(x) => Action::Putdown(x),
            Action::Putdown(x) => Action::Pickup(x),
            Action::Stack(x, y) => Action::Unstack(x, y),
            Action::Unstack(x, y) => Action::Stack(x, y),
        }
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Action::Pickup(x) => write!(f, "pickup({})", block_name(x)),
            Action::Putdown(x) => write!(f, "putdown({})", block_name(x)),
            Action::Stack(x, y) => write!(f, "stack({},{})", block_name(x), block_name(y)),
            Action::Unstack(x, y) => write!(f, "unstack({},{})", block_name(x), block_name(y)),
        }
    }
}

impl std::str::FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        // Reuse the atom parser for the argument list.
        let s = s.trim();
        let (name, rest) = s.split_once('(').ok_or_else(|| format!("bad action `{s}`"))?;
        let args: Vec<Block> = rest
            .strip_suffix(')')
            .ok_or_else(|| format!("bad action `{s}`"))?
            .split(',')
            .map(|a| a.trim().chars().next().and_then(parse_block).ok_or_else(|| format!("bad block in `{s}`")))
            .collect::<Result<_, _>>()?;
        match (name, args.as_slice()) {
            ("pickup", [x]) => Ok(Action::Pickup(*x)),
            ("putdown", [x]) => Ok(Action::Putdown(*x)),
            ("stack", [x, y]) => Ok(Action::Stack(*x, *y)),
            ("unstack", [x, y]) => Ok(Action::Unstack(*x, *y)),
            _ => Err(format!("bad action `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlocksworldPlan {
    pub actions: Vec<Action>,
}

impl std::fmt::Display for BlocksworldPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.actions.iter().map(|a| a.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}

impl std::str::FromStr for BlocksworldPlan {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(BlocksworldPlan {
            actions: s.split_whitespace().map(str::parse).collect::<Result<_, _>>()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlocksworldTask {
    pub initial: World,
    pub goal: Vec<Atom>,
    pub level: Level,
    pub optimal_len: usize,
}

impl BlocksworldTask {
    pub fn n_blocks(&self) -> usize {
        self.initial.blocks().len()
    }
}

/// Simulates a plan from the initial state.
pub fn verify(task: &BlocksworldTask, plan: &BlocksworldPlan) -> Verdict {
    let mut world = task.initial.clone();
    for &a in &plan.actions {
        match world.apply(a) {
            Some(w) => world = w,
            None => return Verdict::Malformed,
        }
    }
    if world.satisfies(&task.goal) {
        Verdict::Correct
    } else {
        Verdict::WrongAnswer
    }
}

/// Breadth-first search for a minimum-length plan.
pub fn bfs_plan(task: &BlocksworldTask) -> Option<BlocksworldPlan> {
    bfs_from(&task.initial, &task.goal)
}

pub fn bfs_from(start: &World, goal: &[Atom]) -> Option<BlocksworldPlan> {
    if start.satisfies(goal) {
        return Some(BlocksworldPlan::default());
    }
    let mut parent: HashMap<World, (World, Action)> = HashMap::new();
    let mut queue = VecDeque::from([start.clone()]);
    parent.insert(start.clone(), (start.clone(), Action::Pickup(0)));
    while let Some(w) = queue.pop_front() {
        for (a, next) in w.successors() {
            if parent.contains_key(&next) {
                continue;
            }
            parent.insert(next.clone(), (w.clone(), a));
            if next.satisfies(goal) {
                let mut actions = Vec::new();
                let mut cur = next;
                while &cur != start {
                    let (prev, act) = parent[&cur].clone();
                    actions.push(act);
                    cur = prev;
                }
                actions.reverse();
                return Some(BlocksworldPlan { actions });
            }
            queue.push_back(next);
        }
    }
    None
}

// Token layout.
pub const TOK_PICKUP: Token = 0;
pub const TOK_PUTDOWN: Token = 1;
pub const TOK_STACK: Token = 2;
pub const TOK_UNSTACK: Token = 3;
pub const TOK_BLOCK0: Token = 4;
pub const TOK_END: Token = 10;

pub const VOCAB: [&str; 11] = [
    "pickup", "putdown", "stack", "unstack", "A", "B", "C", "D", "E", "F", "<end>",
];

pub fn block_token(b: Block) -> Token {
    TOK_BLOCK0 + b as Token
}

pub fn token_block(t: Token) -> Option<Block> {
    (TOK_BLOCK0..TOK_BLOCK0 + MAX_BLOCKS as Token).contains(&t).then(|| (t - TOK_BLOCK0) as Block)
}

/// Number of block arguments taken by an action-name token.
pub fn arity(t: Token) -> Option<usize> {
    match t {
        TOK_PICKUP | TOK_PUTDOWN => Some(1),
        TOK_STACK | TOK_UNSTACK => Some(2),
        _ => None,
    }
}

pub fn render(plan: &BlocksworldPlan) -> Vec<Token> {
    let mut out = Vec::new();
    for a in &plan.actions {
        match *a {
            Action::Pickup(x) => out.extend([TOK_PICKUP, block_token(x)]),
            Action::Putdown(x) => out.extend([TOK_PUTDOWN, block_token(x)]),
            Action::Stack(x, y) => out.extend([TOK_STACK, block_token(x), block_token(y)]),
            Action::Unstack(x, y) => out.extend([TOK_UNSTACK, block_token(x), block_token(y)]),
        }
    }
    out.push(TOK_END);
    out
}

/// Parses `action args… action args… <end>`. An empty plan is well formed.
pub fn parse(tokens: &[Token]) -> Option<BlocksworldPlan> {
    let (&last, mut body) = tokens.split_last()?;
    if last != TOK_END {
        return None;
    }
    let mut actions = Vec::new();
    while let Some((&head, rest)) = body.split_first() {
        let n = arity(head)?;
        if rest.len() < n {
            return None;
        }
        let args: Vec<Block> = rest[..n].iter().map(|&t| token_block(t)).collect::<Option<_>>()?;
        actions.push(match head {
            TOK_PICKUP => Action::Pickup(args[0]),
            TOK_PUTDOWN => Action::Putdown(args[0]),
            TOK_STACK => Action::Stack(args[0], args[1]),
            _ => Action::Unstack(args[0], args[1]),
        });
        body = &rest[n..];
    }
    Some(BlocksworldPlan { actions })
}

/// Block-count range sampled for each level.
fn block_range(level: Level) -> (usize, usize) {
    match level {
        Level::Trivial | Level::Easy => (2, 4),
        Level::Medium => (3, 5),
        Level::Hard | Level::Ood => (4, 6),
    }
}

fn random_world(n: usize, rng: &mut Rng) -> World {
    let mut blocks: Vec<Block> = (0..n as Block).collect();
    blocks.shuffle(rng);
    let mut stacks: Vec<Vec<Block>> = Vec::new();
    for b in blocks {
        let slot = rng.gen_range(0..=stacks.len());
        if slot == stacks.len() {
            stacks.push(vec![b]);
        } else {
            stacks[slot].push(b);
        }
    }
    World::new(stacks, None)
}

/// Goal description of a hand-empty world: where every block rests.
pub fn placement_goal(w: &World) -> Vec<Atom> {
    let mut goal: Vec<Atom> = w
        .stacks
        .iter()
        .flat_map(|s| {
            s.iter().enumerate().map(move |(i, &b)| if i == 0 { Atom::OnTable(b) } else { Atom::On(b, s[i - 1]) })
        })
        .collect();
    goal.sort();
    goal
}

/// One task from a dedicated stream: a random goal world, a backward random
/// walk from it, and BFS certification that the optimal plan length is exactly
/// the level's plan length.
pub fn generate_one(level: Level, rng: &mut Rng) -> (BlocksworldTask, BlocksworldPlan) {
    let want = level.blocksworld_plan_len();
    let (lo, hi) = block_range(level);
    loop {
        let n = rng.gen_range(lo..=hi);
        let goal_world = random_world(n, rng);
        let goal = placement_goal(&goal_world);
        let walk = want + rng.gen_range(0..=3);
        let mut w = goal_world.clone();
        let mut last: Option<Action> = None;
        for _ in 0..walk {
            // Actions are reversible, so a forward walk is also a backward one.
            let options: Vec<(Action, World)> = w
                .successors()
                .into_iter()
                .filter(|(a, _)| Some(a.inverse()) != last)
                .collect();
            if options.is_empty() {
                break;
            }
            let (a, next) = options[rng.gen_range(0..options.len())].clone();
            last = Some(a);
            w = next;
        }
        let task = BlocksworldTask {
            initial: w,
            goal,
            level,
            optimal_len: want,
        };
        if let Some(plan) = bfs_plan(&task) {
            if plan.actions.len() == want {
                return (task, plan);
            }
        }
    }
}

pub fn generate(level: Level, count: usize, rng: &mut Rng) -> Vec<(BlocksworldTask, BlocksworldPlan)> {
    let master: u64 = rng.gen();
    (0..count)
        .map(|i| generate_one(level, &mut rng::derived(master, &[i as u64])))
        .collect()
}
