//! Block templates of models generated by special indiscernibles (unary
//! signatures) and the exhaustive search for them.
//!
//! If `x_1 < ... < x_N` (`N >= 3`) are special indiscernibles generating a
//! model `M` of a unary signature, then every element is either *ground*
//! (a value shared by all generators, lying below `x_1`) or of the form
//! `t(x_j)` for a term `t` that is not constant on the generators. The
//! latter form blocks `B_j = {t(x_j)}` with `B_1 < B_2 < ... < B_N`, all
//! ordered alike. A [`Template`] records the ground part, one block, the
//! function maps and the relation values by index pattern; `M(Y)` for a
//! linear order `Y` is the ground part followed by `|Y|` copies of the
//! block.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::indiscernible::{check_special_indiscernibles, IndiscernibleWitness, Kind};
use crate::search::SearchStats;
use crate::structure::{tuples, FiniteStructure};
use crate::syntax::{Atom, FnId, Formula, RelId, Sentence, Signature, Term};

/// Where a function sends an element of the template.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    /// The ground element at this position.
    Ground(usize),
    /// The element at this position of the same block.
    Block(usize),
}

/// Relation key: relation, argument classes and, for block arguments, the
/// rank of their block index among the block arguments (ground arguments
/// get `None`).
pub type RelationKey = (RelId, Vec<Target>, Vec<Option<usize>>);

/// A ground part plus a periodic block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    pub signature: Arc<Signature>,
    /// Number of ground elements.
    pub ground: usize,
    /// Number of elements per block.
    pub block: usize,
    /// Position of the generator inside its block.
    pub generator: usize,
    /// `ground_map[g][f]`: position of `f(g)` in the ground part.
    pub ground_map: Vec<Vec<usize>>,
    /// `block_map[b][f]`: where `f` sends block position `b`.
    pub block_map: Vec<Vec<Target>>,
    /// Ground position of each constant.
    pub constants: Vec<usize>,
    /// Relation values; absent keys are false.
    pub relations: BTreeMap<RelationKey, bool>,
    /// Closure bound of the underlying witness.
    pub steps: usize,
}

/// Normalized ranks of block indices (ground entries are `None`).
pub(crate) fn pattern(indices: &[Option<usize>]) -> Vec<Option<usize>> {
    let mut distinct: Vec<usize> = indices.iter().flatten().copied().collect();
    distinct.sort_unstable();
    distinct.dedup();
    indices
        .iter()
        .map(|i| i.map(|j| distinct.binary_search(&j).expect("present")))
        .collect()
}

impl Template {
    /// Element index of block position `b` in copy `j`.
    pub fn element(&self, j: usize, b: usize) -> usize {
        self.ground + j * self.block + b
    }

    /// Splits an element of `M(k)` into its class and block index.
    pub fn locate(&self, e: usize) -> (Target, Option<usize>) {
        if e < self.ground {
            (Target::Ground(e), None)
        } else {
            let r = e - self.ground;
            (Target::Block(r % self.block), Some(r / self.block))
        }
    }

    /// The structure generated by `k` indiscernibles, with its generators.
    pub fn materialize(&self, k: usize) -> Result<(FiniteStructure, Vec<usize>)> {
        let size = self.ground + k * self.block;
        let sig = &self.signature;
        let mut m = FiniteStructure::new(sig.clone(), size)?;
        for c in sig.constants() {
            m.set_constant(c, self.constants[c.0])?;
        }
        for f in sig.functions() {
            for g in 0..self.ground {
                m.set_function(f, &[g], self.ground_map[g][f.0])?;
            }
            for j in 0..k {
                for b in 0..self.block {
                    let v = match self.block_map[b][f.0] {
                        Target::Ground(g) => g,
                        Target::Block(b2) => self.element(j, b2),
                    };
                    m.set_function(f, &[self.element(j, b)], v)?;
                }
            }
        }
        for r in sig.relations() {
            for args in tuples(size, sig.rel_arity(r)) {
                if self.relation_value(r, &args) {
                    m.set_relation(r, &args, true)?;
                }
            }
        }
        let gens = (0..k).map(|j| self.element(j, self.generator)).collect();
        Ok((m, gens))
    }

    /// Value of `R` on elements of some `M(k)`.
    pub fn relation_value(&self, r: RelId, args: &[usize]) -> bool {
        let located: Vec<(Target, Option<usize>)> = args.iter().map(|&e| self.locate(e)).collect();
        let classes = located.iter().map(|(c, _)| *c).collect();
        let idx: Vec<Option<usize>> = located.iter().map(|(_, j)| *j).collect();
        self.relations
            .get(&(r, classes, pattern(&idx)))
            .copied()
            .unwrap_or(false)
    }

    /// Whether `f` is constant on the generators (maps the generator's
    /// block position into the ground part), per function symbol.
    pub fn classify(&self) -> Vec<(FnId, Target)> {
        self.signature
            .functions()
            .map(|f| (f, self.block_map[self.generator][f.0]))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Elem {
    G(u32),
    B(u32, u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Tgt {
    G(u32),
    B(u32),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum CellKey {
    Const(usize),
    FG(u32, usize),
    FB(u32, usize),
    Rel(usize),
}

type Key = (usize, Vec<Tgt>, Vec<Option<usize>>);

#[derive(Clone, Copy, Debug)]
enum Choice {
    Existing(Tgt),
    NewG(usize),
    NewB(usize),
}

/// Outcome of the template search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TemplateOutcome {
    Found(Box<(Template, IndiscernibleWitness)>),
    Exhausted,
    BudgetExceeded,
}

/// Options for the template search.
#[derive(Clone, Copy, Debug)]
pub struct TemplateOptions {
    /// Number of generators of the materialized witness.
    pub generators: usize,
    /// Closure bound.
    pub steps: usize,
    /// Term-complexity cap for re-verification.
    pub cap: usize,
    /// Node budget.
    pub budget: u64,
}

/// Searches for a template whose stretchings satisfy `s`. `Exhausted`
/// means no finite model is generated by special indiscernibles within
/// `steps` closure steps.
pub fn search_template(
    s: &Sentence,
    opts: TemplateOptions,
) -> Result<(TemplateOutcome, SearchStats)> {
    let sig = s.signature_arc().clone();
    if let Some(f) = sig.functions().find(|&f| sig.fn_arity(f) != 1) {
        return Err(Error::NotUnary(sig.fn_name(f).to_string()));
    }
    if opts.steps == 0 {
        return Err(Error::Precondition(
            "closure bound must be at least 1".into(),
        ));
    }
    let mut st = TState::new(s, opts);
    st.b_order.push(0);
    let outcome = if !st.create(Tgt::B(0), 0) {
        TemplateOutcome::Exhausted
    } else {
        match st.dfs()? {
            Flow::Found(t) => TemplateOutcome::Found(t),
            Flow::Continue => TemplateOutcome::Exhausted,
            Flow::Budget => TemplateOutcome::BudgetExceeded,
        }
    };
    Ok((outcome, st.stats))
}

enum Flow {
    Continue,
    Found(Box<(Template, IndiscernibleWitness)>),
    Budget,
}

enum Undo {
    Watch {
        inst: u32,
        from: Option<usize>,
        to: usize,
    },
    Instances(usize),
}

struct TState<'s> {
    sentence: &'s Sentence,
    sig: Arc<Signature>,
    conjuncts: Arc<Vec<(Formula, Vec<usize>)>>,
    opts: TemplateOptions,
    stats: SearchStats,
    g_order: Vec<u32>,
    b_order: Vec<u32>,
    g_layer: Vec<usize>,
    b_layer: Vec<usize>,
    created: Vec<Tgt>,
    consts: Vec<Option<u32>>,
    fg: Vec<Vec<Option<u32>>>,
    fb: Vec<Vec<Option<Tgt>>>,
    keys: Vec<Key>,
    key_ids: HashMap<Key, usize>,
    key_val: Vec<Option<bool>>,
    cells: HashMap<CellKey, usize>,
    cell_keys: Vec<CellKey>,
    watch: Vec<Vec<u32>>,
    instances: Vec<(u32, Vec<Elem>)>,
    undo: Vec<Undo>,
}

type Tri = std::result::Result<bool, usize>;

impl<'s> TState<'s> {
    fn new(s: &'s Sentence, opts: TemplateOptions) -> Self {
        let conjuncts = s
            .matrix()
            .conjuncts()
            .into_iter()
            .map(|c| (c.clone(), c.vars().into_iter().collect()))
            .collect();
        TState {
            sentence: s,
            sig: s.signature_arc().clone(),
            conjuncts: Arc::new(conjuncts),
            opts,
            stats: SearchStats::default(),
            g_order: Vec::new(),
            b_order: Vec::new(),
            g_layer: Vec::new(),
            b_layer: Vec::new(),
            created: Vec::new(),
            consts: vec![None; s.signature().num_constants()],
            fg: Vec::new(),
            fb: Vec::new(),
            keys: Vec::new(),
            key_ids: HashMap::new(),
            key_val: Vec::new(),
            cells: HashMap::new(),
            cell_keys: Vec::new(),
            watch: Vec::new(),
            instances: Vec::new(),
            undo: Vec::new(),
        }
    }

    fn cell(&mut self, key: CellKey) -> usize {
        if let Some(&id) = self.cells.get(&key) {
            return id;
        }
        let id = self.cell_keys.len();
        self.cells.insert(key.clone(), id);
        self.cell_keys.push(key);
        self.watch.push(Vec::new());
        id
    }

    fn g_pos(&self, g: u32) -> usize {
        self.g_order
            .iter()
            .position(|&x| x == g)
            .expect("live ground element")
    }

    fn b_pos(&self, b: u32) -> usize {
        self.b_order
            .iter()
            .position(|&x| x == b)
            .expect("live block element")
    }

    fn less(&self, a: Elem, b: Elem) -> bool {
        match (a, b) {
            (Elem::G(x), Elem::G(y)) => self.g_pos(x) < self.g_pos(y),
            (Elem::G(_), Elem::B(..)) => true,
            (Elem::B(..), Elem::G(_)) => false,
            (Elem::B(x, i), Elem::B(y, j)) => (i, self.b_pos(x)) < (j, self.b_pos(y)),
        }
    }

    fn term(&mut self, t: &Term, env: &[Elem]) -> std::result::Result<Elem, usize> {
        match t {
            Term::Var(v) => Ok(env[*v]),
            Term::Const(c) => match self.consts[c.0] {
                Some(g) => Ok(Elem::G(g)),
                None => Err(self.cell(CellKey::Const(c.0))),
            },
            Term::App(f, args) => {
                let e = self.term(&args[0], env)?;
                match e {
                    Elem::G(g) => match self.fg[g as usize][f.0] {
                        Some(v) => Ok(Elem::G(v)),
                        None => Err(self.cell(CellKey::FG(g, f.0))),
                    },
                    Elem::B(b, j) => match self.fb[b as usize][f.0] {
                        Some(Tgt::G(v)) => Ok(Elem::G(v)),
                        Some(Tgt::B(v)) => Ok(Elem::B(v, j)),
                        None => Err(self.cell(CellKey::FB(b, f.0))),
                    },
                }
            }
        }
    }

    fn key_of(&mut self, r: RelId, elems: &[Elem]) -> usize {
        let classes: Vec<Tgt> = elems
            .iter()
            .map(|e| match e {
                Elem::G(g) => Tgt::G(*g),
                Elem::B(b, _) => Tgt::B(*b),
            })
            .collect();
        let idx: Vec<Option<usize>> = elems
            .iter()
            .map(|e| match e {
                Elem::G(_) => None,
                Elem::B(_, j) => Some(*j as usize),
            })
            .collect();
        let key = (r.0, classes, pattern(&idx));
        if let Some(&k) = self.key_ids.get(&key) {
            return k;
        }
        let k = self.keys.len();
        self.key_ids.insert(key.clone(), k);
        self.keys.push(key);
        self.key_val.push(None);
        k
    }

    fn atom(&mut self, a: &Atom, env: &[Elem]) -> Tri {
        match a {
            Atom::Eq(x, y) => {
                let x = self.term(x, env);
                let y = self.term(y, env);
                Ok(x? == y?)
            }
            Atom::Lt(x, y) => {
                let x = self.term(x, env);
                let y = self.term(y, env);
                let (x, y) = (x?, y?);
                Ok(self.less(x, y))
            }
            Atom::Rel(r, args) => {
                let mut elems = Vec::with_capacity(args.len());
                for a in args {
                    elems.push(self.term(a, env)?);
                }
                let k = self.key_of(*r, &elems);
                match self.key_val[k] {
                    Some(v) => Ok(v),
                    None => Err(self.cell(CellKey::Rel(k))),
                }
            }
        }
    }

    fn formula(&mut self, f: &Formula, env: &[Elem]) -> Tri {
        match f {
            Formula::True => Ok(true),
            Formula::False => Ok(false),
            Formula::Atom(a) => self.atom(a, env),
            Formula::Not(g) => self.formula(g, env).map(|b| !b),
            Formula::And(gs) | Formula::Or(gs) => {
                let short = matches!(f, Formula::Or(_));
                let mut blocked = None;
                for g in gs {
                    match self.formula(g, env) {
                        Ok(b) if b == short => return Ok(short),
                        Ok(_) => {}
                        Err(c) => blocked = blocked.or(Some(c)),
                    }
                }
                blocked.map_or(Ok(!short), Err)
            }
            Formula::Implies(a, b) => match (self.formula(a, env), self.formula(b, env)) {
                (Ok(false), _) | (_, Ok(true)) => Ok(true),
                (Ok(true), Ok(false)) => Ok(false),
                (Err(c), _) | (_, Err(c)) => Err(c),
            },
            Formula::Iff(a, b) => Ok(self.formula(a, env)? == self.formula(b, env)?),
        }
    }

    fn eval_instance(&mut self, i: usize) -> Tri {
        let conjuncts = self.conjuncts.clone();
        let (ci, env) = &self.instances[i];
        let env = env.clone();
        self.formula(&conjuncts[*ci as usize].0, &env)
    }

    /// Adds an element and the clause instances it takes part in; false
    /// if one of them is already violated. Always leaves an undo record.
    fn create(&mut self, t: Tgt, layer: usize) -> bool {
        let nf = self.sig.num_functions();
        match t {
            Tgt::G(_) => {
                self.g_layer.push(layer);
                self.fg.push(vec![None; nf]);
            }
            Tgt::B(_) => {
                self.b_layer.push(layer);
                self.fb.push(vec![None; nf]);
            }
        }
        self.created.push(t);
        let first_instance = self.instances.len();
        self.undo.push(Undo::Instances(first_instance));
        let conjuncts = self.conjuncts.clone();
        let q = self.sentence.q();
        for (ci, (_, vars)) in conjuncts.iter().enumerate() {
            let v = vars.len();
            let mut old: Vec<Elem> = self
                .g_order
                .iter()
                .filter(|&&g| Tgt::G(g) != t)
                .map(|&g| Elem::G(g))
                .collect();
            for &b in &self.b_order {
                if Tgt::B(b) != t {
                    old.extend((0..v as u32).map(|j| Elem::B(b, j)));
                }
            }
            let new: Vec<Elem> = match t {
                Tgt::G(g) => vec![Elem::G(g)],
                Tgt::B(b) => (0..v as u32).map(|j| Elem::B(b, j)).collect(),
            };
            if v == 0 {
                if first_instance == 0 && self.created.len() == 1 {
                    self.instances.push((ci as u32, vec![Elem::G(0); q]));
                }
                continue;
            }
            let mut all = old.clone();
            all.extend(new.iter().copied());
            for first_new in 0..v {
                let mut ranges: Vec<&[Elem]> = Vec::with_capacity(v);
                for p in 0..v {
                    ranges.push(match p.cmp(&first_new) {
                        std::cmp::Ordering::Less => &old,
                        std::cmp::Ordering::Equal => &new,
                        std::cmp::Ordering::Greater => &all,
                    });
                }
                let mut pos = vec![0usize; v];
                if ranges.iter().any(|r| r.is_empty()) {
                    continue;
                }
                loop {
                    let chosen: Vec<Elem> = (0..v).map(|p| ranges[p][pos[p]]).collect();
                    if normalized(&chosen) {
                        let mut env = vec![Elem::G(0); q];
                        for (var, e) in vars.iter().zip(&chosen) {
                            env[*var] = *e;
                        }
                        self.instances.push((ci as u32, env));
                    }
                    let mut p = v;
                    loop {
                        if p == 0 {
                            break;
                        }
                        p -= 1;
                        pos[p] += 1;
                        if pos[p] < ranges[p].len() {
                            break;
                        }
                        pos[p] = 0;
                        if p == 0 {
                            p = usize::MAX;
                            break;
                        }
                    }
                    if p == usize::MAX {
                        break;
                    }
                }
            }
        }
        let mut kept = first_instance;
        let total = self.instances.len();
        let mut ok = true;
        for i in first_instance..total {
            if !ok {
                break;
            }
            match self.eval_instance(i) {
                Ok(true) => {}
                Ok(false) => {
                    self.stats.conflicts += 1;
                    ok = false;
                }
                Err(c) => {
                    self.instances.swap(kept, i);
                    kept += 1;
                    let _ = c;
                }
            }
        }
        self.instances
            .truncate(if ok { kept } else { first_instance });
        if !ok {
            return false;
        }
        for i in first_instance..kept {
            let c = match self.eval_instance(i) {
                Err(c) => c,
                _ => unreachable!("instance was blocked a moment ago"),
            };
            self.watch[c].push(i as u32);
            self.undo.push(Undo::Watch {
                inst: i as u32,
                from: None,
                to: c,
            });
        }
        true
    }

    fn propagate(&mut self, cell: usize) -> bool {
        let list = std::mem::take(&mut self.watch[cell]);
        let mut kept = Vec::with_capacity(list.len());
        for (k, &i) in list.iter().enumerate() {
            match self.eval_instance(i as usize) {
                Ok(true) => kept.push(i),
                Ok(false) => {
                    kept.extend_from_slice(&list[k..]);
                    self.watch[cell] = kept;
                    self.stats.conflicts += 1;
                    return false;
                }
                Err(c) => {
                    self.watch[c].push(i);
                    self.undo.push(Undo::Watch {
                        inst: i,
                        from: Some(cell),
                        to: c,
                    });
                }
            }
        }
        self.watch[cell] = kept;
        true
    }

    fn rollback(&mut self, mark: usize) {
        while self.undo.len() > mark {
            match self.undo.pop().expect("undo entry") {
                Undo::Watch { inst, from, to } => {
                    let list = &mut self.watch[to];
                    let pos = list
                        .iter()
                        .rposition(|&j| j == inst)
                        .expect("watched instance");
                    list.swap_remove(pos);
                    if let Some(from) = from {
                        self.watch[from].push(inst);
                    }
                }
                Undo::Instances(start) => {
                    self.instances.truncate(start);
                    match self.created.pop().expect("created element") {
                        Tgt::G(g) => {
                            self.g_layer.pop();
                            self.fg.pop();
                            self.g_order.retain(|&x| x != g);
                        }
                        Tgt::B(b) => {
                            self.b_layer.pop();
                            self.fb.pop();
                            self.b_order.retain(|&x| x != b);
                        }
                    }
                }
            }
        }
    }

    fn layer(&self, t: Tgt) -> usize {
        match t {
            Tgt::G(g) => self.g_layer[g as usize],
            Tgt::B(b) => self.b_layer[b as usize],
        }
    }

    /// The next undecided function or constant cell, in breadth-first
    /// order, with the layer of its argument.
    fn next_demand(&self) -> Option<(CellKey, usize, bool)> {
        for c in 0..self.consts.len() {
            if self.consts[c].is_none() {
                return Some((CellKey::Const(c), 0, true));
            }
        }
        let mut best: Option<(usize, usize, CellKey, bool)> = None;
        for (seq, &t) in self.created.iter().enumerate() {
            let layer = self.layer(t);
            if best.as_ref().is_some_and(|b| b.0 <= layer) {
                continue;
            }
            for f in 0..self.sig.num_functions() {
                let (open, key, ground) = match t {
                    Tgt::G(g) => (self.fg[g as usize][f].is_none(), CellKey::FG(g, f), true),
                    Tgt::B(b) => (self.fb[b as usize][f].is_none(), CellKey::FB(b, f), false),
                };
                if open {
                    best = Some((layer, seq, key, ground));
                    break;
                }
            }
        }
        best.map(|(layer, _, key, ground)| (key, layer, ground))
    }

    fn choices(&self, layer: usize, ground_only: bool) -> Vec<Choice> {
        let allow_new = layer < self.opts.steps;
        let mut out: Vec<Choice> = self
            .g_order
            .iter()
            .map(|&g| Choice::Existing(Tgt::G(g)))
            .collect();
        if !ground_only {
            out.extend(self.b_order.iter().map(|&b| Choice::Existing(Tgt::B(b))));
        }
        if allow_new {
            out.extend((0..=self.g_order.len()).map(Choice::NewG));
            if !ground_only {
                out.extend((0..=self.b_order.len()).map(Choice::NewB));
            }
        }
        out
    }

    fn set_cell(&mut self, key: &CellKey, value: Option<Tgt>) {
        match *key {
            CellKey::Const(c) => {
                self.consts[c] = value.map(|t| match t {
                    Tgt::G(g) => g,
                    Tgt::B(_) => unreachable!("constants are ground"),
                })
            }
            CellKey::FG(g, f) => {
                self.fg[g as usize][f] = value.map(|t| match t {
                    Tgt::G(v) => v,
                    Tgt::B(_) => unreachable!("ground maps to ground"),
                })
            }
            CellKey::FB(b, f) => self.fb[b as usize][f] = value,
            CellKey::Rel(_) => unreachable!("relation cells are set separately"),
        }
    }

    fn dfs(&mut self) -> Result<Flow> {
        let open_key = (0..self.keys.len()).find(|&k| {
            self.key_val[k].is_none()
                && self
                    .cells
                    .get(&CellKey::Rel(k))
                    .is_some_and(|&c| !self.watch[c].is_empty())
        });
        if let Some(k) = open_key {
            let cell = self.cells[&CellKey::Rel(k)];
            for v in [false, true] {
                if self.stats.nodes >= self.opts.budget {
                    return Ok(Flow::Budget);
                }
                self.stats.nodes += 1;
                let mark = self.undo.len();
                self.key_val[k] = Some(v);
                let flow = if self.propagate(cell) {
                    self.dfs()?
                } else {
                    Flow::Continue
                };
                self.key_val[k] = None;
                self.rollback(mark);
                if !matches!(flow, Flow::Continue) {
                    return Ok(flow);
                }
            }
            return Ok(Flow::Continue);
        }
        if let Some((key, layer, ground_only)) = self.next_demand() {
            let cell = self.cell(key.clone());
            for choice in self.choices(layer, ground_only) {
                if self.stats.nodes >= self.opts.budget {
                    return Ok(Flow::Budget);
                }
                self.stats.nodes += 1;
                let mark = self.undo.len();
                let mut ok = true;
                let target = match choice {
                    Choice::Existing(t) => t,
                    Choice::NewG(pos) => {
                        let g = self.g_layer.len() as u32;
                        self.g_order.insert(pos, g);
                        ok = self.create(Tgt::G(g), layer + 1);
                        Tgt::G(g)
                    }
                    Choice::NewB(pos) => {
                        let b = self.b_layer.len() as u32;
                        self.b_order.insert(pos, b);
                        ok = self.create(Tgt::B(b), layer + 1);
                        Tgt::B(b)
                    }
                };
                let flow = if ok {
                    self.set_cell(&key, Some(target));
                    let flow = if self.propagate(cell) {
                        self.dfs()?
                    } else {
                        Flow::Continue
                    };
                    self.set_cell(&key, None);
                    flow
                } else {
                    Flow::Continue
                };
                self.rollback(mark);
                if !matches!(flow, Flow::Continue) {
                    return Ok(flow);
                }
            }
            return Ok(Flow::Continue);
        }
        let template = self.template();
        let (model, generators) = template.materialize(self.opts.generators)?;
        let witness = IndiscernibleWitness {
            model,
            generators,
            kind: Kind::Special,
            steps: self.opts.steps,
        };
        if witness.model.satisfies(self.sentence)?
            && check_special_indiscernibles(&witness.model, &witness.generators, self.opts.cap)?
            && witness.verify(self.opts.cap)?
        {
            return Ok(Flow::Found(Box::new((template, witness))));
        }
        self.stats.prunes += 1;
        Ok(Flow::Continue)
    }

    fn template(&self) -> Template {
        let gp = |g: u32| self.g_pos(g);
        let bp = |b: u32| self.b_pos(b);
        let conv = |t: Tgt| match t {
            Tgt::G(g) => Target::Ground(gp(g)),
            Tgt::B(b) => Target::Block(bp(b)),
        };
        let nf = self.sig.num_functions();
        let ground_map = self
            .g_order
            .iter()
            .map(|&g| {
                (0..nf)
                    .map(|f| gp(self.fg[g as usize][f].expect("decided")))
                    .collect()
            })
            .collect();
        let block_map = self
            .b_order
            .iter()
            .map(|&b| {
                (0..nf)
                    .map(|f| conv(self.fb[b as usize][f].expect("decided")))
                    .collect()
            })
            .collect();
        let constants = self
            .consts
            .iter()
            .map(|c| gp(c.expect("decided")))
            .collect();
        let live = |t: &Tgt| match *t {
            Tgt::G(g) => (g as usize) < self.g_layer.len(),
            Tgt::B(b) => (b as usize) < self.b_layer.len(),
        };
        let mut relations = BTreeMap::new();
        for (k, (r, classes, pat)) in self.keys.iter().enumerate() {
            if let Some(v) = self.key_val[k] {
                if classes.iter().all(live) {
                    relations.insert(
                        (
                            RelId(*r),
                            classes.iter().map(|&t| conv(t)).collect(),
                            pat.clone(),
                        ),
                        v,
                    );
                }
            }
        }
        Template {
            signature: self.sig.clone(),
            ground: self.g_order.len(),
            block: self.b_order.len(),
            generator: bp(0),
            ground_map,
            block_map,
            constants,
            relations,
            steps: self.opts.steps,
        }
    }
}

/// Block indices used by an assignment form an initial segment `0..m`.
fn normalized(elems: &[Elem]) -> bool {
    let mut used = 0u64;
    for e in elems {
        if let Elem::B(_, j) = e {
            used |= 1 << j;
        }
    }
    used & (used + 1) == 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_sentence;

    fn opts(steps: usize) -> TemplateOptions {
        TemplateOptions {
            generators: 4,
            steps,
            cap: steps + 1,
            budget: 1_000_000,
        }
    }

    #[test]
    fn pure_order_has_trivial_template() {
        let s = parse_sentence("forall x . x = x").unwrap();
        let (out, _) = search_template(&s, opts(1)).unwrap();
        let TemplateOutcome::Found(found) = out else {
            panic!("{out:?}")
        };
        let (t, w) = *found;
        assert_eq!((t.ground, t.block), (0, 1));
        assert_eq!(w.model.size(), 4);
    }

    #[test]
    fn last_element_constant_has_no_template() {
        let s = parse_sentence("sig { const a; }\nforall y . y <= a").unwrap();
        let (out, _) = search_template(&s, opts(1)).unwrap();
        assert_eq!(out, TemplateOutcome::Exhausted);
    }

    #[test]
    fn successor_pairs_stretch() {
        let s = parse_sentence(
            "sig { fn n/1; rel A/1; }\n\
             forall x . (A(x) -> x < n(x) & !A(n(x))) & (!A(x) -> n(x) = x)\n\
             forall x y . A(x) & x < y & y < n(x) -> false",
        )
        .unwrap();
        let (out, _) = search_template(&s, opts(1)).unwrap();
        let TemplateOutcome::Found(found) = out else {
            panic!("{out:?}")
        };
        let (t, w) = *found;
        assert!(w.model.satisfies(&s).unwrap());
        assert!(t.block >= 1);
        let (m6, gens) = t.materialize(6).unwrap();
        assert!(m6.satisfies(&s).unwrap());
        assert_eq!(gens.len(), 6);
    }

    #[test]
    fn example_has_no_template() {
        let s = parse_sentence(include_str!("../fixtures/example2.sent")).unwrap();
        let (out, stats) = search_template(&s, opts(2)).unwrap();
        assert_eq!(out, TemplateOutcome::Exhausted, "{stats:?}");
    }

    #[test]
    fn binary_functions_rejected() {
        let s = parse_sentence("sig { fn g/2; }\nforall x . g(x, x) = x").unwrap();
        assert!(matches!(
            search_template(&s, opts(1)),
            Err(Error::NotUnary(_))
        ));
    }
}
