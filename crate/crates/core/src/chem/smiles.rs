//! SMILES reader and writer for the supported subset.
//!
//! Supported: organic-subset atoms `C N O F P S Cl Br` and aromatic
//! `c n o s p`; bracket atoms with hydrogen count, charge and `@`/`@@`;
//! bonds `- = # :` and directional `/ \`; branches; ring closures `1`-`9` and
//! `%nn`; `.` fragment separators. Aromatic input is kekulized. The writer
//! emits kekulé form with explicit stereo where the graph carries it.

use std::collections::BTreeMap;

use thiserror::Error;

use super::element::{BondOrder, Element};
use super::graph::{permutation_is_odd, Atom, DoubleBondConfig, MolGraph, Parity};
use super::kekule::kekulize;
use super::rings::{apply_aromatic_flags, ring_bonds};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SmilesError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unsupported element '{symbol}' at position {pos}")]
    UnsupportedElement { pos: usize, symbol: String },
    #[error("unclosed ring bond {0}")]
    UnclosedRing(u32),
    #[error("kekulization failed: aromatic system has no valid single/double alternation")]
    Kekulization,
    #[error("valence violation on atom {atom} ({element})")]
    Valence { atom: usize, element: Element },
}

fn syntax(pos: usize, msg: impl Into<String>) -> SmilesError {
    SmilesError::Syntax {
        pos,
        msg: msg.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BondKind {
    Implicit,
    Single,
    Double,
    Triple,
    Aromatic,
}

#[derive(Clone, Copy, Debug)]
struct PendingBond {
    kind: BondKind,
    /// +1 for `/`, -1 for `\`.
    mark: Option<i8>,
}

const NO_BOND: PendingBond = PendingBond {
    kind: BondKind::Implicit,
    mark: None,
};

/// Neighbor slot in written order; `HYDROGEN` stands for a bracket hydrogen.
const HYDROGEN: usize = usize::MAX;

struct RawAtom {
    element: Element,
    aromatic: bool,
    bracket_h: Option<u8>,
    charge: i8,
    chiral: Option<Parity>,
    slots: Vec<usize>,
}

struct RawBond {
    /// Atom written first; direction marks are relative to from -> to.
    from: usize,
    to: usize,
    kind: BondKind,
    mark: Option<i8>,
}

struct OpenRing {
    atom: usize,
    bond: PendingBond,
    slot: usize,
}

/// Parses a SMILES string into a kekulized, hydrogen-suppressed graph.
pub fn parse_smiles(text: &str) -> Result<MolGraph, SmilesError> {
    let chars: Vec<char> = text.trim().chars().collect();
    let mut atoms: Vec<RawAtom> = Vec::new();
    let mut bonds: Vec<RawBond> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<(usize, PendingBond)> = None;
    let mut branches: Vec<usize> = Vec::new();
    let mut rings: BTreeMap<u32, OpenRing> = BTreeMap::new();
    let mut i = 0;

    while i < chars.len() {
        let c = chars[i];
        let start = i;
        match c {
            '-' | '=' | '#' | ':' | '/' | '\\' => {
                if pending.is_some() {
                    return Err(syntax(i, "two consecutive bond symbols"));
                }
                if prev.is_none() {
                    return Err(syntax(i, "bond symbol without a preceding atom"));
                }
                let pb = match c {
                    '-' => PendingBond {
                        kind: BondKind::Single,
                        mark: None,
                    },
                    '=' => PendingBond {
                        kind: BondKind::Double,
                        mark: None,
                    },
                    '#' => PendingBond {
                        kind: BondKind::Triple,
                        mark: None,
                    },
                    ':' => PendingBond {
                        kind: BondKind::Aromatic,
                        mark: None,
                    },
                    '/' => PendingBond {
                        kind: BondKind::Single,
                        mark: Some(1),
                    },
                    _ => PendingBond {
                        kind: BondKind::Single,
                        mark: Some(-1),
                    },
                };
                pending = Some((i, pb));
                i += 1;
            }
            '(' => {
                let Some(p) = prev else {
                    return Err(syntax(i, "branch without a preceding atom"));
                };
                if pending.is_some() {
                    return Err(syntax(i, "bond symbol before '('"));
                }
                branches.push(p);
                i += 1;
            }
            ')' => {
                let Some(p) = branches.pop() else {
                    return Err(syntax(i, "unmatched ')'"));
                };
                if pending.is_some() {
                    return Err(syntax(i, "dangling bond before ')'"));
                }
                prev = Some(p);
                i += 1;
            }
            '.' => {
                if pending.is_some() || prev.is_none() {
                    return Err(syntax(i, "misplaced '.'"));
                }
                if !branches.is_empty() {
                    return Err(syntax(i, "'.' inside a branch"));
                }
                prev = None;
                i += 1;
            }
            '0'..='9' | '%' => {
                let Some(a) = prev else {
                    return Err(syntax(i, "ring-closure digit without a preceding atom"));
                };
                let number = if c == '%' && chars.get(i + 1) == Some(&'(') {
                    let close = chars[i..]
                        .iter()
                        .position(|&x| x == ')')
                        .map(|p| p + i)
                        .ok_or_else(|| syntax(i, "unterminated '%(' ring number"))?;
                    let d: String = chars[i + 2..close].iter().collect();
                    if d.is_empty() || d.len() > 5 || !d.chars().all(|x| x.is_ascii_digit()) {
                        return Err(syntax(i, "'%(' must enclose a ring number"));
                    }
                    i = close + 1;
                    d.parse::<u32>().expect("digits")
                } else if c == '%' {
                    let d: String = chars
                        .get(i + 1..i + 3)
                        .map(|s| s.iter().collect())
                        .unwrap_or_default();
                    if d.len() != 2 || !d.chars().all(|x| x.is_ascii_digit()) {
                        return Err(syntax(i, "'%' must be followed by two digits"));
                    }
                    i += 3;
                    d.parse::<u32>().expect("two digits")
                } else {
                    i += 1;
                    c.to_digit(10).expect("digit")
                };
                let here = pending.take().map(|(_, b)| b).unwrap_or(NO_BOND);
                if let Some(open) = rings.remove(&number) {
                    let kind = merge_kinds(open.bond.kind, here.kind).ok_or_else(|| {
                        syntax(
                            start,
                            format!("conflicting bond orders on ring bond {number}"),
                        )
                    })?;
                    if open.atom == a {
                        return Err(syntax(
                            start,
                            format!("ring bond {number} closes on its own atom"),
                        ));
                    }
                    if bonds.iter().any(|b| {
                        (b.from == open.atom && b.to == a) || (b.from == a && b.to == open.atom)
                    }) {
                        return Err(syntax(
                            start,
                            format!("ring bond {number} duplicates an existing bond"),
                        ));
                    }
                    // A mark written at the closing atom reads from it toward the opener.
                    let mark = open.bond.mark.or(here.mark.map(|m| -m));
                    bonds.push(RawBond {
                        from: open.atom,
                        to: a,
                        kind,
                        mark,
                    });
                    atoms[open.atom].slots[open.slot] = a;
                    atoms[a].slots.push(open.atom);
                } else {
                    let slot = atoms[a].slots.len();
                    atoms[a].slots.push(usize::MAX - 1);
                    rings.insert(
                        number,
                        OpenRing {
                            atom: a,
                            bond: here,
                            slot,
                        },
                    );
                }
            }
            '[' => {
                let close = chars[i..]
                    .iter()
                    .position(|&x| x == ']')
                    .map(|p| p + i)
                    .ok_or_else(|| syntax(i, "unterminated bracket atom"))?;
                let raw = parse_bracket(&chars[i + 1..close], i + 1)?;
                i = close + 1;
                push_atom(&mut atoms, &mut bonds, raw, &mut prev, &mut pending);
            }
            _ if c.is_ascii_alphabetic() => {
                let (symbol, len) = if (c == 'C' && chars.get(i + 1) == Some(&'l'))
                    || (c == 'B' && chars.get(i + 1) == Some(&'r'))
                {
                    (chars[i..i + 2].iter().collect::<String>(), 2)
                } else {
                    (c.to_string(), 1)
                };
                let (element, aromatic) =
                    organic_symbol(&symbol).ok_or_else(|| SmilesError::UnsupportedElement {
                        pos: i,
                        symbol: symbol.clone(),
                    })?;
                i += len;
                let raw = RawAtom {
                    element,
                    aromatic,
                    bracket_h: None,
                    charge: 0,
                    chiral: None,
                    slots: Vec::new(),
                };
                push_atom(&mut atoms, &mut bonds, raw, &mut prev, &mut pending);
            }
            _ => return Err(syntax(i, format!("unexpected character '{c}'"))),
        }
    }
    if let Some((pos, _)) = pending {
        return Err(syntax(pos, "dangling bond at end of input"));
    }
    if !branches.is_empty() {
        return Err(syntax(chars.len(), "unclosed branch"));
    }
    if let Some((&number, _)) = rings.iter().next() {
        return Err(SmilesError::UnclosedRing(number));
    }
    if atoms.is_empty() {
        return Err(syntax(0, "empty SMILES"));
    }
    assemble(atoms, bonds)
}

fn merge_kinds(a: BondKind, b: BondKind) -> Option<BondKind> {
    match (a, b) {
        (BondKind::Implicit, x) | (x, BondKind::Implicit) => Some(x),
        (x, y) if x == y => Some(x),
        _ => None,
    }
}

fn organic_symbol(s: &str) -> Option<(Element, bool)> {
    Some(match s {
        "c" => (Element::C, true),
        "n" => (Element::N, true),
        "o" => (Element::O, true),
        "s" => (Element::S, true),
        "p" => (Element::P, true),
        _ => (Element::from_symbol(s)?, false),
    })
}

fn push_atom(
    atoms: &mut Vec<RawAtom>,
    bonds: &mut Vec<RawBond>,
    mut raw: RawAtom,
    prev: &mut Option<usize>,
    pending: &mut Option<(usize, PendingBond)>,
) {
    let idx = atoms.len();
    let has_h = raw.bracket_h.is_some_and(|h| h > 0);
    if let Some(p) = *prev {
        let pb = pending.take().map(|(_, b)| b).unwrap_or(NO_BOND);
        bonds.push(RawBond {
            from: p,
            to: idx,
            kind: pb.kind,
            mark: pb.mark,
        });
        atoms[p].slots.push(idx);
        raw.slots.push(p);
    }
    if has_h {
        raw.slots.push(HYDROGEN);
    }
    atoms.push(raw);
    *prev = Some(idx);
}

fn parse_bracket(body: &[char], offset: usize) -> Result<RawAtom, SmilesError> {
    let mut i = 0;
    if body.first().is_some_and(|c| c.is_ascii_digit()) {
        return Err(syntax(offset, "isotopes are not supported"));
    }
    let sym_len = match body {
        ['C', 'l', ..] | ['B', 'r', ..] => 2,
        [c, ..] if c.is_ascii_alphabetic() => 1,
        _ => return Err(syntax(offset, "bracket atom without element")),
    };
    let symbol: String = body[..sym_len].iter().collect();
    let (element, aromatic) = organic_symbol(&symbol).ok_or(SmilesError::UnsupportedElement {
        pos: offset,
        symbol: symbol.clone(),
    })?;
    i += sym_len;
    let mut chiral = None;
    if body.get(i) == Some(&'@') {
        if body.get(i + 1) == Some(&'@') {
            chiral = Some(Parity::Cw);
            i += 2;
        } else {
            chiral = Some(Parity::Ccw);
            i += 1;
        }
    }
    let mut h = 0u8;
    if body.get(i) == Some(&'H') {
        i += 1;
        h = 1;
        if let Some(d) = body.get(i).and_then(|c| c.to_digit(10)) {
            h = d as u8;
            i += 1;
        }
    }
    let mut charge: i8 = 0;
    if let Some(&sign @ ('+' | '-')) = body.get(i) {
        let unit: i8 = if sign == '+' { 1 } else { -1 };
        i += 1;
        charge = unit;
        if let Some(d) = body.get(i).and_then(|c| c.to_digit(10)) {
            charge = unit * d as i8;
            i += 1;
        } else {
            while body.get(i) == Some(&sign) {
                charge += unit;
                i += 1;
            }
        }
    }
    if i != body.len() {
        return Err(syntax(offset + i, "unsupported bracket-atom content"));
    }
    Ok(RawAtom {
        element,
        aromatic,
        bracket_h: Some(h),
        charge,
        chiral,
        slots: Vec::new(),
    })
}

fn assemble(atoms: Vec<RawAtom>, bonds: Vec<RawBond>) -> Result<MolGraph, SmilesError> {
    let mut g = MolGraph::new();
    for a in &atoms {
        let mut atom = Atom::new(a.element);
        atom.charge = a.charge;
        atom.hydrogens = a.bracket_h.unwrap_or(0);
        g.add_atom(atom);
    }
    for b in &bonds {
        let order = match b.kind {
            BondKind::Double => BondOrder::Double,
            BondKind::Triple => BondOrder::Triple,
            _ => BondOrder::Single,
        };
        g.add_bond(b.from, b.to, order)
            .map_err(|e| syntax(0, e.to_string()))?;
    }

    // Aromatic bonds: explicit ':' or implicit between two aromatic atoms on a ring.
    let in_ring = ring_bonds(&g);
    let candidate: Vec<bool> = bonds
        .iter()
        .enumerate()
        .map(|(i, b)| match b.kind {
            BondKind::Aromatic => true,
            BondKind::Implicit => atoms[b.from].aromatic && atoms[b.to].aromatic && in_ring[i],
            _ => false,
        })
        .collect();
    let mut needs = vec![false; atoms.len()];
    for (a, raw) in atoms.iter().enumerate() {
        if !raw.aromatic {
            continue;
        }
        let used = g.bond_order_sum(a) + raw.bracket_h.map_or(0, u32::from);
        let target = raw.element.target_valence(raw.charge, used);
        needs[a] = target > used;
    }
    let edges: Vec<(usize, usize, usize)> = bonds
        .iter()
        .enumerate()
        .filter(|(i, _)| candidate[*i])
        .map(|(i, b)| (b.from, b.to, i))
        .collect();
    if needs.iter().any(|&x| x) {
        let doubles = kekulize(&needs, &edges).ok_or(SmilesError::Kekulization)?;
        for d in doubles {
            g.bond_mut(d).order = BondOrder::Double;
        }
    }

    for (a, raw) in atoms.iter().enumerate() {
        if raw.bracket_h.is_none() {
            g.atom_mut(a).hydrogens = g.default_hydrogens(a);
        }
        let atom = g.atom(a);
        if g.bond_order_sum(a) + u32::from(atom.hydrogens)
            > atom.element.max_valence_charged(atom.charge)
        {
            return Err(SmilesError::Valence {
                atom: a,
                element: atom.element,
            });
        }
    }

    // Tetrahedral centers: the written slot order against index order.
    for (a, raw) in atoms.iter().enumerate() {
        let Some(sense) = raw.chiral else { continue };
        if raw.slots.len() != 4 {
            continue;
        }
        g.atom_mut(a).parity = sense.flip_if(permutation_is_odd(&raw.slots));
    }

    // Double-bond geometry from directional marks on adjacent single bonds.
    let side = |end: usize, bond: usize| -> Option<i8> {
        let b = &bonds[bond];
        let m = b.mark?;
        Some(if b.from == end { m } else { -m })
    };
    for d in 0..g.num_bonds() {
        if g.bond(d).order != BondOrder::Double {
            continue;
        }
        let (x, y) = (g.bond(d).u, g.bond(d).v);
        let marked = |end: usize, other: usize| {
            g.neighbors(end)
                .iter()
                .filter(|&&(s, _)| s != other)
                .find_map(|&(s, bond)| side(end, bond).map(|v| (s, v)))
        };
        let (Some((sx, vx)), Some((sy, vy))) = (marked(x, y), marked(y, x)) else {
            continue;
        };
        let mut config = if vx == vy {
            DoubleBondConfig::Cis
        } else {
            DoubleBondConfig::Trans
        };
        if g.reference_substituent(x, y) != Some(sx) {
            config = config.flipped();
        }
        if g.reference_substituent(y, x) != Some(sy) {
            config = config.flipped();
        }
        g.bond_mut(d).config = config;
    }

    apply_aromatic_flags(&mut g);
    Ok(g)
}

/// Writes a kekulé SMILES string. Components are joined with `.`.
pub fn write_smiles(g: &MolGraph) -> String {
    let n = g.num_atoms();
    if n == 0 {
        return String::new();
    }
    let mut visited = vec![false; n];
    let mut bond_seen = vec![false; g.num_bonds()];
    let mut parent_bond = vec![usize::MAX; n];
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    // (bond, opener, closer)
    let mut ring_closures: Vec<(usize, usize, usize)> = Vec::new();
    let mut roots = Vec::new();
    for root in 0..n {
        if visited[root] {
            continue;
        }
        roots.push(root);
        dfs(
            g,
            root,
            &mut visited,
            &mut bond_seen,
            &mut parent_bond,
            &mut children,
            &mut ring_closures,
        );
    }

    // Written direction of each bond: (from, to).
    let mut written = vec![(0usize, 0usize); g.num_bonds()];
    for a in 0..n {
        for &(c, bond) in &children[a] {
            written[bond] = (a, c);
        }
    }
    let mut opens_at: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut closes_at: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(bond, opener, closer) in &ring_closures {
        written[bond] = (opener, closer);
        opens_at[opener].push(bond);
        closes_at[closer].push(bond);
    }
    let marks = direction_marks(g, &written);

    let mut writer = Writer {
        g,
        children: &children,
        parent_bond: &parent_bond,
        opens_at: &opens_at,
        closes_at: &closes_at,
        marks: &marks,
        digits: BTreeMap::new(),
        free: (1..=99).collect(),
        next_digit: 100,
        out: String::new(),
    };
    for (k, &root) in roots.iter().enumerate() {
        if k > 0 {
            writer.out.push('.');
        }
        writer.emit(root);
    }
    writer.out
}

fn dfs(
    g: &MolGraph,
    a: usize,
    visited: &mut [bool],
    bond_seen: &mut [bool],
    parent_bond: &mut [usize],
    children: &mut [Vec<(usize, usize)>],
    rings: &mut Vec<(usize, usize, usize)>,
) {
    visited[a] = true;
    let mut nbrs: Vec<(usize, usize)> = g.neighbors(a).to_vec();
    nbrs.sort_unstable();
    for (b, bond) in nbrs {
        if bond_seen[bond] {
            continue;
        }
        bond_seen[bond] = true;
        if visited[b] {
            rings.push((bond, b, a));
        } else {
            parent_bond[b] = bond;
            children[a].push((b, bond));
            dfs(g, b, visited, bond_seen, parent_bond, children, rings);
        }
    }
}

/// Chooses `/` `\` marks (relative to the written direction) realizing every
/// annotated double bond. Bonds whose constraints conflict are left unmarked.
fn direction_marks(g: &MolGraph, written: &[(usize, usize)]) -> Vec<Option<i8>> {
    let mut marks: Vec<Option<i8>> = vec![None; g.num_bonds()];
    let side_of = |marks: &[Option<i8>], end: usize, bond: usize| -> Option<i8> {
        let m = marks[bond]?;
        Some(if written[bond].0 == end { m } else { -m })
    };
    let set_side = |marks: &mut [Option<i8>], end: usize, bond: usize, side: i8| {
        marks[bond] = Some(if written[bond].0 == end { side } else { -side });
    };
    for d in 0..g.num_bonds() {
        let bond = g.bond(d);
        if bond.config == DoubleBondConfig::None || bond.order != BondOrder::Double {
            continue;
        }
        let (x, y) = (bond.u, bond.v);
        let (Some(rx), Some(ry)) = (g.reference_substituent(x, y), g.reference_substituent(y, x))
        else {
            continue;
        };
        // Known side of the reference substituent at an endpoint, if any mark
        // already constrains it; None inside means contradictory marks.
        let known = |marks: &[Option<i8>], end: usize, other: usize, reference: usize| {
            let mut side: Option<Option<i8>> = None;
            for &(s, b) in g.neighbors(end) {
                if s == other || g.bond(b).order != BondOrder::Single {
                    continue;
                }
                if let Some(v) = side_of(marks, end, b) {
                    let v = if s == reference { v } else { -v };
                    side = match side {
                        None => Some(Some(v)),
                        Some(Some(w)) if w == v => Some(Some(v)),
                        _ => Some(None),
                    };
                }
            }
            side
        };
        let bx = g.bond_between(x, rx).expect("substituent bond");
        let by = g.bond_between(y, ry).expect("substituent bond");
        if g.bond(bx).order != BondOrder::Single || g.bond(by).order != BondOrder::Single {
            continue;
        }
        let sx = match known(&marks, x, y, rx) {
            Some(Some(v)) => v,
            Some(None) => continue,
            None => 1,
        };
        let want_y = if bond.config == DoubleBondConfig::Cis {
            sx
        } else {
            -sx
        };
        match known(&marks, y, x, ry) {
            Some(Some(v)) if v != want_y => continue,
            Some(None) => continue,
            _ => {}
        }
        if side_of(&marks, x, bx).is_none() && known(&marks, x, y, rx).is_none() {
            set_side(&mut marks, x, bx, sx);
        }
        if known(&marks, y, x, ry).is_none() {
            set_side(&mut marks, y, by, want_y);
        }
    }
    marks
}

struct Writer<'a> {
    g: &'a MolGraph,
    children: &'a [Vec<(usize, usize)>],
    parent_bond: &'a [usize],
    opens_at: &'a [Vec<usize>],
    closes_at: &'a [Vec<usize>],
    marks: &'a [Option<i8>],
    digits: BTreeMap<usize, u32>,
    /// Next number beyond the pool, written as `%(n)`.
    next_digit: u32,
    free: Vec<u32>,
    out: String,
}

impl Writer<'_> {
    fn bond_symbol(&self, bond: usize) -> String {
        match (self.g.bond(bond).order, self.marks[bond]) {
            (BondOrder::Single, Some(1)) => "/".into(),
            (BondOrder::Single, Some(_)) => "\\".into(),
            (BondOrder::Single, None) => String::new(),
            (o, _) => o.symbol().into(),
        }
    }

    fn emit(&mut self, a: usize) {
        let g = self.g;
        // Ring digits: closures first, then openings, in bond order.
        let closing: Vec<usize> = self.closes_at[a].clone();
        let opening: Vec<usize> = self.opens_at[a].clone();
        let mut ring_text = String::new();
        let mut slots: Vec<usize> = Vec::new();
        if self.parent_bond[a] != usize::MAX {
            slots.push(g.bond(self.parent_bond[a]).other(a));
        }
        let atom = g.atom(a);
        let organic = atom.charge == 0 && atom.hydrogens == g.default_hydrogens(a);
        let mut wants_stereo = atom.parity != Parity::None && atom.hydrogens <= 1;
        if wants_stereo && atom.hydrogens == 1 {
            slots.push(HYDROGEN);
        }
        let mut released = Vec::new();
        for &bond in &closing {
            let digit = self.digits.remove(&bond).expect("ring opened earlier");
            ring_text.push_str(&digit_text(digit));
            released.push(digit);
            slots.push(g.bond(bond).other(a));
        }
        for &bond in &opening {
            let digit = match self.free.iter().position(|d| !released.contains(d)) {
                Some(pos) => self.free.remove(pos),
                None => {
                    self.next_digit += 1;
                    self.next_digit - 1
                }
            };
            self.digits.insert(bond, digit);
            ring_text.push_str(&self.bond_symbol(bond));
            ring_text.push_str(&digit_text(digit));
            slots.push(g.bond(bond).other(a));
        }
        self.free.extend(released);
        self.free.sort_unstable();
        for &(c, _) in &self.children[a] {
            slots.push(c);
        }
        if slots.len() != 4 {
            wants_stereo = false;
        }

        if organic && !wants_stereo {
            self.out.push_str(atom.element.symbol());
        } else {
            self.out.push('[');
            self.out.push_str(atom.element.symbol());
            if wants_stereo {
                let sense = atom.parity.flip_if(permutation_is_odd(&slots));
                self.out
                    .push_str(if sense == Parity::Ccw { "@" } else { "@@" });
            }
            match atom.hydrogens {
                0 => {}
                1 => self.out.push('H'),
                h => self.out.push_str(&format!("H{h}")),
            }
            match atom.charge {
                0 => {}
                1 => self.out.push('+'),
                -1 => self.out.push('-'),
                q if q > 0 => self.out.push_str(&format!("+{q}")),
                q => self.out.push_str(&format!("-{}", -q)),
            }
            self.out.push(']');
        }
        self.out.push_str(&ring_text);

        let kids = &self.children[a];
        for (k, &(c, bond)) in kids.iter().enumerate() {
            let last = k + 1 == kids.len();
            if !last {
                self.out.push('(');
            }
            let sym = self.bond_symbol(bond);
            self.out.push_str(&sym);
            self.emit(c);
            if !last {
                self.out.push(')');
            }
        }
    }
}

fn digit_text(d: u32) -> String {
    match d {
        0..=9 => d.to_string(),
        10..=99 => format!("%{d}"),
        _ => format!("%({d})"),
    }
}
