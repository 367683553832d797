//! The eight heavy elements the model builds with, and their valence rules.

use std::fmt;

/// Heavy-atom type. The discriminant is the index into the basic atom family
/// and is stable: it is used for one-hot features and build-action indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    C = 0,
    N = 1,
    O = 2,
    F = 3,
    P = 4,
    S = 5,
    Cl = 6,
    Br = 7,
}

/// Number of elements in the basic atom family.
pub const NUM_ELEMENTS: usize = 8;

impl Element {
    pub const ALL: [Element; NUM_ELEMENTS] = [
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::P,
        Element::S,
        Element::Cl,
        Element::Br,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Element> {
        Self::ALL.get(i).copied()
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::P => "P",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::Br => "Br",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Element> {
        Some(match s {
            "C" => Element::C,
            "N" => Element::N,
            "O" => Element::O,
            "F" => Element::F,
            "P" => Element::P,
            "S" => Element::S,
            "Cl" => Element::Cl,
            "Br" => Element::Br,
            _ => return None,
        })
    }

    /// Standard atomic weight (IUPAC 2021 abridged, five significant digits).
    pub fn atomic_weight(self) -> f64 {
        match self {
            Element::C => 12.011,
            Element::N => 14.007,
            Element::O => 15.999,
            Element::F => 18.998,
            Element::P => 30.974,
            Element::S => 32.06,
            Element::Cl => 35.45,
            Element::Br => 79.904,
        }
    }

    /// Maximum total valence (bond orders plus hydrogens) of the neutral atom.
    pub fn max_valence(self) -> u32 {
        match self {
            Element::C => 4,
            Element::N => 3,
            Element::O => 2,
            Element::F => 1,
            Element::P => 5,
            Element::S => 6,
            Element::Cl => 1,
            Element::Br => 1,
        }
    }

    /// Allowed valence states of the neutral atom, ascending.
    pub fn allowed_valences(self) -> &'static [u32] {
        match self {
            Element::C => &[4],
            Element::N => &[3],
            Element::O => &[2],
            Element::F | Element::Cl | Element::Br => &[1],
            Element::P => &[3, 5],
            Element::S => &[2, 4, 6],
        }
    }

    /// True for elements that carry lone pairs and gain a bond when protonated
    /// or positively charged (N+, O+ ...).
    fn has_lone_pairs(self) -> bool {
        !matches!(self, Element::C)
    }

    /// Maximum valence with a formal charge applied.
    ///
    /// Lone-pair elements shift by the charge (N+ behaves like C, O- like F);
    /// carbon loses one valence per unit of charge in either direction.
    pub fn max_valence_charged(self, charge: i8) -> u32 {
        shift(self.max_valence(), self, charge)
    }

    /// Smallest allowed valence (charge-adjusted) that accommodates `bond_sum`,
    /// or the maximum when none does.
    pub fn target_valence(self, charge: i8, bond_sum: u32) -> u32 {
        self.allowed_valences()
            .iter()
            .map(|&v| shift(v, self, charge))
            .find(|&v| v >= bond_sum)
            .unwrap_or_else(|| self.max_valence_charged(charge))
    }
}

fn shift(v: u32, e: Element, charge: i8) -> u32 {
    let c = i64::from(charge);
    let shifted = if e.has_lone_pairs() {
        i64::from(v) + c
    } else {
        i64::from(v) - c.abs()
    };
    shifted.max(0) as u32
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Bond order in the basic bond family; discriminant is the family index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single = 0,
    Double = 1,
    Triple = 2,
}

pub const NUM_BOND_ORDERS: usize = 3;

impl BondOrder {
    pub const ALL: [BondOrder; NUM_BOND_ORDERS] =
        [BondOrder::Single, BondOrder::Double, BondOrder::Triple];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<BondOrder> {
        Self::ALL.get(i).copied()
    }

    pub fn valence(self) -> u32 {
        self as u32 + 1
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BondOrder::Single => "-",
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
        }
    }
}
