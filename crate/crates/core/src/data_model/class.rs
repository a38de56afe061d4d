use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// The eight PCB defect categories, in canonical order.
///
/// Canonical order is significant: it breaks class-vote ties in fusion and
/// dominant-class ties in splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DefectClass {
    MissingHole,
    MouseBite,
    OpenCircuit,
    Short,
    Spur,
    SpuriousCopper,
    Pinhole,
    Scratch,
}

impl DefectClass {
    pub const COUNT: usize = 8;

    pub const ALL: [DefectClass; Self::COUNT] = [
        DefectClass::MissingHole,
        DefectClass::MouseBite,
        DefectClass::OpenCircuit,
        DefectClass::Short,
        DefectClass::Spur,
        DefectClass::SpuriousCopper,
        DefectClass::Pinhole,
        DefectClass::Scratch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DefectClass::MissingHole => "missing_hole",
            DefectClass::MouseBite => "mouse_bite",
            DefectClass::OpenCircuit => "open_circuit",
            DefectClass::Short => "short",
            DefectClass::Spur => "spur",
            DefectClass::SpuriousCopper => "spurious_copper",
            DefectClass::Pinhole => "pinhole",
            DefectClass::Scratch => "scratch",
        }
    }

    /// Position in canonical order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

/// Lowercases, trims, and maps spaces and hyphens to underscores.
pub fn normalize_class_name(raw: &str) -> String {
    raw.trim()
        .chars()
        .map(|c| match c {
            ' ' | '-' => '_',
            c => c.to_ascii_lowercase(),
        })
        .collect()
}

impl FromStr for DefectClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = normalize_class_name(s);
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == norm)
            .ok_or_else(|| Error::validation("defect class", format!("unknown defect class {s:?}")))
    }
}

impl fmt::Display for DefectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for DefectClass {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for DefectClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-class tally indexed in canonical order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts([usize; DefectClass::COUNT]);

impl ClassCounts {
    pub fn get(&self, class: DefectClass) -> usize {
        self.0[class.index()]
    }

    pub fn increment(&mut self, class: DefectClass) {
        self.0[class.index()] += 1;
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (DefectClass, usize)> + '_ {
        DefectClass::ALL.into_iter().map(|c| (c, self.get(c)))
    }
}
