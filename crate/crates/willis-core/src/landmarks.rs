//! Landmark labels and per-volume landmark annotations.
//!
//! The 13 bifurcation labels A..M form a closed enumeration whose order is
//! the shared channel order used by annotation building, heatmap regression
//! and inference alike.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::WorldPoint;

/// One of the 13 bifurcation labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LandmarkLabel {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    I,
    J,
    K,
    L,
    M,
}

impl LandmarkLabel {
    /// Channel order shared by every module that indexes per-label arrays.
    pub const ALL: [LandmarkLabel; 13] = [
        LandmarkLabel::A,
        LandmarkLabel::B,
        LandmarkLabel::C,
        LandmarkLabel::D,
        LandmarkLabel::E,
        LandmarkLabel::F,
        LandmarkLabel::G,
        LandmarkLabel::H,
        LandmarkLabel::I,
        LandmarkLabel::J,
        LandmarkLabel::K,
        LandmarkLabel::L,
        LandmarkLabel::M,
    ];

    pub const COUNT: usize = 13;

    /// Index into the shared channel order (A=0 .. M=12).
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<LandmarkLabel> {
        Self::ALL.get(i).copied()
    }

    pub fn parse(s: &str) -> Result<LandmarkLabel> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.to_string() == s)
            .ok_or_else(|| Error::data(format!("unknown landmark label {s:?}")))
    }
}

impl fmt::Display for LandmarkLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Per-label optional world-coordinate annotations. Absence of a label is an
/// explicit anatomical state, not an error.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LandmarkSet {
    entries: [Option<WorldPoint>; 13],
}

impl LandmarkSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, label: LandmarkLabel, p: WorldPoint) {
        self.entries[label.index()] = Some(p);
    }

    pub fn clear(&mut self, label: LandmarkLabel) {
        self.entries[label.index()] = None;
    }

    pub fn get(&self, label: LandmarkLabel) -> Option<WorldPoint> {
        self.entries[label.index()]
    }

    pub fn is_present(&self, label: LandmarkLabel) -> bool {
        self.get(label).is_some()
    }

    pub fn present_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    /// Present (label, point) pairs in channel order.
    pub fn iter_present(&self) -> impl Iterator<Item = (LandmarkLabel, WorldPoint)> + '_ {
        LandmarkLabel::ALL
            .iter()
            .filter_map(move |&l| self.get(l).map(|p| (l, p)))
    }

    pub fn absent_labels(&self) -> Vec<LandmarkLabel> {
        LandmarkLabel::ALL
            .iter()
            .copied()
            .filter(|&l| !self.is_present(l))
            .collect()
    }
}

/// On-disk landmark annotation file:
/// `{"labels": {"A": [x,y,z]|null, ...}, "spacing": [sx,sy,sz], "units": "mm"}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct LandmarkFile {
    pub labels: BTreeMap<String, Option<[f64; 3]>>,
    pub spacing: [f32; 3],
    pub units: String,
}

impl LandmarkFile {
    pub fn from_set(set: &LandmarkSet, spacing: [f32; 3]) -> Self {
        let mut labels = BTreeMap::new();
        for &l in &LandmarkLabel::ALL {
            labels.insert(l.to_string(), set.get(l).map(|p| p.0));
        }
        LandmarkFile { labels, spacing, units: "mm".to_string() }
    }

    pub fn to_set(&self) -> Result<LandmarkSet> {
        if self.units != "mm" {
            return Err(Error::data(format!("landmark units {:?}, expected \"mm\"", self.units)));
        }
        let mut set = LandmarkSet::new();
        for (name, coords) in &self.labels {
            let label = LandmarkLabel::parse(name)?;
            if let Some(xyz) = coords {
                let p = WorldPoint(*xyz);
                if !p.is_finite() {
                    return Err(Error::data(format!("non-finite coordinates for label {name}")));
                }
                set.set(label, p);
            }
        }
        Ok(set)
    }
}

pub fn write_landmarks(path: &Path, set: &LandmarkSet, spacing: [f32; 3]) -> Result<()> {
    let file = LandmarkFile::from_set(set, spacing);
    let json = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn read_landmarks(path: &Path) -> Result<LandmarkSet> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    let file: LandmarkFile = serde_json::from_str(&text)?;
    file.to_set()
}
