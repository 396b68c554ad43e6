use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::network::NodeId;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdPair {
    pub origin: NodeId,
    pub destination: NodeId,
    pub demand: f64,
}

/// Origin-destination demand, sorted by (origin, destination) with strictly
/// positive entries only.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OdMatrix {
    pairs: Vec<OdPair>,
}

impl OdMatrix {
    /// Zero entries and diagonal entries are dropped; negative demand and
    /// duplicate pairs are rejected.
    pub fn from_entries(
        zone_count: usize,
        entries: impl IntoIterator<Item = (NodeId, NodeId, f64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (o, d, demand) in entries {
            if o >= zone_count || d >= zone_count {
                return Err(Error::Validation(format!(
                    "OD pair ({o}, {d}) references a node outside the {zone_count} zones"
                )));
            }
            if !(demand >= 0.0) || !demand.is_finite() {
                return Err(Error::Validation(format!(
                    "demand for OD pair ({o}, {d}) must be a non-negative number, got {demand}"
                )));
            }
            if map.insert((o, d), demand).is_some() {
                return Err(Error::Validation(format!("duplicate OD pair ({o}, {d})")));
            }
        }
        let pairs = map
            .into_iter()
            .filter(|&((o, d), demand)| {
                if o == d && demand > 0.0 {
                    log::debug!("dropping intrazonal demand {demand} at zone {o}");
                }
                demand > 0.0 && o != d
            })
            .map(|((origin, destination), demand)| OdPair {
                origin,
                destination,
                demand,
            })
            .collect();
        Ok(OdMatrix { pairs })
    }

    pub fn pairs(&self) -> &[OdPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn total_demand(&self) -> f64 {
        self.pairs.iter().map(|p| p.demand).sum()
    }

    pub fn demand(&self, origin: NodeId, destination: NodeId) -> f64 {
        self.pairs
            .binary_search_by(|p| (p.origin, p.destination).cmp(&(origin, destination)))
            .map(|i| self.pairs[i].demand)
            .unwrap_or(0.0)
    }

    /// Index ranges of the pairs sharing each origin, in origin order.
    pub fn origin_groups(&self) -> Vec<(NodeId, std::ops::Range<usize>)> {
        let mut groups = Vec::new();
        let mut start = 0;
        for i in 1..=self.pairs.len() {
            if i == self.pairs.len() || self.pairs[i].origin != self.pairs[start].origin {
                groups.push((self.pairs[start].origin, start..i));
                start = i;
            }
        }
        groups
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::Validation(format!(
                "demand scale must be positive, got {factor}"
            )));
        }
        Ok(OdMatrix {
            pairs: self
                .pairs
                .iter()
                .map(|p| OdPair {
                    demand: p.demand * factor,
                    ..*p
                })
                .collect(),
        })
    }

    /// Largest zone index referenced plus one.
    pub fn zone_extent(&self) -> usize {
        self.pairs
            .iter()
            .map(|p| p.origin.max(p.destination) + 1)
            .max()
            .unwrap_or(0)
    }
}
