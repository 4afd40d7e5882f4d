//! ADE seed Stokes matrices and Cartan-matrix matching.

use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::braid::{search_orbit, BraidWord, Unitriangular};
use crate::error::{Error, Result};
use crate::rational::{q, QMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    A,
    D,
    E,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CartanType {
    pub family: Family,
    pub rank: usize,
}

impl CartanType {
    pub fn new(family: Family, rank: usize) -> Result<Self> {
        let ok = match family {
            Family::A => rank >= 1,
            Family::D => rank >= 4,
            Family::E => (6..=8).contains(&rank),
        };
        if ok {
            Ok(CartanType { family, rank })
        } else {
            Err(Error::InvalidRank { family: format!("{family:?}"), rank })
        }
    }

    /// Classical determinant of the Cartan matrix.
    pub fn determinant(&self) -> i64 {
        match self.family {
            Family::A => self.rank as i64 + 1,
            Family::D => 4,
            Family::E => 9 - self.rank as i64,
        }
    }

    /// Edges of the Dynkin graph, 0-based, in the seed's labelling.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.rank;
        match self.family {
            Family::A => (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
            Family::D => {
                let mut e: Vec<_> = (0..n - 2).map(|i| (i, i + 1)).collect();
                e.push((n - 3, n - 1));
                e
            }
            Family::E => {
                // chain 1..n-1, branch from node n-3 to node n
                let mut e: Vec<_> = (0..n - 2).map(|i| (i, i + 1)).collect();
                e.push((n - 4, n - 1));
                e
            }
        }
    }
}

impl fmt::Display for CartanType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{}", self.family, self.rank)
    }
}

impl FromStr for CartanType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("bad Cartan type {s:?}"));
        let fam = match s.chars().next().ok_or_else(bad)?.to_ascii_uppercase() {
            'A' => Family::A,
            'D' => Family::D,
            'E' => Family::E,
            _ => return Err(bad()),
        };
        let rank: usize = s[1..].trim_start_matches('_').parse().map_err(|_| bad())?;
        CartanType::new(fam, rank)
    }
}

impl Serialize for CartanType {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for CartanType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn cartan_seed(t: CartanType) -> Result<Unitriangular> {
    let t = CartanType::new(t.family, t.rank)?;
    let mut m = QMatrix::identity(t.rank);
    for (a, b) in t.edges() {
        m.set(a, b, q(-1));
    }
    Unitriangular::new(m)
}

pub fn cartan_matrix(t: CartanType) -> Result<QMatrix> {
    Ok(symmetrize(cartan_seed(t)?.matrix()))
}

pub fn symmetrize(s: &QMatrix) -> QMatrix {
    s + &s.transpose()
}

/// Dynkin type of a connected simply-laced tree, read off its arm lengths.
fn classify_graph(n: usize, adj: &[Vec<usize>]) -> Option<CartanType> {
    let edges: usize = adj.iter().map(Vec::len).sum::<usize>() / 2;
    if n == 0 || edges != n - 1 {
        return None;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return None;
    }
    let branch: Vec<usize> = (0..n).filter(|&v| adj[v].len() >= 3).collect();
    if branch.is_empty() {
        return CartanType::new(Family::A, n).ok();
    }
    if branch.len() > 1 || adj[branch[0]].len() > 3 {
        return None;
    }
    let c = branch[0];
    let mut arms: Vec<usize> = adj[c]
        .iter()
        .map(|&start| {
            let (mut prev, mut cur, mut len) = (c, start, 1);
            while adj[cur].len() == 2 {
                let next = if adj[cur][0] == prev { adj[cur][1] } else { adj[cur][0] };
                prev = cur;
                cur = next;
                len += 1;
            }
            len
        })
        .collect();
    arms.sort_unstable();
    match (arms[0], arms[1], arms[2]) {
        (1, 1, k) => CartanType::new(Family::D, k + 3).ok(),
        (1, 2, 2) => CartanType::new(Family::E, 6).ok(),
        (1, 2, 3) => CartanType::new(Family::E, 7).ok(),
        (1, 2, 4) => CartanType::new(Family::E, 8).ok(),
        _ => None,
    }
}

/// Literal match against the catalog, or match up to a simultaneous
/// row/column permutation when `up_to_permutation` is set.
pub fn match_cartan(m: &QMatrix, up_to_permutation: bool) -> Option<CartanType> {
    let n = m.n();
    if !m.is_symmetric() || !m.is_integral() {
        return None;
    }
    let two = q(2);
    let minus_one = q(-1);
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        if m.get(i, i) != &two {
            return None;
        }
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = m.get(i, j);
            if *v == minus_one {
                adj[i].push(j);
            } else if !v.is_zero() {
                return None;
            }
        }
    }
    let t = classify_graph(n, &adj)?;
    if up_to_permutation {
        return Some(t);
    }
    (cartan_matrix(t).ok()? == *m).then_some(t)
}

/// Bounded orbit search for a representative whose symmetrization is a Cartan matrix.
pub fn detect_ade(s: &Unitriangular, bound: usize, up_to_permutation: bool) -> Option<(CartanType, BraidWord)> {
    let mut found = None;
    let hit = search_orbit(s, bound, |m| {
        found = match_cartan(&symmetrize(m.matrix()), up_to_permutation);
        found.is_some()
    });
    hit.map(|(_, w)| (found.expect("goal matched"), w))
}

pub fn all_seed_types(max_rank: usize) -> Vec<CartanType> {
    let mut v = Vec::new();
    for r in 1..=max_rank {
        v.push(CartanType { family: Family::A, rank: r });
    }
    for r in 4..=max_rank {
        v.push(CartanType { family: Family::D, rank: r });
    }
    for r in 6..=8 {
        v.push(CartanType { family: Family::E, rank: r });
    }
    v
}
