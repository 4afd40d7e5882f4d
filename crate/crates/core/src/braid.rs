//! Sign conjugations and braid moves on unitriangular Stokes matrices, in
//! exact rational arithmetic.

use std::collections::{HashMap, HashSet, VecDeque};
use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{q, QMatrix, Q};
use crate::spectrum::{crossing_sequence, Spectrum};
use crate::C64;

/// Upper unitriangular matrix with exact entries.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Unitriangular(QMatrix);

impl Unitriangular {
    pub fn new(m: QMatrix) -> Result<Self> {
        if m.is_unitriangular() {
            Ok(Unitriangular(m))
        } else {
            Err(Error::NotUnitriangular)
        }
    }

    pub fn identity(n: usize) -> Self {
        Unitriangular(QMatrix::identity(n))
    }

    /// Upper unitriangular matrix from its strictly upper entries, row by row.
    pub fn from_upper(n: usize, upper: &[i64]) -> Self {
        let mut m = QMatrix::identity(n);
        let mut it = upper.iter();
        for i in 0..n {
            for j in i + 1..n {
                m.set(i, j, q(*it.next().expect("enough upper entries")));
            }
        }
        Unitriangular(m)
    }

    pub fn matrix(&self) -> &QMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> QMatrix {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Q {
        self.0.get(i, j)
    }

    pub fn inverse(&self) -> QMatrix {
        self.0.unitriangular_inverse().expect("unitriangular")
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        self.0.to_f64()
    }
}

pub type SignVector = Vec<i8>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Sign(SignVector),
    Move(usize),
    MoveInv(usize),
}

/// Generators in application order: the first entry acts first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BraidWord(pub Vec<Generator>);

impl BraidWord {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> BraidWord {
        BraidWord(
            self.0
                .iter()
                .rev()
                .map(|g| match g {
                    Generator::Sign(e) => Generator::Sign(e.clone()),
                    Generator::Move(l) => Generator::MoveInv(*l),
                    Generator::MoveInv(l) => Generator::Move(*l),
                })
                .collect(),
        )
    }
}

fn check_index(n: usize, l: usize) -> Result<()> {
    if l == 0 || l + 1 > n {
        return Err(Error::IndexOutOfRange { index: l, max: n.saturating_sub(1) });
    }
    Ok(())
}

pub fn sigma_eps(s: &Unitriangular, eps: &[i8]) -> Result<Unitriangular> {
    let n = s.n();
    if eps.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: eps.len() });
    }
    if eps.iter().any(|&e| e != 1 && e != -1) {
        return Err(Error::Parse(format!("sign vector entries must be +-1: {eps:?}")));
    }
    let mut m = s.matrix().clone();
    for i in 0..n {
        for j in i + 1..n {
            if eps[i] != eps[j] {
                let v = -m.get(i, j).clone();
                m.set(i, j, v);
            }
        }
    }
    Ok(Unitriangular(m))
}

/// B_l(S) = I_{l-1} + [[0, 1], [1, -S_{l,l+1}]] + I_{n-l-1}.
pub fn b_matrix(s: &Unitriangular, l: usize) -> Result<QMatrix> {
    let n = s.n();
    check_index(n, l)?;
    let (a, b) = (l - 1, l);
    let mut m = QMatrix::identity(n);
    m.set(a, a, Q::zero());
    m.set(a, b, Q::one());
    m.set(b, a, Q::one());
    m.set(b, b, -s.entry(a, b).clone());
    Ok(m)
}

pub fn sigma_l(s: &Unitriangular, l: usize) -> Result<Unitriangular> {
    let b = b_matrix(s, l)?;
    let out = &(&b * s.matrix()) * &b;
    Unitriangular::new(out)
}

/// Inverse braid move: conjugation by I + [[-T_{l,l+1}, 1], [1, 0]] + I.
pub fn sigma_l_inv(t: &Unitriangular, l: usize) -> Result<Unitriangular> {
    let n = t.n();
    check_index(n, l)?;
    let (a, b) = (l - 1, l);
    let mut c = QMatrix::identity(n);
    c.set(a, a, -t.entry(a, b).clone());
    c.set(a, b, Q::one());
    c.set(b, a, Q::one());
    c.set(b, b, Q::zero());
    Unitriangular::new(&(&c * t.matrix()) * &c)
}

pub fn apply_generator(s: &Unitriangular, g: &Generator) -> Result<Unitriangular> {
    match g {
        Generator::Sign(e) => sigma_eps(s, e),
        Generator::Move(l) => sigma_l(s, *l),
        Generator::MoveInv(l) => sigma_l_inv(s, *l),
    }
}

pub fn apply_word(s: &Unitriangular, w: &BraidWord) -> Result<Unitriangular> {
    w.0.iter().try_fold(s.clone(), |acc, g| apply_generator(&acc, g))
}

pub fn full_turn_word(spec: &Spectrum) -> Result<BraidWord> {
    Ok(BraidWord(crossing_sequence(spec, TAU)?.into_iter().map(Generator::Move).collect()))
}

#[derive(Clone, Debug)]
pub struct StokesDataSet {
    pub matrices: Vec<Unitriangular>,
    pub raw_count: usize,
    pub spectrum: Spectrum,
    pub base: Unitriangular,
}

/// Sign vectors with first entry +1; eps and -eps act identically.
pub fn sign_vectors(n: usize) -> Vec<SignVector> {
    if n == 0 {
        return vec![vec![]];
    }
    (0..1usize << (n - 1))
        .map(|mask| {
            let mut e = vec![1i8; n];
            for (k, item) in e.iter_mut().enumerate().skip(1) {
                if mask >> (k - 1) & 1 == 1 {
                    *item = -1;
                }
            }
            e
        })
        .collect()
}

pub fn stokes_data(s: &Unitriangular, spec: &Spectrum) -> Result<StokesDataSet> {
    let n = s.n();
    if spec.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: spec.n() });
    }
    let word = full_turn_word(spec)?;
    let signs = sign_vectors(n);
    let mut seen = HashSet::new();
    let mut matrices = Vec::new();
    let mut raw = 0usize;
    let mut cur = s.clone();
    for g in &word.0 {
        cur = apply_generator(&cur, g)?;
        // each eps is paired with -eps, so raw count doubles the sign loop
        for e in &signs {
            raw += 2;
            let c = sigma_eps(&cur, e)?;
            if seen.insert(c.clone()) {
                matrices.push(c);
            }
        }
    }
    Ok(StokesDataSet { matrices, raw_count: raw, spectrum: spec.clone(), base: s.clone() })
}

/// Exact characteristic polynomial of S (S^{-1})^t.
pub fn charge_polynomial(s: &Unitriangular) -> Vec<Q> {
    let m = s.matrix() * &s.inverse().transpose();
    m.charpoly()
}

/// Eigenvalues of S (S^{-1})^t sorted by argument, then modulus.
pub fn charges(s: &Unitriangular) -> Vec<C64> {
    let m = s.to_f64() * s.to_f64().try_inverse().expect("unit determinant").transpose();
    let mut ev: Vec<C64> = m.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.arg().total_cmp(&b.arg()).then(a.norm().total_cmp(&b.norm())));
    ev
}

pub const DEFAULT_ORBIT_DEPTH: usize = 8;
const MAX_STATES: usize = 200_000;

fn generators(n: usize) -> Vec<Generator> {
    let mut g: Vec<Generator> = sign_vectors(n).into_iter().skip(1).map(Generator::Sign).collect();
    for l in 1..n {
        g.push(Generator::Move(l));
        g.push(Generator::MoveInv(l));
    }
    g
}

/// Breadth-first search over the group orbit for a matrix satisfying `goal`.
pub fn search_orbit<F>(s: &Unitriangular, bound: usize, mut goal: F) -> Option<(Unitriangular, BraidWord)>
where
    F: FnMut(&Unitriangular) -> bool,
{
    if goal(s) {
        return Some((s.clone(), BraidWord::default()));
    }
    let gens = generators(s.n());
    let mut parent: HashMap<Unitriangular, (Unitriangular, Generator)> = HashMap::new();
    let mut seen: HashSet<Unitriangular> = HashSet::from([s.clone()]);
    let mut frontier = VecDeque::from([(s.clone(), 0usize)]);
    while let Some((cur, depth)) = frontier.pop_front() {
        if depth >= bound {
            continue;
        }
        for g in &gens {
            let Ok(next) = apply_generator(&cur, g) else { continue };
            if !seen.insert(next.clone()) {
                continue;
            }
            parent.insert(next.clone(), (cur.clone(), g.clone()));
            if goal(&next) {
                let mut word = Vec::new();
                let mut at = next.clone();
                while let Some((p, g)) = parent.get(&at) {
                    word.push(g.clone());
                    at = p.clone();
                }
                word.reverse();
                return Some((next, BraidWord(word)));
            }
            if seen.len() < MAX_STATES {
                frontier.push_back((next, depth + 1));
            }
        }
    }
    None
}

/// Witness word w with apply_word(s, w) = target, searched up to `bound` generators.
pub fn orbit_search(s: &Unitriangular, target: &Unitriangular, bound: usize) -> Option<BraidWord> {
    if s.n() != target.n() || charge_polynomial(s) != charge_polynomial(target) {
        return None;
    }
    search_orbit(s, bound, |m| m == target).map(|(_, w)| w)
}
