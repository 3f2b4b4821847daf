//! Keller graphs on `{0,1,2,3}^n` and the product bases their cliques give.
//!
//! Vertices are cube positions of a 4-periodic tiling of `R^n` by cubes of
//! side 2. `G` joins positions whose cubes cannot overlap (some coordinate
//! differs by exactly 2); `G*` additionally asks that they differ in at least
//! two coordinates, which forbids shared facets.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::bases::{ProductState, UnentangledBasis};
use crate::error::{usage, Error, Result};
use crate::random::rng_from_seed;
use crate::{ComplexVector, C64};

pub const EXHAUSTIVE_MAX_N: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KellerVector {
    coords: Vec<u8>,
}

impl KellerVector {
    pub fn new(coords: Vec<u8>) -> Result<Self> {
        if let Some(c) = coords.iter().find(|&&c| c > 3) {
            return usage(format!("coordinate {c} outside 0..=3"));
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[u8] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn from_index(mut idx: usize, n: usize) -> Self {
        let mut coords = vec![0u8; n];
        for c in coords.iter_mut().rev() {
            *c = (idx % 4) as u8;
            idx /= 4;
        }
        Self { coords }
    }
}

impl fmt::Display for KellerVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.coords {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for KellerVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let coords = s
            .chars()
            .map(|ch| match ch {
                '0'..='3' => Ok(ch as u8 - b'0'),
                _ => Err(Error::Usage(format!("invalid character {ch:?} in clique line {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(coords)
    }
}

/// A set of distinct vectors of common length `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliqueCandidate {
    n: usize,
    vectors: Vec<KellerVector>,
}

impl CliqueCandidate {
    pub fn new(n: usize, vectors: Vec<KellerVector>) -> Result<Self> {
        if let Some(v) = vectors.iter().find(|v| v.len() != n) {
            return Err(Error::DimensionMismatch { expected: vec![n], got: vec![v.len()] });
        }
        let mut sorted: Vec<&KellerVector> = vectors.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("vector {} appears twice", w[0])));
        }
        Ok(Self { n, vectors })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vectors(&self) -> &[KellerVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// One vector per line.
    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut vectors = Vec::new();
        for line in input.lines() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            vectors.push(line.parse::<KellerVector>()?);
        }
        let Some(first) = vectors.first() else { return usage("clique file has no vectors") };
        Self::new(first.len(), vectors)
    }

    pub fn read_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for v in &self.vectors {
            writeln!(out, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Graph {
    G,
    GStar,
}

impl Graph {
    pub fn label(self) -> &'static str {
        match self {
            Graph::G => "G",
            Graph::GStar => "G*",
        }
    }
}

impl FromStr for Graph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "g" => Ok(Graph::G),
            "gstar" | "g*" | "g_star" => Ok(Graph::GStar),
            _ => usage(format!("unknown graph {s:?}, expected g or gstar")),
        }
    }
}

fn adjacent(a: &[u8], b: &[u8], graph: Graph) -> bool {
    let mut gap_two = false;
    let mut differing = 0;
    for (&x, &y) in a.iter().zip(b) {
        if x != y {
            differing += 1;
            gap_two |= x.abs_diff(y) == 2;
        }
    }
    gap_two && (graph == Graph::G || differing >= 2)
}

pub fn edge(m: &KellerVector, m2: &KellerVector, graph: Graph) -> Result<bool> {
    if m.len() != m2.len() {
        return Err(Error::DimensionMismatch { expected: vec![m.len()], got: vec![m2.len()] });
    }
    Ok(adjacent(&m.coords, &m2.coords, graph))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliqueReport {
    pub graph: Graph,
    pub n: usize,
    pub size: usize,
    pub pairs_checked: u64,
    /// Lexicographically first non-adjacent pair of indices.
    pub first_failure: Option<(usize, usize)>,
    pub certificate: Option<&'static str>,
}

impl CliqueReport {
    pub fn is_clique(&self) -> bool {
        self.first_failure.is_none()
    }

    /// A clique of size `2^n`, i.e. a periodic tiling.
    pub fn is_tiling(&self) -> bool {
        self.is_clique() && self.n < usize::BITS as usize && self.size == 1usize << self.n
    }

    pub fn to_json(&self, c: &CliqueCandidate) -> Value {
        json!({
            "graph": self.graph.label(),
            "n": self.n,
            "size": self.size,
            "pairs_checked": self.pairs_checked,
            "clique": self.is_clique(),
            "first_failure": self.first_failure.map(|(i, j)| json!({
                "indices": [i, j],
                "vectors": [c.vectors[i].to_string(), c.vectors[j].to_string()],
            })),
            "certificate": self.certificate,
        })
    }
}

pub fn verify_clique(c: &CliqueCandidate, graph: Graph) -> CliqueReport {
    let v = &c.vectors;
    let first_failure = (0..v.len())
        .into_par_iter()
        .find_map_first(|i| (i + 1..v.len()).find(|&j| !adjacent(&v[i].coords, &v[j].coords, graph)).map(|j| (i, j)));
    let size = v.len();
    let mut report = CliqueReport {
        graph,
        n: c.n,
        size,
        pairs_checked: (size as u64) * (size.saturating_sub(1) as u64) / 2,
        first_failure,
        certificate: None,
    };
    if report.is_tiling() {
        report.certificate = Some(match graph {
            Graph::G => "periodic tiling certificate",
            Graph::GStar => "facet-free periodic tiling certificate",
        });
    }
    report
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    Exhaustive,
    Heuristic,
}

/// Looks for a clique of `size` vertices. `Exhaustive` (n <= 3) is a
/// deterministic branch-and-bound whose `None` proves there is none;
/// `Heuristic` is a seeded min-conflicts local search limited to `budget`
/// moves, and its `None` proves nothing.
pub fn clique_search(n: usize, size: usize, mode: SearchMode, graph: Graph, budget: u64, seed: u64) -> Result<Option<CliqueCandidate>> {
    if n == 0 {
        return usage("n must be positive");
    }
    let found = match mode {
        SearchMode::Exhaustive => {
            if n > EXHAUSTIVE_MAX_N {
                return usage(format!("exhaustive search is limited to n <= {EXHAUSTIVE_MAX_N}, got {n}"));
            }
            exhaustive(n, size, graph)
        }
        SearchMode::Heuristic => {
            if n > 12 {
                return usage("heuristic search is limited to n <= 12");
            }
            local_search(n, size, graph, budget, seed)
        }
    };
    found
        .map(|idx| CliqueCandidate::new(n, idx.into_iter().map(|i| KellerVector::from_index(i, n)).collect()))
        .transpose()
}

fn exhaustive(n: usize, size: usize, graph: Graph) -> Option<Vec<usize>> {
    let count = 1usize << (2 * n);
    if size > count {
        return None;
    }
    let vertices: Vec<KellerVector> = (0..count).map(|i| KellerVector::from_index(i, n)).collect();
    // count <= 64, so neighbourhoods fit in one word.
    let nbr: Vec<u64> = (0..count)
        .map(|i| {
            (0..count).filter(|&j| adjacent(&vertices[i].coords, &vertices[j].coords, graph)).fold(0u64, |m, j| m | 1 << j)
        })
        .collect();
    let all = if count == 64 { u64::MAX } else { (1u64 << count) - 1 };
    let mut chosen = Vec::with_capacity(size);
    extend(&nbr, all, size, &mut chosen).then_some(chosen)
}

fn extend(nbr: &[u64], candidates: u64, size: usize, chosen: &mut Vec<usize>) -> bool {
    if chosen.len() == size {
        return true;
    }
    let mut rest = candidates;
    while rest != 0 {
        if chosen.len() + (rest.count_ones() as usize) < size {
            return false;
        }
        let v = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        chosen.push(v);
        if extend(nbr, rest & nbr[v], size, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

fn local_search(n: usize, size: usize, graph: Graph, budget: u64, seed: u64) -> Option<Vec<usize>> {
    let count = 1usize << (2 * n);
    if size > count {
        return None;
    }
    let mut rng = rng_from_seed(seed);
    let decode = |i: usize| KellerVector::from_index(i, n).coords;
    let mut set: Vec<usize> = rand::seq::index::sample(&mut rng, count, size).into_vec();
    let mut coords: Vec<Vec<u8>> = set.iter().map(|&i| decode(i)).collect();
    let conflicts_with = |c: &[u8], coords: &[Vec<u8>], skip: usize| -> usize {
        coords.iter().enumerate().filter(|&(k, o)| k != skip && !adjacent(c, o, graph)).count()
    };
    let mut load: Vec<usize> = (0..size).map(|k| conflicts_with(&coords[k], &coords, k)).collect();
    let samples = count.min(256);
    for _ in 0..budget {
        if load.iter().all(|&l| l == 0) {
            set.sort_unstable();
            return Some(set);
        }
        let worst = *load.iter().max().unwrap();
        let victims: Vec<usize> = (0..size).filter(|&k| load[k] == worst).collect();
        let k = victims[rng.gen_range(0..victims.len())];
        let mut best: Option<(usize, usize)> = None;
        for _ in 0..samples {
            let cand = rng.gen_range(0..count);
            if set.contains(&cand) {
                continue;
            }
            let c = conflicts_with(&decode(cand), &coords, k);
            if best.map_or(true, |(_, b)| c < b) {
                best = Some((cand, c));
            }
        }
        let Some((cand, _)) = best else { continue };
        let new = decode(cand);
        for (j, o) in coords.iter().enumerate() {
            if j == k {
                continue;
            }
            let before = !adjacent(&coords[k], o, graph) as usize;
            let after = !adjacent(&new, o, graph) as usize;
            load[j] = load[j] + after - before;
        }
        set[k] = cand;
        coords[k] = new;
        load[k] = conflicts_with(&coords[k], &coords, k);
    }
    None
}

/// Qubit state for one coordinate: 0, 1, 2, 3 map to |0>, |+>, |1>, |->.
pub fn qubit_state(digit: u8) -> ComplexVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (a, b) = match digit {
        0 => (1.0, 0.0),
        1 => (h, h),
        2 => (0.0, 1.0),
        _ => (h, -h),
    };
    ComplexVector::new(vec![C64::new(a, 0.0), C64::new(b, 0.0)]).expect("two entries")
}

/// The product basis of `(C^2)^n` attached to a tiling clique.
pub fn basis_from_clique(c: &CliqueCandidate) -> Result<UnentangledBasis> {
    let report = verify_clique(c, Graph::G);
    if !report.is_tiling() {
        return Err(Error::Precondition(match report.first_failure {
            Some((i, j)) => format!("{} and {} are not adjacent in G", c.vectors[i], c.vectors[j]),
            None => format!("a basis needs 2^{} vectors, got {}", c.n, c.len()),
        }));
    }
    let locals: [ComplexVector; 4] = [qubit_state(0), qubit_state(1), qubit_state(2), qubit_state(3)];
    let elements = c
        .vectors
        .iter()
        .map(|v| ProductState::new(v.coords.iter().map(|&d| locals[d as usize].clone()).collect()))
        .collect::<Result<Vec<_>>>()?;
    UnentangledBasis::new(vec![2; c.n], elements)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::{find_local_pairs, validate_unentangled};

    fn kv(s: &str) -> KellerVector {
        s.parse().unwrap()
    }

    fn cand(lines: &[&str]) -> CliqueCandidate {
        CliqueCandidate::new(lines[0].len(), lines.iter().map(|s| kv(s)).collect()).unwrap()
    }

    #[test]
    fn edge_examples() {
        assert!(edge(&kv("00"), &kv("20"), Graph::G).unwrap());
        assert!(!edge(&kv("00"), &kv("20"), Graph::GStar).unwrap());
        assert!(edge(&kv("01"), &kv("23"), Graph::G).unwrap());
        assert!(edge(&kv("01"), &kv("23"), Graph::GStar).unwrap());
        assert!(!edge(&kv("00"), &kv("11"), Graph::G).unwrap());
        assert!(!edge(&kv("00"), &kv("11"), Graph::GStar).unwrap());
        assert!(!edge(&kv("03"), &kv("00"), Graph::G).unwrap());
        assert!(edge(&kv("0"), &kv("00"), Graph::G).is_err());
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!("0124".parse::<KellerVector>().is_err());
        assert!(CliqueCandidate::new(2, vec![kv("01"), kv("01")]).is_err());
        assert!(CliqueCandidate::read("01\n012\n".as_bytes()).is_err());
        let c = CliqueCandidate::read("02\n20\r\n\n".as_bytes()).unwrap();
        let mut out = Vec::new();
        c.write(&mut out).unwrap();
        assert_eq!(out, b"02\n20\n");
    }

    #[test]
    fn verify_examples() {
        let one = cand(&["0", "2"]);
        let r = verify_clique(&one, Graph::G);
        assert!(r.is_clique() && r.is_tiling());
        let two = cand(&["00", "20", "12", "32"]);
        assert!(verify_clique(&two, Graph::G).is_clique());
        let r = verify_clique(&two, Graph::GStar);
        assert_eq!(r.first_failure, Some((0, 1)));
        assert_eq!(r.certificate, None);
        assert_eq!(r.pairs_checked, 6);
    }

    #[test]
    fn exhaustive_small_cases() {
        let c = clique_search(1, 2, SearchMode::Exhaustive, Graph::G, 0, 0).unwrap().unwrap();
        assert_eq!(c.vectors(), &[kv("0"), kv("2")]);
        let c = clique_search(2, 4, SearchMode::Exhaustive, Graph::G, 0, 0).unwrap().unwrap();
        assert!(verify_clique(&c, Graph::G).is_tiling());
        assert_eq!(clique_search(2, 4, SearchMode::Exhaustive, Graph::GStar, 0, 0).unwrap(), None);
        assert_eq!(clique_search(3, 8, SearchMode::Exhaustive, Graph::GStar, 0, 0).unwrap(), None);
        let c3 = clique_search(3, 8, SearchMode::Exhaustive, Graph::G, 0, 1).unwrap().unwrap();
        assert_eq!(Some(c3), clique_search(3, 8, SearchMode::Exhaustive, Graph::G, 0, 99).unwrap());
        assert!(clique_search(4, 16, SearchMode::Exhaustive, Graph::G, 0, 0).is_err());
    }

    /// Every 4-subset of the 16 vertices, checked pair by pair.
    #[test]
    fn exhaustive_agrees_with_enumeration() {
        let verts: Vec<KellerVector> = (0..16).map(|i| KellerVector::from_index(i, 2)).collect();
        for graph in [Graph::G, Graph::GStar] {
            let mut any = false;
            for a in 0..16 {
                for b in a + 1..16 {
                    for c in b + 1..16 {
                        for d in c + 1..16 {
                            let q = [a, b, c, d];
                            any |= q.iter().enumerate().all(|(x, &i)| {
                                q[x + 1..].iter().all(|&j| edge(&verts[i], &verts[j], graph).unwrap())
                            });
                        }
                    }
                }
            }
            let found = clique_search(2, 4, SearchMode::Exhaustive, graph, 0, 0).unwrap();
            assert_eq!(any, found.is_some(), "{graph:?}");
        }
    }

    #[test]
    fn heuristic_finds_tilings() {
        let c = clique_search(4, 16, SearchMode::Heuristic, Graph::G, 20_000, 3).unwrap().unwrap();
        assert!(verify_clique(&c, Graph::G).is_tiling());
        assert_eq!(clique_search(2, 4, SearchMode::Heuristic, Graph::GStar, 2_000, 3).unwrap(), None);
    }

    #[test]
    fn bases_from_cliques() {
        let b = basis_from_clique(&cand(&["0", "2"])).unwrap();
        assert_eq!(b.elements()[0].factor(0), &ComplexVector::basis(2, 0));
        assert_eq!(b.elements()[1].factor(0), &ComplexVector::basis(2, 1));
        let c = clique_search(3, 8, SearchMode::Exhaustive, Graph::G, 0, 0).unwrap().unwrap();
        assert!(validate_unentangled(&basis_from_clique(&c).unwrap()).is_valid());
        assert!(matches!(basis_from_clique(&cand(&["00", "20", "11", "33"])), Err(Error::Precondition(_))));
        assert!(matches!(basis_from_clique(&cand(&["00", "20"])), Err(Error::Precondition(_))));
    }

    #[test]
    fn facet_sharing_pairs_are_local_pairs() {
        let c = cand(&["00", "20", "12", "32"]);
        let b = basis_from_clique(&c).unwrap();
        let pairs = find_local_pairs(b.elements());
        assert!(pairs.iter().any(|p| p.pair == (0, 1) && p.site == 0));
    }
}
