//! Minimum-weight perfect matching of defects under the torus Manhattan
//! metric, and the reference decoder built on it.

mod blossom;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{CodeDistance, Direction, HiddenState, Plaquette, Syndrome};

pub use blossom::max_weight_matching;

/// Largest defect count the subset dynamic program accepts by default.
pub const DEFAULT_DP_CAP: usize = 24;

/// Above this many defects [`MatchingBackend::Auto`] switches to Blossom.
pub const AUTO_DP_LIMIT: usize = 14;

/// Shortest number of single-plaquette moves between `a` and `b`.
pub fn torus_distance(a: Plaquette, b: Plaquette, d: CodeDistance) -> usize {
    let n = d.get();
    let dr = a.row.abs_diff(b.row);
    let dc = a.col.abs_diff(b.col);
    dr.min(n - dr) + dc.min(n - dc)
}

/// Pairwise torus distances between the defects of a syndrome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<u32>,
}

impl DistanceMatrix {
    pub fn from_syndrome(s: &Syndrome) -> Self {
        let defects = s.defects();
        let n = defects.len();
        let mut data = vec![0u32; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let w = torus_distance(defects[i], defects[j], s.distance()) as u32;
                data[i * n + j] = w;
                data[j * n + i] = w;
            }
        }
        DistanceMatrix { n, data }
    }

    /// Builds a matrix from explicit rows; must be square, symmetric and have
    /// a zero diagonal.
    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("distance matrix must be square".into()));
        }
        for i in 0..n {
            if rows[i][i] != 0 {
                return Err(Error::InvalidArgument("distance matrix diagonal must be zero".into()));
            }
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::InvalidArgument("distance matrix must be symmetric".into()));
                }
            }
        }
        Ok(DistanceMatrix {
            n,
            data: rows.concat(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.n + j]
    }
}

/// A perfect matching as sorted index pairs `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub weight: u64,
}

impl Matching {
    fn from_mates(mates: &[usize], dist: &DistanceMatrix) -> Self {
        let mut pairs: Vec<(usize, usize)> = mates
            .iter()
            .enumerate()
            .filter(|&(i, &j)| i < j)
            .map(|(i, &j)| (i, j))
            .collect();
        pairs.sort_unstable();
        let weight = pairs.iter().map(|&(i, j)| dist.get(i, j) as u64).sum();
        Matching { pairs, weight }
    }

    pub fn is_perfect(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for &(i, j) in &self.pairs {
            if i >= n || j >= n || i == j || seen[i] || seen[j] {
                return false;
            }
            seen[i] = true;
            seen[j] = true;
        }
        seen.into_iter().all(|s| s)
    }
}

fn check_even(n: usize) -> Result<()> {
    if !n.is_multiple_of(2) {
        return Err(Error::ContractViolation(format!(
            "a perfect matching needs an even number of nodes, got {n}"
        )));
    }
    Ok(())
}

/// Exact minimum-weight perfect matching by dynamic programming over subsets,
/// with the default size cap. Among optimal matchings the lexicographically
/// smallest sorted pair list is returned.
pub fn min_weight_perfect_matching(dist: &DistanceMatrix) -> Result<Matching> {
    min_weight_perfect_matching_capped(dist, DEFAULT_DP_CAP)
}

pub fn min_weight_perfect_matching_capped(dist: &DistanceMatrix, cap: usize) -> Result<Matching> {
    let n = dist.len();
    check_even(n)?;
    if n > cap {
        return Err(Error::InvalidArgument(format!(
            "{n} defects exceed the subset matching cap of {cap}"
        )));
    }
    if n == 0 {
        return Ok(Matching {
            pairs: Vec::new(),
            weight: 0,
        });
    }

    // best[mask] = minimal weight to perfectly match the nodes in `mask`.
    // Only even-popcount masks are ever read.
    let full = (1usize << n) - 1;
    let mut best = vec![u32::MAX; 1 << n];
    best[0] = 0;
    for mask in 1..=full {
        if mask.count_ones() % 2 != 0 {
            continue;
        }
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut m = rest;
        let mut value = u32::MAX;
        while m != 0 {
            let j = m.trailing_zeros() as usize;
            m &= m - 1;
            let sub = best[rest & !(1 << j)];
            if sub != u32::MAX {
                value = value.min(sub + dist.get(i, j));
            }
        }
        best[mask] = value;
    }

    // Reconstruct, pairing the lowest remaining node with its smallest
    // admissible partner; this yields the lexicographically smallest list.
    let mut pairs = Vec::with_capacity(n / 2);
    let mut mask = full;
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut m = rest;
        loop {
            let j = m.trailing_zeros() as usize;
            m &= m - 1;
            let sub = best[rest & !(1 << j)];
            if sub != u32::MAX && sub + dist.get(i, j) == best[mask] {
                pairs.push((i, j));
                mask = rest & !(1 << j);
                break;
            }
        }
    }
    Ok(Matching {
        pairs,
        weight: best[full] as u64,
    })
}

/// Exact minimum-weight perfect matching via Edmonds' weighted blossom
/// algorithm, O(n³). Optimal ties are resolved by the algorithm's own order.
pub fn blossom_min_weight_perfect_matching(dist: &DistanceMatrix) -> Result<Matching> {
    let n = dist.len();
    check_even(n)?;
    if n == 0 {
        return Ok(Matching {
            pairs: Vec::new(),
            weight: 0,
        });
    }
    let max = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| dist.get(i, j) as i64)
        .max()
        .unwrap_or(0);
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push((i, j, max + 1 - dist.get(i, j) as i64));
        }
    }
    let mates = max_weight_matching(n, &edges, true);
    if mates.iter().any(|m| m.is_none()) {
        return Err(Error::ContractViolation(
            "blossom solver returned an imperfect matching".into(),
        ));
    }
    let mates: Vec<usize> = mates.into_iter().map(|m| m.unwrap()).collect();
    Ok(Matching::from_mates(&mates, dist))
}

/// Which exact solver the decoder uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchingBackend {
    /// Subset DP up to [`AUTO_DP_LIMIT`] defects, Blossom above.
    #[default]
    Auto,
    SubsetDp,
    Blossom,
}

impl MatchingBackend {
    pub fn solve(self, dist: &DistanceMatrix) -> Result<Matching> {
        match self {
            MatchingBackend::SubsetDp => min_weight_perfect_matching(dist),
            MatchingBackend::Blossom => blossom_min_weight_perfect_matching(dist),
            MatchingBackend::Auto if dist.len() <= AUTO_DP_LIMIT => {
                min_weight_perfect_matching(dist)
            }
            MatchingBackend::Auto => blossom_min_weight_perfect_matching(dist),
        }
    }
}

/// Shortest move sequence carrying a defect from `from` to `to`: all row
/// moves first, then all column moves, each axis taking the shorter way
/// around the torus.
pub fn correction_path(from: Plaquette, to: Plaquette, d: CodeDistance) -> Vec<Direction> {
    let n = d.get();
    let half = n / 2;
    let mut path = Vec::new();

    let up = (from.row + n - to.row) % n;
    if up <= half {
        path.extend(std::iter::repeat_n(Direction::Up, up));
    } else {
        path.extend(std::iter::repeat_n(Direction::Down, n - up));
    }
    let left = (from.col + n - to.col) % n;
    if left <= half {
        path.extend(std::iter::repeat_n(Direction::Left, left));
    } else {
        path.extend(std::iter::repeat_n(Direction::Right, n - left));
    }
    path
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MwpmOutcome {
    pub final_state: HiddenState,
    pub success: bool,
    pub steps: usize,
}

/// Matches the syndrome of `state`, applies every correction path and scores
/// the result by its winding parities.
pub fn mwpm_decode(state: &HiddenState) -> Result<MwpmOutcome> {
    mwpm_decode_with(state, MatchingBackend::Auto)
}

pub fn mwpm_decode_with(state: &HiddenState, backend: MatchingBackend) -> Result<MwpmOutcome> {
    let d = state.distance();
    let syndrome = state.compute_syndrome();
    let matching = backend.solve(&DistanceMatrix::from_syndrome(&syndrome))?;
    let mut final_state = state.clone();
    let mut steps = 0;
    for &(i, j) in &matching.pairs {
        let (from, to) = (syndrome.defects()[i], syndrome.defects()[j]);
        let mut at = from;
        for dir in correction_path(from, to, d) {
            final_state.flip_towards(at, dir);
            at = at.step(dir, d);
            steps += 1;
        }
    }
    let success = !final_state.is_logical_failure()?;
    Ok(MwpmOutcome {
        final_state,
        success,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Edge;
    use crate::rng;
    use proptest::prelude::*;

    fn cd(d: usize) -> CodeDistance {
        CodeDistance::new(d).unwrap()
    }

    fn pq(r: usize, c: usize) -> Plaquette {
        Plaquette::new(r, c)
    }

    #[test]
    fn torus_distance_examples() {
        let d = cd(5);
        assert_eq!(torus_distance(pq(0, 0), pq(0, 0), d), 0);
        assert_eq!(torus_distance(pq(0, 0), pq(4, 0), d), 1);
        assert_eq!(torus_distance(pq(0, 0), pq(2, 3), d), 4);
    }

    #[test]
    fn trivial_matchings() {
        let empty = DistanceMatrix::from_rows(&[]).unwrap();
        assert_eq!(min_weight_perfect_matching(&empty).unwrap().pairs, vec![]);
        let two = DistanceMatrix::from_rows(&[vec![0, 3], vec![3, 0]]).unwrap();
        let m = min_weight_perfect_matching(&two).unwrap();
        assert_eq!(m.pairs, vec![(0, 1)]);
        assert_eq!(m.weight, 3);
    }

    #[test]
    fn odd_node_count_is_a_contract_violation() {
        let three = DistanceMatrix::from_rows(&[vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]).unwrap();
        assert!(matches!(
            min_weight_perfect_matching(&three),
            Err(Error::ContractViolation(_))
        ));
        assert!(matches!(
            blossom_min_weight_perfect_matching(&three),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn cap_is_enforced() {
        let rows: Vec<Vec<u32>> = (0..6)
            .map(|i| (0..6).map(|j| if i == j { 0 } else { 1 }).collect())
            .collect();
        let dist = DistanceMatrix::from_rows(&rows).unwrap();
        assert!(matches!(
            min_weight_perfect_matching_capped(&dist, 4),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn four_defect_example_pairs_neighbors() {
        let s = Syndrome::new(cd(5), [pq(0, 0), pq(0, 1), pq(3, 3), pq(3, 4)]).unwrap();
        let dist = DistanceMatrix::from_syndrome(&s);
        let m = min_weight_perfect_matching(&dist).unwrap();
        assert_eq!(m.pairs, vec![(0, 1), (2, 3)]);
        assert_eq!(m.weight, 2);
        // the other two pairings
        assert_eq!(dist.get(0, 2) + dist.get(1, 3), 8);
        assert_eq!(dist.get(0, 3) + dist.get(1, 2), 7);
        assert_eq!(blossom_min_weight_perfect_matching(&dist).unwrap().weight, 2);
    }

    #[test]
    fn lexicographic_tie_break() {
        // square of four nodes at unit distance: (0,1)(2,3) and (0,3)(1,2)
        // and (0,2)(1,3) all tie at weight 2 when every distance is 1
        let rows: Vec<Vec<u32>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 0 } else { 1 }).collect())
            .collect();
        let m = min_weight_perfect_matching(&DistanceMatrix::from_rows(&rows).unwrap()).unwrap();
        assert_eq!(m.pairs, vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn correction_path_examples() {
        use Direction::*;
        let d = cd(5);
        assert_eq!(correction_path(pq(2, 2), pq(0, 2), d), vec![Up, Up]);
        assert_eq!(correction_path(pq(0, 0), pq(4, 0), d), vec![Up]);
        assert_eq!(correction_path(pq(0, 0), pq(2, 3), d), vec![Down, Down, Left, Left]);
    }

    #[test]
    fn decode_examples() {
        let d5 = cd(5);
        let clean = mwpm_decode(&HiddenState::new(d5)).unwrap();
        assert!(clean.success);
        assert_eq!(clean.steps, 0);

        let mut single = HiddenState::new(d5);
        single.flip(Edge::Top, 2, 2);
        let out = mwpm_decode(&single).unwrap();
        assert!(out.success);
        assert_eq!(out.steps, 1);
        assert!(out.final_state.compute_syndrome().is_empty());

        let mut half_loop = HiddenState::new(cd(3));
        half_loop.flip(Edge::Top, 0, 0);
        half_loop.flip(Edge::Top, 1, 0);
        let out = mwpm_decode(&half_loop).unwrap();
        assert_eq!(out.steps, 1);
        assert!(!out.success);
    }

    fn random_state(d: usize, p: f64, seed: u64) -> HiddenState {
        HiddenState::random(cd(d), p, &mut rng::stream(seed, 0)).unwrap()
    }

    proptest! {
        #[test]
        fn decoding_clears_syndrome_in_matching_weight_steps(
            d in prop::sample::select(vec![3usize, 5, 7]), p in 0.0f64..0.2, seed: u64,
        ) {
            let state = random_state(d, p, seed);
            let syn = state.compute_syndrome();
            let weight = MatchingBackend::Auto.solve(&DistanceMatrix::from_syndrome(&syn)).unwrap().weight;
            let backends: &[MatchingBackend] = if syn.len() <= 16 {
                &[MatchingBackend::SubsetDp, MatchingBackend::Blossom]
            } else {
                &[MatchingBackend::Blossom]
            };
            for &backend in backends {
                let out = mwpm_decode_with(&state, backend).unwrap();
                prop_assert!(out.final_state.compute_syndrome().is_empty());
                prop_assert_eq!(out.steps as u64, weight);
            }
        }

        #[test]
        fn matching_weight_is_translation_invariant(
            d in prop::sample::select(vec![3usize, 5, 7]), seed: u64, dr: usize, dc: usize,
        ) {
            let syn = random_state(d, 0.12, seed).compute_syndrome();
            let shifted = Syndrome::new(
                syn.distance(),
                syn.defects().iter().map(|p| pq((p.row + dr) % d, (p.col + dc) % d)),
            ).unwrap();
            let w = |s: &Syndrome| MatchingBackend::Auto.solve(&DistanceMatrix::from_syndrome(s)).unwrap().weight;
            prop_assert_eq!(w(&syn), w(&shifted));
        }

        #[test]
        fn blossom_agrees_with_subset_dp(d in prop::sample::select(vec![5usize, 7]), p in 0.05f64..0.3, seed: u64) {
            let syn = random_state(d, p, seed).compute_syndrome();
            prop_assume!(syn.len() <= 16);
            let dist = DistanceMatrix::from_syndrome(&syn);
            let dp = min_weight_perfect_matching(&dist).unwrap();
            let bl = blossom_min_weight_perfect_matching(&dist).unwrap();
            prop_assert!(bl.is_perfect(syn.len()));
            prop_assert_eq!(dp.weight, bl.weight);
        }

        #[test]
        fn correction_path_has_torus_length_and_annihilates(
            d in prop::sample::select(vec![3usize, 5, 7]), a in (0usize..7, 0usize..7), b in (0usize..7, 0usize..7),
        ) {
            let d = cd(d);
            let n = d.get();
            let (from, to) = (pq(a.0 % n, a.1 % n), pq(b.0 % n, b.1 % n));
            prop_assume!(from != to);
            let path = correction_path(from, to, d);
            prop_assert_eq!(path.len(), torus_distance(from, to, d));
            let mut state = Syndrome::new(d, [from, to]).unwrap().to_hidden_state();
            let mut at = from;
            for dir in path {
                state.apply_action(crate::lattice::Action::new(at, dir)).unwrap();
                at = at.step(dir, d);
            }
            prop_assert!(state.compute_syndrome().is_empty());
        }
    }
}
