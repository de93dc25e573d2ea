//! Defect-centered views of a syndrome.
//!
//! A perspective is the syndrome translated on the torus so that one chosen
//! defect lands on the central cell of a d×d binary grid. An observation is
//! the list of perspectives of every defect, in row-major defect order.

use crate::error::{Error, Result};
use crate::lattice::{CodeDistance, Direction, Plaquette, Syndrome};

/// d×d binary grid (1 = defect) with the acting defect at the center.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Perspective {
    d: CodeDistance,
    grid: Vec<u8>,
}

impl Perspective {
    pub fn from_grid(d: CodeDistance, grid: Vec<u8>) -> Result<Self> {
        let n = d.get() * d.get();
        if grid.len() != n || grid.iter().any(|&v| v > 1) {
            return Err(Error::InvalidArgument(format!(
                "a perspective is a binary grid of {n} cells"
            )));
        }
        Ok(Perspective { d, grid })
    }

    pub fn distance(&self) -> CodeDistance {
        self.d
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.grid[row * self.d.get() + col] == 1
    }

    /// Row-major cell values.
    pub fn cells(&self) -> &[u8] {
        &self.grid
    }

    pub fn ones(&self) -> usize {
        self.grid.iter().filter(|&&v| v == 1).count()
    }

    /// Positions of all defects in grid coordinates.
    pub fn defect_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let d = self.d.get();
        self.grid
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(move |(i, _)| (i / d, i % d))
    }
}

/// Perspectives of every defect of a syndrome.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Observation {
    pub defects: Vec<Plaquette>,
    pub perspectives: Vec<Perspective>,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.perspectives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perspectives.is_empty()
    }
}

pub(crate) fn centered(d: CodeDistance, defects: &[Plaquette], center: Plaquette) -> Perspective {
    let n = d.get();
    let c = d.center();
    let mut grid = vec![0u8; n * n];
    for p in defects {
        let r = (p.row + n - center.row + c) % n;
        let k = (p.col + n - center.col + c) % n;
        grid[r * n + k] = 1;
    }
    Perspective { d, grid }
}

/// The syndrome translated so that `defect` sits at the center cell.
pub fn perspective_of(syndrome: &Syndrome, defect: Plaquette) -> Result<Perspective> {
    if !syndrome.contains(defect) {
        return Err(Error::ContractViolation(format!(
            "no defect at plaquette {defect}"
        )));
    }
    Ok(centered(syndrome.distance(), syndrome.defects(), defect))
}

pub fn observation_of(syndrome: &Syndrome) -> Observation {
    let d = syndrome.distance();
    let defects = syndrome.defects().to_vec();
    let perspectives = defects
        .iter()
        .map(|&e| centered(d, syndrome.defects(), e))
        .collect();
    Observation {
        defects,
        perspectives,
    }
}

/// Quarter turn clockwise of a perspective together with the action taken
/// from its center: cell `(r, k)` goes to `(k, d-1-r)`.
pub fn rotate90(p: &Perspective, action: Direction) -> (Perspective, Direction) {
    (rotate_grid(p), action.rotate_cw())
}

pub fn rotate_grid(p: &Perspective) -> Perspective {
    let n = p.d.get();
    let mut grid = vec![0u8; n * n];
    for r in 0..n {
        for k in 0..n {
            grid[k * n + (n - 1 - r)] = p.grid[r * n + k];
        }
    }
    Perspective { d: p.d, grid }
}

/// The four rotated copies `(P, a), (R P, R a), (R² P, R² a), (R³ P, R³ a)`.
pub fn rotations(p: &Perspective, action: Direction) -> [(Perspective, Direction); 4] {
    let r1 = rotate90(p, action);
    let r2 = rotate90(&r1.0, r1.1);
    let r3 = rotate90(&r2.0, r2.1);
    [(p.clone(), action), r1, r2, r3]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::HiddenState;
    use crate::rng;
    use proptest::prelude::*;

    fn cd(d: usize) -> CodeDistance {
        CodeDistance::new(d).unwrap()
    }

    fn syn(d: usize, pts: &[(usize, usize)]) -> Syndrome {
        Syndrome::new(cd(d), pts.iter().copied().map(Plaquette::from)).unwrap()
    }

    fn ones(p: &Perspective) -> Vec<(usize, usize)> {
        p.defect_cells().collect()
    }

    #[test]
    fn lone_defect_already_centered() {
        let p = centered(cd(5), &[Plaquette::new(2, 2)], Plaquette::new(2, 2));
        assert_eq!(ones(&p), vec![(2, 2)]);
    }

    #[test]
    fn shift_formula_examples() {
        let s = syn(5, &[(1, 1), (3, 2)]);
        let p = perspective_of(&s, Plaquette::new(1, 1)).unwrap();
        assert_eq!(ones(&p), vec![(2, 2), (4, 3)]);

        let s = syn(5, &[(0, 0), (4, 4)]);
        let p = perspective_of(&s, Plaquette::new(0, 0)).unwrap();
        assert_eq!(ones(&p), vec![(1, 1), (2, 2)]);
    }

    #[test]
    fn perspective_of_missing_defect_fails() {
        let s = syn(5, &[(1, 1), (3, 2)]);
        assert!(matches!(
            perspective_of(&s, Plaquette::new(0, 0)),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn observation_shapes_and_order() {
        assert!(observation_of(&Syndrome::empty(cd(5))).is_empty());
        let s = syn(5, &[(3, 2), (1, 1)]);
        let o = observation_of(&s);
        assert_eq!(o.len(), 2);
        assert_eq!(o.defects, vec![Plaquette::new(1, 1), Plaquette::new(3, 2)]);
        assert_eq!(ones(&o.perspectives[0]), vec![(2, 2), (4, 3)]);
        // centered on (3,2): (1,1) lands at (0,1)
        assert_eq!(ones(&o.perspectives[1]), vec![(0, 1), (2, 2)]);
    }

    #[test]
    fn rotation_examples() {
        let d = cd(5);
        let uniform = Perspective::from_grid(d, vec![1; 25]).unwrap();
        let (r, a) = rotate90(&uniform, Direction::Left);
        assert_eq!(r, uniform);
        assert_eq!(a, Direction::Up);

        let mut grid = vec![0u8; 25];
        grid[2] = 1; // (0, c)
        let p = Perspective::from_grid(d, grid).unwrap();
        let (r, a) = rotate90(&p, Direction::Up);
        assert_eq!(ones(&r), vec![(2, 4)]);
        assert_eq!(a, Direction::Right);
    }

    fn random_syndrome(d: usize, seed: u64) -> Syndrome {
        HiddenState::random(cd(d), 0.15, &mut rng::stream(seed, 0))
            .unwrap()
            .compute_syndrome()
    }

    /// Rotates a whole syndrome with the same index map as `rotate_grid`.
    fn rotate_syndrome(s: &Syndrome) -> Syndrome {
        let n = s.distance().get();
        Syndrome::new(
            s.distance(),
            s.defects().iter().map(|p| Plaquette::new(p.col, n - 1 - p.row)),
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn four_rotations_are_identity(d in prop::sample::select(vec![3usize, 5, 7]), seed: u64, a in 0usize..4) {
            let s = random_syndrome(d, seed);
            prop_assume!(!s.is_empty());
            let p = observation_of(&s).perspectives.remove(0);
            let a = Direction::from_index(a).unwrap();
            let (mut q, mut b) = (p.clone(), a);
            for _ in 0..4 {
                (q, b) = rotate90(&q, b);
            }
            prop_assert_eq!(q, p);
            prop_assert_eq!(b, a);
        }

        #[test]
        fn perspectives_are_translations(d in prop::sample::select(vec![3usize, 5, 7]), seed: u64) {
            let s = random_syndrome(d, seed);
            let o = observation_of(&s);
            prop_assert_eq!(o.len(), s.len());
            let displacements = |p: &Perspective| {
                let cells: Vec<_> = p.defect_cells().collect();
                let mut out: Vec<(usize, usize)> = cells
                    .iter()
                    .flat_map(|a| cells.iter().map(move |b| ((b.0 + d - a.0) % d, (b.1 + d - a.1) % d)))
                    .collect();
                out.sort_unstable();
                out
            };
            for p in &o.perspectives {
                prop_assert!(p.get(d / 2, d / 2));
                prop_assert_eq!(p.ones(), s.len());
                prop_assert_eq!(displacements(p), displacements(&o.perspectives[0]));
            }
        }

        #[test]
        fn actions_commute_with_rotation(d in prop::sample::select(vec![3usize, 5, 7]), seed: u64, pick: usize, a in 0usize..4) {
            let state = HiddenState::random(cd(d), 0.15, &mut rng::stream(seed, 0)).unwrap();
            let s = state.compute_syndrome();
            prop_assume!(!s.is_empty());
            let e = s.defects()[pick % s.len()];
            let a = Direction::from_index(a).unwrap();

            // act, then view the result from the moved defect's landing cell
            let mut moved = state.clone();
            moved.apply_action(crate::lattice::Action::new(e, a)).unwrap();
            let after = moved.compute_syndrome();
            let landing = e.step(a, cd(d));
            let acted_then_rotated = rotate_grid(&centered(cd(d), after.defects(), landing));

            // rotate first, then act with the mapped direction
            let rs = rotate_syndrome(&s);
            let re = Plaquette::new(e.col, d - 1 - e.row);
            let (_, ra) = rotate90(&perspective_of(&s, e).unwrap(), a);
            let mut rotated = rs.to_hidden_state();
            rotated.apply_action(crate::lattice::Action::new(re, ra)).unwrap();
            let r_landing = re.step(ra, cd(d));
            let rotated_then_acted = centered(cd(d), rotated.compute_syndrome().defects(), r_landing);
            prop_assert_eq!(acted_then_rotated, rotated_then_acted);

            // and the rotated perspective is the perspective of the rotated syndrome
            prop_assert_eq!(rotate_grid(&perspective_of(&s, e).unwrap()), perspective_of(&rs, re).unwrap());
        }
    }
}
