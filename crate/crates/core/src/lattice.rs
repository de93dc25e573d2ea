//! Periodic d×d plaquette lattice carrying bit-flip errors on its 2d² edges.
//!
//! Coordinates: plaquette `(row, col)` with the row index growing downward.
//! Each plaquette owns two qubits, the one on its top edge and the one on its
//! west edge. The top edge of `(r, c)` is the bottom edge of `(r-1, c)` and the
//! west edge of `(r, c)` is the east edge of `(r, c-1)`, all indices mod d.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Code distance of the torus. Odd and at least 3, so that every plaquette
/// can sit at the exact center of a d×d window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct CodeDistance(usize);

impl CodeDistance {
    pub fn new(d: usize) -> Result<Self> {
        if d < 3 || d.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "code distance must be an odd integer >= 3, got {d}"
            )));
        }
        Ok(CodeDistance(d))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    /// Number of physical qubits, 2d².
    pub fn qubits(self) -> usize {
        2 * self.0 * self.0
    }

    /// Index of the central row/column of a d×d window.
    pub fn center(self) -> usize {
        (self.0 - 1) / 2
    }
}

impl TryFrom<usize> for CodeDistance {
    type Error = Error;
    fn try_from(d: usize) -> Result<Self> {
        CodeDistance::new(d)
    }
}

impl From<CodeDistance> for usize {
    fn from(d: CodeDistance) -> usize {
        d.0
    }
}

impl fmt::Display for CodeDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A plaquette coordinate. Orders row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Plaquette {
    pub row: usize,
    pub col: usize,
}

impl Plaquette {
    pub const fn new(row: usize, col: usize) -> Self {
        Plaquette { row, col }
    }

    /// Neighboring plaquette one step in `dir`, wrapping around the torus.
    pub fn step(self, dir: Direction, d: CodeDistance) -> Plaquette {
        let d = d.get();
        match dir {
            Direction::Up => Plaquette::new((self.row + d - 1) % d, self.col),
            Direction::Down => Plaquette::new((self.row + 1) % d, self.col),
            Direction::Right => Plaquette::new(self.row, (self.col + 1) % d),
            Direction::Left => Plaquette::new(self.row, (self.col + d - 1) % d),
        }
    }
}

impl From<(usize, usize)> for Plaquette {
    fn from((row, col): (usize, usize)) -> Self {
        Plaquette { row, col }
    }
}

impl fmt::Display for Plaquette {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Direction in which a defect is moved. The discriminant is the index of the
/// corresponding Q-network output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Up = 0,
    Down = 1,
    Right = 2,
    Left = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Up,
        Direction::Down,
        Direction::Right,
        Direction::Left,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Direction> {
        Direction::ALL.get(i).copied()
    }

    /// Image under a quarter turn clockwise.
    pub fn rotate_cw(self) -> Direction {
        match self {
            Direction::Up => Direction::Right,
            Direction::Right => Direction::Down,
            Direction::Down => Direction::Left,
            Direction::Left => Direction::Up,
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::Right => Direction::Left,
            Direction::Left => Direction::Right,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Right => "right",
            Direction::Left => "left",
        };
        f.write_str(s)
    }
}

/// Move of the defect sitting on `defect` one plaquette in `direction`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub defect: Plaquette,
    pub direction: Direction,
}

impl Action {
    pub fn new(defect: impl Into<Plaquette>, direction: Direction) -> Self {
        Action {
            defect: defect.into(),
            direction,
        }
    }
}

/// Which of the two edge qubits of a plaquette.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Top,
    Left,
}

/// Accumulated flip record of every physical qubit (errors and corrections).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HiddenState {
    d: CodeDistance,
    top: Vec<bool>,
    left: Vec<bool>,
}

impl HiddenState {
    /// State with no flipped qubits.
    pub fn new(d: CodeDistance) -> Self {
        let n = d.get() * d.get();
        HiddenState {
            d,
            top: vec![false; n],
            left: vec![false; n],
        }
    }

    pub fn from_bits(d: CodeDistance, top: Vec<bool>, left: Vec<bool>) -> Result<Self> {
        let n = d.get() * d.get();
        if top.len() != n || left.len() != n {
            return Err(Error::InvalidArgument(format!(
                "expected two {n}-bit edge matrices, got {} and {}",
                top.len(),
                left.len()
            )));
        }
        Ok(HiddenState { d, top, left })
    }

    pub fn distance(&self) -> CodeDistance {
        self.d
    }

    #[inline]
    fn idx(&self, row: usize, col: usize) -> usize {
        row * self.d.get() + col
    }

    pub fn top(&self, row: usize, col: usize) -> bool {
        self.top[self.idx(row, col)]
    }

    pub fn left(&self, row: usize, col: usize) -> bool {
        self.left[self.idx(row, col)]
    }

    pub fn top_bits(&self) -> &[bool] {
        &self.top
    }

    pub fn left_bits(&self) -> &[bool] {
        &self.left
    }

    pub fn flip(&mut self, edge: Edge, row: usize, col: usize) {
        let i = self.idx(row, col);
        match edge {
            Edge::Top => self.top[i] ^= true,
            Edge::Left => self.left[i] ^= true,
        }
    }

    /// Number of flipped qubits.
    pub fn weight(&self) -> usize {
        self.top.iter().chain(&self.left).filter(|&&b| b).count()
    }

    /// Toggles each of the 2d² qubits independently with probability `p`.
    pub fn apply_iid_errors<R: Rng + ?Sized>(&mut self, p: f64, rng: &mut R) -> Result<()> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "error rate must lie in [0, 1], got {p}"
            )));
        }
        for bit in self.top.iter_mut().chain(self.left.iter_mut()) {
            if rng.random::<f64>() < p {
                *bit ^= true;
            }
        }
        Ok(())
    }

    /// Fresh state carrying i.i.d. errors at rate `p`.
    pub fn random<R: Rng + ?Sized>(d: CodeDistance, p: f64, rng: &mut R) -> Result<Self> {
        let mut state = HiddenState::new(d);
        state.apply_iid_errors(p, rng)?;
        Ok(state)
    }

    fn plaquette_parity(&self, row: usize, col: usize) -> bool {
        let d = self.d.get();
        self.top(row, col)
            ^ self.top((row + 1) % d, col)
            ^ self.left(row, col)
            ^ self.left(row, (col + 1) % d)
    }

    pub fn compute_syndrome(&self) -> Syndrome {
        let d = self.d.get();
        let defects = (0..d)
            .flat_map(|r| (0..d).map(move |c| (r, c)))
            .filter(|&(r, c)| self.plaquette_parity(r, c))
            .map(Plaquette::from)
            .collect();
        Syndrome { d: self.d, defects }
    }

    pub fn has_defect(&self, at: Plaquette) -> bool {
        self.plaquette_parity(at.row, at.col)
    }

    /// Toggles the qubit separating `from` and its neighbor in `dir`, without
    /// checking that a defect sits on `from`.
    pub fn flip_towards(&mut self, from: Plaquette, dir: Direction) {
        let d = self.d.get();
        let (r, c) = (from.row, from.col);
        match dir {
            Direction::Up => self.flip(Edge::Top, r, c),
            Direction::Down => self.flip(Edge::Top, (r + 1) % d, c),
            Direction::Left => self.flip(Edge::Left, r, c),
            Direction::Right => self.flip(Edge::Left, r, (c + 1) % d),
        }
    }

    /// Moves a defect one plaquette. Fails unless `action.defect` carries a
    /// defect in the current syndrome.
    pub fn apply_action(&mut self, action: Action) -> Result<()> {
        let Plaquette { row, col } = action.defect;
        let d = self.d.get();
        if row >= d || col >= d {
            return Err(Error::ContractViolation(format!(
                "plaquette {} outside a {d}x{d} lattice",
                action.defect
            )));
        }
        if !self.has_defect(action.defect) {
            return Err(Error::ContractViolation(format!(
                "no defect at plaquette {}",
                action.defect
            )));
        }
        self.flip_towards(action.defect, action.direction);
        Ok(())
    }

    /// Parities of the flips crossing a horizontal cut (row 0 top edges) and a
    /// vertical cut (column 0 west edges). A set parity means the flip chain
    /// winds the torus vertically or horizontally an odd number of times.
    /// Only meaningful, and only permitted, when the syndrome is empty.
    pub fn winding_parities(&self) -> Result<(bool, bool)> {
        if !self.compute_syndrome().is_empty() {
            return Err(Error::ContractViolation(
                "winding parities are defined only for an empty syndrome".into(),
            ));
        }
        Ok(self.cut_parities(0, 0))
    }

    /// Cut parities across row `row` and column `col`, with no syndrome check.
    pub fn cut_parities(&self, row: usize, col: usize) -> (bool, bool) {
        let d = self.d.get();
        let vertical = (0..d).fold(false, |acc, c| acc ^ self.top(row, c));
        let horizontal = (0..d).fold(false, |acc, r| acc ^ self.left(r, col));
        (vertical, horizontal)
    }

    /// True when the closed flip chain contains a non-trivial loop.
    pub fn is_logical_failure(&self) -> Result<bool> {
        let (v, h) = self.winding_parities()?;
        Ok(v || h)
    }
}

/// The set of defects of a hidden state, sorted row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Syndrome {
    d: CodeDistance,
    defects: Vec<Plaquette>,
}

impl Syndrome {
    /// Builds a syndrome from explicit defect coordinates. The count must be
    /// even, as it is for every syndrome produced by a flip configuration.
    pub fn new(d: CodeDistance, defects: impl IntoIterator<Item = Plaquette>) -> Result<Self> {
        let mut defects: Vec<Plaquette> = defects.into_iter().collect();
        if let Some(p) = defects.iter().find(|p| p.row >= d.get() || p.col >= d.get()) {
            return Err(Error::InvalidArgument(format!(
                "defect {p} outside a {d}x{d} lattice"
            )));
        }
        defects.sort_unstable();
        if defects.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate defect coordinate".into()));
        }
        if !defects.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "a syndrome holds an even number of defects, got {}",
                defects.len()
            )));
        }
        Ok(Syndrome { d, defects })
    }

    pub fn empty(d: CodeDistance) -> Self {
        Syndrome {
            d,
            defects: Vec::new(),
        }
    }

    pub fn distance(&self) -> CodeDistance {
        self.d
    }

    pub fn defects(&self) -> &[Plaquette] {
        &self.defects
    }

    pub fn len(&self) -> usize {
        self.defects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defects.is_empty()
    }

    pub fn contains(&self, p: Plaquette) -> bool {
        self.defects.binary_search(&p).is_ok()
    }

    /// A flip configuration realizing this syndrome: each consecutive pair of
    /// defects joined by a straight rows-then-columns chain.
    pub fn to_hidden_state(&self) -> HiddenState {
        let mut state = HiddenState::new(self.d);
        for pair in self.defects.chunks(2) {
            let mut at = pair[0];
            for dir in crate::matching::correction_path(pair[0], pair[1], self.d) {
                state.flip_towards(at, dir);
                at = at.step(dir, self.d);
            }
        }
        state
    }
}
