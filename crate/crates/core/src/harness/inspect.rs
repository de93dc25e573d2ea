use serde::{Deserialize, Serialize};

use crate::dqn::{argmax_cell, QFunction};
use crate::encoding::observation_of;
use crate::error::{Error, Result};
use crate::lattice::{CodeDistance, Plaquette, Syndrome};
use crate::nn::QNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionValues {
    pub up: f64,
    pub down: f64,
    pub right: f64,
    pub left: f64,
}

impl From<[f64; 4]> for DirectionValues {
    fn from(q: [f64; 4]) -> Self {
        DirectionValues {
            up: q[0],
            down: q[1],
            right: q[2],
            left: q[3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectValues {
    pub row: usize,
    pub col: usize,
    pub q: DirectionValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyChoice {
    pub row: usize,
    pub col: usize,
    pub direction: String,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QReport {
    pub d: usize,
    pub defects: Vec<DefectValues>,
    pub greedy: Option<GreedyChoice>,
}

/// Parses `"r,c;r,c;..."` (whitespace ignored, empty for no defects).
pub fn parse_syndrome(d: CodeDistance, spec: &str) -> Result<Syndrome> {
    let mut defects = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (r, c) = part
            .split_once(',')
            .ok_or_else(|| Error::InvalidArgument(format!("defect '{part}' is not 'row,col'")))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("bad coordinate '{s}' in '{part}'")))
        };
        defects.push(Plaquette::new(parse(r)?, parse(c)?));
    }
    Syndrome::new(d, defects)
}

/// Q-values of every defect of `syndrome` and the greedy choice.
pub fn inspect_q(net: &QNetwork, syndrome: &Syndrome) -> Result<QReport> {
    let d = net.architecture().d;
    if syndrome.distance() != d {
        return Err(Error::ShapeMismatch(format!(
            "checkpoint is for d={d}, syndrome has d={}",
            syndrome.distance()
        )));
    }
    let obs = observation_of(syndrome);
    if obs.is_empty() {
        return Ok(QReport {
            d: d.get(),
            defects: Vec::new(),
            greedy: None,
        });
    }
    let rows = net.q_values(&obs.perspectives);
    let (i, dir) = argmax_cell(&rows);
    Ok(QReport {
        d: d.get(),
        defects: obs
            .defects
            .iter()
            .zip(&rows)
            .map(|(p, q)| DefectValues {
                row: p.row,
                col: p.col,
                q: (*q).into(),
            })
            .collect(),
        greedy: Some(GreedyChoice {
            row: obs.defects[i].row,
            col: obs.defects[i].col,
            direction: dir.to_string(),
            q: rows[i][dir.index()],
        }),
    })
}
