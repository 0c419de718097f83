use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::riccati_lqt::LinearSystem;

/// Named, contiguous slices of a state vector. The slices partition `0..dim`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateLayout {
    dim: usize,
    slices: Vec<(String, Range<usize>)>,
}

impl StateLayout {
    pub fn new(dim: usize, slices: Vec<(&str, Range<usize>)>) -> Result<Self> {
        let mut next = 0;
        for (name, r) in &slices {
            if r.start != next || r.end <= r.start {
                return Err(Error::InvalidParameter {
                    name: "layout",
                    reason: format!("slice `{name}` = {r:?} does not continue at {next}"),
                });
            }
            next = r.end;
        }
        if next != dim {
            return Err(Error::InvalidParameter {
                name: "layout",
                reason: format!("slices cover 0..{next}, state has {dim} entries"),
            });
        }
        if !slices.iter().any(|(n, _)| *n == "position") {
            return Err(Error::InvalidParameter {
                name: "layout",
                reason: "missing `position` slice".into(),
            });
        }
        Ok(Self {
            dim,
            slices: slices.into_iter().map(|(n, r)| (n.to_string(), r)).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slice(&self, name: &str) -> Option<Range<usize>> {
        self.slices.iter().find(|(n, _)| n == name).map(|(_, r)| r.clone())
    }

    pub fn position(&self) -> Range<usize> {
        self.slice("position").expect("layout always has a position slice")
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slices.iter().map(|(n, _)| n.as_str())
    }

    /// Column labels such as `position_0`, `velocity_2`.
    pub fn labels(&self) -> Vec<String> {
        self.slices
            .iter()
            .flat_map(|(n, r)| (0..r.len()).map(move |i| format!("{n}_{i}")))
            .collect()
    }
}

/// Controlled linear dynamics with a state layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsModel {
    pub name: String,
    pub system: LinearSystem,
    pub layout: StateLayout,
}

impl DynamicsModel {
    pub fn state_dim(&self) -> usize {
        self.system.state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.system.input_dim()
    }

    pub fn position<'a>(&self, state: &'a DVector<f64>) -> nalgebra::DVectorView<'a, f64> {
        let r = self.layout.position();
        state.rows(r.start, r.len())
    }
}

/// Point mass in 3-D: state `[p; v]`, input acceleration.
pub fn double_integrator_3d() -> DynamicsModel {
    let mut a = DMatrix::zeros(6, 6);
    let mut b = DMatrix::zeros(6, 3);
    for j in 0..3 {
        a[(j, j + 3)] = 1.0;
        b[(3 + j, j)] = 1.0;
    }
    DynamicsModel {
        name: "double-integrator".into(),
        system: LinearSystem::controlled(a, b).expect("valid dimensions"),
        layout: StateLayout::new(6, vec![("position", 0..3), ("velocity", 3..6)]).expect("valid layout"),
    }
}

/// Physical constants of the hover-linearized quadcopter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadcopterParams {
    pub mass: f64,
    pub ixx: f64,
    pub iyy: f64,
    pub izz: f64,
    pub gravity: f64,
}

impl Default for QuadcopterParams {
    fn default() -> Self {
        let (ixx, iyy) = (0.00062, 0.00113);
        Self {
            mass: 0.1,
            ixx,
            iyy,
            izz: 0.9 * (ixx + iyy),
            gravity: 9.81,
        }
    }
}

/// Quadcopter linearized about hover.
///
/// State `[x y z ψ θ φ u v w p q r]` (positions, yaw/pitch/roll, body
/// velocities, body rates); input `[f_t τ_x τ_y τ_z]` as deviations from
/// hover thrust. z points down, so thrust enters `ẇ` with `−1/m`.
pub fn quadcopter(params: QuadcopterParams) -> Result<DynamicsModel> {
    for (name, v) in [
        ("mass", params.mass),
        ("ixx", params.ixx),
        ("iyy", params.iyy),
        ("izz", params.izz),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("must be positive and finite, got {v}"),
            });
        }
    }
    if !params.gravity.is_finite() {
        return Err(Error::InvalidParameter {
            name: "gravity",
            reason: "must be finite".into(),
        });
    }
    let g = params.gravity;
    let mut a = DMatrix::zeros(12, 12);
    a[(0, 6)] = 1.0;
    a[(1, 7)] = 1.0;
    a[(2, 8)] = 1.0;
    a[(3, 11)] = 1.0; // ψ̇ = r
    a[(4, 10)] = 1.0; // θ̇ = q
    a[(5, 9)] = 1.0; // φ̇ = p
    a[(6, 4)] = -g; // u̇ = −g θ
    a[(7, 5)] = g; // v̇ = g φ
    let mut b = DMatrix::zeros(12, 4);
    b[(8, 0)] = -1.0 / params.mass;
    b[(9, 1)] = 1.0 / params.ixx;
    b[(10, 2)] = 1.0 / params.iyy;
    b[(11, 3)] = 1.0 / params.izz;
    Ok(DynamicsModel {
        name: "quadcopter".into(),
        system: LinearSystem::controlled(a, b)?,
        layout: StateLayout::new(
            12,
            vec![
                ("position", 0..3),
                ("attitude", 3..6),
                ("velocity", 6..9),
                ("rates", 9..12),
            ],
        )?,
    })
}
