//! Three-state benchmark system with one multiplicative unknown parameter:
//!
//! ```text
//! dx1/dt = -0.7 x1^2 - x2 + x3 + (1 - 0.8 x1) theta
//! dx2/dt = -x1 x3 - 2 x2 + (x2 + u) theta
//! dx3/dt = 0.5 x1 - 2 x3 + u
//! y1 = x1 + x2,  y2 = x2
//! ```
//!
//! The premise `z = x1 = y1 - y2` is assumed to lie in the sector `(0, 2)`,
//! which turns the quadratic terms into the affine slopes `-0.7 z` on `x1`
//! and `-z` on `x3`.

use crate::lmi::{DesignSpec, Objective};
use crate::linalg::{Mat, Vector};
use crate::simulator::{InputSignal, SimScenario, ThetaSwitch};
use crate::tsmodel::{
    AffineFamily, Dimensions, ParamAffineModel, ParamTransmission, Premise, PremiseSpec,
};

/// Parameter bound used for the reference design.
pub const DESIGN_THETA_BAR: f64 = 0.6;

/// Values reported for the reference design, kept for comparison summaries.
pub const REPORTED_BETA: f64 = 1.31e-13;
pub const REPORTED_P13: f64 = -4.7e-14;
pub const REPORTED_P23: f64 = -3.3e-14;

pub fn param_affine_model() -> ParamAffineModel {
    let dims = Dimensions::new(3, 1, 2, 1, 1).expect("valid dimensions");
    let a = AffineFamily {
        base: Mat::from_row_slice(3, 3, &[0.0, -1.0, 1.0, 0.0, -2.0, 0.0, 0.5, 0.0, -2.0]),
        slopes: vec![Mat::from_row_slice(
            3,
            3,
            &[-0.7, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0],
        )],
    };
    let b = AffineFamily::constant(Mat::from_column_slice(3, 1, &[0.0, 0.0, 1.0]), 1);
    let f = AffineFamily::zeros(3, 1, 1);
    let transmission = vec![ParamTransmission {
        a: AffineFamily::constant(
            Mat::from_diagonal(&Vector::from_row_slice(&[-0.8, 1.0, 0.0])),
            1,
        ),
        b: AffineFamily::constant(Mat::from_column_slice(3, 1, &[0.0, 1.0, 0.0]), 1),
        // The constant part of (1 - 0.8 x1) theta.
        f: AffineFamily::constant(Mat::from_column_slice(3, 1, &[1.0, 0.0, 0.0]), 1),
    }];
    let c = Mat::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
    let premises = PremiseSpec::new(
        vec![Premise {
            min: 0.0,
            max: 2.0,
            selector: Vector::from_row_slice(&[1.0, -1.0, 0.0]),
        }],
        3,
    )
    .expect("valid premise");
    ParamAffineModel::new(dims, a, b, f, transmission, c, premises).expect("valid example")
}

/// Known vertex and transmission matrices the decomposition must reproduce.
pub struct ReferenceMatrices {
    pub a1: Mat,
    pub a2: Mat,
    pub a_bar: Mat,
    pub b: Mat,
    pub b_bar: Mat,
    pub c: Mat,
}

pub fn reference_matrices() -> ReferenceMatrices {
    ReferenceMatrices {
        a1: Mat::from_row_slice(3, 3, &[-1.4, -1.0, 1.0, 0.0, -2.0, -2.0, 0.5, 0.0, -2.0]),
        a2: Mat::from_row_slice(3, 3, &[0.0, -1.0, 1.0, 0.0, -2.0, 0.0, 0.5, 0.0, -2.0]),
        a_bar: Mat::from_row_slice(3, 3, &[-0.8, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
        b: Mat::from_column_slice(3, 1, &[0.0, 0.0, 1.0]),
        b_bar: Mat::from_column_slice(3, 1, &[0.0, 1.0, 0.0]),
        c: Mat::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 0.0]),
    }
}

pub fn design_spec() -> DesignSpec {
    DesignSpec {
        theta_bar: Some(DESIGN_THETA_BAR),
        objective: Objective::MinBeta,
        rho: vec![1.0],
        ..DesignSpec::default()
    }
}

/// Default run: theta = 0.5 switching to 0.3 halfway, two-tone input.
pub fn scenario(t_end: f64, dt: f64) -> SimScenario {
    SimScenario {
        t_end,
        dt,
        x0: vec![0.6, 0.2, 0.1],
        xhat0: vec![0.0, 0.0, 0.0],
        thetahat0: vec![0.0],
        theta_profile: vec![
            ThetaSwitch { t: 0.0, theta: vec![0.5] },
            ThetaSwitch { t: t_end / 2.0, theta: vec![0.3] },
        ],
        input: InputSignal::Multisine {
            amplitudes: vec![1.0, 0.5],
            frequencies: vec![0.1, 0.37],
            phases: vec![0.0, 0.0],
        },
        rho: vec![1.0],
        record_stride: 10,
        excitation_window: 10.0,
    }
}
