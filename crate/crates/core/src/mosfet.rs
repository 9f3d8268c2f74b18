//! Level-1 (square-law) MOSFET drain current and small-signal partials.

use serde::{Deserialize, Serialize};

use crate::netlist::{ModelCard, Polarity};

pub const DEFAULT_LENGTH: f64 = 1e-6;
pub const DEFAULT_WIDTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Cutoff,
    Triode,
    Saturation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceEval {
    /// Drain current, drain to source in the n-channel frame.
    pub id: f64,
    /// dId/dVgs
    pub gm: f64,
    /// dId/dVds
    pub gds: f64,
    pub region: Region,
}

/// Forward evaluation, `vds >= 0`.
fn forward(beta: f64, vto: f64, lambda: f64, vgs: f64, vds: f64) -> DeviceEval {
    let vov = vgs - vto;
    if vov <= 0.0 {
        return DeviceEval {
            id: 0.0,
            gm: 0.0,
            gds: 0.0,
            region: Region::Cutoff,
        };
    }
    let clm = 1.0 + lambda * vds;
    if vds < vov {
        let core = vov * vds - 0.5 * vds * vds;
        DeviceEval {
            id: beta * core * clm,
            gm: beta * vds * clm,
            gds: beta * (vov - vds) * clm + beta * core * lambda,
            region: Region::Triode,
        }
    } else {
        DeviceEval {
            id: 0.5 * beta * vov * vov * clm,
            gm: beta * vov * clm,
            gds: 0.5 * beta * vov * vov * lambda,
            region: Region::Saturation,
        }
    }
}

/// Evaluate the square-law model.
///
/// Voltages are in the n-channel frame: for a p-channel card pass `vsg` and
/// `vsd`; the card's (negative) threshold is negated internally. With
/// `vds < 0` drain and source swap roles and the current changes sign, so
/// `gm`/`gds` remain the exact partials with respect to the given `vgs` and
/// `vds`.
pub fn mosfet_eval(model: &ModelCard, w: f64, l: f64, vgs: f64, vds: f64) -> DeviceEval {
    let vto = match model.polarity {
        Polarity::Nmos => model.vto,
        Polarity::Pmos => -model.vto,
    };
    let beta = model.kp * w / l;
    if vds >= 0.0 {
        forward(beta, vto, model.lambda, vgs, vds)
    } else {
        // Id(vgs, vds) = -F(vgs - vds, -vds)
        let r = forward(beta, vto, model.lambda, vgs - vds, -vds);
        DeviceEval {
            id: -r.id,
            gm: -r.gm,
            gds: r.gm + r.gds,
            region: r.region,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nmos() -> ModelCard {
        ModelCard::new("n", Polarity::Nmos, 0.5, 1e-4)
    }

    #[test]
    fn saturation_point() {
        let e = mosfet_eval(&nmos(), 50e-6, 1e-6, 1.5, 3.0);
        assert_eq!(e.region, Region::Saturation);
        assert!((e.id - 2.5e-3).abs() < 1e-15);
        assert!((e.gm - 5e-3).abs() < 1e-15);
        assert_eq!(e.gds, 0.0);
    }

    #[test]
    fn cutoff_point() {
        let e = mosfet_eval(&nmos(), 50e-6, 1e-6, 0.3, 3.0);
        assert_eq!(
            e,
            DeviceEval {
                id: 0.0,
                gm: 0.0,
                gds: 0.0,
                region: Region::Cutoff
            }
        );
    }

    #[test]
    fn triode_point() {
        let e = mosfet_eval(&nmos(), 50e-6, 1e-6, 1.5, 0.5);
        assert_eq!(e.region, Region::Triode);
        assert!((e.id - 1.875e-3).abs() < 1e-15);
    }

    #[test]
    fn pmos_frame_uses_negated_threshold() {
        let p = ModelCard::new("p", Polarity::Pmos, -0.5, 5e-5);
        let e = mosfet_eval(&p, 100e-6, 1e-6, 1.5, 3.0);
        assert_eq!(e.region, Region::Saturation);
        assert!((e.id - 0.5 * 5e-3 * 1.0).abs() < 1e-15);
    }

    #[test]
    fn reverse_bias_is_antisymmetric() {
        let mut m = nmos();
        m.lambda = 0.05;
        // Swapping drain and source: Id(vgs, vds) == -Id(vgd, -vds)
        let (vg, vd, vs) = (2.0, 0.2, 0.9);
        let a = mosfet_eval(&m, 10e-6, 1e-6, vg - vs, vd - vs);
        let b = mosfet_eval(&m, 10e-6, 1e-6, vg - vd, vs - vd);
        assert!((a.id + b.id).abs() < 1e-18);
    }
}
