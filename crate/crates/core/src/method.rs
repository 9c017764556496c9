//! Registry of integrators by name, and a uniform stepping interface.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cfm::{self, CfmScheme, StepEstimate};
use crate::magnus_strang;
use crate::model::HubbardModel;
use crate::rk::DoPri45;
use crate::sparse::MatvecCounter;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Cf2,
    Cf4,
    Cf4o,
    Cf4oH,
    Cf6n,
    Cf7,
    Magnus4,
    MagnusStrang4,
    DoPri45,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Cf2,
        Method::Cf4,
        Method::Cf4o,
        Method::Cf4oH,
        Method::Cf6n,
        Method::Cf7,
        Method::Magnus4,
        Method::MagnusStrang4,
        Method::DoPri45,
    ];

    pub const EXPONENTIAL: [Method; 8] = [
        Method::Cf2,
        Method::Cf4,
        Method::Cf4o,
        Method::Cf4oH,
        Method::Cf6n,
        Method::Cf7,
        Method::Magnus4,
        Method::MagnusStrang4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cf2 => "cf2",
            Method::Cf4 => "cf4",
            Method::Cf4o => "cf4o",
            Method::Cf4oH => "cf4oh",
            Method::Cf6n => "cf6n",
            Method::Cf7 => "cf7",
            Method::Magnus4 => "magnus4",
            Method::MagnusStrang4 => "magnusstrang4",
            Method::DoPri45 => "dopri45",
        }
    }

    /// Order of the propagated solution.
    pub fn order(self) -> u32 {
        match self {
            Method::Cf2 => 2,
            Method::Cf4 | Method::Cf4o | Method::Cf4oH | Method::Magnus4 | Method::MagnusStrang4 => 4,
            Method::Cf6n => 6,
            Method::Cf7 => 7,
            Method::DoPri45 => 5,
        }
    }

    /// Exponent used by the step-size controller: the order of the error estimate.
    pub fn controller_order(self) -> u32 {
        match self {
            Method::DoPri45 => 4,
            m => m.order(),
        }
    }

    pub fn is_exponential(self) -> bool {
        self != Method::DoPri45
    }

    fn scheme(self) -> Option<CfmScheme> {
        match self {
            Method::Cf2 | Method::Cf4 | Method::Cf4o | Method::Cf4oH | Method::Cf6n | Method::Cf7 => {
                Some(cfm::scheme(self.name()).expect("registered scheme"))
            }
            _ => None,
        }
    }

    pub fn stepper(self, krylov_tol: f64) -> Stepper {
        Stepper {
            method: self,
            scheme: self.scheme(),
            krylov_tol,
            rk: DoPri45::new(),
        }
    }

    /// Parses a comma-separated list; `all` and `exponential` expand to the registry.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "all" => out.extend(Method::ALL),
                "exponential" => out.extend(Method::EXPONENTIAL),
                _ => out.push(part.parse()?),
            }
        }
        if out.is_empty() {
            return Err(Error::Parameter("empty method list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.name().to_string()
    }
}

/// A method bound to a Krylov tolerance. Holds the Runge–Kutta stage cache,
/// so one stepper should drive one trajectory at a time.
pub struct Stepper {
    method: Method,
    scheme: Option<CfmScheme>,
    krylov_tol: f64,
    rk: DoPri45,
}

impl Stepper {
    pub fn method(&self) -> Method {
        self.method
    }

    pub fn krylov_tol(&self) -> f64 {
        self.krylov_tol
    }

    pub fn step(
        &self,
        model: &HubbardModel,
        t0: f64,
        tau: f64,
        psi: &[C64],
        counter: &MatvecCounter,
    ) -> Result<Vec<C64>> {
        let tol = self.krylov_tol;
        match self.method {
            Method::Magnus4 => cfm::magnus4_step(model, t0, tau, psi, tol, counter),
            Method::MagnusStrang4 => magnus_strang::magnus_strang_step(model, t0, tau, psi, tol, counter),
            Method::DoPri45 => Ok(self.rk.step(model, t0, tau, psi, counter).psi_next),
            _ => cfm::cfm_step(self.scheme.as_ref().expect("scheme"), model, t0, tau, psi, tol, counter),
        }
    }

    /// Step together with its local error estimate. Symmetric schemes use the
    /// symmetrized defect, the others the classical one.
    pub fn step_with_estimate(
        &self,
        model: &HubbardModel,
        t0: f64,
        tau: f64,
        psi: &[C64],
        counter: &MatvecCounter,
    ) -> Result<StepEstimate> {
        let tol = self.krylov_tol;
        match self.method {
            Method::Magnus4 => cfm::magnus4_defect_step(model, t0, tau, psi, tol, counter),
            Method::MagnusStrang4 => magnus_strang::magnus_strang_defect_step(model, t0, tau, psi, tol, counter),
            Method::DoPri45 => Ok(self.rk.step(model, t0, tau, psi, counter)),
            _ => {
                let s = self.scheme.as_ref().expect("scheme");
                if s.symmetric {
                    cfm::cfm_symmetrized_defect_step(s, model, t0, tau, psi, tol, counter)
                } else {
                    cfm::cfm_classical_defect_step(s, model, t0, tau, psi, tol, counter)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Geometry;
    use crate::pulse::PulseParams;
    use crate::sparse::diff_norm;

    #[test]
    fn names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<Method>(&json).unwrap(), m);
        }
        assert_eq!("CF4oH".parse::<Method>().unwrap(), Method::Cf4oH);
        assert_eq!("Magnus-Strang4".parse::<Method>().unwrap(), Method::MagnusStrang4);
        assert!(matches!("rk4".parse::<Method>(), Err(Error::UnknownMethod(_))));
        assert_eq!(Method::parse_list("cf2, dopri45").unwrap(), vec![Method::Cf2, Method::DoPri45]);
        assert_eq!(Method::parse_list("all").unwrap().len(), 9);
        assert!(Method::parse_list(" , ").is_err());
    }

    #[test]
    fn estimating_step_propagates_like_plain_step() {
        let m = HubbardModel::half_filled(&Geometry::uniform(1, 2, -1.0, 1.0), 4.0, PulseParams::ladder_default())
            .unwrap();
        let psi = m.ground_state(0.0).unwrap();
        for method in Method::ALL {
            let s = method.stepper(1e-13);
            let c = MatvecCounter::new();
            let a = s.step(&m, 5.0, 0.1, &psi, &c).unwrap();
            let b = method.stepper(1e-13).step_with_estimate(&m, 5.0, 0.1, &psi, &c).unwrap();
            assert!(diff_norm(&a, &b.psi_next) < 1e-11, "{method}");
            assert!(b.err_est > 0.0 && b.err_est < 1e-3, "{method}: {}", b.err_est);
        }
    }
}
