//! Exact computations: enumeration, transfer matrices, expansions, closed
//! forms and the spatial Markov property.

pub mod closed_form;
pub mod enumerate;
pub mod expansion;
pub mod markov;
pub mod quadrature;
pub mod transfer;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::model::{BoundaryCondition, Couplings};

pub use closed_form::{
    critical_beta, duality_residual, kw_dual, onsager_free_energy, onsager_free_energy_with_error,
    peierls_bound, yang_magnetization,
};
pub use enumerate::{correlation_exact, Enumerator};
pub use markov::spatial_markov_check;
pub use transfer::{strip_extrapolation, strip_free_energy, TransferMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Enumerate,
    Transfer,
    LowTemp,
    HighTemp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Enumerate, Method::Transfer, Method::LowTemp, Method::HighTemp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Enumerate => "enumerate",
            Method::Transfer => "transfer",
            Method::LowTemp => "low-temp",
            Method::HighTemp => "high-temp",
        }
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
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown method `{s}`")))
    }
}

/// Natural logarithm of a partition function, tagged with its method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogPartition {
    pub value: f64,
    pub method: Method,
}

/// `ln Z` by the requested method.
pub fn log_partition(lat: &Lattice, coup: &Couplings, bc: &BoundaryCondition, method: Method) -> Result<LogPartition> {
    coup.check_matches(lat)?;
    let value = match method {
        Method::Enumerate => Enumerator::new(lat, coup, bc)?.log_partition(),
        Method::Transfer => transfer::log_partition_transfer(lat, coup, bc)?,
        Method::LowTemp => expansion::log_partition_low_temp(lat, coup, bc)?,
        Method::HighTemp => expansion::log_partition_high_temp(lat, coup, bc)?,
    };
    if !value.is_finite() {
        return Err(Error::Numerical(format!("{method} produced a non-finite ln Z")));
    }
    Ok(LogPartition { value, method })
}

/// Every method whose preconditions hold, with its result.
pub fn log_partition_all(lat: &Lattice, coup: &Couplings, bc: &BoundaryCondition) -> Vec<LogPartition> {
    Method::ALL
        .into_iter()
        .filter_map(|m| log_partition(lat, coup, bc, m).ok())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Topology;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("onsager".parse::<Method>().is_err());
    }

    #[test]
    fn torus_cross_method() {
        let lat = Lattice::build(&[4, 4], Topology::Torus).unwrap();
        let coup = Couplings::uniform(&lat, 0.4, 0.0).unwrap();
        let all = log_partition_all(&lat, &coup, &BoundaryCondition::Free);
        let methods: Vec<Method> = all.iter().map(|r| r.method).collect();
        assert_eq!(methods, vec![Method::Enumerate, Method::Transfer, Method::LowTemp, Method::HighTemp]);
        for r in &all {
            assert!((r.value - all[0].value).abs() <= 1e-10 * all[0].value.abs());
        }
    }

    #[test]
    fn box_all_four_methods() {
        let lat = Lattice::build(&[4, 5], Topology::FreeBox).unwrap();
        let coup = Couplings::uniform(&lat, 0.55, 0.0).unwrap();
        let all = log_partition_all(&lat, &coup, &BoundaryCondition::Free);
        assert_eq!(all.len(), 4);
        for r in &all {
            assert!((r.value - all[0].value).abs() <= 1e-10 * all[0].value.abs(), "{:?}", r);
        }
    }
}
