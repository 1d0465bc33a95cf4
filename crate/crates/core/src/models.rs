//! Built-in model catalog.

use crate::diffusion::Logistic;
use crate::error::{Error, Result};
use crate::network::{RateTerm, Reaction, ReactionNetwork};
use crate::params::ParameterVector;
use crate::Real;

/// A catalog entry: the dynamics plus its default initial condition.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinModel<S> {
    Jump {
        network: ReactionNetwork<S>,
        initial: Vec<i64>,
    },
    Diffusion {
        model: Logistic<S>,
        initial: Vec<S>,
    },
}

pub const BUILTIN_NAMES: [&str; 3] = ["logistic", "p53", "birth-death"];

/// Looks up a catalog entry by name.
pub fn builtin<S: Real>(name: &str) -> Result<BuiltinModel<S>> {
    match name {
        "logistic" => Ok(BuiltinModel::Diffusion {
            model: logistic()?,
            initial: vec![S::lit(93.0)],
        }),
        "p53" => Ok(BuiltinModel::Jump {
            network: p53()?,
            initial: vec![0, 0, 0],
        }),
        "birth-death" => Ok(BuiltinModel::Jump {
            network: birth_death(S::lit(10.0), S::one())?,
            initial: vec![0],
        }),
        other => Err(Error::Argument(format!("unknown builtin model `{other}`"))),
    }
}

/// All catalog entries in a fixed order.
pub fn builtin_models<S: Real>() -> Vec<(&'static str, BuiltinModel<S>)> {
    BUILTIN_NAMES
        .iter()
        .map(|&n| (n, builtin(n).expect("catalog entry")))
        .collect()
}

/// Logistic SDE with (ν, K, μ) = (1, 100, 0.1).
pub fn logistic<S: Real>() -> Result<Logistic<S>> {
    Logistic::new(S::one(), S::lit(100.0), S::lit(0.1))
}

/// Immigration–death: `∅ → X` at rate `b`, `X → ∅` at rate `d·X`.
/// The stationary law is Poisson(b/d).
pub fn birth_death<S: Real>(birth: S, death: S) -> Result<ReactionNetwork<S>> {
    ReactionNetwork::new(
        vec!["X".into()],
        vec![
            Reaction::mass_action([], [(0, 1)], 0),
            Reaction::mass_action([(0, 1)], [], 1),
        ],
        ParameterVector::new(["b", "d"], vec![birth, death])?,
    )
}

/// Pure immigration `∅ → X` at rate `b`.
pub fn immigration<S: Real>(birth: S) -> Result<ReactionNetwork<S>> {
    ReactionNetwork::new(
        vec!["X".into()],
        vec![Reaction::mass_action([], [(0, 1)], 0)],
        ParameterVector::new(["b"], vec![birth])?,
    )
}

/// Simplified p53–Mdm2 oscillator.
///
/// Species order is `(x, y0, y)`: p53, Mdm2 precursor, Mdm2.
/// θ = `(b_x, a_x, a_k, k, b_y, a_0, a_y)` = (90, 0.002, 1.7, 0.01, 1.1, 0.8, 0.8).
///
/// | channel | reaction      | propensity                   |
/// |---------|---------------|------------------------------|
/// | R1      | ∅ → x         | b_x                          |
/// | R2      | x → ∅         | a_x x + a_k y x / (x + k)    |
/// | R3      | x → x + y0    | b_y x                        |
/// | R4      | y0 → y        | a_0 y0                       |
/// | R5      | y → ∅         | a_y y                        |
pub fn p53<S: Real>() -> Result<ReactionNetwork<S>> {
    let (x, y0, y) = (0, 1, 2);
    let names = ["b_x", "a_x", "a_k", "k", "b_y", "a_0", "a_y"];
    let values = [90.0, 0.002, 1.7, 0.01, 1.1, 0.8, 0.8].map(S::lit).to_vec();
    ReactionNetwork::new(
        vec!["x".into(), "y0".into(), "y".into()],
        vec![
            Reaction::mass_action([], [(x, 1)], 0),
            Reaction::new(
                [(x, 1)],
                [],
                vec![
                    RateTerm::MassAction { rate: 1 },
                    RateTerm::MichaelisMenten {
                        vmax: 2,
                        km: 3,
                        substrate: x,
                        modifier: Some(y),
                    },
                ],
            ),
            Reaction::mass_action([(x, 1)], [(x, 1), (y0, 1)], 4),
            Reaction::mass_action([(y0, 1)], [(y, 1)], 5),
            Reaction::mass_action([(y, 1)], [], 6),
        ],
        ParameterVector::new(names, values)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p53_dimensions_and_values() {
        let net = p53::<f64>().unwrap();
        assert_eq!(net.num_species(), 3);
        assert_eq!(net.num_reactions(), 5);
        assert_eq!(net.num_parameters(), 7);
        assert_eq!(net.theta(), &[90.0, 0.002, 1.7, 0.01, 1.1, 0.8, 0.8]);
    }

    #[test]
    fn p53_production_is_constant() {
        let net = p53::<f64>().unwrap();
        for x in [[0, 0, 0], [17, 3, 40], [500, 1, 2]] {
            assert_eq!(net.propensities(net.theta(), &x).unwrap()[0], 90.0);
        }
    }

    #[test]
    fn p53_degradation_matches_table_formula() {
        let net = p53::<f64>().unwrap();
        // x = 10, y0 = 0, y = 5
        let a = net.propensities(net.theta(), &[10, 0, 5]).unwrap();
        // 0.002·10 + 1.7·5·10/10.01, evaluated independently
        let expected = 0.02 + 85.0 / 10.01;
        assert!((a[1] - expected).abs() < 1e-12, "{} vs {}", a[1], expected);
    }

    #[test]
    fn p53_degradation_gradient_row() {
        let net = p53::<f64>().unwrap();
        let (xv, yv) = (10.0, 5.0);
        let g = net.propensity_gradient(net.theta(), &[10, 0, 5]).unwrap();
        let expected = [
            0.0,
            xv,
            xv * yv / (xv + 0.01),
            -1.7 * xv * yv / ((xv + 0.01) * (xv + 0.01)),
            0.0,
            0.0,
            0.0,
        ];
        for (p, e) in expected.iter().enumerate() {
            assert!((g[(1, p)] - e).abs() < 1e-12, "column {p}");
        }
    }

    #[test]
    fn catalog_lists_three_models() {
        let all = builtin_models::<f64>();
        assert_eq!(all.len(), 3);
        assert!(builtin::<f64>("egfr").is_err());
    }
}
