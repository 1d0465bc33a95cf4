//! Reaction networks with mass-action and Michaelis–Menten kinetics.
//!
//! A reaction's propensity is the sum of its rate terms. Plain mass action
//! uses a single [`RateTerm::MassAction`]; the p53 degradation channel
//! `a_x x + a_k y x / (x + k)` is a mass-action term plus a Michaelis–Menten
//! term modulated by a second species.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::params::ParameterVector;
use crate::Real;

/// One additive contribution to a reaction propensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RateTerm {
    /// `k · Π_s C(x_s, α_s)` over the reaction's reactants.
    MassAction { rate: usize },
    /// `V · [modifier] · x_S / (K + x_S)`.
    MichaelisMenten {
        vmax: usize,
        km: usize,
        substrate: usize,
        modifier: Option<usize>,
    },
}

impl RateTerm {
    pub fn parameters(&self) -> impl Iterator<Item = usize> {
        let (a, b) = match *self {
            RateTerm::MassAction { rate } => (rate, None),
            RateTerm::MichaelisMenten { vmax, km, .. } => (vmax, Some(km)),
        };
        std::iter::once(a).chain(b)
    }
}

/// A reaction channel. Stoichiometries are kept sorted by species index with
/// duplicates merged, so structurally equal reactions compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reaction {
    reactants: Vec<(usize, u32)>,
    products: Vec<(usize, u32)>,
    rate: Vec<RateTerm>,
    #[serde(skip)]
    delta: Vec<(usize, i64)>,
}

fn canonical_side(side: impl IntoIterator<Item = (usize, u32)>) -> Vec<(usize, u32)> {
    let mut merged: BTreeMap<usize, u32> = BTreeMap::new();
    for (s, c) in side {
        if c > 0 {
            *merged.entry(s).or_default() += c;
        }
    }
    merged.into_iter().collect()
}

impl Reaction {
    pub fn new(
        reactants: impl IntoIterator<Item = (usize, u32)>,
        products: impl IntoIterator<Item = (usize, u32)>,
        rate: Vec<RateTerm>,
    ) -> Self {
        let reactants = canonical_side(reactants);
        let products = canonical_side(products);
        let mut delta: BTreeMap<usize, i64> = BTreeMap::new();
        for &(s, c) in &reactants {
            *delta.entry(s).or_default() -= i64::from(c);
        }
        for &(s, c) in &products {
            *delta.entry(s).or_default() += i64::from(c);
        }
        Self {
            reactants,
            products,
            rate,
            delta: delta.into_iter().filter(|&(_, d)| d != 0).collect(),
        }
    }

    /// Mass-action reaction with a single rate constant.
    pub fn mass_action(
        reactants: impl IntoIterator<Item = (usize, u32)>,
        products: impl IntoIterator<Item = (usize, u32)>,
        rate: usize,
    ) -> Self {
        Self::new(reactants, products, vec![RateTerm::MassAction { rate }])
    }

    /// `S → products` at rate `V x_S / (K + x_S)`.
    pub fn michaelis_menten(
        substrate: usize,
        products: impl IntoIterator<Item = (usize, u32)>,
        vmax: usize,
        km: usize,
    ) -> Self {
        Self::new(
            [(substrate, 1)],
            products,
            vec![RateTerm::MichaelisMenten {
                vmax,
                km,
                substrate,
                modifier: None,
            }],
        )
    }

    pub fn reactants(&self) -> &[(usize, u32)] {
        &self.reactants
    }

    pub fn products(&self) -> &[(usize, u32)] {
        &self.products
    }

    pub fn rate_terms(&self) -> &[RateTerm] {
        &self.rate
    }

    /// Net state change, products minus reactants.
    pub fn net_change(&self) -> &[(usize, i64)] {
        &self.delta
    }

    /// Parameter indices the kinetics depend on, ascending and unique.
    pub fn parameters(&self) -> Vec<usize> {
        let mut p: Vec<usize> = self.rate.iter().flat_map(RateTerm::parameters).collect();
        p.sort_unstable();
        p.dedup();
        p
    }

    fn mass_action_factor<S: Real>(&self, x: &[i64]) -> S {
        let mut f = S::one();
        for &(s, alpha) in &self.reactants {
            f *= binomial::<S>(x[s], alpha);
            if f == S::zero() {
                break;
            }
        }
        f
    }

    fn propensity<S: Real>(&self, theta: &[S], x: &[i64]) -> Result<S> {
        let mut a = S::zero();
        for term in &self.rate {
            a += match *term {
                RateTerm::MassAction { rate } => theta[rate] * self.mass_action_factor::<S>(x),
                RateTerm::MichaelisMenten {
                    vmax,
                    km,
                    substrate,
                    modifier,
                } => {
                    let (sat, m) = mm_parts(theta[km], x, substrate, modifier)?;
                    theta[vmax] * m * sat
                }
            };
        }
        Ok(a)
    }

    fn gradient<S: Real>(&self, theta: &[S], x: &[i64], mut f: impl FnMut(usize, S)) -> Result<()> {
        for term in &self.rate {
            match *term {
                RateTerm::MassAction { rate } => f(rate, self.mass_action_factor::<S>(x)),
                RateTerm::MichaelisMenten {
                    vmax,
                    km,
                    substrate,
                    modifier,
                } => {
                    let (sat, m) = mm_parts(theta[km], x, substrate, modifier)?;
                    let denom = theta[km] + S::from_count(x[substrate]);
                    f(vmax, m * sat);
                    f(km, -theta[vmax] * m * sat / denom);
                }
            }
        }
        Ok(())
    }
}

/// Returns `(x_S / (K + x_S), modifier count or 1)`.
#[inline]
fn mm_parts<S: Real>(km: S, x: &[i64], substrate: usize, modifier: Option<usize>) -> Result<(S, S)> {
    let xs = S::from_count(x[substrate]);
    let denom = km + xs;
    if denom == S::zero() {
        return Err(Error::Domain(format!(
            "Michaelis–Menten denominator K + x = 0 for substrate index {substrate}"
        )));
    }
    let m = modifier.map_or(S::one(), |i| S::from_count(x[i]));
    Ok((xs / denom, m))
}

/// `C(n, k)` evaluated exactly in integer arithmetic where it fits.
/// Zero when `n < k`.
pub fn binomial<S: Real>(n: i64, k: u32) -> S {
    if n < i64::from(k) {
        return S::zero();
    }
    let n = n as u128;
    let mut c: u128 = 1;
    for i in 0..u128::from(k) {
        match c.checked_mul(n - i) {
            Some(v) => c = v / (i + 1),
            None => return binomial_float(n as f64, k),
        }
    }
    S::from_u128(c).unwrap_or_else(S::infinity)
}

fn binomial_float<S: Real>(n: f64, k: u32) -> S {
    let mut c = 1.0;
    for i in 0..k {
        c *= (n - f64::from(i)) / f64::from(i + 1);
    }
    S::lit(c)
}

/// Species, reaction channels and parameter vector of a jump process.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReactionNetwork<S> {
    species: Vec<String>,
    reactions: Vec<Reaction>,
    parameters: ParameterVector<S>,
}

impl<S: Real> ReactionNetwork<S> {
    pub fn new(species: Vec<String>, reactions: Vec<Reaction>, parameters: ParameterVector<S>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &species {
            if !seen.insert(s.as_str()) {
                return Err(Error::Argument(format!("duplicate species `{s}`")));
            }
        }
        let ns = species.len();
        let np = parameters.len();
        for (j, r) in reactions.iter().enumerate() {
            if r.rate.is_empty() {
                return Err(Error::Argument(format!("reaction {j} has no rate law")));
            }
            for &(s, _) in r.reactants.iter().chain(&r.products) {
                if s >= ns {
                    return Err(Error::Argument(format!(
                        "reaction {j} references species index {s} (have {ns})"
                    )));
                }
            }
            for term in &r.rate {
                if let RateTerm::MichaelisMenten {
                    substrate, modifier, ..
                } = *term
                {
                    if substrate >= ns || modifier.is_some_and(|m| m >= ns) {
                        return Err(Error::Argument(format!(
                            "reaction {j}: Michaelis–Menten species index out of range"
                        )));
                    }
                }
                for p in term.parameters() {
                    if p >= np {
                        return Err(Error::Argument(format!(
                            "reaction {j} references parameter index {p} (have {np})"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            species,
            reactions,
            parameters,
        })
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn parameters(&self) -> &ParameterVector<S> {
        &self.parameters
    }

    pub fn parameters_mut(&mut self) -> &mut ParameterVector<S> {
        &mut self.parameters
    }

    /// Nominal θ.
    pub fn theta(&self) -> &[S] {
        self.parameters.values()
    }

    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    pub fn num_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn num_parameters(&self) -> usize {
        self.parameters.len()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    /// True if any reaction's kinetics read `θ_p`.
    pub fn uses_parameter(&self, p: usize) -> bool {
        self.reactions.iter().any(|r| r.parameters().contains(&p))
    }

    fn check_args(&self, theta: &[S], x: &[i64]) -> Result<()> {
        if theta.len() != self.num_parameters() {
            return Err(Error::Argument(format!(
                "θ has {} entries, network has {} parameters",
                theta.len(),
                self.num_parameters()
            )));
        }
        if x.len() != self.num_species() {
            return Err(Error::Argument(format!(
                "state has {} entries, network has {} species",
                x.len(),
                self.num_species()
            )));
        }
        if let Some(i) = x.iter().position(|&v| v < 0) {
            return Err(Error::Domain(format!(
                "negative population {} for species `{}`",
                x[i], self.species[i]
            )));
        }
        Ok(())
    }

    /// Writes `a_j(x)` for every channel into `out`.
    pub fn propensities_into(&self, theta: &[S], x: &[i64], out: &mut [S]) -> Result<()> {
        self.check_args(theta, x)?;
        for (j, (r, o)) in self.reactions.iter().zip(out.iter_mut()).enumerate() {
            let a = r.propensity(theta, x)?;
            if a < S::zero() || !a.is_finite() {
                return Err(Error::Domain(format!(
                    "propensity of reaction {j} is {a} at state {x:?}"
                )));
            }
            *o = a;
        }
        Ok(())
    }

    pub fn propensities(&self, theta: &[S], x: &[i64]) -> Result<Vec<S>> {
        let mut out = vec![S::zero(); self.num_reactions()];
        self.propensities_into(theta, x, &mut out)?;
        Ok(out)
    }

    /// Calls `f(p, ∂a_j/∂θ_p)` for each parameter the channel depends on.
    /// Entries for the same `p` may repeat and must be summed.
    pub fn gradient_entries(&self, j: usize, theta: &[S], x: &[i64], f: impl FnMut(usize, S)) -> Result<()> {
        self.reactions[j].gradient(theta, x, f)
    }

    /// Dense `reactions × parameters` matrix of `∂a_j/∂θ_p`.
    pub fn propensity_gradient(&self, theta: &[S], x: &[i64]) -> Result<Matrix<S>> {
        self.check_args(theta, x)?;
        let mut g = Matrix::zeros(self.num_reactions(), self.num_parameters());
        for j in 0..self.num_reactions() {
            self.gradient_entries(j, theta, x, |p, v| g[(j, p)] += v)?;
        }
        Ok(g)
    }

    /// Applies the net change of channel `j` to `x`.
    #[inline]
    pub fn fire(&self, j: usize, x: &mut [i64]) {
        for &(s, d) in &self.reactions[j].delta {
            x[s] += d;
        }
    }
}
