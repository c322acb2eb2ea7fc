use serde::Serialize;
use trigfree::expect::{self, BoundKind, MPolicy, Method, DEFAULT_M_CAP};
use trigfree::rng::{stream, tag};

use crate::config::ModelSpec;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectArgs {
    pub model: ModelSpec,
    /// Shift `ν` in `E Ψ₁(ν + Y)`; defaults to the model's own `ν`.
    pub shift: Option<f64>,
    pub method: Method,
    pub policy: MPolicy,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectReport {
    pub family: String,
    pub shift: f64,
    pub method: Method,
    pub policy: String,
    #[serde(rename = "M")]
    pub m: u64,
    pub value: f64,
    pub bound: Option<f64>,
    pub bound_kind: Option<BoundKind>,
    pub trigamma_evals: u64,
}

pub fn run_expect(args: &ExpectArgs) -> Result<ExpectReport> {
    let model = args.model.build()?;
    let nu = args
        .shift
        .or(args.model.nu)
        .ok_or_else(|| CliError::usage("no shift: pass --shift (or --nu)"))?;
    let m = || expect::choose_m(nu, &model, args.policy, DEFAULT_M_CAP);
    let r = match args.method {
        Method::TrigammaFree => expect::psi1_trigamma_free(nu, &model, m()?)?,
        Method::Calibrated => expect::psi1_calibrated(nu, &model, m()?)?,
        Method::Gfwl => expect::psi1_gfwl(nu, &model, m()?)?,
        Method::ExactFinite => expect::psi1_exact_finite(nu, &model)?,
        Method::Digamma => expect::psi_digamma_expect(nu, &model, m()?)?,
        Method::MonteCarlo => {
            let seed = args.seed.ok_or_else(|| CliError::usage("monte-carlo needs --seed"))?;
            expect::psi1_monte_carlo(nu, &model, m()?.max(1), &mut stream(seed, 0, tag::MONTE_CARLO))?
        }
    };
    Ok(ExpectReport {
        family: args.model.family.clone(),
        shift: nu,
        method: r.method,
        policy: args.policy.to_string(),
        m: r.m,
        value: r.value,
        bound: r.bound,
        bound_kind: r.bound_kind,
        trigamma_evals: r.trigamma_evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(method: Method, policy: MPolicy) -> ExpectArgs {
        ExpectArgs { model: ModelSpec::nb(10.0, 0.1), shift: None, method, policy, seed: None }
    }

    #[test]
    fn reference_value() {
        let r = run_expect(&args(Method::TrigammaFree, MPolicy::Fixed(1_000_000))).unwrap();
        assert!((r.value - 0.01104294).abs() < 5e-9);
        assert_eq!(r.trigamma_evals, 1);
    }

    #[test]
    fn default_policy_picks_181() {
        assert_eq!(run_expect(&args(Method::TrigammaFree, MPolicy::Default)).unwrap().m, 181);
    }

    #[test]
    fn degenerate_binomial() {
        let model = ModelSpec { family: "binomial".into(), n: Some(0), ..ModelSpec::nb(2.0, 0.5) };
        let r = run_expect(&ExpectArgs { model, ..args(Method::TrigammaFree, MPolicy::Fixed(5)) }).unwrap();
        assert_eq!(r.value, trigfree::specfun::trigamma(2.0).unwrap());
    }

    #[test]
    fn monte_carlo_needs_seed() {
        let e = run_expect(&args(Method::MonteCarlo, MPolicy::Fixed(100))).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let mut a = args(Method::MonteCarlo, MPolicy::Fixed(100));
        a.seed = Some(4);
        assert_eq!(run_expect(&a).unwrap(), run_expect(&a).unwrap());
    }

    #[test]
    fn domain_errors_map_to_three() {
        let mut a = args(Method::TrigammaFree, MPolicy::Fixed(10));
        a.model.p = Some(1.5);
        assert_eq!(run_expect(&a).unwrap_err().exit_code(), 3);
    }
}
