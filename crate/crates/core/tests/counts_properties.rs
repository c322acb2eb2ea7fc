mod oracles;

use oracles::*;
use proptest::prelude::*;
use rand::SeedableRng;
use trigfree::counts::{sample, tail_table, SurvivalStream, DEFAULT_TABLE_CAP};
use trigfree::CountModel;

fn any_model() -> impl Strategy<Value = CountModel> {
    let nb = (0.2f64..60.0, 0.05f64..0.95).prop_map(|(nu, p)| CountModel::nb(nu, p).unwrap());
    let bnb = (0.3f64..20.0, 1.5f64..9.0, 0.3f64..20.0)
        .prop_map(|(nu, a, b)| CountModel::bnb(nu, a, b).unwrap());
    let bin = (0u64..120, 0.01f64..0.99).prop_map(|(n, p)| CountModel::binomial(n, p).unwrap());
    let bb = (1u64..120, 0.2f64..8.0, 0.2f64..8.0)
        .prop_map(|(n, a, b)| CountModel::beta_binomial(n, a, b).unwrap());
    let base = prop_oneof![nb, bnb, bin, bb];
    prop_oneof![
        base.clone(),
        (0.01f64..0.99, base.clone()).prop_map(|(phi, b)| CountModel::zero_inflated(phi, b).unwrap()),
        (0.01f64..0.99, base).prop_filter_map("base without zero mass", |(phi, b)| CountModel::hurdle(phi, b).ok()),
    ]
}

fn oracle_pmf(model: &CountModel, y: u64) -> f64 {
    match model {
        CountModel::NegBinomial(m) => nb_ln_pmf(m.nu(), m.p(), y).exp(),
        CountModel::BetaNegBinomial(m) => bnb_ln_pmf(m.nu(), m.alpha(), m.beta(), y).exp(),
        CountModel::Binomial(m) => binomial_pmf(m.n(), m.p(), y),
        CountModel::BetaBinomial(m) => beta_binomial_pmf(m.n(), m.alpha(), m.beta(), y),
        CountModel::ZeroInflated(z) => {
            let g = oracle_pmf(z.base(), y);
            if y == 0 { z.phi() + (1.0 - z.phi()) * g } else { (1.0 - z.phi()) * g }
        }
        CountModel::Hurdle(h) => {
            if y == 0 {
                h.phi()
            } else {
                (1.0 - h.phi()) * oracle_pmf(h.base(), y) / (1.0 - oracle_pmf(h.base(), 0))
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn streamed_pmf_matches_direct_formula(model in any_model()) {
        for (y, (p, _)) in SurvivalStream::new(&model).take(400).enumerate() {
            let d = oracle_pmf(&model, y as u64);
            prop_assert!((p - d).abs() <= 1e-9 * d + 1e-300, "y={y} p={p} d={d}");
            prop_assert!((model.pmf(y as u64) - d).abs() <= 1e-9 * d + 1e-300);
        }
    }

    #[test]
    fn survival_is_consistent(model in any_model(), y in 0u64..300) {
        prop_assert_eq!(model.survival(-1).unwrap(), 1.0);
        let s = model.survival(y as i64).unwrap();
        let s_prev = model.survival(y as i64 - 1).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        // Separate calls; agreement up to rounding, which grows with |ln S|
        // because every path evaluates terms like y ln(1 − p).
        let rel = 1e-13 + 8.0 * f64::EPSILON * s.ln().abs().min(1e4);
        prop_assert!(s <= s_prev * (1.0 + rel));
        prop_assert!((s_prev - s - oracle_pmf(&model, y)).abs() <= 1e-12);
        let table = tail_table(&model, y, DEFAULT_TABLE_CAP).unwrap();
        prop_assert_eq!(table.tail(-1), Some(1.0));
        prop_assert!((table.tail(y as i64).unwrap() - s).abs() <= rel * s.max(1e-300) + 1e-300);
    }

    #[test]
    fn pmf_normalizes(model in any_model()) {
        let pmf: Vec<f64> = (0..20_000).map(|y| model.pmf(y)).collect();
        let total = kahan(pmf.iter().copied());
        let beyond = model.survival(19_999).unwrap();
        prop_assert!((total + beyond - 1.0).abs() < 1e-10, "total={total} beyond={beyond}");
    }
}

#[test]
fn samplers_match_pmf_chi_square() {
    let models = [
        CountModel::nb(3.0, 0.4).unwrap(),
        CountModel::bnb(4.0, 5.0, 3.0).unwrap(),
        CountModel::beta_binomial(15, 1.5, 2.5).unwrap(),
        CountModel::zero_inflated(0.3, CountModel::nb(10.0, 0.5).unwrap()).unwrap(),
        CountModel::hurdle(0.25, CountModel::nb(2.0, 0.3).unwrap()).unwrap(),
    ];
    for (i, model) in models.iter().enumerate() {
        let n = 40_000usize;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000 + i as u64);
        let draws = sample(model, &mut rng, n);
        // Bins with expected count ≥ 20, plus the pooled upper tail.
        let mut edges = Vec::new();
        let mut y = 0u64;
        while model.survival(y as i64 - 1).unwrap() * n as f64 >= 40.0 {
            edges.push(y);
            y += 1;
            if n as f64 * model.pmf(y - 1) < 20.0 {
                edges.pop();
                break;
            }
        }
        let last = *edges.last().unwrap();
        let pooled = model.survival(last as i64).unwrap();
        let mut counts = vec![0f64; edges.len() + usize::from(pooled > 0.0)];
        for &d in &draws {
            counts[if d <= last { d as usize } else { edges.len() }] += 1.0;
        }
        let mut stat = 0.0;
        for (k, &c) in counts.iter().enumerate() {
            let p = if k < edges.len() { model.pmf(k as u64) } else { pooled };
            let e = p * n as f64;
            stat += (c - e).powi(2) / e;
        }
        let df = counts.len() as f64 - 1.0;
        // Wilson–Hilferty upper 0.1% point.
        let z = 3.09;
        let crit = df * (1.0 - 2.0 / (9.0 * df) + z * (2.0 / (9.0 * df)).sqrt()).powi(3);
        assert!(stat < crit, "{model:?}: chi2={stat} df={df} crit={crit}");
    }
}

#[test]
fn streams_from_distinct_replicates_are_independent() {
    use rand::Rng;
    let mut a = trigfree::rng::stream(5, 0, trigfree::rng::tag::DATA);
    let mut b = trigfree::rng::stream(5, 1, trigfree::rng::tag::DATA);
    let mut c = trigfree::rng::stream(5, 0, trigfree::rng::tag::MONTE_CARLO);
    let n = 20_000;
    let xs: Vec<f64> = (0..n).map(|_| a.random::<f64>()).collect();
    for other in [&mut b, &mut c] {
        let ys: Vec<f64> = (0..n).map(|_| other.random::<f64>()).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / n as f64;
        let corr = cov * 12.0;
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr={corr}");
    }
    let mut a2 = trigfree::rng::stream(5, 0, trigfree::rng::tag::DATA);
    assert_eq!(xs[0], a2.random::<f64>());
}
