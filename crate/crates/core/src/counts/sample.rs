use rand::Rng;
use rand_distr::{Beta, Binomial as BinomialDist, Distribution, Gamma, Poisson};

use super::{CountModel, Leaf, SurvivalStream};

/// Draws from a fixed model; cheap to reuse across many draws.
#[derive(Debug, Clone)]
pub struct Sampler {
    model: CountModel,
}

fn poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    if !(lambda > 0.0) {
        return 0;
    }
    if !lambda.is_finite() {
        return u64::MAX;
    }
    let x: f64 = Poisson::new(lambda).expect("positive finite rate").sample(rng);
    x as u64
}

fn nb_draw<R: Rng + ?Sized>(rng: &mut R, nu: f64, p: f64) -> u64 {
    let p = p.max(f64::MIN_POSITIVE);
    let g = Gamma::new(nu, (1.0 - p) / p).expect("valid gamma").sample(rng);
    poisson(rng, g)
}

fn beta_draw<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    Beta::new(a, b).expect("valid beta").sample(rng)
}

fn leaf_draw<R: Rng + ?Sized>(rng: &mut R, leaf: Leaf) -> u64 {
    match leaf {
        Leaf::Nb { nu, p } => nb_draw(rng, nu, p),
        Leaf::Bnb { nu, alpha, beta } => {
            let p = beta_draw(rng, alpha, beta);
            nb_draw(rng, nu, p)
        }
        Leaf::Bin { n, p } => BinomialDist::new(n, p).expect("valid binomial").sample(rng),
        Leaf::BetaBin { n, alpha, beta } => {
            let p = beta_draw(rng, alpha, beta).clamp(0.0, 1.0);
            BinomialDist::new(n, p).expect("valid binomial").sample(rng)
        }
    }
}

fn draw<R: Rng + ?Sized>(rng: &mut R, model: &CountModel) -> u64 {
    match model {
        CountModel::ZeroInflated(z) => {
            if rng.random::<f64>() < z.phi() {
                0
            } else {
                draw(rng, z.base())
            }
        }
        CountModel::Hurdle(h) => {
            if rng.random::<f64>() < h.phi() {
                return 0;
            }
            for _ in 0..1000 {
                let y = draw(rng, h.base());
                if y > 0 {
                    return y;
                }
            }
            positive_by_inversion(rng, h.base())
        }
        other => leaf_draw(rng, other.flat().leaf),
    }
}

/// Inversion for `base | Y > 0` when zero dominates the base.
fn positive_by_inversion<R: Rng + ?Sized>(rng: &mut R, base: &CountModel) -> u64 {
    let mut stream = SurvivalStream::new(base);
    let (_, q0) = stream.next_pair();
    let u = rng.random::<f64>() * q0;
    let mut acc = 0.0;
    loop {
        let y = stream.position();
        let (p, s) = stream.next_pair();
        acc += p;
        if acc >= u || s == 0.0 {
            return y;
        }
    }
}

impl Sampler {
    pub fn new(model: &CountModel) -> Self {
        Self { model: model.clone() }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        draw(rng, &self.model)
    }
}

/// `count` i.i.d. draws from `model`.
pub fn sample<R: Rng + ?Sized>(model: &CountModel, rng: &mut R, count: usize) -> Vec<u64> {
    let s = Sampler::new(model);
    (0..count).map(|_| s.draw(rng)).collect()
}
