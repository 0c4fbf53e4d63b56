//! Units on an Erdős–Rényi graph whose outcomes share neighbors' noise.

use rand::Rng;
use rand_distr::{Bernoulli, Beta, Binomial, Distribution, Poisson};

use crate::data::ObservationTable;
use crate::dependence::{Adjacency, DependenceStructure};
use crate::error::{Error, Result};
use crate::learners::sigmoid;
use crate::matrix::Matrix;
use crate::rng::SimRng;

pub const COVARIATES: [&str; 3] = ["W1", "W2", "W3"];

/// `E mu(W) = 5(0.648) - 2(0.352) + 3(0.216) - 4 + 1`, from the Beta(2,2)
/// CDF `3x^2 - 2x^3` and `E[(2 W3 - 1) W2] = -0.4 * 10`.
pub const MEAN_MU: f64 = 0.184;
pub const TRUE_ATE: f64 = 2.0 * MEAN_MU;

/// `Var(2 (Beta(6,6) - 0.5)) = 4 * 36 / (144 * 13)`.
pub const NOISE_VARIANCE: f64 = 4.0 * 36.0 / (144.0 * 13.0);

pub fn mu(w: &[f64]) -> f64 {
    let w1 = w[0];
    5.0 * f64::from(u8::from(w1 > 0.4)) - 2.0 * f64::from(u8::from(w1 > 0.6)) + 3.0 * f64::from(u8::from(w1 > 0.7))
        + (2.0 * w[2] - 1.0) * w[1]
        + 1.0
}

pub fn propensity(w: &[f64]) -> f64 {
    sigmoid(mu(w) / 20.0 - 1.0)
}

pub fn outcome_mean(w: &[f64], a: u8) -> f64 {
    (2.0 * f64::from(a) + 1.0) * mu(w)
}

/// Erdős–Rényi `G(n, p)` by geometric skipping over the lower triangle.
pub fn erdos_renyi(n: usize, p: f64, rng: &mut SimRng) -> Result<Adjacency> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!("edge probability {p} outside [0, 1]")));
    }
    let mut edges = Vec::new();
    if p >= 1.0 {
        return Ok(Adjacency::complete(n));
    }
    if p > 0.0 {
        let log_q = (1.0 - p).ln();
        let (mut v, mut w) = (1usize, -1i64);
        while v < n {
            let r: f64 = rng.random();
            w += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
            while w >= v as i64 && v < n {
                w -= v as i64;
                v += 1;
            }
            if v < n {
                edges.push((w as usize, v));
            }
        }
    }
    Adjacency::from_edges(n, &edges)
}

struct UnitDraws {
    beta22: Beta<f64>,
    pois: Poisson<f64>,
    ber: Bernoulli,
    noise: Beta<f64>,
}

impl UnitDraws {
    fn new() -> Self {
        Self {
            beta22: Beta::new(2.0, 2.0).expect("valid beta"),
            pois: Poisson::new(10.0).expect("valid poisson"),
            ber: Bernoulli::new(0.3).expect("valid bernoulli"),
            noise: Beta::new(6.0, 6.0).expect("valid beta"),
        }
    }

    fn covariates(&self, rng: &mut SimRng) -> [f64; 3] {
        [self.beta22.sample(rng), self.pois.sample(rng), f64::from(u8::from(self.ber.sample(rng)))]
    }

    fn noise(&self, rng: &mut SimRng) -> f64 {
        2.0 * (self.noise.sample(rng) - 0.5)
    }
}

fn assemble(w: Vec<f64>, a: Vec<u8>, y: Vec<f64>) -> Result<ObservationTable> {
    let n = a.len();
    ObservationTable::with_default_ids(COVARIATES.iter().map(|s| s.to_string()).collect(), Matrix::new(n, 3, w)?, a, y)
}

pub fn generate(n: usize, edge_constant: f64, rng: &mut SimRng) -> Result<(ObservationTable, DependenceStructure)> {
    if n < 10 {
        return Err(Error::InvalidInput(format!("network needs at least 10 units, got {n}")));
    }
    let adjacency = erdos_renyi(n, edge_constant / n as f64, rng)?;
    let draws = UnitDraws::new();
    let mut w = Vec::with_capacity(3 * n);
    let mut a = Vec::with_capacity(n);
    for _ in 0..n {
        let wi = draws.covariates(rng);
        a.push(u8::from(rng.random::<f64>() < propensity(&wi)));
        w.extend_from_slice(&wi);
    }
    let delta: Vec<f64> = (0..n).map(|_| draws.noise(rng)).collect();
    let eps: Vec<f64> = (0..n).map(|_| draws.noise(rng)).collect();
    let y = (0..n)
        .map(|i| {
            let shared: f64 = adjacency.neighbors(i).iter().map(|&j| eps[j]).sum();
            outcome_mean(&w[3 * i..3 * i + 3], a[i]) + delta[i] + shared
        })
        .collect();
    Ok((assemble(w, a, y)?, DependenceStructure::Network(adjacency)))
}

/// Independent units from the marginal law of a network of `n` units: each
/// unit's degree is Binomial(n - 1, p) and its shared noise sums that many
/// fresh draws.
pub fn marginal_sample(n: usize, edge_constant: f64, count: usize, rng: &mut SimRng) -> Result<ObservationTable> {
    let p = (edge_constant / n as f64).clamp(0.0, 1.0);
    let degree = Binomial::new((n.max(1) - 1) as u64, p).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let draws = UnitDraws::new();
    let mut w = Vec::with_capacity(3 * count);
    let mut a = Vec::with_capacity(count);
    let mut y = Vec::with_capacity(count);
    for _ in 0..count {
        let wi = draws.covariates(rng);
        let ai = u8::from(rng.random::<f64>() < propensity(&wi));
        let d = degree.sample(rng);
        let noise = draws.noise(rng) + (0..d).map(|_| draws.noise(rng)).sum::<f64>();
        y.push(outcome_mean(&wi, ai) + noise);
        a.push(ai);
        w.extend_from_slice(&wi);
    }
    assemble(w, a, y)
}

/// One Monte Carlo draw of `2 mu(W)`.
pub fn effect_draw(rng: &mut SimRng) -> f64 {
    thread_local! {
        static DRAWS: UnitDraws = UnitDraws::new();
    }
    DRAWS.with(|d| 2.0 * mu(&d.covariates(rng)))
}
