//! Gaussian validity functions and their random parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Widths below this are redrawn; `exp(-b d^2)` with smaller `b` is a constant 1 in f64.
pub const WIDTH_FLOOR: f64 = 1e-12;

/// Name of the generator behind every seeded draw in this crate.
pub const RNG_ALGORITHM: &str = "ChaCha20Rng (rand_chacha 0.9), rand_distr 0.5 samplers";

/// Substream used by [`generate_bank`].
pub const DEFAULT_BANK_STREAM: u64 = 0;

/// Seeded ChaCha20 generator on an independent substream.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-coordinate distribution, used for centers and for initial conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoordinateDist {
    Normal { mean: f64, variance: f64 },
    Uniform { lo: f64, hi: f64 },
}

/// Distribution of the strictly positive widths `b_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WidthDist {
    Uniform { lo: f64, hi: f64 },
    Exponential { rate: f64 },
}

pub(crate) enum CoordinateSampler {
    Normal(Normal<f64>),
    Uniform(Uniform<f64>),
}

impl CoordinateSampler {
    pub(crate) fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            CoordinateSampler::Normal(d) => d.sample(rng),
            CoordinateSampler::Uniform(d) => d.sample(rng),
        }
    }
}

enum WidthSampler {
    Uniform(Uniform<f64>),
    Exponential(Exp<f64>),
}

impl CoordinateDist {
    pub(crate) fn sampler(&self) -> Result<CoordinateSampler> {
        match *self {
            CoordinateDist::Normal { mean, variance } => {
                if !mean.is_finite() || !variance.is_finite() || variance <= 0.0 {
                    return Err(Error::config(format!(
                        "normal distribution needs finite mean and positive variance, got mean={mean}, variance={variance}"
                    )));
                }
                Normal::new(mean, variance.sqrt())
                    .map(CoordinateSampler::Normal)
                    .map_err(|e| Error::config(e.to_string()))
            }
            CoordinateDist::Uniform { lo, hi } => uniform(lo, hi).map(CoordinateSampler::Uniform),
        }
    }
}

fn uniform(lo: f64, hi: f64) -> Result<Uniform<f64>> {
    if !lo.is_finite() || !hi.is_finite() || hi <= lo {
        return Err(Error::config(format!(
            "uniform distribution needs finite lo < hi, got lo={lo}, hi={hi}"
        )));
    }
    Uniform::new(lo, hi).map_err(|e| Error::config(e.to_string()))
}

impl WidthDist {
    fn sampler(&self) -> Result<WidthSampler> {
        match *self {
            WidthDist::Uniform { lo, hi } => {
                if lo < 0.0 {
                    return Err(Error::config(format!(
                        "width distribution must not put mass below 0, got lo={lo}"
                    )));
                }
                if hi <= WIDTH_FLOOR {
                    return Err(Error::config(format!(
                        "width distribution upper bound {hi} is below the width floor {WIDTH_FLOOR}"
                    )));
                }
                uniform(lo, hi).map(WidthSampler::Uniform)
            }
            WidthDist::Exponential { rate } => {
                if !rate.is_finite() || rate <= 0.0 {
                    return Err(Error::config(format!(
                        "exponential width distribution needs a positive rate, got {rate}"
                    )));
                }
                Exp::new(rate)
                    .map(WidthSampler::Exponential)
                    .map_err(|e| Error::config(e.to_string()))
            }
        }
    }
}

impl WidthSampler {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        loop {
            let b = match self {
                WidthSampler::Uniform(d) => d.sample(rng),
                WidthSampler::Exponential(d) => d.sample(rng),
            };
            if b >= WIDTH_FLOOR {
                return b;
            }
        }
    }
}

/// How the hidden parameters are drawn. The default matches the Van der Pol
/// setup: centers N(0, variance 2) per coordinate, widths U(0, 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomSpec {
    pub center: CoordinateDist,
    pub width: WidthDist,
    pub seed: u64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            center: CoordinateDist::Normal {
                mean: 0.0,
                variance: 2.0,
            },
            width: WidthDist::Uniform { lo: 0.0, hi: 1.0 },
            seed: 0,
        }
    }
}

impl RandomSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.center.sampler()?;
        self.width.sampler()?;
        Ok(())
    }
}

/// Frozen centers `a_i` (rows of an h x n matrix) and widths `b_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BankRepr", into = "BankRepr")]
pub struct RbfBank {
    centers: Matrix,
    widths: Vec<f64>,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BankRepr {
    seed: u64,
    centers: Matrix,
    widths: Vec<f64>,
}

impl TryFrom<BankRepr> for RbfBank {
    type Error = Error;

    fn try_from(r: BankRepr) -> Result<Self> {
        RbfBank::new(r.centers, r.widths, r.seed)
    }
}

impl From<RbfBank> for BankRepr {
    fn from(b: RbfBank) -> Self {
        BankRepr {
            seed: b.seed,
            centers: b.centers,
            widths: b.widths,
        }
    }
}

impl RbfBank {
    /// `centers` holds one center per row. Widths must be finite and strictly positive.
    pub fn new(centers: Matrix, widths: Vec<f64>, seed: u64) -> Result<Self> {
        if centers.rows() != widths.len() {
            return Err(Error::contract(format!(
                "{} centers but {} widths",
                centers.rows(),
                widths.len()
            )));
        }
        if let Some(b) = widths.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::Input(format!("width {b} is not strictly positive")));
        }
        Ok(RbfBank {
            centers,
            widths,
            seed,
        })
    }

    pub fn dim_in(&self) -> usize {
        self.centers.cols()
    }

    pub fn count_models(&self) -> usize {
        self.widths.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn centers(&self) -> &Matrix {
        &self.centers
    }

    pub fn center(&self, i: usize) -> &[f64] {
        self.centers.row(i)
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// `exp(-b_i |x - a_i|^2)` without bounds or dimension checks.
    #[inline]
    pub fn activation_unchecked(&self, i: usize, x: &[f64]) -> f64 {
        let d2: f64 = self
            .center(i)
            .iter()
            .zip(x)
            .map(|(a, v)| (v - a) * (v - a))
            .sum();
        (-self.widths[i] * d2).exp()
    }

    /// Writes all `h` activations for input `x` into `out`.
    #[inline]
    pub fn activations_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim_in());
        debug_assert_eq!(out.len(), self.count_models());
        for (i, g) in out.iter_mut().enumerate() {
            *g = self.activation_unchecked(i, x);
        }
    }

    /// The first `h` models of this bank; banks are generated model by
    /// model, so this is also the bank a smaller `count_models` would draw.
    pub fn prefix(&self, h: usize) -> Result<RbfBank> {
        if h > self.count_models() {
            return Err(Error::contract(format!(
                "prefix of {h} models requested from a bank of {}",
                self.count_models()
            )));
        }
        let n = self.dim_in();
        let centers = Matrix::new(h, n, self.centers.as_slice()[..h * n].to_vec())?;
        RbfBank::new(centers, self.widths[..h].to_vec(), self.seed)
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim_in() {
            return Err(Error::contract(format!(
                "input has dimension {}, model expects {}",
                x.len(),
                self.dim_in()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("input contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Draws a bank on the default substream of `spec.seed`.
pub fn generate_bank(spec: &RandomSpec, dim_in: usize, count_models: usize) -> Result<RbfBank> {
    generate_bank_on_stream(spec, dim_in, count_models, DEFAULT_BANK_STREAM)
}

/// Draws `count_models` centers and widths, model by model: the `n` center
/// coordinates of model `i`, then its width. A bank of `h` models is therefore
/// a prefix of the bank of `h + 1` models with the same seed and stream.
pub fn generate_bank_on_stream(
    spec: &RandomSpec,
    dim_in: usize,
    count_models: usize,
    stream: u64,
) -> Result<RbfBank> {
    if count_models == 0 {
        return Err(Error::config("a bank needs at least one model"));
    }
    if dim_in == 0 {
        return Err(Error::config("input dimension must be at least 1"));
    }
    let centers_dist = spec.center.sampler()?;
    let widths_dist = spec.width.sampler()?;
    let mut rng = seeded_rng(spec.seed, stream);
    let mut centers = Vec::with_capacity(count_models * dim_in);
    let mut widths = Vec::with_capacity(count_models);
    for _ in 0..count_models {
        for _ in 0..dim_in {
            centers.push(centers_dist.sample(&mut rng));
        }
        widths.push(widths_dist.sample(&mut rng));
    }
    RbfBank::new(Matrix::new(count_models, dim_in, centers)?, widths, spec.seed)
}

/// `exp(-b_i |x - a_i|^2)`.
pub fn activation(bank: &RbfBank, i: usize, x: &[f64]) -> Result<f64> {
    if i >= bank.count_models() {
        return Err(Error::contract(format!(
            "model index {i} out of range for a bank of {}",
            bank.count_models()
        )));
    }
    bank.check_input(x)?;
    Ok(bank.activation_unchecked(i, x))
}

/// True iff all distances `|x_j - a|` (rows of `points`) are pairwise distinct
/// beyond a relative tolerance of 1e-12.
pub fn check_distinct_norms(points: &Matrix, a: &[f64]) -> bool {
    const REL_TOL: f64 = 1e-12;
    let mut dist: Vec<f64> = points
        .row_iter()
        .map(|x| {
            x.iter()
                .zip(a)
                .map(|(v, c)| (v - c) * (v - c))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    dist.sort_by(f64::total_cmp);
    dist.windows(2)
        .all(|w| w[1] - w[0] > REL_TOL * w[1].max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn bank_1(center: &[f64], width: f64) -> RbfBank {
        RbfBank::new(Matrix::from_rows(&[center]).unwrap(), vec![width], 0).unwrap()
    }

    #[test]
    fn activation_examples() {
        let b = bank_1(&[0.3, -1.2], 0.7);
        assert_eq!(activation(&b, 0, &[0.3, -1.2]).unwrap(), 1.0);

        let b = bank_1(&[0.0, 0.0], 1.0);
        let g = activation(&b, 0, &[1.0, 0.0]).unwrap();
        assert!((g - 0.367_879_441_171_442_3).abs() < 1e-15);

        let b = bank_1(&[1.0, 1.0], 0.5);
        let g = activation(&b, 0, &[2.0, 3.0]).unwrap();
        assert!((g - (-2.5f64).exp()).abs() < 1e-16);
        assert!((g - 0.082_085).abs() < 1e-6);
    }

    #[test]
    fn activation_rejects_bad_index_and_dims() {
        let b = bank_1(&[0.0], 1.0);
        assert!(matches!(activation(&b, 1, &[0.0]), Err(Error::Contract(_))));
        assert!(matches!(
            activation(&b, 0, &[0.0, 1.0]),
            Err(Error::Contract(_))
        ));
        assert!(matches!(activation(&b, 0, &[f64::NAN]), Err(Error::Input(_))));
    }

    #[test]
    fn bank_rejects_non_positive_widths() {
        let c = Matrix::from_rows(&[[0.0]]).unwrap();
        assert!(RbfBank::new(c.clone(), vec![0.0], 0).is_err());
        assert!(RbfBank::new(c.clone(), vec![-1.0], 0).is_err());
        assert!(RbfBank::new(c, vec![1.0, 2.0], 0).is_err());
    }

    #[test]
    fn default_bank_shape() {
        let spec = RandomSpec::default().with_seed(42);
        let bank = generate_bank(&spec, 2, 100).unwrap();
        assert_eq!(bank.count_models(), 100);
        assert_eq!(bank.centers().shape(), (100, 2));
        assert!(bank.widths().iter().all(|&b| b > 0.0 && b < 1.0));
    }

    #[test]
    fn generation_is_deterministic_and_seed_sensitive() {
        let spec = RandomSpec::default().with_seed(7);
        let a = generate_bank(&spec, 3, 20).unwrap();
        let b = generate_bank(&spec, 3, 20).unwrap();
        assert_eq!(a, b);
        let c = generate_bank(&spec.with_seed(8), 3, 20).unwrap();
        assert_ne!(a, c);
        let d = generate_bank_on_stream(&spec, 3, 20, 1).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn smaller_banks_are_prefixes() {
        let spec = RandomSpec::default().with_seed(3);
        let big = generate_bank(&spec, 2, 64).unwrap();
        for h in [1, 2, 4, 16, 63] {
            assert_eq!(generate_bank(&spec, 2, h).unwrap(), big.prefix(h).unwrap());
        }
    }

    #[test]
    fn widths_respect_floor_on_large_sample() {
        let spec = RandomSpec {
            width: WidthDist::Uniform { lo: 0.0, hi: 1.0 },
            ..RandomSpec::default()
        };
        let bank = generate_bank(&spec, 1, 10_000).unwrap();
        let min = bank.widths().iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min >= WIDTH_FLOOR);

        let exp = RandomSpec {
            width: WidthDist::Exponential { rate: 2.0 },
            ..RandomSpec::default()
        };
        let bank = generate_bank(&exp, 1, 10_000).unwrap();
        assert!(bank.widths().iter().all(|&b| b >= WIDTH_FLOOR));
    }

    #[test]
    fn invalid_distributions_are_config_errors() {
        let bad = [
            RandomSpec {
                center: CoordinateDist::Normal {
                    mean: 0.0,
                    variance: -1.0,
                },
                ..RandomSpec::default()
            },
            RandomSpec {
                center: CoordinateDist::Uniform { lo: 1.0, hi: 1.0 },
                ..RandomSpec::default()
            },
            RandomSpec {
                width: WidthDist::Uniform { lo: -0.5, hi: 1.0 },
                ..RandomSpec::default()
            },
            RandomSpec {
                width: WidthDist::Exponential { rate: 0.0 },
                ..RandomSpec::default()
            },
        ];
        for spec in bad {
            assert!(matches!(generate_bank(&spec, 2, 3), Err(Error::Config(_))));
        }
        assert!(matches!(
            generate_bank(&RandomSpec::default(), 2, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn distinct_norms_examples() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        assert!(!check_distinct_norms(&x, &[1.0, 0.0]));
        assert!(!check_distinct_norms(&x, &[1.0, 1.0]));
        assert!(check_distinct_norms(&x, &[0.2, 0.0]));
    }

    #[test]
    fn random_centers_never_hit_equidistant_sets() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0], [0.0, 3.0]]).unwrap();
        for seed in 0..1000 {
            let mut rng = seeded_rng(seed, 0);
            let a: Vec<f64> = (0..2).map(|_| rng.sample(StandardNormal)).collect();
            assert!(check_distinct_norms(&x, &a), "seed {seed}");
        }
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = RandomSpec {
            width: WidthDist::Exponential { rate: 3.5 },
            ..RandomSpec::default().with_seed(99)
        };
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<RandomSpec>(&s).unwrap(), spec);
        let unknown = r#"{"center":{"kind":"normal","mean":0,"variance":1,"extra":1},"width":{"kind":"uniform","lo":0,"hi":1},"seed":0}"#;
        assert!(serde_json::from_str::<RandomSpec>(unknown).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn activation_in_unit_interval_and_decreasing(
                c in prop::collection::vec(-5.0f64..5.0, 2),
                b in 1e-3f64..5.0,
                dir in prop::collection::vec(-1.0f64..1.0, 2),
                r1 in 0.0f64..2.0,
                dr in 1e-3f64..2.0,
            ) {
                let norm = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
                prop_assume!(norm > 1e-3);
                let bank = bank_1(&c, b);
                let at = |r: f64| {
                    let x = [c[0] + r * dir[0] / norm, c[1] + r * dir[1] / norm];
                    activation(&bank, 0, &x).unwrap()
                };
                let (g1, g2) = (at(r1), at(r1 + dr));
                prop_assert!(g1 > 0.0 && g1 <= 1.0);
                prop_assert!(g2 <= g1);
                prop_assert!(g2 > 0.0 || b * (r1 + dr).powi(2) > 700.0);
            }

            #[test]
            fn generation_is_pure(seed in any::<u64>(), n in 1usize..4, h in 1usize..20) {
                let spec = RandomSpec::default().with_seed(seed);
                prop_assert_eq!(generate_bank(&spec, n, h).unwrap(), generate_bank(&spec, n, h).unwrap());
            }
        }
    }
}
