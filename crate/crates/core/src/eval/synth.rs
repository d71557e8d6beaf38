//! Synthetic data with known structure: rotation-invariant noise, a
//! two-component Gaussian mixture, planted sparse concepts, and a two-class
//! benchmark with a spurious background direction.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::embedding_io::{EmbeddingMatrix, TextCorpus};
use crate::eval::metrics::PromptSet;
use crate::linalg::{gaussian_matrix, haar_stiefel, Matrix, Vector};
use crate::{Error, Result};

fn check_dims(n: usize, d: usize) -> Result<()> {
    if n < 2 || d < 2 {
        return Err(Error::Dimension(format!("generators need n, d >= 2, got {n}x{d}")));
    }
    Ok(())
}

/// i.i.d. standard normal entries.
pub fn gaussian_null<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Matrix> {
    check_dims(n, d)?;
    Ok(gaussian_matrix(n, d, rng))
}

/// Rows from `½N(μ, I) + ½N(−μ, I)` with `μ = e₁`. Also returns the
/// component of each row (0 for `+μ`).
pub fn gmm<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<(Matrix, Vec<usize>)> {
    check_dims(n, d)?;
    let mut m = gaussian_matrix(n, d, rng);
    let components: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
    for (i, &c) in components.iter().enumerate() {
        m[(i, 0)] += if c == 0 { 1.0 } else { -1.0 };
    }
    Ok((m, components))
}

/// Unit-variance, zero-mean loading distributions with kurtosis at least 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KurtosisFamily {
    /// Standardized Bernoulli(p): kurtosis `(1 − 3p + 3p²) / (p(1 − p))`,
    /// above 3 for `p` below about 0.21.
    TwoPoint { p: f64 },
    /// `Exp(1) − 1`, kurtosis 9.
    Exponential,
}

impl Default for KurtosisFamily {
    fn default() -> Self {
        KurtosisFamily::TwoPoint { p: 0.1 }
    }
}

impl KurtosisFamily {
    pub fn validate(&self) -> Result<()> {
        if let KurtosisFamily::TwoPoint { p } = *self {
            if !(p > 0.0 && p < 1.0) || self.kurtosis() < 3.0 {
                return Err(Error::InvalidArgument(format!(
                    "two-point family needs 0 < p < 1 with kurtosis >= 3, got p = {p}"
                )));
            }
        }
        Ok(())
    }

    /// Non-excess kurtosis of the family.
    pub fn kurtosis(&self) -> f64 {
        match *self {
            KurtosisFamily::TwoPoint { p } => (1.0 - 3.0 * p + 3.0 * p * p) / (p * (1.0 - p)),
            KurtosisFamily::Exponential => 9.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            KurtosisFamily::TwoPoint { p } => {
                let s = (p * (1.0 - p)).sqrt();
                if rng.random_bool(p) {
                    (1.0 - p) / s
                } else {
                    -p / s
                }
            }
            KurtosisFamily::Exponential => {
                let e: f64 = rng.sample(Exp1);
                e - 1.0
            }
        }
    }
}

/// `A = Z*·Y*ᵀ + σ·noise` together with its ground truth.
#[derive(Debug, Clone)]
pub struct PlantedConcepts {
    pub a: Matrix,
    pub z: Matrix,
    /// d×k orthonormal dictionary.
    pub y: Matrix,
}

/// Plant `k` concepts with i.i.d. loadings from `family` along a random
/// orthonormal d×k frame.
pub fn planted_concepts<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    k: usize,
    family: KurtosisFamily,
    noise: f64,
    rng: &mut R,
) -> Result<PlantedConcepts> {
    check_dims(n, d)?;
    family.validate()?;
    if k < 1 || k > d {
        return Err(Error::Dimension(format!("k must lie in 1..={d}, got {k}")));
    }
    let mut z = Matrix::zeros(n, k);
    for x in z.iter_mut() {
        *x = family.sample(rng);
    }
    let y = haar_stiefel(d, k, rng);
    let mut a = &z * y.transpose();
    if noise > 0.0 {
        a += gaussian_matrix(n, d, rng) * noise;
    }
    Ok(PlantedConcepts { a, z, y })
}

/// Geometry of the spurious-correlation benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpuriousConfig {
    pub n: usize,
    pub d: usize,
    /// Fraction of samples whose background agrees with their class.
    pub majority: f64,
    /// Standard deviation of isotropic noise.
    pub noise: f64,
    /// Number of unrelated nuisance-free concepts.
    pub n_other: usize,
    /// Probability that the class or background concept is visible in a
    /// sample; magnitudes are Exp(1) when visible.
    pub class_active: f64,
    pub background_active: f64,
    /// Weight of the background direction inside the class prompts.
    pub prompt_leak: f64,
    /// Noise added to corpus text embeddings.
    pub text_noise: f64,
}

impl Default for SpuriousConfig {
    fn default() -> Self {
        SpuriousConfig {
            n: 2000,
            d: 32,
            majority: 0.9,
            noise: 0.1,
            n_other: 6,
            class_active: 0.98,
            background_active: 0.6,
            prompt_leak: 1.0,
            text_noise: 0.05,
        }
    }
}

impl SpuriousConfig {
    /// Concepts a decomposition should use: class, background and the others.
    pub fn k(&self) -> usize {
        self.n_other + 2
    }

    pub fn validate(&self) -> Result<()> {
        check_dims(self.n, self.d)?;
        if self.k() + 1 > self.d {
            return Err(Error::Dimension("d must exceed the number of planted directions".into()));
        }
        let probs = [self.majority, self.class_active, self.background_active];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument("probabilities must lie in [0, 1]".into()));
        }
        if !(self.noise >= 0.0 && self.text_noise >= 0.0) {
            return Err(Error::InvalidArgument("noise levels must be non-negative".into()));
        }
        Ok(())
    }
}

/// A two-class, two-background dataset with class prompts and the text
/// corpora used to find the background concept.
#[derive(Debug, Clone)]
pub struct SpuriousBenchmark {
    /// Embeddings with class labels (0/1) and groups `"y{class}_bg{background}"`.
    pub embeddings: EmbeddingMatrix,
    pub class_direction: Vector,
    pub background_direction: Vector,
    pub prompts: PromptSet,
    /// Descriptions of the two classes.
    pub target_texts: TextCorpus,
    /// Descriptions of the two backgrounds.
    pub spurious_texts: TextCorpus,
}

fn sign(bit: bool) -> f64 {
    if bit {
        1.0
    } else {
        -1.0
    }
}

fn noisy_texts<R: Rng + ?Sized>(
    dir: &Vector,
    names: [&str; 2],
    per_pole: usize,
    noise: f64,
    rng: &mut R,
) -> Result<TextCorpus> {
    let d = dir.len();
    let mut rows = Vec::new();
    let mut descriptions = Vec::new();
    for (pole, name) in names.iter().enumerate() {
        let s = if pole == 0 { 1.0 } else { -1.0 };
        for v in 0..per_pole {
            let mut row: Vec<f64> = dir.iter().map(|x| s * x).collect();
            for x in row.iter_mut() {
                *x += noise * rng.sample::<f64, _>(StandardNormal);
            }
            rows.extend(row);
            descriptions.push(format!("{name} ({v})"));
        }
    }
    TextCorpus::new(descriptions, Matrix::from_row_slice(2 * per_pole, d, &rows))
}

/// Sample the benchmark.
///
/// Each sample is `s_y·m_c·c + s_g·m_g·b + Σ l_j·f_j + σ·ε` with orthonormal
/// directions `c` (class), `b` (background) and `f_j`, class sign `s_y`,
/// background sign `s_g = s_y` with probability `majority`, Exp(1)
/// magnitudes switched on with the configured probabilities and Laplace
/// loadings `l_j`. Class prompts are `±(c + β·b) + q` with a shared offset
/// `q`, so zero-shot predictions lean on the background.
pub fn spurious_benchmark<R: Rng + ?Sized>(config: &SpuriousConfig, rng: &mut R) -> Result<SpuriousBenchmark> {
    config.validate()?;
    let (n, d) = (config.n, config.d);
    let frame = haar_stiefel(d, config.k() + 1, rng);
    let c = frame.column(0).into_owned();
    let b = frame.column(1).into_owned();
    let q = frame.column(config.k()).into_owned();

    let mut data = gaussian_matrix(n, d, rng) * config.noise;
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for i in 0..n {
        let class = rng.random_bool(0.5);
        let agrees = rng.random_bool(config.majority);
        let background = class == agrees;
        let m_c: f64 = if rng.random_bool(config.class_active) { rng.sample(Exp1) } else { 0.0 };
        let m_g: f64 = if rng.random_bool(config.background_active) { rng.sample(Exp1) } else { 0.0 };
        let mut row = &c * (sign(class) * m_c) + &b * (sign(background) * m_g);
        for j in 0..config.n_other {
            let e: f64 = rng.sample(Exp1);
            row.axpy(sign(rng.random_bool(0.5)) * e, &frame.column(2 + j), 1.0);
        }
        for j in 0..d {
            data[(i, j)] += row[j];
        }
        labels.push(class as usize);
        groups.push(format!("y{}_bg{}", class as usize, background as usize));
    }

    // Class 1 is the positive pole.
    let leak = &c + &b * config.prompt_leak;
    let mut prompt_rows = Matrix::zeros(2, d);
    prompt_rows.set_row(0, &(&q - &leak).transpose());
    prompt_rows.set_row(1, &(&q + &leak).transpose());
    let prompts = PromptSet::new(vec!["class 0".into(), "class 1".into()], prompt_rows)?;

    let target_texts = noisy_texts(&c, ["class 1", "class 0"], 4, config.text_noise, rng)?;
    let spurious_texts = noisy_texts(&b, ["background 1", "background 0"], 4, config.text_noise, rng)?;

    let embeddings = EmbeddingMatrix::new(data, None, "spurious benchmark")?
        .with_labels(labels)?
        .with_groups(groups)?;
    Ok(SpuriousBenchmark {
        embeddings,
        class_direction: c,
        background_direction: b,
        prompts,
        target_texts,
        spurious_texts,
    })
}
