use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{GaqqError, Result};
use crate::estimator::Dataset;
use crate::numerics::{cholesky_lower, inv_spd, sym_eig, SymMatrix};

/// Class-conditional precision structures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrecisionModel {
    /// Identity.
    M1,
    /// `0.6^|i−j|`.
    M2,
    /// M2 with rows and columns jointly permuted at random.
    M3,
    /// `CS(0.6)` on the first five coordinates, identity elsewhere.
    M4,
    /// Random sparse `Θ` plus a diagonal shift.
    M5,
}

impl PrecisionModel {
    pub const ALL: [PrecisionModel; 5] = [Self::M1, Self::M2, Self::M3, Self::M4, Self::M5];

    fn index(self) -> usize {
        match self {
            Self::M1 => 1,
            Self::M2 => 2,
            Self::M3 => 3,
            Self::M4 => 4,
            Self::M5 => 5,
        }
    }
}

impl fmt::Display for PrecisionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}", self.index())
    }
}

impl FromStr for PrecisionModel {
    type Err = GaqqError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" | "1" => Ok(Self::M1),
            "m2" | "2" => Ok(Self::M2),
            "m3" | "3" => Ok(Self::M3),
            "m4" | "4" => Ok(Self::M4),
            "m5" | "5" => Ok(Self::M5),
            _ => Err(GaqqError::invalid(format!("unknown precision model '{s}'"))),
        }
    }
}

/// Share of zero coordinates in the second class mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sparsity {
    /// 25% zeros.
    S1,
    /// 75% zeros.
    S2,
}

impl Sparsity {
    pub fn zero_fraction(self) -> f64 {
        match self {
            Self::S1 => 0.25,
            Self::S2 => 0.75,
        }
    }
}

impl fmt::Display for Sparsity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::S1 => f.write_str("s1"),
            Self::S2 => f.write_str("s2"),
        }
    }
}

impl FromStr for Sparsity {
    type Err = GaqqError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" | "1" => Ok(Self::S1),
            "s2" | "2" => Ok(Self::S2),
            _ => Err(GaqqError::invalid(format!("unknown sparsity '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ClassSetup {
    TwoClass { sparsity: Sparsity, sizes: [usize; 2] },
    MultiClass { sizes: Vec<usize> },
}

impl ClassSetup {
    pub fn sizes(&self) -> &[usize] {
        match self {
            Self::TwoClass { sizes, .. } => sizes,
            Self::MultiClass { sizes } => sizes,
        }
    }

    pub fn k(&self) -> usize {
        self.sizes().len()
    }
}

/// One simulated design. `test_sizes` defaults to the training sizes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScenarioSpec {
    pub precision_model: PrecisionModel,
    pub p: usize,
    pub class_setup: ClassSetup,
    pub test_sizes: Option<Vec<usize>>,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn two_class(model: PrecisionModel, sparsity: Sparsity, p: usize, n_per_class: usize) -> Self {
        Self {
            precision_model: model,
            p,
            class_setup: ClassSetup::TwoClass {
                sparsity,
                sizes: [n_per_class, n_per_class],
            },
            test_sizes: None,
            seed: 0,
        }
    }

    pub fn multi_class(model: PrecisionModel, p: usize, k: usize, n_per_class: usize) -> Self {
        Self {
            precision_model: model,
            p,
            class_setup: ClassSetup::MultiClass {
                sizes: vec![n_per_class; k],
            },
            test_sizes: None,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn train_sizes(&self) -> &[usize] {
        self.class_setup.sizes()
    }

    pub fn test_sizes(&self) -> &[usize] {
        self.test_sizes.as_deref().unwrap_or(self.class_setup.sizes())
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(GaqqError::invalid("scenario needs p >= 2"));
        }
        let k = self.class_setup.k();
        if k < 2 {
            return Err(GaqqError::invalid("scenario needs at least two classes"));
        }
        if self.train_sizes().iter().chain(self.test_sizes()).any(|&n| n < 2) {
            return Err(GaqqError::invalid("every class size must be >= 2"));
        }
        if self.test_sizes().len() != k {
            return Err(GaqqError::invalid("test sizes must list one size per class"));
        }
        if self.precision_model == PrecisionModel::M4 && self.p < 6 {
            return Err(GaqqError::invalid("precision model m4 needs p >= 6"));
        }
        match &self.class_setup {
            ClassSetup::TwoClass { .. } if self.p < 4 => {
                Err(GaqqError::invalid("two-class mean scenarios need p >= 4"))
            }
            ClassSetup::MultiClass { .. } if self.p < 2 * k + 6 => Err(GaqqError::invalid(format!(
                "multi-class means need p >= 2K + 6 = {}",
                2 * k + 6
            ))),
            _ => Ok(()),
        }
    }

    /// Identifier such as `t1-m1-s2-p40` or `t3-m2-p100-k4`. A size suffix
    /// (`-n40`, or `-n30_40` for unequal sizes) is added when the training
    /// sizes differ from 30 per class; `-t…` likewise records explicit test
    /// sizes. The seed is not part of the id.
    pub fn id(&self) -> String {
        let sizes = self.train_sizes();
        let mut id = match &self.class_setup {
            ClassSetup::TwoClass { sparsity, .. } => {
                format!("t1-{}-{}-p{}", self.precision_model, sparsity, self.p)
            }
            ClassSetup::MultiClass { sizes } => {
                format!("t3-{}-p{}-k{}", self.precision_model, self.p, sizes.len())
            }
        };
        if sizes.iter().any(|&n| n != DEFAULT_CLASS_SIZE) {
            id.push_str("-n");
            id.push_str(&size_token(sizes));
        }
        if let Some(t) = &self.test_sizes {
            if t.as_slice() != sizes {
                id.push_str("-t");
                id.push_str(&size_token(t));
            }
        }
        id
    }

    /// Parses [`ScenarioSpec::id`] output (seed set to 0).
    pub fn parse_id(id: &str) -> Result<Self> {
        let bad = || GaqqError::invalid(format!("cannot parse scenario id '{id}'"));
        let parts: Vec<&str> = id.trim().split('-').collect();
        if parts.len() < 4 {
            return Err(bad());
        }
        let model: PrecisionModel = parts[1].parse().map_err(|_| bad())?;
        let num = |s: &str, prefix: char| -> Result<usize> {
            s.strip_prefix(prefix).and_then(|v| v.parse().ok()).ok_or_else(bad)
        };
        let (mut spec, rest) = match parts[0] {
            "t1" | "t2" => {
                let sparsity: Sparsity = parts[2].parse().map_err(|_| bad())?;
                let p = num(parts[3], 'p')?;
                (Self::two_class(model, sparsity, p, DEFAULT_CLASS_SIZE), &parts[4..])
            }
            "t3" => {
                let p = num(parts[2], 'p')?;
                let k = num(parts[3], 'k')?;
                (Self::multi_class(model, p, k, DEFAULT_CLASS_SIZE), &parts[4..])
            }
            _ => return Err(bad()),
        };
        for tok in rest {
            let (tag, body) = tok.split_at(1);
            let sizes = parse_sizes(body).ok_or_else(bad)?;
            match tag {
                "n" => spec.class_setup = with_sizes(&spec.class_setup, &sizes).ok_or_else(bad)?,
                "t" => {
                    let expanded = expand(&sizes, spec.class_setup.k()).ok_or_else(bad)?;
                    spec.test_sizes = Some(expanded);
                }
                _ => return Err(bad()),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Training size per class used by the standard scenarios.
pub const DEFAULT_CLASS_SIZE: usize = 30;

fn size_token(sizes: &[usize]) -> String {
    if sizes.windows(2).all(|w| w[0] == w[1]) {
        sizes[0].to_string()
    } else {
        sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("_")
    }
}

fn parse_sizes(body: &str) -> Option<Vec<usize>> {
    body.split('_').map(|s| s.parse().ok()).collect()
}

fn expand(sizes: &[usize], k: usize) -> Option<Vec<usize>> {
    match sizes.len() {
        1 => Some(vec![sizes[0]; k]),
        n if n == k => Some(sizes.to_vec()),
        _ => None,
    }
}

fn with_sizes(setup: &ClassSetup, sizes: &[usize]) -> Option<ClassSetup> {
    let sizes = expand(sizes, setup.k())?;
    Some(match setup {
        ClassSetup::TwoClass { sparsity, .. } => ClassSetup::TwoClass {
            sparsity: *sparsity,
            sizes: [sizes[0], sizes[1]],
        },
        ClassSetup::MultiClass { .. } => ClassSetup::MultiClass { sizes },
    })
}

/// Named groups of scenarios: `table1`/`table2` (every two-class cell) and
/// `table3` (the multi-class cells).
pub fn preset(name: &str) -> Option<Vec<ScenarioSpec>> {
    match name {
        "table1" | "table2" => {
            let mut out = Vec::new();
            for p in [40, 80, 200] {
                for s in [Sparsity::S1, Sparsity::S2] {
                    for m in PrecisionModel::ALL {
                        out.push(ScenarioSpec::two_class(m, s, p, DEFAULT_CLASS_SIZE));
                    }
                }
            }
            Some(out)
        }
        "table3" => Some(
            PrecisionModel::ALL
                .iter()
                .map(|&m| ScenarioSpec::multi_class(m, 200, 4, DEFAULT_CLASS_SIZE))
                .collect(),
        ),
        _ => None,
    }
}

/// Ridge added to M5 until its smallest eigenvalue reaches this floor.
pub const M5_MIN_EIGENVALUE: f64 = 0.05;
/// Step of the M5 ridge schedule `α = 0.1, 0.2, …`.
pub const M5_ALPHA_STEP: f64 = 0.1;

pub fn make_precision<R: Rng + ?Sized>(model: PrecisionModel, p: usize, rng: &mut R) -> Result<SymMatrix> {
    if p < 2 {
        return Err(GaqqError::invalid("precision dimension must be >= 2"));
    }
    let ar = |p: usize| SymMatrix::from_fn(p, |i, j| 0.6f64.powi((i as i32 - j as i32).abs()));
    Ok(match model {
        PrecisionModel::M1 => SymMatrix::identity(p),
        PrecisionModel::M2 => ar(p),
        PrecisionModel::M3 => {
            let base = ar(p);
            let mut perm: Vec<usize> = (0..p).collect();
            perm.shuffle(rng);
            SymMatrix::from_fn(p, |i, j| base.get(perm[i], perm[j]))
        }
        PrecisionModel::M4 => {
            if p < 6 {
                return Err(GaqqError::invalid("precision model m4 needs p >= 6"));
            }
            SymMatrix::from_fn(p, |i, j| match (i == j, i < 5 && j < 5) {
                (true, _) => 1.0,
                (false, true) => 0.6,
                (false, false) => 0.0,
            })
        }
        PrecisionModel::M5 => {
            let mut theta = DMatrix::zeros(p, p);
            for j in 0..p {
                for i in j + 1..p {
                    let b = rng.random::<f64>() < 0.15;
                    let u: f64 = rng.random_range(-1.0..1.0);
                    let v = if b { u } else { 0.0 };
                    theta[(i, j)] = v;
                    theta[(j, i)] = v;
                }
            }
            let lmin = sym_eig(&SymMatrix::new(theta.clone())?)?.min_value();
            let mut steps = 1u32;
            while lmin + M5_ALPHA_STEP * f64::from(steps) < M5_MIN_EIGENVALUE {
                steps += 1;
            }
            let alpha = M5_ALPHA_STEP * f64::from(steps);
            for i in 0..p {
                theta[(i, i)] = alpha;
            }
            SymMatrix::new(theta)?
        }
    })
}

/// `μ_1 = 0`; `μ_2` has `round(f·p)` zeros at random positions and
/// `Unif(0, 2)` entries elsewhere.
pub fn make_means_two_class<R: Rng + ?Sized>(
    p: usize,
    sparsity: Sparsity,
    rng: &mut R,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if p < 4 {
        return Err(GaqqError::invalid("two-class means need p >= 4"));
    }
    let zeros = (sparsity.zero_fraction() * p as f64).round() as usize;
    let zero_at = index::sample(rng, p, zeros);
    let mut is_zero = vec![false; p];
    for i in zero_at.iter() {
        is_zero[i] = true;
    }
    let mut mu2 = DVector::zeros(p);
    for j in 0..p {
        if !is_zero[j] {
            mu2[j] = rng.random_range(0.0..2.0);
        }
    }
    Ok((DVector::zeros(p), mu2))
}

/// `μ_kj = 0.5k + Unif(−1, 1)` for `j = 2k−1, …, 2k+6` (1-based), else 0.
pub fn make_means_multi<R: Rng + ?Sized>(p: usize, k: usize, rng: &mut R) -> Result<Vec<DVector<f64>>> {
    if k < 2 || p < 2 * k + 6 {
        return Err(GaqqError::invalid(format!(
            "multi-class means need K >= 2 and p >= 2K + 6, got K = {k}, p = {p}"
        )));
    }
    Ok((1..=k)
        .map(|c| {
            let mut mu = DVector::zeros(p);
            for j in (2 * c - 2)..=(2 * c + 5) {
                mu[j] = 0.5 * c as f64 + rng.random_range(-1.0..1.0);
            }
            mu
        })
        .collect())
}

/// `n` rows `μ + L z` with `L L' = C⁻¹` and `z` standard normal, drawn row
/// by row.
pub fn sample_mvn<R: Rng + ?Sized>(
    mu: &DVector<f64>,
    precision: &SymMatrix,
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let p = precision.dim();
    if mu.len() != p {
        return Err(GaqqError::invalid("mean and precision dimensions differ"));
    }
    let l = cholesky_lower(&inv_spd(precision)?)?;
    Ok(sample_with_factor(mu, &l, n, rng))
}

fn sample_with_factor<R: Rng + ?Sized>(mu: &DVector<f64>, l: &DMatrix<f64>, n: usize, rng: &mut R) -> DMatrix<f64> {
    let p = mu.len();
    let mut out = DMatrix::zeros(n, p);
    let mut z = DVector::zeros(p);
    for i in 0..n {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let row = l * &z + mu;
        out.row_mut(i).copy_from(&row.transpose());
    }
    out
}

/// Population parameters of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub mu: Vec<DVector<f64>>,
    pub precision: SymMatrix,
}

impl Truth {
    /// Draws `sizes[k]` samples from class `k + 1`.
    pub fn sample<R: Rng + ?Sized>(&self, sizes: &[usize], rng: &mut R) -> Result<Dataset> {
        if sizes.len() != self.mu.len() {
            return Err(GaqqError::invalid("need one size per class"));
        }
        let l = cholesky_lower(&inv_spd(&self.precision)?)?;
        let blocks: Vec<DMatrix<f64>> = self
            .mu
            .iter()
            .zip(sizes)
            .map(|(mu, &n)| sample_with_factor(mu, &l, n, rng))
            .collect();
        Dataset::from_class_blocks(&blocks)
    }
}

pub fn make_truth<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<Truth> {
    spec.validate()?;
    let precision = make_precision(spec.precision_model, spec.p, rng)?;
    let mu = match &spec.class_setup {
        ClassSetup::TwoClass { sparsity, .. } => {
            let (a, b) = make_means_two_class(spec.p, *sparsity, rng)?;
            vec![a, b]
        }
        ClassSetup::MultiClass { sizes } => make_means_multi(spec.p, sizes.len(), rng)?,
    };
    Ok(Truth { mu, precision })
}

/// Truth, training set and test set of one replication, in that draw order.
pub fn simulate<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<(Truth, Dataset, Dataset)> {
    let truth = make_truth(spec, rng)?;
    let train = truth.sample(spec.train_sizes(), rng)?;
    let test = truth.sample(spec.test_sizes(), rng)?;
    Ok((truth, train, test))
}
