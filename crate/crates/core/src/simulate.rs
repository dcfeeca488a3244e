//! Synthetic eQTL-style data with block module structure.
//!
//! Genes are split into equal modules. Each module is driven by its own set
//! of SNPs; one major gene per module gets `Uniform(0, 1)` strengths and the
//! other genes of the module get perturbed copies of them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ar1_covariance, DenseMatrix, SpdMatrix};
use crate::model::Dataset;

/// Decay of the autoregressive covariance regime.
pub const AR1_RHO: f64 = 0.6;

/// Number of replicates averaged per configuration.
pub const DEFAULT_REPLICATES: usize = 15;

const TRUTH_STREAM: u64 = 0;
const SAMPLE_STREAM: u64 = 1;
const VALIDATION_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovStructure {
    Identity,
    Ar1(f64),
}

impl CovStructure {
    pub fn matrix(self, dim: usize, scale: f64) -> Result<SpdMatrix> {
        let base = match self {
            CovStructure::Identity => SpdMatrix::identity(dim),
            CovStructure::Ar1(rho) => ar1_covariance(dim, rho)?,
        };
        SpdMatrix::new(base.as_matrix().scale(scale))
    }
}

/// How non-major genes deviate from the major gene's coefficients.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// `β_jm = β_jk + Uniform(-ρ, ρ)`
    #[default]
    Uniform,
    /// `β_jm ~ Normal(β_jk, ρ²)`
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub module_size: usize,
    pub snps_per_module: usize,
    pub rho_perturb: f64,
    pub t_case: CovStructure,
    pub e_case: CovStructure,
    /// Multiplier of the input covariance T.
    pub t_scale: f64,
    /// Multiplier of the noise covariance E.
    pub e_scale: f64,
    pub seed: u64,
    pub perturb: Perturbation,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 120,
            p: 60,
            q: 60,
            module_size: 3,
            snps_per_module: 3,
            rho_perturb: 0.1,
            t_case: CovStructure::Identity,
            e_case: CovStructure::Identity,
            t_scale: 1.0,
            e_scale: 1.0,
            seed: 0,
            perturb: Perturbation::Uniform,
        }
    }
}

/// The four covariance regimes: case 1 has `T = I, E = I`, case 2 an AR(1)
/// input covariance, case 3 AR(1) noise and case 4 both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovarianceCase {
    Case1,
    Case2,
    Case3,
    Case4,
}

impl CovarianceCase {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Self::Case1),
            2 => Ok(Self::Case2),
            3 => Ok(Self::Case3),
            4 => Ok(Self::Case4),
            _ => Err(Error::ConfigInfeasible(format!("covariance case must be 1-4, got {i}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Self::Case1 => 1,
            Self::Case2 => 2,
            Self::Case3 => 3,
            Self::Case4 => 4,
        }
    }

    /// `(T structure, E structure)`
    pub fn structures(self) -> (CovStructure, CovStructure) {
        let ar = CovStructure::Ar1(AR1_RHO);
        let id = CovStructure::Identity;
        match self {
            Self::Case1 => (id, id),
            Self::Case2 => (ar, id),
            Self::Case3 => (id, ar),
            Self::Case4 => (ar, ar),
        }
    }
}

impl SimulationConfig {
    pub fn with_case(mut self, case: CovarianceCase) -> Self {
        (self.t_case, self.e_case) = case.structures();
        self
    }

    pub fn num_modules(&self) -> usize {
        self.q / self.module_size.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInfeasible(msg));
        if self.n == 0 || self.p == 0 || self.q == 0 {
            return bad(format!(
                "n, p, q must be positive (got {}, {}, {})",
                self.n, self.p, self.q
            ));
        }
        if self.module_size == 0 || !self.q.is_multiple_of(self.module_size) {
            return bad(format!(
                "q = {} is not divisible by module_size = {}",
                self.q, self.module_size
            ));
        }
        if self.snps_per_module * self.num_modules() > self.p {
            return bad(format!(
                "{} modules x {} SNPs need {} inputs, only p = {}",
                self.num_modules(),
                self.snps_per_module,
                self.snps_per_module * self.num_modules(),
                self.p
            ));
        }
        if !(self.rho_perturb >= 0.0 && self.rho_perturb.is_finite()) {
            return bad(format!("rho_perturb must be >= 0, got {}", self.rho_perturb));
        }
        if !(self.t_scale > 0.0 && self.t_scale.is_finite() && self.e_scale > 0.0 && self.e_scale.is_finite()) {
            return bad("t_scale and e_scale must be positive".into());
        }
        for c in [self.t_case, self.e_case] {
            if let CovStructure::Ar1(r) = c {
                if !(r.abs() < 1.0) {
                    return bad(format!("AR(1) coefficient must satisfy |rho| < 1, got {r}"));
                }
            }
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Random gene and SNP assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Structure {
    /// Module index of each gene.
    pub module_of_gene: Vec<usize>,
    /// Sorted SNP indices of each module.
    pub snps_of_module: Vec<Vec<usize>>,
    pub major_gene_of_module: Vec<usize>,
}

impl Structure {
    pub fn genes_of_module(&self, module: usize) -> Vec<usize> {
        (0..self.module_of_gene.len())
            .filter(|&g| self.module_of_gene[g] == module)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTruth {
    pub structure: Structure,
    pub b_true: DenseMatrix,
    pub theta_true: SpdMatrix,
    pub t: SpdMatrix,
    pub e: SpdMatrix,
}

pub fn generate_structure(cfg: &SimulationConfig) -> Result<Structure> {
    cfg.validate()?;
    let mut rng = cfg.rng(TRUTH_STREAM);
    structure_from(cfg, &mut rng)
}

fn structure_from(cfg: &SimulationConfig, rng: &mut ChaCha8Rng) -> Result<Structure> {
    let modules = cfg.num_modules();
    let mut genes: Vec<usize> = (0..cfg.q).collect();
    genes.shuffle(rng);
    let mut module_of_gene = vec![0; cfg.q];
    for (slot, &g) in genes.iter().enumerate() {
        module_of_gene[g] = slot / cfg.module_size;
    }
    let mut snps: Vec<usize> = (0..cfg.p).collect();
    snps.shuffle(rng);
    let snps_of_module = (0..modules)
        .map(|m| {
            let mut set = snps[m * cfg.snps_per_module..(m + 1) * cfg.snps_per_module].to_vec();
            set.sort_unstable();
            set
        })
        .collect();
    let major_gene_of_module = (0..modules)
        .map(|m| {
            let mut members: Vec<usize> = genes[m * cfg.module_size..(m + 1) * cfg.module_size].to_vec();
            members.sort_unstable();
            members[rng.random_range(0..members.len())]
        })
        .collect();
    Ok(Structure {
        module_of_gene,
        snps_of_module,
        major_gene_of_module,
    })
}

/// Coefficients for the given structure, drawing from `rng`.
pub fn generate_coefficients(structure: &Structure, cfg: &SimulationConfig, rng: &mut impl Rng) -> DenseMatrix {
    let mut b = DenseMatrix::zeros(cfg.p, cfg.q);
    for (module, snps) in structure.snps_of_module.iter().enumerate() {
        let major = structure.major_gene_of_module[module];
        let genes = structure.genes_of_module(module);
        for &j in snps {
            let base: f64 = rng.random();
            b[(j, major)] = base;
            for &m in genes.iter().filter(|&&m| m != major) {
                b[(j, m)] = perturb(base, cfg, rng);
            }
        }
    }
    b
}

fn perturb(base: f64, cfg: &SimulationConfig, rng: &mut impl Rng) -> f64 {
    let rho = cfg.rho_perturb;
    if rho == 0.0 {
        return base;
    }
    match cfg.perturb {
        Perturbation::Uniform => base + rng.random_range(-rho..rho),
        Perturbation::Normal => base + rho * rng.sample::<f64, _>(StandardNormal),
    }
}

/// `(E + BᵀTB)⁻¹`
pub fn generate_theta_true(b: &DenseMatrix, t: &SpdMatrix, e: &SpdMatrix) -> Result<SpdMatrix> {
    let tb = t.matmul(b)?;
    let mut sigma = e.add(&b.tr_matmul(&tb)?)?;
    sigma.symmetrize();
    SpdMatrix::new(sigma)?.inverse()
}

/// Structure, coefficients, covariances and the implied precision.
pub fn generate_truth(cfg: &SimulationConfig) -> Result<SimulationTruth> {
    cfg.validate()?;
    let mut rng = cfg.rng(TRUTH_STREAM);
    let structure = structure_from(cfg, &mut rng)?;
    let b_true = generate_coefficients(&structure, cfg, &mut rng);
    let t = cfg.t_case.matrix(cfg.p, cfg.t_scale)?;
    let e = cfg.e_case.matrix(cfg.q, cfg.e_scale)?;
    let theta_true = generate_theta_true(&b_true, &t, &e)?;
    Ok(SimulationTruth {
        structure,
        b_true,
        theta_true,
        t,
        e,
    })
}

/// `cfg.n` rows with `x ~ N(0, T)` and `y = xᵀB + e`, `e ~ N(0, E)`.
pub fn sample_dataset(truth: &SimulationTruth, cfg: &SimulationConfig) -> Result<Dataset> {
    draw_rows(truth, cfg.n, &mut cfg.rng(SAMPLE_STREAM))
}

/// `n` further rows from the same model, independent of [`sample_dataset`].
pub fn sample_validation(truth: &SimulationTruth, cfg: &SimulationConfig, n: usize) -> Result<Dataset> {
    draw_rows(truth, n, &mut cfg.rng(VALIDATION_STREAM))
}

fn draw_rows(truth: &SimulationTruth, n: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let x = correlated_normals(n, &truth.t, rng)?;
    let noise = correlated_normals(n, &truth.e, rng)?;
    let y = x.matmul(&truth.b_true)?.add(&noise)?;
    Dataset::new(x, y)
}

/// Rows `L z` with `LLᵀ = cov` and `z` standard normal.
fn correlated_normals(n: usize, cov: &SpdMatrix, rng: &mut impl Rng) -> Result<DenseMatrix> {
    let d = cov.dim();
    let z = DenseMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal));
    let l = cov.cholesky()?;
    z.matmul(&l.lower().transpose())
}

/// Truth and data for one configuration.
pub fn simulate(cfg: &SimulationConfig) -> Result<(SimulationTruth, Dataset)> {
    let truth = generate_truth(cfg)?;
    let data = sample_dataset(&truth, cfg)?;
    Ok((truth, data))
}

/// Configurations for `count` replicates, seeded `seed, seed + 1, ...`.
pub fn replicate_configs(cfg: &SimulationConfig, count: usize) -> Vec<SimulationConfig> {
    (0..count as u64)
        .map(|i| SimulationConfig {
            seed: cfg.seed.wrapping_add(i),
            ..cfg.clone()
        })
        .collect()
}

pub fn simulate_batch(cfg: &SimulationConfig, count: usize) -> Result<Vec<(SimulationTruth, Dataset)>> {
    replicate_configs(cfg, count).iter().map(simulate).collect()
}

/// JSON-friendly summary of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationManifest {
    pub config: SimulationConfig,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub t_case: CovStructure,
    pub e_case: CovStructure,
    pub seed: u64,
    pub nnz_b_true: usize,
    pub structure: Structure,
}

impl SimulationManifest {
    pub fn new(cfg: &SimulationConfig, truth: &SimulationTruth) -> Self {
        Self {
            config: cfg.clone(),
            n: cfg.n,
            p: cfg.p,
            q: cfg.q,
            t_case: cfg.t_case,
            e_case: cfg.e_case,
            seed: cfg.seed,
            nnz_b_true: truth.b_true.count_nonzero(),
            structure: truth.structure.clone(),
        }
    }
}
