//! Synthetic spatial BSS experiments: uniform sites, independent Matérn
//! latent fields with Gaussian or t₅ marginals, and linear mixing.

mod bessel;
mod matern;
pub mod rng;

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use bessel::{bessel_k, bessel_k_scaled};
pub use matern::{matern, Matern, MaternParams, MATERN_PARAM_FLOOR};

use crate::error::{Error, Result};
use crate::estimator::FieldSample;
use crate::kernels::LocationSet;
use crate::linalg::{cholesky, Cholesky, Lu, Matrix, SymMatrix};
use rng::{stream, StreamRng};

/// Sites closer than this are treated as duplicates and redrawn.
pub const MIN_SITE_SEPARATION: f64 = 1e-9;

/// Upper limits of the uniform draws for random Matérn parameters.
pub const RANDOM_KAPPA_MAX: f64 = 6.0;
pub const RANDOM_PHI_MAX: f64 = 2.0;

// stream components
const LOCATIONS: u64 = 0;
const PARAMETERS: u64 = 1;
const MIXING: u64 = 2;
const FIELD_BASE: u64 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Marginal {
    #[default]
    Gaussian,
    T5,
}

impl Marginal {
    pub fn as_str(&self) -> &'static str {
        match self {
            Marginal::Gaussian => "gaussian",
            Marginal::T5 => "t5",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub enum MaternSpec {
    /// `κ ~ U(0, 6)`, `φ ~ U(0, 2)` per field, floored at 0.01.
    #[default]
    Random,
    Explicit(Vec<MaternParams>),
}

#[derive(Clone, Debug, PartialEq, Default)]
pub enum OmegaSpec {
    #[default]
    Identity,
    /// Standard normal entries, redrawn until reasonably conditioned.
    Random,
    Explicit(Matrix),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MaternRepr {
    Keyword(String),
    List(Vec<MaternParams>),
}

impl TryFrom<MaternRepr> for MaternSpec {
    type Error = String;
    fn try_from(r: MaternRepr) -> std::result::Result<Self, String> {
        match r {
            MaternRepr::Keyword(k) if k == "random" => Ok(MaternSpec::Random),
            MaternRepr::Keyword(k) => Err(format!("unknown matern keyword {k:?}")),
            MaternRepr::List(v) => Ok(MaternSpec::Explicit(v)),
        }
    }
}

impl From<MaternSpec> for MaternRepr {
    fn from(s: MaternSpec) -> Self {
        match s {
            MaternSpec::Random => MaternRepr::Keyword("random".into()),
            MaternSpec::Explicit(v) => MaternRepr::List(v),
        }
    }
}

impl Serialize for MaternSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MaternRepr::from(self.clone()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for MaternSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        MaternRepr::deserialize(d)?
            .try_into()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum OmegaRepr {
    Keyword(String),
    Rows(Vec<Vec<f64>>),
}

impl Serialize for OmegaSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match self {
            OmegaSpec::Identity => OmegaRepr::Keyword("identity".into()),
            OmegaSpec::Random => OmegaRepr::Keyword("random".into()),
            OmegaSpec::Explicit(m) => {
                OmegaRepr::Rows((0..m.rows()).map(|i| m.row(i).to_vec()).collect())
            }
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for OmegaSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match OmegaRepr::deserialize(d)? {
            OmegaRepr::Keyword(k) if k == "identity" => Ok(OmegaSpec::Identity),
            OmegaRepr::Keyword(k) if k == "random" => Ok(OmegaSpec::Random),
            OmegaRepr::Keyword(k) => Err(D::Error::custom(format!("unknown omega keyword {k:?}"))),
            OmegaRepr::Rows(rows) => Matrix::from_rows(&rows)
                .map(OmegaSpec::Explicit)
                .map_err(D::Error::custom),
        }
    }
}

fn default_box() -> f64 {
    50.0
}

/// One simulated experiment. Serialises to the JSON scenario format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    pub p: usize,
    /// Side of the square `[0, box]²` sites are drawn from.
    #[serde(rename = "box", default = "default_box")]
    pub box_side: f64,
    #[serde(default)]
    pub marginal: Marginal,
    #[serde(default)]
    pub matern: MaternSpec,
    #[serde(default)]
    pub omega: OmegaSpec,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn new(n: usize, p: usize, seed: u64) -> Self {
        Self {
            n,
            p,
            box_side: default_box(),
            marginal: Marginal::Gaussian,
            matern: MaternSpec::Random,
            omega: OmegaSpec::Identity,
            seed,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("scenario: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks field constraints; messages start with the offending field path.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n < 2 {
            return bad(format!("n: must be at least 2, got {}", self.n));
        }
        if self.p < 1 {
            return bad(format!("p: must be at least 1, got {}", self.p));
        }
        if !(self.box_side > 0.0) || !self.box_side.is_finite() {
            return bad(format!("box: must be finite and positive, got {}", self.box_side));
        }
        if let MaternSpec::Explicit(list) = &self.matern {
            if list.len() != self.p {
                return bad(format!("matern: expected {} entries, got {}", self.p, list.len()));
            }
            for (j, m) in list.iter().enumerate() {
                MaternParams::new(m.kappa, m.phi).map_err(|e| match e {
                    Error::InvalidConfig(msg) => Error::InvalidConfig(format!("matern[{j}].{msg}")),
                    other => other,
                })?;
            }
        }
        if let OmegaSpec::Explicit(m) = &self.omega {
            if m.rows() != self.p || m.cols() != self.p {
                return bad(format!(
                    "omega: expected {}x{} matrix, got {}x{}",
                    self.p,
                    self.p,
                    m.rows(),
                    m.cols()
                ));
            }
            if !m.is_finite() {
                return bad("omega: entries must be finite".into());
            }
            if Lu::new(m).is_err() {
                return bad("omega: matrix is singular".into());
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SimulatedDataset {
    pub data: FieldSample,
    pub truth_omega: Matrix,
    /// Latent values, row `i` is `Z(s_i)`.
    pub truth_z: Matrix,
    pub matern_used: Vec<MaternParams>,
    /// Diagonal loading used by each field's Cholesky factor.
    pub jitter: Vec<f64>,
}

/// `n` i.i.d. uniform sites on `[0, box]²`; any site within
/// [`MIN_SITE_SEPARATION`] of an earlier one is redrawn.
pub fn sample_locations(n: usize, box_side: f64, rng: &mut impl Rng) -> Result<LocationSet> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("n: must be at least 2, got {n}")));
    }
    let mut pts: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(0.0..=box_side), rng.random_range(0.0..=box_side)])
        .collect();
    while let Some(j) = first_close_site(&pts) {
        pts[j] = [rng.random_range(0.0..=box_side), rng.random_range(0.0..=box_side)];
    }
    LocationSet::new(2, pts.into_iter().flatten().collect())
}

/// Larger index of the first pair (in x-sorted sweep order) closer than the
/// minimum separation.
fn first_close_site(pts: &[[f64; 2]]) -> Option<usize> {
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]).then(a.cmp(&b)));
    for (pos, &a) in order.iter().enumerate() {
        for &b in &order[pos + 1..] {
            if pts[b][0] - pts[a][0] >= MIN_SITE_SEPARATION {
                break;
            }
            let d = (pts[a][0] - pts[b][0]).hypot(pts[a][1] - pts[b][1]);
            if d < MIN_SITE_SEPARATION {
                return Some(a.max(b));
            }
        }
    }
    None
}

/// Matérn correlation matrix over `locs`.
pub fn correlation_matrix(locs: &LocationSet, params: MaternParams) -> SymMatrix {
    let n = locs.len();
    let m = Matern::new(params);
    let mut r = Matrix::identity(n);
    for i in 0..n {
        for j in 0..i {
            let v = m.correlation(locs.distance(i, j));
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    SymMatrix::new(r).expect("mirrored construction is symmetric")
}

/// Cholesky factor of the Matérn correlation, with jitter when needed.
pub fn correlation_factor(locs: &LocationSet, params: MaternParams) -> Result<Cholesky> {
    cholesky(&correlation_matrix(locs, params), true)
}

/// One latent field from a correlation factor: `L·ε` rescaled to unit
/// variance, or for t₅ the same vector divided by one `√(χ²₅/5)` draw and
/// scaled by `√(3/5)`.
pub fn latent_from_factor(chol: &Cholesky, marginal: Marginal, rng: &mut impl Rng) -> Vec<f64> {
    let n = chol.factor.rows();
    let eps: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let unit = 1.0 / (1.0 + chol.jitter).sqrt();
    let mut z: Vec<f64> = (0..n)
        .map(|i| {
            let row = &chol.factor.row(i)[..=i];
            unit * crate::linalg::dot(row, &eps[..=i])
        })
        .collect();
    if marginal == Marginal::T5 {
        let chi2: f64 = ChiSquared::new(5.0).expect("valid dof").sample(rng);
        let scale = (3.0_f64 / 5.0).sqrt() / (chi2 / 5.0).sqrt();
        for v in &mut z {
            *v *= scale;
        }
    }
    z
}

/// A single Matérn latent field over `locs`.
pub fn gen_latent_field(
    locs: &LocationSet,
    params: MaternParams,
    marginal: Marginal,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let chol = correlation_factor(locs, params)?;
    Ok(latent_from_factor(&chol, marginal, rng))
}

fn draw_matern(spec: &MaternSpec, p: usize, rng: &mut StreamRng) -> Result<Vec<MaternParams>> {
    match spec {
        MaternSpec::Explicit(list) => list
            .iter()
            .map(|m| MaternParams::new(m.kappa, m.phi))
            .collect(),
        MaternSpec::Random => (0..p)
            .map(|_| {
                let kappa: f64 = rng.random_range(0.0..RANDOM_KAPPA_MAX);
                let phi: f64 = rng.random_range(0.0..RANDOM_PHI_MAX);
                Ok(MaternParams {
                    kappa: kappa.max(MATERN_PARAM_FLOOR),
                    phi: phi.max(MATERN_PARAM_FLOOR),
                })
            })
            .collect(),
    }
}

fn draw_omega(spec: &OmegaSpec, p: usize, rng: &mut StreamRng) -> Result<Matrix> {
    match spec {
        OmegaSpec::Identity => Ok(Matrix::identity(p)),
        OmegaSpec::Explicit(m) => Ok(m.clone()),
        OmegaSpec::Random => loop {
            let m = Matrix::from_fn(p, p, |_, _| rng.sample(StandardNormal));
            let s = m.t_matmul(&m);
            let e = crate::linalg::sym_eigen(&SymMatrix::symmetrize(s)?)?;
            let smallest = *e.values.last().expect("p >= 1");
            if smallest > 0.0 && e.values[0] / smallest < 1e8 {
                return Ok(m);
            }
        },
    }
}

/// Generates the full dataset of a scenario; a pure function of `cfg`.
pub fn gen_dataset(cfg: &ScenarioConfig) -> Result<SimulatedDataset> {
    cfg.validate()?;
    let seed = cfg.seed;
    let locs = sample_locations(cfg.n, cfg.box_side, &mut stream(seed, LOCATIONS, 0))?;
    let params = draw_matern(&cfg.matern, cfg.p, &mut stream(seed, PARAMETERS, 0))?;
    let omega = draw_omega(&cfg.omega, cfg.p, &mut stream(seed, MIXING, 0))?;

    // fields with identical parameters share one factorisation
    let mut factors: HashMap<(u64, u64), Cholesky> = HashMap::new();
    let mut z = Matrix::zeros(cfg.n, cfg.p);
    let mut jitter = Vec::with_capacity(cfg.p);
    for (j, &prm) in params.iter().enumerate() {
        let key = (prm.kappa.to_bits(), prm.phi.to_bits());
        if let Entry::Vacant(e) = factors.entry(key) {
            e.insert(correlation_factor(&locs, prm)?);
        }
        let chol = &factors[&key];
        let field = latent_from_factor(chol, cfg.marginal, &mut stream(seed, FIELD_BASE + j as u64, 0));
        for (i, v) in field.into_iter().enumerate() {
            z[(i, j)] = v;
        }
        jitter.push(chol.jitter);
    }

    let x = match cfg.omega {
        OmegaSpec::Identity => z.clone(),
        _ => z.matmul_t(&omega),
    };
    Ok(SimulatedDataset {
        data: FieldSample::new(locs, x)?,
        truth_omega: omega,
        truth_z: z,
        matern_used: params,
        jitter,
    })
}
