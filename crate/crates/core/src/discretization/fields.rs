use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::C64;

use super::config::SimulationConfig;
use super::{grid_coordinate, DiscretizationError};

/// Velocity samples at the interior grid points, natural order (`x1` fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub dim: usize,
    pub n: usize,
    pub samples: Vec<f64>,
}

/// Forcing samples at the interior grid points, natural order (`x1` fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingField {
    pub dim: usize,
    pub n: usize,
    pub samples: Vec<C64>,
}

impl ForcingField {
    pub fn zeros(dim: usize, n: usize) -> Self {
        Self { dim, n, samples: vec![C64::new(0.0, 0.0); n.pow(dim as u32)] }
    }
}

/// Velocity models.
#[derive(Debug, Clone, PartialEq)]
pub enum VelocityModel {
    Constant {
        value: f64,
    },
    /// `c = 1 - kappa exp(-|x - mid|^2 / (2 width^2))`.
    Lens {
        kappa: f64,
        width: f64,
    },
    /// Like the lens, with the distance measured to the vertical line (last axis)
    /// through the midpoint.
    Waveguide {
        kappa: f64,
        width: f64,
    },
    /// `c = 1 + delta g`, `g` seeded white noise smoothed over one wavelength
    /// and scaled to `max |g| = 1`.
    Random {
        delta: f64,
        seed: u64,
    },
    /// `c = 1/2 + x_d`, increasing along the last axis.
    Gradient,
}

impl VelocityModel {
    pub fn lens() -> Self {
        VelocityModel::Lens { kappa: 0.4, width: 0.1 }
    }

    pub fn waveguide() -> Self {
        VelocityModel::Waveguide { kappa: 0.4, width: 0.1 }
    }

    pub fn random(seed: u64) -> Self {
        VelocityModel::Random { delta: 0.25, seed }
    }

    pub fn name(&self) -> &'static str {
        match self {
            VelocityModel::Constant { .. } => "constant",
            VelocityModel::Lens { .. } => "lens",
            VelocityModel::Waveguide { .. } => "waveguide",
            VelocityModel::Random { .. } => "random",
            VelocityModel::Gradient => "gradient",
        }
    }
}

/// Forcing models. Envelope widths scale with the wavelength.
#[derive(Debug, Clone, PartialEq)]
pub enum ForcingModel {
    None,
    /// Real Gaussian bump of width `lambda / 4`, peak 1.
    PointSource {
        center: Vec<f64>,
    },
    /// Gaussian envelope of width `lambda / 2` times `exp(i omega d.x)`, `d` the
    /// normalized direction.
    WavePacket {
        center: Vec<f64>,
        direction: Vec<f64>,
    },
}

impl ForcingModel {
    pub fn name(&self) -> &'static str {
        match self {
            ForcingModel::None => "none",
            ForcingModel::PointSource { .. } => "point",
            ForcingModel::WavePacket { .. } => "packet",
        }
    }
}

fn for_each_point(dim: usize, n: usize, h: f64, mut f: impl FnMut([f64; 3])) {
    let total = n.pow(dim as u32);
    for flat in 0..total {
        let mut x = [0.0; 3];
        let mut rest = flat;
        for xa in x.iter_mut().take(dim) {
            *xa = grid_coordinate(rest % n, h);
            rest /= n;
        }
        f(x);
    }
}

fn check_kappa(kappa: f64, width: f64) -> Result<(), DiscretizationError> {
    if !(0.0..1.0).contains(&kappa) {
        return Err(DiscretizationError::Parameter(format!("amplitude kappa = {kappa} must lie in [0, 1)")));
    }
    if !(width > 0.0) {
        return Err(DiscretizationError::Parameter(format!("width = {width} must be positive")));
    }
    Ok(())
}

/// Sample a velocity model on the grid of `config`.
pub fn build_velocity(model: &VelocityModel, config: &SimulationConfig) -> Result<VelocityField, DiscretizationError> {
    let (dim, n, h) = (config.dim, config.n, config.h());
    let mut samples = Vec::with_capacity(config.num_unknowns());
    match *model {
        VelocityModel::Constant { value } => {
            if !(value > 0.0 && value.is_finite()) {
                return Err(DiscretizationError::Parameter(format!("constant velocity {value} must be positive")));
            }
            samples.resize(config.num_unknowns(), value);
        }
        VelocityModel::Lens { kappa, width } => {
            check_kappa(kappa, width)?;
            for_each_point(dim, n, h, |x| {
                let r2: f64 = x.iter().take(dim).map(|xa| (xa - 0.5).powi(2)).sum();
                samples.push(1.0 - kappa * (-r2 / (2.0 * width * width)).exp());
            });
        }
        VelocityModel::Waveguide { kappa, width } => {
            check_kappa(kappa, width)?;
            for_each_point(dim, n, h, |x| {
                let r2: f64 = x.iter().take(dim - 1).map(|xa| (xa - 0.5).powi(2)).sum();
                samples.push(1.0 - kappa * (-r2 / (2.0 * width * width)).exp());
            });
        }
        VelocityModel::Random { delta, seed } => {
            if !(0.0..1.0).contains(&delta) {
                return Err(DiscretizationError::Parameter(format!(
                    "random contrast delta = {delta} must lie in [0, 1)"
                )));
            }
            let g = smoothed_noise(dim, n, config.wavelength() / h, seed);
            samples.extend(g.iter().map(|gi| 1.0 + delta * gi));
        }
        VelocityModel::Gradient => {
            for_each_point(dim, n, h, |x| samples.push(0.5 + x[dim - 1]));
        }
    }
    Ok(VelocityField { dim, n, samples })
}

/// Uniform(-1, 1) noise convolved with a truncated Gaussian of standard
/// deviation `sigma_pts` grid points along every axis, scaled to `max |g| = 1`.
fn smoothed_noise(dim: usize, n: usize, sigma_pts: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = n.pow(dim as u32);
    let mut g: Vec<f64> = (0..total).map(|_| rng.random_range(-1.0..1.0)).collect();

    let radius = (3.0 * sigma_pts).ceil() as isize;
    let kernel: Vec<f64> =
        (-radius..=radius).map(|k| (-(k as f64).powi(2) / (2.0 * sigma_pts * sigma_pts)).exp()).collect();

    let mut stride = 1;
    for _axis in 0..dim {
        let mut out = vec![0.0; total];
        for (flat, o) in out.iter_mut().enumerate() {
            let i = ((flat / stride) % n) as isize;
            let base = flat - (i as usize) * stride;
            let mut acc = 0.0;
            for (kk, w) in kernel.iter().enumerate() {
                let j = i + kk as isize - radius;
                if (0..n as isize).contains(&j) {
                    acc += w * g[base + j as usize * stride];
                }
            }
            *o = acc;
        }
        g = out;
        stride *= n;
    }

    let peak = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        g.iter_mut().for_each(|v| *v /= peak);
    }
    g
}

/// Sample a forcing model on the grid of `config`.
pub fn build_forcing(model: &ForcingModel, config: &SimulationConfig) -> Result<ForcingField, DiscretizationError> {
    let (dim, n, h) = (config.dim, config.n, config.h());
    let lambda = config.wavelength();
    let check_center = |center: &[f64]| -> Result<(), DiscretizationError> {
        if center.len() != dim {
            return Err(DiscretizationError::Parameter(format!(
                "forcing center has {} coordinates, expected {dim}",
                center.len()
            )));
        }
        if center.iter().any(|&c| c < config.eta || c > 1.0 - config.eta) {
            log::warn!("forcing center {center:?} lies inside the PML region");
        }
        Ok(())
    };
    let mut samples = Vec::with_capacity(config.num_unknowns());
    match model {
        ForcingModel::None => return Ok(ForcingField::zeros(dim, n)),
        ForcingModel::PointSource { center } => {
            check_center(center)?;
            let sigma = lambda / 4.0;
            for_each_point(dim, n, h, |x| {
                let r2: f64 = (0..dim).map(|a| (x[a] - center[a]).powi(2)).sum();
                samples.push(C64::new((-r2 / (2.0 * sigma * sigma)).exp(), 0.0));
            });
        }
        ForcingModel::WavePacket { center, direction } => {
            check_center(center)?;
            if direction.len() != dim {
                return Err(DiscretizationError::Parameter(format!(
                    "packet direction has {} components, expected {dim}",
                    direction.len()
                )));
            }
            let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(DiscretizationError::Parameter("packet direction must be a nonzero vector".into()));
            }
            let sigma = lambda / 2.0;
            for_each_point(dim, n, h, |x| {
                let r2: f64 = (0..dim).map(|a| (x[a] - center[a]).powi(2)).sum();
                let phase: f64 = (0..dim).map(|a| direction[a] / norm * x[a]).sum::<f64>();
                samples.push(C64::from_polar((-r2 / (2.0 * sigma * sigma)).exp(), config.omega * phase));
            });
        }
    }
    Ok(ForcingField { dim, n, samples })
}
