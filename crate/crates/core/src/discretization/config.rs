use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::C64;

use super::pml::AxisStretch;
use super::DiscretizationError;

/// Default PML strength `C`; gives `sigma(0) / omega = C / (2 pi) ~ 4` when `eta = lambda`.
pub const DEFAULT_PML_STRENGTH: f64 = 25.0;

/// Low (`x_a = 0`) or high (`x_a = 1`) side of an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Low,
    High,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::Low => 0,
            Side::High => 1,
        }
    }
}

/// Prescribed boundary values for a data-Dirichlet side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DirichletTrace {
    /// `b = value` everywhere on the side.
    Constant(C64),
    /// Slanted plane wave `b = exp(i (omega / 2) x_t)`, `x_t` the first tangential coordinate.
    Slant,
}

impl DirichletTrace {
    /// Evaluate at the tangential coordinates of a boundary point.
    pub fn eval(&self, tangential: &[f64], omega: f64) -> C64 {
        match *self {
            DirichletTrace::Constant(v) => v,
            DirichletTrace::Slant => {
                let x = tangential.first().copied().unwrap_or(0.0);
                C64::from_polar(1.0, 0.5 * omega * x)
            }
        }
    }
}

/// Boundary condition on one side of the box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryKind {
    Pml,
    ZeroDirichlet,
    DataDirichlet(DirichletTrace),
}

impl BoundaryKind {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryKind::Pml => "pml",
            BoundaryKind::ZeroDirichlet => "zero",
            BoundaryKind::DataDirichlet(_) => "data",
        }
    }
}

/// Boundary kinds for every side, indexed by `(axis, side)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec {
    sides: [[BoundaryKind; 2]; 3],
}

impl BoundarySpec {
    pub fn uniform(kind: BoundaryKind) -> Self {
        Self { sides: [[kind; 2]; 3] }
    }

    pub fn all_pml() -> Self {
        Self::uniform(BoundaryKind::Pml)
    }

    pub fn all_zero_dirichlet() -> Self {
        Self::uniform(BoundaryKind::ZeroDirichlet)
    }

    pub fn get(&self, axis: usize, side: Side) -> BoundaryKind {
        self.sides[axis][side.index()]
    }

    pub fn set(&mut self, axis: usize, side: Side, kind: BoundaryKind) {
        self.sides[axis][side.index()] = kind;
    }

    pub fn with(mut self, axis: usize, side: Side, kind: BoundaryKind) -> Self {
        self.set(axis, side, kind);
        self
    }

    /// All data-Dirichlet sides among the first `dim` axes.
    pub fn data_sides(&self, dim: usize) -> Vec<(usize, Side, DirichletTrace)> {
        let mut out = Vec::new();
        for axis in 0..dim {
            for side in [Side::Low, Side::High] {
                if let BoundaryKind::DataDirichlet(trace) = self.get(axis, side) {
                    out.push((axis, side, trace));
                }
            }
        }
        out
    }

    /// True when every side among the first `dim` axes is a PML.
    pub fn is_all_pml(&self, dim: usize) -> bool {
        (0..dim).all(|a| [Side::Low, Side::High].iter().all(|&s| self.get(a, s) == BoundaryKind::Pml))
    }

    /// Compact `x1_low=pml,x1_high=pml,...` description.
    pub fn describe(&self, dim: usize) -> String {
        let mut parts = Vec::new();
        for axis in 0..dim {
            for (side, tag) in [(Side::Low, "low"), (Side::High, "high")] {
                parts.push(format!("x{}_{}={}", axis + 1, tag, self.get(axis, side).name()));
            }
        }
        parts.join(",")
    }
}

impl Default for BoundarySpec {
    fn default() -> Self {
        Self::all_pml()
    }
}

/// Swept axis and direction. Layers are ordered along `axis`, increasing
/// coordinate when `positive`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SweepDirection {
    pub axis: usize,
    pub positive: bool,
}

impl SweepDirection {
    /// Bottom-up sweep along the last axis.
    pub fn default_for(dim: usize) -> Self {
        Self { axis: dim - 1, positive: true }
    }

    pub fn reversed(self) -> Self {
        Self { axis: self.axis, positive: !self.positive }
    }

    /// Side of the box next to the last eliminated layer.
    pub fn terminal_side(self) -> (usize, Side) {
        (self.axis, if self.positive { Side::High } else { Side::Low })
    }
}

impl fmt::Display for SweepDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", if self.positive { '+' } else { '-' }, self.axis + 1)
    }
}

impl FromStr for SweepDirection {
    type Err = DiscretizationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (positive, rest) = match s.as_bytes().first() {
            Some(b'+') => (true, &s[1..]),
            Some(b'-') => (false, &s[1..]),
            _ => (true, s),
        };
        let axis = rest
            .strip_prefix('x')
            .and_then(|a| a.parse::<usize>().ok())
            .filter(|&a| (1..=3).contains(&a))
            .ok_or_else(|| DiscretizationError::Parameter(format!("bad sweep direction '{s}'")))?;
        Ok(Self { axis: axis - 1, positive })
    }
}

/// How the points-per-dimension count is derived from `q * omega / (2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NRounding {
    /// Round up to the next power of two.
    PowerOfTwo,
    /// Round to the nearest integer.
    Exact,
}

/// Grid, frequency and boundary setup of one discretized problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub dim: usize,
    /// Angular frequency.
    pub omega: f64,
    /// Points per wavelength.
    pub q: f64,
    /// Interior points per dimension.
    pub n: usize,
    /// PML width.
    pub eta: f64,
    /// PML strength constant.
    pub pml_c: f64,
    pub boundary: BoundarySpec,
    pub sweep: SweepDirection,
}

impl SimulationConfig {
    /// Configuration for a nominal wavenumber `omega / (2 pi)` sampled with `q`
    /// points per wavelength.
    ///
    /// `omega` is recomputed from the rounded `n` so that `lambda = q h` holds
    /// exactly; the PML is one wavelength wide.
    pub fn from_frequency(
        dim: usize,
        omega_over_2pi: f64,
        q: f64,
        rounding: NRounding,
    ) -> Result<Self, DiscretizationError> {
        if !(omega_over_2pi > 0.0 && q > 0.0) {
            return Err(DiscretizationError::Config(format!(
                "omega/2pi = {omega_over_2pi} and q = {q} must be positive"
            )));
        }
        let target = q * omega_over_2pi;
        let n = match rounding {
            NRounding::PowerOfTwo => ((target - 1e-9).ceil().max(1.0) as usize).next_power_of_two(),
            NRounding::Exact => target.round() as usize,
        }
        .max(4);
        let omega = 2.0 * PI * (n as f64 + 1.0) / q;
        let cfg = Self {
            dim,
            omega,
            q,
            n,
            eta: 2.0 * PI / omega,
            pml_c: DEFAULT_PML_STRENGTH,
            boundary: BoundarySpec::all_pml(),
            sweep: SweepDirection::default_for(dim.clamp(2, 3)),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Configuration with an explicit grid size, frequency and PML width.
    pub fn from_grid(dim: usize, n: usize, omega: f64, eta: f64) -> Result<Self, DiscretizationError> {
        let h = 1.0 / (n as f64 + 1.0);
        let cfg = Self {
            dim,
            omega,
            q: 2.0 * PI / omega / h,
            n,
            eta,
            pml_c: DEFAULT_PML_STRENGTH,
            boundary: BoundarySpec::all_pml(),
            sweep: SweepDirection::default_for(dim.clamp(2, 3)),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_boundary(mut self, boundary: BoundarySpec) -> Result<Self, DiscretizationError> {
        self.boundary = boundary;
        self.validate()?;
        Ok(self)
    }

    pub fn with_sweep(mut self, sweep: SweepDirection) -> Result<Self, DiscretizationError> {
        self.sweep = sweep;
        self.validate()?;
        Ok(self)
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn omega_over_2pi(&self) -> f64 {
        self.omega / (2.0 * PI)
    }

    /// Total number of unknowns `n^d`.
    pub fn num_unknowns(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Stretch function along `axis` with the configured per-side PML.
    pub fn axis_stretch(&self, axis: usize) -> AxisStretch {
        AxisStretch {
            omega: self.omega,
            c_pml: self.pml_c,
            eta: self.eta,
            low_pml: self.boundary.get(axis, Side::Low) == BoundaryKind::Pml,
            high_pml: self.boundary.get(axis, Side::High) == BoundaryKind::Pml,
        }
    }

    pub fn validate(&self) -> Result<(), DiscretizationError> {
        let err = |m: String| Err(DiscretizationError::Config(m));
        if !(2..=3).contains(&self.dim) {
            return err(format!("dim = {} must be 2 or 3", self.dim));
        }
        if self.n < 4 {
            return err(format!("n = {} must be at least 4", self.n));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return err(format!("omega = {} must be positive", self.omega));
        }
        if !(self.eta > 0.0) {
            return err(format!("eta = {} must be positive", self.eta));
        }
        if 2.0 * self.eta >= 1.0 {
            return err(format!("eta = {} leaves no interior: PML regions would overlap", self.eta));
        }
        if !(self.pml_c > 0.0 && self.pml_c.is_finite()) {
            return err(format!("PML strength {} must be positive", self.pml_c));
        }
        if self.sweep.axis >= self.dim {
            return err(format!("sweep axis x{} exceeds dimension {}", self.sweep.axis + 1, self.dim));
        }
        let data = self.boundary.data_sides(self.dim);
        let terminal = self.sweep.terminal_side();
        for (axis, side, _) in &data {
            if (*axis, *side) != terminal {
                return err(format!(
                    "data-Dirichlet side x{}_{:?} is not where the sweep {} terminates",
                    axis + 1,
                    side,
                    self.sweep
                ));
            }
        }
        Ok(())
    }
}
