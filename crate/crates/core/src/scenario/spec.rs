//! Flat `key = value` scenario files.
//!
//! Lines starting with `#` and blank lines are ignored. Every key may appear
//! at most once; unknown keys are rejected. [`ScenarioSpec::to_text`] writes
//! every setting explicitly, so parsing its output reproduces the spec.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::discretization::{
    BoundaryKind, BoundarySpec, DirichletTrace, ForcingModel, NRounding, Side, SimulationConfig, SweepDirection,
    VelocityModel, DEFAULT_PML_STRENGTH,
};
use crate::hmatrix::{Admissibility, CompressionPolicy};
use crate::krylov::GmresConfig;
use crate::C64;

use super::ScenarioError;

/// Everything needed to run one scenario end to end.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub dim: usize,
    /// Nominal `omega / (2 pi)`; the grid is derived from it and `q`.
    pub omega_over_2pi: f64,
    pub q: f64,
    pub rounding: NRounding,
    pub pml_c: f64,
    /// PML width in wavelengths.
    pub eta_wavelengths: f64,
    pub velocity: VelocityModel,
    pub forcing: ForcingModel,
    pub boundary: BoundarySpec,
    pub sweep: SweepDirection,
    pub policy: CompressionPolicy,
    pub admissibility: Admissibility,
    pub gmres: GmresConfig,
    pub out_field: Option<PathBuf>,
    pub out_report: Option<PathBuf>,
    pub out_rank: Option<PathBuf>,
}

/// Keys in the order [`ScenarioSpec::to_text`] writes them.
const KEYS: &[&str] = &[
    "name",
    "dim",
    "omega_over_2pi",
    "q",
    "rounding",
    "pml_c",
    "eta_wavelengths",
    "velocity",
    "velocity_value",
    "velocity_kappa",
    "velocity_width",
    "velocity_delta",
    "velocity_seed",
    "forcing",
    "forcing_center",
    "forcing_direction",
    "bc",
    "sweep",
    "rank",
    "eps",
    "oversampling",
    "power_iters",
    "seed",
    "admissibility",
    "rel_tol",
    "max_iters",
    "out_field",
    "out_report",
    "out_rank",
];

fn spec_err(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Spec(msg.into())
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ScenarioError> {
    value.parse().map_err(|_| spec_err(format!("{key}: cannot parse '{value}'")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ScenarioError> {
    value.split(',').map(|v| parse_num(key, v.trim())).collect()
}

fn format_list(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn side_name(axis: usize, side: Side) -> String {
    format!("x{}_{}", axis + 1, if side == Side::Low { "low" } else { "high" })
}

fn kind_to_text(kind: BoundaryKind) -> String {
    match kind {
        BoundaryKind::Pml => "pml".into(),
        BoundaryKind::ZeroDirichlet => "dirichlet".into(),
        BoundaryKind::DataDirichlet(DirichletTrace::Slant) => "data:slant".into(),
        BoundaryKind::DataDirichlet(DirichletTrace::Constant(v)) if v == C64::new(1.0, 0.0) => "data:one".into(),
        BoundaryKind::DataDirichlet(DirichletTrace::Constant(v)) => format!("data:const({},{})", v.re, v.im),
    }
}

fn kind_from_text(s: &str) -> Result<BoundaryKind, ScenarioError> {
    match s {
        "pml" => Ok(BoundaryKind::Pml),
        "dirichlet" | "zero" => Ok(BoundaryKind::ZeroDirichlet),
        "data:one" => Ok(BoundaryKind::DataDirichlet(DirichletTrace::Constant(C64::new(1.0, 0.0)))),
        "data:slant" => Ok(BoundaryKind::DataDirichlet(DirichletTrace::Slant)),
        other => {
            let inner = other
                .strip_prefix("data:const(")
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| spec_err(format!("bc: unknown boundary kind '{other}'")))?;
            let v = parse_list("bc", inner)?;
            if v.len() != 2 {
                return Err(spec_err("bc: data:const needs (re,im)"));
            }
            Ok(BoundaryKind::DataDirichlet(DirichletTrace::Constant(C64::new(v[0], v[1]))))
        }
    }
}

/// `pml`, `dirichlet`, or `;`-separated `side=kind` entries applied on top of PML.
pub fn boundary_to_text(b: &BoundarySpec, dim: usize) -> String {
    if b.is_all_pml(dim) {
        return "pml".into();
    }
    if (0..dim).all(|a| [Side::Low, Side::High].iter().all(|&s| b.get(a, s) == BoundaryKind::ZeroDirichlet)) {
        return "dirichlet".into();
    }
    let mut parts = Vec::new();
    for axis in 0..dim {
        for side in [Side::Low, Side::High] {
            let kind = b.get(axis, side);
            if kind != BoundaryKind::Pml {
                parts.push(format!("{}={}", side_name(axis, side), kind_to_text(kind)));
            }
        }
    }
    parts.join(";")
}

pub fn boundary_from_text(s: &str) -> Result<BoundarySpec, ScenarioError> {
    match s {
        "pml" => return Ok(BoundarySpec::all_pml()),
        "dirichlet" => return Ok(BoundarySpec::all_zero_dirichlet()),
        _ => {}
    }
    let mut b = BoundarySpec::all_pml();
    for entry in s.split(';').map(str::trim).filter(|e| !e.is_empty()) {
        let (side, kind) = entry.split_once('=').ok_or_else(|| spec_err(format!("bc: bad entry '{entry}'")))?;
        let (axis, side) = side
            .trim()
            .strip_prefix('x')
            .and_then(|r| r.split_once('_'))
            .and_then(|(a, s)| {
                let axis = a.parse::<usize>().ok().filter(|&a| (1..=3).contains(&a))? - 1;
                let side = match s {
                    "low" => Side::Low,
                    "high" => Side::High,
                    _ => return None,
                };
                Some((axis, side))
            })
            .ok_or_else(|| spec_err(format!("bc: bad side '{side}'")))?;
        b.set(axis, side, kind_from_text(kind.trim())?);
    }
    Ok(b)
}

fn default_velocity(kind: &str, seed: u64) -> Result<VelocityModel, ScenarioError> {
    Ok(match kind {
        "constant" => VelocityModel::Constant { value: 1.0 },
        "lens" => VelocityModel::lens(),
        "waveguide" => VelocityModel::waveguide(),
        "random" => VelocityModel::random(seed),
        "gradient" => VelocityModel::Gradient,
        other => return Err(spec_err(format!("velocity: unknown model '{other}'"))),
    })
}

/// Short label with parameters, used in reports.
pub fn describe_velocity(v: &VelocityModel) -> String {
    match v {
        VelocityModel::Constant { value } => format!("constant(value={value})"),
        VelocityModel::Lens { kappa, width } => format!("lens(kappa={kappa},width={width})"),
        VelocityModel::Waveguide { kappa, width } => format!("waveguide(kappa={kappa},width={width})"),
        VelocityModel::Random { delta, seed } => format!("random(delta={delta},seed={seed})"),
        VelocityModel::Gradient => "gradient".into(),
    }
}

/// Short label with parameters, used in reports.
pub fn describe_forcing(f: &ForcingModel) -> String {
    match f {
        ForcingModel::None => "none".into(),
        ForcingModel::PointSource { center } => format!("point(center={})", format_list(center)),
        ForcingModel::WavePacket { center, direction } => {
            format!("packet(center={};direction={})", format_list(center), format_list(direction))
        }
    }
}

impl ScenarioSpec {
    /// An all-PML, constant-velocity, unforced scenario at `omega_over_2pi`.
    pub fn new(dim: usize, omega_over_2pi: f64) -> Self {
        Self {
            name: "scenario".into(),
            dim,
            omega_over_2pi,
            q: 8.0,
            rounding: if dim == 2 { NRounding::PowerOfTwo } else { NRounding::Exact },
            pml_c: DEFAULT_PML_STRENGTH,
            eta_wavelengths: 1.0,
            velocity: VelocityModel::Constant { value: 1.0 },
            forcing: ForcingModel::None,
            boundary: BoundarySpec::all_pml(),
            sweep: SweepDirection::default_for(dim.clamp(2, 3)),
            policy: CompressionPolicy::default(),
            admissibility: Admissibility::Strong,
            gmres: GmresConfig::default(),
            out_field: None,
            out_report: None,
            out_rank: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        Self::parse_with_overrides(text, &[])
    }

    /// Parse `text`, then replace values by `overrides` (same keys).
    ///
    /// Overriding `velocity` or `forcing` drops the file's parameters of the
    /// previous model. Overriding `seed` also reseeds a random velocity unless
    /// `velocity_seed` is overridden too.
    pub fn parse_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self, ScenarioError> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| spec_err(format!("line {}: expected key = value", lineno + 1)))?;
            let key = k.trim().to_string();
            if map.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(spec_err(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
        }
        for (k, v) in overrides {
            for (model, prefix) in [("velocity", "velocity_"), ("forcing", "forcing_")] {
                if k == model && map.get(model) != Some(v) {
                    map.retain(|key, _| !key.starts_with(prefix));
                }
            }
            map.insert(k.clone(), v.clone());
        }
        let overridden = |key: &str| overrides.iter().any(|(k, _)| k == key);
        if overridden("seed")
            && !overridden("velocity_seed")
            && map.get("velocity").map(String::as_str) == Some("random")
        {
            let seed = map["seed"].clone();
            map.insert("velocity_seed".into(), seed);
        }
        Self::from_map(&map)
    }

    fn from_map(map: &BTreeMap<String, String>) -> Result<Self, ScenarioError> {
        if let Some(bad) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(spec_err(format!("unknown key '{bad}'")));
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        let dim: usize = get("dim").map(|v| parse_num("dim", v)).transpose()?.unwrap_or(2);
        if !(2..=3).contains(&dim) {
            return Err(spec_err(format!("dim = {dim} must be 2 or 3")));
        }
        let omega_over_2pi: f64 =
            parse_num("omega_over_2pi", get("omega_over_2pi").ok_or_else(|| spec_err("omega_over_2pi is required"))?)?;
        let mut s = Self::new(dim, omega_over_2pi);
        if let Some(v) = get("name") {
            s.name = v.to_string();
        }
        if let Some(v) = get("q") {
            s.q = parse_num("q", v)?;
        }
        if let Some(v) = get("rounding") {
            s.rounding = match v {
                "pow2" => NRounding::PowerOfTwo,
                "exact" => NRounding::Exact,
                _ => return Err(spec_err(format!("rounding: expected pow2 or exact, got '{v}'"))),
            };
        }
        if let Some(v) = get("pml_c") {
            s.pml_c = parse_num("pml_c", v)?;
        }
        if let Some(v) = get("eta_wavelengths") {
            s.eta_wavelengths = parse_num("eta_wavelengths", v)?;
        }

        let velocity_seed: u64 = get("velocity_seed").map(|v| parse_num("velocity_seed", v)).transpose()?.unwrap_or(0);
        s.velocity = default_velocity(get("velocity").unwrap_or("constant"), velocity_seed)?;
        for key in ["velocity_value", "velocity_kappa", "velocity_width", "velocity_delta", "velocity_seed"] {
            let Some(v) = get(key) else { continue };
            match (&mut s.velocity, key) {
                (VelocityModel::Constant { value }, "velocity_value") => *value = parse_num(key, v)?,
                (VelocityModel::Lens { kappa, .. } | VelocityModel::Waveguide { kappa, .. }, "velocity_kappa") => {
                    *kappa = parse_num(key, v)?
                }
                (VelocityModel::Lens { width, .. } | VelocityModel::Waveguide { width, .. }, "velocity_width") => {
                    *width = parse_num(key, v)?
                }
                (VelocityModel::Random { delta, .. }, "velocity_delta") => *delta = parse_num(key, v)?,
                (VelocityModel::Random { .. }, "velocity_seed") => {}
                (model, _) => return Err(spec_err(format!("{key} does not apply to velocity '{}'", model.name()))),
            }
        }

        let center = get("forcing_center").map(|v| parse_list("forcing_center", v)).transpose()?;
        let direction = get("forcing_direction").map(|v| parse_list("forcing_direction", v)).transpose()?;
        s.forcing = match get("forcing").unwrap_or("none") {
            "none" => {
                if center.is_some() || direction.is_some() {
                    return Err(spec_err("forcing_center/forcing_direction need a forcing model"));
                }
                ForcingModel::None
            }
            "point" => {
                if direction.is_some() {
                    return Err(spec_err("forcing_direction does not apply to a point source"));
                }
                ForcingModel::PointSource {
                    center: center.ok_or_else(|| spec_err("point forcing needs forcing_center"))?,
                }
            }
            "packet" => ForcingModel::WavePacket {
                center: center.ok_or_else(|| spec_err("packet forcing needs forcing_center"))?,
                direction: direction.ok_or_else(|| spec_err("packet forcing needs forcing_direction"))?,
            },
            other => return Err(spec_err(format!("forcing: unknown model '{other}'"))),
        };

        if let Some(v) = get("bc") {
            s.boundary = boundary_from_text(v)?;
        }
        if let Some(v) = get("sweep") {
            s.sweep = v.parse().map_err(|e| spec_err(format!("sweep: {e}")))?;
        }
        if let Some(v) = get("rank") {
            s.policy.max_rank = parse_num("rank", v)?;
        }
        if let Some(v) = get("eps") {
            s.policy.eps = parse_num("eps", v)?;
        }
        if let Some(v) = get("oversampling") {
            s.policy.oversampling = parse_num("oversampling", v)?;
        }
        if let Some(v) = get("power_iters") {
            s.policy.power_iters = parse_num("power_iters", v)?;
        }
        if let Some(v) = get("seed") {
            s.policy.seed = parse_num("seed", v)?;
        }
        if let Some(v) = get("admissibility") {
            s.admissibility = match v {
                "weak" => Admissibility::Weak,
                "strong" => Admissibility::Strong,
                _ => return Err(spec_err(format!("admissibility: expected weak or strong, got '{v}'"))),
            };
        }
        if let Some(v) = get("rel_tol") {
            s.gmres.rel_tol = parse_num("rel_tol", v)?;
        }
        if let Some(v) = get("max_iters") {
            s.gmres.max_iters = parse_num("max_iters", v)?;
        }
        s.out_field = get("out_field").map(PathBuf::from);
        s.out_report = get("out_report").map(PathBuf::from);
        s.out_rank = get("out_rank").map(PathBuf::from);
        s.validate()?;
        Ok(s)
    }

    /// Checks that do not need the grid; grid-level checks happen in [`config`](Self::config).
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.omega_over_2pi > 0.0 && self.q > 0.0) {
            return Err(spec_err("omega_over_2pi and q must be positive"));
        }
        if !(self.eta_wavelengths > 0.0) {
            return Err(spec_err("eta_wavelengths must be positive"));
        }
        self.policy.validate().map_err(|e| spec_err(e.to_string()))?;
        self.gmres.validate().map_err(|e| spec_err(e.to_string()))?;
        Ok(())
    }

    /// Grid and boundary configuration; `omega` follows from the rounded `n`.
    pub fn config(&self) -> Result<SimulationConfig, ScenarioError> {
        let mut c = SimulationConfig::from_frequency(self.dim, self.omega_over_2pi, self.q, self.rounding)
            .map_err(|e| spec_err(e.to_string()))?;
        c.pml_c = self.pml_c;
        c.eta = self.eta_wavelengths * c.wavelength();
        c.boundary = self.boundary;
        c.sweep = self.sweep;
        c.validate().map_err(|e| spec_err(e.to_string()))?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let mut lines: Vec<(String, String)> = vec![
            ("name".into(), self.name.clone()),
            ("dim".into(), self.dim.to_string()),
            ("omega_over_2pi".into(), self.omega_over_2pi.to_string()),
            ("q".into(), self.q.to_string()),
            (
                "rounding".into(),
                match self.rounding {
                    NRounding::PowerOfTwo => "pow2".into(),
                    NRounding::Exact => "exact".into(),
                },
            ),
            ("pml_c".into(), self.pml_c.to_string()),
            ("eta_wavelengths".into(), self.eta_wavelengths.to_string()),
            ("velocity".into(), self.velocity.name().into()),
        ];
        match &self.velocity {
            VelocityModel::Constant { value } => lines.push(("velocity_value".into(), value.to_string())),
            VelocityModel::Lens { kappa, width } | VelocityModel::Waveguide { kappa, width } => {
                lines.push(("velocity_kappa".into(), kappa.to_string()));
                lines.push(("velocity_width".into(), width.to_string()));
            }
            VelocityModel::Random { delta, seed } => {
                lines.push(("velocity_delta".into(), delta.to_string()));
                lines.push(("velocity_seed".into(), seed.to_string()));
            }
            VelocityModel::Gradient => {}
        }
        lines.push(("forcing".into(), self.forcing.name().into()));
        match &self.forcing {
            ForcingModel::None => {}
            ForcingModel::PointSource { center } => lines.push(("forcing_center".into(), format_list(center))),
            ForcingModel::WavePacket { center, direction } => {
                lines.push(("forcing_center".into(), format_list(center)));
                lines.push(("forcing_direction".into(), format_list(direction)));
            }
        }
        lines.extend([
            ("bc".into(), boundary_to_text(&self.boundary, self.dim)),
            ("sweep".into(), self.sweep.to_string()),
            ("rank".into(), self.policy.max_rank.to_string()),
            ("eps".into(), self.policy.eps.to_string()),
            ("oversampling".into(), self.policy.oversampling.to_string()),
            ("power_iters".into(), self.policy.power_iters.to_string()),
            ("seed".into(), self.policy.seed.to_string()),
            ("admissibility".into(), self.admissibility.name().into()),
            ("rel_tol".into(), self.gmres.rel_tol.to_string()),
            ("max_iters".into(), self.gmres.max_iters.to_string()),
        ]);
        for (key, path) in
            [("out_field", &self.out_field), ("out_report", &self.out_report), ("out_rank", &self.out_rank)]
        {
            if let Some(p) = path {
                lines.push((key.into(), p.display().to_string()));
            }
        }
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
