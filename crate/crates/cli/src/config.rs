//! Run configuration: a single TOML document with waveguide, element,
//! sweep, numerics and output sections. Lengths are millimeters and
//! frequencies gigahertz in the file; conversion to SI happens at the
//! accessor layer so that parse -> serialize -> parse round-trips exactly.

use serde::{Deserialize, Serialize};

use postmatch::junction::Discretization;
use postmatch::network::{DiscPolicy, Numerics};
use postmatch::{Network, NetworkElement, PostJunction, Waveguide};

/// Errors from [`parse_config`]: either the document does not parse, or it
/// parsed but violates invariants (every violation is listed).
#[derive(Debug)]
pub enum ConfigError {
    Parse(String),
    Validation(Vec<String>),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Parse(msg) => write!(f, "config parse error: {msg}"),
            ConfigError::Validation(errors) => {
                writeln!(f, "invalid config ({} problem(s)):", errors.len())?;
                for e in errors {
                    writeln!(f, "  - {e}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveguideSection {
    /// Preset name; currently `"wr62"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ElementSection {
    /// Conducting cylindrical post. Exactly one of `d_mm` (offset from the
    /// guide axis, signed) or `h_mm` (offset from the x = 0 wall).
    Post {
        radius_mm: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d_mm: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h_mm: Option<f64>,
    },
    /// Uniform guide section between reference planes.
    Guide { length_mm: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub f_start_ghz: f64,
    pub f_stop_ghz: f64,
    pub points: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        // WR-62 recommended band.
        SweepSection {
            f_start_ghz: 12.4,
            f_stop_ghz: 18.0,
            points: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    pub modes: usize,
    /// Overdetermination factor of the automatic discretization policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_factor: Option<f64>,
    /// Explicit subinterval counts; all three must be given together.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_u: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_c: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_order: Option<usize>,
}

impl Default for NumericsSection {
    fn default() -> Self {
        NumericsSection {
            modes: 60,
            basis_factor: None,
            k_d: None,
            k_u: None,
            k_c: None,
            quadrature_order: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// CSV output path.
    #[serde(default = "default_csv_path")]
    pub csv: String,
    /// Optional 2-port Touchstone output (fundamental mode only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub touchstone: Option<String>,
    /// Which S-parameters appear in the CSV, in this order.
    #[serde(default = "default_s_params")]
    pub s_params: Vec<String>,
}

fn default_csv_path() -> String {
    "sweep.csv".to_string()
}

fn default_s_params() -> Vec<String> {
    vec!["S11".to_string(), "S21".to_string()]
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            csv: default_csv_path(),
            touchstone: None,
            s_params: default_s_params(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub waveguide: WaveguideSection,
    #[serde(rename = "element", default)]
    pub elements: Vec<ElementSection>,
    #[serde(default)]
    pub sweep: SweepSection,
    pub numerics: NumericsSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Parse and validate a configuration document. Validation reports every
/// violated invariant, not just the first.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let errors = cfg.validate();
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Validation(errors))
    }
}

impl RunConfig {
    /// Canonical serialization; `parse_config` on the result reproduces the
    /// config exactly.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();

        let wg = match self.build_waveguide() {
            Ok(wg) => Some(wg),
            Err(e) => {
                errors.push(e);
                None
            }
        };

        if self.elements.is_empty() {
            errors.push("element list is empty; at least one post or guide required".into());
        }
        for (i, el) in self.elements.iter().enumerate() {
            match el {
                ElementSection::Post {
                    radius_mm,
                    d_mm,
                    h_mm,
                } => {
                    if !(*radius_mm > 0.0) {
                        errors.push(format!("element {i}: post radius must be positive"));
                    }
                    match (d_mm, h_mm) {
                        (Some(_), Some(_)) => errors.push(format!(
                            "element {i}: give exactly one of d_mm or h_mm, not both"
                        )),
                        (None, None) => {
                            errors.push(format!("element {i}: post needs an offset (d_mm or h_mm)"))
                        }
                        _ => {}
                    }
                }
                ElementSection::Guide { length_mm } => {
                    if !(*length_mm >= 0.0) {
                        errors.push(format!("element {i}: guide length must be nonnegative"));
                    }
                }
            }
        }

        // Geometry-level checks need a waveguide and per-element validity.
        if let Some(wg) = wg {
            if errors.is_empty() {
                if let Err(e) = self.build_network_with(wg) {
                    errors.push(e.to_string());
                }
            }
        }

        if !(self.sweep.f_start_ghz > 0.0) {
            errors.push("sweep.f_start_ghz must be positive".into());
        }
        if !(self.sweep.f_stop_ghz > self.sweep.f_start_ghz) {
            errors.push("sweep.f_stop_ghz must exceed f_start_ghz".into());
        }
        if self.sweep.points < 1 {
            errors.push("sweep.points must be at least 1".into());
        }

        if self.numerics.modes < 1 {
            errors.push("numerics.modes must be at least 1".into());
        }
        if let Some(f) = self.numerics.basis_factor {
            if !(f > 0.0) {
                errors.push("numerics.basis_factor must be positive".into());
            }
        }
        let k_given = [self.numerics.k_d, self.numerics.k_u, self.numerics.k_c];
        let k_count = k_given.iter().filter(|k| k.is_some()).count();
        if k_count != 0 && k_count != 3 {
            errors.push("numerics.k_d, k_u, k_c must be given together or not at all".into());
        }
        if k_count == 3 {
            match Discretization::new(
                self.numerics.k_d.unwrap(),
                self.numerics.k_u.unwrap(),
                self.numerics.k_c.unwrap(),
            ) {
                Ok(d) => {
                    if let Err(e) = d.check_definiteness(self.numerics.modes) {
                        errors.push(format!("numerics: {e}"));
                    }
                }
                Err(e) => errors.push(format!("numerics: {e}")),
            }
            if self.numerics.basis_factor.is_some() {
                errors.push("numerics: basis_factor conflicts with explicit k_d/k_u/k_c".into());
            }
        }
        if let Some(q) = self.numerics.quadrature_order {
            if q < 2 {
                errors.push("numerics.quadrature_order must be at least 2".into());
            }
        }

        if self.output.s_params.is_empty() {
            errors.push("output.s_params must name at least one parameter".into());
        }
        for p in &self.output.s_params {
            if !matches!(p.as_str(), "S11" | "S12" | "S21" | "S22") {
                errors.push(format!(
                    "output.s_params: unknown parameter {p:?} (expected S11/S12/S21/S22)"
                ));
            }
        }
        if self.output.csv.is_empty() {
            errors.push("output.csv must not be empty".into());
        }

        errors
    }

    fn build_waveguide(&self) -> Result<Waveguide, String> {
        let w = &self.waveguide;
        match (&w.preset, w.a_mm, w.b_mm) {
            (Some(name), None, None) => match name.to_ascii_lowercase().as_str() {
                "wr62" | "wr-62" => {
                    if w.eps_r.is_some() || w.mu_r.is_some() {
                        Err("waveguide: preset does not take eps_r/mu_r overrides".into())
                    } else {
                        Ok(Waveguide::wr62())
                    }
                }
                other => Err(format!("waveguide: unknown preset {other:?}")),
            },
            (None, Some(a_mm), Some(b_mm)) => Waveguide::new(
                a_mm * 1e-3,
                b_mm * 1e-3,
                w.eps_r.unwrap_or(1.0),
                w.mu_r.unwrap_or(1.0),
            )
            .map_err(|e| format!("waveguide: {e}")),
            _ => Err("waveguide: give either preset or both a_mm and b_mm".into()),
        }
    }

    pub fn waveguide(&self) -> Result<Waveguide, ConfigError> {
        self.build_waveguide()
            .map_err(|e| ConfigError::Validation(vec![e]))
    }

    fn build_network_with(&self, wg: Waveguide) -> Result<Network, postmatch::Error> {
        let elements = self
            .elements
            .iter()
            .map(|el| match el {
                ElementSection::Post {
                    radius_mm,
                    d_mm,
                    h_mm,
                } => {
                    let h_m = match (d_mm, h_mm) {
                        (Some(d), None) => wg.a / 2.0 + d * 1e-3,
                        (None, Some(h)) => h * 1e-3,
                        _ => unreachable!("validated"),
                    };
                    PostJunction::new(wg, h_m, radius_mm * 1e-3).map(NetworkElement::Junction)
                }
                ElementSection::Guide { length_mm } => Ok(NetworkElement::UniformGuide {
                    length: length_mm * 1e-3,
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Network::new(wg, elements)
    }

    pub fn network(&self) -> Result<Network, ConfigError> {
        let wg = self.waveguide()?;
        self.build_network_with(wg)
            .map_err(|e| ConfigError::Validation(vec![e.to_string()]))
    }

    pub fn numerics(&self) -> Numerics {
        let mut num = Numerics::new(self.numerics.modes);
        if let (Some(k_d), Some(k_u), Some(k_c)) =
            (self.numerics.k_d, self.numerics.k_u, self.numerics.k_c)
        {
            num.disc = DiscPolicy::Explicit(Discretization::new(k_d, k_u, k_c).expect("validated"));
        } else if let Some(factor) = self.numerics.basis_factor {
            num.disc = DiscPolicy::Auto { factor };
        }
        if let Some(order) = self.numerics.quadrature_order {
            num.quadrature_order = order;
        }
        num
    }

    pub fn f_start_hz(&self) -> f64 {
        self.sweep.f_start_ghz * 1e9
    }

    pub fn f_stop_hz(&self) -> f64 {
        self.sweep.f_stop_ghz * 1e9
    }

    /// Post junctions of the network, in element order (for `validate`).
    pub fn junctions(&self) -> Result<Vec<PostJunction>, ConfigError> {
        let net = self.network()?;
        Ok(net
            .elements()
            .iter()
            .filter_map(|el| match el {
                NetworkElement::Junction(j) => Some(*j),
                _ => None,
            })
            .collect())
    }
}
