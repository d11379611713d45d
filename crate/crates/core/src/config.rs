//! TOML configuration and built-in presets.
//!
//! ```toml
//! [link]
//! p_a_dbm = 20.0       # transmit power, dBm
//! sigma2_w_db = 0.0    # warden noise power, dB
//! sigma2_b_db = -20.0  # receiver noise power, dB
//! r_b = 0.5            # target rate, bits
//! mu = 0.01            # threshold margin (linear)
//! # zeta = 1.5         # evaluation threshold (linear); defaults to sigma_w^2 + mu
//!
//! [bob]                # also [willie]
//! n1 = 2
//! n2 = 2
//! w1 = 1.0             # wavelengths
//! w2 = 1.0
//! nu = 40.0
//! kernel = "jakes_j0"          # or "spherical_sinc"
//! dependence = "field_rho"     # or "gain_rho_sq"
//!
//! [sweep]
//! axis = "p_a_dbm"     # zeta | p_a_dbm | n_ports_w | n_ports_b | w_aperture
//! start = 0.0
//! stop = 40.0
//! points = 41
//! [[sweep.scenarios]]
//! name = "bob-up"
//! bob = { n1 = 3, n2 = 3, w1 = 2.0, w2 = 2.0 }
//!
//! [mc]
//! trials = 1000000
//! seed = 0
//! symbols_per_slot = 1000
//!
//! [qmc]
//! target_abs_error = 1e-4
//! max_points = 1048576
//! shifts = 12
//! seed = 0
//! ```
//!
//! dB values are converted with 10^(x/10) and dBm values with
//! 10^((x-30)/10), so every power ends up in watts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CorrelationKernel, PortGrid};
use crate::metrics::{db_to_linear, dbm_to_watts, optimal_threshold, Dependence, LinkBudget, NodeFas};
use crate::numerics::QmcSettings;
use crate::oracle::McSettings;

/// Reference operating point with the transmit-power sweep and its
/// receiver/warden scenarios.
pub const PRESET_PAPER_SEC4: &str = include_str!("presets/paper-sec4.toml");
/// Reference operating point with the threshold sweep (FAS vs FPA, two powers).
pub const PRESET_PAPER_SEC4_COP: &str = include_str!("presets/paper-sec4-cop.toml");

pub fn preset(name: &str) -> Result<&'static str> {
    match name {
        "paper-sec4" => Ok(PRESET_PAPER_SEC4),
        "paper-sec4-cop" => Ok(PRESET_PAPER_SEC4_COP),
        other => Err(Error::Config(format!(
            "unknown preset `{other}` (available: paper-sec4, paper-sec4-cop)"
        ))),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub link: LinkSection,
    pub bob: NodeSection,
    pub willie: NodeSection,
    pub sweep: Option<SweepSpec>,
    pub mc: McSettings,
    pub qmc: QmcSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub p_a_dbm: f64,
    pub sigma2_w_db: f64,
    pub sigma2_b_db: f64,
    pub r_b: f64,
    pub mu: f64,
    pub zeta: Option<f64>,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self { p_a_dbm: 20.0, sigma2_w_db: 0.0, sigma2_b_db: -20.0, r_b: 0.5, mu: 0.01, zeta: None }
    }
}

impl LinkSection {
    pub fn to_link(&self) -> Result<LinkBudget> {
        LinkBudget::new(
            dbm_to_watts(self.p_a_dbm),
            db_to_linear(self.sigma2_w_db),
            db_to_linear(self.sigma2_b_db),
            self.r_b,
            self.mu,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodeSection {
    pub n1: usize,
    pub n2: usize,
    pub w1: f64,
    pub w2: f64,
    pub nu: f64,
    pub kernel: CorrelationKernel,
    pub dependence: Dependence,
}

impl Default for NodeSection {
    fn default() -> Self {
        Self {
            n1: 2,
            n2: 2,
            w1: 1.0,
            w2: 1.0,
            nu: 40.0,
            kernel: CorrelationKernel::default(),
            dependence: Dependence::default(),
        }
    }
}

impl NodeSection {
    pub fn to_node(&self) -> Result<NodeFas> {
        let node = NodeFas {
            grid: PortGrid { n1: self.n1, n2: self.n2, w1: self.w1, w2: self.w2 },
            nu: self.nu,
            kernel: self.kernel,
            dependence: self.dependence,
        };
        node.validate()?;
        Ok(node)
    }

    fn apply(&mut self, o: &NodeOverride) {
        if let Some(v) = o.n1 {
            self.n1 = v;
        }
        if let Some(v) = o.n2 {
            self.n2 = v;
        }
        if let Some(v) = o.w1 {
            self.w1 = v;
        }
        if let Some(v) = o.w2 {
            self.w2 = v;
        }
        if let Some(v) = o.nu {
            self.nu = v;
        }
        if let Some(v) = o.kernel {
            self.kernel = v;
        }
        if let Some(v) = o.dependence {
            self.dependence = v;
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeOverride {
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub w1: Option<f64>,
    pub w2: Option<f64>,
    pub nu: Option<f64>,
    pub kernel: Option<CorrelationKernel>,
    pub dependence: Option<Dependence>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Detection threshold, linear power.
    Zeta,
    PADbm,
    /// Ports per side of a square warden grid.
    NPortsW,
    /// Ports per side of a square receiver grid.
    NPortsB,
    /// Aperture side (wavelengths) of both nodes.
    WAperture,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Zeta => "zeta",
            SweepAxis::PADbm => "p_a_dbm",
            SweepAxis::NPortsW => "n_ports_w",
            SweepAxis::NPortsB => "n_ports_b",
            SweepAxis::WAperture => "w_aperture",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    /// Missing means a single `base` scenario; an empty list yields no rows.
    pub scenarios: Option<Vec<Scenario>>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.start < self.stop) {
            return Err(Error::invariant(format!(
                "sweep.start ({}) must be below sweep.stop ({})",
                self.start, self.stop
            )));
        }
        if self.points < 2 {
            return Err(Error::invariant("sweep.points must be at least 2"));
        }
        Ok(())
    }

    /// Evenly spaced axis values, endpoints included.
    pub fn values(&self) -> Vec<f64> {
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| if i + 1 == self.points { self.stop } else { self.start + step * i as f64 })
            .collect()
    }

    pub fn scenarios(&self) -> Vec<Scenario> {
        self.scenarios.clone().unwrap_or_else(|| vec![Scenario { name: "base".into(), ..Default::default() }])
    }
}

/// Named overrides applied on top of the base configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub p_a_dbm: Option<f64>,
    pub bob: Option<NodeOverride>,
    pub willie: Option<NodeOverride>,
}

/// Fully resolved model inputs for one evaluation.
#[derive(Clone, Copy, Debug)]
pub struct Resolved {
    pub link: LinkBudget,
    pub bob: NodeFas,
    pub willie: NodeFas,
    pub zeta: f64,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `path` on top of an optional preset; keys in the file win.
    pub fn load(path: Option<&Path>, preset_name: Option<&str>) -> Result<Self> {
        let mut table = match preset_name {
            Some(name) => preset(name)?.parse::<toml::Table>().map_err(|e| Error::Config(e.to_string()))?,
            None => toml::Table::new(),
        };
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            let anchored = |e: toml::de::Error| Error::Config(format!("{}: {e}", path.display()));
            // typed parse of the file alone keeps line numbers in error messages
            toml::from_str::<Config>(&text).map_err(anchored)?;
            let user = text.parse::<toml::Table>().map_err(anchored)?;
            merge(&mut table, user);
        }
        let cfg: Config = toml::Table::try_into(table).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.link.to_link()?;
        self.bob.to_node()?;
        self.willie.to_node()?;
        self.mc.validate()?;
        self.qmc.validate()?;
        if let Some(z) = self.link.zeta {
            if !z.is_finite() {
                return Err(Error::invariant("link.zeta must be finite"));
            }
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
            for sc in s.scenarios() {
                self.resolve(Some(&sc), None)?;
            }
        }
        Ok(())
    }

    /// Applies a scenario and a sweep-axis value to the base configuration.
    pub fn resolve(&self, scenario: Option<&Scenario>, axis: Option<(SweepAxis, f64)>) -> Result<Resolved> {
        let mut link = self.link.clone();
        let mut bob = self.bob.clone();
        let mut willie = self.willie.clone();
        if let Some(sc) = scenario {
            if let Some(p) = sc.p_a_dbm {
                link.p_a_dbm = p;
            }
            if let Some(o) = &sc.bob {
                bob.apply(o);
            }
            if let Some(o) = &sc.willie {
                willie.apply(o);
            }
        }
        let mut zeta = link.zeta;
        match axis {
            Some((SweepAxis::Zeta, v)) => zeta = Some(v),
            Some((SweepAxis::PADbm, v)) => link.p_a_dbm = v,
            Some((SweepAxis::NPortsW, v)) => {
                let n = ports_per_side(v)?;
                willie.n1 = n;
                willie.n2 = n;
            }
            Some((SweepAxis::NPortsB, v)) => {
                let n = ports_per_side(v)?;
                bob.n1 = n;
                bob.n2 = n;
            }
            Some((SweepAxis::WAperture, v)) => {
                for node in [&mut bob, &mut willie] {
                    node.w1 = v;
                    node.w2 = v;
                }
            }
            None => {}
        }
        let link_budget = link.to_link()?;
        Ok(Resolved {
            link: link_budget,
            bob: bob.to_node()?,
            willie: willie.to_node()?,
            zeta: zeta.unwrap_or_else(|| optimal_threshold(&link_budget)),
        })
    }
}

fn ports_per_side(v: f64) -> Result<usize> {
    let n = v.round();
    if !(n >= 1.0) {
        return Err(Error::invariant(format!("port count axis value {v} rounds below 1")));
    }
    Ok(n as usize)
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_to_reference_link() {
        let cfg = Config::from_toml("").unwrap();
        let r = cfg.resolve(None, None).unwrap();
        let reference = LinkBudget::reference();
        assert!((r.link.p_a - reference.p_a).abs() < 1e-15);
        assert_eq!(r.link.sigma2_w, 1.0);
        assert!((r.link.sigma2_b - 0.01).abs() < 1e-15);
        assert!((r.zeta - 1.01).abs() < 1e-15);
        assert_eq!(r.willie.port_count(), 4);
    }

    #[test]
    fn presets_parse() {
        for name in ["paper-sec4", "paper-sec4-cop"] {
            let cfg = Config::load(None, Some(name)).unwrap();
            assert!(cfg.sweep.is_some());
        }
        assert!(matches!(Config::load(None, Some("nope")), Err(Error::Config(_))));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = Config::from_toml("[link]\np_a_dbm = 20.0\nmu = \"x\"\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert_eq!(err.exit_code(), 2);
        assert!(Config::from_toml("[link]\nbogus = 1\n").is_err());
    }

    #[test]
    fn invariant_violations() {
        let err = Config::from_toml("[link]\nmu = -1.0\n").unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let err = Config::from_toml("[willie]\nn1 = 0\n").unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let err = Config::from_toml("[sweep]\naxis = \"zeta\"\nstart = 2.0\nstop = 1.0\npoints = 5\n").unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn scenario_and_axis_overrides() {
        let cfg = Config::from_toml(
            "[sweep]\naxis = \"n_ports_w\"\nstart = 1\nstop = 3\npoints = 3\n\
             [[sweep.scenarios]]\nname = \"x\"\np_a_dbm = 25.0\nbob = { n1 = 3 }\n",
        )
        .unwrap();
        let sweep = cfg.sweep.clone().unwrap();
        let sc = &sweep.scenarios()[0];
        let r = cfg.resolve(Some(sc), Some((SweepAxis::NPortsW, 3.0))).unwrap();
        assert_eq!(r.willie.port_count(), 9);
        assert_eq!(r.bob.grid.n1, 3);
        assert_eq!(r.bob.grid.n2, 2);
        assert!((r.link.p_a - dbm_to_watts(25.0)).abs() < 1e-15);
        assert_eq!(sweep.values(), vec![1.0, 2.0, 3.0]);
    }
}
