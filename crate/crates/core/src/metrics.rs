//! Closed-form covertness and reliability metrics.
//!
//! The warden (Willie) and the receiver (Bob) each activate their strongest
//! port, so the relevant gain is the maximum over correlated unit-mean
//! exponential port gains. Its CDF at `x` is the t copula evaluated at the
//! common marginal level `1 - exp(-x)`:
//!
//! ```text
//! P(max_n g_n <= x) = T_{nu, Sigma}(t_nu^{-1}(1 - e^{-x}), ..., t_nu^{-1}(1 - e^{-x}))
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_correlation_matrix_with, CorrelationKernel, PortGrid};
use crate::numerics::{mvt_cdf_pair, student_t_quantile, CopulaSpec, MetricValue, QmcSettings};

pub fn db_to_linear(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

/// dBm to milliwatts.
pub fn dbm_to_linear(x_dbm: f64) -> f64 {
    10f64.powf(x_dbm / 10.0)
}

/// dBm to watts.
pub fn dbm_to_watts(x_dbm: f64) -> f64 {
    10f64.powf((x_dbm - 30.0) / 10.0)
}

/// Powers and targets of the covert link, all on a linear scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinkBudget {
    /// Alice's transmit power.
    pub p_a: f64,
    /// Willie's noise power.
    pub sigma2_w: f64,
    /// Bob's noise power.
    pub sigma2_b: f64,
    /// Target rate in bits per channel use.
    pub r_b: f64,
    /// Margin above Willie's noise power used for the optimal threshold.
    pub mu: f64,
}

impl LinkBudget {
    pub fn new(p_a: f64, sigma2_w: f64, sigma2_b: f64, r_b: f64, mu: f64) -> Result<Self> {
        let link = Self { p_a, sigma2_w, sigma2_b, r_b, mu };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.p_a, self.sigma2_w, self.sigma2_b, self.r_b, self.mu]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invariant(format!("non-finite link parameter in {self:?}")));
        }
        if self.p_a <= 0.0 {
            return Err(Error::invariant(format!("transmit power must be positive, got {}", self.p_a)));
        }
        if self.mu <= 0.0 {
            return Err(Error::invariant(format!("threshold margin must be positive, got {}", self.mu)));
        }
        if self.sigma2_w < 0.0 || self.sigma2_b < 0.0 || self.r_b < 0.0 {
            return Err(Error::invariant("noise powers and target rate must be nonnegative"));
        }
        Ok(())
    }

    /// The evaluation setting used throughout: P_a = 20 dBm, noise 0 dB at
    /// the warden and -20 dB at the receiver, R_b = 0.5 bit, mu = 0.01.
    pub fn reference() -> Self {
        Self {
            p_a: dbm_to_watts(20.0),
            sigma2_w: db_to_linear(0.0),
            sigma2_b: db_to_linear(-20.0),
            r_b: 0.5,
            mu: 0.01,
        }
    }

    pub fn with_power(self, p_a: f64) -> Self {
        Self { p_a, ..self }
    }
}

/// How the copula dependence parameter is derived from the port correlation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dependence {
    /// Theta = rho (field correlation).
    #[default]
    FieldRho,
    /// Theta = rho^2 (correlation of the power gains).
    GainRhoSq,
}

/// Fluid-antenna configuration of one receiving node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NodeFas {
    pub grid: PortGrid,
    pub nu: f64,
    pub kernel: CorrelationKernel,
    pub dependence: Dependence,
}

impl NodeFas {
    pub fn new(grid: PortGrid, nu: f64) -> Result<Self> {
        let node = Self { grid, nu, kernel: CorrelationKernel::default(), dependence: Dependence::default() };
        node.validate()?;
        Ok(node)
    }

    /// 2x2 ports over a 1x1 wavelength aperture, nu = 40.
    pub fn reference() -> Self {
        Self {
            grid: PortGrid { n1: 2, n2: 2, w1: 1.0, w2: 1.0 },
            nu: 40.0,
            kernel: CorrelationKernel::default(),
            dependence: Dependence::default(),
        }
    }

    /// Fixed-position antenna: a single port.
    pub fn fpa(nu: f64) -> Self {
        Self { grid: PortGrid::single(), ..Self::reference() }.with_nu(nu)
    }

    fn with_nu(self, nu: f64) -> Self {
        Self { nu, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::invariant(format!("degrees of freedom must be positive, got {}", self.nu)));
        }
        Ok(())
    }

    pub fn port_count(&self) -> usize {
        self.grid.port_count()
    }

    pub fn copula(&self) -> Result<CopulaSpec> {
        self.validate()?;
        let field = build_correlation_matrix_with(&self.grid, self.kernel)?;
        let sigma = match self.dependence {
            Dependence::FieldRho => field,
            Dependence::GainRhoSq => field.squared()?,
        };
        CopulaSpec::new(self.nu, sigma)
    }

    /// P(max port gain <= x) under the t copula.
    pub fn max_gain_cdf(&self, x: f64, qmc: &QmcSettings) -> Result<MetricValue> {
        Ok(self.max_gain_cdf_pair(x, qmc)?.0)
    }

    /// P(max gain <= x) and P(max gain > x), the latter integrated directly.
    pub fn max_gain_cdf_pair(&self, x: f64, qmc: &QmcSettings) -> Result<(MetricValue, MetricValue)> {
        if x.is_nan() {
            return Err(Error::domain("NaN gain level"));
        }
        if x <= 0.0 {
            return Ok((MetricValue::exact(0.0), MetricValue::exact(1.0)));
        }
        // marginal level 1 - e^{-x}; the upper tail e^{-x} is exact, so use
        // it whenever it is the smaller side
        let tail = (-x).exp();
        let u = if tail < 0.5 {
            -student_t_quantile(tail, self.nu)?
        } else {
            student_t_quantile(-(-x).exp_m1(), self.nu)?
        };
        let spec = self.copula()?;
        mvt_cdf_pair(&vec![u; spec.dim()], &spec, qmc)
    }
}

/// Missed detection: the averaged received power stays at or below `zeta`
/// although Alice transmits.
pub fn miss_detection_prob(link: &LinkBudget, willie: &NodeFas, zeta: f64, qmc: &QmcSettings) -> Result<MetricValue> {
    check_zeta(zeta)?;
    if zeta <= link.sigma2_w {
        return Ok(MetricValue::exact(0.0));
    }
    willie.max_gain_cdf((zeta - link.sigma2_w) / link.p_a, qmc)
}

/// False alarm in the large-sample limit: noise alone reaches `zeta`.
pub fn false_alarm_prob(link: &LinkBudget, zeta: f64) -> f64 {
    if zeta <= link.sigma2_w {
        1.0
    } else {
        0.0
    }
}

/// Covertness outage: 1 - (P_FA + P_MD).
pub fn covert_outage_prob(link: &LinkBudget, willie: &NodeFas, zeta: f64, qmc: &QmcSettings) -> Result<MetricValue> {
    check_zeta(zeta)?;
    if zeta <= link.sigma2_w {
        return Ok(MetricValue::exact(0.0));
    }
    Ok(willie.max_gain_cdf_pair((zeta - link.sigma2_w) / link.p_a, qmc)?.1)
}

/// Threshold maximising the covertness outage: sigma_w^2 + mu.
pub fn optimal_threshold(link: &LinkBudget) -> f64 {
    link.sigma2_w + link.mu
}

/// Gain below which Bob's capacity misses the target rate:
/// (2^R_b - 1) * sigma_b^2 / P_a.
pub fn normalized_rate_threshold(link: &LinkBudget) -> f64 {
    (link.r_b * std::f64::consts::LN_2).exp_m1() * link.sigma2_b / link.p_a
}

pub fn outage_prob(link: &LinkBudget, bob: &NodeFas, qmc: &QmcSettings) -> Result<MetricValue> {
    bob.max_gain_cdf(normalized_rate_threshold(link), qmc)
}

/// Probability that a transmission is both missed by Willie at the optimal
/// threshold and decoded by Bob.
pub fn success_prob(link: &LinkBudget, bob: &NodeFas, willie: &NodeFas, qmc: &QmcSettings) -> Result<MetricValue> {
    let md = miss_detection_prob(link, willie, optimal_threshold(link), qmc)?;
    let decoded = bob.max_gain_cdf_pair(normalized_rate_threshold(link), qmc)?.1;
    Ok(md.product(decoded))
}

fn check_zeta(zeta: f64) -> Result<()> {
    if !zeta.is_finite() {
        return Err(Error::domain(format!("threshold must be finite, got {zeta}")));
    }
    Ok(())
}

/// All metrics at one operating point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CovertMetrics {
    pub zeta: f64,
    pub zeta_star: f64,
    pub p_md: MetricValue,
    pub p_fa: f64,
    pub cop: MetricValue,
    pub p_out: MetricValue,
    pub p_suc: MetricValue,
}

pub fn evaluate(link: &LinkBudget, bob: &NodeFas, willie: &NodeFas, zeta: f64, qmc: &QmcSettings) -> Result<CovertMetrics> {
    link.validate()?;
    check_zeta(zeta)?;
    let p_fa = false_alarm_prob(link, zeta);
    let (p_md, cop) = if p_fa == 1.0 {
        (MetricValue::exact(0.0), MetricValue::exact(0.0))
    } else {
        willie.max_gain_cdf_pair((zeta - link.sigma2_w) / link.p_a, qmc)?
    };
    let zeta_star = optimal_threshold(link);
    let md_star = if zeta == zeta_star { p_md } else { miss_detection_prob(link, willie, zeta_star, qmc)? };
    let (p_out, decoded) = bob.max_gain_cdf_pair(normalized_rate_threshold(link), qmc)?;
    Ok(CovertMetrics { zeta, zeta_star, p_md, p_fa, cop, p_out, p_suc: md_star.product(decoded) })
}
