//! Bi-pole network geometry and propagation.
//!
//! A [`Network`] is a fixed set of transmitter/receiver pairs `(x_i, y_i)` in the
//! plane together with a path-loss law and the receiver noise power `W`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::rng_from_seed;

/// A point in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_squared(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

impl From<[f64; 2]> for Point {
    fn from(p: [f64; 2]) -> Self {
        Point::new(p[0], p[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Distance-dependent power attenuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum PathLossModel {
    /// `(kappa * d)^(-beta)`, singular at the origin.
    #[serde(rename = "singular")]
    SingularPowerLaw { kappa: f64, beta: f64 },
    /// `(1 + d)^(-beta)`, equal to one at the origin.
    #[serde(rename = "bounded")]
    BoundedPowerLaw { beta: f64 },
}

impl PathLossModel {
    pub fn singular(kappa: f64, beta: f64) -> Result<Self> {
        let m = PathLossModel::SingularPowerLaw { kappa, beta };
        m.validate()?;
        Ok(m)
    }

    pub fn bounded(beta: f64) -> Result<Self> {
        let m = PathLossModel::BoundedPowerLaw { beta };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("path-loss {name} must be positive and finite, got {v}")))
            }
        };
        match *self {
            PathLossModel::SingularPowerLaw { kappa, beta } => {
                positive("kappa", kappa)?;
                positive("beta", beta)
            }
            PathLossModel::BoundedPowerLaw { beta } => positive("beta", beta),
        }
    }

    pub fn beta(&self) -> f64 {
        match *self {
            PathLossModel::SingularPowerLaw { beta, .. } | PathLossModel::BoundedPowerLaw { beta } => {
                beta
            }
        }
    }

    /// Power gain at distance `d >= 0`. The singular law returns `+inf` at `d = 0`.
    pub fn gain(&self, d: f64) -> f64 {
        match *self {
            PathLossModel::SingularPowerLaw { kappa, beta } => (kappa * d).powf(-beta),
            PathLossModel::BoundedPowerLaw { beta } => (1.0 + d).powf(-beta),
        }
    }
}

/// Parameters recorded when a network was sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generation {
    pub window: f64,
    pub r_max: f64,
    pub seed: u64,
}

/// Fixed bi-pole configuration `{(x_i, y_i)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    transmitters: Vec<Point>,
    receivers: Vec<Point>,
    pathloss: PathLossModel,
    noise_power: f64,
    generation: Option<Generation>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    transmitters: Vec<Point>,
    receivers: Vec<Point>,
    pathloss: PathLossModel,
    noise: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    window: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl Network {
    pub fn new(
        transmitters: Vec<Point>,
        receivers: Vec<Point>,
        pathloss: PathLossModel,
        noise_power: f64,
    ) -> Result<Self> {
        if transmitters.is_empty() {
            return Err(invalid("network needs at least one transmitter/receiver pair"));
        }
        if transmitters.len() != receivers.len() {
            return Err(invalid(format!(
                "{} transmitters but {} receivers",
                transmitters.len(),
                receivers.len()
            )));
        }
        pathloss.validate()?;
        if !(noise_power.is_finite() && noise_power >= 0.0) {
            return Err(invalid(format!("noise power must be finite and >= 0, got {noise_power}")));
        }
        for (i, (x, y)) in transmitters.iter().zip(&receivers).enumerate() {
            if ![x.x, x.y, y.x, y.y].iter().all(|v| v.is_finite()) {
                return Err(invalid(format!("pair {i} has a non-finite coordinate")));
            }
            if x.distance(y) <= 0.0 {
                return Err(invalid(format!("pair {i} has zero link length")));
            }
        }
        Ok(Self { transmitters, receivers, pathloss, noise_power, generation: None })
    }

    pub fn len(&self) -> usize {
        self.transmitters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transmitters.is_empty()
    }

    pub fn transmitters(&self) -> &[Point] {
        &self.transmitters
    }

    pub fn receivers(&self) -> &[Point] {
        &self.receivers
    }

    pub fn pathloss(&self) -> PathLossModel {
        self.pathloss
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn generation(&self) -> Option<Generation> {
        self.generation
    }

    /// Same geometry with a different path-loss law.
    pub fn with_pathloss(mut self, pathloss: PathLossModel) -> Result<Self> {
        pathloss.validate()?;
        self.pathloss = pathloss;
        Ok(self)
    }

    /// Same geometry with a different noise power.
    pub fn with_noise(mut self, noise_power: f64) -> Result<Self> {
        if !(noise_power.is_finite() && noise_power >= 0.0) {
            return Err(invalid(format!("noise power must be finite and >= 0, got {noise_power}")));
        }
        self.noise_power = noise_power;
        Ok(self)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(invalid(format!("index {i} out of range for network of {} pairs", self.len())))
        }
    }

    /// Link length `|x_i - y_i|`.
    pub fn link_distance(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        Ok(self.transmitters[i].distance(&self.receivers[i]))
    }

    /// Distance from interferer `x_j` to receiver `y_i`.
    pub fn cross_distance(&self, j: usize, i: usize) -> Result<f64> {
        self.check_index(j)?;
        self.check_index(i)?;
        if j == i {
            return Err(invalid(format!("cross distance needs j != i (got {i} twice)")));
        }
        Ok(self.transmitters[j].distance(&self.receivers[i]))
    }

    /// Diagonal of the generation window, or of the bounding box of all points
    /// when the network was not sampled.
    pub fn window_diagonal(&self) -> f64 {
        if let Some(g) = self.generation {
            return g.window * std::f64::consts::SQRT_2;
        }
        let all = self.transmitters.iter().chain(&self.receivers);
        let (mut lo_x, mut lo_y, mut hi_x, mut hi_y) =
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in all {
            lo_x = lo_x.min(p.x);
            lo_y = lo_y.min(p.y);
            hi_x = hi_x.max(p.x);
            hi_y = hi_y.max(p.y);
        }
        (hi_x - lo_x).hypot(hi_y - lo_y)
    }

    pub fn to_json(&self) -> String {
        let file = NetworkFile {
            transmitters: self.transmitters.clone(),
            receivers: self.receivers.clone(),
            pathloss: self.pathloss,
            noise: self.noise_power,
            window: self.generation.map(|g| g.window),
            r_max: self.generation.map(|g| g.r_max),
            seed: self.generation.map(|g| g.seed),
        };
        serde_json::to_string_pretty(&file).expect("network serialization cannot fail")
    }

    /// Parses the network JSON schema. Points outside the recorded window are
    /// accepted with a warning.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile =
            serde_json::from_str(text).map_err(|e| invalid(format!("network JSON: {e}")))?;
        let mut net = Network::new(file.transmitters, file.receivers, file.pathloss, file.noise)?;
        if let (Some(window), Some(r_max), Some(seed)) = (file.window, file.r_max, file.seed) {
            net.generation = Some(Generation { window, r_max, seed });
            let outside = net
                .transmitters
                .iter()
                .chain(&net.receivers)
                .filter(|p| p.x < 0.0 || p.y < 0.0 || p.x > window || p.y > window)
                .count();
            if outside > 0 {
                log::warn!("{outside} point(s) lie outside the recorded window [0, {window}]^2");
            }
        }
        Ok(net)
    }
}

/// Samples a bi-pole network: `n` transmitters i.i.d. uniform in
/// `[0, window_side]^2`, each receiver uniform in the disc of radius `r_max`
/// around its transmitter.
///
/// Draw order per pair is `x, y, radius, angle`; the radius is `r_max * sqrt(U)`
/// with `U` uniform on `(0, 1]`, so links never have zero length.
pub fn generate_network(
    n: usize,
    window_side: f64,
    r_max: f64,
    pathloss: PathLossModel,
    noise: f64,
    seed: u64,
) -> Result<Network> {
    if n == 0 {
        return Err(invalid("n must be >= 1"));
    }
    if !(window_side.is_finite() && window_side > 0.0) {
        return Err(invalid(format!("window side must be positive, got {window_side}")));
    }
    if !(r_max.is_finite() && r_max > 0.0) {
        return Err(invalid(format!("r_max must be positive, got {r_max}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut transmitters = Vec::with_capacity(n);
    let mut receivers = Vec::with_capacity(n);
    for _ in 0..n {
        let x = Point::new(window_side * rng.random::<f64>(), window_side * rng.random::<f64>());
        let radius = r_max * (1.0 - rng.random::<f64>()).sqrt();
        let angle = std::f64::consts::TAU * rng.random::<f64>();
        transmitters.push(x);
        receivers.push(Point::new(x.x + radius * angle.cos(), x.y + radius * angle.sin()));
    }
    let mut net = Network::new(transmitters, receivers, pathloss, noise).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::NumericFailure(format!("degenerate draw: {m}")),
        other => other,
    })?;
    net.generation = Some(Generation { window: window_side, r_max, seed });
    Ok(net)
}
