//! Run configuration: a flat key-value text format, validation, and the
//! digest stamped into every output file.
//!
//! ```text
//! # lattice
//! d = 2
//! l = 16
//! j = 1.0
//! # protocol
//! gamma = 1.0
//! rho = 0.5
//! time = auto
//! initial = ground
//! # sampling
//! trajectories = 100
//! seed = 1
//! workers = 0
//! # observables
//! correlators = true
//! covariance = true
//! entropy-profile = false
//! # output
//! out = runs/demo
//! ```
//!
//! Unknown keys are rejected; omitted keys take the defaults above. `time =
//! auto` resolves to the steady-state heuristic of [`crate::trajectory`].

use sha2::{Digest, Sha256};
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::{build_spectrum, LatticeSpec, Spectrum};
use crate::trajectory::{steady_state_time, InitialState, Protocol};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub d: usize,
    pub l: usize,
    pub j: f64,
    pub gamma: f64,
    pub rho: f64,
    /// `None` = steady-state heuristic.
    pub time: Option<f64>,
    pub initial: InitialState,
    pub trajectories: u64,
    pub seed: u64,
    /// 0 = one worker per core.
    pub workers: usize,
    pub correlators: bool,
    pub covariance: bool,
    pub entropy_profile: bool,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            d: 2,
            l: 16,
            j: 1.0,
            gamma: 1.0,
            rho: 0.5,
            time: None,
            initial: InitialState::Ground,
            trajectories: 100,
            seed: 1,
            workers: 0,
            correlators: true,
            covariance: true,
            entropy_profile: false,
            out: PathBuf::from("runs/out"),
        }
    }
}

fn initial_state_name(initial: InitialState) -> &'static str {
    match initial {
        InitialState::Ground => "ground",
        InitialState::CoordinateBits => "coordinate-bits",
        InitialState::EigenBits => "eigen-bits",
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "d = {}", self.d)?;
        writeln!(f, "l = {}", self.l)?;
        writeln!(f, "j = {}", self.j)?;
        writeln!(f, "gamma = {}", self.gamma)?;
        writeln!(f, "rho = {}", self.rho)?;
        match self.time {
            Some(t) => writeln!(f, "time = {t}")?,
            None => writeln!(f, "time = auto")?,
        }
        writeln!(f, "initial = {}", initial_state_name(self.initial))?;
        writeln!(f, "trajectories = {}", self.trajectories)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "workers = {}", self.workers)?;
        writeln!(f, "correlators = {}", self.correlators)?;
        writeln!(f, "covariance = {}", self.covariance)?;
        writeln!(f, "entropy-profile = {}", self.entropy_profile)?;
        write!(f, "out = {}", self.out.display())
    }
}

impl RunConfig {
    /// Parse the flat key-value format. `#` starts a comment; keys may
    /// appear at most once.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("duplicate key `{key}`")));
            }
            let bad =
                |what: &str| Error::Config(format!("line {}: bad {what}: `{value}`", lineno + 1));
            match key {
                "d" => cfg.d = value.parse().map_err(|_| bad("dimension"))?,
                "l" => cfg.l = value.parse().map_err(|_| bad("size"))?,
                "j" => cfg.j = value.parse().map_err(|_| bad("hopping"))?,
                "gamma" => cfg.gamma = value.parse().map_err(|_| bad("rate"))?,
                "rho" => cfg.rho = value.parse().map_err(|_| bad("filling"))?,
                "time" => {
                    cfg.time = if value == "auto" {
                        None
                    } else {
                        Some(value.parse().map_err(|_| bad("time"))?)
                    }
                }
                "initial" => {
                    cfg.initial = match value {
                        "ground" => InitialState::Ground,
                        "coordinate-bits" => InitialState::CoordinateBits,
                        "eigen-bits" => InitialState::EigenBits,
                        _ => return Err(bad("initial state")),
                    }
                }
                "trajectories" => {
                    cfg.trajectories = value.parse().map_err(|_| bad("trajectory count"))?
                }
                "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
                "workers" => cfg.workers = value.parse().map_err(|_| bad("worker count"))?,
                "correlators" => cfg.correlators = parse_bool(value).ok_or_else(|| bad("flag"))?,
                "covariance" => cfg.covariance = parse_bool(value).ok_or_else(|| bad("flag"))?,
                "entropy-profile" => {
                    cfg.entropy_profile = parse_bool(value).ok_or_else(|| bad("flag"))?
                }
                "out" => cfg.out = PathBuf::from(value),
                _ => return Err(Error::Config(format!("unknown key `{key}`"))),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let lattice = self.lattice()?;
        if !(self.gamma >= 0.0) {
            return Err(Error::Config("gamma must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config("rho must be in [0, 1]".into()));
        }
        if let Some(t) = self.time {
            if !(t > 0.0) {
                return Err(Error::Config("time must be positive (or `auto`)".into()));
            }
        }
        if self.trajectories == 0 {
            return Err(Error::Config("need at least one trajectory".into()));
        }
        if self.covariance && self.l % 4 != 0 {
            return Err(Error::Config(
                "the covariance geometry (two L/4 strips) needs L divisible by 4".into(),
            ));
        }
        if self.entropy_profile && lattice.n_sites() > 4096 {
            return Err(Error::Config(
                "entropy profile is a dense-eigensolve observable; use L^d <= 4096".into(),
            ));
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(self.d, self.l, self.j)
    }

    /// Evolution time: explicit override or the steady-state heuristic.
    pub fn total_time(&self) -> Result<f64> {
        let lattice = self.lattice()?;
        Ok(self.time.unwrap_or_else(|| {
            steady_state_time(self.gamma, self.l, lattice.velocity_scales().1)
        }))
    }

    /// Canonical serialization of the result-determining fields (fixed key
    /// order). Worker count and output location steer execution, not
    /// physics, so they stay out of the digest: a run is reproducible from
    /// this string alone.
    pub fn canonical(&self) -> String {
        format!(
            "d = {}\nl = {}\nj = {}\ngamma = {}\nrho = {}\ntime = {}\ninitial = {}\ntrajectories = {}\nseed = {}\ncorrelators = {}\ncovariance = {}\nentropy-profile = {}",
            self.d,
            self.l,
            self.j,
            self.gamma,
            self.rho,
            self.time.map_or("auto".to_string(), |t| t.to_string()),
            initial_state_name(self.initial),
            self.trajectories,
            self.seed,
            self.correlators,
            self.covariance,
            self.entropy_profile,
        )
    }

    /// First 16 hex digits of the SHA-256 of the canonical form.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical().as_bytes());
        let mut out = String::with_capacity(16);
        for byte in &hash[..8] {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    pub fn protocol(&self, spectrum: Arc<Spectrum>) -> Result<Protocol> {
        Ok(Protocol {
            spectrum,
            gamma: self.gamma,
            rho: self.rho,
            total_time: self.total_time()?,
            initial: self.initial,
            record_outcomes: false,
            config_digest: self.digest(),
        })
    }

    pub fn build_spectrum(&self) -> Result<Arc<Spectrum>> {
        Ok(build_spectrum(&self.lattice()?))
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let cfg = RunConfig::default();
        let parsed = RunConfig::parse_str(&cfg.canonical()).unwrap();
        assert_eq!(cfg, parsed);
        assert_eq!(cfg.digest(), parsed.digest());
    }

    #[test]
    fn parses_partial_config_with_comments() {
        let cfg = RunConfig::parse_str(
            "# run\nl = 8\ngamma = 2.5  # near the transition\ntime = 12.5\n",
        )
        .unwrap();
        assert_eq!(cfg.l, 8);
        assert_eq!(cfg.gamma, 2.5);
        assert_eq!(cfg.time, Some(12.5));
        assert_eq!(cfg.d, 2); // default
    }

    #[test]
    fn rejects_garbage() {
        assert!(RunConfig::parse_str("l == 8").is_err());
        assert!(RunConfig::parse_str("unknown = 3").is_err());
        assert!(RunConfig::parse_str("l = eight").is_err());
        assert!(RunConfig::parse_str("l = 8\nl = 9").is_err());
        assert!(RunConfig::parse_str("initial = excited").is_err());
    }

    #[test]
    fn digest_tracks_physics_but_not_execution() {
        let base = RunConfig::default();
        let mut other = base.clone();
        other.gamma = 1.5;
        assert_ne!(base.digest(), other.digest());
        let mut other = base.clone();
        other.seed = 2;
        assert_ne!(base.digest(), other.digest());
        // worker count and output directory do not change results
        let mut other = base.clone();
        other.workers = 7;
        other.out = PathBuf::from("elsewhere");
        assert_eq!(base.digest(), other.digest());
    }

    #[test]
    fn validation_catches_bad_geometry() {
        let mut cfg = RunConfig::default();
        cfg.l = 10; // not divisible by 4 with covariance on
        assert!(cfg.validate().is_err());
        cfg.covariance = false;
        assert!(cfg.validate().is_ok());
        cfg.rho = 1.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn auto_time_uses_steady_state_heuristic() {
        let mut cfg = RunConfig::default();
        cfg.l = 16;
        cfg.gamma = 1.0;
        let t = cfg.total_time().unwrap();
        let expect = 4.0 * 16.0 / std::f64::consts::SQRT_2;
        assert!((t - expect).abs() < 1e-12);
        cfg.time = Some(7.0);
        assert_eq!(cfg.total_time().unwrap(), 7.0);
    }
}
