//! Run configuration: one flat key set shared by config files, environment
//! overrides, and command-line flags, plus builders for the module configs
//! derived from it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dynamic::DdhConfig;
use crate::em::{EmConfig, MrfParams, ReflectancePrior};
use crate::error::{Error, Result};
use crate::forward::PropagationOperator;
use crate::grid::ApertureMask;
use crate::turbulence::TurbulenceConfig;

/// Environment variables with this prefix override config-file values.
pub const ENV_PREFIX: &str = "DHWFS_";

/// Reflectance prior selector as spelled in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorChoice {
    None,
    Mrf,
}

impl std::fmt::Display for PriorChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PriorChoice::None => "none",
            PriorChoice::Mrf => "mrf",
        })
    }
}

impl std::str::FromStr for PriorChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(PriorChoice::None),
            "mrf" => Ok(PriorChoice::Mrf),
            other => Err(Error::config(
                "prior",
                format!("expected `none` or `mrf`, got {other:?}"),
            )),
        }
    }
}

/// Every knob of the simulate/reconstruct pipeline with its default.
///
/// Precedence when layering sources: defaults, then config file, then
/// environment (`DHWFS_*`), then command-line flags. Unknown keys are hard
/// errors at every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub fs: f64,
    pub fg: f64,
    pub d_over_r0: f64,
    pub snr_db: f64,
    pub wavelength: f64,
    pub flow_direction: [f64; 2],
    pub frames: u32,
    pub seed: u64,
    pub seeds: u32,
    pub aperture_diameter_px: Option<f64>,
    pub screen_oversize: usize,
    pub outer_scale_px: Option<f64>,
    pub curvature: f64,
    pub scene_background: f64,
    pub scene_foreground: f64,
    pub scene_path: Option<PathBuf>,
    pub lambda: f64,
    pub alpha: f64,
    pub nk: u32,
    pub noise_variance: Option<f64>,
    pub r_min: f64,
    pub prior: PriorChoice,
    pub mrf_p: f64,
    pub mrf_sigma_x: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            n: 256,
            fs: 10_000.0,
            fg: 100.0,
            d_over_r0: 10.0,
            snr_db: 10.0,
            wavelength: 1.064e-6,
            flow_direction: [inv_sqrt2, inv_sqrt2],
            frames: 300,
            seed: 1,
            seeds: 10,
            aperture_diameter_px: None,
            screen_oversize: 2,
            outer_scale_px: None,
            curvature: 0.0,
            scene_background: 1e-4,
            scene_foreground: 1.0,
            scene_path: None,
            lambda: 0.45,
            alpha: 0.025,
            nk: 1,
            noise_variance: None,
            r_min: 1e-4,
            prior: PriorChoice::None,
            mrf_p: 2.0,
            mrf_sigma_x: 1.0,
        }
    }
}

fn parse_num<T: std::str::FromStr>(field: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(field, format!("cannot parse {value:?}")))
}

fn parse_optional<T: std::str::FromStr>(field: &str, value: &str) -> Result<Option<T>> {
    if value.trim() == "none" {
        Ok(None)
    } else {
        parse_num(field, value).map(Some)
    }
}

impl RunConfig {
    /// Set one field from its textual key. All layering sources funnel
    /// through here so they agree on names, parsing, and typo rejection.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n = parse_num(key, value)?,
            "fs" => self.fs = parse_num(key, value)?,
            "fg" => self.fg = parse_num(key, value)?,
            "d_over_r0" => self.d_over_r0 = parse_num(key, value)?,
            "snr_db" => self.snr_db = parse_num(key, value)?,
            "wavelength" => self.wavelength = parse_num(key, value)?,
            "flow_direction" => self.flow_direction = parse_direction(value)?,
            "frames" => self.frames = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "seeds" => self.seeds = parse_num(key, value)?,
            "aperture_diameter_px" => self.aperture_diameter_px = parse_optional(key, value)?,
            "screen_oversize" => self.screen_oversize = parse_num(key, value)?,
            "outer_scale_px" => self.outer_scale_px = parse_optional(key, value)?,
            "curvature" => self.curvature = parse_num(key, value)?,
            "scene_background" => self.scene_background = parse_num(key, value)?,
            "scene_foreground" => self.scene_foreground = parse_num(key, value)?,
            "scene_path" => {
                let v = value.trim();
                self.scene_path = if v == "none" {
                    None
                } else {
                    Some(PathBuf::from(v))
                };
            }
            "lambda" => self.lambda = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "nk" => self.nk = parse_num(key, value)?,
            "noise_variance" => self.noise_variance = parse_optional(key, value)?,
            "r_min" => self.r_min = parse_num(key, value)?,
            "prior" => self.prior = value.parse()?,
            "mrf_p" => self.mrf_p = parse_num(key, value)?,
            "mrf_sigma_x" => self.mrf_sigma_x = parse_num(key, value)?,
            other => {
                return Err(Error::config(other, "unknown config key"));
            }
        }
        Ok(())
    }

    /// Apply a plain-text config file of `key = value` lines. `#` starts a
    /// comment line; blank lines are skipped.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(
                    "file",
                    format!("{}:{}: expected `key = value`", path.display(), idx + 1),
                ));
            };
            self.set_key(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Apply environment-style overrides: pairs whose name starts with
    /// [`ENV_PREFIX`] map to the lowercased key suffix. Unknown suffixes are
    /// rejected like any other unknown key.
    pub fn apply_env_pairs<I, K, V>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (name, value) in vars {
            let name = name.as_ref();
            if let Some(suffix) = name.strip_prefix(ENV_PREFIX) {
                self.set_key(&suffix.to_ascii_lowercase(), value.as_ref())?;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n % 2 != 0 {
            return Err(Error::config("n", format!("need even n >= 2, got {}", self.n)));
        }
        if !(self.fs > 0.0) {
            return Err(Error::config("fs", "must be > 0"));
        }
        if !(self.fg >= 0.0) {
            return Err(Error::config("fg", "must be >= 0"));
        }
        if !(self.d_over_r0 > 0.0) {
            return Err(Error::config("d_over_r0", "must be > 0"));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::config("snr_db", "must be finite"));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::config("wavelength", "must be > 0"));
        }
        if self.screen_oversize < 2 {
            return Err(Error::config("screen_oversize", "must be >= 2"));
        }
        if let Some(d) = self.aperture_diameter_px {
            if !(d > 0.0 && d <= self.n as f64) {
                return Err(Error::config(
                    "aperture_diameter_px",
                    format!("need 0 < d <= n, got {d}"),
                ));
            }
        }
        if let Some(l0) = self.outer_scale_px {
            if !(l0 > 0.0) {
                return Err(Error::config("outer_scale_px", "must be > 0"));
            }
        }
        if !self.curvature.is_finite() {
            return Err(Error::config("curvature", "must be finite"));
        }
        if !(self.r_min > 0.0) {
            return Err(Error::config("r_min", "must be > 0"));
        }
        if self.scene_path.is_none()
            && !(self.r_min <= self.scene_background
                && self.scene_background < self.scene_foreground
                && self.scene_foreground <= 1.0)
        {
            return Err(Error::config(
                "scene_background",
                "need r_min <= background < foreground <= 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::config("lambda", "must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("alpha", "must be in [0, 1]"));
        }
        if self.nk == 0 {
            return Err(Error::config("nk", "must be >= 1"));
        }
        if let Some(v) = self.noise_variance {
            if !(v > 0.0) {
                return Err(Error::config("noise_variance", "must be > 0"));
            }
        }
        if self.seeds == 0 {
            return Err(Error::config("seeds", "must be >= 1"));
        }
        if !(self.mrf_p >= 1.0 && self.mrf_p <= 2.0) {
            return Err(Error::config("mrf_p", "must be in [1, 2]"));
        }
        if !(self.mrf_sigma_x > 0.0) {
            return Err(Error::config("mrf_sigma_x", "must be > 0"));
        }
        let norm = self.flow_direction[0].hypot(self.flow_direction[1]);
        if !((norm - 1.0).abs() < 1e-9) {
            return Err(Error::config("flow_direction", "must be a unit vector"));
        }
        Ok(())
    }

    /// Aperture diameter in pixels, defaulting to the full grid width.
    pub fn aperture_diameter(&self) -> f64 {
        self.aperture_diameter_px.unwrap_or(self.n as f64)
    }

    /// Reconstruction-side noise variance. The default assumes normalized
    /// frames with unit per-pixel power split between signal and noise:
    /// sigma_w^2 = 1 / (1 + 10^(snr_db/10)), i.e. 1/11 at 10 dB.
    pub fn resolved_noise_variance(&self) -> f64 {
        self.noise_variance
            .unwrap_or_else(|| 1.0 / (1.0 + 10f64.powf(self.snr_db / 10.0)))
    }

    pub fn turbulence_config(&self) -> TurbulenceConfig {
        let mut cfg = TurbulenceConfig::new(self.n, self.d_over_r0, self.fs, self.fg);
        cfg.flow_direction = self.flow_direction;
        cfg.screen_oversize = self.screen_oversize;
        cfg.diameter_px = self.aperture_diameter();
        if let Some(l0) = self.outer_scale_px {
            cfg.outer_scale_px = l0;
        }
        cfg
    }

    pub fn aperture(&self) -> Result<ApertureMask> {
        ApertureMask::circular(self.n, self.aperture_diameter())
    }

    pub fn propagation_operator(&self) -> Result<PropagationOperator> {
        Ok(PropagationOperator::new(
            self.aperture()?,
            self.curvature,
            self.wavelength,
        ))
    }

    pub fn em_config(&self) -> Result<EmConfig> {
        let mut em = EmConfig::new(self.resolved_noise_variance(), self.r_min, self.aperture()?)?;
        em.prior = match self.prior {
            PriorChoice::None => ReflectancePrior::None,
            PriorChoice::Mrf => ReflectancePrior::Mrf(MrfParams {
                p: self.mrf_p,
                sigma_x: self.mrf_sigma_x,
            }),
        };
        Ok(em)
    }

    pub fn ddh_config(&self) -> Result<DdhConfig> {
        DdhConfig::new(self.lambda, self.alpha, self.nk, self.em_config()?)
    }

    /// Render the fully resolved configuration as `key = value` lines. The
    /// output parses back through [`RunConfig::apply_file`] to an equivalent
    /// config, and is what run manifests contain.
    pub fn manifest_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# resolved run configuration");
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "fs = {}", self.fs);
        let _ = writeln!(out, "fg = {}", self.fg);
        let _ = writeln!(out, "d_over_r0 = {}", self.d_over_r0);
        let _ = writeln!(out, "snr_db = {}", self.snr_db);
        let _ = writeln!(out, "wavelength = {}", self.wavelength);
        let _ = writeln!(
            out,
            "flow_direction = {},{}",
            self.flow_direction[0], self.flow_direction[1]
        );
        let _ = writeln!(out, "frames = {}", self.frames);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "seeds = {}", self.seeds);
        let _ = writeln!(out, "aperture_diameter_px = {}", self.aperture_diameter());
        let _ = writeln!(out, "screen_oversize = {}", self.screen_oversize);
        let _ = writeln!(
            out,
            "outer_scale_px = {}",
            self.turbulence_config().outer_scale_px
        );
        let _ = writeln!(out, "curvature = {}", self.curvature);
        let _ = writeln!(out, "scene_background = {}", self.scene_background);
        let _ = writeln!(out, "scene_foreground = {}", self.scene_foreground);
        let _ = writeln!(
            out,
            "scene_path = {}",
            self.scene_path
                .as_deref()
                .map_or_else(|| "none".to_string(), |p| p.display().to_string())
        );
        let _ = writeln!(out, "lambda = {}", self.lambda);
        let _ = writeln!(out, "alpha = {}", self.alpha);
        let _ = writeln!(out, "nk = {}", self.nk);
        let _ = writeln!(out, "noise_variance = {}", self.resolved_noise_variance());
        let _ = writeln!(out, "r_min = {}", self.r_min);
        let _ = writeln!(out, "prior = {}", self.prior);
        let _ = writeln!(out, "mrf_p = {}", self.mrf_p);
        let _ = writeln!(out, "mrf_sigma_x = {}", self.mrf_sigma_x);
        out
    }
}

fn parse_direction(value: &str) -> Result<[f64; 2]> {
    let Some((a, b)) = value.split_once(',') else {
        return Err(Error::config(
            "flow_direction",
            format!("expected `x,y`, got {value:?}"),
        ));
    };
    let x: f64 = parse_num("flow_direction", a)?;
    let y: f64 = parse_num("flow_direction", b)?;
    let norm = x.hypot(y);
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::config(
            "flow_direction",
            "direction vector must be nonzero and finite",
        ));
    }
    // Keep already-unit vectors bit-exact so manifests re-parse unchanged.
    if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
        return Ok([x, y]);
    }
    Ok([x / norm, y / norm])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_resolve() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.n, 256);
        assert_eq!(cfg.fs, 10_000.0);
        assert_eq!(cfg.fg, 100.0);
        assert_eq!(cfg.d_over_r0, 10.0);
        assert_eq!(cfg.snr_db, 10.0);
        assert_eq!(cfg.wavelength, 1.064e-6);
        assert_eq!(cfg.frames, 300);
        assert_eq!(cfg.lambda, 0.45);
        assert_eq!(cfg.alpha, 0.025);
        assert_eq!(cfg.nk, 1);
        assert!((cfg.resolved_noise_variance() - 1.0 / 11.0).abs() < 1e-15);
        assert_eq!(cfg.aperture_diameter(), 256.0);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let mut cfg = RunConfig::default();
        let err = cfg.set_key("lamda", "0.5").unwrap_err();
        assert_eq!(err.category(), "config");
        assert!(err.to_string().contains("lamda"));
    }

    #[test]
    fn file_layer_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(
            &path,
            "# comment\nn = 64\nlambda = 0.3\nflow_direction = 1,0\nscene_path = none\n",
        )
        .unwrap();
        let mut cfg = RunConfig::default();
        cfg.apply_file(&path).unwrap();
        assert_eq!(cfg.n, 64);
        assert_eq!(cfg.lambda, 0.3);
        assert_eq!(cfg.flow_direction, [1.0, 0.0]);
        assert_eq!(cfg.scene_path, None);
    }

    #[test]
    fn malformed_file_line_reports_location() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        std::fs::write(&path, "n 64\n").unwrap();
        let err = RunConfig::default().apply_file(&path).unwrap_err();
        assert!(err.to_string().contains(":1:"), "{err}");
    }

    #[test]
    fn env_pairs_override_and_reject_unknown() {
        let mut cfg = RunConfig::default();
        cfg.apply_env_pairs([("DHWFS_NK", "4"), ("UNRELATED", "x")])
            .unwrap();
        assert_eq!(cfg.nk, 4);
        let err = cfg
            .apply_env_pairs([("DHWFS_NOT_A_KEY", "1")])
            .unwrap_err();
        assert_eq!(err.category(), "config");
    }

    #[test]
    fn direction_is_normalized() {
        let mut cfg = RunConfig::default();
        cfg.set_key("flow_direction", "3,4").unwrap();
        assert!((cfg.flow_direction[0] - 0.6).abs() < 1e-15);
        assert!((cfg.flow_direction[1] - 0.8).abs() < 1e-15);
        assert!(cfg.set_key("flow_direction", "0,0").is_err());
    }

    #[test]
    fn manifest_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set_key("nk", "2").unwrap();
        cfg.set_key("noise_variance", "0.125").unwrap();
        let manifest = cfg.manifest_string();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        std::fs::write(&path, &manifest).unwrap();
        let mut back = RunConfig::default();
        back.apply_file(&path).unwrap();
        assert_eq!(back.nk, 2);
        assert_eq!(back.noise_variance, Some(0.125));
        assert_eq!(back.n, cfg.n);
        assert_eq!(back.lambda, cfg.lambda);
        assert_eq!(
            back.resolved_noise_variance(),
            cfg.resolved_noise_variance()
        );
        assert_eq!(back.manifest_string(), manifest);
    }

    #[test]
    fn validation_rejects_out_of_range() {
        let mut cfg = RunConfig::default();
        cfg.lambda = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.nk = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.n = 255;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.aperture_diameter_px = Some(300.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn derived_configs_use_resolved_values() {
        let mut cfg = RunConfig::default();
        cfg.set_key("n", "64").unwrap();
        cfg.set_key("prior", "mrf").unwrap();
        cfg.set_key("mrf_p", "1.5").unwrap();
        let tcfg = cfg.turbulence_config();
        assert_eq!(tcfg.m(), 128);
        assert!(tcfg.outer_scale_px.is_infinite());
        assert_eq!(tcfg.diameter_px, 64.0);
        let em = cfg.em_config().unwrap();
        match em.prior {
            ReflectancePrior::Mrf(p) => assert_eq!(p.p, 1.5),
            ReflectancePrior::None => panic!("expected mrf prior"),
        }
        let ddh = cfg.ddh_config().unwrap();
        assert_eq!(ddh.nk, 1);
    }
}
