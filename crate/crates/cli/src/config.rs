//! Flat key-value experiment configuration with sections, plus the run
//! manifest that makes every experiment reproducible bit-for-bit.

use anyhow::{anyhow, bail, Context, Result};
use std::path::{Path, PathBuf};
use vortex_channel::optics::GridSpec;
use vortex_channel::tomography::NoiseModel;

/// All knobs of an experiment run. Physical quantities are SI.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub name: String,
    /// Samples per grid side.
    pub grid_n: usize,
    /// Field of view in units of w0 (grid extent = fov_waists·w0).
    pub fov_waists: f64,
    pub wavelength: f64,
    pub w0: f64,
    pub ell: u32,
    pub path_length: f64,
    pub sr_targets: Vec<f64>,
    pub realizations: usize,
    pub master_seed: u64,
    pub noise: Option<NoiseModel>,
    pub out_dir: PathBuf,
    pub threshold_frac: f64,
    pub linearity_points: usize,
    pub per_slot_redraw: bool,
    pub image: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Sensible defaults per experiment; the SR target list follows the
    /// figures each experiment reproduces.
    pub fn defaults_for(name: &str) -> Self {
        let sr_targets = match name {
            "sweep-sr" => vec![0.3, 0.4, 0.5, 0.7, 0.85, 1.0],
            "linearity" => vec![1.0, 0.7, 0.45],
            "crosstalk" => vec![1.0, 0.7, 0.5, 0.4, 0.3],
            "calibrate" => vec![0.3, 0.5, 0.7, 0.9],
            "transmit" => vec![0.3],
            _ => vec![0.7],
        };
        Self {
            name: name.to_string(),
            grid_n: 256,
            fov_waists: 16.0,
            wavelength: 633e-9,
            w0: 1e-2,
            ell: 1,
            path_length: 1000.0,
            sr_targets,
            realizations: 100,
            master_seed: 1,
            noise: None,
            out_dir: PathBuf::from("out"),
            threshold_frac: 0.15,
            linearity_points: 9,
            per_slot_redraw: false,
            image: None,
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let pitch = self.fov_waists * self.w0 / self.grid_n as f64;
        GridSpec::new(self.grid_n, pitch, self.wavelength).map_err(|e| anyhow!("invalid grid: {e}"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations < 1 {
            bail!("realizations must be ≥ 1");
        }
        for &sr in &self.sr_targets {
            if !(sr > 0.0 && sr <= 1.0) {
                bail!("SR target {sr} outside (0, 1]");
            }
        }
        if self.sr_targets.is_empty() {
            bail!("need at least one SR target");
        }
        self.grid()?;
        Ok(())
    }

    /// Parse the sectioned key = value format. Unknown sections or keys are
    /// rejected so manifests stay authoritative; `[meta]` is informational
    /// and skipped.
    pub fn parse(text: &str, fallback_name: &str) -> Result<Self> {
        let mut name = fallback_name.to_string();
        let mut pending: Vec<(String, String, String)> = Vec::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(s) = line.strip_prefix('[') {
                section = s
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("line {}: malformed section {raw:?}", lineno + 1))?
                    .trim()
                    .to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value, got {raw:?}", lineno + 1))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if section == "experiment" && key == "name" {
                name = value;
            } else {
                pending.push((section.clone(), key, value));
            }
        }

        let mut cfg = Self::defaults_for(&name);
        let mut noise_model = String::from("none");
        let mut sigma_rel = 0.01;
        let mut n_photons = 1e6;
        for (section, key, value) in pending {
            let ctx = format!("key {section}.{key}");
            match (section.as_str(), key.as_str()) {
                ("meta", _) => {}
                ("grid", "n") => cfg.grid_n = value.parse().context(ctx)?,
                ("grid", "fov_waists") => cfg.fov_waists = value.parse().context(ctx)?,
                ("grid", "wavelength") => cfg.wavelength = value.parse().context(ctx)?,
                ("beam", "w0") => cfg.w0 = value.parse().context(ctx)?,
                ("beam", "ell") => cfg.ell = value.parse().context(ctx)?,
                ("turbulence", "path_length") => cfg.path_length = value.parse().context(ctx)?,
                ("turbulence", "sr_targets") => {
                    cfg.sr_targets = value
                        .split(',')
                        .map(|s| s.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .context(ctx)?;
                }
                ("run", "realizations") => cfg.realizations = value.parse().context(ctx)?,
                ("run", "master_seed") => cfg.master_seed = value.parse().context(ctx)?,
                ("run", "out_dir") => cfg.out_dir = PathBuf::from(value),
                ("run", "threshold_frac") => cfg.threshold_frac = value.parse().context(ctx)?,
                ("run", "linearity_points") => cfg.linearity_points = value.parse().context(ctx)?,
                ("run", "per_slot_redraw") => cfg.per_slot_redraw = value.parse().context(ctx)?,
                ("run", "image") => cfg.image = Some(PathBuf::from(value)),
                ("noise", "model") => noise_model = value,
                ("noise", "sigma_rel") => sigma_rel = value.parse().context(ctx)?,
                ("noise", "n_photons") => n_photons = value.parse().context(ctx)?,
                _ => bail!("unknown configuration key {section}.{key}"),
            }
        }
        cfg.noise = match noise_model.as_str() {
            "none" => None,
            "gaussian" => Some(NoiseModel::Gaussian { sigma_rel }),
            "poisson" => Some(NoiseModel::Poisson {
                mean_total: n_photons,
            }),
            other => bail!("unknown noise model {other:?}"),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load<P: AsRef<Path>>(path: P, fallback_name: &str) -> Result<Self> {
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading config {}", path.as_ref().display()))?;
        Self::parse(&text, fallback_name)
    }

    /// Render the full effective configuration. Floats use the shortest
    /// round-trip representation, so re-parsing reproduces identical values.
    pub fn render(&self, version: &str) -> String {
        let mut s = String::new();
        s.push_str("[meta]\n");
        s.push_str(&format!("version = {version}\n"));
        s.push_str("tool = vortex-channel\n\n");
        s.push_str("[experiment]\n");
        s.push_str(&format!("name = {}\n\n", self.name));
        s.push_str("[grid]\n");
        s.push_str(&format!("n = {}\n", self.grid_n));
        s.push_str(&format!("fov_waists = {:?}\n", self.fov_waists));
        s.push_str(&format!("wavelength = {:?}\n\n", self.wavelength));
        s.push_str("[beam]\n");
        s.push_str(&format!("w0 = {:?}\n", self.w0));
        s.push_str(&format!("ell = {}\n\n", self.ell));
        s.push_str("[turbulence]\n");
        s.push_str(&format!("path_length = {:?}\n", self.path_length));
        let targets: Vec<String> = self.sr_targets.iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&format!("sr_targets = {}\n\n", targets.join(", ")));
        s.push_str("[run]\n");
        s.push_str(&format!("realizations = {}\n", self.realizations));
        s.push_str(&format!("master_seed = {}\n", self.master_seed));
        s.push_str(&format!("out_dir = {}\n", self.out_dir.display()));
        s.push_str(&format!("threshold_frac = {:?}\n", self.threshold_frac));
        s.push_str(&format!("linearity_points = {}\n", self.linearity_points));
        s.push_str(&format!("per_slot_redraw = {}\n", self.per_slot_redraw));
        if let Some(img) = &self.image {
            s.push_str(&format!("image = {}\n", img.display()));
        }
        s.push('\n');
        s.push_str("[noise]\n");
        match self.noise {
            None => s.push_str("model = none\n"),
            Some(NoiseModel::Gaussian { sigma_rel }) => {
                s.push_str("model = gaussian\n");
                s.push_str(&format!("sigma_rel = {sigma_rel:?}\n"));
            }
            Some(NoiseModel::Poisson { mean_total }) => {
                s.push_str("model = poisson\n");
                s.push_str(&format!("n_photons = {mean_total:?}\n"));
            }
        }
        s
    }

    /// Write the manifest into the output directory (seed derivation rule:
    /// realization i of every SR point uses master_seed + i).
    pub fn write_manifest(&self) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join("manifest.cfg");
        std::fs::write(&path, self.render(env!("CARGO_PKG_VERSION")))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip_preserves_everything() {
        let mut cfg = ExperimentConfig::defaults_for("sweep-sr");
        cfg.master_seed = 424242;
        cfg.sr_targets = vec![0.3, 0.55, 1.0];
        cfg.w0 = 1.2345e-2;
        cfg.noise = Some(NoiseModel::Gaussian { sigma_rel: 0.017 });
        let text = cfg.render("0.0.0-test");
        let back = ExperimentConfig::parse(&text, "other").unwrap();
        assert_eq!(back.name, "sweep-sr");
        assert_eq!(back.master_seed, 424242);
        assert_eq!(back.sr_targets, cfg.sr_targets);
        assert_eq!(back.w0, cfg.w0);
        assert_eq!(back.noise, cfg.noise);
        assert_eq!(back.grid_n, cfg.grid_n);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::parse("[run]\nbogus = 1\n", "x").is_err());
        assert!(ExperimentConfig::parse("[turbulence]\nsr_targets = 1.5\n", "x").is_err());
        assert!(ExperimentConfig::parse("[run]\nrealizations = 0\n", "x").is_err());
        assert!(ExperimentConfig::parse("[noise]\nmodel = cauchy\n", "x").is_err());
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let text = "# top comment\n[beam]\nw0 = 2e-2 # inline\n\nell = 2\n";
        let cfg = ExperimentConfig::parse(text, "sweep-sr").unwrap();
        assert_eq!(cfg.w0, 2e-2);
        assert_eq!(cfg.ell, 2);
    }
}
