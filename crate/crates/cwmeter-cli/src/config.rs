//! Flat key = value configuration: UTF-8 text files with '#' comments,
//! overridden by --set flags. Unknown keys are rejected; every key has a
//! default; the fully resolved set is echoed into output headers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use cwmeter_core::model::ModelParams;
use cwmeter_core::registration::{AdvectionScheme, DriftVariant};

/// (key, default, description)
const KEYS: &[(&str, &str, &str)] = &[
    ("n", "1000", "number of magnet spins"),
    ("j2", "1", "pair coupling [J]"),
    ("j4", "0", "quartic coupling [J]"),
    ("g", "0.05", "system-magnet coupling [J]"),
    ("delta_g", "0", "coupling spread [J]"),
    ("gamma", "1e-3", "magnet-bath coupling (dimensionless)"),
    ("temp", "0.65", "bath temperature [J]"),
    ("t0", "inf", "preparation temperature [J]"),
    ("gamma_cut", "62.6657068657750125", "Debye cutoff [J/hbar] (default 50 sqrt(pi/2))"),
    ("b", "0", "transverse field on the tested spin [J]"),
    ("t_end", "0", "run length [tau_J]; 0 picks a task default"),
    ("samples", "60", "number of sample times"),
    ("mesh", "4096", "Fokker-Planck mesh points"),
    ("scheme", "central", "advection flux: central | upwind"),
    ("variant", "bath", "drift variant: bath | theta | gradient"),
    ("mu0", "0", "initial magnetization bias"),
    ("alpha", "0.1", "paramagnetic lifetime width parameter"),
    ("t_off", "-1", "coupling switch-off time [tau_J]; negative keeps it on"),
    ("ruu", "1", "initial spin r_uu"),
    ("rud_re", "0", "initial spin Re r_ud"),
    ("rud_im", "0", "initial spin Im r_ud"),
    ("delta", "0.1", "subensemble coupling strength [J]"),
    ("gg", "64", "subensemble degeneracy G"),
    ("draws", "200", "Monte-Carlo draws"),
    ("collision_step", "0.1", "collision duration [hbar/J]"),
    ("collisions", "1000", "number of collisions"),
    ("big_q", "1024", "random-spectrum pointer size Q"),
    ("f_threshold", "0.2", "random-spectrum recurrence threshold f"),
    ("lambda", "0.70710678118654752", "first apparatus efficiency"),
    ("lambda_prime", "0.70710678118654752", "second apparatus efficiency"),
    ("n_list", "250,500,1000,2000,4000", "N values for wrong-reg sweeps"),
    ("pde_check", "0", "wrong-reg: also run the PDE tail estimate (0/1)"),
    ("sweep_task", "", "sweep: task to run per entry"),
    ("sweep_param", "", "sweep: config key to vary"),
    ("sweep_values", "", "sweep: comma-separated values"),
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    pub seed: u64,
    pub out_dir: std::path::PathBuf,
    pub threads: usize,
}

pub fn config_error(msg: impl Into<String>) -> String {
    msg.into()
}

impl RunConfig {
    pub fn defaults() -> Self {
        let values =
            KEYS.iter().map(|(k, d, _)| (k.to_string(), d.to_string())).collect();
        Self { values, seed: 0, out_dir: ".".into(), threads: 0 }
    }

    pub fn known_keys() -> Vec<&'static str> {
        KEYS.iter().map(|(k, _, _)| *k).collect()
    }

    pub fn apply_file(&mut self, path: &std::path::Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read config {path:?}: {e}")))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_error(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        if !self.values.contains_key(key) {
            return Err(config_error(format!(
                "unknown key '{key}' (known keys: {})",
                Self::known_keys().join(", ")
            )));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get_f64(&self, key: &str) -> Result<f64, String> {
        let raw = &self.values[key];
        if raw.eq_ignore_ascii_case("inf") || raw.eq_ignore_ascii_case("+inf") {
            return Ok(f64::INFINITY);
        }
        raw.parse().map_err(|e| config_error(format!("key '{key}' = '{raw}': {e}")))
    }

    pub fn get_usize(&self, key: &str) -> Result<usize, String> {
        self.values[key]
            .parse()
            .map_err(|e| config_error(format!("key '{key}': {e}")))
    }

    pub fn get_str(&self, key: &str) -> &str {
        &self.values[key]
    }

    pub fn model(&self) -> Result<ModelParams, String> {
        let p = ModelParams {
            n: self.get_usize("n")?,
            j2: self.get_f64("j2")?,
            j4: self.get_f64("j4")?,
            g: self.get_f64("g")?,
            delta_g: self.get_f64("delta_g")?,
            gamma: self.get_f64("gamma")?,
            temp: self.get_f64("temp")?,
            t0: self.get_f64("t0")?,
            gamma_cut: self.get_f64("gamma_cut")?,
            b: self.get_f64("b")?,
        };
        p.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(p)
    }

    pub fn scheme(&self) -> Result<AdvectionScheme, String> {
        match self.get_str("scheme") {
            "central" => Ok(AdvectionScheme::Central),
            "upwind" => Ok(AdvectionScheme::Upwind),
            other => Err(config_error(format!("scheme must be central|upwind, got '{other}'"))),
        }
    }

    pub fn variant(&self) -> Result<DriftVariant, String> {
        match self.get_str("variant") {
            "bath" => Ok(DriftVariant::Bath),
            "theta" => Ok(DriftVariant::ThetaConstant),
            "gradient" => Ok(DriftVariant::FreeEnergyGradient),
            other => {
                Err(config_error(format!("variant must be bath|theta|gradient, got '{other}'")))
            }
        }
    }

    pub fn spin_state(&self) -> Result<cwmeter_core::dynamics::SpinState, String> {
        let ruu = self.get_f64("ruu")?;
        cwmeter_core::dynamics::SpinState::new(
            ruu,
            1.0 - ruu,
            num_complex::Complex64::new(self.get_f64("rud_re")?, self.get_f64("rud_im")?),
        )
        .map_err(|e| config_error(e.to_string()))
    }

    /// header block echoing the fully resolved configuration; the `cfg`
    /// prefix makes the lines machine-extractable for reruns
    pub fn echo(&self) -> Vec<String> {
        let mut lines = vec![format!("seed = {}", self.seed)];
        for (k, v) in &self.values {
            let mut line = String::new();
            let _ = write!(line, "cfg {k} = {v}");
            lines.push(line);
        }
        lines
    }
}
