//! Configuration file parsing, override resolution, and the documented key
//! table.
//!
//! The file format is a flat sectioned key–value text format: `[section]`
//! headers, `key = value` lines, `#` full-line comments. Every key is listed
//! in [`KEYS`]; dotted `section.key` names address the same fields from
//! `--override`. Command-line overrides win over file values, and the
//! resolved values (defaults included) are echoed into every output so each
//! artifact is self-describing.

use isac_core::scene::{IrsMode, Quantization, ScenarioConfig, UpdateOrder};
use num_complex::Complex64;

use crate::CliError;

/// Sweep-specific settings (which levels, how many seeds).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub levels: Vec<Quantization>,
    /// Number of consecutive seeds starting at `run.seed`.
    pub seeds: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            levels: vec![
                Quantization::Levels(2),
                Quantization::Levels(4),
                Quantization::Levels(8),
                Quantization::Continuous,
            ],
            seeds: 20,
        }
    }
}

/// Everything a command needs: the scenario plus sweep settings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Settings {
    pub scenario: ScenarioConfig,
    pub sweep: SweepSpec,
}

impl Settings {
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.sweep.seeds).map(|i| self.scenario.seed + i).collect()
    }
}

pub struct KeySpec {
    pub name: &'static str,
    pub doc: &'static str,
    pub get: fn(&Settings) -> String,
    pub set: fn(&mut Settings, &str) -> Result<(), String>,
}

fn parse_f64(value: &str) -> Result<f64, String> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| format!("expected a number, got {value:?}"))
}

fn parse_usize(value: &str) -> Result<usize, String> {
    value
        .trim()
        .parse::<usize>()
        .map_err(|_| format!("expected a nonnegative integer, got {value:?}"))
}

fn parse_u64(value: &str) -> Result<u64, String> {
    value
        .trim()
        .parse::<u64>()
        .map_err(|_| format!("expected a nonnegative integer, got {value:?}"))
}

fn parse_quantization(value: &str) -> Result<Quantization, String> {
    let v = value.trim().to_ascii_lowercase();
    if v == "continuous" || v == "inf" {
        return Ok(Quantization::Continuous);
    }
    let m: u32 = v
        .parse()
        .map_err(|_| format!("expected a level count or 'continuous', got {value:?}"))?;
    Ok(Quantization::Levels(m))
}

fn quantization_text(q: Quantization) -> String {
    match q {
        Quantization::Levels(m) => m.to_string(),
        Quantization::Continuous => "continuous".to_string(),
    }
}

fn float_text(v: f64) -> String {
    format!("{v:?}")
}

macro_rules! float_key {
    ($name:literal, $doc:literal, $field:ident) => {
        KeySpec {
            name: $name,
            doc: $doc,
            get: |s| float_text(s.scenario.$field),
            set: |s, v| {
                s.scenario.$field = parse_f64(v)?;
                Ok(())
            },
        }
    };
}

/// The full documented key list. Echo order follows this table.
pub const KEYS: &[KeySpec] = &[
    KeySpec {
        name: "array.n",
        doc: "transmit (= receive) antenna count",
        get: |s| s.scenario.tx_antennas.to_string(),
        set: |s, v| {
            s.scenario.tx_antennas = parse_usize(v)?;
            Ok(())
        },
    },
    KeySpec {
        name: "array.l_x",
        doc: "reflecting elements along x",
        get: |s| s.scenario.irs_x.to_string(),
        set: |s, v| {
            s.scenario.irs_x = parse_usize(v)?;
            Ok(())
        },
    },
    KeySpec {
        name: "array.l_y",
        doc: "reflecting elements along y",
        get: |s| s.scenario.irs_y.to_string(),
        set: |s, v| {
            s.scenario.irs_y = parse_usize(v)?;
            Ok(())
        },
    },
    KeySpec {
        name: "array.k",
        doc: "communications user count",
        get: |s| s.scenario.users.to_string(),
        set: |s, v| {
            s.scenario.users = parse_usize(v)?;
            Ok(())
        },
    },
    KeySpec {
        name: "quantization.m",
        doc: "phase levels (>= 2) or 'continuous'",
        get: |s| quantization_text(s.scenario.quantization),
        set: |s, v| {
            s.scenario.quantization = parse_quantization(v)?;
            Ok(())
        },
    },
    float_key!("weights.beta", "radar weight in [0, 1]", beta),
    float_key!("power.p_t_dbm", "transmit power budget, dBm", p_t_dbm),
    float_key!("power.p_irs_dbm", "surface power budget, dBm", p_irs_dbm),
    float_key!("noise.sigma_c_sq_dbm", "communications noise variance, dBm", sigma_c_sq_dbm),
    float_key!("noise.sigma_r_sq_dbm", "radar noise variance, dBm", sigma_r_sq_dbm),
    KeySpec {
        name: "target.alpha_t_re",
        doc: "radar cross-section, real part",
        get: |s| float_text(s.scenario.alpha_t.re),
        set: |s, v| {
            s.scenario.alpha_t = Complex64::new(parse_f64(v)?, s.scenario.alpha_t.im);
            Ok(())
        },
    },
    KeySpec {
        name: "target.alpha_t_im",
        doc: "radar cross-section, imaginary part",
        get: |s| float_text(s.scenario.alpha_t.im),
        set: |s, v| {
            s.scenario.alpha_t = Complex64::new(s.scenario.alpha_t.re, parse_f64(v)?);
            Ok(())
        },
    },
    float_key!("target.path_loss", "scalar multiplier applied to the cross-section", path_loss),
    float_key!("target.range_m", "target range in metres (carried, outside the SNR model)", range_m),
    float_key!("target.theta_h_deg", "target azimuth at the surface, degrees", theta_h_deg),
    float_key!("target.theta_v_deg", "target elevation at the surface, degrees", theta_v_deg),
    float_key!("channel.rician_kappa", "Rician K-factor of all CSI draws", rician_kappa),
    float_key!("channel.incidence_h_deg", "tx->surface line-of-sight azimuth, degrees", incidence_h_deg),
    float_key!("channel.incidence_v_deg", "tx->surface line-of-sight elevation, degrees", incidence_v_deg),
    float_key!("relaxation.nu1", "magnitude-relaxation decay rate", nu1),
    float_key!("relaxation.nu2", "phase-relaxation decay rate", nu2),
    float_key!("multipliers.tau_gain", "gain-track coupling multiplier", tau_gain),
    float_key!("multipliers.tau_phase", "phase-track coupling multiplier", tau_phase),
    float_key!("multipliers.tau_precoder", "precoder-track coupling multiplier", tau_precoder),
    float_key!("multipliers.gamma_cov", "covariance-penalty multiplier", gamma_cov),
    float_key!("solver.epsilon", "convergence threshold on |delta SNR_T| (linear)", epsilon),
    KeySpec {
        name: "solver.max_outer_iter",
        doc: "outer iteration cap",
        get: |s| s.scenario.max_outer_iter.to_string(),
        set: |s, v| {
            s.scenario.max_outer_iter = parse_usize(v)?;
            Ok(())
        },
    },
    KeySpec {
        name: "solver.inner_iters",
        doc: "power-step repetitions per track per outer iteration",
        get: |s| s.scenario.inner_iters.to_string(),
        set: |s, v| {
            s.scenario.inner_iters = parse_usize(v)?;
            Ok(())
        },
    },
    KeySpec {
        name: "solver.update_order",
        doc: "track refresh order: gauss_seidel | jacobi",
        get: |s| {
            match s.scenario.update_order {
                UpdateOrder::GaussSeidel => "gauss_seidel",
                UpdateOrder::Jacobi => "jacobi",
            }
            .to_string()
        },
        set: |s, v| {
            s.scenario.update_order = match v.trim().to_ascii_lowercase().as_str() {
                "gauss_seidel" | "gauss-seidel" => UpdateOrder::GaussSeidel,
                "jacobi" => UpdateOrder::Jacobi,
                other => return Err(format!("expected gauss_seidel or jacobi, got {other:?}")),
            };
            Ok(())
        },
    },
    KeySpec {
        name: "run.seed",
        doc: "RNG seed (base seed for sweeps)",
        get: |s| s.scenario.seed.to_string(),
        set: |s, v| {
            s.scenario.seed = parse_u64(v)?;
            Ok(())
        },
    },
    KeySpec {
        name: "run.mode",
        doc: "surface mode: active | passive",
        get: |s| {
            match s.scenario.mode {
                IrsMode::Active => "active",
                IrsMode::Passive => "passive",
            }
            .to_string()
        },
        set: |s, v| {
            s.scenario.mode = match v.trim().to_ascii_lowercase().as_str() {
                "active" => IrsMode::Active,
                "passive" => IrsMode::Passive,
                other => return Err(format!("expected active or passive, got {other:?}")),
            };
            Ok(())
        },
    },
    KeySpec {
        name: "sweep.m",
        doc: "comma list of levels for sweeps; 'continuous' allowed",
        get: |s| {
            s.sweep
                .levels
                .iter()
                .map(|&q| quantization_text(q))
                .collect::<Vec<_>>()
                .join(",")
        },
        set: |s, v| {
            let levels = v
                .split(',')
                .map(parse_quantization)
                .collect::<Result<Vec<_>, _>>()?;
            if levels.is_empty() {
                return Err("sweep needs at least one level".to_string());
            }
            s.sweep.levels = levels;
            Ok(())
        },
    },
    KeySpec {
        name: "sweep.seeds",
        doc: "number of consecutive seeds, starting at run.seed",
        get: |s| s.sweep.seeds.to_string(),
        set: |s, v| {
            let n = parse_u64(v)?;
            if n == 0 {
                return Err("sweep needs at least one seed".to_string());
            }
            s.sweep.seeds = n;
            Ok(())
        },
    },
];

fn valid_key_listing() -> String {
    KEYS.iter()
        .map(|k| format!("  {:28} {}", k.name, k.doc))
        .collect::<Vec<_>>()
        .join("\n")
}

fn unknown_key_error(key: &str, context: &str) -> CliError {
    CliError::config(format!(
        "unknown key {key:?} {context}; valid keys:\n{}",
        valid_key_listing()
    ))
}

fn apply_key(settings: &mut Settings, key: &str, value: &str, context: &str) -> Result<(), CliError> {
    let canonical = key.trim().to_ascii_lowercase();
    let spec = KEYS
        .iter()
        .find(|k| k.name == canonical)
        .ok_or_else(|| unknown_key_error(key, context))?;
    (spec.set)(settings, value)
        .map_err(|reason| CliError::config(format!("invalid value for {canonical} {context}: {reason}")))
}

/// Parse a config file into settings, starting from defaults.
pub fn parse_config_text(text: &str, settings: &mut Settings, path: &str) -> Result<(), CliError> {
    let mut section = String::new();
    for (index, raw) in text.lines().enumerate() {
        let line_no = index + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|rest| rest.strip_suffix(']')) {
            section = name.trim().to_ascii_lowercase();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::config(format!(
                "{path}:{line_no}: expected 'key = value', got {line:?}"
            )));
        };
        let key = key.trim();
        let dotted = if key.contains('.') || section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        apply_key(settings, &dotted, value.trim(), &format!("at {path}:{line_no}"))?;
    }
    Ok(())
}

/// Load defaults, file values, then overrides, in that precedence order.
pub fn resolve(config_path: Option<&str>, overrides: &[(String, String)]) -> Result<Settings, CliError> {
    let mut settings = Settings::default();
    if let Some(path) = config_path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config file {path}: {e}")))?;
        parse_config_text(&text, &mut settings, path)?;
    }
    for (key, value) in overrides {
        apply_key(&mut settings, key, value, "from --override")?;
    }
    Ok(settings)
}

/// Resolved configuration as (key, value) pairs in table order.
pub fn echo_pairs(settings: &Settings) -> Vec<(String, String)> {
    KEYS.iter()
        .map(|k| (k.name.to_string(), (k.get)(settings)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_echo() {
        let settings = Settings::default();
        let mut rebuilt = Settings::default();
        for (key, value) in echo_pairs(&settings) {
            apply_key(&mut rebuilt, &key, &value, "test").unwrap();
        }
        assert_eq!(settings, rebuilt);
    }

    #[test]
    fn file_sections_and_overrides() {
        let text = "\
# comment line
[array]
n = 2
k = 3

[quantization]
m = continuous

[run]
seed = 9
";
        let mut settings = Settings::default();
        parse_config_text(text, &mut settings, "test.cfg").unwrap();
        assert_eq!(settings.scenario.tx_antennas, 2);
        assert_eq!(settings.scenario.users, 3);
        assert_eq!(settings.scenario.quantization, Quantization::Continuous);
        assert_eq!(settings.scenario.seed, 9);
    }

    #[test]
    fn unknown_key_lists_valid_keys() {
        let mut settings = Settings::default();
        let err = parse_config_text("[array]\nbogus = 1\n", &mut settings, "x.cfg").unwrap_err();
        let message = err.to_string();
        assert!(message.contains("array.bogus"));
        assert!(message.contains("quantization.m"));
        assert!(message.contains("sweep.seeds"));
    }

    #[test]
    fn case_insensitive_keys_and_dotted_form() {
        let mut settings = Settings::default();
        apply_key(&mut settings, "quantization.M", "8", "test").unwrap();
        assert_eq!(settings.scenario.quantization, Quantization::Levels(8));
        parse_config_text("quantization.m = 2\n", &mut settings, "y.cfg").unwrap();
        assert_eq!(settings.scenario.quantization, Quantization::Levels(2));
    }

    #[test]
    fn sweep_list_parses() {
        let mut settings = Settings::default();
        apply_key(&mut settings, "sweep.m", "2,4,8,continuous", "test").unwrap();
        assert_eq!(settings.sweep.levels.len(), 4);
        assert_eq!(settings.sweep.levels[3], Quantization::Continuous);
        apply_key(&mut settings, "sweep.seeds", "5", "test").unwrap();
        assert_eq!(settings.seed_list().len(), 5);
    }

    #[test]
    fn bad_value_reports_key_and_location() {
        let mut settings = Settings::default();
        let err = parse_config_text("[weights]\nbeta = not_a_number\n", &mut settings, "z.cfg").unwrap_err();
        let message = err.to_string();
        assert!(message.contains("weights.beta"));
        assert!(message.contains("z.cfg:2"));
    }
}
