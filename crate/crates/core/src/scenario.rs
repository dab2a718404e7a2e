//! Weighted annual weather scenarios as hourly capacity-factor series.
//!
//! Capacity factors are the ingestion boundary: upstream wind-speed or
//! irradiance conversion is out of scope. Scenarios come either from CSV
//! files (header `hour,wind_cf,solar_cf`) or from a deterministic synthetic
//! generator useful for desk-scale runs and tests.

use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, HOURS_PER_YEAR, Result};

/// One annual weather realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub probability: f64,
    pub wind_cf: Vec<f64>,
    pub solar_cf: Vec<f64>,
}

/// A set of scenarios sharing one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
    pub horizon_h: usize,
}

impl ScenarioSet {
    pub fn new(scenarios: Vec<Scenario>) -> Result<ScenarioSet> {
        let horizon_h = scenarios.first().map_or(0, |s| s.wind_cf.len());
        let set = ScenarioSet {
            scenarios,
            horizon_h,
        };
        set.validate()?;
        Ok(set)
    }

    /// Factor converting a per-horizon total into an annual quantity.
    pub fn annualization_weight(&self) -> f64 {
        HOURS_PER_YEAR / self.horizon_h as f64
    }

    pub fn n_scenarios(&self) -> usize {
        self.scenarios.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon_h < 1 {
            return Err(Error::invalid_field("horizon_h", "must be >= 1"));
        }
        if self.scenarios.is_empty() {
            return Err(Error::invalid_field("scenarios", "must be nonempty"));
        }
        let mut total_p = 0.0;
        for (i, s) in self.scenarios.iter().enumerate() {
            if s.wind_cf.len() != self.horizon_h || s.solar_cf.len() != self.horizon_h {
                return Err(Error::invalid_field(
                    format!("scenarios[{i}]"),
                    format!(
                        "series length {}/{} does not match horizon {}",
                        s.wind_cf.len(),
                        s.solar_cf.len(),
                        self.horizon_h
                    ),
                ));
            }
            if !(s.probability > 0.0) {
                return Err(Error::invalid_field(
                    format!("scenarios[{i}].probability"),
                    "must be > 0",
                ));
            }
            for (series, name) in [(&s.wind_cf, "wind_cf"), (&s.solar_cf, "solar_cf")] {
                if let Some((t, v)) = series
                    .iter()
                    .enumerate()
                    .find(|(_, v)| !(**v >= 0.0 && **v <= 1.0))
                {
                    return Err(Error::invalid_field(
                        format!("scenarios[{i}].{name}[{t}]"),
                        format!("capacity factor must be in [0, 1], got {v}"),
                    ));
                }
            }
            total_p += s.probability;
        }
        if (total_p - 1.0).abs() > 1e-9 {
            return Err(Error::invalid_field(
                "probabilities",
                format!("must sum to 1 within 1e-9, got {total_p}"),
            ));
        }
        Ok(())
    }
}

/// Load one CSV file per scenario; `probabilities` are normalized to sum 1.
pub fn load_weather_csv<P: AsRef<Path>>(
    paths: &[P],
    probabilities: &[f64],
) -> Result<ScenarioSet> {
    if paths.is_empty() {
        return Err(Error::invalid_field("paths", "need at least one file"));
    }
    if paths.len() != probabilities.len() {
        return Err(Error::invalid_field(
            "probabilities",
            format!(
                "{} weights for {} files",
                probabilities.len(),
                paths.len()
            ),
        ));
    }
    let total: f64 = probabilities.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid_field(
            "probabilities",
            "weights must sum to a positive value",
        ));
    }
    let mut scenarios = Vec::with_capacity(paths.len());
    for (path, &weight) in paths.iter().zip(probabilities) {
        if !(weight > 0.0) {
            return Err(Error::invalid_field("probabilities", "weights must be > 0"));
        }
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::WeatherCsv {
            path: path.as_ref().display().to_string(),
            detail: e.to_string(),
        })?;
        let (wind_cf, solar_cf) = parse_weather_csv(&text).map_err(|detail| Error::WeatherCsv {
            path: path.as_ref().display().to_string(),
            detail,
        })?;
        scenarios.push(Scenario {
            probability: weight / total,
            wind_cf,
            solar_cf,
        });
    }
    let horizon = scenarios[0].wind_cf.len();
    if let Some((i, s)) = scenarios
        .iter()
        .enumerate()
        .find(|(_, s)| s.wind_cf.len() != horizon)
    {
        return Err(Error::WeatherCsv {
            path: paths[i].as_ref().display().to_string(),
            detail: format!(
                "ragged horizon: file has {} rows, first file has {horizon}",
                s.wind_cf.len()
            ),
        });
    }
    ScenarioSet::new(scenarios)
}

/// Parse CSV text with header `hour,wind_cf,solar_cf`. Row numbers in
/// errors are 1-based data rows (the header is row 0).
pub fn parse_weather_csv(text: &str) -> std::result::Result<(Vec<f64>, Vec<f64>), String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?.trim_end_matches('\r');
    if header != "hour,wind_cf,solar_cf" {
        return Err(format!(
            "bad header `{header}`, expected `hour,wind_cf,solar_cf`"
        ));
    }
    let mut wind = Vec::new();
    let mut solar = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (hour, w, s) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(h), Some(w), Some(s), None) => (h, w, s),
            _ => return Err(format!("row {row}: expected 3 comma-separated fields")),
        };
        let hour: usize = hour
            .trim()
            .parse()
            .map_err(|_| format!("row {row}: bad hour `{hour}`"))?;
        if hour != idx {
            return Err(format!("row {row}: hour {hour} not consecutive from 0"));
        }
        for (field, name, out) in [(w, "wind_cf", &mut wind), (s, "solar_cf", &mut solar)] {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| format!("row {row}: bad {name} `{field}`"))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("row {row}: {name} {v} outside [0, 1]"));
            }
            out.push(v);
        }
    }
    if wind.is_empty() {
        return Err("no data rows".to_string());
    }
    Ok((wind, solar))
}

/// Serialize one scenario back to the CSV interchange format. Values are
/// printed with the shortest representation that round-trips exactly.
pub fn weather_csv_string(wind_cf: &[f64], solar_cf: &[f64]) -> String {
    let mut out = String::from("hour,wind_cf,solar_cf\n");
    for (t, (w, s)) in wind_cf.iter().zip(solar_cf).enumerate() {
        let _ = writeln!(out, "{t},{w},{s}");
    }
    out
}

/// Tunables of the synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    /// Target mean of the solar series; the diurnal half-sine peak is
    /// `pi * solar_mean`.
    pub solar_mean: f64,
    /// Relative multiplicative noise amplitude on daylight solar output.
    pub solar_noise: f64,
    /// Long-run mean of the wind series.
    pub wind_mean: f64,
    /// Mean-reversion rate of the wind process per hour.
    pub wind_reversion: f64,
    /// Additive noise amplitude of the wind process per hour.
    pub wind_noise: f64,
    /// Acceptance band for the realized solar mean in tests and reports.
    pub solar_mean_band: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            solar_mean: 0.22,
            solar_noise: 0.25,
            wind_mean: 0.35,
            wind_reversion: 0.06,
            wind_noise: 0.05,
            solar_mean_band: 0.02,
        }
    }
}

/// Deterministic synthetic weather: solar follows a clipped diurnal
/// half-sine with multiplicative noise, wind a clamped mean-reverting walk.
/// Identical `(seed, horizon, n, params)` produce bit-identical output.
pub fn synthesize_weather(
    seed: u64,
    horizon_h: usize,
    n_scenarios: usize,
    params: &SynthParams,
) -> Result<ScenarioSet> {
    if horizon_h < 24 {
        return Err(Error::invalid_field(
            "horizon_h",
            format!("synthetic weather needs >= 24 hours, got {horizon_h}"),
        ));
    }
    if n_scenarios == 0 {
        return Err(Error::invalid_field("n_scenarios", "must be >= 1"));
    }
    let peak = params.solar_mean * std::f64::consts::PI;
    let mut scenarios = Vec::with_capacity(n_scenarios);
    for s in 0..n_scenarios {
        let mut rng = SplitMix64::new(seed ^ (s as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut wind_cf = Vec::with_capacity(horizon_h);
        let mut solar_cf = Vec::with_capacity(horizon_h);
        let mut wind = params.wind_mean;
        for t in 0..horizon_h {
            let hour = (t % 24) as f64;
            let base = peak * (std::f64::consts::PI * (hour - 6.0) / 12.0).sin().max(0.0);
            let solar = base * (1.0 + params.solar_noise * rng.uniform_sym());
            solar_cf.push(solar.clamp(0.0, 1.0));

            wind += params.wind_reversion * (params.wind_mean - wind)
                + params.wind_noise * rng.uniform_sym();
            wind = wind.clamp(0.0, 1.0);
            wind_cf.push(wind);
        }
        scenarios.push(Scenario {
            probability: 1.0 / n_scenarios as f64,
            wind_cf,
            solar_cf,
        });
    }
    ScenarioSet::new(scenarios)
}

/// Truncate every scenario to its first `new_h` hours; the annualization
/// weight of the result is `8760 / new_h`.
pub fn truncate_horizon(set: &ScenarioSet, new_h: usize) -> Result<ScenarioSet> {
    if new_h < 1 || new_h > set.horizon_h {
        return Err(Error::invalid_field(
            "new_h",
            format!("must be in [1, {}], got {new_h}", set.horizon_h),
        ));
    }
    let scenarios = set
        .scenarios
        .iter()
        .map(|s| Scenario {
            probability: s.probability,
            wind_cf: s.wind_cf[..new_h].to_vec(),
            solar_cf: s.solar_cf[..new_h].to_vec(),
        })
        .collect();
    ScenarioSet::new(scenarios)
}

/// SplitMix64: tiny, fast, and stable across platforms. Good enough for
/// weather synthesis; not a statistical-quality generator.
struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [-1, 1).
    fn uniform_sym(&mut self) -> f64 {
        let u = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        2.0 * u - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_preserves_values() {
        let set = synthesize_weather(7, 48, 1, &SynthParams::default()).unwrap();
        let s = &set.scenarios[0];
        let text = weather_csv_string(&s.wind_cf, &s.solar_cf);
        let (wind, solar) = parse_weather_csv(&text).unwrap();
        assert_eq!(wind, s.wind_cf);
        assert_eq!(solar, s.solar_cf);
    }

    #[test]
    fn csv_shape_contract() {
        let dir = std::env::temp_dir().join(format!("syncap_csv_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("three_rows.csv");
        std::fs::write(&path, "hour,wind_cf,solar_cf\n0,0.5,0.1\n1,0.6,0.2\n2,0.7,0.0\n").unwrap();
        let set = load_weather_csv(&[&path], &[1.0]).unwrap();
        assert_eq!(set.horizon_h, 3);
        assert_eq!(set.scenarios[0].probability, 1.0);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn csv_range_error_cites_row() {
        let mut text = String::from("hour,wind_cf,solar_cf\n");
        for t in 0..10 {
            let w = if t == 6 { 1.2 } else { 0.4 };
            text.push_str(&format!("{t},{w},0.1\n"));
        }
        // wind_cf = 1.2 sits at data row 7 (1-based).
        let err = parse_weather_csv(&text).unwrap_err();
        assert!(err.contains("row 7"), "{err}");
        assert!(err.contains("wind_cf"), "{err}");
    }

    #[test]
    fn csv_bad_header_rejected() {
        let err = parse_weather_csv("hour,wind,solar\n0,0.1,0.2\n").unwrap_err();
        assert!(err.contains("header"), "{err}");
    }

    #[test]
    fn csv_crlf_accepted() {
        let (wind, _) = parse_weather_csv("hour,wind_cf,solar_cf\r\n0,0.25,0.5\r\n").unwrap();
        assert_eq!(wind, vec![0.25]);
    }

    #[test]
    fn weights_normalize() {
        let dir = std::env::temp_dir().join(format!("syncap_norm_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let a = dir.join("a.csv");
        let b = dir.join("b.csv");
        std::fs::write(&a, "hour,wind_cf,solar_cf\n0,0.5,0.1\n").unwrap();
        std::fs::write(&b, "hour,wind_cf,solar_cf\n0,0.4,0.3\n").unwrap();
        let set = load_weather_csv(&[&a, &b], &[2.0, 2.0]).unwrap();
        assert_eq!(set.scenarios[0].probability, 0.5);
        assert_eq!(set.scenarios[1].probability, 0.5);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn ragged_files_rejected() {
        let dir = std::env::temp_dir().join(format!("syncap_rag_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let a = dir.join("a.csv");
        let b = dir.join("b.csv");
        std::fs::write(&a, "hour,wind_cf,solar_cf\n0,0.5,0.1\n").unwrap();
        std::fs::write(&b, "hour,wind_cf,solar_cf\n0,0.4,0.3\n1,0.4,0.3\n").unwrap();
        let err = load_weather_csv(&[&a, &b], &[1.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("ragged"), "{err}");
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn synthesis_is_deterministic() {
        let p = SynthParams::default();
        let a = synthesize_weather(42, 96, 3, &p).unwrap();
        let b = synthesize_weather(42, 96, 3, &p).unwrap();
        assert_eq!(a, b);
        let c = synthesize_weather(43, 96, 3, &p).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_noise_solar_is_periodic() {
        let p = SynthParams {
            solar_noise: 0.0,
            ..SynthParams::default()
        };
        let set = synthesize_weather(1, 24 * 7, 1, &p).unwrap();
        let solar = &set.scenarios[0].solar_cf;
        for t in 24..solar.len() {
            assert_eq!(solar[t], solar[t - 24]);
        }
    }

    #[test]
    fn default_solar_mean_within_band() {
        let p = SynthParams::default();
        let set = synthesize_weather(1, 8760, 1, &p).unwrap();
        let solar = &set.scenarios[0].solar_cf;
        let mean = solar.iter().sum::<f64>() / solar.len() as f64;
        assert!(
            (mean - p.solar_mean).abs() <= p.solar_mean_band,
            "mean {mean} outside {} +/- {}",
            p.solar_mean,
            p.solar_mean_band
        );
    }

    #[test]
    fn truncate_recomputes_weight() {
        let set = synthesize_weather(5, 8760, 2, &SynthParams::default()).unwrap();
        let cut = truncate_horizon(&set, 336).unwrap();
        assert_eq!(cut.horizon_h, 336);
        assert!((cut.annualization_weight() - 26.071428571428573).abs() < 1e-12);

        let same = truncate_horizon(&set, 8760).unwrap();
        assert_eq!(same, set);

        assert!(truncate_horizon(&set, 0).is_err());
        assert!(truncate_horizon(&set, 8761).is_err());
    }
}
