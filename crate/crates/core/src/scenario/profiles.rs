//! Time-series inputs: per-microgrid demand and irradiance truths and the
//! wholesale price.
//!
//! ```text
//! # mgcoop profile
//! schema_version,1
//! dt_h,0.25
//! step,wholesale_price_per_kwh,load_kw_mg_1,irradiance_mg_1,load_kw_mg_2,irradiance_mg_2
//! 0,0.05,612.3,0,540.1,0
//! ```
//!
//! Lines starting with `#` are comments. Loads are kW, irradiance is
//! normalized to [0, 1], prices are $/kWh.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_schema, read_text, write_text, ScenarioError, SCHEMA_VERSION};

/// A parameter change applied from a given episode on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideEvent {
    pub episode: usize,
    /// One of `fuel_price_scale`, `load_scale`, `pv_scale`, `wholesale_price_scale`.
    pub parameter: String,
    pub value: f64,
}

pub const OVERRIDE_PARAMETERS: [&str; 4] = ["fuel_price_scale", "load_scale", "pv_scale", "wholesale_price_scale"];

impl OverrideEvent {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !OVERRIDE_PARAMETERS.contains(&self.parameter.as_str()) {
            return Err(ScenarioError::Validation(format!(
                "unknown override parameter `{}` (expected one of {})",
                self.parameter,
                OVERRIDE_PARAMETERS.join(", ")
            )));
        }
        if !(self.value >= 0.0 && self.value.is_finite()) {
            return Err(ScenarioError::Validation(format!(
                "override `{}` value must be finite and >= 0",
                self.parameter
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioProfile {
    pub dt_h: f64,
    /// $/kWh per step.
    pub wholesale_price: Vec<f64>,
    /// Aggregate demand truth per microgrid, `[mg][step]` (kW).
    pub load_kw: Vec<Vec<f64>>,
    /// Normalized irradiance truth per microgrid, `[mg][step]`.
    pub irradiance: Vec<Vec<f64>>,
    pub events: Vec<OverrideEvent>,
}

impl ScenarioProfile {
    pub fn steps(&self) -> usize {
        self.wholesale_price.len()
    }

    pub fn n_mgs(&self) -> usize {
        self.load_kw.len()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let t = self.steps();
        if t == 0 {
            return Err(ScenarioError::Validation("profile has no timesteps".into()));
        }
        if !(self.dt_h > 0.0 && self.dt_h.is_finite()) {
            return Err(ScenarioError::Validation(format!("dt_h must be > 0, got {}", self.dt_h)));
        }
        if self.load_kw.is_empty() || self.load_kw.len() != self.irradiance.len() {
            return Err(ScenarioError::Validation(
                "profile needs load and irradiance columns for every microgrid".into(),
            ));
        }
        for (k, p) in self.wholesale_price.iter().enumerate() {
            if !(*p >= 0.0 && p.is_finite()) {
                return Err(ScenarioError::Validation(format!("step {k}: wholesale price {p} must be >= 0")));
            }
        }
        for (mg, (load, irr)) in self.load_kw.iter().zip(&self.irradiance).enumerate() {
            if load.len() != t || irr.len() != t {
                return Err(ScenarioError::Validation(format!("microgrid {}: series length differs from {t}", mg + 1)));
            }
            for (k, (l, i)) in load.iter().zip(irr).enumerate() {
                if !(*l >= 0.0 && l.is_finite()) {
                    return Err(ScenarioError::Validation(format!(
                        "step {k}, load_kw_mg_{}: negative or non-finite load {l}",
                        mg + 1
                    )));
                }
                if !(0.0..=1.0).contains(i) {
                    return Err(ScenarioError::Validation(format!(
                        "step {k}, irradiance_mg_{}: {i} outside [0, 1]",
                        mg + 1
                    )));
                }
            }
        }
        for e in &self.events {
            e.validate()?;
        }
        Ok(())
    }

    /// Indices of the `len` steps starting at `start`, wrapping around the
    /// horizon.
    pub fn window(&self, start: usize, len: usize) -> Vec<usize> {
        (0..len).map(|k| (start + k) % self.steps()).collect()
    }
}

fn header(n_mgs: usize) -> String {
    let mut h = String::from("step,wholesale_price_per_kwh");
    for mg in 1..=n_mgs {
        let _ = write!(h, ",load_kw_mg_{mg},irradiance_mg_{mg}");
    }
    h
}

pub fn profile_to_string(p: &ScenarioProfile) -> String {
    let mut s = format!("# mgcoop profile\nschema_version,{SCHEMA_VERSION}\ndt_h,{}\n{}\n", p.dt_h, header(p.n_mgs()));
    for t in 0..p.steps() {
        let _ = write!(s, "{t},{}", p.wholesale_price[t]);
        for mg in 0..p.n_mgs() {
            let _ = write!(s, ",{},{}", p.load_kw[mg][t], p.irradiance[mg][t]);
        }
        s.push('\n');
    }
    s
}

/// Parses profile text; `origin` names the source in error messages.
pub fn parse_profile(text: &str, origin: &str) -> Result<ScenarioProfile, ScenarioError> {
    let mut lines =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut meta = |key: &str| -> Result<(usize, String), ScenarioError> {
        let (n, line) = lines.next().ok_or_else(|| ScenarioError::parse(origin, format!("missing `{key}` line")))?;
        match line.split_once(',') {
            Some((k, v)) if k.trim() == key => Ok((n, v.trim().to_owned())),
            _ => Err(ScenarioError::parse_line(origin, n, format!("expected `{key},<value>`"))),
        }
    };
    let (n, v) = meta("schema_version")?;
    check_schema(v.parse().map_err(|_| ScenarioError::parse_line(origin, n, "schema_version must be an integer"))?)?;
    let (n, v) = meta("dt_h")?;
    let dt_h: f64 = v.parse().map_err(|_| ScenarioError::parse_line(origin, n, format!("bad dt_h `{v}`")))?;

    let (n, head) = lines.next().ok_or_else(|| ScenarioError::parse(origin, "missing column header"))?;
    let cols: Vec<&str> = head.split(',').map(str::trim).collect();
    if cols.len() < 4 || (cols.len() - 2) % 2 != 0 {
        return Err(ScenarioError::parse_line(
            origin,
            n,
            "header needs step, wholesale price and load/irradiance pairs",
        ));
    }
    let n_mgs = (cols.len() - 2) / 2;
    for (k, c) in cols.iter().enumerate() {
        let expected = header(n_mgs).split(',').nth(k).map(str::to_owned).unwrap_or_default();
        if *c != expected {
            let unit_hint = if c.starts_with("load_") && !c.starts_with("load_kw") {
                " (unit mismatch: loads must be given in kW)"
            } else if c.starts_with("wholesale_price") {
                " (unit mismatch: prices must be given per kWh)"
            } else {
                ""
            };
            return Err(ScenarioError::parse_line(
                origin,
                n,
                format!("column {} is `{c}`, expected `{expected}`{unit_hint}", k + 1),
            ));
        }
    }

    let mut p = ScenarioProfile {
        dt_h,
        wholesale_price: Vec::new(),
        load_kw: vec![Vec::new(); n_mgs],
        irradiance: vec![Vec::new(); n_mgs],
        events: Vec::new(),
    };
    for (n, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != cols.len() {
            return Err(ScenarioError::parse_line(
                origin,
                n,
                format!("{} cells, expected {}", cells.len(), cols.len()),
            ));
        }
        let num = |k: usize| -> Result<f64, ScenarioError> {
            cells[k].parse::<f64>().map_err(|_| {
                ScenarioError::parse_line(origin, n, format!("{}: `{}` is not a number", cols[k], cells[k]))
            })
        };
        let step = cells[0]
            .parse::<usize>()
            .map_err(|_| ScenarioError::parse_line(origin, n, format!("step `{}` is not an index", cells[0])))?;
        if step != p.wholesale_price.len() {
            return Err(ScenarioError::parse_line(origin, n, format!("step {step} out of sequence")));
        }
        p.wholesale_price.push(num(1)?);
        for mg in 0..n_mgs {
            let load = num(2 + 2 * mg)?;
            if load < 0.0 {
                return Err(ScenarioError::parse_line(
                    origin,
                    n,
                    format!("{}: negative load {load}", cols[2 + 2 * mg]),
                ));
            }
            p.load_kw[mg].push(load);
            p.irradiance[mg].push(num(3 + 2 * mg)?);
        }
    }
    if p.wholesale_price.is_empty() {
        return Err(ScenarioError::parse(origin, "no timesteps"));
    }
    p.validate()?;
    Ok(p)
}

pub fn load_profiles(path: impl AsRef<Path>) -> Result<ScenarioProfile, ScenarioError> {
    let path = path.as_ref();
    parse_profile(&read_text(path)?, &path.display().to_string())
}

pub fn save_profiles(p: &ScenarioProfile, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    write_text(path.as_ref(), &profile_to_string(p))
}

/// Shape parameters of the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub n_mgs: usize,
    pub days: usize,
    pub dt_h: f64,
    /// Daily mean demand of each microgrid (kW); the last value repeats.
    pub load_mean_kw: Vec<f64>,
    /// Relative swing of the double-peak demand shape.
    pub load_swing: f64,
    /// Relative standard deviation of the multiplicative demand noise.
    pub load_noise: f64,
    pub sunrise_h: f64,
    pub sunset_h: f64,
    pub irradiance_peak: f64,
    /// Standard deviation of the additive irradiance noise (daylight only).
    pub irradiance_noise: f64,
    pub price_base: f64,
    pub price_evening_peak: f64,
    pub price_peak_hour: f64,
    pub price_noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_mgs: 2,
            days: 1,
            dt_h: 0.25,
            load_mean_kw: vec![600.0, 560.0],
            load_swing: 0.15,
            load_noise: 0.01,
            sunrise_h: 6.0,
            sunset_h: 19.0,
            irradiance_peak: 0.95,
            irradiance_noise: 0.02,
            price_base: 0.04,
            price_evening_peak: 0.03,
            price_peak_hour: 19.0,
            price_noise: 0.0,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Validation(format!("synthetic spec: {m}")));
        if self.n_mgs == 0 || self.days == 0 {
            return bad("n_mgs and days must be >= 1");
        }
        if !(self.dt_h > 0.0 && self.dt_h <= 24.0) || (24.0 / self.dt_h).fract().abs() > 1e-9 {
            return bad("dt_h must divide 24 h");
        }
        if self.load_mean_kw.is_empty() || self.load_mean_kw.iter().any(|m| !(*m >= 0.0)) {
            return bad("load_mean_kw needs non-negative entries");
        }
        if !(0.0..1.0).contains(&self.load_swing) {
            return bad("load_swing must lie in [0, 1)");
        }
        if !(0.0 <= self.sunrise_h && self.sunrise_h < self.sunset_h && self.sunset_h <= 24.0) {
            return bad("need 0 <= sunrise_h < sunset_h <= 24");
        }
        if !(0.0..=1.0).contains(&self.irradiance_peak) {
            return bad("irradiance_peak must lie in [0, 1]");
        }
        for (name, v) in [
            ("load_noise", self.load_noise),
            ("irradiance_noise", self.irradiance_noise),
            ("price_base", self.price_base),
            ("price_evening_peak", self.price_evening_peak),
            ("price_noise", self.price_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be >= 0"));
            }
        }
        Ok(())
    }
}

/// Zero-mean double-peak daily shape (morning and evening peaks).
fn demand_shape(h: f64) -> f64 {
    -0.4 * (2.0 * PI * h / 24.0).cos() - 0.6 * (4.0 * PI * (h - 1.0) / 24.0).cos()
}

fn solar_bell(h: f64, rise: f64, set: f64) -> f64 {
    if h <= rise || h >= set {
        return 0.0;
    }
    (PI * (h - rise) / (set - rise)).sin().powi(2)
}

/// Seeded synthetic profile: double-peak demand with multiplicative noise, a
/// clipped solar bell and a wholesale price with an evening bump.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<ScenarioProfile, ScenarioError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_day = (24.0 / spec.dt_h).round() as usize;
    let steps = per_day * spec.days;
    let hour = |t: usize| (t % per_day) as f64 * spec.dt_h;
    let noise = |sd: f64| Normal::new(0.0, sd).expect("validated standard deviation");

    let mut p = ScenarioProfile {
        dt_h: spec.dt_h,
        wholesale_price: Vec::with_capacity(steps),
        load_kw: Vec::new(),
        irradiance: Vec::new(),
        events: Vec::new(),
    };
    let price_noise = noise(spec.price_noise);
    for t in 0..steps {
        let h = hour(t);
        let bump = (-((h - spec.price_peak_hour) / 2.0).powi(2)).exp();
        let price = spec.price_base + spec.price_evening_peak * bump + price_noise.sample(&mut rng);
        p.wholesale_price.push(price.max(0.0));
    }
    let load_noise = noise(spec.load_noise);
    let irr_noise = noise(spec.irradiance_noise);
    for mg in 0..spec.n_mgs {
        let mean = spec.load_mean_kw[mg.min(spec.load_mean_kw.len() - 1)];
        let mut load = Vec::with_capacity(steps);
        let mut irr = Vec::with_capacity(steps);
        for t in 0..steps {
            let h = hour(t);
            let l = mean * (1.0 + spec.load_swing * demand_shape(h)) * (1.0 + load_noise.sample(&mut rng));
            load.push(l.max(0.0));
            let bell = spec.irradiance_peak * solar_bell(h, spec.sunrise_h, spec.sunset_h);
            let i = if bell > 0.0 { (bell + irr_noise.sample(&mut rng)).clamp(0.0, 1.0) } else { 0.0 };
            irr.push(i);
        }
        p.load_kw.push(load);
        p.irradiance.push(irr);
    }
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::bundled;

    #[test]
    fn empty_data_section_is_rejected() {
        let text = "schema_version,1\ndt_h,1\nstep,wholesale_price_per_kwh,load_kw_mg_1,irradiance_mg_1\n";
        let err = parse_profile(text, "t").unwrap_err();
        assert!(err.to_string().contains("no timesteps"), "{err}");
    }

    #[test]
    fn negative_load_names_the_cell() {
        let text = "schema_version,1\ndt_h,1\nstep,wholesale_price_per_kwh,load_kw_mg_1,irradiance_mg_1\n0,0.1,5,0\n1,0.1,-3,0\n";
        let err = parse_profile(text, "t").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 5") && msg.contains("load_kw_mg_1"), "{msg}");
    }

    #[test]
    fn load_in_megawatts_is_a_unit_mismatch() {
        let text = "schema_version,1\ndt_h,1\nstep,wholesale_price_per_kwh,load_mw_mg_1,irradiance_mg_1\n0,0.1,5,0\n";
        let err = parse_profile(text, "t").unwrap_err();
        assert!(err.to_string().contains("unit mismatch"), "{err}");
    }

    #[test]
    fn malformed_row_reports_its_line() {
        let text =
            "# c\nschema_version,1\ndt_h,1\nstep,wholesale_price_per_kwh,load_kw_mg_1,irradiance_mg_1\n0,0.1,x,0\n";
        let err = parse_profile(text, "t").unwrap_err();
        assert!(err.to_string().contains("line 5"), "{err}");
    }

    #[test]
    fn bundled_day_round_trips() {
        let p = load_profiles(bundled("profile_day96.csv")).unwrap();
        assert_eq!(p.steps(), 96);
        assert_eq!(p.dt_h, 0.25);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        save_profiles(&p, &path).unwrap();
        assert_eq!(load_profiles(&path).unwrap(), p);
    }

    #[test]
    fn noiseless_days_repeat_exactly() {
        let spec =
            SyntheticSpec { days: 3, load_noise: 0.0, irradiance_noise: 0.0, price_noise: 0.0, ..Default::default() };
        let p = generate_synthetic(&spec, 5).unwrap();
        for mg in 0..2 {
            for t in 0..96 {
                assert_eq!(p.load_kw[mg][t], p.load_kw[mg][t + 96]);
                assert_eq!(p.irradiance[mg][t], p.irradiance[mg][t + 192]);
            }
        }
        assert_eq!(p.wholesale_price[10], p.wholesale_price[106]);
    }

    #[test]
    fn irradiance_is_zero_at_midnight() {
        let p = generate_synthetic(&SyntheticSpec { days: 4, ..Default::default() }, 9).unwrap();
        for day in 0..4 {
            for mg in 0..2 {
                assert_eq!(p.irradiance[mg][day * 96], 0.0);
            }
        }
    }

    #[test]
    fn same_seed_same_profile() {
        let s = SyntheticSpec::default();
        assert_eq!(generate_synthetic(&s, 3).unwrap(), generate_synthetic(&s, 3).unwrap());
        assert_ne!(generate_synthetic(&s, 3).unwrap(), generate_synthetic(&s, 4).unwrap());
    }
}
