//! Facility economics, energy intensities, and the system configuration
//! schema.
//!
//! Costs are annualized with the capital recovery factor: a facility with
//! investment cost `IC` (MM$ per capacity unit), lifetime `L` years, and an
//! O&M fraction `OM` contributes `IC * X * (crf(r, L) + OM)` MM$/yr at
//! installed capacity `X`. Energy intensities and the discount rate are
//! required configuration inputs, never code defaults; converter
//! efficiencies default to 98% for same-current and 95% for cross-current
//! conversion.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The technologies the models know about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacilityKind {
    WindTurbine,
    PvPanel,
    Battery,
    PemElectrolyzer,
    AlkalineElectrolyzer,
    FuelCell,
    H2Tank,
    DacPlant,
    HeatPump,
    Tes,
}

impl FacilityKind {
    pub const ALL: [FacilityKind; 10] = [
        FacilityKind::WindTurbine,
        FacilityKind::PvPanel,
        FacilityKind::Battery,
        FacilityKind::PemElectrolyzer,
        FacilityKind::AlkalineElectrolyzer,
        FacilityKind::FuelCell,
        FacilityKind::H2Tank,
        FacilityKind::DacPlant,
        FacilityKind::HeatPump,
        FacilityKind::Tes,
    ];

    /// Unit of the capacity variable for this kind.
    pub fn capacity_unit(self) -> &'static str {
        match self {
            FacilityKind::WindTurbine
            | FacilityKind::PvPanel
            | FacilityKind::PemElectrolyzer
            | FacilityKind::AlkalineElectrolyzer
            | FacilityKind::FuelCell
            | FacilityKind::HeatPump => "MW",
            FacilityKind::Battery => "MWh",
            FacilityKind::H2Tank => "t H2",
            FacilityKind::DacPlant => "t CO2/h",
            FacilityKind::Tes => "MWh_th",
        }
    }

    /// Stable snake_case identifier (matches the JSON encoding).
    pub fn id(self) -> &'static str {
        match self {
            FacilityKind::WindTurbine => "wind_turbine",
            FacilityKind::PvPanel => "pv_panel",
            FacilityKind::Battery => "battery",
            FacilityKind::PemElectrolyzer => "pem_electrolyzer",
            FacilityKind::AlkalineElectrolyzer => "alkaline_electrolyzer",
            FacilityKind::FuelCell => "fuel_cell",
            FacilityKind::H2Tank => "h2_tank",
            FacilityKind::DacPlant => "dac_plant",
            FacilityKind::HeatPump => "heat_pump",
            FacilityKind::Tes => "tes",
        }
    }

    pub fn is_electrolyzer(self) -> bool {
        matches!(
            self,
            FacilityKind::PemElectrolyzer | FacilityKind::AlkalineElectrolyzer
        )
    }

    fn may_have_min_load(self) -> bool {
        self.is_electrolyzer() || self == FacilityKind::HeatPump
    }
}

impl fmt::Display for FacilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// One technology's economics and operating envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacilitySpec {
    pub kind: FacilityKind,
    /// MM$ per capacity unit.
    pub investment_cost: f64,
    /// Years; must be >= 1.
    pub lifetime: u32,
    /// Fraction of the investment cost paid per year for O&M.
    pub om_fraction: f64,
    /// Lowest admissible operating fraction of installed capacity; nonzero
    /// only for electrolyzers and the heat pump.
    #[serde(default)]
    pub min_load_fraction: f64,
}

impl FacilitySpec {
    fn validate(&self) -> Result<()> {
        let key = |f: &str| format!("facilities[{}].{}", self.kind, f);
        if !(self.investment_cost >= 0.0) {
            return Err(Error::invalid_field(
                key("investment_cost"),
                format!("must be >= 0, got {}", self.investment_cost),
            ));
        }
        if self.lifetime < 1 {
            return Err(Error::invalid_field(key("lifetime"), "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.om_fraction) {
            return Err(Error::invalid_field(
                key("om_fraction"),
                format!("must be in [0, 1], got {}", self.om_fraction),
            ));
        }
        if !(0.0..=1.0).contains(&self.min_load_fraction) {
            return Err(Error::invalid_field(
                key("min_load_fraction"),
                format!("must be in [0, 1], got {}", self.min_load_fraction),
            ));
        }
        if self.min_load_fraction > 0.0 && !self.kind.may_have_min_load() {
            return Err(Error::invalid_field(
                key("min_load_fraction"),
                "only electrolyzers and the heat pump may declare a minimum load",
            ));
        }
        Ok(())
    }
}

/// Discount-rate block of the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomicParams {
    /// Per-year discount rate `r`, `0 <= r < 1`. Required input: the source
    /// analysis does not publish its value.
    pub discount_rate: f64,
}

/// Conversion factors between energy carriers. All values are required
/// configuration inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyIntensities {
    /// MWh of electricity per tonne of H2 produced.
    pub electrolyzer_mwh_per_t_h2: f64,
    /// MWh of electricity recovered per tonne of H2 consumed by the fuel cell.
    pub fuel_cell_mwh_out_per_t_h2: f64,
    /// MWh of electricity per tonne of CO2 captured.
    pub dac_elec_mwh_per_t_co2: f64,
    /// MWh of heat per tonne of CO2 captured.
    pub dac_heat_mwhth_per_t_co2: f64,
    /// MWh of heat produced per MWh of electricity drawn by the heat pump.
    pub heat_pump_cop: f64,
    pub battery_charge_eff: f64,
    pub battery_discharge_eff: f64,
    pub tes_charge_eff: f64,
    pub tes_discharge_eff: f64,
    /// Battery energy-to-power ratio: charge and discharge are each limited
    /// to capacity / duration.
    #[serde(default = "default_battery_duration")]
    pub battery_duration_h: f64,
}

fn default_battery_duration() -> f64 {
    8.0
}

impl EnergyIntensities {
    fn validate(&self) -> Result<()> {
        let positive: [(&str, f64); 6] = [
            ("intensities.electrolyzer_mwh_per_t_h2", self.electrolyzer_mwh_per_t_h2),
            ("intensities.fuel_cell_mwh_out_per_t_h2", self.fuel_cell_mwh_out_per_t_h2),
            ("intensities.dac_elec_mwh_per_t_co2", self.dac_elec_mwh_per_t_co2),
            ("intensities.dac_heat_mwhth_per_t_co2", self.dac_heat_mwhth_per_t_co2),
            ("intensities.heat_pump_cop", self.heat_pump_cop),
            ("intensities.battery_duration_h", self.battery_duration_h),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::invalid_field(name, format!("must be > 0, got {v}")));
            }
        }
        if self.heat_pump_cop < 1.0 {
            return Err(Error::invalid_field(
                "intensities.heat_pump_cop",
                format!("must be >= 1, got {}", self.heat_pump_cop),
            ));
        }
        let efficiencies: [(&str, f64); 4] = [
            ("intensities.battery_charge_eff", self.battery_charge_eff),
            ("intensities.battery_discharge_eff", self.battery_discharge_eff),
            ("intensities.tes_charge_eff", self.tes_charge_eff),
            ("intensities.tes_discharge_eff", self.tes_discharge_eff),
        ];
        for (name, v) in efficiencies {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid_field(
                    name,
                    format!("must be in (0, 1], got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// Converter efficiencies; `ac_dc` applies in both conversion directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterEfficiencies {
    #[serde(default = "default_dc_dc")]
    pub dc_dc: f64,
    #[serde(default = "default_ac_ac")]
    pub ac_ac: f64,
    #[serde(default = "default_ac_dc")]
    pub ac_dc: f64,
}

fn default_dc_dc() -> f64 {
    0.98
}
fn default_ac_ac() -> f64 {
    0.98
}
fn default_ac_dc() -> f64 {
    0.95
}

impl Default for ConverterEfficiencies {
    fn default() -> Self {
        ConverterEfficiencies {
            dc_dc: 0.98,
            ac_ac: 0.98,
            ac_dc: 0.95,
        }
    }
}

impl ConverterEfficiencies {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("converters.dc_dc", self.dc_dc),
            ("converters.ac_ac", self.ac_ac),
            ("converters.ac_dc", self.ac_dc),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid_field(
                    name,
                    format!("must be in (0, 1], got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// Bus topology of the coupled system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusMode {
    DcOnly,
    AcOnly,
    Hybrid,
}

impl fmt::Display for BusMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BusMode::DcOnly => "dc_only",
            BusMode::AcOnly => "ac_only",
            BusMode::Hybrid => "hybrid",
        })
    }
}

/// Whether the annual CO2 target binds in every scenario or only in
/// probability-weighted expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Co2Enforcement {
    #[default]
    PerScenario,
    Expectation,
}

/// Annual service demands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSpec {
    /// Tonnes of H2 per year, delivered as a constant hourly rate.
    pub h2_t_per_yr: f64,
    /// Tonnes of CO2 to capture per year.
    pub co2_t_per_yr: f64,
}

/// Full system configuration. Mirrors the JSON document; unknown keys are
/// rejected to catch typos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub facilities: Vec<FacilitySpec>,
    pub economics: EconomicParams,
    pub intensities: EnergyIntensities,
    #[serde(default)]
    pub converters: ConverterEfficiencies,
    pub demand: DemandSpec,
    #[serde(default = "default_bus_mode")]
    pub bus_mode: BusMode,
    #[serde(default)]
    pub co2_enforcement: Co2Enforcement,
}

fn default_bus_mode() -> BusMode {
    BusMode::Hybrid
}

impl SystemConfig {
    /// Parse a JSON document and validate it. Unknown keys, out-of-range
    /// fractions, and duplicate facility kinds are rejected with the
    /// offending key named in the error.
    pub fn from_json(text: &str) -> Result<SystemConfig> {
        let raw: SystemConfig = serde_json::from_str(text)?;
        validate_config(raw)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn facility(&self, kind: FacilityKind) -> Option<&FacilitySpec> {
        self.facilities.iter().find(|f| f.kind == kind)
    }

    pub fn facility_mut(&mut self, kind: FacilityKind) -> Option<&mut FacilitySpec> {
        self.facilities.iter_mut().find(|f| f.kind == kind)
    }

    /// The facility spec, or a build error naming the missing kind.
    pub fn require_facility(&self, kind: FacilityKind) -> Result<&FacilitySpec> {
        self.facility(kind)
            .ok_or(Error::MissingFacility(kind.id()))
    }

    /// Annualized cost of one capacity unit of `kind`: `IC * (CRF + OM)`.
    pub fn unit_annual_cost(&self, kind: FacilityKind) -> Result<f64> {
        let spec = self.require_facility(kind)?;
        annualized_cost(spec, 1.0, self.economics.discount_rate)
    }

    /// Constant hourly H2 delivery rate in t/h.
    pub fn h2_demand_hourly(&self) -> f64 {
        self.demand.h2_t_per_yr / crate::HOURS_PER_YEAR
    }
}

/// Capital recovery factor `r(1+r)^L / ((1+r)^L - 1)`; at `r = 0` the
/// formula degenerates to 0/0 and the analytic limit `1/L` is returned.
pub fn crf(rate: f64, lifetime: u32) -> Result<f64> {
    if !(rate >= 0.0 && rate < 1.0) {
        return Err(Error::invalid_field(
            "discount_rate",
            format!("must be in [0, 1), got {rate}"),
        ));
    }
    if lifetime < 1 {
        return Err(Error::invalid_field("lifetime", "must be >= 1"));
    }
    if rate == 0.0 {
        return Ok(1.0 / lifetime as f64);
    }
    let growth = (1.0 + rate).powi(lifetime as i32);
    Ok(rate * growth / (growth - 1.0))
}

/// Annualized cost in MM$/yr of `capacity` units of a facility:
/// `IC * capacity * (crf(r, L) + OM)`.
pub fn annualized_cost(spec: &FacilitySpec, capacity: f64, rate: f64) -> Result<f64> {
    if !(capacity >= 0.0) {
        return Err(Error::invalid_field(
            "capacity",
            format!("must be >= 0, got {capacity}"),
        ));
    }
    let crf = crf(rate, spec.lifetime)?;
    Ok(spec.investment_cost * capacity * (crf + spec.om_fraction))
}

/// Validate all invariants of a parsed configuration and return it with
/// defaults filled. Idempotent: a validated config revalidates unchanged.
pub fn validate_config(cfg: SystemConfig) -> Result<SystemConfig> {
    let mut seen = BTreeSet::new();
    for spec in &cfg.facilities {
        spec.validate()?;
        if !seen.insert(spec.kind) {
            return Err(Error::invalid_field(
                "facilities",
                format!("duplicate facility kind `{}`", spec.kind),
            ));
        }
    }
    let r = cfg.economics.discount_rate;
    if !(r >= 0.0 && r < 1.0) {
        return Err(Error::invalid_field(
            "economics.discount_rate",
            format!("must be in [0, 1), got {r}"),
        ));
    }
    cfg.intensities.validate()?;
    cfg.converters.validate()?;
    if !(cfg.demand.h2_t_per_yr >= 0.0) {
        return Err(Error::invalid_field(
            "demand.h2_t_per_yr",
            format!("must be >= 0, got {}", cfg.demand.h2_t_per_yr),
        ));
    }
    if !(cfg.demand.co2_t_per_yr >= 0.0) {
        return Err(Error::invalid_field(
            "demand.co2_t_per_yr",
            format!("must be >= 0, got {}", cfg.demand.co2_t_per_yr),
        ));
    }
    Ok(cfg)
}

/// The repo's example configuration (Table-1 style economics, assumption
/// intensities); shared across the unit-test suite.
#[cfg(test)]
pub(crate) fn test_config() -> SystemConfig {
    SystemConfig::from_json(include_str!("../../../configs/default.json"))
        .expect("shipped example config is valid")
}
