//! Two-stage stochastic LP construction for the three system topologies.
//!
//! First-stage columns are facility capacities; second-stage columns are
//! per-scenario hourly dispatch. The standalone hydrogen system lives on a
//! DC bus (wind crosses in at the AC/DC efficiency, DC-native devices at
//! the DC/DC efficiency, the electrolyzer draws directly); the standalone
//! capture system mirrors that on an AC bus. The coupled hybrid keeps each
//! device on its native bus with lossless attachment and prices only the
//! inter-bus transfers at the AC/DC efficiency, so any pair of standalone
//! designs stays feasible after merging; single-bus coupled variants put
//! every device behind its corresponding converter instead.
//!
//! Storage balances are cyclic (the first hour wraps to the last), which
//! rules out free end-of-horizon energy. Minimum loads of the electrolyzer
//! and heat pump are hard lower bounds proportional to installed capacity;
//! the capture plant may idle at zero.

use std::collections::BTreeMap;

use crate::domain::{BusMode, Co2Enforcement, FacilityKind, SystemConfig, annualized_cost};
use crate::lp::{LpProblem, RowSense};
use crate::scenario::ScenarioSet;
use crate::simplex::{SolveResult, SolveStatus};
use crate::{Error, Result};

/// Which of the three systems an LP encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    StandaloneGh,
    StandaloneDac,
    Coupled,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::StandaloneGh => "gh",
            ModelKind::StandaloneDac => "dac",
            ModelKind::Coupled => "coupled",
        }
    }
}

/// Second-stage (dispatch) variable families, one column per scenario-hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DispatchVar {
    UsedWind,
    UsedPv,
    BatteryCharge,
    BatteryDischarge,
    BatterySoc,
    ElectrolyzerPower,
    FuelCellPower,
    TankInflow,
    TankOutflow,
    TankLevel,
    HeatPumpPower,
    TesCharge,
    TesDischarge,
    TesLevel,
    DacCapture,
    DcToAc,
    AcToDc,
}

impl DispatchVar {
    pub fn id(self) -> &'static str {
        match self {
            DispatchVar::UsedWind => "u_wt",
            DispatchVar::UsedPv => "u_pv",
            DispatchVar::BatteryCharge => "b_ch",
            DispatchVar::BatteryDischarge => "b_dis",
            DispatchVar::BatterySoc => "b_soc",
            DispatchVar::ElectrolyzerPower => "p_el",
            DispatchVar::FuelCellPower => "p_fc",
            DispatchVar::TankInflow => "h_in",
            DispatchVar::TankOutflow => "h_out",
            DispatchVar::TankLevel => "h_lvl",
            DispatchVar::HeatPumpPower => "p_hp",
            DispatchVar::TesCharge => "q_ch",
            DispatchVar::TesDischarge => "q_dis",
            DispatchVar::TesLevel => "q_lvl",
            DispatchVar::DacCapture => "d_dac",
            DispatchVar::DcToAc => "x_dc2ac",
            DispatchVar::AcToDc => "x_ac2dc",
        }
    }

    fn gh_set() -> &'static [DispatchVar] {
        &[
            DispatchVar::UsedWind,
            DispatchVar::UsedPv,
            DispatchVar::BatteryCharge,
            DispatchVar::BatteryDischarge,
            DispatchVar::BatterySoc,
            DispatchVar::ElectrolyzerPower,
            DispatchVar::FuelCellPower,
            DispatchVar::TankInflow,
            DispatchVar::TankOutflow,
            DispatchVar::TankLevel,
        ]
    }

    fn dac_set() -> &'static [DispatchVar] {
        &[
            DispatchVar::UsedWind,
            DispatchVar::UsedPv,
            DispatchVar::BatteryCharge,
            DispatchVar::BatteryDischarge,
            DispatchVar::BatterySoc,
            DispatchVar::HeatPumpPower,
            DispatchVar::TesCharge,
            DispatchVar::TesDischarge,
            DispatchVar::TesLevel,
            DispatchVar::DacCapture,
        ]
    }
}

/// Map from model entities to LP columns.
#[derive(Debug, Clone)]
pub struct VarCatalog {
    pub model: ModelKind,
    pub bus_mode: BusMode,
    pub electrolyzer: Option<FacilityKind>,
    pub n_scenarios: usize,
    pub horizon: usize,
    pub capacity_cols: BTreeMap<FacilityKind, usize>,
    dispatch_cols: BTreeMap<DispatchVar, Vec<usize>>,
}

impl VarCatalog {
    pub fn col(&self, var: DispatchVar, scenario: usize, hour: usize) -> usize {
        self.dispatch_cols[&var][scenario * self.horizon + hour]
    }

    pub fn has(&self, var: DispatchVar) -> bool {
        self.dispatch_cols.contains_key(&var)
    }

    pub fn dispatch_vars(&self) -> impl Iterator<Item = DispatchVar> + '_ {
        self.dispatch_cols.keys().copied()
    }

    pub fn capacity_col(&self, kind: FacilityKind) -> Option<usize> {
        self.capacity_cols.get(&kind).copied()
    }

    /// Columns penalized by the dispatch tie-break pass: storage
    /// throughput and inter-bus transfers.
    pub fn throughput_cols(&self) -> Vec<usize> {
        let mut cols = Vec::new();
        for var in [
            DispatchVar::BatteryCharge,
            DispatchVar::BatteryDischarge,
            DispatchVar::TankInflow,
            DispatchVar::TankOutflow,
            DispatchVar::TesCharge,
            DispatchVar::TesDischarge,
            DispatchVar::DcToAc,
            DispatchVar::AcToDc,
        ] {
            if let Some(ids) = self.dispatch_cols.get(&var) {
                cols.extend_from_slice(ids);
            }
        }
        cols
    }
}

struct ModelBuilder<'a> {
    cfg: &'a SystemConfig,
    scen: &'a ScenarioSet,
    lp: LpProblem,
    cat: VarCatalog,
}

impl<'a> ModelBuilder<'a> {
    fn new(
        cfg: &'a SystemConfig,
        scen: &'a ScenarioSet,
        model: ModelKind,
        bus_mode: BusMode,
        electrolyzer: Option<FacilityKind>,
        name: &str,
    ) -> Result<Self> {
        scen.validate()?;
        if let Some(kind) = electrolyzer {
            if !kind.is_electrolyzer() {
                return Err(Error::invalid_field(
                    "electrolyzer",
                    format!("{kind} is not an electrolyzer"),
                ));
            }
        }
        Ok(ModelBuilder {
            cfg,
            scen,
            lp: LpProblem::new(name),
            cat: VarCatalog {
                model,
                bus_mode,
                electrolyzer,
                n_scenarios: scen.n_scenarios(),
                horizon: scen.horizon_h,
                capacity_cols: BTreeMap::new(),
                dispatch_cols: BTreeMap::new(),
            },
        })
    }

    fn short(kind: FacilityKind) -> &'static str {
        match kind {
            FacilityKind::WindTurbine => "wt",
            FacilityKind::PvPanel => "pv",
            FacilityKind::Battery => "batt",
            FacilityKind::PemElectrolyzer | FacilityKind::AlkalineElectrolyzer => "el",
            FacilityKind::FuelCell => "fc",
            FacilityKind::H2Tank => "tank",
            FacilityKind::DacPlant => "dac",
            FacilityKind::HeatPump => "hp",
            FacilityKind::Tes => "tes",
        }
    }

    fn add_capacity(&mut self, kind: FacilityKind) -> Result<usize> {
        let spec = self.cfg.require_facility(kind)?;
        let cost = annualized_cost(spec, 1.0, self.cfg.economics.discount_rate)?;
        let col = self
            .lp
            .add_col(format!("X_{}", Self::short(kind)), 0.0, f64::INFINITY, cost);
        self.cat.capacity_cols.insert(kind, col);
        Ok(col)
    }

    fn add_dispatch(&mut self, vars: &[DispatchVar]) {
        let n = self.cat.n_scenarios * self.cat.horizon;
        for &var in vars {
            self.cat.dispatch_cols.insert(var, Vec::with_capacity(n));
        }
        for s in 0..self.cat.n_scenarios {
            for t in 0..self.cat.horizon {
                for &var in vars {
                    let col = self.lp.add_col(
                        format!("{}_s{s}_t{t}", var.id()),
                        0.0,
                        f64::INFINITY,
                        0.0,
                    );
                    self.cat.dispatch_cols.get_mut(&var).unwrap().push(col);
                }
            }
        }
    }

    /// Add a row, merging duplicate columns and dropping zero coefficients
    /// (a cyclic recursion over a one-hour horizon collapses the level
    /// variable out of its own balance).
    fn row(
        &mut self,
        name: String,
        sense: RowSense,
        rhs: f64,
        entries: Vec<(usize, f64)>,
    ) -> Result<()> {
        let mut sorted = entries;
        sorted.sort_unstable_by_key(|(c, _)| *c);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(sorted.len());
        for (c, v) in sorted {
            match merged.last_mut() {
                Some((last, acc)) if *last == c => *acc += v,
                _ => merged.push((c, v)),
            }
        }
        merged.retain(|(_, v)| *v != 0.0);
        if merged.is_empty() {
            if rhs == 0.0 {
                return Ok(());
            }
            return Err(Error::InvalidLp(format!(
                "row `{name}` reduced to 0 {} {rhs}",
                sense.symbol()
            )));
        }
        self.lp.add_row(name, sense, rhs, merged)?;
        Ok(())
    }

    fn col(&self, var: DispatchVar, s: usize, t: usize) -> usize {
        self.cat.col(var, s, t)
    }

    /// Renewable availability caps: `u <= cf * X`.
    fn renewable_caps(&mut self, s: usize, t: usize) -> Result<()> {
        let x_wt = self.cat.capacity_cols[&FacilityKind::WindTurbine];
        let x_pv = self.cat.capacity_cols[&FacilityKind::PvPanel];
        let wind_cf = self.scen.scenarios[s].wind_cf[t];
        let solar_cf = self.scen.scenarios[s].solar_cf[t];
        self.row(
            format!("wind_cap_s{s}_t{t}"),
            RowSense::Le,
            0.0,
            vec![(self.col(DispatchVar::UsedWind, s, t), 1.0), (x_wt, -wind_cf)],
        )?;
        self.row(
            format!("pv_cap_s{s}_t{t}"),
            RowSense::Le,
            0.0,
            vec![(self.col(DispatchVar::UsedPv, s, t), 1.0), (x_pv, -solar_cf)],
        )?;
        Ok(())
    }

    /// Battery state recursion (cyclic), energy cap, and power caps.
    fn battery_block(&mut self, s: usize, t: usize) -> Result<()> {
        let x_batt = self.cat.capacity_cols[&FacilityKind::Battery];
        let intens = &self.cfg.intensities;
        let t_prev = if t == 0 { self.cat.horizon - 1 } else { t - 1 };
        self.row(
            format!("soc_s{s}_t{t}"),
            RowSense::Eq,
            0.0,
            vec![
                (self.col(DispatchVar::BatterySoc, s, t), 1.0),
                (self.col(DispatchVar::BatterySoc, s, t_prev), -1.0),
                (
                    self.col(DispatchVar::BatteryCharge, s, t),
                    -intens.battery_charge_eff,
                ),
                (
                    self.col(DispatchVar::BatteryDischarge, s, t),
                    1.0 / intens.battery_discharge_eff,
                ),
            ],
        )?;
        self.row(
            format!("soc_cap_s{s}_t{t}"),
            RowSense::Le,
            0.0,
            vec![(self.col(DispatchVar::BatterySoc, s, t), 1.0), (x_batt, -1.0)],
        )?;
        let power_per_cap = 1.0 / intens.battery_duration_h;
        self.row(
            format!("bch_cap_s{s}_t{t}"),
            RowSense::Le,
            0.0,
            vec![
                (self.col(DispatchVar::BatteryCharge, s, t), 1.0),
                (x_batt, -power_per_cap),
            ],
        )?;
        self.row(
            format!("bdis_cap_s{s}_t{t}"),
            RowSense::Le,
            0.0,
            vec![
                (self.col(DispatchVar::BatteryDischarge, s, t), 1.0),
                (x_batt, -power_per_cap),
            ],
        )?;
        Ok(())
    }

    /// Electrolyzer envelope, hydrogen node balance, tank recursion and
    /// cap, fuel cell cap.
    fn hydrogen_block(&mut self, s: usize, t: usize) -> Result<()> {
        let el_kind = self
            .cat
            .electrolyzer
            .expect("hydrogen block requires an electrolyzer");
        let x_el = self.cat.capacity_cols[&el_kind];
        let x_fc = self.cat.capacity_cols[&FacilityKind::FuelCell];
        let x_tank = self.cat.capacity_cols[&FacilityKind::H2Tank];
        let intens = &self.cfg.intensities;
        let min_load = self.cfg.require_facility(el_kind)?.min_load_fraction;

        self.row(
            format!("el_max_s{s}_t{t}"),
            RowSense::Le,
            0.0,
            vec![
                (self.col(DispatchVar::ElectrolyzerPower, s, t), 1.0),
                (x_el, -1.0),
            ],
        )?;
        if min_load > 0.0 {
            self.row(
                format!("el_min_s{s}_t{t}"),
                RowSense::Le,
                0.0,
                vec![
                    (x_el, min_load),
                    (self.col(DispatchVar::ElectrolyzerPower, s, t), -1.0),
                ],
            )?;
        }
        // Production = demand + tank inflow - tank outflow + fuel-cell use.
        self.row(
            format!("h2_bal_s{s}_t{t}"),
            RowSense::Eq,
            self.cfg.h2_demand_hourly(),
            vec![
                (
                    self.col(DispatchVar::ElectrolyzerPower, s, t),
                    1.0 / intens.electrolyzer_mwh_per_t_h2,
                ),
                (self.col(DispatchVar::TankInflow, s, t), -1.0),
                (self.col(DispatchVar::TankOutflow, s, t), 1.0),
                (
                    self.col(DispatchVar::FuelCellPower, s, t),
                    -1.0 / intens.fuel_cell_mwh_out_per_t_h2,
                ),
            ],
        )?;
        let t_prev = if t == 0 { self.cat.horizon - 1 } else { t - 1 };
        self.row(
            format!("h_lvl_s{s}_t{t}"),
            RowSense::Eq,
            0.0,
            vec![
                (self.col(DispatchVar::TankLevel, s, t), 1.0),
                (self.col(DispatchVar::TankLevel, s, t_prev), -1.0),
                (self.col(DispatchVar::TankInflow, s, t), -1.0),
                (self.col(DispatchVar::TankOutflow, s, t), 1.0),
            ],
        )?;
        self.row(
            format!("tank_cap_s{s}_t{t}"),
            RowSense::Le,
            0.0,
            vec![(self.col(DispatchVar::TankLevel, s, t), 1.0), (x_tank, -1.0)],
        )?;
        self.row(
            format!("fc_cap_s{s}_t{t}"),
            RowSense::Le,
            0.0,
            vec![
                (self.col(DispatchVar::FuelCellPower, s, t), 1.0),
                (x_fc, -1.0),
            ],
        )?;
        Ok(())
    }

    /// Heat pump envelope, heat balance, TES recursion and cap, capture cap.
    fn heat_block(&mut self, s: usize, t: usize) -> Result<()> {
        let x_hp = self.cat.capacity_cols[&FacilityKind::HeatPump];
        let x_tes = self.cat.capacity_cols[&FacilityKind::Tes];
        let x_dac = self.cat.capacity_cols[&FacilityKind::DacPlant];
        let intens = &self.cfg.intensities;
        let min_load = self
            .cfg
            .require_facility(FacilityKind::HeatPump)?
            .min_load_fraction;

        self.row(
            format!("hp_max_s{s}_t{t}"),
            RowSense::Le,
            0.0,
            vec![
                (self.col(DispatchVar::HeatPumpPower, s, t), 1.0),
                (x_hp, -1.0),
            ],
        )?;
        if min_load > 0.0 {
            self.row(
                format!("hp_min_s{s}_t{t}"),
                RowSense::Le,
                0.0,
                vec![
                    (x_hp, min_load),
                    (self.col(DispatchVar::HeatPumpPower, s, t), -1.0),
                ],
            )?;
        }
        // Heat from the pump and TES discharge covers TES charge plus the
        // desorption heat of the capture plant; the TES discharge
        // efficiency applies at the heat bus.
        self.row(
            format!("heat_bal_s{s}_t{t}"),
            RowSense::Eq,
            0.0,
            vec![
                (
                    self.col(DispatchVar::HeatPumpPower, s, t),
                    intens.heat_pump_cop,
                ),
                (
                    self.col(DispatchVar::TesDischarge, s, t),
                    intens.tes_discharge_eff,
                ),
                (self.col(DispatchVar::TesCharge, s, t), -1.0),
                (
                    self.col(DispatchVar::DacCapture, s, t),
                    -intens.dac_heat_mwhth_per_t_co2,
                ),
            ],
        )?;
        let t_prev = if t == 0 { self.cat.horizon - 1 } else { t - 1 };
        self.row(
            format!("q_lvl_s{s}_t{t}"),
            RowSense::Eq,
            0.0,
            vec![
                (self.col(DispatchVar::TesLevel, s, t), 1.0),
                (self.col(DispatchVar::TesLevel, s, t_prev), -1.0),
                (
                    self.col(DispatchVar::TesCharge, s, t),
                    -intens.tes_charge_eff,
                ),
                (self.col(DispatchVar::TesDischarge, s, t), 1.0),
            ],
        )?;
        self.row(
            format!("tes_cap_s{s}_t{t}"),
            RowSense::Le,
            0.0,
            vec![(self.col(DispatchVar::TesLevel, s, t), 1.0), (x_tes, -1.0)],
        )?;
        self.row(
            format!("dac_cap_s{s}_t{t}"),
            RowSense::Le,
            0.0,
            vec![(self.col(DispatchVar::DacCapture, s, t), 1.0), (x_dac, -1.0)],
        )?;
        Ok(())
    }

    /// Annual capture target, per scenario or in expectation.
    fn co2_rows(&mut self) -> Result<()> {
        let target = self.cfg.demand.co2_t_per_yr;
        if target == 0.0 {
            return Ok(());
        }
        let weight = self.scen.annualization_weight();
        match self.cfg.co2_enforcement {
            Co2Enforcement::PerScenario => {
                for s in 0..self.cat.n_scenarios {
                    let entries = (0..self.cat.horizon)
                        .map(|t| (self.col(DispatchVar::DacCapture, s, t), weight))
                        .collect();
                    self.row(format!("co2_target_s{s}"), RowSense::Ge, target, entries)?;
                }
            }
            Co2Enforcement::Expectation => {
                let mut entries = Vec::new();
                for s in 0..self.cat.n_scenarios {
                    let p = self.scen.scenarios[s].probability;
                    for t in 0..self.cat.horizon {
                        entries.push((self.col(DispatchVar::DacCapture, s, t), p * weight));
                    }
                }
                self.row("co2_target_exp".to_string(), RowSense::Ge, target, entries)?;
            }
        }
        Ok(())
    }

    fn finish(self) -> (LpProblem, VarCatalog) {
        (self.lp, self.cat)
    }
}

/// The standalone hydrogen system on a DC bus.
pub fn build_standalone_gh(
    cfg: &SystemConfig,
    scen: &ScenarioSet,
    electrolyzer: FacilityKind,
) -> Result<(LpProblem, VarCatalog)> {
    let mut b = ModelBuilder::new(
        cfg,
        scen,
        ModelKind::StandaloneGh,
        BusMode::DcOnly,
        Some(electrolyzer),
        "standalone_gh",
    )?;
    for kind in [
        FacilityKind::WindTurbine,
        FacilityKind::PvPanel,
        FacilityKind::Battery,
        electrolyzer,
        FacilityKind::FuelCell,
        FacilityKind::H2Tank,
    ] {
        b.add_capacity(kind)?;
    }
    b.add_dispatch(DispatchVar::gh_set());
    let conv = cfg.converters.clone();
    for s in 0..b.cat.n_scenarios {
        for t in 0..b.cat.horizon {
            b.renewable_caps(s, t)?;
            b.row(
                format!("dc_bal_s{s}_t{t}"),
                RowSense::Eq,
                0.0,
                vec![
                    (b.col(DispatchVar::UsedWind, s, t), conv.ac_dc),
                    (b.col(DispatchVar::UsedPv, s, t), conv.dc_dc),
                    (b.col(DispatchVar::BatteryDischarge, s, t), conv.dc_dc),
                    (b.col(DispatchVar::FuelCellPower, s, t), conv.dc_dc),
                    (b.col(DispatchVar::ElectrolyzerPower, s, t), -1.0),
                    (b.col(DispatchVar::BatteryCharge, s, t), -1.0 / conv.dc_dc),
                ],
            )?;
            b.battery_block(s, t)?;
            b.hydrogen_block(s, t)?;
        }
    }
    Ok(b.finish())
}

/// The standalone capture system on an AC bus.
pub fn build_standalone_dac(
    cfg: &SystemConfig,
    scen: &ScenarioSet,
) -> Result<(LpProblem, VarCatalog)> {
    let mut b = ModelBuilder::new(
        cfg,
        scen,
        ModelKind::StandaloneDac,
        BusMode::AcOnly,
        None,
        "standalone_dac",
    )?;
    for kind in [
        FacilityKind::WindTurbine,
        FacilityKind::PvPanel,
        FacilityKind::Battery,
        FacilityKind::DacPlant,
        FacilityKind::HeatPump,
        FacilityKind::Tes,
    ] {
        b.add_capacity(kind)?;
    }
    b.add_dispatch(DispatchVar::dac_set());
    let conv = cfg.converters.clone();
    let e_dac = cfg.intensities.dac_elec_mwh_per_t_co2;
    for s in 0..b.cat.n_scenarios {
        for t in 0..b.cat.horizon {
            b.renewable_caps(s, t)?;
            b.row(
                format!("ac_bal_s{s}_t{t}"),
                RowSense::Eq,
                0.0,
                vec![
                    (b.col(DispatchVar::UsedWind, s, t), conv.ac_ac),
                    (b.col(DispatchVar::UsedPv, s, t), conv.ac_dc),
                    (b.col(DispatchVar::BatteryDischarge, s, t), conv.ac_dc),
                    (b.col(DispatchVar::HeatPumpPower, s, t), -1.0),
                    (b.col(DispatchVar::DacCapture, s, t), -e_dac),
                    (b.col(DispatchVar::BatteryCharge, s, t), -1.0 / conv.ac_dc),
                ],
            )?;
            b.battery_block(s, t)?;
            b.heat_block(s, t)?;
        }
    }
    b.co2_rows()?;
    Ok(b.finish())
}

/// The sector-coupled system under the configured bus mode.
pub fn build_coupled(
    cfg: &SystemConfig,
    scen: &ScenarioSet,
    electrolyzer: FacilityKind,
) -> Result<(LpProblem, VarCatalog)> {
    let mode = cfg.bus_mode;
    let mut b = ModelBuilder::new(
        cfg,
        scen,
        ModelKind::Coupled,
        mode,
        Some(electrolyzer),
        &format!("coupled_{mode}"),
    )?;
    for kind in [
        FacilityKind::WindTurbine,
        FacilityKind::PvPanel,
        FacilityKind::Battery,
        electrolyzer,
        FacilityKind::FuelCell,
        FacilityKind::H2Tank,
        FacilityKind::DacPlant,
        FacilityKind::HeatPump,
        FacilityKind::Tes,
    ] {
        b.add_capacity(kind)?;
    }
    let mut vars: Vec<DispatchVar> = DispatchVar::gh_set().to_vec();
    let extra: Vec<DispatchVar> = DispatchVar::dac_set()
        .iter()
        .filter(|v| !vars.contains(v))
        .copied()
        .collect();
    vars.extend(extra);
    if mode == BusMode::Hybrid {
        vars.push(DispatchVar::DcToAc);
        vars.push(DispatchVar::AcToDc);
    }
    b.add_dispatch(&vars);

    let conv = cfg.converters.clone();
    let e_dac = cfg.intensities.dac_elec_mwh_per_t_co2;
    for s in 0..b.cat.n_scenarios {
        for t in 0..b.cat.horizon {
            b.renewable_caps(s, t)?;
            match mode {
                BusMode::Hybrid => {
                    b.row(
                        format!("dc_bal_s{s}_t{t}"),
                        RowSense::Eq,
                        0.0,
                        vec![
                            (b.col(DispatchVar::UsedPv, s, t), 1.0),
                            (b.col(DispatchVar::BatteryDischarge, s, t), 1.0),
                            (b.col(DispatchVar::FuelCellPower, s, t), 1.0),
                            (b.col(DispatchVar::AcToDc, s, t), conv.ac_dc),
                            (b.col(DispatchVar::ElectrolyzerPower, s, t), -1.0),
                            (b.col(DispatchVar::BatteryCharge, s, t), -1.0),
                            (b.col(DispatchVar::DcToAc, s, t), -1.0),
                        ],
                    )?;
                    b.row(
                        format!("ac_bal_s{s}_t{t}"),
                        RowSense::Eq,
                        0.0,
                        vec![
                            (b.col(DispatchVar::UsedWind, s, t), 1.0),
                            (b.col(DispatchVar::DcToAc, s, t), conv.ac_dc),
                            (b.col(DispatchVar::HeatPumpPower, s, t), -1.0),
                            (b.col(DispatchVar::DacCapture, s, t), -e_dac),
                            (b.col(DispatchVar::AcToDc, s, t), -1.0),
                        ],
                    )?;
                }
                BusMode::DcOnly => {
                    b.row(
                        format!("dc_bal_s{s}_t{t}"),
                        RowSense::Eq,
                        0.0,
                        vec![
                            (b.col(DispatchVar::UsedWind, s, t), conv.ac_dc),
                            (b.col(DispatchVar::UsedPv, s, t), conv.dc_dc),
                            (b.col(DispatchVar::BatteryDischarge, s, t), conv.dc_dc),
                            (b.col(DispatchVar::FuelCellPower, s, t), conv.dc_dc),
                            (b.col(DispatchVar::ElectrolyzerPower, s, t), -1.0),
                            (b.col(DispatchVar::BatteryCharge, s, t), -1.0 / conv.dc_dc),
                            (b.col(DispatchVar::HeatPumpPower, s, t), -1.0 / conv.ac_dc),
                            (b.col(DispatchVar::DacCapture, s, t), -e_dac / conv.ac_dc),
                        ],
                    )?;
                }
                BusMode::AcOnly => {
                    b.row(
                        format!("ac_bal_s{s}_t{t}"),
                        RowSense::Eq,
                        0.0,
                        vec![
                            (b.col(DispatchVar::UsedWind, s, t), conv.ac_ac),
                            (b.col(DispatchVar::UsedPv, s, t), conv.ac_dc),
                            (b.col(DispatchVar::BatteryDischarge, s, t), conv.ac_dc),
                            (b.col(DispatchVar::FuelCellPower, s, t), conv.ac_dc),
                            (
                                b.col(DispatchVar::ElectrolyzerPower, s, t),
                                -1.0 / conv.ac_dc,
                            ),
                            (b.col(DispatchVar::BatteryCharge, s, t), -1.0 / conv.ac_dc),
                            (b.col(DispatchVar::HeatPumpPower, s, t), -1.0),
                            (b.col(DispatchVar::DacCapture, s, t), -e_dac),
                        ],
                    )?;
                }
            }
            b.battery_block(s, t)?;
            b.hydrogen_block(s, t)?;
            b.heat_block(s, t)?;
        }
    }
    b.co2_rows()?;
    Ok(b.finish())
}

/// First-stage capacities, recourse dispatch, curtailment, and cost
/// accounting extracted from an optimal solve.
#[derive(Debug, Clone)]
pub struct DesignResult {
    pub model: ModelKind,
    pub capacities: BTreeMap<FacilityKind, f64>,
    /// `dispatch[var][scenario][hour]`.
    pub dispatch: BTreeMap<DispatchVar, Vec<Vec<f64>>>,
    /// Unused renewable potential `cf * X - u`, per source.
    pub curtailment: BTreeMap<FacilityKind, Vec<Vec<f64>>>,
    /// Annualized cost per facility, MM$/yr.
    pub facility_costs: BTreeMap<FacilityKind, f64>,
    /// Total annualized cost, MM$/yr.
    pub tac: f64,
    /// Probability-weighted annual hydrogen production, t/yr.
    pub annual_h2_t: f64,
    /// Annual CO2 captured per scenario, t/yr.
    pub annual_co2_t: Vec<f64>,
    pub iterations: u64,
}

impl DesignResult {
    /// Probability-weighted annual CO2 capture, t/yr.
    pub fn expected_annual_co2_t(&self, scen: &ScenarioSet) -> f64 {
        self.annual_co2_t
            .iter()
            .zip(&scen.scenarios)
            .map(|(co2, s)| co2 * s.probability)
            .sum()
    }
}

/// Map an optimal solution back onto model entities. Refuses non-optimal
/// results and cross-checks the cost accounting against the solver
/// objective to 1e-9 relative.
pub fn extract_design(
    lp: &LpProblem,
    cat: &VarCatalog,
    sol: &SolveResult,
    cfg: &SystemConfig,
    scen: &ScenarioSet,
) -> Result<DesignResult> {
    if sol.status != SolveStatus::Optimal {
        return Err(Error::NotOptimal(sol.status.as_str()));
    }
    debug_assert_eq!(sol.primal.len(), lp.n_cols());
    let rate = cfg.economics.discount_rate;
    let mut capacities = BTreeMap::new();
    let mut facility_costs = BTreeMap::new();
    let mut tac = 0.0;
    for (&kind, &col) in &cat.capacity_cols {
        let x = sol.primal[col];
        let cost = annualized_cost(cfg.require_facility(kind)?, x.max(0.0), rate)?;
        capacities.insert(kind, x);
        facility_costs.insert(kind, cost);
        tac += cost;
    }
    if (tac - sol.objective).abs() > 1e-9 * (1.0 + sol.objective.abs()) {
        return Err(Error::InvalidLp(format!(
            "cost accounting ({tac}) does not reproduce the solver objective ({})",
            sol.objective
        )));
    }

    let mut dispatch = BTreeMap::new();
    for var in cat.dispatch_vars() {
        let mut series = Vec::with_capacity(cat.n_scenarios);
        for s in 0..cat.n_scenarios {
            let row: Vec<f64> = (0..cat.horizon)
                .map(|t| sol.primal[cat.col(var, s, t)])
                .collect();
            series.push(row);
        }
        dispatch.insert(var, series);
    }

    let mut curtailment = BTreeMap::new();
    for (kind, var) in [
        (FacilityKind::WindTurbine, DispatchVar::UsedWind),
        (FacilityKind::PvPanel, DispatchVar::UsedPv),
    ] {
        let x = capacities[&kind];
        let series: Vec<Vec<f64>> = scen
            .scenarios
            .iter()
            .enumerate()
            .map(|(si, sc)| {
                (0..cat.horizon)
                    .map(|t| {
                        let cf = match var {
                            DispatchVar::UsedWind => sc.wind_cf[t],
                            _ => sc.solar_cf[t],
                        };
                        (cf * x - dispatch[&var][si][t]).max(0.0)
                    })
                    .collect()
            })
            .collect();
        curtailment.insert(kind, series);
    }

    let weight = scen.annualization_weight();
    let mut annual_h2_t = 0.0;
    if let Some(series) = dispatch.get(&DispatchVar::ElectrolyzerPower) {
        for (s, row) in series.iter().enumerate() {
            let prod =
                row.iter().sum::<f64>() / cfg.intensities.electrolyzer_mwh_per_t_h2 * weight;
            annual_h2_t += scen.scenarios[s].probability * prod;
        }
    }
    let mut annual_co2_t = vec![0.0; cat.n_scenarios];
    if let Some(series) = dispatch.get(&DispatchVar::DacCapture) {
        for (s, row) in series.iter().enumerate() {
            annual_co2_t[s] = row.iter().sum::<f64>() * weight;
        }
    }

    Ok(DesignResult {
        model: cat.model,
        capacities,
        dispatch,
        curtailment,
        facility_costs,
        tac,
        annual_h2_t,
        annual_co2_t,
        iterations: sol.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::test_config;
    use crate::scenario::{Scenario, SynthParams, synthesize_weather};
    use crate::simplex::{SolveOptions, audit_solution, solve};

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    fn scen(h: usize, s: usize, seed: u64) -> ScenarioSet {
        synthesize_weather(seed, h, s, &SynthParams::default()).unwrap()
    }

    fn unit_scen() -> ScenarioSet {
        ScenarioSet::new(vec![Scenario {
            probability: 1.0,
            wind_cf: vec![1.0],
            solar_cf: vec![1.0],
        }])
        .unwrap()
    }

    #[test]
    fn catalog_counts_single_hour() {
        let cfg = test_config();
        let scen = unit_scen();
        let (lp, cat) = build_standalone_gh(&cfg, &scen, FacilityKind::PemElectrolyzer).unwrap();
        assert_eq!(lp.n_cols(), 16, "6 capacities + 10 dispatch");
        assert_eq!(cat.capacity_cols.len(), 6);
        assert_eq!(cat.dispatch_vars().count(), 10);

        let (lp, cat) = build_standalone_dac(&cfg, &scen).unwrap();
        assert_eq!(lp.n_cols(), 16);
        assert_eq!(cat.capacity_cols.len(), 6);

        let (lp, cat) = build_coupled(&cfg, &scen, FacilityKind::PemElectrolyzer).unwrap();
        assert_eq!(lp.n_cols(), 26, "9 capacities + 17 dispatch");
        assert_eq!(cat.capacity_cols.len(), 9);
        assert!(cat.has(DispatchVar::DcToAc) && cat.has(DispatchVar::AcToDc));

        let mut dc_cfg = test_config();
        dc_cfg.bus_mode = BusMode::DcOnly;
        let (lp, cat) = build_coupled(&dc_cfg, &scen, FacilityKind::PemElectrolyzer).unwrap();
        assert_eq!(lp.n_cols(), 24, "transfers exist in hybrid mode only");
        assert!(!cat.has(DispatchVar::DcToAc));
    }

    #[test]
    fn missing_facility_is_a_build_error() {
        let mut cfg = test_config();
        cfg.facilities.retain(|f| f.kind != FacilityKind::DacPlant);
        let err = build_standalone_dac(&cfg, &scen(24, 1, 3)).unwrap_err();
        assert!(err.to_string().contains("dac_plant"), "{err}");
    }

    #[test]
    fn non_electrolyzer_kind_rejected() {
        let cfg = test_config();
        assert!(build_standalone_gh(&cfg, &scen(24, 1, 3), FacilityKind::Battery).is_err());
    }

    #[test]
    fn zero_demand_gives_zero_tac() {
        let mut cfg = test_config();
        cfg.demand.h2_t_per_yr = 0.0;
        cfg.demand.co2_t_per_yr = 0.0;
        let scen = scen(48, 1, 7);
        for (lp, cat) in [
            build_standalone_gh(&cfg, &scen, FacilityKind::PemElectrolyzer).unwrap(),
            build_standalone_dac(&cfg, &scen).unwrap(),
            build_coupled(&cfg, &scen, FacilityKind::PemElectrolyzer).unwrap(),
        ] {
            let sol = solve(&lp, &opts()).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal, "{}", lp.name());
            assert!(sol.objective.abs() < 1e-9, "{}: {}", lp.name(), sol.objective);
            let design = extract_design(&lp, &cat, &sol, &cfg, &scen).unwrap();
            for (&kind, &cap) in &design.capacities {
                assert!(cap.abs() < 1e-7, "{kind} built {cap} for zero demand");
            }
        }
    }

    /// Single hour at full availability: the optimum runs the electrolyzer
    /// flat out of the cheaper delivered-power source.
    #[test]
    fn single_hour_closed_form_and_grid_search() {
        let cfg = test_config();
        let scen = unit_scen();
        let (lp, cat) = build_standalone_gh(&cfg, &scen, FacilityKind::PemElectrolyzer).unwrap();
        let sol = solve(&lp, &opts()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);

        let demand = cfg.h2_demand_hourly();
        let p_el = demand * cfg.intensities.electrolyzer_mwh_per_t_h2;
        let c_wt = cfg.unit_annual_cost(FacilityKind::WindTurbine).unwrap();
        let c_pv = cfg.unit_annual_cost(FacilityKind::PvPanel).unwrap();
        let c_el = cfg.unit_annual_cost(FacilityKind::PemElectrolyzer).unwrap();
        let conv = &cfg.converters;
        let per_delivered = (c_wt / conv.ac_dc).min(c_pv / conv.dc_dc);
        let closed_form = p_el * (c_el + per_delivered);
        assert!(
            (sol.objective - closed_form).abs() < 1e-6 * closed_form,
            "lp {} vs closed form {closed_form}",
            sol.objective
        );

        // Exhaustive grid search over the three relevant capacities; every
        // feasible grid point must cost at least the LP optimum, and the
        // best grid point must come close to it.
        let need = p_el;
        let mut best = f64::INFINITY;
        let steps = 60;
        for iw in 0..=steps {
            let x_wt = need / conv.ac_dc * iw as f64 / steps as f64;
            for ipv in 0..=steps {
                let x_pv = need / conv.dc_dc * ipv as f64 / steps as f64;
                if conv.ac_dc * x_wt + conv.dc_dc * x_pv + 1e-12 < need {
                    continue;
                }
                let x_el = need;
                let cost = c_wt * x_wt + c_pv * x_pv + c_el * x_el;
                best = best.min(cost);
            }
        }
        assert!(best >= sol.objective - 1e-9);
        assert!((best - closed_form).abs() < 2e-2 * closed_form);

        let design = extract_design(&lp, &cat, &sol, &cfg, &scen).unwrap();
        assert!((design.tac - sol.objective).abs() <= 1e-9 * (1.0 + sol.objective.abs()));
    }

    #[test]
    fn union_of_standalone_designs_is_feasible_in_coupled() {
        let cfg = test_config();
        let scen = scen(48, 1, 11);
        let el = FacilityKind::PemElectrolyzer;

        let (gh_lp, gh_cat) = build_standalone_gh(&cfg, &scen, el).unwrap();
        let gh_sol = solve(&gh_lp, &opts()).unwrap();
        assert_eq!(gh_sol.status, SolveStatus::Optimal);
        let gh = extract_design(&gh_lp, &gh_cat, &gh_sol, &cfg, &scen).unwrap();

        let (dac_lp, dac_cat) = build_standalone_dac(&cfg, &scen).unwrap();
        let dac_sol = solve(&dac_lp, &opts()).unwrap();
        assert_eq!(dac_sol.status, SolveStatus::Optimal);
        let dac = extract_design(&dac_lp, &dac_cat, &dac_sol, &cfg, &scen).unwrap();

        // Pin the coupled capacities to the union (sum) of the standalone
        // designs; a feasible dispatch must exist.
        let (mut lp, cat) = build_coupled(&cfg, &scen, el).unwrap();
        for (&kind, &col) in &cat.capacity_cols {
            let union = gh.capacities.get(&kind).copied().unwrap_or(0.0)
                + dac.capacities.get(&kind).copied().unwrap_or(0.0);
            lp.set_bounds(col, union, union);
        }
        let pinned = solve(&lp, &opts()).unwrap();
        assert_eq!(pinned.status, SolveStatus::Optimal, "union design infeasible");
        let union_tac = gh.tac + dac.tac;
        assert!((pinned.objective - union_tac).abs() <= 1e-6 * (1.0 + union_tac));

        // Hence the free coupled optimum cannot exceed the standalone sum.
        let (free_lp, _) = build_coupled(&cfg, &scen, el).unwrap();
        let free = solve(&free_lp, &opts()).unwrap();
        assert_eq!(free.status, SolveStatus::Optimal);
        assert!(
            free.objective <= union_tac * (1.0 + 1e-6),
            "coupled {} vs standalone sum {union_tac}",
            free.objective
        );
    }

    #[test]
    fn tac_monotone_in_co2_target() {
        let scen = scen(48, 1, 13);
        let mut prev = 0.0;
        for target in [5e4, 2e5, 6e5] {
            let mut cfg = test_config();
            cfg.demand.co2_t_per_yr = target;
            let (lp, _) = build_standalone_dac(&cfg, &scen).unwrap();
            let sol = solve(&lp, &opts()).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal);
            assert!(
                sol.objective >= prev - 1e-9 * (1.0 + prev),
                "TAC decreased: {} after {prev}",
                sol.objective
            );
            prev = sol.objective;
        }
    }

    #[test]
    fn doubling_demands_doubles_tac() {
        let scen = scen(48, 1, 17);
        let el = FacilityKind::PemElectrolyzer;
        let base_cfg = test_config();
        let (lp, _) = build_coupled(&base_cfg, &scen, el).unwrap();
        let base = solve(&lp, &opts()).unwrap();
        assert_eq!(base.status, SolveStatus::Optimal);

        let mut double_cfg = test_config();
        double_cfg.demand.h2_t_per_yr *= 2.0;
        double_cfg.demand.co2_t_per_yr *= 2.0;
        let (lp2, _) = build_coupled(&double_cfg, &scen, el).unwrap();
        let doubled = solve(&lp2, &opts()).unwrap();
        assert_eq!(doubled.status, SolveStatus::Optimal);
        assert!(
            (doubled.objective - 2.0 * base.objective).abs()
                <= 1e-6 * (1.0 + 2.0 * base.objective),
            "{} vs 2 * {}",
            doubled.objective,
            base.objective
        );
    }

    #[test]
    fn scaling_investment_costs_scales_tac_exactly() {
        let scen = scen(48, 1, 19);
        let el = FacilityKind::PemElectrolyzer;
        let base_cfg = test_config();
        let (lp, _) = build_coupled(&base_cfg, &scen, el).unwrap();
        let base = solve(&lp, &opts()).unwrap();

        let mut scaled_cfg = test_config();
        for f in &mut scaled_cfg.facilities {
            f.investment_cost *= 1.2;
        }
        let (lp2, _) = build_coupled(&scaled_cfg, &scen, el).unwrap();
        let scaled = solve(&lp2, &opts()).unwrap();
        assert_eq!(scaled.status, SolveStatus::Optimal);
        assert!(
            (scaled.objective - 1.2 * base.objective).abs()
                <= 1e-9 * (1.0 + 1.2 * base.objective),
            "{} vs 1.2 * {}",
            scaled.objective,
            base.objective
        );
    }

    #[test]
    fn heat_pump_min_load_relaxation_cannot_raise_tac() {
        let scen = scen(48, 1, 23);
        let solve_at = |level: f64| {
            let mut cfg = test_config();
            cfg.facility_mut(FacilityKind::HeatPump)
                .unwrap()
                .min_load_fraction = level;
            let (lp, _) = build_standalone_dac(&cfg, &scen).unwrap();
            let sol = solve(&lp, &opts()).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal);
            sol.objective
        };
        let strict = solve_at(0.40);
        let relaxed = solve_at(0.10);
        assert!(relaxed <= strict * (1.0 + 1e-9), "{relaxed} > {strict}");
    }

    #[test]
    fn optimal_dispatch_respects_envelopes_and_balances() {
        let cfg = test_config();
        let scen = scen(72, 2, 29);
        let el = FacilityKind::PemElectrolyzer;
        let (lp, cat) = build_coupled(&cfg, &scen, el).unwrap();
        let sol = solve(&lp, &opts()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let audit = audit_solution(&lp, &sol.primal).unwrap();
        assert!(audit.max_row_violation <= 1e-7, "{}", audit.max_row_violation);
        assert!(audit.max_bound_violation <= 1e-7);

        let d = extract_design(&lp, &cat, &sol, &cfg, &scen).unwrap();
        let tol = 1e-6;
        let x_el = d.capacities[&el];
        let x_hp = d.capacities[&FacilityKind::HeatPump];
        let min_el = cfg.facility(el).unwrap().min_load_fraction;
        let min_hp = cfg
            .facility(FacilityKind::HeatPump)
            .unwrap()
            .min_load_fraction;
        let intens = &cfg.intensities;
        for s in 0..scen.n_scenarios() {
            for t in 0..scen.horizon_h {
                let p_el = d.dispatch[&DispatchVar::ElectrolyzerPower][s][t];
                assert!(p_el >= min_el * x_el - tol && p_el <= x_el + tol);
                let p_hp = d.dispatch[&DispatchVar::HeatPumpPower][s][t];
                assert!(p_hp >= min_hp * x_hp - tol && p_hp <= x_hp + tol);
                let d_dac = d.dispatch[&DispatchVar::DacCapture][s][t];
                assert!(d_dac >= -tol && d_dac <= d.capacities[&FacilityKind::DacPlant] + tol);

                // Cyclic storage recursions hold at every hour.
                let t_prev = if t == 0 { scen.horizon_h - 1 } else { t - 1 };
                let soc = &d.dispatch[&DispatchVar::BatterySoc][s];
                let ch = d.dispatch[&DispatchVar::BatteryCharge][s][t];
                let dis = d.dispatch[&DispatchVar::BatteryDischarge][s][t];
                let resid = soc[t]
                    - soc[t_prev]
                    - intens.battery_charge_eff * ch
                    + dis / intens.battery_discharge_eff;
                assert!(resid.abs() <= 1e-6, "soc recursion {resid} at s{s} t{t}");

                // Hourly hydrogen balance holds with equality.
                let p_fc = d.dispatch[&DispatchVar::FuelCellPower][s][t];
                let h_in = d.dispatch[&DispatchVar::TankInflow][s][t];
                let h_out = d.dispatch[&DispatchVar::TankOutflow][s][t];
                let h2_resid = p_el / intens.electrolyzer_mwh_per_t_h2 - h_in + h_out
                    - p_fc / intens.fuel_cell_mwh_out_per_t_h2
                    - cfg.h2_demand_hourly();
                assert!(h2_resid.abs() <= 1e-7, "h2 balance {h2_resid} at s{s} t{t}");
            }
        }

        // Annual capture matches the direct summation oracle and meets the
        // per-scenario target.
        let weight = scen.annualization_weight();
        for s in 0..scen.n_scenarios() {
            let mut total = 0.0;
            for t in 0..scen.horizon_h {
                total += d.dispatch[&DispatchVar::DacCapture][s][t];
            }
            let annual = total * weight;
            assert!((annual - d.annual_co2_t[s]).abs() <= 1e-9 * (1.0 + annual));
            assert!(annual >= cfg.demand.co2_t_per_yr * (1.0 - 1e-7));
        }
    }

    #[test]
    fn extract_refuses_non_optimal() {
        let cfg = test_config();
        let scen = scen(48, 1, 31);
        let (lp, cat) = build_standalone_gh(&cfg, &scen, FacilityKind::PemElectrolyzer).unwrap();
        let limited = SolveOptions {
            max_iterations: 2,
            ..SolveOptions::default()
        };
        let sol = solve(&lp, &limited).unwrap();
        assert_eq!(sol.status, SolveStatus::IterationLimit);
        let err = extract_design(&lp, &cat, &sol, &cfg, &scen).unwrap_err();
        assert!(err.to_string().contains("iteration_limit"), "{err}");
    }

    #[test]
    fn alkaline_uses_its_own_min_load_and_cost() {
        let cfg = test_config();
        let scen = scen(48, 1, 37);
        let (lp_pem, _) = build_standalone_gh(&cfg, &scen, FacilityKind::PemElectrolyzer).unwrap();
        let (lp_alk, _) =
            build_standalone_gh(&cfg, &scen, FacilityKind::AlkalineElectrolyzer).unwrap();
        let pem = solve(&lp_pem, &opts()).unwrap();
        let alk = solve(&lp_alk, &opts()).unwrap();
        assert_eq!(pem.status, SolveStatus::Optimal);
        assert_eq!(alk.status, SolveStatus::Optimal);
        assert_ne!(pem.objective, alk.objective);
    }
}
