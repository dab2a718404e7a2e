//! Economic evaluation metrics and grouped cost breakdowns.
//!
//! Units used throughout the reports: MM$ = 1e6 $, kt = 1e3 t, Mt = 1e6 t.
//! LCOH is $/kg H2, LCOD is $/t CO2, Improvement is MM$/yr, Synergy a
//! dimensionless fraction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::FacilityKind;
use crate::formulator::DesignResult;
use crate::{Error, Result};

/// Levelized cost of hydrogen in $/kg from an annualized system cost in
/// MM$/yr and an annual production in t/yr.
pub fn lcoh(tac_gh: f64, annual_h2_t: f64) -> Result<f64> {
    if tac_gh == 0.0 {
        return Ok(0.0);
    }
    if !(annual_h2_t > 0.0) {
        return Err(Error::MetricDomain(format!(
            "lcoh needs annual H2 > 0, got {annual_h2_t}"
        )));
    }
    Ok(tac_gh * 1e6 / (annual_h2_t * 1e3))
}

/// Levelized cost of capture in $/t CO2.
pub fn lcod(tac_dac: f64, annual_co2_t: f64) -> Result<f64> {
    if tac_dac == 0.0 {
        return Ok(0.0);
    }
    if !(annual_co2_t > 0.0) {
        return Err(Error::MetricDomain(format!(
            "lcod needs annual CO2 > 0, got {annual_co2_t}"
        )));
    }
    Ok(tac_dac * 1e6 / annual_co2_t)
}

/// Annual saving of the coupled system versus the standalone pair, MM$/yr.
pub fn improvement(tac_gh: f64, tac_dac: f64, tac_coupled: f64) -> f64 {
    tac_gh + tac_dac - tac_coupled
}

/// Fraction of the combined standalone cost saved by coupling.
pub fn synergy(tac_gh: f64, tac_dac: f64, tac_coupled: f64) -> Result<f64> {
    let combined = tac_gh + tac_dac;
    if !(combined > 0.0) {
        return Err(Error::MetricDomain(
            "synergy needs tac_gh + tac_dac > 0".to_string(),
        ));
    }
    Ok(1.0 - tac_coupled / combined)
}

/// Probability-weighted average utilization of a facility relative to its
/// installed capacity. `dispatch[scenario][hour]`, `probabilities` one per
/// scenario.
pub fn capacity_factor(
    dispatch: &[Vec<f64>],
    capacity: f64,
    probabilities: &[f64],
) -> Result<f64> {
    if !(capacity > 0.0) {
        return Err(Error::MetricDomain(format!(
            "capacity factor needs capacity > 0, got {capacity}"
        )));
    }
    let mut cf = 0.0;
    for (series, p) in dispatch.iter().zip(probabilities) {
        let hours = series.len() as f64;
        cf += p * series.iter().sum::<f64>() / (capacity * hours);
    }
    Ok(cf)
}

/// Report column groups in the order the breakdown tables use. "Power
/// Sources" merges wind and PV.
pub const BREAKDOWN_GROUPS: [&str; 9] = [
    "power_sources",
    "battery",
    "electrolyzer",
    "fuel_cell",
    "h2_tank",
    "dac",
    "heat_pump",
    "tes",
    "total",
];

/// One grouped row of annualized costs, MM$/yr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TacBreakdown {
    pub power_sources: f64,
    pub battery: f64,
    pub electrolyzer: f64,
    pub fuel_cell: f64,
    pub h2_tank: f64,
    pub dac: f64,
    pub heat_pump: f64,
    pub tes: f64,
    pub total: f64,
}

impl TacBreakdown {
    pub fn zero() -> TacBreakdown {
        TacBreakdown {
            power_sources: 0.0,
            battery: 0.0,
            electrolyzer: 0.0,
            fuel_cell: 0.0,
            h2_tank: 0.0,
            dac: 0.0,
            heat_pump: 0.0,
            tes: 0.0,
            total: 0.0,
        }
    }

    /// Group facility costs; the total is the plain sum of the groups.
    pub fn from_costs(costs: &BTreeMap<FacilityKind, f64>) -> TacBreakdown {
        let get = |k: FacilityKind| costs.get(&k).copied().unwrap_or(0.0);
        let mut row = TacBreakdown {
            power_sources: get(FacilityKind::WindTurbine) + get(FacilityKind::PvPanel),
            battery: get(FacilityKind::Battery),
            electrolyzer: get(FacilityKind::PemElectrolyzer)
                + get(FacilityKind::AlkalineElectrolyzer),
            fuel_cell: get(FacilityKind::FuelCell),
            h2_tank: get(FacilityKind::H2Tank),
            dac: get(FacilityKind::DacPlant),
            heat_pump: get(FacilityKind::HeatPump),
            tes: get(FacilityKind::Tes),
            total: 0.0,
        };
        row.total = row.power_sources
            + row.battery
            + row.electrolyzer
            + row.fuel_cell
            + row.h2_tank
            + row.dac
            + row.heat_pump
            + row.tes;
        row
    }

    pub fn values(&self) -> [f64; 9] {
        [
            self.power_sources,
            self.battery,
            self.electrolyzer,
            self.fuel_cell,
            self.h2_tank,
            self.dac,
            self.heat_pump,
            self.tes,
            self.total,
        ]
    }

    /// Component-wise sum (the "Combined" row of the standalone pair).
    pub fn plus(&self, other: &TacBreakdown) -> TacBreakdown {
        TacBreakdown {
            power_sources: self.power_sources + other.power_sources,
            battery: self.battery + other.battery,
            electrolyzer: self.electrolyzer + other.electrolyzer,
            fuel_cell: self.fuel_cell + other.fuel_cell,
            h2_tank: self.h2_tank + other.h2_tank,
            dac: self.dac + other.dac,
            heat_pump: self.heat_pump + other.heat_pump,
            tes: self.tes + other.tes,
            total: self.total + other.total,
        }
    }
}

/// Grouped cost rows for a design.
pub fn tac_breakdown(design: &DesignResult) -> TacBreakdown {
    TacBreakdown::from_costs(&design.facility_costs)
}

/// Per-component synergy entries: `1 - coupled/combined` per group, `None`
/// where the combined standalone component is zero (rendered as a dash).
pub fn component_synergy(
    combined: &TacBreakdown,
    coupled: &TacBreakdown,
) -> [(&'static str, Option<f64>); 9] {
    let c = combined.values();
    let k = coupled.values();
    let mut out = [("", None); 9];
    for (i, name) in BREAKDOWN_GROUPS.iter().enumerate() {
        out[i] = (
            *name,
            if c[i] != 0.0 {
                Some(1.0 - k[i] / c[i])
            } else {
                None
            },
        );
    }
    out
}

/// Full metric set for one coupling evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tac_gh: f64,
    pub tac_dac: f64,
    pub tac_coupled: f64,
    /// $/kg H2 of the standalone hydrogen system.
    pub lcoh: Option<f64>,
    /// $/t CO2 of the standalone capture system.
    pub lcod: Option<f64>,
    /// MM$/yr saved by coupling.
    pub improvement: f64,
    /// Fraction of the combined standalone cost saved by coupling.
    pub synergy: f64,
    pub breakdown_gh: TacBreakdown,
    pub breakdown_dac: TacBreakdown,
    pub breakdown_combined: TacBreakdown,
    pub breakdown_coupled: TacBreakdown,
    /// Probability-weighted capacity factors of the coupled design.
    pub capacity_factors: BTreeMap<String, f64>,
}

impl MetricsReport {
    /// Assemble the report from the three designs. `annual_h2_t` and
    /// `annual_co2_t` are the delivered annual quantities used for the
    /// levelized costs.
    pub fn from_designs(
        gh: &DesignResult,
        dac: &DesignResult,
        coupled: &DesignResult,
        annual_h2_t: f64,
        annual_co2_t: f64,
        probabilities: &[f64],
    ) -> Result<MetricsReport> {
        let breakdown_gh = tac_breakdown(gh);
        let breakdown_dac = tac_breakdown(dac);
        let breakdown_coupled = tac_breakdown(coupled);
        let breakdown_combined = breakdown_gh.plus(&breakdown_dac);
        let improvement = improvement(gh.tac, dac.tac, coupled.tac);
        let synergy = if gh.tac + dac.tac > 0.0 {
            synergy(gh.tac, dac.tac, coupled.tac)?
        } else {
            0.0
        };
        let lcoh = if annual_h2_t > 0.0 {
            Some(lcoh(gh.tac, annual_h2_t)?)
        } else {
            None
        };
        let lcod = if annual_co2_t > 0.0 {
            Some(lcod(dac.tac, annual_co2_t)?)
        } else {
            None
        };
        let mut capacity_factors = BTreeMap::new();
        for (&kind, &cap) in &coupled.capacities {
            if cap <= 0.0 {
                continue;
            }
            if let Some(var) = dispatch_for(kind, coupled) {
                let cf = capacity_factor(var, cap, probabilities)?;
                capacity_factors.insert(kind.id().to_string(), cf);
            }
        }
        Ok(MetricsReport {
            tac_gh: gh.tac,
            tac_dac: dac.tac,
            tac_coupled: coupled.tac,
            lcoh,
            lcod,
            improvement,
            synergy,
            breakdown_gh,
            breakdown_dac,
            breakdown_combined,
            breakdown_coupled,
            capacity_factors,
        })
    }
}

fn dispatch_for(kind: FacilityKind, design: &DesignResult) -> Option<&Vec<Vec<f64>>> {
    use crate::formulator::DispatchVar as V;
    let var = match kind {
        FacilityKind::WindTurbine => V::UsedWind,
        FacilityKind::PvPanel => V::UsedPv,
        FacilityKind::PemElectrolyzer | FacilityKind::AlkalineElectrolyzer => V::ElectrolyzerPower,
        FacilityKind::FuelCell => V::FuelCellPower,
        FacilityKind::HeatPump => V::HeatPumpPower,
        FacilityKind::DacPlant => V::DacCapture,
        FacilityKind::Battery | FacilityKind::H2Tank | FacilityKind::Tes => return None,
    };
    design.dispatch.get(&var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lcoh_reference_values() {
        assert!((lcoh(34.55, 10_000.0).unwrap() - 3.455).abs() < 1e-12);
        assert!((lcoh(41.59, 10_000.0).unwrap() - 4.159).abs() < 1e-12);
        assert_eq!(lcoh(0.0, 10_000.0).unwrap(), 0.0);
        assert!(lcoh(1.0, 0.0).is_err());
    }

    #[test]
    fn lcod_reference_values() {
        assert!((lcod(84.29, 1e6).unwrap() - 84.29).abs() < 1e-12);
        assert!((lcod(84.29, 5e5).unwrap() - 168.58).abs() < 1e-12);
        assert_eq!(lcod(0.0, 123.0).unwrap(), 0.0);
        assert!(lcod(1.0, 0.0).is_err());
    }

    #[test]
    fn improvement_and_synergy_reference_values() {
        let imp = improvement(34.55, 84.29, 112.22);
        assert!((imp - 6.62).abs() < 1e-9);
        let syn = synergy(34.55, 84.29, 112.22).unwrap();
        assert!((syn - 0.0556).abs() < 3e-4);

        let imp = improvement(41.59, 84.29, 119.43);
        assert!((imp - 6.45).abs() < 1e-9);
        let syn = synergy(41.59, 84.29, 119.43).unwrap();
        assert!((syn - 0.0511).abs() < 3e-4);

        assert_eq!(improvement(3.0, 4.0, 7.0), 0.0);
        assert_eq!(synergy(3.0, 4.0, 7.0).unwrap(), 0.0);
        assert!(synergy(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn improvement_equals_synergy_times_combined() {
        for (a, b, c) in [
            (34.55, 84.29, 112.22),
            (41.59, 84.29, 119.43),
            (1.0, 2.0, 2.5),
        ] {
            let imp = improvement(a, b, c);
            let syn = synergy(a, b, c).unwrap();
            assert!((syn * (a + b) - imp).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_are_homogeneous_in_tac() {
        let k = 3.7;
        assert!(
            (lcoh(k * 34.55, 10_000.0).unwrap() - k * lcoh(34.55, 10_000.0).unwrap()).abs()
                < 1e-12
        );
        assert!((lcod(k * 84.29, 1e6).unwrap() - k * lcod(84.29, 1e6).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn capacity_factor_basics() {
        let dispatch = vec![vec![5.0; 10]];
        assert!((capacity_factor(&dispatch, 5.0, &[1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((capacity_factor(&dispatch, 10.0, &[1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(capacity_factor(&dispatch, 0.0, &[1.0]).is_err());
    }

    #[test]
    fn capacity_factor_matches_direct_summation() {
        // Independent oracle: explicit probability-weighted double sum.
        let dispatch = vec![
            (0..7)
                .map(|t| (t as f64 * 0.13).sin().abs())
                .collect::<Vec<_>>(),
            (0..7)
                .map(|t| (t as f64 * 0.29).cos().abs())
                .collect::<Vec<_>>(),
        ];
        let probs = [0.25, 0.75];
        let cap = 1.7;
        let mut expect = 0.0;
        for (s, series) in dispatch.iter().enumerate() {
            let mut sum = 0.0;
            for v in series {
                sum += v;
            }
            expect += probs[s] * sum / (cap * series.len() as f64);
        }
        let got = capacity_factor(&dispatch, cap, &probs).unwrap();
        assert!((got - expect).abs() < 1e-15);
    }

    #[test]
    fn breakdown_reproduces_reference_row() {
        // Standalone-GH costs grouped into table order: power sources,
        // battery, electrolyzer, fuel cell, tank; total 34.55.
        let mut costs = BTreeMap::new();
        costs.insert(FacilityKind::WindTurbine, 12.40);
        costs.insert(FacilityKind::PvPanel, 6.45);
        costs.insert(FacilityKind::Battery, 3.26);
        costs.insert(FacilityKind::PemElectrolyzer, 9.31);
        costs.insert(FacilityKind::FuelCell, 0.01);
        costs.insert(FacilityKind::H2Tank, 3.12);
        let row = TacBreakdown::from_costs(&costs);
        assert!((row.power_sources - 18.85).abs() < 1e-12);
        assert!((row.battery - 3.26).abs() < 1e-12);
        assert!((row.electrolyzer - 9.31).abs() < 1e-12);
        assert!((row.fuel_cell - 0.01).abs() < 1e-12);
        assert!((row.h2_tank - 3.12).abs() < 1e-12);
        assert!((row.total - 34.55).abs() < 1e-9);
    }

    #[test]
    fn breakdown_group_sum_equals_total() {
        let mut costs = BTreeMap::new();
        for (i, kind) in FacilityKind::ALL.iter().enumerate() {
            costs.insert(*kind, (i as f64 + 1.0) * 0.37);
        }
        let row = TacBreakdown::from_costs(&costs);
        let direct: f64 = costs.values().sum();
        assert!((row.total - direct).abs() < 1e-12);
        let groups: f64 = row.values()[..8].iter().sum();
        assert!((groups - row.total).abs() < 1e-12);
    }

    #[test]
    fn zero_design_zero_rows() {
        let row = TacBreakdown::from_costs(&BTreeMap::new());
        assert_eq!(row, TacBreakdown::zero());
    }

    #[test]
    fn component_synergy_dashes_zero_combined() {
        let mut combined = TacBreakdown::zero();
        combined.power_sources = 10.0;
        combined.total = 10.0;
        let mut coupled = TacBreakdown::zero();
        coupled.power_sources = 9.0;
        coupled.total = 9.0;
        let rows = component_synergy(&combined, &coupled);
        assert_eq!(rows[0].0, "power_sources");
        assert!((rows[0].1.unwrap() - 0.1).abs() < 1e-12);
        // fuel_cell combined is zero: undefined entry.
        assert_eq!(rows[3].0, "fuel_cell");
        assert!(rows[3].1.is_none());
    }
}
