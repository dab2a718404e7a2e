//! Batch experiment campaigns: removal-rate sweeps, cost sensitivity,
//! heat-pump flexibility, and bus-topology comparison.
//!
//! Sweeps are deterministic given the configuration, scenarios, and axis
//! values; points are independent cold solves. An infeasible point is
//! recorded and the sweep continues.

use std::fmt;

use crate::domain::{BusMode, FacilityKind, SystemConfig};
use crate::formulator::{
    DesignResult, ModelKind, build_coupled, build_standalone_dac, build_standalone_gh,
    extract_design,
};
use crate::metrics::MetricsReport;
use crate::simplex::{SolveOptions, SolveStatus, audit_solution, solve};
use crate::scenario::ScenarioSet;
use crate::{Error, Result};

/// Molar masses used for the CO2:H2 ratio column, g/mol.
const M_CO2: f64 = 44.01;
const M_H2: f64 = 2.016;

/// Facility groups whose investment costs the sensitivity campaign scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostGroup {
    PowerSources,
    Battery,
    Electrolyzer,
    Dac,
}

impl CostGroup {
    pub const ALL: [CostGroup; 4] = [
        CostGroup::PowerSources,
        CostGroup::Battery,
        CostGroup::Electrolyzer,
        CostGroup::Dac,
    ];

    pub fn kinds(self) -> &'static [FacilityKind] {
        match self {
            CostGroup::PowerSources => &[FacilityKind::WindTurbine, FacilityKind::PvPanel],
            CostGroup::Battery => &[FacilityKind::Battery],
            CostGroup::Electrolyzer => &[
                FacilityKind::PemElectrolyzer,
                FacilityKind::AlkalineElectrolyzer,
            ],
            CostGroup::Dac => &[FacilityKind::DacPlant],
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            CostGroup::PowerSources => "power_sources",
            CostGroup::Battery => "battery",
            CostGroup::Electrolyzer => "electrolyzer",
            CostGroup::Dac => "dac",
        }
    }
}

impl fmt::Display for CostGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// The three designs behind one evaluated point; absent members were not
/// part of that campaign.
#[derive(Debug, Clone, Default)]
pub struct TriDesign {
    pub gh: Option<DesignResult>,
    pub dac: Option<DesignResult>,
    pub coupled: Option<DesignResult>,
}

/// One record of a sweep. Optional columns are populated per campaign.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub label: String,
    pub axis_value: f64,
    /// `None` when every model solved; otherwise names the failing model
    /// and status.
    pub infeasible: Option<String>,
    pub tac_gh: Option<f64>,
    pub tac_dac: Option<f64>,
    pub tac_coupled: Option<f64>,
    pub improvement: Option<f64>,
    pub synergy: Option<f64>,
    pub lcoh: Option<f64>,
    pub lcod: Option<f64>,
    pub molar_ratio_co2_h2: Option<f64>,
    /// Coupled TAC minus the baseline coupled TAC.
    pub tac_diff: Option<f64>,
    /// Synergy minus the baseline synergy.
    pub synergy_diff: Option<f64>,
    pub tac_ratio_dac: Option<f64>,
    pub tac_ratio_coupled: Option<f64>,
    /// Argmin flag of the bus-mode comparison.
    pub best: bool,
    pub metrics: Option<MetricsReport>,
    pub designs: TriDesign,
}

impl SweepRecord {
    fn empty(label: String, axis_value: f64) -> SweepRecord {
        SweepRecord {
            label,
            axis_value,
            infeasible: None,
            tac_gh: None,
            tac_dac: None,
            tac_coupled: None,
            improvement: None,
            synergy: None,
            lcoh: None,
            lcod: None,
            molar_ratio_co2_h2: None,
            tac_diff: None,
            synergy_diff: None,
            tac_ratio_dac: None,
            tac_ratio_coupled: None,
            best: false,
            metrics: None,
            designs: TriDesign::default(),
        }
    }
}

/// A completed campaign.
#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Axis label, e.g. `co2_removal_t_per_yr`.
    pub axis: String,
    pub records: Vec<SweepRecord>,
}

/// Solve one model to a design, auditing the solution against the LP.
/// Non-optimal outcomes are reported as `Ok(Err(status))` so sweeps can
/// degrade gracefully; build errors remain hard errors.
pub fn solve_point(
    cfg: &SystemConfig,
    scen: &ScenarioSet,
    model: ModelKind,
    electrolyzer: FacilityKind,
    opts: &SolveOptions,
) -> Result<std::result::Result<DesignResult, SolveStatus>> {
    let (lp, cat) = match model {
        ModelKind::StandaloneGh => build_standalone_gh(cfg, scen, electrolyzer)?,
        ModelKind::StandaloneDac => build_standalone_dac(cfg, scen)?,
        ModelKind::Coupled => build_coupled(cfg, scen, electrolyzer)?,
    };
    let sol = solve(&lp, opts)?;
    if sol.status != SolveStatus::Optimal {
        return Ok(Err(sol.status));
    }
    let audit = audit_solution(&lp, &sol.primal)?;
    let worst = audit.max_row_violation.max(audit.max_bound_violation);
    if worst > 1e3 * opts.feasibility_tol {
        return Err(Error::InvalidLp(format!(
            "solution audit failed for {}: residual {worst:.3e}",
            lp.name()
        )));
    }
    Ok(Ok(extract_design(&lp, &cat, &sol, cfg, scen)?))
}

struct TriSolve {
    gh: std::result::Result<DesignResult, SolveStatus>,
    dac: std::result::Result<DesignResult, SolveStatus>,
    coupled: std::result::Result<DesignResult, SolveStatus>,
}

fn solve_three(
    cfg: &SystemConfig,
    scen: &ScenarioSet,
    electrolyzer: FacilityKind,
    opts: &SolveOptions,
) -> Result<TriSolve> {
    Ok(TriSolve {
        gh: solve_point(cfg, scen, ModelKind::StandaloneGh, electrolyzer, opts)?,
        dac: solve_point(cfg, scen, ModelKind::StandaloneDac, electrolyzer, opts)?,
        coupled: solve_point(cfg, scen, ModelKind::Coupled, electrolyzer, opts)?,
    })
}

fn fill_tri_record(
    rec: &mut SweepRecord,
    tri: TriSolve,
    scen: &ScenarioSet,
) -> Result<()> {
    let mut failures = Vec::new();
    if let Err(st) = &tri.gh {
        failures.push(format!("gh:{st}"));
    }
    if let Err(st) = &tri.dac {
        failures.push(format!("dac:{st}"));
    }
    if let Err(st) = &tri.coupled {
        failures.push(format!("coupled:{st}"));
    }
    if let Ok(d) = &tri.gh {
        rec.tac_gh = Some(d.tac);
    }
    if let Ok(d) = &tri.dac {
        rec.tac_dac = Some(d.tac);
    }
    if let Ok(d) = &tri.coupled {
        rec.tac_coupled = Some(d.tac);
    }
    if !failures.is_empty() {
        rec.infeasible = Some(failures.join(","));
        rec.designs = TriDesign {
            gh: tri.gh.ok(),
            dac: tri.dac.ok(),
            coupled: tri.coupled.ok(),
        };
        return Ok(());
    }
    let gh = tri.gh.unwrap();
    let dac = tri.dac.unwrap();
    let coupled = tri.coupled.unwrap();
    let probs: Vec<f64> = scen.scenarios.iter().map(|s| s.probability).collect();
    let metrics = MetricsReport::from_designs(
        &gh,
        &dac,
        &coupled,
        gh.annual_h2_t,
        dac.expected_annual_co2_t(scen),
        &probs,
    )?;
    rec.improvement = Some(metrics.improvement);
    rec.synergy = Some(metrics.synergy);
    rec.lcoh = metrics.lcoh;
    rec.lcod = metrics.lcod;
    rec.metrics = Some(metrics);
    rec.designs = TriDesign {
        gh: Some(gh),
        dac: Some(dac),
        coupled: Some(coupled),
    };
    Ok(())
}

/// Solve the three systems across a list of annual CO2 removal rates
/// (t/yr). Also records the CO2:H2 molar ratio of each point.
pub fn sweep_removal_rate(
    cfg: &SystemConfig,
    scen: &ScenarioSet,
    electrolyzer: FacilityKind,
    rates: &[f64],
    opts: &SolveOptions,
) -> Result<SweepResult> {
    if rates.is_empty() {
        return Err(Error::invalid_field("rates", "must be nonempty"));
    }
    if let Some(bad) = rates.iter().find(|r| !(**r >= 0.0)) {
        return Err(Error::invalid_field(
            "rates",
            format!("must be >= 0, got {bad}"),
        ));
    }
    let mut records = Vec::with_capacity(rates.len());
    for &rate in rates {
        let mut point_cfg = cfg.clone();
        point_cfg.demand.co2_t_per_yr = rate;
        let mut rec = SweepRecord::empty(format!("co2_{rate:.0}t"), rate);
        let h2 = cfg.demand.h2_t_per_yr;
        if h2 > 0.0 {
            rec.molar_ratio_co2_h2 = Some((rate / M_CO2) / (h2 / M_H2));
        }
        fill_tri_record(&mut rec, solve_three(&point_cfg, scen, electrolyzer, opts)?, scen)?;
        records.push(rec);
    }
    Ok(SweepResult {
        axis: "co2_removal_t_per_yr".to_string(),
        records,
    })
}

/// Re-solve the three systems with each target group's investment cost
/// scaled by `1 + delta` and `1 - delta`; reports TAC and synergy
/// differences against the unscaled baseline. The baseline is the first
/// record.
pub fn sensitivity_costs(
    cfg: &SystemConfig,
    scen: &ScenarioSet,
    electrolyzer: FacilityKind,
    delta: f64,
    targets: &[CostGroup],
    opts: &SolveOptions,
) -> Result<SweepResult> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid_field(
            "delta",
            format!("must be in (0, 1), got {delta}"),
        ));
    }
    let mut records = Vec::with_capacity(1 + 2 * targets.len());
    let mut baseline = SweepRecord::empty("baseline".to_string(), 0.0);
    fill_tri_record(&mut baseline, solve_three(cfg, scen, electrolyzer, opts)?, scen)?;
    let base_tac = baseline.tac_coupled;
    let base_syn = baseline.synergy;
    records.push(baseline);

    for &group in targets {
        for sign in [1.0, -1.0] {
            let factor = 1.0 + sign * delta;
            let mut point_cfg = cfg.clone();
            for kind in group.kinds() {
                if let Some(spec) = point_cfg.facility_mut(*kind) {
                    spec.investment_cost *= factor;
                }
            }
            let mut rec = SweepRecord::empty(
                format!("{group}{}{:.0}%", if sign > 0.0 { "+" } else { "-" }, delta * 100.0),
                sign * delta,
            );
            fill_tri_record(&mut rec, solve_three(&point_cfg, scen, electrolyzer, opts)?, scen)?;
            if let (Some(tac), Some(base)) = (rec.tac_coupled, base_tac) {
                rec.tac_diff = Some(tac - base);
            }
            if let (Some(syn), Some(base)) = (rec.synergy, base_syn) {
                rec.synergy_diff = Some(syn - base);
            }
            records.push(rec);
        }
    }
    Ok(SweepResult {
        axis: "cost_delta".to_string(),
        records,
    })
}

/// Re-solve the capture-standalone and coupled systems across heat-pump
/// minimum-load levels; the first level is the base case and TAC ratios
/// are reported against it.
pub fn sweep_heatpump_minload(
    cfg: &SystemConfig,
    scen: &ScenarioSet,
    electrolyzer: FacilityKind,
    levels: &[f64],
    opts: &SolveOptions,
) -> Result<SweepResult> {
    if levels.is_empty() {
        return Err(Error::invalid_field("levels", "must be nonempty"));
    }
    if let Some(bad) = levels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::invalid_field(
            "levels",
            format!("must be in [0, 1], got {bad}"),
        ));
    }
    // The hydrogen standalone does not see the heat pump; solve it once.
    let gh = solve_point(cfg, scen, ModelKind::StandaloneGh, electrolyzer, opts)?;

    let mut base_dac_tac = None;
    let mut base_coupled_tac = None;
    let mut records = Vec::with_capacity(levels.len());
    for (i, &level) in levels.iter().enumerate() {
        let mut point_cfg = cfg.clone();
        match point_cfg.facility_mut(FacilityKind::HeatPump) {
            Some(spec) => spec.min_load_fraction = level,
            None => return Err(Error::MissingFacility(FacilityKind::HeatPump.id())),
        }
        let mut rec = SweepRecord::empty(format!("hp_min_load_{:.0}%", level * 100.0), level);
        let tri = TriSolve {
            gh: gh.clone(),
            dac: solve_point(&point_cfg, scen, ModelKind::StandaloneDac, electrolyzer, opts)?,
            coupled: solve_point(&point_cfg, scen, ModelKind::Coupled, electrolyzer, opts)?,
        };
        fill_tri_record(&mut rec, tri, scen)?;
        if i == 0 {
            base_dac_tac = rec.tac_dac;
            base_coupled_tac = rec.tac_coupled;
        }
        if let (Some(tac), Some(base)) = (rec.tac_dac, base_dac_tac) {
            rec.tac_ratio_dac = Some(tac / base);
        }
        if let (Some(tac), Some(base)) = (rec.tac_coupled, base_coupled_tac) {
            rec.tac_ratio_coupled = Some(tac / base);
        }
        records.push(rec);
    }
    Ok(SweepResult {
        axis: "heat_pump_min_load".to_string(),
        records,
    })
}

/// Solve the coupled system under the three bus topologies and flag the
/// cheapest.
pub fn compare_bus_modes(
    cfg: &SystemConfig,
    scen: &ScenarioSet,
    electrolyzer: FacilityKind,
    opts: &SolveOptions,
) -> Result<SweepResult> {
    let mut records = Vec::with_capacity(3);
    for (i, mode) in [BusMode::DcOnly, BusMode::AcOnly, BusMode::Hybrid]
        .into_iter()
        .enumerate()
    {
        let mut point_cfg = cfg.clone();
        point_cfg.bus_mode = mode;
        let mut rec = SweepRecord::empty(mode.to_string(), i as f64);
        match solve_point(&point_cfg, scen, ModelKind::Coupled, electrolyzer, opts)? {
            Ok(design) => {
                rec.tac_coupled = Some(design.tac);
                rec.designs.coupled = Some(design);
            }
            Err(status) => rec.infeasible = Some(format!("coupled:{status}")),
        }
        records.push(rec);
    }
    let best = records
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.tac_coupled.map(|t| (i, t)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    if let Some(i) = best {
        records[i].best = true;
    }
    Ok(SweepResult {
        axis: "bus_mode".to_string(),
        records,
    })
}
