//! Analytical model of the MRAM + MLC-ReRAM weight store.
//!
//! Outlier codes live in on-chip MRAM, inlier codes in off-chip MLC ReRAM;
//! the baseline keeps FP16 weights in LPDDR5. One decode step streams every
//! weight once. Units: latency in seconds, bandwidth in GiB/s per channel or
//! array, energy in pJ/bit, density in Mb/mm² with Mb = 2^20 bits, power in mW.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{config_err, Error, Result};
use crate::math::ceil;

const GIB: f64 = 1024.0 * 1024.0 * 1024.0;
const MEBIBIT: f64 = 1024.0 * 1024.0;
const PJ: f64 = 1e-12;
const NS: f64 = 1e-9;
/// FP16 reference width.
pub const BASELINE_BITS: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum UnitKind {
    Channel,
    Array,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct MemoryDevice {
    pub name: String,
    pub read_latency_ns: f64,
    /// Per channel or per array, see `unit`.
    pub bandwidth_gib_s: f64,
    pub read_energy_pj_per_bit: f64,
    pub density_mb_per_mm2: f64,
    /// Bits per cell at which `density_mb_per_mm2` was quoted.
    pub bits_per_cell: u32,
    pub unit: UnitKind,
}

impl MemoryDevice {
    pub fn mram() -> Self {
        Self {
            name: "MRAM".to_string(),
            read_latency_ns: 3.5,
            bandwidth_gib_s: 36.57,
            read_energy_pj_per_bit: 1.0,
            density_mb_per_mm2: 66.0,
            bits_per_cell: 1,
            unit: UnitKind::Channel,
        }
    }

    /// 3-bit MLC mode figures; the read latency is quoted only as "< 5 ns".
    pub fn mlc_reram() -> Self {
        Self {
            name: "MLC ReRAM".to_string(),
            read_latency_ns: 5.0,
            bandwidth_gib_s: 1.8,
            read_energy_pj_per_bit: 1.56,
            density_mb_per_mm2: 30.1,
            bits_per_cell: 3,
            unit: UnitKind::Array,
        }
    }

    pub fn lpddr5() -> Self {
        Self {
            name: "LPDDR5".to_string(),
            read_latency_ns: 1.7,
            bandwidth_gib_s: 186.26,
            read_energy_pj_per_bit: 3.5,
            density_mb_per_mm2: 209.9,
            bits_per_cell: 1,
            unit: UnitKind::Channel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("read_latency_ns", self.read_latency_ns),
            ("bandwidth_gib_s", self.bandwidth_gib_s),
            ("read_energy_pj_per_bit", self.read_energy_pj_per_bit),
            ("density_mb_per_mm2", self.density_mb_per_mm2),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(config_err!("{}.{} must be positive, got {}", self.name, field, v));
            }
        }
        if self.bits_per_cell == 0 {
            return Err(config_err!("{}.bits_per_cell must be positive", self.name));
        }
        Ok(())
    }

    /// Aggregate bandwidth of `units` channels or arrays, in bits per second.
    pub fn bandwidth_bits_per_s(&self, units: u32) -> f64 {
        units as f64 * self.bandwidth_gib_s * GIB * 8.0
    }

    /// Silicon area for `cells` cells.
    pub fn area_mm2(&self, cells: f64) -> f64 {
        cells * self.bits_per_cell as f64 / (self.density_mb_per_mm2 * MEBIBIT)
    }
}

/// Where inlier codes are stored.
///
/// `Lpddr5` exists to express the FP16 reference inside the same model; in
/// that mode `reram_arrays` counts LPDDR5 channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum InlierStore {
    Reram,
    Lpddr5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Device {
    Mram,
    Reram,
    Lpddr5,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SystemConfig {
    pub mram: MemoryDevice,
    pub reram: MemoryDevice,
    pub lpddr5: MemoryDevice,
    pub mram_channels: u32,
    pub reram_arrays: u32,
    /// No published value; the default leaves room for 4 MRAM channels and ~93 ReRAM arrays.
    pub power_budget_mw: f64,
    pub e_network_pj_per_bit: f64,
    pub t_queue_ns: f64,
    /// Clock-domain-crossing delay between the two tiers, 2 to 4 cycles.
    pub t_sync_cycles: u32,
    pub sync_clock_ghz: f64,
    pub param_count: u64,
    pub rho: f64,
    pub inlier_bits: u8,
    pub outlier_bits: u8,
    pub mlc_bits: u8,
    pub inlier_store: InlierStore,
    /// Flash area added to the LPDDR5 baseline.
    pub flash_area_mm2: f64,
    /// Optional upper bound on the per-step weight-load latency.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub latency_target_ns: Option<f64>,
    pub dse_mram_channels_max: u32,
    pub dse_reram_arrays_max: u32,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            mram: MemoryDevice::mram(),
            reram: MemoryDevice::mlc_reram(),
            lpddr5: MemoryDevice::lpddr5(),
            mram_channels: 4,
            reram_arrays: 93,
            power_budget_mw: 3500.0,
            e_network_pj_per_bit: 0.0,
            t_queue_ns: 0.0,
            t_sync_cycles: 3,
            sync_clock_ghz: 3.3,
            param_count: 1_513_000_000,
            rho: 0.3,
            inlier_bits: 3,
            outlier_bits: 5,
            mlc_bits: 3,
            inlier_store: InlierStore::Reram,
            flash_area_mm2: 0.0,
            latency_target_ns: None,
            dse_mram_channels_max: 4,
            dse_reram_arrays_max: 96,
        }
    }
}

impl SystemConfig {
    /// FP16 weights in LPDDR5 with no outliers: every ratio in the report is 1.
    pub fn fp16_reference() -> Self {
        Self {
            rho: 0.0,
            inlier_bits: 16,
            inlier_store: InlierStore::Lpddr5,
            reram_arrays: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mram.validate()?;
        self.reram.validate()?;
        self.lpddr5.validate()?;
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(config_err!("rho {} outside [0, 1]", self.rho));
        }
        for (name, b) in [("inlier_bits", self.inlier_bits), ("outlier_bits", self.outlier_bits)] {
            if !(2..=16).contains(&b) {
                return Err(config_err!("{} = {} outside [2, 16]", name, b));
            }
        }
        if !(self.mlc_bits == 2 || self.mlc_bits == 3) {
            return Err(config_err!("mlc_bits must be 2 or 3, got {}", self.mlc_bits));
        }
        if !(2..=4).contains(&self.t_sync_cycles) {
            return Err(config_err!("t_sync_cycles {} outside [2, 4]", self.t_sync_cycles));
        }
        let non_negative = [
            ("power_budget_mw", self.power_budget_mw),
            ("e_network_pj_per_bit", self.e_network_pj_per_bit),
            ("t_queue_ns", self.t_queue_ns),
            ("flash_area_mm2", self.flash_area_mm2),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(config_err!("{} must be finite and >= 0, got {}", name, v));
            }
        }
        if !(self.sync_clock_ghz.is_finite() && self.sync_clock_ghz > 0.0) {
            return Err(config_err!("sync_clock_ghz must be positive"));
        }
        if let Some(t) = self.latency_target_ns {
            if t.is_nan() || t <= 0.0 {
                return Err(config_err!("latency_target_ns must be positive"));
            }
        }
        Ok(())
    }

    pub fn inlier_device(&self) -> &MemoryDevice {
        match self.inlier_store {
            InlierStore::Reram => &self.reram,
            InlierStore::Lpddr5 => &self.lpddr5,
        }
    }

    fn inlier_device_id(&self) -> Device {
        match self.inlier_store {
            InlierStore::Reram => Device::Reram,
            InlierStore::Lpddr5 => Device::Lpddr5,
        }
    }

    pub fn t_sync_s(&self) -> f64 {
        self.t_sync_cycles as f64 / (self.sync_clock_ghz * 1e9)
    }

    /// Bits moved from each tier for one pass over all weights.
    pub fn transfer_per_step(&self) -> TransferBits {
        let n = self.param_count as f64;
        TransferBits {
            mram_bits: self.rho * n * self.outlier_bits as f64,
            inlier_bits: (1.0 - self.rho) * n * self.inlier_bits as f64,
        }
    }

    /// Every `(channels, arrays)` pair up to the configured maxima, including zero counts.
    pub fn candidate_grid(&self) -> Vec<BandwidthPoint> {
        let mut grid = Vec::new();
        for m in 0..=self.dse_mram_channels_max {
            for a in 0..=self.dse_reram_arrays_max {
                grid.push(BandwidthPoint {
                    mram_channels: m,
                    reram_arrays: a,
                });
            }
        }
        grid
    }

    /// Inlier cells per inlier weight: codes are packed in pairs, so a 3-bit
    /// code in 2-bit cells costs 1.5 cells.
    pub fn inlier_cells_per_weight(&self) -> f64 {
        let per_cell = match self.inlier_store {
            InlierStore::Reram => self.mlc_bits as f64,
            InlierStore::Lpddr5 => self.lpddr5.bits_per_cell as f64,
        };
        ceil(2.0 * self.inlier_bits as f64 / per_cell) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferBits {
    pub mram_bits: f64,
    pub inlier_bits: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LatencyBreakdown {
    pub mram_s: f64,
    pub inlier_s: f64,
    pub sync_s: f64,
    pub final_s: f64,
    pub bottleneck: Device,
}

fn tier_time(dev: &MemoryDevice, units: u32, bits: f64, t_queue_s: f64) -> Result<f64> {
    let size_term = if bits > 0.0 {
        let bw = dev.bandwidth_bits_per_s(units);
        if bw <= 0.0 {
            return Err(Error::Infeasible(alloc::format!(
                "{} bits assigned to {} with no allocated bandwidth",
                bits,
                dev.name
            )));
        }
        bits / bw
    } else {
        0.0
    };
    Ok(dev.read_latency_ns * NS + size_term + t_queue_s)
}

/// `T = t_access + size / bandwidth + t_queue` per tier, and
/// `T_final = max(T_mram, T_inlier) + T_sync`.
pub fn weight_load_latency(transfer: TransferBits, cfg: &SystemConfig) -> Result<LatencyBreakdown> {
    latency_with(transfer, cfg, cfg.mram_channels, cfg.reram_arrays)
}

fn latency_with(
    transfer: TransferBits,
    cfg: &SystemConfig,
    mram_units: u32,
    inlier_units: u32,
) -> Result<LatencyBreakdown> {
    let q = cfg.t_queue_ns * NS;
    let mram_s = tier_time(&cfg.mram, mram_units, transfer.mram_bits, q)?;
    let inlier_s = tier_time(cfg.inlier_device(), inlier_units, transfer.inlier_bits, q)?;
    let sync_s = cfg.t_sync_s();
    let (slow, bottleneck) = if mram_s > inlier_s {
        (mram_s, Device::Mram)
    } else {
        (inlier_s, cfg.inlier_device_id())
    };
    Ok(LatencyBreakdown {
        mram_s,
        inlier_s,
        sync_s,
        final_s: slow + sync_s,
        bottleneck,
    })
}

/// Read power drawn at the given sustained bandwidths.
pub fn memory_power_mw(bw_mram_gib_s: f64, bw_inlier_gib_s: f64, cfg: &SystemConfig) -> f64 {
    let e_net = cfg.e_network_pj_per_bit;
    let watts = bw_mram_gib_s * GIB * 8.0 * (cfg.mram.read_energy_pj_per_bit + e_net) * PJ
        + bw_inlier_gib_s * GIB * 8.0 * (cfg.inlier_device().read_energy_pj_per_bit + e_net) * PJ;
    watts * 1e3
}

/// `P_budget > BW_mram (E_mram + E_net) + BW_reram (E_reram + E_net)`, strictly.
pub fn power_feasible(bw_mram_gib_s: f64, bw_inlier_gib_s: f64, cfg: &SystemConfig) -> bool {
    cfg.power_budget_mw > memory_power_mw(bw_mram_gib_s, bw_inlier_gib_s, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AreaReport {
    pub reram_mm2: f64,
    pub mram_mm2: f64,
    pub baseline_mm2: f64,
}

impl AreaReport {
    pub fn nvm_mm2(&self) -> f64 {
        self.reram_mm2 + self.mram_mm2
    }
}

/// Cell area of the inlier and outlier stores against FP16 in LPDDR5 plus Flash.
pub fn area_report(cfg: &SystemConfig) -> AreaReport {
    let n = cfg.param_count as f64;
    let inlier_cells = (1.0 - cfg.rho) * n * cfg.inlier_cells_per_weight();
    let mram_cells = cfg.rho * n * cfg.outlier_bits as f64;
    AreaReport {
        reram_mm2: cfg.inlier_device().area_mm2(inlier_cells),
        mram_mm2: cfg.mram.area_mm2(mram_cells),
        baseline_mm2: cfg.lpddr5.area_mm2(n * BASELINE_BITS) + cfg.flash_area_mm2,
    }
}

/// Per-weight and per-step figures of merit against the FP16 / LPDDR5 baseline.
///
/// Scale and index metadata are not part of the payload accounting.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostReport {
    pub bits_per_weight: f64,
    pub compression_ratio: f64,
    pub cells_per_weight: f64,
    pub cell_reduction: f64,
    pub external_bits_per_weight: f64,
    pub external_transfer_reduction: f64,
    pub dram_weight_access_reduction: f64,
    pub energy_per_weight_pj: f64,
    pub baseline_energy_per_weight_pj: f64,
    pub energy_reduction: f64,
    pub latency_per_step_s: f64,
    pub baseline_latency_per_step_s: f64,
    pub latency_reduction: f64,
    pub bottleneck: Device,
    pub reram_area_mm2: f64,
    pub mram_area_mm2: f64,
    pub nvm_area_mm2: f64,
    pub baseline_area_mm2: f64,
    pub area_delta_mm2: f64,
    pub power_mw: f64,
    pub power_budget_mw: f64,
    pub power_feasible: bool,
}

/// Latency of one step over the configured allocation. The clock-domain
/// crossing is only paid when both tiers carry data.
pub fn step_latency(cfg: &SystemConfig) -> Result<LatencyBreakdown> {
    step_latency_with(cfg, cfg.mram_channels, cfg.reram_arrays)
}

fn step_latency_with(cfg: &SystemConfig, mram_units: u32, inlier_units: u32) -> Result<LatencyBreakdown> {
    let t = cfg.transfer_per_step();
    let mut lat = latency_with(t, cfg, mram_units, inlier_units)?;
    if t.mram_bits == 0.0 || t.inlier_bits == 0.0 {
        let (slow, dev) = if t.inlier_bits == 0.0 && t.mram_bits > 0.0 {
            (lat.mram_s, Device::Mram)
        } else {
            (lat.inlier_s, cfg.inlier_device_id())
        };
        lat.sync_s = 0.0;
        lat.final_s = slow;
        lat.bottleneck = dev;
    }
    Ok(lat)
}

fn baseline_latency_s(cfg: &SystemConfig) -> f64 {
    let bits = cfg.param_count as f64 * BASELINE_BITS;
    let bw = cfg.lpddr5.bandwidth_bits_per_s(1);
    cfg.lpddr5.read_latency_ns * NS + bits / bw + cfg.t_queue_ns * NS
}

pub fn cost_report(cfg: &SystemConfig) -> Result<CostReport> {
    cfg.validate()?;
    let rho = cfg.rho;
    let b_in = cfg.inlier_bits as f64;
    let b_out = cfg.outlier_bits as f64;
    let e_net = cfg.e_network_pj_per_bit;

    let bits_per_weight = (1.0 - rho) * b_in + rho * b_out;
    let cells_per_weight = (1.0 - rho) * cfg.inlier_cells_per_weight() + rho * b_out;
    let external_bits_per_weight = (1.0 - rho) * b_in;
    let energy_per_weight_pj = (1.0 - rho) * b_in * (cfg.inlier_device().read_energy_pj_per_bit + e_net)
        + rho * b_out * (cfg.mram.read_energy_pj_per_bit + e_net);
    let baseline_energy_per_weight_pj = BASELINE_BITS * (cfg.lpddr5.read_energy_pj_per_bit + e_net);

    let lat = step_latency(cfg)?;
    let baseline_latency = baseline_latency_s(cfg);
    let area = area_report(cfg);
    let bw_m = cfg.mram_channels as f64 * cfg.mram.bandwidth_gib_s;
    let bw_i = cfg.reram_arrays as f64 * cfg.inlier_device().bandwidth_gib_s;

    Ok(CostReport {
        bits_per_weight,
        compression_ratio: BASELINE_BITS / bits_per_weight,
        cells_per_weight,
        cell_reduction: BASELINE_BITS / cells_per_weight,
        external_bits_per_weight,
        external_transfer_reduction: BASELINE_BITS / external_bits_per_weight,
        dram_weight_access_reduction: 1.0 - external_bits_per_weight / BASELINE_BITS,
        energy_per_weight_pj,
        baseline_energy_per_weight_pj,
        energy_reduction: baseline_energy_per_weight_pj / energy_per_weight_pj,
        latency_per_step_s: lat.final_s,
        baseline_latency_per_step_s: baseline_latency,
        latency_reduction: baseline_latency / lat.final_s,
        bottleneck: lat.bottleneck,
        reram_area_mm2: area.reram_mm2,
        mram_area_mm2: area.mram_mm2,
        nvm_area_mm2: area.nvm_mm2(),
        baseline_area_mm2: area.baseline_mm2,
        area_delta_mm2: area.nvm_mm2() - area.baseline_mm2,
        power_mw: memory_power_mw(bw_m, bw_i, cfg),
        power_budget_mw: cfg.power_budget_mw,
        power_feasible: power_feasible(bw_m, bw_i, cfg),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BandwidthPoint {
    pub mram_channels: u32,
    pub reram_arrays: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Infeasibility {
    PowerBudget,
    NoBandwidth,
    LatencyTarget,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DseCandidate {
    pub point: BandwidthPoint,
    pub bw_mram_gib_s: f64,
    pub bw_inlier_gib_s: f64,
    pub power_mw: f64,
    pub latency: Option<LatencyBreakdown>,
    pub infeasible: Option<Infeasibility>,
}

impl DseCandidate {
    pub fn is_feasible(&self) -> bool {
        self.infeasible.is_none()
    }

    /// Final latency, or +inf when the point cannot serve the transfer at all.
    pub fn final_s(&self) -> f64 {
        self.latency.map_or(f64::INFINITY, |l| l.final_s)
    }

    fn units(&self) -> u64 {
        self.point.mram_channels as u64 + self.point.reram_arrays as u64
    }
}

/// Lower latency, then lower power, then fewer units, then lexicographic point.
pub fn dse_order(a: &DseCandidate, b: &DseCandidate) -> Ordering {
    a.final_s()
        .total_cmp(&b.final_s())
        .then_with(|| a.power_mw.total_cmp(&b.power_mw))
        .then_with(|| a.units().cmp(&b.units()))
        .then_with(|| a.point.mram_channels.cmp(&b.point.mram_channels))
        .then_with(|| a.point.reram_arrays.cmp(&b.point.reram_arrays))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DseOutcome {
    pub best: DseCandidate,
    /// Feasible points not dominated in (latency, power), by ascending latency.
    pub pareto: Vec<DseCandidate>,
    /// Every candidate in input order.
    pub candidates: Vec<DseCandidate>,
}

pub fn evaluate_candidate(cfg: &SystemConfig, point: BandwidthPoint) -> DseCandidate {
    let bw_m = point.mram_channels as f64 * cfg.mram.bandwidth_gib_s;
    let bw_i = point.reram_arrays as f64 * cfg.inlier_device().bandwidth_gib_s;
    let power_mw = memory_power_mw(bw_m, bw_i, cfg);
    let latency = latency_with(
        cfg.transfer_per_step(),
        cfg,
        point.mram_channels,
        point.reram_arrays,
    )
    .ok();
    let infeasible = match latency {
        None => Some(Infeasibility::NoBandwidth),
        Some(_) if !power_feasible(bw_m, bw_i, cfg) => Some(Infeasibility::PowerBudget),
        Some(l) if cfg.latency_target_ns.is_some_and(|t| l.final_s > t * NS) => {
            Some(Infeasibility::LatencyTarget)
        }
        Some(_) => None,
    };
    DseCandidate {
        point,
        bw_mram_gib_s: bw_m,
        bw_inlier_gib_s: bw_i,
        power_mw,
        latency,
        infeasible,
    }
}

/// Picks the feasible bandwidth allocation with the lowest weight-load latency.
pub fn explore_bandwidth(cfg: &SystemConfig, grid: &[BandwidthPoint]) -> Result<DseOutcome> {
    cfg.validate()?;
    if grid.is_empty() {
        return Err(config_err!("empty bandwidth candidate grid"));
    }
    let candidates: Vec<DseCandidate> = grid.iter().map(|&p| evaluate_candidate(cfg, p)).collect();
    let mut feasible: Vec<&DseCandidate> = candidates.iter().filter(|c| c.is_feasible()).collect();
    if feasible.is_empty() {
        return Err(Error::Infeasible(alloc::format!(
            "none of {} candidates meets the {} mW power budget and latency constraints",
            candidates.len(),
            cfg.power_budget_mw
        )));
    }
    feasible.sort_by(|a, b| dse_order(a, b));
    let best = feasible[0].clone();
    let mut pareto = Vec::new();
    let mut min_power = f64::INFINITY;
    for c in feasible {
        if c.power_mw < min_power {
            min_power = c.power_mw;
            pareto.push(c.clone());
        }
    }
    Ok(DseOutcome {
        best,
        pareto,
        candidates,
    })
}
