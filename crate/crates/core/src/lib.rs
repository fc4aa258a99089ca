//! Models for a batteryless, RF-powered leaf-orientation sensor node: unit
//! types, capacitor buffer, harvester charging, link budget, duty cycle,
//! orientation noise, a discrete-event network simulator and weight budget.

pub mod bom;
pub mod config;
pub mod energy_buffer;
pub mod format;
pub mod harvester;
pub mod link_budget;
pub mod node_cycle;
pub mod orientation;
pub mod quantities;
pub mod simulator;

pub use energy_buffer::{BufferSpec, BufferState};
pub use harvester::{ChargeKind, ChargeObservation, HarvesterModel};
pub use link_budget::{PathLossModel, RegulatoryRegion};
pub use node_cycle::{CaseLabel, CycleSpec, Stage, StageKind};
pub use quantities::{
    dbm_to_watt, watt_to_dbm, DecibelGain, EnergyJoule, Farad, Grams, MegaHertz, Meters, PowerDbm, PowerWatt,
    QuantityError, Seconds, Volt,
};
pub use simulator::{NodeConfig, Scenario, SchedulePolicy, TransmitterConfig};
