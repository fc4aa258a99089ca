use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use rfnode_core::bom::{builtin_variants, weight_report};
use rfnode_core::config::{parse_observations_csv, parse_scenario, parse_variants_csv};
use rfnode_core::energy_buffer::size_buffer;
use rfnode_core::format::sig6;
use rfnode_core::harvester::{calibrate, charge_time, dataset, HarvestError, DEFAULT_V_PHASE};
use rfnode_core::link_budget::{check_regulatory, required_tx_power};
use rfnode_core::orientation::{angle_noise_mc, small_angle_pitch_std, EulerAngles, ImuNoiseSpec};
use rfnode_core::simulator::{self, SimError};
use rfnode_core::{
    BufferSpec, ChargeKind, DecibelGain, EnergyJoule, Farad, MegaHertz, Meters, PathLossModel, PowerDbm,
    RegulatoryRegion, Volt,
};

#[derive(Parser)]
#[command(name = "rfnode", version, about = "RF-powered sensor node models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Cold,
    Successive,
}

#[derive(Subcommand)]
enum Cmd {
    /// Capacitance needed to supply one cycle between two thresholds.
    SizeBuffer {
        #[arg(long)]
        energy_mj: f64,
        #[arg(long, default_value_t = 4.5)]
        vchrdy: f64,
        #[arg(long, default_value_t = 1.9)]
        vovdis: f64,
    },
    /// Charge time (minutes) against input power, as CSV.
    ChargeCurve {
        /// Nominal capacitance. The two characterised parts map to their
        /// measured values unless --measured-uf is given.
        #[arg(long)]
        cap_uf: f64,
        #[arg(long)]
        measured_uf: Option<f64>,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        powers: Vec<f64>,
        #[arg(long, default_value_t = 4.5)]
        vchrdy: f64,
        #[arg(long, default_value_t = 1.9)]
        vovdis: f64,
        /// Observation CSV to calibrate from; defaults to the built-in set
        /// for the nearest characterised capacitor.
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long, allow_negative_numbers = true)]
        sensitivity: Option<f64>,
    },
    /// Transmit power needed at a distance, with a regulatory verdict.
    LinkBudget {
        #[arg(long)]
        distance: f64,
        #[arg(long, default_value_t = -15.0, allow_negative_numbers = true)]
        sensitivity: f64,
        #[arg(long, default_value = "fcc")]
        region: String,
        #[arg(long, default_value_t = 915.0)]
        freq_mhz: f64,
        #[arg(long, default_value_t = 40.0)]
        anchor_loss_db: f64,
        #[arg(long, default_value_t = 1.0)]
        anchor_distance_m: f64,
        #[arg(long, default_value_t = 2.0)]
        exponent: f64,
    },
    /// Fit efficiency curves to charge-time observations, as CSV.
    Calibrate {
        /// Observation CSV, or `builtin`, `builtin-470uf`, `builtin-1mf`.
        #[arg(long, default_value = "builtin")]
        observations: String,
        #[arg(long, default_value_t = DEFAULT_V_PHASE)]
        v_phase: f64,
    },
    /// Run the network simulator on a scenario file.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out_events: Option<PathBuf>,
        #[arg(long)]
        out_report: Option<PathBuf>,
        /// Run once per EIRP value in parallel; the report becomes a JSON
        /// array and no event log is written.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "out_events")]
        sweep_eirp: Vec<f64>,
    },
    /// Monte Carlo angle noise for a given attitude.
    AngleNoise {
        #[arg(long, default_value_t = 1.91)]
        accel_rms_mg: f64,
        #[arg(long, default_value_t = 0.6)]
        mag_rms_ut: f64,
        #[arg(long, default_value_t = 32)]
        n_avg: u32,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        pitch: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        roll: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        yaw: f64,
    },
    /// Weight of each design variant against a baseline, as CSV.
    WeightReport {
        #[arg(long)]
        variants: Option<PathBuf>,
        #[arg(long, default_value = "battery-powered")]
        baseline: String,
    },
}

enum Failure {
    Usage(anyhow::Error),
    Infeasible(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn infeasible(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Infeasible(e.into())
}

fn harvest_failure(e: HarvestError) -> Failure {
    match e {
        HarvestError::NoHarvest { .. } | HarvestError::Unreachable(_) => infeasible(e),
        other => Failure::Usage(other.into()),
    }
}

type CmdResult = Result<String, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Infeasible(e)) => {
            eprintln!("infeasible: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(cmd: Cmd) -> CmdResult {
    match cmd {
        Cmd::SizeBuffer {
            energy_mj,
            vchrdy,
            vovdis,
        } => size_buffer_cmd(energy_mj, vchrdy, vovdis),
        Cmd::ChargeCurve {
            cap_uf,
            measured_uf,
            mode,
            powers,
            vchrdy,
            vovdis,
            calibration,
            sensitivity,
        } => charge_curve_cmd(cap_uf, measured_uf, mode, &powers, vchrdy, vovdis, calibration.as_deref(), sensitivity),
        Cmd::LinkBudget {
            distance,
            sensitivity,
            region,
            freq_mhz,
            anchor_loss_db,
            anchor_distance_m,
            exponent,
        } => {
            let model = PathLossModel::new(
                DecibelGain::try_new(anchor_loss_db).map_err(anyhow::Error::from)?,
                Meters::try_new(anchor_distance_m).map_err(anyhow::Error::from)?,
                exponent,
            )
            .map_err(anyhow::Error::from)?;
            link_budget_cmd(distance, sensitivity, &region, freq_mhz, &model)
        }
        Cmd::Calibrate {
            observations,
            v_phase,
        } => calibrate_cmd(&observations, v_phase),
        Cmd::Simulate {
            scenario,
            out_events,
            out_report,
            sweep_eirp,
        } => simulate_cmd(&scenario, out_events.as_deref(), out_report.as_deref(), &sweep_eirp),
        Cmd::AngleNoise {
            accel_rms_mg,
            mag_rms_ut,
            n_avg,
            trials,
            seed,
            pitch,
            roll,
            yaw,
        } => {
            let noise = ImuNoiseSpec {
                accel_rms_mg,
                mag_rms_ut,
                n_avg,
                ..ImuNoiseSpec::default()
            };
            angle_noise_cmd(&noise, &EulerAngles { pitch, roll, yaw }, trials, seed)
        }
        Cmd::WeightReport { variants, baseline } => weight_report_cmd(variants.as_deref(), &baseline),
    }
}

fn size_buffer_cmd(energy_mj: f64, vchrdy: f64, vovdis: f64) -> CmdResult {
    let e = EnergyJoule::try_new(energy_mj * 1e-3).map_err(anyhow::Error::from)?;
    let v_hi = Volt::try_new(vchrdy).map_err(anyhow::Error::from)?;
    let v_lo = Volt::try_new(vovdis).map_err(anyhow::Error::from)?;
    let c = size_buffer(e, v_hi, v_lo).map_err(anyhow::Error::from)?;
    Ok(format!(
        "energy_mj,v_chrdy_v,v_ovdis_v,capacitance_f,capacitance_uf\n{},{},{},{},{}\n",
        sig6(energy_mj),
        sig6(vchrdy),
        sig6(vovdis),
        sig6(c.value()),
        sig6(c.micro())
    ))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Usage)
}

#[allow(clippy::too_many_arguments)]
fn charge_curve_cmd(
    cap_uf: f64,
    measured_uf: Option<f64>,
    mode: Mode,
    powers: &[f64],
    vchrdy: f64,
    vovdis: f64,
    calibration: Option<&Path>,
    sensitivity: Option<f64>,
) -> CmdResult {
    let nominal = Farad::try_new(cap_uf * 1e-6).map_err(anyhow::Error::from)?;
    let nearest = dataset::Capacitor::nearest(nominal);
    let measured = match measured_uf {
        Some(uf) => Farad::try_new(uf * 1e-6).map_err(anyhow::Error::from)?,
        None if nearest.nominal() == nominal => nearest.measured(),
        None => nominal,
    };
    let v_hi = Volt::try_new(vchrdy).map_err(anyhow::Error::from)?;
    let v_lo = Volt::try_new(vovdis).map_err(anyhow::Error::from)?;
    let spec = BufferSpec::new(nominal, measured, v_hi, v_lo, v_lo).map_err(anyhow::Error::from)?;
    let observations = match calibration {
        Some(p) => parse_observations_csv(&read(p)?).map_err(anyhow::Error::from)?,
        None => dataset::observations(nearest),
    };
    let mut model = calibrate(&observations, Volt::new(DEFAULT_V_PHASE)).map_err(harvest_failure)?;
    if let Some(s) = sensitivity {
        model.sensitivity = PowerDbm::new(s);
    }
    let (start, kind) = match mode {
        Mode::Cold => (Volt::new(0.0), ChargeKind::Cold),
        Mode::Successive => (spec.v_ovdis, ChargeKind::Successive),
    };
    let mut out = String::from("p_in_dbm,mode,minutes\n");
    for &p in powers {
        let t = charge_time(&model, &spec, start, spec.v_chrdy, PowerDbm::new(p)).map_err(harvest_failure)?;
        out.push_str(&format!("{},{kind},{}\n", sig6(p), sig6(t.minutes())));
    }
    Ok(out)
}

fn link_budget_cmd(distance: f64, sensitivity: f64, region: &str, freq_mhz: f64, model: &PathLossModel) -> CmdResult {
    let region = RegulatoryRegion::lookup(region, &[]).ok_or_else(|| anyhow!("unknown region '{region}'"))?;
    let freq = MegaHertz::try_new(freq_mhz).map_err(anyhow::Error::from)?;
    let tx = required_tx_power(PowerDbm::new(sensitivity), model, distance).map_err(anyhow::Error::from)?;
    let v = check_regulatory(tx, &region, freq);
    let out = format!(
        "distance_m,sensitivity_dbm,required_tx_dbm,region,limit_dbm,margin_db,in_band,compliant\n{},{},{},{},{},{},{},{}\n",
        sig6(distance),
        sig6(sensitivity),
        sig6(tx.value()),
        region.name,
        sig6(region.limit.value()),
        sig6(v.margin.value()),
        v.in_band,
        v.compliant
    );
    if v.is_ok() {
        Ok(out)
    } else {
        print!("{out}");
        Err(infeasible(anyhow!(
            "{} dBm is not permitted in {} at {freq_mhz} MHz",
            sig6(tx.value()),
            region.name
        )))
    }
}

fn calibrate_cmd(observations: &str, v_phase: f64) -> CmdResult {
    let obs = match observations {
        "builtin" => dataset::all_observations(),
        "builtin-470uf" => dataset::observations(dataset::Capacitor::Uf470),
        "builtin-1mf" => dataset::observations(dataset::Capacitor::Mf1),
        path => parse_observations_csv(&read(Path::new(path))?).map_err(anyhow::Error::from)?,
    };
    let v_phase = Volt::try_new(v_phase).map_err(anyhow::Error::from)?;
    let model = calibrate(&obs, v_phase).map_err(harvest_failure)?;
    let mut out = String::from("p_in_dbm,eta_cold,eta_main\n");
    for (&(p, cold), &(_, main)) in model.eta_cold.points().iter().zip(model.eta_main.points()) {
        out.push_str(&format!("{},{},{}\n", sig6(p.value()), sig6(cold), sig6(main)));
    }
    Ok(out)
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::NonCompliant { .. } => infeasible(e),
        other => Failure::Usage(other.into()),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::File::create(path)
        .and_then(|mut f| f.write_all(contents.as_bytes()))
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Usage)
}

fn simulate_cmd(scenario: &Path, out_events: Option<&Path>, out_report: Option<&Path>, sweep: &[f64]) -> CmdResult {
    let text = read(scenario)?;
    let base = parse_scenario(&text, scenario.parent())
        .with_context(|| scenario.display().to_string())
        .map_err(Failure::Usage)?;

    if !sweep.is_empty() {
        let scenarios: Vec<_> = sweep
            .iter()
            .map(|&eirp| {
                let mut s = base.clone();
                s.transmitter.eirp = PowerDbm::new(eirp);
                s
            })
            .collect();
        let mut reports = Vec::new();
        let mut out = String::from("eirp_dbm,node_id,measurements,packets_delivered,brownouts\n");
        for (eirp, r) in sweep.iter().zip(simulator::run_sweep(&scenarios)) {
            let (_, report) = r.map_err(sim_failure)?;
            for n in &report.nodes {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    sig6(*eirp),
                    n.id,
                    n.measurements,
                    n.packets_delivered,
                    n.brownouts
                ));
            }
            reports.push(report);
        }
        if let Some(p) = out_report {
            write_file(p, &serde_json::to_string_pretty(&reports).map_err(anyhow::Error::from)?)?;
        }
        return Ok(out);
    }

    let (log, report) = simulator::run(&base).map_err(sim_failure)?;
    if let Some(p) = out_events {
        write_file(p, &log.to_csv())?;
    }
    if let Some(p) = out_report {
        write_file(p, &serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?)?;
    }
    let mut out = String::from("node_id,measurements,packets_sent,packets_delivered,brownouts,mean_interval_s\n");
    for n in &report.nodes {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            n.id,
            n.measurements,
            n.packets_sent,
            n.packets_delivered,
            n.brownouts,
            n.mean_interval_s.map(sig6).unwrap_or_default()
        ));
    }
    Ok(out)
}

fn angle_noise_cmd(noise: &ImuNoiseSpec, att: &EulerAngles, trials: usize, seed: u64) -> CmdResult {
    let r = angle_noise_mc(noise, att, trials, seed).map_err(anyhow::Error::from)?;
    Ok(format!(
        "angle,std_deg\npitch,{}\nroll,{}\nyaw,{}\npitch_small_angle,{}\n",
        sig6(r.pitch),
        sig6(r.roll),
        sig6(r.yaw),
        sig6(small_angle_pitch_std(noise.accel_rms_mg))
    ))
}

fn weight_report_cmd(variants: Option<&Path>, baseline: &str) -> CmdResult {
    let variants = match variants {
        Some(p) => parse_variants_csv(&read(p)?).map_err(anyhow::Error::from)?,
        None => builtin_variants(),
    };
    let rows = weight_report(&variants, baseline).map_err(anyhow::Error::from)?;
    let mut out = String::from("variant,total_g,delta_pct,delta_display_pct,under_5g\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.name,
            sig6(r.total.value()),
            sig6(r.delta_pct_1dp),
            r.delta_pct_display.abs(),
            r.under_limit
        ));
    }
    Ok(out)
}
