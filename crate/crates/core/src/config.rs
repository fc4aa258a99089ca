//! Scenario files and the small CSV inputs the CLI accepts.
//!
//! Scenario files are INI-style: `[section]` headers followed by
//! `key = value` lines, with `#` or `;` comments. Units are spelled out in
//! key suffixes (`_uf`, `_dbm`, `_s`, ...). `[node]` and `[region]` may
//! repeat; every other section may appear once. Unknown keys are errors.
//!
//! ```text
//! [cycle]
//! preset = case1
//!
//! [node]
//! id = leaf-a
//! distance_m = 1.0
//!
//! [transmitter]
//! eirp_dbm = 30
//! policy = always_on
//! ```

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::bom::{Category, Component, DesignVariant};
use crate::energy_buffer::{BufferSpec, BufferState};
use crate::harvester::{self, calibrate, dataset, ChargeKind, ChargeObservation, HarvesterModel};
use crate::link_budget::{LimitKind, PathLossModel, RegulatoryRegion};
use crate::node_cycle::{make_preset, CaseLabel, CycleSpec, Stage, StageKind};
use crate::quantities::{DecibelGain, EnergyJoule, Farad, Grams, MegaHertz, Meters, PowerDbm, PowerWatt, Seconds, Volt};
use crate::simulator::{self, LeafMotionModel, NodeConfig, Scenario, SchedulePolicy, TransmitterConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ConfigError {
    pub line: usize,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(k) => write!(f, "line {}: {k}: {}", self.line, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

fn err(line: usize, key: Option<&str>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        key: key.map(str::to_string),
        message: message.into(),
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
struct Section {
    name: String,
    line: usize,
    entries: HashMap<String, Entry>,
}

const REPEATABLE: &[&str] = &["node", "region"];

fn known_keys(section: &str) -> Option<&'static [&'static str]> {
    Some(match section {
        "buffer" => &["capacitance_uf", "nominal_uf", "v_chrdy_v", "v_ovdis_v", "v_floor_v"],
        "harvester" => &["sensitivity_dbm", "v_phase_v", "calibration"],
        "link" => &["anchor_loss_db", "anchor_distance_m", "exponent", "region", "freq_mhz"],
        "region" => &["name", "band_low_mhz", "band_high_mhz", "limit_dbm", "limit_kind"],
        "cycle" => &[
            "preset",
            "init_ms",
            "init_mw",
            "measure_ms",
            "measure_mw",
            "tx_ms",
            "tx_mw",
            "adv_energy_mj",
            "adv_interval_ms",
        ],
        "node" => &["id", "distance_m", "initial_v"],
        "transmitter" => &[
            "eirp_dbm",
            "policy",
            "on_s",
            "off_s",
            "window",
            "angle_std_threshold_deg",
            "pause_s",
            "slot_s",
            "assignment",
            "enforce_compliance",
        ],
        "sim" => &["duration_s", "seed", "p_rx"],
        "motion" => &["amplitude_deg", "period_s", "noise_std_deg", "phase_rad"],
        _ => return None,
    })
}

fn tokenize(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, None, format!("malformed section header '{line}'")))?
                .trim()
                .to_ascii_lowercase();
            if known_keys(&name).is_none() {
                return Err(err(line_no, None, format!("unknown section [{name}]")));
            }
            if !REPEATABLE.contains(&name.as_str()) && sections.iter().any(|s| s.name == name) {
                return Err(err(line_no, None, format!("duplicate section [{name}]")));
            }
            sections.push(Section {
                name,
                line: line_no,
                entries: HashMap::new(),
            });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, None, format!("expected 'key = value', got '{line}'")))?;
        let key = key.trim().to_ascii_lowercase();
        let value = strip_comment(value).trim().to_string();
        let section = sections
            .last_mut()
            .ok_or_else(|| err(line_no, Some(&key), "key outside of any section"))?;
        let allowed = known_keys(&section.name).unwrap_or(&[]);
        if !allowed.contains(&key.as_str()) {
            return Err(err(
                line_no,
                Some(&key),
                format!("unknown key in [{}]", section.name),
            ));
        }
        if section.entries.contains_key(&key) {
            return Err(err(line_no, Some(&key), "duplicate key"));
        }
        section.entries.insert(key, Entry { value, line: line_no });
    }
    Ok(sections)
}

fn strip_comment(v: &str) -> &str {
    let cut = [" #", " ;", "\t#", "\t;"]
        .iter()
        .filter_map(|m| v.find(m))
        .min();
    match cut {
        Some(i) => &v[..i],
        None => v,
    }
}

struct View<'a> {
    section: Option<&'a Section>,
}

impl<'a> View<'a> {
    fn header_line(&self) -> usize {
        self.section.map(|s| s.line).unwrap_or(0)
    }

    fn raw(&self, key: &str) -> Result<Option<(&'a str, usize)>, ConfigError> {
        let Some(s) = self.section else {
            return Ok(None);
        };
        match s.entries.get(key) {
            Some(e) if e.value.is_empty() => Err(err(e.line, Some(key), "empty value")),
            Some(e) => Ok(Some((e.value.as_str(), e.line))),
            None => Ok(None),
        }
    }

    fn str(&self, key: &str) -> Result<Option<&'a str>, ConfigError> {
        Ok(self.raw(key)?.map(|(v, _)| v))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key)? {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| err(line, Some(key), format!("cannot parse '{v}': {e}"))),
        }
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let v: Option<f64> = self.parse(key)?;
        if let Some(x) = v {
            if !x.is_finite() {
                let line = self.raw(key)?.map(|(_, l)| l).unwrap_or(0);
                return Err(err(line, Some(key), "value must be finite"));
            }
        }
        Ok(v)
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn required_f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.f64(key)?.ok_or_else(|| {
            err(
                self.header_line(),
                Some(key),
                "missing required key",
            )
        })
    }

    /// Wrap a value-level validation failure with the key's line.
    fn check<T, E: fmt::Display>(&self, key: &str, r: Result<T, E>) -> Result<T, ConfigError> {
        r.map_err(|e| {
            let line = self
                .section
                .and_then(|s| s.entries.get(key))
                .map(|e| e.line)
                .unwrap_or(self.header_line());
            err(line, Some(key), e.to_string())
        })
    }
}

fn single<'a>(sections: &'a [Section], name: &str) -> View<'a> {
    View {
        section: sections.iter().find(|s| s.name == name),
    }
}

fn parse_cycle(v: &View<'_>) -> Result<CycleSpec, ConfigError> {
    let preset = v.str("preset")?.unwrap_or("case1");
    let label = if preset.eq_ignore_ascii_case("custom") {
        CaseLabel::Custom
    } else {
        v.check("preset", preset.parse::<CaseLabel>())?
    };
    let mut spec = if label == CaseLabel::Custom {
        let mut stages = Vec::new();
        for (kind, ms, mw) in [
            (StageKind::Initialization, "init_ms", "init_mw"),
            (StageKind::Measurement, "measure_ms", "measure_mw"),
            (StageKind::Transmission, "tx_ms", "tx_mw"),
        ] {
            let d = v.required_f64(ms)?;
            let p = v.required_f64(mw)?;
            stages.push(Stage {
                kind,
                duration: v.check(ms, Seconds::try_new(d * 1e-3))?,
                power: v.check(mw, PowerWatt::try_new(p * 1e-3))?,
            });
        }
        let adv = stages[2].energy();
        CycleSpec {
            label,
            stages,
            adv_energy: adv,
            adv_interval: Seconds::from_millis(crate::node_cycle::DEFAULT_ADV_INTERVAL_MS),
        }
    } else {
        let mut spec = make_preset(label).map_err(|e| err(v.header_line(), Some("preset"), e.to_string()))?;
        for (idx, ms, mw) in [(0, "init_ms", "init_mw"), (1, "measure_ms", "measure_mw"), (2, "tx_ms", "tx_mw")] {
            if let Some(d) = v.f64(ms)? {
                spec.stages[idx].duration = v.check(ms, Seconds::try_new(d * 1e-3))?;
            }
            if let Some(p) = v.f64(mw)? {
                spec.stages[idx].power = v.check(mw, PowerWatt::try_new(p * 1e-3))?;
            }
        }
        spec.adv_energy = spec.stages[2].energy();
        spec
    };
    if let Some(e) = v.f64("adv_energy_mj")? {
        spec.adv_energy = v.check("adv_energy_mj", EnergyJoule::try_new(e * 1e-3))?;
    }
    if let Some(ms) = v.f64("adv_interval_ms")? {
        spec.adv_interval = v.check("adv_interval_ms", Seconds::try_new(ms * 1e-3))?;
    }
    v.check("cycle", spec.validate())?;
    Ok(spec)
}

fn parse_buffer(v: &View<'_>, cycle: &CycleSpec) -> Result<BufferSpec, ConfigError> {
    let default = match cycle.label {
        CaseLabel::CaseII => BufferSpec::case_ii(),
        _ => BufferSpec::case_i(),
    };
    let measured = match v.f64("capacitance_uf")? {
        Some(uf) => v.check("capacitance_uf", Farad::try_new(uf * 1e-6))?,
        None => default.c_measured,
    };
    let nominal = match v.f64("nominal_uf")? {
        Some(uf) => v.check("nominal_uf", Farad::try_new(uf * 1e-6))?,
        None if v.f64("capacitance_uf")?.is_some() => measured,
        None => default.c_nominal,
    };
    let volt = |key: &str, d: Volt| -> Result<Volt, ConfigError> {
        match v.f64(key)? {
            Some(x) => v.check(key, Volt::try_new(x)),
            None => Ok(d),
        }
    };
    let v_chrdy = volt("v_chrdy_v", default.v_chrdy)?;
    let v_ovdis = volt("v_ovdis_v", default.v_ovdis)?;
    let v_floor = volt("v_floor_v", default.v_floor)?;
    let key = if v.f64("v_floor_v")?.is_some() { "v_floor_v" } else { "v_ovdis_v" };
    v.check(key, BufferSpec::new(nominal, measured, v_chrdy, v_ovdis, v_floor))
}

fn parse_harvester(v: &View<'_>, buffer: &BufferSpec, base_dir: Option<&Path>) -> Result<HarvesterModel, ConfigError> {
    let v_phase = v.f64_or("v_phase_v", harvester::DEFAULT_V_PHASE)?;
    let v_phase = v.check("v_phase_v", Volt::try_new(v_phase))?;
    if v_phase.value() <= 0.0 {
        return Err(err(v.header_line(), Some("v_phase_v"), "must be positive"));
    }
    let cal = v.str("calibration")?.unwrap_or("builtin");
    let observations = match cal.to_ascii_lowercase().as_str() {
        "builtin" => dataset::observations(dataset::Capacitor::nearest(buffer.c_nominal)),
        "builtin-470uf" => dataset::observations(dataset::Capacitor::Uf470),
        "builtin-1mf" => dataset::observations(dataset::Capacitor::Mf1),
        "builtin-all" => dataset::all_observations(),
        _ => {
            let path = match base_dir {
                Some(d) => d.join(cal),
                None => PathBuf::from(cal),
            };
            let text = std::fs::read_to_string(&path)
                .map_err(|e| err(v.header_line(), Some("calibration"), format!("{}: {e}", path.display())))?;
            v.check("calibration", parse_observations_csv(&text))?
        }
    };
    let mut model = v.check("calibration", calibrate(&observations, v_phase))?;
    if let Some(s) = v.f64("sensitivity_dbm")? {
        model.sensitivity = PowerDbm::new(s);
    }
    Ok(model)
}

fn parse_region(s: &Section) -> Result<RegulatoryRegion, ConfigError> {
    let v = View { section: Some(s) };
    let name = v
        .str("name")?
        .ok_or_else(|| err(s.line, Some("name"), "missing required key"))?;
    let kind = match v.str("limit_kind")?.unwrap_or("eirp").to_ascii_lowercase().as_str() {
        "eirp" => LimitKind::Eirp,
        "erp" => LimitKind::Erp,
        other => return Err(err(s.line, Some("limit_kind"), format!("unknown limit kind '{other}' (eirp|erp)"))),
    };
    let lo = v.check("band_low_mhz", MegaHertz::try_new(v.required_f64("band_low_mhz")?))?;
    let hi = v.check("band_high_mhz", MegaHertz::try_new(v.required_f64("band_high_mhz")?))?;
    let limit = PowerDbm::new(v.required_f64("limit_dbm")?);
    v.check("band_high_mhz", RegulatoryRegion::new(name, lo, hi, limit, kind))
}

fn parse_policy(v: &View<'_>, node_ids: &[String]) -> Result<SchedulePolicy, ConfigError> {
    let secs = |key: &str| -> Result<Seconds, ConfigError> {
        let x = v.required_f64(key)?;
        if x <= 0.0 {
            return Err(err(v.raw(key)?.map(|(_, l)| l).unwrap_or(0), Some(key), "must be positive"));
        }
        Ok(Seconds::new(x))
    };
    let policy = v.str("policy")?.unwrap_or("always_on").to_ascii_lowercase();
    Ok(match policy.as_str() {
        "always_on" | "alwayson" => SchedulePolicy::AlwaysOn,
        "duty_cycle" | "dutycycle" => SchedulePolicy::DutyCycle {
            on: secs("on_s")?,
            off: secs("off_s")?,
        },
        "adaptive" => {
            let window: usize = v
                .parse("window")?
                .ok_or_else(|| err(v.header_line(), Some("window"), "missing required key"))?;
            if window < 2 {
                return Err(err(v.raw("window")?.map(|(_, l)| l).unwrap_or(0), Some("window"), "must be at least 2"));
            }
            let threshold = v.required_f64("angle_std_threshold_deg")?;
            if threshold < 0.0 {
                return Err(err(0, Some("angle_std_threshold_deg"), "must be non-negative"));
            }
            SchedulePolicy::Adaptive {
                window,
                angle_std_threshold: threshold,
                pause: secs("pause_s")?,
            }
        }
        "tdm" => {
            let slot = secs("slot_s")?;
            let assignment: Vec<String> = match v.str("assignment")? {
                Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
                None => node_ids.to_vec(),
            };
            SchedulePolicy::Tdm { slot, assignment }
        }
        other => {
            let line = v.raw("policy")?.map(|(_, l)| l).unwrap_or(0);
            return Err(err(
                line,
                Some("policy"),
                format!("unknown policy '{other}' (always_on|duty_cycle|adaptive|tdm)"),
            ));
        }
    })
}

/// Parse and validate a scenario file. Relative calibration paths resolve
/// against `base_dir`.
pub fn parse_scenario(text: &str, base_dir: Option<&Path>) -> Result<Scenario, ConfigError> {
    let sections = tokenize(text)?;

    let cycle = parse_cycle(&single(&sections, "cycle"))?;
    let buffer = parse_buffer(&single(&sections, "buffer"), &cycle)?;
    let harvester = parse_harvester(&single(&sections, "harvester"), &buffer, base_dir)?;

    let extra_regions = sections
        .iter()
        .filter(|s| s.name == "region")
        .map(parse_region)
        .collect::<Result<Vec<_>, _>>()?;

    let link = single(&sections, "link");
    let anchor_loss = link.f64_or("anchor_loss_db", 40.0)?;
    let anchor_distance = link.f64_or("anchor_distance_m", 1.0)?;
    let exponent = link.f64_or("exponent", 2.0)?;
    let anchor_distance = link.check("anchor_distance_m", Meters::try_new(anchor_distance))?;
    let path_loss = link.check(
        "exponent",
        PathLossModel::new(DecibelGain::new(anchor_loss), anchor_distance, exponent),
    )?;
    let region_name = link.str("region")?.unwrap_or("fcc");
    let region = RegulatoryRegion::lookup(region_name, &extra_regions).ok_or_else(|| {
        err(
            link.raw("region").ok().flatten().map(|(_, l)| l).unwrap_or(0),
            Some("region"),
            format!("unknown region '{region_name}'"),
        )
    })?;
    let freq = link.check("freq_mhz", MegaHertz::try_new(link.f64_or("freq_mhz", 915.0)?))?;

    let mut nodes = Vec::new();
    for (k, s) in sections.iter().filter(|s| s.name == "node").enumerate() {
        let v = View { section: Some(s) };
        let id = v.str("id")?.map(str::to_string).unwrap_or_else(|| format!("node{}", k + 1));
        let distance = v.required_f64("distance_m")?;
        if distance <= 0.0 {
            return Err(err(v.raw("distance_m")?.map(|(_, l)| l).unwrap_or(s.line), Some("distance_m"), "must be positive"));
        }
        let initial = v.check("initial_v", Volt::try_new(v.f64_or("initial_v", 0.0)?))?;
        v.check("initial_v", BufferState::new(&buffer, initial))?;
        nodes.push(NodeConfig {
            id,
            buffer,
            harvester: harvester.clone(),
            cycle: cycle.clone(),
            distance,
            path_loss,
            initial_voltage: initial,
        });
    }
    if nodes.is_empty() {
        return Err(err(0, None, "scenario needs at least one [node] section"));
    }
    let ids: Vec<String> = nodes.iter().map(|n| n.id.clone()).collect();

    let tx = single(&sections, "transmitter");
    let enforce = match tx.str("enforce_compliance")? {
        None => true,
        Some(s) => tx.check("enforce_compliance", s.parse::<bool>())?,
    };
    let transmitter = TransmitterConfig {
        eirp: PowerDbm::new(tx.f64_or("eirp_dbm", 25.0)?),
        freq,
        region,
        policy: parse_policy(&tx, &ids)?,
        enforce_compliance: enforce,
    };

    let sim = single(&sections, "sim");
    let duration = sim.f64_or("duration_s", 3600.0)?;
    if duration <= 0.0 {
        return Err(err(0, Some("duration_s"), "must be positive"));
    }
    let seed: u64 = sim.parse("seed")?.unwrap_or(0);
    let p_rx = sim.f64_or("p_rx", 1.0)?;

    let m = single(&sections, "motion");
    let d = LeafMotionModel::default();
    let period = m.f64_or("period_s", d.period.value())?;
    let motion = LeafMotionModel {
        amplitude_deg: m.f64_or("amplitude_deg", d.amplitude_deg)?,
        period: m.check("period_s", Seconds::try_new(period))?,
        noise_std_deg: m.f64_or("noise_std_deg", d.noise_std_deg)?,
        phase_rad: m.f64_or("phase_rad", d.phase_rad)?,
    };

    let scenario = Scenario {
        nodes,
        transmitter,
        duration: Seconds::new(duration),
        seed,
        motion,
        p_rx,
    };
    match simulator::validate(&scenario) {
        Ok(()) | Err(simulator::SimError::NonCompliant { .. }) => Ok(scenario),
        Err(e) => Err(err(0, None, e.to_string())),
    }
}

fn csv_rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i, l.split(',').map(str::trim).collect()))
}

fn header_index(header: &[&str], wanted: &[&str], line: usize) -> Result<Vec<usize>, ConfigError> {
    wanted
        .iter()
        .map(|w| {
            header
                .iter()
                .position(|h| h.eq_ignore_ascii_case(w))
                .ok_or_else(|| err(line, Some(w), "missing CSV column"))
        })
        .collect()
}

pub const OBSERVATION_COLUMNS: [&str; 6] = ["c_uf", "v_start_v", "v_target_v", "p_in_dbm", "t_s", "kind"];

/// Charge-time observations, one per row, with the header
/// `c_uf,v_start_v,v_target_v,p_in_dbm,t_s,kind`.
pub fn parse_observations_csv(text: &str) -> Result<Vec<ChargeObservation>, ConfigError> {
    let mut rows = csv_rows(text);
    let (hline, header) = rows.next().ok_or_else(|| err(0, None, "empty observation file"))?;
    let idx = header_index(&header, &OBSERVATION_COLUMNS, hline)?;
    let mut out = Vec::new();
    for (line, cols) in rows {
        let get = |k: usize| -> Result<&str, ConfigError> {
            cols.get(idx[k])
                .copied()
                .ok_or_else(|| err(line, Some(OBSERVATION_COLUMNS[k]), "missing field"))
        };
        let num = |k: usize| -> Result<f64, ConfigError> {
            let s = get(k)?;
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(line, Some(OBSERVATION_COLUMNS[k]), format!("cannot parse '{s}'")))
        };
        let wrap = |k: usize, e: crate::quantities::QuantityError| err(line, Some(OBSERVATION_COLUMNS[k]), e.to_string());
        let kind: ChargeKind = get(5)?
            .parse()
            .map_err(|e: String| err(line, Some("kind"), e))?;
        let obs = ChargeObservation {
            c: Farad::try_new(num(0)? * 1e-6).map_err(|e| wrap(0, e))?,
            v_start: Volt::try_new(num(1)?).map_err(|e| wrap(1, e))?,
            v_target: Volt::try_new(num(2)?).map_err(|e| wrap(2, e))?,
            p_in: PowerDbm::new(num(3)?),
            t_measured: Seconds::try_new(num(4)?).map_err(|e| wrap(4, e))?,
            kind,
        };
        if obs.t_measured.value() <= 0.0 || obs.v_target <= obs.v_start {
            return Err(err(line, None, "need t_s > 0 and v_target_v > v_start_v"));
        }
        out.push(obs);
    }
    Ok(out)
}

pub const VARIANT_COLUMNS: [&str; 4] = ["variant", "label", "weight_g", "category"];

/// Design variants as `variant,label,weight_g,category` rows; variants keep
/// their first-appearance order.
pub fn parse_variants_csv(text: &str) -> Result<Vec<DesignVariant>, ConfigError> {
    let mut rows = csv_rows(text);
    let (hline, header) = rows.next().ok_or_else(|| err(0, None, "empty variants file"))?;
    let idx = header_index(&header, &VARIANT_COLUMNS, hline)?;
    let mut out: Vec<DesignVariant> = Vec::new();
    for (line, cols) in rows {
        let get = |k: usize| -> Result<&str, ConfigError> {
            cols.get(idx[k])
                .copied()
                .ok_or_else(|| err(line, Some(VARIANT_COLUMNS[k]), "missing field"))
        };
        let w: f64 = get(2)?
            .parse()
            .map_err(|_| err(line, Some("weight_g"), format!("cannot parse '{}'", cols[idx[2]])))?;
        let weight = Grams::try_new(w).map_err(|e| err(line, Some("weight_g"), e.to_string()))?;
        let category: Category = get(3)?
            .parse()
            .map_err(|e: crate::bom::BomError| err(line, Some("category"), e.to_string()))?;
        let comp = Component {
            label: get(1)?.to_string(),
            weight,
            category,
        };
        let name = get(0)?;
        match out.iter_mut().find(|v| v.name == name) {
            Some(v) => v.components.push(comp),
            None => out.push(DesignVariant {
                name: name.to_string(),
                components: vec![comp],
            }),
        }
    }
    if out.is_empty() {
        return Err(err(hline, None, "no variants"));
    }
    Ok(out)
}
