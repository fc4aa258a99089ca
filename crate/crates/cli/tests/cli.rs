use std::fs;
use std::process::{Command, Output};

fn rfnode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfnode"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(csv: &str, row: usize, col: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == col).unwrap();
    lines.nth(row).unwrap().split(',').nth(idx).unwrap().to_string()
}

#[test]
fn size_buffer_prints_farads() {
    let o = rfnode(&["size-buffer", "--energy-mj", "2.88", "--vchrdy", "4.5", "--vovdis", "1.9"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(field(&out, 0, "capacitance_f"), "0.000346154");
    assert_eq!(field(&out, 0, "capacitance_uf"), "346.154");
}

#[test]
fn size_buffer_inverted_thresholds_is_usage_error() {
    let o = rfnode(&["size-buffer", "--energy-mj", "2.88", "--vchrdy", "1.9", "--vovdis", "4.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn link_budget_one_metre_fcc() {
    let o = rfnode(&["link-budget", "--distance", "1", "--sensitivity", "-15", "--region", "fcc"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(field(&out, 0, "required_tx_dbm"), "25");
    assert_eq!(field(&out, 0, "margin_db"), "11");
    assert_eq!(field(&out, 0, "compliant"), "true");
}

#[test]
fn link_budget_over_limit_is_infeasible() {
    let o = rfnode(&["link-budget", "--distance", "10", "--region", "fcc"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(field(&stdout(&o), 0, "compliant"), "false");
    let o = rfnode(&["link-budget", "--distance", "1", "--region", "mars"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn charge_curve_cold_start_point() {
    let o = rfnode(&["charge-curve", "--cap-uf", "470", "--mode", "cold", "--powers", "-10"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out, "p_in_dbm,mode,minutes\n-10,cold,6.51599\n");
    assert!(!out.contains('\r'));
}

#[test]
fn charge_curve_list_and_below_sensitivity() {
    let o = rfnode(&["charge-curve", "--cap-uf", "1000", "--mode", "successive", "--powers", "-15,-10,0"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 4);
    assert_eq!(field(&out, 1, "minutes"), "7.41879");
    let o = rfnode(&["charge-curve", "--cap-uf", "470", "--mode", "cold", "--powers", "-20"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn calibrate_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.csv");
    fs::write(
        &path,
        "c_uf,v_start_v,v_target_v,p_in_dbm,t_s,kind\n\
         490,1.9,4.5,-10,216.565,successive\n\
         490,1.9,4.5,0,13.1786,successive\n",
    )
    .unwrap();
    let o = rfnode(&["calibrate", "--observations", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 3);
    assert_eq!(field(&out, 0, "eta_cold"), field(&out, 0, "eta_main"));

    fs::write(&path, "c_uf,v_start_v\n490,1.9\n").unwrap();
    let o = rfnode(&["calibrate", "--observations", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn calibrate_builtin_table() {
    let o = rfnode(&["calibrate", "--observations", "builtin-470uf"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 8);
    assert_eq!(field(&out, 6, "p_in_dbm"), "0");
}

const SCENARIO: &str = "\
[node]
id = leaf
distance_m = 1
[transmitter]
eirp_dbm = 30
[sim]
duration_s = 900
seed = 3
";

#[test]
fn simulate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("s.ini");
    fs::write(&scen, SCENARIO).unwrap();
    let events = dir.path().join("events.csv");
    let report = dir.path().join("report.json");
    let args = [
        "simulate",
        "--scenario",
        scen.to_str().unwrap(),
        "--out-events",
        events.to_str().unwrap(),
        "--out-report",
        report.to_str().unwrap(),
    ];
    let o = rfnode(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log = fs::read_to_string(&events).unwrap();
    assert!(log.starts_with("time_s,node_id,kind,voltage_v,detail\n"));
    assert!(log.contains(",leaf,charge_ready,"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["nodes"][0]["id"], "leaf");
    assert!(json["nodes"][0]["measurements"].as_u64().unwrap() >= 2);

    let first = log.clone();
    assert!(rfnode(&args).status.success());
    assert_eq!(fs::read_to_string(&events).unwrap(), first);
}

#[test]
fn simulate_sweep_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("s.ini");
    fs::write(&scen, SCENARIO).unwrap();
    let o = rfnode(&["simulate", "--scenario", scen.to_str().unwrap(), "--sweep-eirp", "26,30"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 3);

    fs::write(&scen, SCENARIO.replace("eirp_dbm = 30", "eirp_dbm = 40")).unwrap();
    let o = rfnode(&["simulate", "--scenario", scen.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));

    fs::write(&scen, "[node]\ndistance_m =\n").unwrap();
    let o = rfnode(&["simulate", "--scenario", scen.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("distance_m") && err.contains("line 2"), "{err}");
}

#[test]
fn angle_noise_report() {
    let o = rfnode(&["angle-noise", "--trials", "20000", "--seed", "5"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let pitch: f64 = field(&out, 0, "std_deg").parse().unwrap();
    assert!((0.098..=0.121).contains(&pitch));
    assert_eq!(stdout(&rfnode(&["angle-noise", "--trials", "20000", "--seed", "5"])), out);
    let o = rfnode(&["angle-noise", "--trials", "10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn weight_report_builtin_and_file() {
    let o = rfnode(&["weight-report"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "variant,total_g,delta_pct,delta_display_pct,under_5g\n\
         battery-powered,5.58,0,0,false\n\
         case-i,2.97,-46.8,47,true\n\
         case-ii,3.44,-38.4,38,true\n"
    );

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.csv");
    fs::write(&path, "variant,label,weight_g,category\nbase,pcb,2,pcb\nlight,pcb,1,pcb\n").unwrap();
    let o = rfnode(&["weight-report", "--variants", path.to_str().unwrap(), "--baseline", "base"]);
    assert!(o.status.success());
    assert_eq!(field(&stdout(&o), 1, "delta_pct"), "-50");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(rfnode(&[]).status.code(), Some(2));
    assert_eq!(rfnode(&["size-buffer"]).status.code(), Some(2));
}

#[test]
fn shipped_scenarios_run() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "ini") {
            let o = rfnode(&["simulate", "--scenario", path.to_str().unwrap()]);
            assert!(o.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
            seen += 1;
        }
    }
    assert!(seen >= 2);
}
