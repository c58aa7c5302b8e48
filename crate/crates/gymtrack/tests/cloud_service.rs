//! The mock backend over a real TCP socket: routing, validation, the
//! per-machine serialization guarantee under concurrent writers, and
//! persistence across a restart.

use gymtrack::cloud::client;
use gymtrack::cloud::server::CloudServer;
use gymtrack::cloud::{DashboardView, EquipmentRecord};
use gymtrack::demo_registry;

fn patch_body(machine: &str, reps: u16, t: f64) -> Vec<u8> {
    serde_json::to_vec(&serde_json::json!({
        "machine": machine, "reps": reps, "vector": [reps], "t": t
    }))
    .unwrap()
}

#[test]
fn routes_validate_and_respond_over_the_wire() {
    let server = CloudServer::start("127.0.0.1:0", &demo_registry(), None).unwrap();
    let base = server.base_url();

    let ok = client::call(
        "PATCH",
        &format!("{base}/equipment/leg_curl.json"),
        Some(&patch_body("leg_curl", 9, 1.0)),
    )
    .unwrap();
    assert_eq!(ok.status, 200);
    let echoed: EquipmentRecord = serde_json::from_slice(&ok.body).unwrap();
    assert_eq!(echoed.current_reps, 9);

    let malformed = client::call(
        "PATCH",
        &format!("{base}/equipment/leg_curl.json"),
        Some(br#"{"reps": 9}"#),
    )
    .unwrap();
    assert_eq!(malformed.status, 400);

    let unknown = client::call(
        "PATCH",
        &format!("{base}/equipment/rowing.json"),
        Some(&patch_body("rowing", 3, 1.0)),
    )
    .unwrap();
    assert_eq!(unknown.status, 404);

    let dashboard = client::call("GET", &format!("{base}/dashboard.json"), None).unwrap();
    assert_eq!(dashboard.status, 200);
    let view: DashboardView = serde_json::from_slice(&dashboard.body).unwrap();
    assert_eq!(view.machines.len(), 3);
    let leg_curl = view
        .machines
        .iter()
        .find(|m| m.machine == "leg_curl")
        .unwrap();
    assert_eq!(leg_curl.current_reps, 9);

    let record = client::call("GET", &format!("{base}/equipment/leg_curl.json"), None).unwrap();
    assert_eq!(record.status, 200);

    assert_eq!(
        client::call("GET", &format!("{base}/nope"), None)
            .unwrap()
            .status,
        404
    );
    assert_eq!(
        client::call("DELETE", &format!("{base}/equipment/leg_curl.json"), None)
            .unwrap()
            .status,
        405
    );
    server.stop();
}

#[test]
fn concurrent_patches_serialize_per_machine() {
    let server = CloudServer::start("127.0.0.1:0", &demo_registry(), None).unwrap();
    let base = server.base_url();
    let machines = ["leg_curl", "leg_extension", "lat_pull"];

    let mut handles = Vec::new();
    for (w, machine) in machines.iter().enumerate() {
        for lane in 0..2 {
            let base = base.clone();
            let machine = machine.to_string();
            handles.push(std::thread::spawn(move || {
                for k in 0..20u16 {
                    // distinct timestamps per (machine, lane, k)
                    let t = (w as f64) * 1000.0 + (lane as f64) * 100.0 + k as f64;
                    let reps = lane * 100 + k;
                    let resp = client::call(
                        "PATCH",
                        &format!("{base}/equipment/{machine}.json"),
                        Some(&patch_body(&machine, reps, t)),
                    )
                    .unwrap();
                    assert_eq!(resp.status, 200);
                }
            }));
        }
        // readers race the writers
        let base = base.clone();
        handles.push(std::thread::spawn(move || {
            for _ in 0..10 {
                let resp = client::call("GET", &format!("{base}/dashboard.json"), None).unwrap();
                assert_eq!(resp.status, 200);
            }
        }));
    }
    for handle in handles {
        handle.join().unwrap();
    }

    let store = server.store();
    for machine in machines {
        let record = store.get(machine).unwrap();
        assert_eq!(
            record.history.len(),
            40,
            "all concurrent PATCHes land in the history"
        );
        assert!(record.history.windows(2).all(|w| w[0].t < w[1].t));
        // newest event time per machine is lane 1, k 19 → reps 119
        assert_eq!(record.current_reps, 119);
    }
    server.stop();
}

#[test]
fn state_survives_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("cloud-state.ndjson");
    let registry = demo_registry();

    let first = CloudServer::start("127.0.0.1:0", &registry, Some(&state)).unwrap();
    let base = first.base_url();
    for (reps, t) in [(3u16, 1.0), (7, 2.0), (9, 3.5)] {
        let resp = client::call(
            "PATCH",
            &format!("{base}/equipment/lat_pull.json"),
            Some(&patch_body("lat_pull", reps, t)),
        )
        .unwrap();
        assert_eq!(resp.status, 200);
    }
    let before = first.store();
    first.stop();

    let second = CloudServer::start("127.0.0.1:0", &registry, Some(&state)).unwrap();
    assert_eq!(second.store(), before, "restart replays the full history");
    let base = second.base_url();
    let record = client::call("GET", &format!("{base}/equipment/lat_pull.json"), None).unwrap();
    let parsed: EquipmentRecord = serde_json::from_slice(&record.body).unwrap();
    assert_eq!(parsed.history.len(), 3);
    assert_eq!(parsed.current_reps, 9);

    // the reloaded instance keeps appending to the same file
    let resp = client::call(
        "PATCH",
        &format!("{base}/equipment/lat_pull.json"),
        Some(&patch_body("lat_pull", 11, 4.0)),
    )
    .unwrap();
    assert_eq!(resp.status, 200);
    second.stop();

    let third = CloudServer::start("127.0.0.1:0", &registry, Some(&state)).unwrap();
    assert_eq!(third.store().get("lat_pull").unwrap().history.len(), 4);
    third.stop();
}
