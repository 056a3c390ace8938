use std::process::Command;

use cayley_lp_cli::{
    cmd_ball, cmd_certify_delta, cmd_chain, cmd_cocycle, cmd_path, cmd_report, cmd_select_p, powers, ChainKind,
    PSetting, RunConfig,
};
use serde_json::Value;

fn cfg(group: &str, radius: u32) -> RunConfig {
    RunConfig {
        group: group.into(),
        radius,
        samples: 400,
        ..RunConfig::default()
    }
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn short_chains_are_point_masses() {
    let out = cmd_chain(&cfg("free:2", 6), "e", "a^5", ChainKind::F).unwrap();
    let v = json(&out.text);
    assert_eq!(v["chain"]["entries"], serde_json::json!([["aaaaa", 1, 1]]));
    let out = cmd_chain(
        &RunConfig {
            p: PSetting::Fixed(3.0),
            ..cfg("free:2", 6)
        },
        "b",
        "a^15",
        ChainKind::H,
    )
    .unwrap();
    let v = json(&out.text);
    assert_eq!(v["chain"]["norm"].as_f64().unwrap(), 1.0);
}

#[test]
fn ball_and_certificate() {
    let v = json(&cmd_ball(&cfg("cyclic:2,3", 6), false).unwrap().text);
    assert_eq!(v["sphere_sizes"], serde_json::json!([1, 3, 4, 6, 8, 12, 16]));
    let out = cmd_certify_delta(&cfg("free:2", 4)).unwrap();
    assert!(out.pass);
    assert_eq!(json(&out.text)["pass"], true);
    let path = json(&cmd_path(&cfg("free:2", 4), "ab", "aBa").unwrap().text);
    assert_eq!(path["length"], 3);
}

#[test]
fn exported_ball_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("f2.json");
    std::fs::write(&file, cmd_ball(&cfg("free:2", 5), true).unwrap().text).unwrap();
    let explicit = cfg(&format!("ball:{}", file.display()), 5);
    let v = json(&cmd_ball(&explicit, false).unwrap().text);
    assert_eq!(v["vertices"], 485);
}

#[test]
fn selection_json_shape() {
    let v = json(&cmd_select_p(&cfg("cyclic:2,3", 10)).unwrap().text);
    for key in ["upsilon", "candidates", "chosen_p", "margin"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    let p = v["chosen_p"].as_f64().unwrap();
    let rho = v["rho_used"].as_f64().unwrap();
    assert!(p >= 2.0);
    assert!(rho.powf(p) * v["upsilon"].as_f64().unwrap() < 0.5);
}

#[test]
fn cocycle_json_shape() {
    let out = cmd_cocycle(
        &RunConfig {
            p: PSetting::Fixed(2.0),
            ..cfg("free:2", 6)
        },
        "a^22",
    )
    .unwrap();
    assert!(out.pass);
    let v = json(&out.text);
    for key in ["g", "d_g_e", "p", "lower", "tail_bound", "exact", "properness_count", "paper_bound_ok"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["exact"], true);
    assert_eq!(v["properness_count"], 3);
    assert!(v["lower"].as_f64().unwrap() >= 2.0);
}

#[test]
fn cocycle_in_ball_mode_carries_a_tail() {
    let out = cmd_cocycle(&cfg("cyclic:2,3", 9), "(st)^3").unwrap();
    let v = json(&out.text);
    assert_eq!(v["exact"], false);
    assert!(v["tail_bound"].as_f64().unwrap() > 0.0);
    assert_eq!(v["lower"], 2.0 * v["nonzero"].as_f64().unwrap());
}

#[test]
fn report_rows_meet_the_linear_bound() {
    let c = RunConfig {
        p: PSetting::Fixed(2.0),
        ..cfg("free:2", 6)
    };
    let out = cmd_report(&c, &powers("a", 23)).unwrap();
    assert!(out.pass);
    let mut rdr = csv::Reader::from_reader(out.text.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "g_word",
            "d_g_e",
            "p",
            "lower",
            "tail_bound",
            "properness_count",
            "bound_20delta_ok",
            "bound_100delta_ok"
        ]
    );
    let mut last = 0.0;
    for (k, row) in rdr.records().enumerate() {
        let row = row.unwrap();
        let k = k as f64 + 1.0;
        let lower: f64 = row[3].parse().unwrap();
        assert!(lower >= (2.0 * (k - 21.0)).max(0.0));
        assert!(lower >= last);
        last = lower;
        assert_eq!(&row[6], "true");
    }
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_cayley-lp");
    let ok = Command::new(bin).args(["chain", "e", "a^5"]).output().unwrap();
    assert!(ok.status.success());
    assert_eq!(json(&String::from_utf8(ok.stdout).unwrap())["target"], "aaaaa");

    let bad = Command::new(bin).args(["--p", "1.5", "chain", "e", "a"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let err = json(String::from_utf8(bad.stderr).unwrap().trim());
    assert_eq!(err["error"], "config");

    // Z² with δ = 1 is not thin enough: the certificate fails with a witness
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("z2.json");
    std::fs::write(&grid, z2_ball(6)).unwrap();
    let cert = Command::new(bin)
        .args(["--group", &format!("ball:{}", grid.display()), "--radius", "6", "certify-delta"])
        .output()
        .unwrap();
    assert_eq!(cert.status.code(), Some(1));
    let report = json(&String::from_utf8(cert.stdout).unwrap());
    assert_eq!(report["pass"], false);
    assert!(report["witness"].is_array());

    let out = dir.path().join("ball.json");
    let written = Command::new(bin)
        .args(["--group", "free:1", "--radius", "3", "--out"])
        .arg(&out)
        .arg("ball")
        .output()
        .unwrap();
    assert!(written.status.success());
    assert_eq!(json(&std::fs::read_to_string(&out).unwrap())["vertices"], 7);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, r#"{"group": "cyclic:2,3", "radius": 5, "p": "auto", "seed": 3}"#).unwrap();
    let bin = env!("CARGO_BIN_EXE_cayley-lp");
    let out = Command::new(bin).arg("--config").arg(&path).arg("ball").output().unwrap();
    assert_eq!(json(&String::from_utf8(out.stdout).unwrap())["vertices"], 34);
    let out = Command::new(bin)
        .arg("--config")
        .arg(&path)
        .args(["--radius", "2", "ball"])
        .output()
        .unwrap();
    assert_eq!(json(&String::from_utf8(out.stdout).unwrap())["vertices"], 8);
}

/// Square grid ball with generators x, y; vertex ids are coordinates.
fn z2_ball(r: i64) -> String {
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    for i in -r..=r {
        for j in -r..=r {
            if i.abs() + j.abs() > r {
                continue;
            }
            vertices.push(format!("{i},{j}"));
            for (label, (di, dj)) in [("x", (1, 0)), ("X", (-1, 0)), ("y", (0, 1)), ("Y", (0, -1))] {
                let (a, b) = (i + di, j + dj);
                if a.abs() + b.abs() <= r {
                    edges.push(serde_json::json!([format!("{i},{j}"), label_index(label), format!("{a},{b}")]));
                }
            }
        }
    }
    serde_json::json!({
        "generators": [
            {"label": "x", "inverse": "X"},
            {"label": "X", "inverse": "x"},
            {"label": "y", "inverse": "Y"},
            {"label": "Y", "inverse": "y"}
        ],
        "basepoint": "0,0",
        "radius": r,
        "vertices": vertices,
        "edges": edges,
    })
    .to_string()
}

fn label_index(label: &str) -> usize {
    ["x", "X", "y", "Y"].iter().position(|l| *l == label).unwrap()
}
