use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn gproc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gproc"))
        .args(args)
        .current_dir(root())
        .env_remove("GPROC_CONFIG")
        .output()
        .expect("spawn gproc")
}

fn ok(args: &[&str]) -> Output {
    let out = gproc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(args: &[&str]) -> i32 {
    gproc(args).status.code().expect("exit code")
}

#[test]
fn sample8_sssp_matches_golden() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    ok(&["run", "--kernel", "sssp", "--graph", "data/sample8.txt", "--dims", "2x2", "--k", "4", "--out", dir.to_str().unwrap()]);
    let got = fs::read_to_string(dir.join("results.csv")).unwrap();
    let want = fs::read_to_string(root().join("crates/cli/tests/golden/sample8_sssp.csv")).unwrap();
    assert_eq!(got, want);
    let metrics = fs::read_to_string(dir.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 2);
    assert!(metrics.lines().nth(1).unwrap().starts_with("sssp,data/sample8.txt,cluster,4,2x2,sim,"));
}

#[test]
fn same_config_twice_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        ok(&["run", "--kernel", "pr", "--gen", "40,0.15,9", "--k", "5", "--iterations", "15", "--out", dir.to_str().unwrap()]);
        files.push((fs::read(dir.join("results.csv")).unwrap(), fs::read(dir.join("metrics.csv")).unwrap()));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn exit_codes() {
    // Capacity: more clusters than cells.
    assert_eq!(code(&["run", "--kernel", "sssp", "--graph", "data/sample8.txt", "--dims", "2x2", "--k", "5"]), 4);
    // Parse: missing file, malformed dims.
    assert_eq!(code(&["run", "--kernel", "bfs", "--graph", "no/such/file.txt"]), 2);
    assert_eq!(code(&["run", "--kernel", "bfs", "--graph", "data/sample8.txt", "--dims", "2by2"]), 2);
    // Compile: k = 0, source not in the graph.
    assert_eq!(code(&["run", "--kernel", "bfs", "--graph", "data/sample8.txt", "--k", "0", "--dims", "1x1"]), 3);
    assert_eq!(code(&["run", "--kernel", "bfs", "--graph", "data/sample8.txt", "--source", "99"]), 3);
    // Timeout.
    assert_eq!(code(&["run", "--kernel", "cc", "--graph", "data/sample8.txt", "--k", "2", "--budget", "50"]), 5);
}

#[test]
fn node_mode_ignores_k() {
    let out = ok(&["run", "--kernel", "bfs", "--graph", "data/sample8.txt", "--mode", "node", "--k", "3"]);
    let cluster = ok(&["run", "--kernel", "bfs", "--graph", "data/sample8.txt", "--k", "3"]);
    assert_eq!(out.stdout, cluster.stdout);
    assert!(String::from_utf8_lossy(&out.stderr).contains("node k=8 3x3"));
}

#[test]
fn machine_config_from_env() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("machine.json");
    fs::write(&cfg, r#"{ "event_budget": 40 }"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gproc"))
        .args(["run", "--kernel", "cc", "--graph", "data/sample8.txt", "--k", "2"])
        .current_dir(root())
        .env("GPROC_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5));
    fs::write(&cfg, r#"{ "no_such_key": 1 }"#).unwrap();
    let out = gproc(&["run", "--kernel", "cc", "--graph", "data/sample8.txt", "--machine-config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_then_stats() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.txt");
    let b = tmp.path().join("b.txt");
    ok(&["gen", "--n", "12", "--p", "1", "--seed", "4", "--out", a.to_str().unwrap()]);
    ok(&["gen", "--n", "12", "--p", "1", "--seed", "4", "--out", b.to_str().unwrap()]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let stats = String::from_utf8(ok(&["stats", a.to_str().unwrap()]).stdout).unwrap();
    assert!(stats.contains("vertices 12\n"), "{stats}");
    assert!(stats.contains("edges 66\n"), "{stats}");
    assert!(stats.contains("avg_degree 5.5000"), "{stats}");
}

#[test]
fn stats_rejects_file_without_vertices() {
    let tmp = tempfile::tempdir().unwrap();
    let f = tmp.path().join("one.txt");
    fs::write(&f, "# empty\n").unwrap();
    assert_ne!(gproc(&["stats", f.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn bench_rows_and_speedup() {
    let tmp = tempfile::tempdir().unwrap();
    let m = tmp.path().join("m.json");
    fs::write(
        &m,
        r#"{ "kernels": ["sssp", "bfs", "dfs", "pr", "minitri", "cc"],
             "graphs": [ { "gen": { "n": 20, "p": 0.2, "seed": 1 } }, { "gen": { "n": 24, "p": 0.2, "seed": 2 } },
                         { "gen": { "n": 16, "p": 0.3, "seed": 3 } } ],
             "mappings": [ { "mode": "cluster", "k": 4, "dims": [2, 2] } ],
             "params": { "iterations": 10 } }"#,
    )
    .unwrap();
    let out = String::from_utf8(ok(&["bench", "--matrix", m.to_str().unwrap()]).stdout).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 1 + 36);
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    for pair in lines[1..].chunks(2) {
        // The graph column is quoted and contains commas; split on the quotes.
        let fields = |l: &str| -> Vec<String> {
            let (pre, rest) = l.split_once('"').unwrap();
            let (g, post) = rest.split_once('"').unwrap();
            let mut v: Vec<String> = pre.trim_end_matches(',').split(',').map(String::from).collect();
            v.push(g.to_string());
            v.extend(post.trim_start_matches(',').split(',').map(String::from));
            v
        };
        let (sim, reference) = (fields(pair[0]), fields(pair[1]));
        assert_eq!(sim[col("model")], "sim");
        assert_eq!(reference[col("model")], "ref");
        assert_eq!(sim[col("error")], "");
        let s: f64 = sim[col("makespan")].parse().unwrap();
        let r: f64 = reference[col("makespan")].parse().unwrap();
        let speedup: f64 = sim[col("speedup")].parse().unwrap();
        assert!((speedup - r / s).abs() < 1e-4, "{speedup} vs {r}/{s}");
    }
}

#[test]
fn one_cell_bench_equals_run() {
    let tmp = tempfile::tempdir().unwrap();
    let m = tmp.path().join("m.json");
    fs::write(
        &m,
        r#"{ "kernels": ["sssp"], "graphs": [ { "path": "../sample8.txt" } ],
             "mappings": [ { "mode": "cluster", "k": 4, "dims": [2, 2] } ] }"#,
    )
    .unwrap();
    // Relative paths resolve against the matrix file.
    let nested = tmp.path().join("x");
    fs::create_dir(&nested).unwrap();
    fs::copy(root().join("data/sample8.txt"), tmp.path().join("sample8.txt")).unwrap();
    let m2 = nested.join("m.json");
    fs::rename(&m, &m2).unwrap();
    let table = String::from_utf8(ok(&["bench", "--matrix", m2.to_str().unwrap()]).stdout).unwrap();
    let dir = tmp.path().join("run");
    ok(&["run", "--kernel", "sssp", "--graph", "data/sample8.txt", "--dims", "2x2", "--k", "4", "--out", dir.to_str().unwrap()]);
    let run_row = fs::read_to_string(dir.join("metrics.csv")).unwrap().lines().nth(1).unwrap().to_string();
    let sim_row = table.lines().nth(1).unwrap();
    let strip = |r: &str| r.splitn(3, ',').nth(2).unwrap().to_string();
    assert!(strip(sim_row).starts_with(&strip(&run_row)), "{sim_row}\n{run_row}");
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn failing_cells_are_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let m = tmp.path().join("m.json");
    fs::write(
        &m,
        r#"{ "kernels": ["bfs"], "graphs": [ { "path": "missing.txt" }, { "gen": { "n": 10, "p": 0.3 } } ],
             "mappings": [ { "mode": "cluster", "k": 9, "dims": [2, 2] } ] }"#,
    )
    .unwrap();
    let table = String::from_utf8(ok(&["bench", "--matrix", m.to_str().unwrap()]).stdout).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].contains("missing.txt"), "{}", rows[0]);
    assert!(rows[2].ends_with(",compiler: 9 clusters do not fit a 2x2 array"), "{}", rows[2]);
    assert!(rows[3].contains(",ref,"), "reference row still computed: {}", rows[3]);
}

#[test]
fn compile_writes_an_image() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("img");
    ok(&["compile", "--kernel", "bfs", "--graph", "data/sample8.txt", "--k", "4", "--out", dir.to_str().unwrap()]);
    for f in ["manifest.json", "routing.json", "dispatch.csv", "nale_0_0.bin"] {
        assert!(dir.join(f).exists(), "{f}");
    }
}
