use std::collections::BTreeMap;

use loctime::config::parse_config;
use loctime::functionals::{alpha_from_field, g_modulus};
use loctime::harness::run_sweep_with_threads;
use loctime::local_time::occupation_field;
use loctime::output::{replicas_csv, sweep_csv, write_results, RunManifest};
use loctime::stats::{correlation, ks_distance, mean, variance};
use loctime::{PathGrid32, PathGrid64};

const CONFIG: &str = r#"
t = 1.0
n_steps = 2048
h_grid = [0.4, 0.2, 0.1]
n_replicas = 24
master_seed = 99
alpha_mode = "all"
centering = "empirical"
u_hat_nodes = 64
"#;

fn parse_row(line: &str) -> Vec<Option<f64>> {
    line.split(',')
        .map(|c| if c.is_empty() { None } else { Some(c.parse().unwrap()) })
        .collect()
}

#[test]
fn sweep_csv_is_recomputable_from_replicas_csv() {
    let config = parse_config(CONFIG).unwrap();
    let result = run_sweep_with_threads(&config, Some(2)).unwrap();
    let replicas = replicas_csv(&result);
    let sweep = sweep_csv(&result);

    let mut lines = replicas.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|&c| c == name).unwrap();
    let mut by_h: BTreeMap<String, Vec<Vec<Option<f64>>>> = BTreeMap::new();
    for line in lines {
        let key = line.split(',').next().unwrap().to_string();
        by_h.entry(key).or_default().push(parse_row(line));
    }

    let mut sweep_lines = sweep.lines();
    let sweep_header: Vec<&str> = sweep_lines.next().unwrap().split(',').collect();
    for line in sweep_lines {
        let row = parse_row(line);
        let get = |name: &str| row[sweep_header.iter().position(|&c| c == name).unwrap()];
        let h_key = line.split(',').next().unwrap();
        let rows = &by_h[h_key];
        let column = |name: &str| -> Vec<f64> { rows.iter().filter_map(|r| r[col(name)]).collect() };
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);

        let g = column("g_modulus");
        assert!(close(get("mean_g").unwrap(), mean(&g)));
        let se = (variance(&g, mean(&g)) / g.len() as f64).sqrt();
        assert!(close(get("stderr_g").unwrap(), se));
        let z = column("z_statistic");
        assert!(close(get("var_z").unwrap(), variance(&z, mean(&z))));
        assert!(close(get("ks_distance").unwrap(), ks_distance(&z).unwrap()));
        assert!(close(get("mean_bracket").unwrap(), mean(&column("bracket"))));
        let cov_sq: Vec<f64> = column("covariation").iter().map(|c| c * c).collect();
        assert!(close(get("mean_cov_sq").unwrap(), mean(&cov_sq)));
        assert!(close(get("mean_uhat_l2").unwrap(), mean(&column("u_hat_l2"))));
        for alpha in ["alpha_field", "alpha_diag", "alpha_tri"] {
            assert!(close(get(&format!("mean_{alpha}")).unwrap(), mean(&column(alpha))));
        }
        let recon = column("reconstruction");
        assert!(close(
            get("recon_correlation").unwrap(),
            correlation(&recon, &g).unwrap()
        ));
    }
}

#[test]
fn result_files_are_byte_deterministic() {
    let config = parse_config(CONFIG).unwrap();
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, threads) in dirs.iter().zip([1, 3]) {
        let start = chrono::Utc::now();
        let result = run_sweep_with_threads(&config, Some(threads)).unwrap();
        let manifest = RunManifest::new(&result, start, chrono::Utc::now());
        write_results(&result, &manifest, dir.path()).unwrap();
    }
    for name in ["sweep.csv", "replicas.csv"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn f32_and_f64_pipelines_agree() {
    let p64: PathGrid64 = loctime::path_engine::brownian_path(5, 1.0, 8192).unwrap();
    let p32: PathGrid32 = loctime::path_engine::brownian_path(5, 1.0, 8192).unwrap();
    let f64_field = occupation_field(&p64, 0.01, 0.3).unwrap();
    let f32_field = occupation_field(&p32, 0.01f32, 0.3).unwrap();
    let g64 = g_modulus(&f64_field, 0.2).unwrap();
    let g32 = g_modulus(&f32_field, 0.2f32).unwrap() as f64;
    assert!((g64 - g32).abs() <= 1e-2 * g64, "{g64} vs {g32}");
    let a64 = alpha_from_field(&f64_field);
    let a32 = alpha_from_field(&f32_field) as f64;
    assert!((a64 - a32).abs() <= 1e-2 * a64);
}
