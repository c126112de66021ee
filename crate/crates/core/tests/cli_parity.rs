use std::process::{Command, Output};

use fso_pointing::metrics::{nmse_table, optimize_r0_on, GridPolicy, LinearizedR0, OracleCurve, TablePolicy};
use fso_pointing::models::{build_model, LinearizedSpec, ModelKind, ModelOptions};
use fso_pointing::oracle::{hp_exact_radial, QuadratureSpec};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fso-pointing"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = cli(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Data rows (header excluded) split into cells.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn header(text: &str) -> String {
    text.lines().find(|l| !l.starts_with('#')).unwrap().to_string()
}

fn num(cell: &str) -> f64 {
    cell.parse().unwrap_or_else(|_| panic!("not a number: {cell}"))
}

#[test]
fn eval_grid_matches_library_row_by_row() {
    let text = stdout(&["eval", "--model", "modified-iu", "--wz-over-ra", "2", "--grid-points", "64", "--precision", "full"]);
    assert_eq!(header(&text), "r_over_ra,hp_model,hp_oracle,abs_err");
    let spec = QuadratureSpec::default();
    let grid = GridPolicy {
        max_mult: None,
        points: 64,
    }
    .grid_for(2.0, 1.0)
    .unwrap();
    let model = build_model(ModelKind::ModifiedIntensityUniform, 2.0, 1.0, &ModelOptions::default()).unwrap();
    let data = rows(&text);
    assert_eq!(data.len(), 64);
    for (row, r) in data.iter().zip(grid.points()) {
        let exact = hp_exact_radial(r, 2.0, 1.0, &spec).unwrap();
        let m = model.eval(r);
        assert_eq!(num(&row[0]).to_bits(), r.to_bits());
        assert_eq!(num(&row[1]).to_bits(), m.to_bits());
        assert_eq!(num(&row[2]).to_bits(), exact.to_bits());
        assert_eq!(num(&row[3]).to_bits(), (m - exact).abs().to_bits());
    }
}

#[test]
fn eval_linearized_with_fixed_r0_matches_library() {
    let text = stdout(&[
        "eval", "--model", "linearized", "--wz-over-ra", "4", "--r0-over-ra", "12", "--n", "6", "--r-over-ra", "3.5",
        "--no-oracle", "--precision", "full",
    ]);
    let opts = ModelOptions {
        linearized: Some(LinearizedSpec::new(6, 12.0).unwrap()),
        ..ModelOptions::default()
    };
    let model = build_model(ModelKind::Linearized, 4.0, 1.0, &opts).unwrap();
    let data = rows(&text);
    assert_eq!(data.len(), 1);
    assert_eq!(num(&data[0][1]).to_bits(), model.eval(3.5).to_bits());
}

#[test]
fn table1_cells_match_library() {
    let text = stdout(&["table1", "--grid-points", "200", "--precision", "full"]);
    assert_eq!(header(&text), "model,wz_over_ra=2,wz_over_ra=4,wz_over_ra=6");
    let policy = TablePolicy {
        grid: GridPolicy {
            max_mult: None,
            points: 200,
        },
        ..TablePolicy::default()
    };
    let cases: Vec<_> = ModelKind::WIDE_BEAM
        .iter()
        .flat_map(|&m| [2.0, 4.0, 6.0].map(|r| (m, r)))
        .collect();
    let cells = nmse_table(&cases, &policy);
    let data = rows(&text);
    assert_eq!(data.len(), 5);
    for (row, m) in data.iter().zip(ModelKind::WIDE_BEAM) {
        assert_eq!(row[0], m.name());
        for (j, r) in [2.0, 4.0, 6.0].iter().enumerate() {
            let cell = cells.iter().find(|c| c.model == m && c.wz_over_ra == *r).unwrap();
            let want = cell.result.as_ref().unwrap().nmse;
            assert_eq!(num(&row[j + 1]).to_bits(), want.to_bits(), "{m} at {r}");
        }
    }
}

#[test]
fn table1_ranking_is_grid_stable() {
    for points in ["500", "1000"] {
        let text = stdout(&["table1", "--grid-points", points]);
        let data = rows(&text);
        let col = |j: usize| -> Vec<(String, f64)> { data.iter().map(|r| (r[0].clone(), num(&r[j]))).collect() };
        for j in 1..=3 {
            let mut c = col(j);
            c.sort_by(|a, b| a.1.total_cmp(&b.1));
            let names: Vec<&str> = c.iter().map(|x| x.0.as_str()).collect();
            assert_eq!(
                names,
                [
                    "linearized",
                    "modified-intensity-uniform",
                    "farid",
                    "first-reduced-vasylyev",
                    "intensity-uniform"
                ],
                "grid {points} column {j}"
            );
        }
    }
}

#[test]
fn table1_with_published_relation_uses_it() {
    let text = stdout(&["table1", "--optimize-linearized", "false", "--ratios", "4", "--precision", "full"]);
    let r0_line = text.lines().find(|l| l.starts_with("# linearized_r0_over_ra")).unwrap();
    let r0 = num(r0_line.split(',').nth(1).unwrap());
    let fit = LinearizedR0::published_fit(4).unwrap();
    assert_eq!(r0.to_bits(), fit.eval(4.0).to_bits());
    let err = cli(&["table1", "--optimize-linearized", "false", "--n", "8"]);
    assert_eq!(err.status.code(), Some(2));
}

#[test]
fn table2_and_k_study_match_library() {
    let text = stdout(&["table2", "--precision", "full", "--grid-points", "300"]);
    assert_eq!(header(&text), "wz_over_ra,point-approx,second-reduced-vasylyev");
    let policy = TablePolicy {
        grid: GridPolicy {
            max_mult: None,
            points: 300,
        },
        ..TablePolicy::default()
    };
    let data = rows(&text);
    assert_eq!(data.len(), 4);
    for row in &data {
        let r = num(&row[0]);
        for (j, m) in ModelKind::NARROW_BEAM.iter().enumerate() {
            let want = nmse_table(&[(*m, r)], &policy)[0].result.as_ref().unwrap().nmse;
            assert_eq!(num(&row[j + 1]).to_bits(), want.to_bits());
        }
    }

    let text = stdout(&["k-study", "--k-list", "1,2,3", "--precision", "full"]);
    let data = rows(&text);
    let nmse: Vec<f64> = data.iter().map(|r| num(&r[1])).collect();
    for (k, v) in (1..=3).zip(&nmse) {
        let policy = TablePolicy {
            k,
            ..TablePolicy::default()
        };
        let want = nmse_table(&[(ModelKind::PointApprox, 0.1)], &policy)[0].result.as_ref().unwrap().nmse;
        assert_eq!(v.to_bits(), want.to_bits());
    }
    assert!(nmse[0] < nmse[1] && nmse[1] < nmse[2]);
}

#[test]
fn optimize_r0_matches_library() {
    let text = stdout(&["optimize-r0", "--wz-over-ra", "2,6", "--precision", "full"]);
    let spec = QuadratureSpec::default();
    for row in rows(&text) {
        let x = num(&row[0]);
        let grid = GridPolicy::default().grid_for(x, 1.0).unwrap();
        let opt = optimize_r0_on(&OracleCurve::new(x, 1.0, grid, &spec).unwrap(), 4).unwrap();
        assert_eq!(num(&row[1]).to_bits(), opt.r0_star.to_bits());
        assert_eq!(num(&row[2]).to_bits(), opt.nmse.to_bits());
        assert_eq!(row[3], "ok");
    }
}

#[test]
fn fit_r0_reports_fit_and_ratio_gap() {
    let text = stdout(&["fit-r0", "--n", "4,6", "--ratio-steps", "5"]);
    assert!(text.lines().any(|l| l.starts_with("# fit n=4:")));
    assert!(text.lines().any(|l| l.starts_with("# fit n=6:")));
    let gap_line = text.lines().find(|l| l.contains("max relative gap")).unwrap();
    let gap = num(gap_line.rsplit(' ').next().unwrap());
    assert!(gap < 0.05, "{gap}");
    assert_eq!(rows(&text).len(), 10);
}

#[test]
fn physical_units_match_normalized() {
    let norm = stdout(&["table2", "--ratios", "0.1", "--precision", "full"]);
    let phys = stdout(&["table2", "--ratios", "0.1", "--ra", "0.05", "--precision", "full"]);
    for (a, b) in rows(&norm)[0].iter().zip(&rows(&phys)[0]).skip(1) {
        let (a, b) = (num(a), num(b));
        assert!(((a - b) / a).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn pdf_reports_small_ks_at_a_million_samples() {
    let text = stdout(&[
        "pdf", "--family", "exp-family", "--wz-over-ra", "2", "--sigma-s", "1", "--mc-samples", "1000000", "--seed", "5",
    ]);
    let ks_line = text.lines().find(|l| l.starts_with("# ks_distance:")).unwrap();
    let ks = num(ks_line.rsplit(' ').next().unwrap());
    assert!(ks < 0.005, "{ks}");
    assert_eq!(header(&text), "hp,analytic_density,empirical_density");
}

#[test]
fn mc_histogram_counts_every_sample() {
    let text = stdout(&["mc", "--family", "second-reduced", "--params", "7.5", "--sigma-s", "0.5", "--mc-samples", "50000", "--bins", "20"]);
    assert_eq!(header(&text), "bin_lo,bin_hi,count,empirical_density");
    let total: u64 = rows(&text).iter().map(|r| r[2].parse::<u64>().unwrap()).sum();
    assert_eq!(total, 50_000);
}

#[test]
fn output_flag_writes_same_bytes_as_stdout() {
    let dir = std::env::temp_dir().join(format!("fso-pointing-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("k.csv");
    let out = cli(&["k-study", "--k-list", "1,2", "--output", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let file = std::fs::read_to_string(&path).unwrap();
    let direct = stdout(&["k-study", "--k-list", "1,2"]);
    // Only the echoed argument line differs.
    let strip = |t: &str| -> Vec<String> { t.lines().filter(|l| !l.starts_with("# args:")).map(str::to_string).collect() };
    assert_eq!(strip(&file), strip(&direct));
    assert!(file.ends_with('\n'));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn exit_codes() {
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
    assert_eq!(cli(&["eval", "--model", "nope", "--wz-over-ra", "2"]).status.code(), Some(2));
    assert_eq!(cli(&["eval", "--model", "iu", "--wz-over-ra", "-1"]).status.code(), Some(2));
    assert_eq!(cli(&["pdf", "--family", "gaussian", "--sigma-s", "1"]).status.code(), Some(2));
    assert_eq!(cli(&["table2", "--ratios", "1.2"]).status.code(), Some(2));
    let calib = cli(&["eval", "--model", "linearized", "--wz-over-ra", "2", "--r0-over-ra", "1e-6", "--r-over-ra", "1"]);
    assert_eq!(calib.status.code(), Some(3));
    let opt = cli(&["optimize-r0", "--wz-over-ra", "0.01"]);
    assert_eq!(opt.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&opt.stdout).contains("0.01,NaN,NaN,error"));
}
