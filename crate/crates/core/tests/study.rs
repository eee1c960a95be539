use szdet::config::parse_config;
use szdet::study::{gronwall_demo, gronwall_from_csv, mesh_study, read_series_csv, sz_convergence, thresholds_table, TestField};

#[test]
fn mesh_study_halves_h_per_level() {
    let (t, mesh) = mesh_study(2, 3, 2).unwrap();
    assert_eq!(t.rows.len(), 3);
    let h: Vec<f64> = t.rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!((h[0] / h[1] - 2.0).abs() < 1e-12 && (h[1] / h[2] - 2.0).abs() < 1e-12);
    assert_eq!(mesh.n_vertices(), 13 * 13);
}

#[test]
fn linear_convergence_table_is_exact() {
    let (t, _) = sz_convergence(2, TestField::Linear, 3).unwrap();
    for r in &t.rows {
        assert!(r[3].parse::<f64>().unwrap() < 1e-12);
    }
}

#[test]
fn recorded_history_with_comments_is_read() {
    let mut text = String::from("# header\nt,alpha,beta,y\n");
    for i in 0..=2000 {
        let t = i as f64 * 0.05;
        text.push_str(&format!("{t:?},1.0,{},{}\n", (-t).exp(), (-t).exp() * (1.0 + t)));
    }
    let demo = gronwall_from_csv(text.as_bytes(), 10.0).unwrap();
    assert!(demo.report.hypotheses_met.all());
    assert!(demo.envelope.passed);
    assert!(demo.observed.unwrap().passed);
}

#[test]
fn missing_columns_are_reported() {
    let text = "t,alpha\n0,1\n1,1\n";
    assert!(gronwall_from_csv(text.as_bytes(), 1.0).is_err());
    let cols = read_series_csv(text.as_bytes(), &["alpha", "beta"]).unwrap();
    assert!(cols[0].is_some() && cols[1].is_none());
}

#[test]
fn synthetic_cases_agree_with_the_lemma() {
    for case in ["exp", "oscillatory", "random"] {
        let demo = gronwall_demo(case, 9, None).unwrap();
        assert!(demo.report.hypotheses_met.all(), "{case}");
        assert!(demo.envelope.passed, "{case}");
        assert!(demo.consistent());
    }
    assert!(gronwall_demo("nope", 0, None).is_err());
}

#[test]
fn threshold_rows_scale_with_grashof_squared() {
    let n_at = |f: f64| {
        let cfg = parse_config("thresholds", &format!("F = {f}\n")).unwrap();
        let t = thresholds_table(&cfg).unwrap();
        t.rows[0][5].parse::<f64>().unwrap()
    };
    assert_eq!(n_at(1.0), 8.0);
    assert!((n_at(3.0) / n_at(1.0) - 9.0).abs() < 1e-12);
}
