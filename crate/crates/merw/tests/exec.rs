use merw::{config, exec, output};
use merw_core::analytics::{LilTarget, MartingaleKind};
use merw_core::harness::{self, EnsembleConfig, PathStatistic};
use merw_core::{validate_params, SizeLaw, StepSizeModel};

fn config() -> EnsembleConfig {
    let sizes = StepSizeModel::from_later(SizeLaw::ZeroInflated {
        zero_prob: 0.25,
        value: 2.0,
    })
    .unwrap();
    let mut cfg =
        EnsembleConfig::random_steps(validate_params(2, 0.55, 0.0).unwrap(), sizes, 1500, 300, 99);
    cfg.series = vec![
        MartingaleKind::CenteredMoves { b: 0.25 },
        MartingaleKind::Position { mu: 1.5 },
    ];
    cfg.path_statistics = vec![
        PathStatistic::Qsl {
            series: MartingaleKind::Position { mu: 1.5 },
        },
        PathStatistic::LilSup {
            target: LilTarget::CenteredMoves,
        },
    ];
    cfg
}

#[test]
fn parallel_runs_match_the_serial_runner() {
    let serial = harness::run_ensemble(&config()).unwrap();
    for par in [2, 3, 8] {
        let cfg = EnsembleConfig {
            parallelism: par,
            ..config()
        };
        let parallel = exec::run_ensemble(&cfg).unwrap();
        assert_eq!(parallel.records, serial.records);
        assert_eq!(
            serde_json::to_string(&parallel.summary).unwrap(),
            serde_json::to_string(&serial.summary).unwrap()
        );
    }
}

#[test]
fn written_files_are_identical_across_parallelism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let da = output::write_run(
        a.path(),
        &exec::run_ensemble(&EnsembleConfig {
            parallelism: 1,
            ..config()
        })
        .unwrap(),
    )
    .unwrap();
    let db = output::write_run(
        b.path(),
        &exec::run_ensemble(&EnsembleConfig {
            parallelism: 6,
            ..config()
        })
        .unwrap(),
    )
    .unwrap();
    assert_eq!(da, db);
}

#[test]
fn summary_csv_round_trips_floats() {
    let dir = tempfile::tempdir().unwrap();
    let ens = exec::run_ensemble(&config()).unwrap();
    output::write_run(dir.path(), &ens).unwrap();
    let text = std::fs::read_to_string(dir.path().join(output::SUMMARY_CSV)).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[..3], ["checkpoint", "moves_mean", "moves_var"]);
    assert_eq!(header.len(), 3 + 3 * 2 * 2);
    let last: Vec<&str> = text.lines().last().unwrap().split(',').collect();
    let s = &ens.summary.last().position_real;
    let col = header.iter().position(|h| *h == "S_2_mean").unwrap();
    assert_eq!(
        last[col].parse::<f64>().unwrap().to_bits(),
        s.mean[1].to_bits()
    );
}

#[test]
fn summary_json_round_trips() {
    let ens = exec::run_ensemble(&config()).unwrap();
    let text = serde_json::to_string(&ens.summary).unwrap();
    let back: harness::EnsembleSummary = serde_json::from_str(&text).unwrap();
    assert_eq!(back.checkpoints, ens.summary.checkpoints);
    assert_eq!(back.series, ens.summary.series);
}

#[test]
fn config_document_drives_the_same_ensemble() {
    let doc = serde_json::json!({
        "walk": {"d": 2, "p": 0.55},
        "sizes": {"later": {"family": "zero-inflated", "zero_prob": 0.25, "value": 2.0}},
        "n": 1500, "replicas": 300, "master_seed": 99,
        "series": [{"kind": "centered-moves", "b": 0.25}, {"kind": "position", "mu": 1.5}],
        "path_statistics": [
            {"stat": "qsl", "series": {"kind": "position", "mu": 1.5}},
            {"stat": "lil-sup", "target": {"target": "centered-moves"}}
        ]
    });
    let cfg = config::RunConfig::from_value(doc)
        .unwrap()
        .to_ensemble(4)
        .unwrap();
    assert_eq!(
        EnsembleConfig {
            parallelism: 1,
            ..cfg
        },
        config()
    );
}
