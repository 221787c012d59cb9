use std::sync::OnceLock;

use argus::clock::ZoneClock;
use argus::harness::report::{report_csv, report_json};
use argus::harness::{
    emit_report, run_alpha_beta_grid, run_threshold_comparison, AlphaBetaGrid, Report, ThresholdRow,
};
use argus::model_io::{model_from_bytes, model_to_bytes};
use argus::simulator::attack::{inject_attack, AttackKind, AttackScenario};
use argus::simulator::noise::{inject_noise, NoiseConfig};
use argus::simulator::{generate_home, HomeProfile};
use argus::trace_io::{parse_trace_str, trace_to_string, write_trace_seeded};
use argus_core::detector::{DetectorModel, FitConfig};
use argus_core::metrics::LabelPolicy;
use argus_core::nn::TrainConfig;
use argus_core::preprocess::StateMapCatalog;
use argus_core::threshold::ThresholdConfig;
use argus_core::trace::{split_by_days, Trace};

struct Fixture {
    clock: ZoneClock,
    train: Trace,
    test: Trace,
    model: DetectorModel,
}

fn tiny_fit(seed: u64) -> FitConfig {
    let train = TrainConfig {
        encoder_hidden: vec![8, 4],
        decoder_hidden: vec![4, 8],
        max_epochs: 4,
        batch_size: 32,
        seed,
        ..TrainConfig::desk()
    };
    FitConfig { train, ..FitConfig::default() }
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let profile = HomeProfile { seed: 5, ..HomeProfile::reference() };
        let clock = ZoneClock::parse(&profile.timezone).unwrap();
        let trace = generate_home(&profile, 4).unwrap();
        let (train, benign) = split_by_days(&trace, 2, &clock).unwrap();
        let start = benign.updates[0].timestamp;
        let sc = AttackScenario::new(
            AttackKind::LightFlickering,
            start.add_millis(10 * 3_600_000),
            start.add_millis(13 * 3_600_000),
            profile.roster(),
        );
        let test = inject_attack(&benign, &sc, 2).unwrap();
        let model = DetectorModel::fit(&train, &clock, &tiny_fit(3)).unwrap().0;
        Fixture { clock, train, test, model }
    })
}

#[test]
fn trace_text_round_trips() {
    let f = fixture();
    let noisy = inject_noise(&f.test, &NoiseConfig::new("sensor.humidity", 3.0, 1)).unwrap();
    for t in [&f.train, &f.test, &noisy] {
        let text = trace_to_string(t);
        let back = parse_trace_str(&text).unwrap();
        assert_eq!(&back, t);
        assert_eq!(trace_to_string(&back), text);
    }
}

#[test]
fn seeded_meta_survives_parsing() {
    let f = fixture();
    let mut buf = Vec::new();
    write_trace_seeded(&f.train, Some(77), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.lines().next().unwrap().contains("\"seed\":77"));
    assert_eq!(parse_trace_str(&text).unwrap(), f.train);
}

#[test]
fn catalog_json_round_trips() {
    let cat = &fixture().model.catalog;
    let json = serde_json::to_string(cat).unwrap();
    let back: StateMapCatalog = serde_json::from_str(&json).unwrap();
    assert_eq!(&back, cat);
    assert_eq!(serde_json::to_string(&back).unwrap(), json);
}

#[test]
fn model_bytes_round_trip() {
    let f = fixture();
    let bytes = model_to_bytes(&f.model, None);
    let (back, resume) = model_from_bytes(&bytes).unwrap();
    assert_eq!(back, f.model);
    assert!(resume.is_none());
    assert_eq!(model_to_bytes(&back, None), bytes);
    assert_eq!(back.score_trace(&f.test).unwrap(), f.model.score_trace(&f.test).unwrap());

    let mut state = f.model.threshold_state(f.model.threshold).unwrap();
    state.observe(0, 0.5);
    state.finish_day();
    let bytes = model_to_bytes(&f.model, Some(&state));
    let (_, resume) = model_from_bytes(&bytes).unwrap();
    assert_eq!(resume.as_ref(), Some(&state));
}

#[test]
fn model_is_deterministic_per_seed() {
    let f = fixture();
    let again = DetectorModel::fit(&f.train, &f.clock, &tiny_fit(3)).unwrap().0;
    assert_eq!(model_to_bytes(&again, None), model_to_bytes(&f.model, None));
}

fn scores() -> Vec<f64> {
    let f = fixture();
    argus::harness::benchmark::score_after(&f.model, &f.train.updates, &f.test).unwrap()
}

#[test]
fn threshold_report_round_trips_and_re_emits_identically() {
    let f = fixture();
    let policy = LabelPolicy::MaskAttackWindows { window: 16 };
    let rows = run_threshold_comparison(&f.model, &f.test, &scores(), &f.clock, policy).unwrap();
    assert_eq!(rows.len(), 6);
    let report = Report::new("threshold", 3, ThresholdConfig::default(), rows).unwrap();
    let json = report_json(&report).unwrap();
    let back: Report<Vec<ThresholdRow>> = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);

    let csv = report_csv(&report).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.starts_with("strategy,alpha,beta,tp,fp,tn,fn,fpr,precision,recall,f1\n"));

    let dir = tempfile::tempdir().unwrap();
    let (j1, c1) = emit_report(&report, dir.path()).unwrap();
    let first = (std::fs::read(&j1).unwrap(), std::fs::read(&c1).unwrap());
    let (j2, c2) = emit_report(&back, dir.path()).unwrap();
    assert_eq!((j1.file_name().unwrap(), c1.file_name().unwrap()), (j2.file_name().unwrap(), c2.file_name().unwrap()));
    assert!(j1.ends_with("threshold_seed3.json"));
    assert_eq!(first, (std::fs::read(&j2).unwrap(), std::fs::read(&c2).unwrap()));
}

#[test]
fn undefined_metrics_print_as_na() {
    let f = fixture();
    // strict labels on a benign span: no attacks, so recall and F1 are undefined
    let benign = Trace { labels: Some(vec![false; f.train.len()]), ..f.train.clone() };
    let s = argus::harness::benchmark::score_after(&f.model, &[], &benign).unwrap();
    let grid =
        run_alpha_beta_grid(&f.model, &benign, &s, &f.clock, LabelPolicy::Strict, &[0.2], &[0.2]).unwrap();
    assert_eq!(grid.cells.len(), 1);
    assert_eq!(grid.cells[0].f1, None);
    assert!(grid.best.is_none());
    let report = Report::new("alphabeta", 0, (), grid).unwrap();
    let csv = report_csv(&report).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap().split(',').nth(2), Some("NA"));
    assert!(report_json(&report).unwrap().contains("\"f1\": \"NA\""));
    let back: Report<AlphaBetaGrid> = serde_json::from_str(&report_json(&report).unwrap()).unwrap();
    assert_eq!(back, report);
}

#[test]
fn full_grid_has_121_cells() {
    let f = fixture();
    let steps: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let policy = LabelPolicy::MaskAttackWindows { window: 16 };
    let grid = run_alpha_beta_grid(&f.model, &f.test, &scores(), &f.clock, policy, &steps, &steps).unwrap();
    assert_eq!(grid.cells.len(), 121);
    let csv = report_csv(&Report::new("alphabeta", 0, (), grid).unwrap()).unwrap();
    assert_eq!(csv.lines().count(), 122);
}
