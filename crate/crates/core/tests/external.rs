//! The engine driving `shcho serve` as a child process over the wire protocol.

use shcho::coevolution::{run_method, CoevConfig, Method, VariantFlags};
use shcho::problems::{ExternalSession, PipelineBench, PipelineParams, SegmentEvaluator};
use shcho::Error;

fn serve_cmd(extra: &str) -> String {
    format!(
        "{} serve --problem bench_pipeline --n-blocks 4{extra}",
        env!("CARGO_BIN_EXE_shcho")
    )
}

fn layout() -> shcho::space::SpaceLayout {
    PipelineBench::new(PipelineParams {
        n_blocks: 4,
        ..Default::default()
    })
    .unwrap()
    .layout()
    .clone()
}

fn cfg() -> CoevConfig {
    CoevConfig {
        epsilon: 6,
        inner_evals: 4,
        ..Default::default()
    }
}

#[test]
fn external_run_matches_in_process_run() {
    let budget = 12.0;
    let mut fitness_streams = Vec::new();
    for _ in 0..2 {
        let mut ext = ExternalSession::connect(&serve_cmd(""), layout(), None).unwrap();
        let out = run_method(
            &mut ext,
            Method::Shcho(VariantFlags::SHCHO),
            &cfg(),
            budget,
            9,
        )
        .unwrap();
        assert!(
            out.ledger.len() >= 20,
            "only {} evaluations",
            out.ledger.len()
        );
        assert!(out.ledger.verify());
        ext.shutdown().unwrap();
        fitness_streams.push(out.ledger.records().to_vec());
    }
    assert_eq!(fitness_streams[0], fitness_streams[1]);

    let mut local = PipelineBench::new(PipelineParams {
        n_blocks: 4,
        ..Default::default()
    })
    .unwrap();
    let out = run_method(
        &mut local,
        Method::Shcho(VariantFlags::SHCHO),
        &cfg(),
        budget,
        9,
    )
    .unwrap();
    assert_eq!(out.ledger.records(), &fitness_streams[0][..]);
}

#[test]
fn child_dying_mid_session_is_an_io_error() {
    // relays four requests unbuffered, then closes the server's input
    let relay = r#"sh -c 'for i in 1 2 3 4; do IFS= read -r l; printf "%s\n" "$l"; done'"#;
    let cmd = format!("{relay} | {}", serve_cmd(""));
    let mut ext = ExternalSession::connect(&cmd, layout(), None).unwrap();
    let err = run_method(
        &mut ext,
        Method::Shcho(VariantFlags::SHCHO),
        &cfg(),
        50.0,
        1,
    )
    .unwrap_err();
    assert!(matches!(err, Error::EvaluatorIo(_)), "{err:?}");
}

#[test]
fn layout_mismatch_is_refused() {
    let err = ExternalSession::connect(
        &format!(
            "{} serve --problem bench_pipeline --n-blocks 5",
            env!("CARGO_BIN_EXE_shcho")
        ),
        layout(),
        None,
    )
    .unwrap_err();
    assert!(matches!(err, Error::EvaluatorIo(_)), "{err:?}");
}
