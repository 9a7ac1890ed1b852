use std::sync::{Arc, OnceLock};

use commute_grid::api::ScenarioRequest;
use commute_grid::demo;
use commute_grid::energy::{Policy, HOURS};
use commute_grid::pipeline::{Inputs, ScenarioSpec};
use commute_grid::sampler::{PresetName, WeightVector, WfhLevel};
use commute_grid_client::{Client, ClientError};
use commute_grid_service::AppState;

fn inputs() -> &'static Inputs {
    static INPUTS: OnceLock<Inputs> = OnceLock::new();
    INPUTS.get_or_init(|| Inputs::from_sources(&demo::sources(), demo::config().settings()).unwrap())
}

/// One server for the whole test binary, on its own runtime thread.
fn server() -> String {
    static BASE: OnceLock<String> = OnceLock::new();
    BASE.get_or_init(|| {
        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().unwrap();
            rt.block_on(async move {
                let state = Arc::new(AppState::new());
                state.install(inputs().clone()).unwrap();
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                tx.send(format!("http://{}", listener.local_addr().unwrap())).unwrap();
                commute_grid_service::serve(listener, state).await.unwrap();
            });
        });
        rx.recv().unwrap()
    })
    .clone()
}

#[tokio::test]
async fn meta_round_trips() {
    let meta = Client::new(server()).meta().await.unwrap();
    assert_eq!(meta.population, demo::POPULATION);
    assert_eq!(meta.presets.len(), 5);
}

#[tokio::test]
async fn scenario_round_trips_exactly() {
    let client = Client::new(server() + "/");
    let req = ScenarioRequest::preset(PresetName::CarFocused, Policy::Latest, 42);
    let resp = client.scenario(&req).await.unwrap();
    let (env, _) = inputs().capacity(0.0).unwrap();
    let eval = inputs().evaluate(&ScenarioSpec::preset(PresetName::CarFocused, WfhLevel::Medium, 42), &Policy::ALL, &env).unwrap();
    assert_eq!(resp.profiles, eval.profiles);
    assert_eq!(resp.headroom, eval.headroom[&Policy::Latest]);
    assert_eq!(resp.capacity_mw, env.envelope_mw);
    assert_eq!(client.scenario_raw(&req).await.unwrap(), client.scenario_raw(&req).await.unwrap());
}

#[tokio::test]
async fn capacity_round_trips() {
    let client = Client::new(server());
    let base = client.capacity(None).await.unwrap();
    let reg = client.capacity(Some(0.1)).await.unwrap();
    assert_eq!(base.envelope.lambda, 0.0);
    assert_eq!(reg.envelope.lambda, 0.1);
    for h in 0..HOURS {
        assert!(reg.envelope.envelope_mw[h] <= base.envelope.envelope_mw[h] + 1e-6);
    }
}

#[tokio::test]
async fn validation_errors_carry_the_field() {
    let client = Client::new(server());
    let mut req = ScenarioRequest::preset(PresetName::Mix, Policy::Earliest, 1);
    req.preset = None;
    req.weights = Some(WeightVector { transit: 0.0, car: 0.0, micromobility: 0.0, wfh: 0.0 });
    match client.scenario(&req).await {
        Err(ClientError::Api { status, body }) => {
            assert_eq!(status.as_u16(), 400);
            assert_eq!(body.field.as_deref(), Some("weights"));
        }
        other => panic!("expected a 400, got {other:?}"),
    }
    match client.capacity(Some(f64::NAN)).await {
        Err(ClientError::Api { body, .. }) => assert_eq!(body.field.as_deref(), Some("lambda")),
        other => panic!("expected a 400, got {other:?}"),
    }
}

#[tokio::test]
async fn unreachable_server_is_an_http_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let err = Client::new(format!("http://{addr}")).meta().await.unwrap_err();
    assert!(matches!(err, ClientError::Http(_)), "{err:?}");
}
