//! Browser bindings. Every entry point takes and returns JSON strings, so the
//! same functions run natively in tests.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use rcmdp_core::actor;
use rcmdp_core::oracle::robust_values;
use rcmdp_core::uncertainty::sigma_exact;
use rcmdp_core::{
    ActorConfig, BestIterateMode, CriticConfig, GenerativeModel, PolicyTable, StepSize, TabularRcmdp,
    UncertaintyModel,
};

const EVAL_INSTANCE: &str = include_str!("../../core/fixtures/critic_3x2.json");
const CONSTRAINED_INSTANCE: &str = include_str!("../../core/fixtures/constrained_2x2.json");
const MAX_ITERATIONS: usize = 1000;

type Result<T> = std::result::Result<T, String>;

fn model(kind: &str, radius: f64, n_states: usize) -> Result<UncertaintyModel> {
    let m = match kind {
        "contamination" => UncertaintyModel::contamination(radius),
        "total-variation" => UncertaintyModel::total_variation(radius),
        "wasserstein" => UncertaintyModel::wasserstein_line(1.0, radius, n_states),
        other => return Err(format!("unknown uncertainty set {other:?}")),
    };
    m.map_err(|e| e.to_string())
}

fn parse<'a, T: Deserialize<'a>>(input: &'a str) -> Result<T> {
    serde_json::from_str(input).map_err(|e| format!("bad request: {e}"))
}

fn reply<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn instance(text: &str) -> TabularRcmdp {
    serde_json::from_str(text).expect("bundled instance parses")
}

#[derive(Deserialize)]
struct SupportRequest {
    kind: String,
    radius: f64,
    nominal: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Serialize)]
struct SupportResponse {
    sigma: f64,
    nominal_value: f64,
    worst_row: Vec<f64>,
    distance: f64,
}

/// Worst-case row and support function value for one nominal row.
pub fn support_function(input: &str) -> Result<String> {
    let req: SupportRequest = parse(input)?;
    if req.nominal.len() != req.v.len() {
        return Err("nominal row and V differ in length".into());
    }
    let m = model(&req.kind, req.radius, req.nominal.len())?;
    let res = sigma_exact(&m, &req.nominal, &req.v).map_err(|e| e.to_string())?;
    let distance = m.divergence(&req.nominal, &res.worst_row).map_err(|e| e.to_string())?;
    reply(&SupportResponse {
        sigma: res.sigma,
        nominal_value: req.nominal.iter().zip(&req.v).map(|(p, x)| p * x).sum(),
        worst_row: res.worst_row,
        distance,
    })
}

#[derive(Deserialize)]
struct RadiusRequest {
    radii: Vec<f64>,
    /// Defaults to the uniform policy.
    #[serde(default)]
    policy: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    index: usize,
}

#[derive(Serialize)]
struct Curve {
    kind: &'static str,
    g: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct RadiusResponse {
    radii: Vec<f64>,
    curves: Vec<Curve>,
}

/// Robust gain of a fixed policy on the bundled three-state instance, per
/// set and radius. Radii outside a set's admissible range give `null`.
pub fn radius_curve(input: &str) -> Result<String> {
    let req: RadiusRequest = parse(input)?;
    let mdp = instance(EVAL_INSTANCE);
    if req.index > mdp.n_constraints() {
        return Err(format!("signal index {} out of range", req.index));
    }
    let policy = match req.policy {
        Some(rows) => PolicyTable::new(rows).map_err(|e| e.to_string())?,
        None => PolicyTable::uniform(mdp.n_states(), mdp.n_actions()),
    };
    if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
        return Err("policy shape does not match the instance".into());
    }
    let curves = ["contamination", "total-variation", "wasserstein"]
        .into_iter()
        .map(|kind| {
            let g = req
                .radii
                .iter()
                .map(|&r| {
                    let m = model(kind, r, mdp.n_states()).ok()?;
                    robust_values(&mdp, &policy, &m).ok().map(|g| g[req.index])
                })
                .collect();
            Curve { kind, g }
        })
        .collect();
    reply(&RadiusResponse {
        radii: req.radii,
        curves,
    })
}

#[derive(Deserialize)]
struct TraceRequest {
    kind: String,
    radius: f64,
    iterations: usize,
    /// Fixed step size; the theory step when absent.
    #[serde(default)]
    step: Option<f64>,
    #[serde(default)]
    threshold: Option<f64>,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize)]
struct TracePoint {
    t: usize,
    f_hat: f64,
    f_exact: f64,
    g_exact: Vec<f64>,
    active_index: usize,
}

#[derive(Serialize)]
struct TraceResponse {
    lambda: f64,
    threshold: f64,
    points: Vec<TracePoint>,
    best_t: Option<usize>,
    policy: Vec<Vec<f64>>,
    g: Vec<f64>,
}

/// Runs the actor on the bundled two-state constrained instance.
pub fn actor_trace(input: &str) -> Result<String> {
    let req: TraceRequest = parse(input)?;
    if req.iterations > MAX_ITERATIONS {
        return Err(format!("at most {MAX_ITERATIONS} iterations"));
    }
    let mut mdp = instance(CONSTRAINED_INSTANCE);
    if let Some(b) = req.threshold {
        mdp = mdp.with_thresholds(vec![b]).map_err(|e| e.to_string())?;
    }
    let m = model(&req.kind, req.radius, mdp.n_states())?;
    let cfg = ActorConfig {
        total_iters: req.iterations,
        step_size: match req.step {
            Some(eta) => StepSize::Fixed(eta),
            None => StepSize::Theory { c: 1.0 },
        },
        critic: CriticConfig::with_iters(1000, 250),
        best_iterate_mode: BestIterateMode::CriticEstimates,
        track_exact: true,
        ..ActorConfig::default()
    };
    let gm = GenerativeModel::new(&mdp, req.seed);
    let (policy, trace) = actor::run(&mdp, &m, &cfg, &gm).map_err(|e| e.to_string())?;
    let g = robust_values(&mdp, &policy, &m).map_err(|e| e.to_string())?;
    let points = trace
        .records
        .iter()
        .map(|r| TracePoint {
            t: r.t,
            f_hat: r.f_hat,
            f_exact: r.f_exact.unwrap_or(f64::NAN),
            g_exact: r.g_exact.clone().unwrap_or_default(),
            active_index: r.active_index,
        })
        .collect();
    reply(&TraceResponse {
        lambda: trace.lambda,
        threshold: mdp.thresholds()[0],
        points,
        best_t: trace.best_t,
        policy: policy.rows().to_vec(),
        g,
    })
}

#[wasm_bindgen(js_name = supportFunction)]
pub fn support_function_js(input: &str) -> std::result::Result<String, JsError> {
    support_function(input).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = radiusCurve)]
pub fn radius_curve_js(input: &str) -> std::result::Result<String, JsError> {
    radius_curve(input).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = actorTrace)]
pub fn actor_trace_js(input: &str) -> std::result::Result<String, JsError> {
    actor_trace(input).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn call(f: fn(&str) -> Result<String>, input: &str) -> Value {
        serde_json::from_str(&f(input).unwrap()).unwrap()
    }

    #[test]
    fn support_function_tv_example() {
        let out = call(
            support_function,
            r#"{"kind":"total-variation","radius":0.2,"nominal":[0.5,0.5],"v":[0,1]}"#,
        );
        assert!((out["sigma"].as_f64().unwrap() - 0.7).abs() < 1e-12);
        assert!((out["nominal_value"].as_f64().unwrap() - 0.5).abs() < 1e-12);
        assert!((out["distance"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn support_function_rejects_bad_input() {
        assert!(support_function(r#"{"kind":"kl","radius":0.2,"nominal":[1],"v":[0]}"#).is_err());
        assert!(support_function(r#"{"kind":"contamination","radius":0.2,"nominal":[1],"v":[0,1]}"#).is_err());
        assert!(support_function("not json").is_err());
    }

    #[test]
    fn radius_curve_is_monotone() {
        let out = call(radius_curve, r#"{"radii":[0,0.1,0.2,0.4]}"#);
        for curve in out["curves"].as_array().unwrap() {
            let g: Vec<f64> = curve["g"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
            assert!(g.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{curve}");
        }
    }

    #[test]
    fn radius_curve_marks_inadmissible_radii() {
        let out = call(radius_curve, r#"{"radii":[1.5]}"#);
        assert!(out["curves"][0]["g"][0].is_null());
        assert!(out["curves"][2]["g"][0].is_number());
    }

    #[test]
    fn actor_trace_runs() {
        let out = call(
            actor_trace,
            r#"{"kind":"contamination","radius":0.1,"iterations":20,"step":0.2,"seed":1}"#,
        );
        assert_eq!(out["points"].as_array().unwrap().len(), 20);
        assert_eq!(out["lambda"], 80.0);
        assert!(actor_trace(r#"{"kind":"contamination","radius":0.1,"iterations":5000}"#).is_err());
    }
}
