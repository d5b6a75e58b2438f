use adaptv::adaptive::AdaptiveWeightConfig;
use adaptv::field::{ScalarField, VectorField2};
use adaptv::flow::{flow_level, linearize, FlowState};
use adaptv::ops::gradient;
use adaptv::solver::SolverConfig;
use adaptv::synth::make_translation_pair;

fn triangle(x: f64, period: f64) -> f64 {
    let t = (x / period).fract();
    let t = if t < 0.0 { t + 1.0 } else { t };
    if t < 0.5 {
        2.0 * t
    } else {
        2.0 * (1.0 - t)
    }
}

fn main() {
    let base = ScalarField::from_fn(96, 1, |x, _| 0.05 + 0.9 * triangle(x as f64, 12.0));
    let scene = make_translation_pair(&base, [1.0, 0.0]);
    let data = linearize(&scene.clean, &scene.noisy, &VectorField2::zeros(96, 1));
    let wcfg = AdaptiveWeightConfig::plain(0.05).unwrap();
    let zero = VectorField2::zeros(96, 1);
    let res0 = data.residual(&zero);
    let u0 = ScalarField::zeros(96, 1);
    let state = FlowState {
        y: gradient(&u0),
        z: gradient(&u0),
        p: VectorField2::zeros(96, 1),
        q: VectorField2::zeros(96, 1),
        s: res0.clone(),
        r: ScalarField::zeros(96, 1),
        lambda: adaptv::adaptive::compute_lambda(&res0.map(f64::abs), &wcfg).unwrap(),
        u: u0.clone(),
        v: u0.clone(),
    };
    for iters in [400, 1500, 3000] {
        let scfg = SolverConfig {
            max_iters: iters,
            tol_rel_change: 0.0,
            ..SolverConfig::default()
        };
        let out = flow_level(&data, &wcfg, &scfg, state.clone()).unwrap();
        let mae: f64 = out.u.data().iter().map(|&v| (v - 1.0).abs()).sum::<f64>() / 96.0;
        println!("iters {iters}: MAE {mae:.4}");
        let prof: Vec<String> = (0..96).step_by(4).map(|x| format!("{:+.2}", out.u.at(x, 0))).collect();
        println!("  u: {}", prof.join(" "));
    }
}
