//! Prints the oracle fixture values that the regression tests freeze:
//! run it after an intentional algorithm change and paste the new values.
//!
//! ```bash
//! cargo run --release -p rbl-core --example record_fixtures
//! ```

use nalgebra::DMatrix;
use rbl_core::estimators::egoistic_localize;
use rbl_core::harness::{run_experiment, EstimatorKind, ExperimentConfig};
use rbl_core::measure::nystrom_complete;
use rbl_core::numkit::{rotation_from_euler, EulerAngles};
use rbl_core::scene::{benchmark_scene, place_body};

fn dump(name: &str, m: &DMatrix<f64>) {
    println!("{name} = [");
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
        println!("    {},", row.join(", "));
    }
    println!("];");
}

fn main() {
    let scene = benchmark_scene();
    let blocks = scene.edm_blocks();

    let q = rotation_from_euler(EulerAngles::from_degrees(10.0, 20.0, 45.0));
    println!("// rotation (10, 20, 45) degrees, row major:");
    let qm = DMatrix::from_fn(3, 3, |i, j| q.matrix()[(i, j)]);
    dump("q_benchmark", &qm);

    println!("// placed target sensors:");
    dump("s2_true", &place_body(&scene.c2, &scene.pose));

    let completion = nystrom_complete(&blocks.d1, &blocks.d12).unwrap();
    let rel = (&completion.matrix - &blocks.d2).norm() / blocks.d2.norm();
    println!("completion_rel_error = {rel:?};");

    let out = egoistic_localize(&scene.c1, &blocks.d1, &blocks.d12).unwrap();
    dump("s2_hat_noiseless", &out.s2_hat);
    println!(
        "t_hat_noiseless = [{:?}, {:?}, {:?}];",
        out.translation.t_hat[0], out.translation.t_hat[1], out.translation.t_hat[2]
    );
    println!(
        "t_bias_noiseless = {:?};",
        (out.translation.t_hat - scene.pose.translation).norm()
    );
    let qh = DMatrix::from_fn(3, 3, |i, j| out.rotation.q_hat.matrix()[(i, j)]);
    dump("q_hat_noiseless", &qh);
    println!(
        "chosen_permutation = {}; ambiguity_set_size = {};",
        out.rotation.chosen_permutation, out.rotation.ambiguity_set_size
    );
    println!(
        "translation converged = {} after {} iterations, objective {:?}",
        out.translation.converged, out.translation.iterations, out.translation.objective_value
    );

    let config = ExperimentConfig::default();
    let started = std::time::Instant::now();
    let rows = run_experiment(&config).unwrap();
    let elapsed = started.elapsed();
    println!("// K = {} per sigma, elapsed {elapsed:?}", config.trials);
    println!("// sigma, rmse_egoistic, rmse_genie, ratio");
    for row in &rows {
        let ego = row.rmse_of(EstimatorKind::Egoistic).unwrap();
        let genie = row.rmse_of(EstimatorKind::GenieAided).unwrap();
        println!(
            "({:?}, {:?}, {:?}, {:?}),",
            row.sigma,
            ego,
            genie,
            ego / genie
        );
    }
}
