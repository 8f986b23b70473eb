//! Regenerate the bundled example problems under `fixtures/`.
//!
//! `cargo run -p matspec-core --example make_fixtures`

use matspec_core::graph::StarGraphProblem;
use matspec_core::io::{CoefficientsJson, GraphProblemJson};
use matspec_core::problem::Coefficients;

fn main() {
    let dir = std::path::Path::new("fixtures");
    std::fs::create_dir_all(dir).expect("create fixtures dir");

    let zero = Coefficients::zero(2, 1200);
    write(dir, "interval_zero_m2.json", &CoefficientsJson::from_coefficients(&zero));

    let cosine = Coefficients::scalar(|x| x.cos(), 0.0, 0.0, 2000);
    write(dir, "interval_cos_m1.json", &CoefficientsJson::from_coefficients(&cosine));

    let q = |x: f64| 0.1 * (2.0 * x).cos();
    let star = StarGraphProblem::from_functions(&[&q, &q, &q], 2000);
    write(dir, "graph_cos2_m3.json", &GraphProblemJson::from_problem(&star));
}

fn write<T: serde::Serialize>(dir: &std::path::Path, name: &str, value: &T) {
    let mut text = serde_json::to_string(value).expect("serialize");
    text.push('\n');
    std::fs::write(dir.join(name), text).expect("write fixture");
    println!("wrote fixtures/{name}");
}
