//! Regenerates the bundled real-mode fixture under `tests/fixtures/real_like`:
//! a 300 × 200 expression-like matrix, a gene edge list with a few
//! identifiers that are absent from the matrix, and a config.
//!
//! cargo run -p enggnn-cli --example make_fixture

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use enggnn_core::seed::{derive_seed, rng_from_seed};
use enggnn_core::simgen::{build_scenario, SimScenario};
use rand::Rng;

const SEED: u64 = 20240517;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/real_like");
    fs::create_dir_all(&dir)?;
    let sim = build_scenario(&SimScenario {
        n: 300,
        p_n: 2.0 / 3.0,
        p_t: 0.1,
        ba_m: 3,
        seed: SEED,
        ..SimScenario::default()
    })?;
    let (n, p) = sim.x.dim();
    let names: Vec<String> = (0..p).map(|j| format!("GENE{:04}", j + 1)).collect();

    // map every column onto a log-expression-like range around its mean
    let mut rng = rng_from_seed(derive_seed(SEED, 0, "fixture"));
    let mut matrix = String::new();
    writeln!(matrix, "sample_id,{},label", names.join(","))?;
    let cols: Vec<(f64, f64, f64)> = (0..p)
        .map(|j| {
            let c = sim.x.column(j);
            let mean = c.mean().unwrap_or(0.0);
            let sd = c.std(1.0).max(1e-12);
            (mean, sd, rng.random_range(5.0..11.0))
        })
        .collect();
    for i in 0..n {
        write!(matrix, "S{:03}", i + 1)?;
        for (j, &(mean, sd, level)) in cols.iter().enumerate() {
            write!(matrix, ",{:.4}", level + 0.75 * (sim.x[[i, j]] - mean) / sd)?;
        }
        writeln!(matrix, ",{}", sim.y[i])?;
    }
    fs::write(dir.join("expression.csv"), matrix)?;

    let mut edges = String::from("# gene1\tgene2\tconfidence\n");
    for (u, v) in sim.graph.edges() {
        writeln!(edges, "{}\t{}\t{:.3}", names[u], names[v], rng.random_range(0.4..1.0))?;
    }
    for k in 0..15 {
        let known = &names[rng.random_range(0..p)];
        writeln!(edges, "{known}\tGENE9{k:03}\t{:.3}", rng.random_range(0.4..1.0))?;
    }
    fs::write(dir.join("network.tsv"), edges)?;

    let truth: String = std::iter::once("feature,important\n".to_string())
        .chain(
            names
                .iter()
                .enumerate()
                .map(|(j, n)| format!("{n},{}\n", sim.truth.important.contains(&j) as u8)),
        )
        .collect();
    fs::write(dir.join("truth.csv"), truth)?;
    println!("wrote {n} samples × {p} genes to {}", dir.display());
    Ok(())
}
