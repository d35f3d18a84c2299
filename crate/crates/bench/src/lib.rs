//! Fixtures shared by the criterion benchmarks.

use graphcox::simulation::Replication;
use graphcox::{generate_replication, GraphTopologySpec, StudySpec};
use nalgebra::DVector;

/// One replication of a sparse Erdős–Rényi study with `p` predictors and
/// `n` training rows.
pub fn replication(p: usize, n: usize) -> Replication {
    let spec = StudySpec {
        topology: GraphTopologySpec::ErdosRenyi { p, p0: 2.0 / p as f64, seed: 0 },
        n_train: n,
        n_test: n,
        seed: 7,
        ..StudySpec::default()
    };
    generate_replication(&spec, 0).expect("benchmark fixture")
}

/// A dense coefficient vector of moderate size.
pub fn probe_beta(p: usize) -> DVector<f64> {
    DVector::from_fn(p, |j, _| 0.1 * ((j * 7 % 11) as f64 - 5.0))
}
