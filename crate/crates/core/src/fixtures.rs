//! Deterministic synthetic datasets used by the ablation tooling and tests.

use crate::moe::DemoSet;
use crate::nn::orthogonal;
use crate::rng::SeededRng;

/// A smooth expert path in the unit square: `n` points along a sine arc
/// `y = 0.5 + 0.3 sin(pi (x + phase))`, with a seeded phase. Records are one
/// episode with consecutive step indices.
pub fn expert_path_2d(n: usize, seed: u64) -> DemoSet {
    let mut rng = SeededRng::new(seed);
    let phase = rng.uniform();
    let mut demos = DemoSet::new(2, format!("sine arc, seed {seed}"));
    let denom = (n.max(2) - 1) as f64;
    for i in 0..n {
        let x = i as f64 / denom;
        let y = 0.5 + 0.3 * (std::f64::consts::PI * (x + phase)).sin();
        demos.push(0, i as u64, vec![x, y]).expect("fixture states are 2-D");
    }
    demos
}

/// Splits a demo set into (even-indexed, odd-indexed) records, giving a
/// training set and interleaved held-out states from the same path.
pub fn interleaved_split(demos: &DemoSet) -> (DemoSet, DemoSet) {
    let mut train = DemoSet::new(demos.state_dim, demos.source.clone());
    let mut held = DemoSet::new(demos.state_dim, demos.source.clone());
    for (i, r) in demos.records.iter().enumerate() {
        let target = if i % 2 == 0 { &mut train } else { &mut held };
        target.records.push(r.clone());
    }
    (train, held)
}

/// Axis-aligned bounding box `(lo, hi)` of the demonstration states.
pub fn bounding_box(demos: &DemoSet) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; demos.state_dim];
    let mut hi = vec![f64::NEG_INFINITY; demos.state_dim];
    for s in demos.states() {
        for (k, &v) in s.iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    (lo, hi)
}

/// `n` states drawn uniformly from the box `(lo, hi)`.
pub fn uniform_states(lo: &[f64], hi: &[f64], n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = SeededRng::new(seed);
    (0..n)
        .map(|_| lo.iter().zip(hi).map(|(&a, &b)| rng.uniform_range(a, b)).collect())
        .collect()
}

/// Width of the bimodal fixture's states.
pub const BIMODAL_DIM: usize = 8;

/// Two disjoint anisotropic Gaussian clusters in 8-D. Cluster A spreads along
/// two random orthonormal directions, cluster B along two others orthogonal
/// to those, and both carry small isotropic noise. Centers sit at `+/-3 u`
/// for a fifth direction `u`. Each cluster is its own episode.
pub fn bimodal_clusters(per_cluster: usize, seed: u64) -> DemoSet {
    let mut rng = SeededRng::new(seed);
    let d = BIMODAL_DIM;
    let basis = orthogonal(d, d, &mut rng);
    let row = |k: usize| &basis[k * d..(k + 1) * d];
    let mut demos = DemoSet::new(d, format!("bimodal clusters, seed {seed}"));
    for cluster in 0..2u64 {
        let sign = if cluster == 0 { 3.0 } else { -3.0 };
        let (u1, u2) = (row(2 * cluster as usize), row(2 * cluster as usize + 1));
        for i in 0..per_cluster {
            let (a, b) = (rng.normal(), rng.normal());
            let state: Vec<f64> = (0..d)
                .map(|j| sign * row(4)[j] + a * u1[j] + b * u2[j] + 0.05 * rng.normal())
                .collect();
            demos.push(cluster, i as u64, state).expect("fixture width");
        }
    }
    demos
}
