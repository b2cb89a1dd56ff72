//! Independent oracles shared by integration and acceptance tests.
#![allow(dead_code)]

use moe_guide::envs::TabularMDP;
use moe_guide::nn::{mse, Activation, DenseNet, InitScheme};
use moe_guide::rng::SeededRng;

/// Central finite-difference gradient of `mse(net(x), target)` with respect
/// to every weight and bias, in layer order (weights then bias per layer).
pub fn finite_difference_grads(net: &DenseNet, x: &[f64], target: &[f64], h: f64) -> Vec<f64> {
    let loss = |n: &DenseNet| mse(&n.forward(x).unwrap(), target).unwrap();
    let mut out = Vec::new();
    let mut probe = net.clone();
    for k in 0..net.layers().len() {
        for i in 0..net.layers()[k].weights.len() {
            let orig = probe.layers()[k].weights[i];
            probe.layers_mut()[k].weights[i] = orig + h;
            let up = loss(&probe);
            probe.layers_mut()[k].weights[i] = orig - h;
            let down = loss(&probe);
            probe.layers_mut()[k].weights[i] = orig;
            out.push((up - down) / (2.0 * h));
        }
        for i in 0..net.layers()[k].bias.len() {
            let orig = probe.layers()[k].bias[i];
            probe.layers_mut()[k].bias[i] = orig + h;
            let up = loss(&probe);
            probe.layers_mut()[k].bias[i] = orig - h;
            let down = loss(&probe);
            probe.layers_mut()[k].bias[i] = orig;
            out.push((up - down) / (2.0 * h));
        }
    }
    out
}

/// Relative error with a small absolute floor so that gradients that are
/// zero up to rounding do not blow up the ratio.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Random net with 1..=3 layers and widths in 1..=16, plus a random input
/// and target.
pub fn random_case(seed: u64) -> (DenseNet, Vec<f64>, Vec<f64>) {
    let mut rng = SeededRng::new(seed);
    let n_layers = 1 + rng.below(3);
    let dims: Vec<usize> = (0..=n_layers).map(|_| 1 + rng.below(16)).collect();
    let acts: Vec<Activation> = (0..n_layers)
        .map(|k| {
            if k + 1 == n_layers {
                Activation::Identity
            } else {
                *rng.choose(&[Activation::Relu, Activation::Tanh, Activation::Identity])
            }
        })
        .collect();
    let init = *rng.choose(&[InitScheme::UniformGlorot, InitScheme::Orthogonal]);
    let mut net = DenseNet::new(&dims, &acts, init, &mut rng).unwrap();
    for l in net.layers_mut() {
        l.bias.iter_mut().for_each(|b| *b = 0.2 * rng.normal());
    }
    let x: Vec<f64> = (0..dims[0]).map(|_| rng.normal()).collect();
    let target: Vec<f64> = (0..dims[n_layers]).map(|_| rng.normal()).collect();
    (net, x, target)
}

/// Analytic gradients flattened in the same order as the oracle.
pub fn analytic_grads(net: &DenseNet, x: &[f64], target: &[f64]) -> Vec<f64> {
    let out = net.forward(x).unwrap();
    let upstream = moe_guide::nn::mse_grad(&out, target);
    let g = net.backward(x, &upstream).unwrap();
    g.layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(&l.bias).copied().collect::<Vec<_>>())
        .collect()
}

/// Worst relative error between analytic and finite-difference gradients.
pub fn gradient_check(seed: u64) -> f64 {
    let (net, x, target) = random_case(seed);
    let fd = finite_difference_grads(&net, &x, &target, 1e-5);
    let an = analytic_grads(&net, &x, &target);
    assert_eq!(fd.len(), an.len());
    an.iter()
        .zip(&fd)
        .map(|(a, b)| relative_error(*a, *b))
        .fold(0.0, f64::max)
}

/// Discounted return of following deterministic `policy` from `s` for at most
/// `horizon` steps in a deterministic MDP.
pub fn simulate_return(mdp: &TabularMDP, r: &[f64], policy: &[usize], mut s: usize, horizon: usize) -> f64 {
    let mut ret = 0.0;
    let mut disc = 1.0;
    for _ in 0..horizon {
        if mdp.terminal[s] {
            break;
        }
        s = mdp.next_state(s, policy[s]);
        ret += disc * r[s];
        disc *= mdp.gamma;
    }
    ret
}

/// Optimal greedy action sets of a small deterministic MDP, found by
/// simulating every deterministic policy. Terminal states get empty sets.
pub fn brute_force_greedy_sets(mdp: &TabularMDP, r: &[f64], horizon: usize, tie: f64) -> Vec<Vec<usize>> {
    let (n, k) = (mdp.n_states, mdp.n_actions);
    let total = k.pow(n as u32);
    let mut best = vec![f64::NEG_INFINITY; n];
    let mut policy = vec![0; n];
    for code in 0..total {
        let mut c = code;
        for p in policy.iter_mut() {
            *p = c % k;
            c /= k;
        }
        for (s, b) in best.iter_mut().enumerate() {
            *b = b.max(simulate_return(mdp, r, &policy, s, horizon));
        }
    }
    (0..n)
        .map(|s| {
            if mdp.terminal[s] {
                return Vec::new();
            }
            let q: Vec<f64> = (0..k)
                .map(|a| {
                    let nx = mdp.next_state(s, a);
                    r[nx] + if mdp.terminal[nx] { 0.0 } else { mdp.gamma * best[nx] }
                })
                .collect();
            let m = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (0..k).filter(|&a| q[a] >= m - tie).collect()
        })
        .collect()
}

/// Random stochastic MDP with 2..=8 states, 1..=3 actions, up to three
/// successors per pair, some terminal states and Gaussian rewards.
pub fn random_mdp(seed: u64) -> TabularMDP {
    let mut rng = SeededRng::new(seed);
    let n = 2 + rng.below(7);
    let k = 1 + rng.below(3);
    let transitions = (0..n * k)
        .map(|_| {
            let m = 1 + rng.below(3);
            let w: Vec<f64> = (0..m).map(|_| rng.uniform() + 0.01).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|x| (rng.below(n), x / total)).collect()
        })
        .collect();
    let terminal = (0..n).map(|s| s != 0 && rng.uniform() < 0.2).collect();
    let mdp = TabularMDP {
        n_states: n,
        n_actions: k,
        transitions,
        r_env: (0..n).map(|_| rng.normal()).collect(),
        r_int: (0..n).map(|_| rng.normal()).collect(),
        terminal,
        gamma: rng.uniform_range(0.5, 0.99),
        start: 0,
    };
    mdp.validate().unwrap();
    mdp
}

/// Random stochastic policy: one distribution over actions per state.
pub fn random_policy(mdp: &TabularMDP, rng: &mut SeededRng) -> Vec<Vec<f64>> {
    (0..mdp.n_states)
        .map(|_| {
            let w: Vec<f64> = (0..mdp.n_actions).map(|_| rng.uniform()).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|x| x / total).collect()
        })
        .collect()
}

/// Iterative policy evaluation, run to a fixed point.
pub fn iterate_policy(mdp: &TabularMDP, policy: &[Vec<f64>], r: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; mdp.n_states];
    loop {
        let mut delta: f64 = 0.0;
        let next: Vec<f64> = (0..mdp.n_states)
            .map(|s| {
                if mdp.terminal[s] {
                    return 0.0;
                }
                let mut acc = 0.0;
                for (a, &pa) in policy[s].iter().enumerate() {
                    for &(nx, p) in mdp.successors(s, a) {
                        acc += pa * p * (r[nx] + mdp.gamma * v[nx]);
                    }
                }
                acc
            })
            .collect();
        for (a, b) in next.iter().zip(&v) {
            delta = delta.max((a - b).abs());
        }
        v = next;
        if delta < 1e-13 {
            return v;
        }
    }
}
