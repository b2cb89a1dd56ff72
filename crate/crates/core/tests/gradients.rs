mod common;

use moe_guide::nn::{mse, mse_grad, Activation, AdamConfig, AdamState, DenseNet, InitScheme};
use moe_guide::rng::SeededRng;

#[test]
fn random_two_layer_net_matches_finite_differences() {
    for seed in 0..20 {
        let worst = common::gradient_check(seed);
        assert!(worst <= 1e-4, "seed {seed}: relative error {worst}");
    }
}

#[test]
fn trained_parameters_are_bit_identical_for_same_seed() {
    let train = |seed| {
        let mut rng = SeededRng::new(seed);
        let mut net = DenseNet::new(
            &[3, 8, 3],
            &[Activation::Relu, Activation::Identity],
            InitScheme::Orthogonal,
            &mut rng,
        )
        .unwrap();
        let data: Vec<Vec<f64>> = (0..16).map(|_| (0..3).map(|_| rng.normal()).collect()).collect();
        let mut adam = AdamState::new(&net, AdamConfig::default());
        for _ in 0..50 {
            let mut total = moe_guide::nn::Gradients::zeros_like(&net);
            for x in &data {
                let y = net.forward(x).unwrap();
                total.add_assign(&net.backward(x, &mse_grad(&y, x)).unwrap());
            }
            adam.apply(&mut net, &total).unwrap();
            assert!(net.is_finite());
        }
        let loss: f64 = data.iter().map(|x| mse(&net.forward(x).unwrap(), x).unwrap()).sum();
        (net, loss.to_bits())
    };
    assert_eq!(train(4), train(4));
    assert_ne!(train(4).1, train(5).1);
}
