//! Gradient correctness against the central finite-difference oracle for
//! randomly shaped chains.

use rand::Rng;
use segilm::net::{grad_check, Mlp};
use segilm::StreamKey;

#[test]
fn hundred_random_chains_pass_grad_check() {
    let key = StreamKey::from_seed(0x9d);
    let mut worst = 0.0f64;
    for trial in 0..100u64 {
        let mut rng = key.child(trial).rng();
        let n_nets = rng.random_range(1..=4);
        let mut width = rng.random_range(1..=8usize);
        let mut nets = Vec::new();
        for _ in 0..n_nets {
            let n_layers = rng.random_range(2..=3);
            let mut sizes = vec![width];
            for _ in 1..n_layers {
                sizes.push(rng.random_range(1..=8));
            }
            width = *sizes.last().unwrap();
            nets.push(Mlp::init(&sizes, &mut rng).unwrap());
        }
        let x: Vec<f64> = (0..nets[0].input_size())
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        let t: Vec<f64> = (0..nets.last().unwrap().output_size())
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        let refs: Vec<&Mlp> = nets.iter().collect();
        let err = grad_check(&refs, &x, &t, 1e-5).unwrap();
        assert!(err < 1e-4, "trial {trial}: max relative error {err}");
        worst = worst.max(err);
    }
    eprintln!("worst relative error over 100 chains: {worst:.3e}");
}
