//! Checks hand-written backpropagation against central finite differences on
//! the actor and critic architectures.
//!
//! cargo run --release --example gradient_check [hidden...]

use ndarray::Array2;
use pursuit_rl::nn::Mlp;
use pursuit_rl::rl::{actor_architecture, critic_architecture};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_rel_error(net: &mut Mlp, rng: &mut ChaCha8Rng) -> f64 {
    let x = Array2::from_shape_fn((4, net.arch().input), |_| rng.random_range(-1.0..1.0));
    let w = Array2::from_shape_fn((4, net.arch().output), |_| rng.random_range(-1.0..1.0));
    let (_, cache) = net.forward(x.view()).unwrap();
    let (grads, _) = net.backward(&cache, w.view()).unwrap();
    let analytic = grads.flat();
    let base = net.params_flat();
    let h = 1e-5;
    let mut p = base.clone();
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        p[k] = base[k] + h;
        net.set_params_flat(&p).unwrap();
        let up = (net.predict(x.view()).unwrap() * &w).sum();
        p[k] = base[k] - h;
        net.set_params_flat(&p).unwrap();
        let down = (net.predict(x.view()).unwrap() * &w).sum();
        p[k] = base[k];
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(1e-6));
    }
    net.set_params_flat(&base).unwrap();
    worst
}

fn main() {
    let hidden: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("hidden width")).collect();
    let hidden = if hidden.is_empty() { vec![64, 64] } else { hidden };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (name, arch) in [("actor", actor_architecture(&hidden)), ("critic", critic_architecture(&hidden))] {
        let mut net = Mlp::new(arch, &mut rng);
        let err = max_rel_error(&mut net, &mut rng);
        println!("{name:<6} {:>6} params  max relative error {err:.2e}", net.num_params());
    }
}
