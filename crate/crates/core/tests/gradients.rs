use gcds::divergence::{generator_upstream, DivergenceKind};
use gcds::nn::gradcheck::{max_relative_error, relative_error, FD_STEP};
use gcds::nn::{DenseNet, NetworkSpec};
use gcds::rng::rng_from;
use ndarray::{concatenate, Array2, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;

fn normal_matrix(rows: usize, cols: usize, rng: &mut gcds::rng::Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// He-initialized net with its biases also drawn, so ReLU kinks sit at
/// random places.
fn random_net(rng: &mut gcds::rng::Rng) -> DenseNet {
    let input = rng.random_range(1..=8);
    let depth = rng.random_range(0..=3);
    let hidden = (0..depth).map(|_| rng.random_range(1..=8)).collect();
    let output = rng.random_range(1..=8);
    let spec = NetworkSpec::new(input, hidden, output).unwrap();
    let mut net = DenseNet::init(spec, rng.random()).unwrap();
    let mut p = net.flat_params();
    for v in &mut p {
        *v += 0.1 * rng.sample::<f64, _>(StandardNormal);
    }
    net.set_flat_params(&p).unwrap();
    net
}

#[test]
fn backward_matches_central_differences_on_100_random_nets() {
    let mut rng = rng_from(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let net = random_net(&mut rng);
        let n = rng.random_range(1..=8);
        let batch = normal_matrix(n, net.spec().input_dim, &mut rng);
        let upstream = normal_matrix(n, net.spec().output_dim, &mut rng);
        worst = worst.max(max_relative_error(&net, batch.view(), upstream.view(), FD_STEP, 1e-6).unwrap());
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
}

#[test]
fn generator_gradient_through_the_critic() {
    // d/dθ_G of mean_i D(x_i, G(η_i, x_i)), chained through d_input of D.
    let mut rng = rng_from(77);
    let (d, m, q, n) = (2, 3, 1, 6);
    let gen = DenseNet::init(NetworkSpec::new(m + d, vec![6, 4], q).unwrap(), 1).unwrap();
    let disc = DenseNet::init(NetworkSpec::new(d + q, vec![5, 3], 1).unwrap(), 2).unwrap();
    let eta = normal_matrix(n, m, &mut rng);
    let x = normal_matrix(n, d, &mut rng);
    let g_in = concatenate(Axis(1), &[eta.view(), x.view()]).unwrap();

    let objective = |g: &DenseNet| -> f64 {
        let y = g.predict(g_in.view()).unwrap();
        let d_in = concatenate(Axis(1), &[x.view(), y.view()]).unwrap();
        disc.predict(d_in.view()).unwrap().mean().unwrap()
    };

    let (y, g_cache) = gen.forward(g_in.view()).unwrap();
    let d_in = concatenate(Axis(1), &[x.view(), y.view()]).unwrap();
    let (d_out, d_cache) = disc.forward(d_in.view()).unwrap();
    let up = generator_upstream(DivergenceKind::Kl, &d_out.column(0).to_vec()).unwrap();
    let up = Array2::from_shape_vec((n, 1), up).unwrap();
    let d_grads = disc.backward(&d_cache, up.view()).unwrap();
    let dy = d_grads.d_input.slice(ndarray::s![.., d..]).to_owned();
    let analytic = gen.backward(&g_cache, dy.view()).unwrap().flat_params();

    let params = gen.flat_params();
    let mut probe = gen.clone();
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        let mut p = params.clone();
        p[i] += FD_STEP;
        probe.set_flat_params(&p).unwrap();
        let hi = objective(&probe);
        p[i] = params[i] - FD_STEP;
        probe.set_flat_params(&p).unwrap();
        let lo = objective(&probe);
        worst = worst.max(relative_error(*a, (hi - lo) / (2.0 * FD_STEP), 1e-6));
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
}
