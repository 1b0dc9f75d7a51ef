//! Scratch timing probe for full-scale training updates. Not part of the
//! example suite; used to budget the overfit experiment.

use std::time::Instant;

use ndarray::{Array2, Array3, Array4};
use v2s::core::config::TrainConfig;
use v2s::core::rng::streams;
use v2s::core::SeededRng;
use v2s::dsp::StftPlan;
use v2s::model::{GeneratorNet, PowerCriticNet, WaveCriticNet};
use v2s::nn::BnMode;

fn main() {
    let scale = 0.25;
    let config = TrainConfig {
        model_width_scale: scale,
        ..TrainConfig::default()
    };
    let mut rng = SeededRng::new(0, streams::INIT_GENERATOR);
    let mut generator = GeneratorNet::new(scale, &mut rng);
    let mut wave = WaveCriticNet::new(scale, 16_000, &mut rng);
    let mut power = PowerCriticNet::new(scale, 257, 98, &mut rng);
    let _ = &config;

    let videos = Array4::from_shape_fn((8, 25, 96, 96), |(b, t, i, j)| {
        ((b * 37 + t * 17 + i * 5 + j * 3) % 101) as f32 / 100.0
    });
    let waves = Array2::from_shape_fn((8, 16_000), |(b, i)| {
        0.3 * ((b + 1) as f32 * 0.001 * i as f32).sin()
    });
    let specs = Array3::from_shape_fn((8, 257, 98), |(b, f, l)| {
        (((b * 31 + f * 7 + l * 3) % 17) as f32 / 17.0) - 0.5
    });

    let t = Instant::now();
    let (fake, cache) = generator.forward_train(&videos, BnMode::TrainUpdate);
    println!("generator forward_train: {:.2?}", t.elapsed());

    let t = Instant::now();
    let d_wave = Array2::from_elem(fake.raw_dim(), 1e-4_f32);
    generator.backward(&cache, &d_wave);
    println!("generator backward:      {:.2?}", t.elapsed());

    let t = Instant::now();
    let (_scores, wcache) = wave.forward(&waves).unwrap();
    println!("wave critic forward:     {:.2?}", t.elapsed());

    let t = Instant::now();
    let _gx = wave.input_grads(&wcache, &ndarray::Array1::from_elem(8, 0.125));
    println!("wave critic input_grads: {:.2?}", t.elapsed());

    let t = Instant::now();
    wave.accumulate_param_grads(&wcache, &ndarray::Array1::from_elem(8, 0.125));
    println!("wave critic param grads: {:.2?}", t.elapsed());

    let t = Instant::now();
    let (_scores, pcache) = power.forward(&specs).unwrap();
    println!("power critic forward:    {:.2?}", t.elapsed());

    let t = Instant::now();
    let _gx = power.input_grads(&pcache, &ndarray::Array1::from_elem(8, 0.125));
    println!("power critic input_grads:{:.2?}", t.elapsed());

    let t = Instant::now();
    power.accumulate_param_grads(&pcache, &ndarray::Array1::from_elem(8, 0.125));
    println!("power critic param grads:{:.2?}", t.elapsed());

    let plan = StftPlan::new(Default::default(), 16_000).unwrap();
    let row: Vec<f64> = (0..16_000).map(|i| 0.3 * (0.001 * i as f64).sin()).collect();
    let t = Instant::now();
    for _ in 0..8 {
        let _ = plan.re_im(&row).unwrap();
    }
    println!("stft re_im x8:           {:.2?}", t.elapsed());
}
