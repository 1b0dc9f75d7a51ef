//! Scratch probe: raw GEMM throughput at the shapes the generator uses.

use ndarray::Array2;
use std::time::Instant;

fn bench(m: usize, k: usize, n: usize, reps: usize) {
    let a = Array2::<f32>::from_elem((m, k), 0.5);
    let b = Array2::<f32>::from_elem((k, n), 0.25);
    let t = Instant::now();
    let mut acc = 0.0f32;
    for _ in 0..reps {
        let c = a.dot(&b);
        acc += c[[0, 0]];
    }
    let secs = t.elapsed().as_secs_f64();
    let flops = 2.0 * (m * k * n * reps) as f64;
    println!(
        "({m:4},{k:4})x({k:4},{n:5}) x{reps:3}: {:7.1} ms  {:6.2} GFLOP/s  (acc {acc})",
        secs * 1e3,
        flops / secs / 1e9
    );
}

fn main() {
    bench(16, 245, 2304, 50); // front conv per frame
    bench(16, 144, 576, 200); // resnet stage-1 conv per frame
    bench(64, 576, 36, 200); // resnet stage-3 conv per frame
    bench(128, 1152, 9, 200); // resnet stage-4 conv per frame
    bench(256, 256, 4096, 10); // big reference
    bench(512, 512, 512, 20); // square reference
}
