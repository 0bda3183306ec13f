use brb_core::{DenseMatrix, SeededRng};
use std::time::Instant;

fn rand_mat(rng: &mut SeededRng, r: usize, c: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(r, c);
    for v in m.data_mut() { *v = rng.next_uniform(-1.0, 1.0); }
    m
}

fn bench(name: &str, m: usize, k: usize, n: usize, reps: usize) {
    let mut rng = SeededRng::new(1);
    let a = rand_mat(&mut rng, m, k);
    let b = rand_mat(&mut rng, k, n);
    let t0 = Instant::now();
    let mut acc = 0.0;
    for _ in 0..reps {
        acc += a.matmul(&b).unwrap().get(0, 0);
    }
    let dt = t0.elapsed().as_secs_f64();
    let gf = (2.0 * m as f64 * k as f64 * n as f64 * reps as f64) / dt / 1e9;
    println!("{name}: {m}x{k}x{n} x{reps} -> {dt:.3}s  {gf:.1} GFLOP/s (ignore {acc:.1})");
}

fn main() {
    bench("enc1", 256, 64, 1024, 200);
    bench("enc2", 256, 1024, 512, 100);
    bench("enc3", 256, 512, 256, 200);
    bench("eval", 5620, 64, 1024, 20);
    bench("bwd_tn_shape", 1024, 256, 512, 100);
}
