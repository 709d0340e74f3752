use ndarray::prelude::*;
use ndarray_linalg::*;

fn main() {
    let a: Array2<c64> = array![
        [c64::new(0., 0.), c64::new(1., 0.5)],
        [c64::new(-1., 0.2), c64::new(0.3, 0.)]
    ];
    let ev = a.eigvals().unwrap();
    println!("eigvals: {ev:?}");
    let h = array![[c64::new(2., 0.), c64::new(0., 1.)], [c64::new(0., -1.), c64::new(3., 0.)]];
    let w = h.eigvalsh(UPLO::Lower).unwrap();
    println!("eigvalsh: {w:?}");
    let (_, s, _) = a.svd(false, false).unwrap();
    println!("svd: {s:?}");
    let inv = a.inv().unwrap();
    println!("inv00: {:?}", inv[(0, 0)]);
    let t = std::time::Instant::now();
    let n = 600;
    let big = Array2::<c64>::from_shape_fn((n, n), |(i, j)| c64::new((i * 7 % 13) as f64 - 6.0, (j * 5 % 11) as f64 - 5.0) / 10.0);
    let ev = big.eigvals().unwrap();
    println!("n={} eigvals in {:?}, first={:?}", n, t.elapsed(), ev[0]);
}
