use ndarray::{array, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C;

fn main() {
    let a: Array2<C> = array![
        [C::new(1.0, 0.0), C::new(0.0, 1.0)],
        [C::new(0.0, -1.0), C::new(2.0, 0.0)]
    ];
    let (vals, vecs) = a.eigh(UPLO::Lower).unwrap();
    // test columns: a·col_k ?= val_k·col_k
    for k in 0..2 {
        let col = vecs.column(k).to_owned();
        let av = a.dot(&col);
        let dev: f64 = av
            .iter()
            .zip(col.iter())
            .map(|(x, y)| (x - y * C::new(vals[k], 0.0)).norm())
            .sum();
        println!("column {k}: residual {dev:.2e}");
        let row = vecs.row(k).to_owned();
        let av = a.dot(&row);
        let dev: f64 = av
            .iter()
            .zip(row.iter())
            .map(|(x, y)| (x - y * C::new(vals[k], 0.0)).norm())
            .sum();
        println!("row    {k}: residual {dev:.2e}");
    }
}
