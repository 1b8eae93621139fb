//! Fixed inputs shared by the criterion benches.

use val_core::{gen_synthetic, Dataset, SyntheticSpec};

/// Well-separated Gaussian blobs with `n` points in `dim` dimensions.
pub fn blobs(n: usize, dim: usize, classes: usize) -> Dataset {
    let spec = SyntheticSpec {
        dim,
        ..SyntheticSpec::blobs(classes, n.div_ceil(classes), 8.0, 1.0, 7)
    };
    gen_synthetic(&spec).expect("valid synthetic spec")
}
