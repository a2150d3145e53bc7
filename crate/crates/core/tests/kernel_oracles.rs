use tensql_testkit::kernels::{kernel_trials, KERNELS};

const TRIALS: usize = 200;

fn run(kernel: &str) {
    let seed = 0x4B45_524E ^ KERNELS.iter().position(|k| *k == kernel).unwrap() as u64;
    if let Err(e) = kernel_trials(kernel, TRIALS, seed) {
        panic!("{e}");
    }
}

macro_rules! kernel_tests {
    ($($name:ident),*) => {
        $(
            #[test]
            fn $name() {
                run(stringify!($name));
            }
        )*
    };
}

kernel_tests!(
    compare,
    arith,
    logical,
    select_where,
    prefix_sum_exclusive,
    compact,
    argsort_stable,
    gather,
    searchsorted,
    expand_segments,
    segment_starts,
    segmented_reduce,
    matmul,
    substring_match
);

#[test]
fn every_kernel_has_a_test() {
    assert_eq!(KERNELS.len(), 14);
}
