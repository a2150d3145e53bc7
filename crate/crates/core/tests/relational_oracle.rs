use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tensql_testkit::relational::{check_group_by, check_zipf_join, random_plan_suite};

#[test]
fn random_plans_match_interpreter() {
    let st = random_plan_suite(250, 200, 0x5245_4C31, false).unwrap();
    eprintln!("{st:?}");
    assert!(st.ran > st.plans / 2, "{st:?}");
}

#[test]
fn random_plans_with_extreme_values_match_interpreter() {
    let st = random_plan_suite(250, 200, 0x5245_4C32, true).unwrap();
    eprintln!("{st:?}");
    assert!(st.ran > st.plans / 2 && st.agreed_errors > 0, "{st:?}");
}

#[test]
fn zipf_joins_match_nested_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4A4F_494E);
    let rows: Vec<usize> = (0..50).map(|_| check_zipf_join(&mut rng, 200).unwrap()).collect();
    assert!(rows.contains(&0) && rows.iter().any(|&n| n > 1000), "{rows:?}");
}

#[test]
fn group_by_matches_hash_aggregation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4752_4F55);
    for _ in 0..100 {
        check_group_by(&mut rng, 200).unwrap();
    }
}
