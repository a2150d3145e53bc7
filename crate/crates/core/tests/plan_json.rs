use tensql_testkit::relational::{json_round_trip_suite, optimizer_suite};

#[test]
fn random_plans_round_trip_through_json() {
    json_round_trip_suite(500, 0x4A53_4F4E).unwrap();
}

#[test]
fn optimized_plans_agree_with_unoptimized() {
    let fired = optimizer_suite(200, 0x4F50_5431).unwrap();
    assert!(fired > 50, "rules fired on only {fired} of 200 plans");
}
