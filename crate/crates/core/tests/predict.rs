use tensql_testkit::predict::check_trees;

#[test]
fn gemm_trees_match_walking() {
    check_trees(100, 1000, 6, 0x5452_4545).unwrap();
}

#[test]
fn stumps_and_single_leaves() {
    check_trees(50, 200, 1, 11).unwrap();
    check_trees(20, 50, 0, 12).unwrap();
}
