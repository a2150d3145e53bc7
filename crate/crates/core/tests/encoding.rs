use tensql_testkit::encoding::{check_dates, check_string_order, check_strings, check_table_round_trip};

#[test]
fn dates_match_civil_calendar() {
    check_dates(1000, 1).unwrap();
}

#[test]
fn strings_round_trip() {
    check_strings(300, 2).unwrap();
}

#[test]
fn padded_strings_order_like_bytes() {
    check_string_order(1000, 3).unwrap();
}

#[test]
fn tables_round_trip() {
    check_table_round_trip(1000, 4).unwrap();
}
