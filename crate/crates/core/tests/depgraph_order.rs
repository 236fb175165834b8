mod props;

#[test]
fn random_graphs_are_ordered_bottom_up_with_minimal_cycle_breaking() {
    assert_eq!(props::dependency_order(200, 7), Ok(200));
}

#[test]
fn other_seeds_hold_too() {
    for seed in [1, 2, 3] {
        assert_eq!(props::dependency_order(100, seed), Ok(100));
    }
}
