mod props;

#[test]
fn votes_are_order_invariant_tie_broken_and_whitespace_blind() {
    assert_eq!(props::majority_vote_properties(1000, 11), Ok(1000));
}
