use covdyn::verify::acceptance_suite;

#[test]
fn acceptance_criteria() {
    let results = acceptance_suite(1).expect("acceptance suite runs");
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<usize> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
