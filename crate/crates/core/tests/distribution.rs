mod common;

use common::{entry, hide_index};
use glossa_core::build_index;
use glossa_core::index::GlossCount;

fn counts(list: &[GlossCount]) -> Vec<(&str, usize)> {
    list.iter().map(|g| (g.gloss.as_str(), g.count)).collect()
}

#[test]
fn hide_fixture_counts_by_hand() {
    let index = hide_index();
    assert_eq!(
        counts(index.distribution("uqʼno")),
        [("hide-PST.UNW", 3), ("hide-PFV.CVB", 2)]
    );
    assert_eq!(
        counts(index.distribution("łiyn")),
        [("end-PFV.CVB", 3), ("end-PST.UNW", 2)]
    );
    assert_eq!(
        counts(index.distribution("roƛik’no")),
        [("IV-let.appear-PFV.CVB", 3), ("IV-pull.out-PFV.CVB", 2)]
    );
    assert_eq!(counts(index.distribution("meča")), [("instead.of", 5)]);
    assert_eq!(
        counts(index.distribution("čuqʼno")),
        [("notice-PST.UNW", 3), ("notice-PFV.CVB", 2)]
    );
    assert_eq!(index.frequency("uqʼno"), 5);
    assert_eq!(index.frequency("łʼebozał"), 0);
}

#[test]
fn sixty_forty_percentages() {
    let index = hide_index();
    assert_eq!(
        index.gloss_distribution("uqʼno"),
        [
            ("hide-PST.UNW".to_string(), 60),
            ("hide-PFV.CVB".to_string(), 40)
        ]
    );
    assert_eq!(
        index.gloss_distribution("łiyn"),
        [
            ("end-PFV.CVB".to_string(), 60),
            ("end-PST.UNW".to_string(), 40)
        ]
    );
    let exact: Vec<f64> = index
        .distribution("uqʼno")
        .iter()
        .map(|g| g.percent)
        .collect();
    assert_eq!(exact, [60.0, 40.0]);
}

#[test]
fn ties_break_lexicographically_and_round_half_up() {
    let index = build_index(&[
        entry("ay ay", "b-X a-X", ""),
        entry("ay ay", "c-X ?", ""),
        entry("bo bo bo bo bo bo bo bo", "x x x x x x x y", ""),
    ]);
    // "?" is not counted
    assert_eq!(
        counts(index.distribution("ay")),
        [("a-X", 1), ("b-X", 1), ("c-X", 1)]
    );
    let pct: Vec<u32> = index
        .gloss_distribution("ay")
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    assert_eq!(pct, [33, 33, 33]);
    // 7/8 = 87.5 and 1/8 = 12.5
    let pct: Vec<u32> = index
        .gloss_distribution("bo")
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    assert_eq!(pct, [88, 13]);
    assert_eq!(index.most_frequent_gloss("bo"), Some("x"));
    assert_eq!(index.most_frequent_gloss("zz"), None);
}

#[test]
fn distribution_sums_to_occurrences() {
    let index = hide_index();
    for word in &index.vocabulary {
        let total: usize = index.distribution(word).iter().map(|g| g.count).sum();
        assert_eq!(total, index.frequency(word), "{word}");
    }
}
