use std::collections::BTreeSet;

use proptest::prelude::*;

use deepsurf::form_model::{parse_forms, query_pairs, url_for};
use deepsurf::semantics::{detect_range_pairs, NamePatterns};
use deepsurf::simulator::{generate_site, SiteKind, SiteSpec};
use deepsurf::surfacer::{estimate_result_count, signature};
use deepsurf::Binding;

const FORM: &str = r#"<form action="/s"><input name="q"><input name="zip">
<select name="make"><option>ford</option><option>honda</option></select></form>"#;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn url_for_is_injective(a in "\\PC{0,10}", b in "\\PC{0,10}", c in "\\PC{0,10}", d in "\\PC{0,10}") {
        let form = &parse_forms(FORM, "http://a.test/")[0];
        let u1 = url_for(form, &Binding::from_pairs([(0, a.as_str()), (1, b.as_str())])).unwrap();
        let u2 = url_for(form, &Binding::from_pairs([(0, c.as_str()), (1, d.as_str())])).unwrap();
        prop_assert_eq!(u1 == u2, a == c && b == d);
        let pairs = query_pairs(&u1).unwrap();
        prop_assert_eq!(&pairs[0], &("q".to_string(), a.clone()));
        prop_assert_eq!(&pairs[1], &("zip".to_string(), b.clone()));
    }

    #[test]
    fn signature_similarity_is_symmetric_and_reflexive(a in "[a-e ]{0,200}", b in "[a-e ]{0,200}") {
        let (pa, pb) = (format!("<p>{a}</p>"), format!("<p>{b}</p>"));
        let (sa, sb) = (signature(&pa), signature(&pb));
        prop_assert_eq!(sa.similarity(&sa), 1.0);
        prop_assert_eq!(sa.similarity(&sb), sb.similarity(&sa));
        prop_assert!((0.0..=1.0).contains(&sa.similarity(&sb)));
    }

    #[test]
    fn range_detection_never_pairs_an_input_with_itself(names in proptest::collection::vec("(min|max|from|to|low|high)_?(price|year|x)", 1..6)) {
        let mut html = String::from("<form action=\"/s\">");
        for n in &names {
            html.push_str(&format!("<select name=\"{n}\"><option>1</option><option>2</option></select>"));
        }
        html.push_str("</form>");
        let form = &parse_forms(&html, "http://a.test/")[0];
        for p in detect_range_pairs(form, &NamePatterns::default()) {
            let [x, y] = p.positions();
            prop_assert_ne!(x, y);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn listed_items_and_coverage_monotonicity(seed in 0u64..1000, page in 1usize..15, words in proptest::collection::vec(0usize..200, 1..8)) {
        let site = generate_site(&SiteSpec::new(SiteKind::Search, 120, page, 200, seed)).unwrap();
        let vocab: Vec<String> = site.vocabulary().into_iter().collect();
        let mut urls = Vec::new();
        let mut last = 0.0;
        for w in words {
            let word = &vocab[w % vocab.len()];
            let answer = site.answer_query(&[("q".to_string(), word.clone())]).unwrap();
            prop_assert_eq!(estimate_result_count(&answer.html), answer.matched.len().min(page));
            urls.push(format!("http://x.test/search?q={word}"));
            let cov = site.coverage(&urls).unwrap();
            prop_assert!(cov >= last);
            last = cov;
        }
        let distinct: BTreeSet<u64> = site.records().iter().map(|r| r.id).collect();
        prop_assert_eq!(distinct.len(), site.record_count());
    }
}
