use proptest::prelude::*;

use secmine::ingest::{corpus_stats, export_jsonl, parse_jsonl, parse_stackexchange_xml_str, RawPost, Source};

fn text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 <>&\"'é\\\\/.,-]{0,40}"
}

fn post() -> impl Strategy<Value = RawPost> {
    (
        text(),
        text(),
        prop::collection::vec(text(), 0..3),
        prop::collection::vec("[a-z][a-z0-9#.-]{0,10}", 1..4),
        any::<i64>(),
        prop::sample::select(vec![Source::StackOverflow, Source::SecurityStackExchange]),
    )
        .prop_map(|(title, question_html, answers_html, tags, score, source)| RawPost {
            id: 0,
            source,
            title,
            question_html,
            answers_html,
            tags,
            score,
            created: None,
        })
}

fn posts() -> impl Strategy<Value = Vec<RawPost>> {
    prop::collection::vec(post(), 1..20).prop_map(|mut v| {
        for (i, p) in v.iter_mut().enumerate() {
            p.id = i as u64 * 3 + 1;
        }
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jsonl_round_trip(posts in posts()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("posts.jsonl");
        std::fs::write(&path, export_jsonl(&posts).unwrap()).unwrap();
        let back = parse_jsonl(&path).unwrap();
        prop_assert!(back.issues.is_empty());
        prop_assert_eq!(back.posts, posts);
    }

    #[test]
    fn stats_ignore_post_order(posts in posts(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = posts.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(corpus_stats(&posts).unwrap(), corpus_stats(&shuffled).unwrap());
    }

    #[test]
    fn every_answer_is_linked_or_orphaned(
        questions in 1usize..8,
        parents in prop::collection::vec(0u64..12, 0..20),
    ) {
        let mut xml = String::from("<posts>\n");
        for q in 0..questions {
            xml.push_str(&format!(
                "<row Id=\"{}\" PostTypeId=\"1\" Title=\"q{q}\" Body=\"&lt;p&gt;body&lt;/p&gt;\" Tags=\"&lt;php&gt;\" Score=\"0\" />\n",
                q + 1
            ));
        }
        for (i, parent) in parents.iter().enumerate() {
            xml.push_str(&format!(
                "<row Id=\"{}\" PostTypeId=\"2\" ParentId=\"{parent}\" Body=\"a{i}\" Score=\"1\" />\n",
                100 + i
            ));
        }
        xml.push_str("</posts>\n");
        let out = parse_stackexchange_xml_str(&xml, Source::StackOverflow).unwrap();
        let linked = parents.iter().filter(|&&p| p >= 1 && p <= questions as u64).count();
        prop_assert_eq!(out.linked_answers, linked);
        prop_assert_eq!(out.linked_answers + out.orphan_answers, parents.len());
        let attached: usize = out.posts.iter().map(|p| p.answers_html.len()).sum();
        prop_assert_eq!(attached, linked);
    }
}
