use fivebrane_cli::document::{parse, parse_bytes, DiagnosticKind};
use proptest::prelude::*;

fn group() -> impl Strategy<Value = String> {
    prop::collection::vec(prop_oneof![Just(0u64), 2u64..9], 1..4).prop_map(|orders| {
        orders
            .iter()
            .map(|&n| {
                if n == 0 {
                    "Z".to_string()
                } else {
                    format!("Z/{n}")
                }
            })
            .collect::<Vec<_>>()
            .join(" + ")
    })
}

fn document() -> impl Strategy<Value = String> {
    (group(), group(), -50i64..50, -50i64..50, any::<bool>()).prop_map(|(h4, h8, a, b, gauge)| {
        let mut s = format!(
            "# generated\n[space X]\ndimension = 10\nH4 = {h4}\nH8 = {h8}\n\n[bundle TX]\nspace = X\nfield = real\n\
             w1 = 0\nw2 = 0\np1 = {a}*h4_1\np2 = {b}*h8_1 + h8_1\n"
        );
        if gauge {
            s.push_str("\n[bundle E]\nspace = X\nfield = complex\nrank = 16\nch2 = h4_1\n");
        }
        s
    })
}

proptest! {
    #[test]
    fn generated_documents_round_trip(text in document()) {
        let doc = parse(&text).unwrap();
        let rendered = doc.render();
        let again = parse(&rendered).unwrap();
        prop_assert_eq!(&again, &doc);
        prop_assert_eq!(again.render(), rendered);
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        if let Err(d) = parse_bytes(&bytes) {
            prop_assert!(d.line >= 1 && d.column >= 1);
        }
    }

    #[test]
    fn truncations_are_positioned(text in document(), cut in 0usize..400) {
        let cut = cut.min(text.len());
        let lines = text[..cut].split('\n').count();
        if let Err(d) = parse(&text[..cut]) {
            prop_assert!(d.line <= lines.max(1), "{} beyond {} lines", d, lines);
        }
    }
}

#[test]
fn degree_mismatch_is_reported() {
    let err = parse("[space X]\ndimension = 8\nH4 = Z<u>\nH8 = Z<v>\n[bundle TX]\nspace = X\nfield = real\np1 = v\n")
        .unwrap_err();
    assert_eq!(err.kind, DiagnosticKind::DegreeMismatch);
    assert_eq!((err.line, err.column), (8, 6));
}
