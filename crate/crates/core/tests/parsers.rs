use proptest::prelude::*;
use wirestereo::schema::{
    parse_annotations, parse_camera, parse_chain, parse_curve, parse_curves_or_reports, parse_episodes, parse_reports,
};

const SEEDS: &[&str] = &[
    r#"{"P": [[1500, 0, 512, 0], [0, 1500, 512, 0], [0, 0, 1, 300]], "image_size": [1024, 1024]}"#,
    r#"{"degree": 3, "knots": [0, 0, 0, 0, 1, 1, 1, 1], "control_points": [[0, 0, 0], [1, 0, 0], [2, 1, 0], [3, 1, 1]]}"#,
    r#"{"frame": 0, "camera": "A", "points": [[10, 20], [30, 40], [50, 45]]}"#,
    r#"[{"frame": 0, "camera": "A", "points": [[10, 20], [30, 40]]}, {"frame": 0, "camera": "B", "points": [[1, 2], [3, 4]]}]"#,
    r#"{"tip": [0, 0, 0], "r": 2.0, "offsets": [[0.1, 0.2], [1.5, -3.0]]}"#,
    r#"{"tip": [[0, 0, 0], [1, 0, 0]], "forces": [[0, 0, 0], [3, 4, 0]], "goal": [1, 0, 0], "success": true}"#,
    r#"{"frame": 3, "accepted": true, "mean_reproj_px": 0.25, "curve": {"degree": 1, "knots": [0, 0, 1, 1], "control_points": [[0, 0, 0], [1, 1, 1]]}}"#,
];

fn parse_all(text: &str) {
    let _ = parse_camera(text);
    let _ = parse_curve::<2>(text);
    let _ = parse_curve::<3>(text);
    let _ = parse_annotations(text);
    let _ = parse_chain(text);
    let _ = parse_episodes(text);
    let _ = parse_reports(text);
    let _ = parse_curves_or_reports(text);
}

#[test]
fn seeds_parse_with_their_own_parser() {
    assert!(parse_camera(SEEDS[0]).is_ok());
    assert!(parse_curve::<3>(SEEDS[1]).is_ok());
    assert!(parse_curve::<2>(SEEDS[1]).is_err());
    assert_eq!(parse_annotations(SEEDS[2]).unwrap().len(), 1);
    assert_eq!(parse_annotations(SEEDS[3]).unwrap().len(), 2);
    assert_eq!(parse_chain(SEEDS[4]).unwrap().offsets.len(), 2);
    assert_eq!(parse_episodes(SEEDS[5]).unwrap().len(), 1);
    assert_eq!(parse_reports(SEEDS[6]).unwrap()[0].0.frame, 3);
    assert_eq!(parse_curves_or_reports(SEEDS[6]).unwrap().len(), 1);
    assert_eq!(parse_curves_or_reports(SEEDS[1]).unwrap().len(), 1);
}

#[test]
fn hostile_values_are_errors() {
    for text in [
        r#"{"degree": 99999999999, "knots": [0, 1], "control_points": [[0, 0, 0]]}"#,
        r#"{"degree": 3, "knots": [1, 0, 0, 0, 1, 1, 1, 1], "control_points": [[0, 0, 0], [1, 0, 0], [2, 1, 0], [3, 1, 1]]}"#,
        r#"{"degree": 0, "knots": [], "control_points": []}"#,
        r#"{"tip": [0, 0, 0], "r": -1, "offsets": []}"#,
        r#"{"tip": [0, 0, 0], "r": 1e400, "offsets": []}"#,
        r#"{"P": [[0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]], "image_size": [1, 1]}"#,
        r#"{"frame": 0, "camera": "C", "points": [[1, 2], [3, 4]]}"#,
        r#"{"tip": [], "goal": [0, 0, 0], "success": false}"#,
        r#"[]"#,
        "",
    ] {
        parse_all(text);
        assert!(parse_camera(text).is_err());
        assert!(parse_annotations(text).is_err());
        assert!(parse_chain(text).is_err());
    }
}

fn mutate(seed: &str, edits: &[(usize, u8, u8)]) -> String {
    let mut bytes = seed.as_bytes().to_vec();
    for &(pos, kind, byte) in edits {
        if bytes.is_empty() {
            break;
        }
        let i = pos % bytes.len();
        const ALPHABET: &[u8] = b"0123456789-.eE,[]{}\":truefalsn ";
        let b = ALPHABET[byte as usize % ALPHABET.len()];
        match kind % 3 {
            0 => bytes[i] = b,
            1 => {
                bytes.remove(i);
            }
            _ => bytes.insert(i, b),
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn arbitrary_text_never_panics(text in ".{0,200}") {
        parse_all(&text);
    }

    #[test]
    fn mutated_documents_never_panic(
        seed in 0..SEEDS.len(),
        edits in prop::collection::vec((any::<usize>(), any::<u8>(), any::<u8>()), 1..8),
    ) {
        parse_all(&mutate(SEEDS[seed], &edits));
    }
}

#[test]
fn fuzz_corpus_seeds_are_valid() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    let mut checked = 0;
    for target in std::fs::read_dir(&root).unwrap() {
        let target = target.unwrap();
        let name = target.file_name().into_string().unwrap();
        for seed in std::fs::read_dir(target.path()).unwrap() {
            let path = seed.unwrap().path();
            let text = std::fs::read_to_string(&path).unwrap();
            let ok = match name.as_str() {
                "parse_camera" => parse_camera(&text).is_ok(),
                "parse_curve" => parse_curve::<2>(&text).is_ok() || parse_curve::<3>(&text).is_ok(),
                "parse_annotations" => parse_annotations(&text).is_ok(),
                "parse_chain" => parse_chain(&text).is_ok(),
                "parse_episodes" => parse_episodes(&text).is_ok(),
                "parse_reports" => parse_reports(&text).is_ok(),
                "parse_curves_or_reports" => parse_curves_or_reports(&text).is_ok(),
                other => panic!("unknown fuzz target {other}"),
            };
            assert!(ok, "{}", path.display());
            checked += 1;
        }
    }
    assert!(checked >= 14);
}
