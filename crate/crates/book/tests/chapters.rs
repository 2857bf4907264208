use std::fs;
use std::path::Path;

#[test]
fn every_chapter_is_compiled() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../book/src");
    let summary = fs::read_to_string(root.join("SUMMARY.md")).unwrap();
    let lib = include_str!("../src/lib.rs");
    let mut count = 0;
    for line in summary.lines() {
        if let Some(start) = line.find("](") {
            let file = &line[start + 2..line.rfind(')').unwrap()];
            assert!(root.join(file).exists(), "{file} is listed but missing");
            assert!(lib.contains(&format!("book/src/{file}")), "{file} is not included in lib.rs");
            count += 1;
        }
    }
    assert!(count >= 8);
}
