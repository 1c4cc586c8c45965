//! The bundled CSV fixtures must match what the generator produces.
//! Run with GAMETTE_BLESS=1 to rewrite them.

use std::path::PathBuf;

use gamette_core::analysis::{synthetic, write_coded_comments, write_players, CodedComment, PlayerRecord};

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn render(players: &[PlayerRecord], comments: &[CodedComment]) -> (String, String) {
    let mut p = Vec::new();
    write_players(&mut p, players).unwrap();
    let mut c = Vec::new();
    write_coded_comments(&mut c, comments).unwrap();
    (String::from_utf8(p).unwrap(), String::from_utf8(c).unwrap())
}

fn check(name: &str, want: &str) {
    let path = dir().join(name);
    if std::env::var_os("GAMETTE_BLESS").is_some() {
        std::fs::write(&path, want).unwrap();
        return;
    }
    let have = std::fs::read_to_string(&path).unwrap_or_default();
    assert!(have == want, "{} is stale; regenerate with GAMETTE_BLESS=1 cargo test --test fixtures", path.display());
}

#[test]
fn fixtures_are_current() {
    let (p, c) = synthetic::study1();
    let (p, c) = render(&p, &c);
    check("study1_players.csv", &p);
    check("study1_comments.csv", &c);
    let (p, c) = synthetic::study2();
    let (p, c) = render(&p, &c);
    check("study2_players.csv", &p);
    check("study2_comments.csv", &c);
}
