use proptest::prelude::*;
use regex::Regex;

use riskdetect::corpus::{Label, Post, UserRecord};
use riskdetect::resources::Resources;
use riskdetect::textprep::{chunk_user, tokenize, ChunkingConfig};

const FIXTURE: [&str; 50] = [
    "I hurt myself.",
    "check https://a.b now",
    "see www.example.org/path?q=1, then reply",
    "@friend_1 are you ok?",
    "don't you think it's late",
    "I can't sleep... again!!",
    "so tired 😢 of everything",
    "family 👨\u{200D}👩\u{200D}👧 dinner tonight",
    "thumbs 👍🏽 up",
    "(https://x.y/z) was the link.",
    "Visit HTTP://CAPS.COM/Page!",
    "numbers like 42 and 3.14 count",
    "email me: someone@example.com",
    "nobody cares about me anymore",
    "It’s fine, I’m fine.",
    "a-b-c hyphen split",
    "under_score words stay",
    "#hashtag and $money",
    "quotes \"inside\" here",
    "tabs\tand\nnewlines",
    "",
    "   ",
    "...",
    "mixed CASE Words",
    "naïve café résumé",
    "l'amour toujours",
    "rock'n'roll forever",
    "end with apostrophe' here",
    "'leading quote",
    "@ alone and @@double",
    "www.short.com.",
    "https://end.com/a).",
    "emoji at end ☀",
    "sun☀️bright",
    "I, me, my, mine, myself",
    "ALL CAPS SHOUTING!!!",
    "semi;colon:separated",
    "brackets [like] {these}",
    "slash/separated/words",
    "percent 100% sure",
    "ellipsis… unicode",
    "dash — long",
    "a.b.c abbreviations",
    "x@y z",
    "ok👍",
    "http://a.b/c?d=e&f=g#h trailing",
    "we're, they've, she'd",
    "multiple   spaces   here",
    "tokens123 mixed456",
    "final sentence here.",
];

fn oracle() -> Regex {
    let emoji = r"[\x{1F000}-\x{1FAFF}\x{2600}-\x{27BF}\x{2B00}-\x{2BFF}\x{2300}-\x{23FF}]";
    let modifier = r"[\x{FE0F}\x{1F3FB}-\x{1F3FF}]";
    let pattern = format!(
        r#"(?i:https?://|www\.)(?:\S*[^\s.,!?;:)\]}}'"])?|@\w+|\w+(?:['’]\w+)*|{emoji}{modifier}*(?:\x{{200D}}{emoji}{modifier}*)*|\S"#
    );
    Regex::new(&pattern).unwrap()
}

#[test]
fn tokenizer_matches_reference_regex() {
    let re = oracle();
    for s in FIXTURE {
        let expect: Vec<&str> = re.find_iter(s).map(|m| m.as_str()).collect();
        let got: Vec<String> = tokenize(s).into_iter().map(|t| t.surface).collect();
        assert_eq!(got, expect, "sentence {s:?}");
    }
}

#[test]
fn url_stays_whole() {
    let t = tokenize("check https://a.b now");
    assert_eq!(t.len(), 3);
    assert_eq!(t[1].surface, "https://a.b");
}

fn user(posts: Vec<String>) -> UserRecord {
    UserRecord {
        user_id: "u".into(),
        label: Label::Risk,
        posts: posts
            .into_iter()
            .enumerate()
            .map(|(i, text)| Post { post_id: i.to_string(), timestamp: i as i64, text })
            .collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn chunking_conserves_tokens(
        posts in prop::collection::vec("[a-z]{1,8}( [a-z]{1,8}){0,40}", 1..6),
        len in 1usize..60,
    ) {
        let res = Resources::bundled().unwrap();
        let u = user(posts);
        let cfg = ChunkingConfig { segment_len: len, lowercase: true };
        let segs = chunk_user(&u, &cfg, &res.preprocessor).unwrap();
        let total: usize = u.posts.iter().map(|p| res.preprocessor.doc_tokens(&p.text, true).len()).sum();
        prop_assert_eq!(segs.iter().map(Vec::len).sum::<usize>(), total);
        if let Some((last, full)) = segs.split_last() {
            prop_assert!(full.iter().all(|s| s.len() == len));
            prop_assert!(!last.is_empty() && last.len() <= len);
        }
    }

    #[test]
    fn tokens_are_non_empty_and_cover_non_space(text in "\\PC{0,80}") {
        let toks = tokenize(&text);
        prop_assert!(toks.iter().all(|t| !t.surface.is_empty()));
        let joined: String = toks.iter().map(|t| t.surface.as_str()).collect();
        let visible: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        prop_assert_eq!(joined, visible);
    }
}
