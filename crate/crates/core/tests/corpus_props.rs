use std::collections::HashSet;

use proptest::prelude::*;

use riskdetect::corpus::{generate_synthetic, split, Corpus, Label, Post, SplitSpec, SynthConfig, Task, UserRecord};
use riskdetect::resources::Resources;

fn corpus(n_risk: usize, n_control: usize) -> Corpus {
    let users = (0..n_risk + n_control)
        .map(|i| UserRecord {
            user_id: format!("u{i}"),
            label: Label::from_risk(i < n_risk),
            posts: vec![Post { post_id: "p".into(), timestamp: 0, text: "hello".into() }],
        })
        .collect();
    Corpus::new(Task::ThirtyDay, users).unwrap()
}

proptest! {
    #[test]
    fn split_is_a_stratified_partition(n_risk in 2usize..60, n_control in 2usize..60, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let c = corpus(n_risk, n_control);
        let (a, b) = split(&c, SplitSpec { train_fraction: frac, seed }).unwrap();
        let ia: HashSet<&str> = a.users.iter().map(|u| u.user_id.as_str()).collect();
        let ib: HashSet<&str> = b.users.iter().map(|u| u.user_id.as_str()).collect();
        prop_assert!(ia.is_disjoint(&ib));
        prop_assert_eq!(ia.len() + ib.len(), c.len());
        for (label, n) in [(Label::Risk, n_risk), (Label::Control, n_control)] {
            let got = a.count(label) as f64;
            prop_assert!((got - frac * n as f64).abs() <= 1.0);
            prop_assert!(a.count(label) >= 1 && b.count(label) >= 1);
        }
    }
}

#[test]
fn synthetic_corpus_is_reproducible_and_sized() {
    let vocab = Resources::bundled().unwrap().synth_vocabulary();
    let cfg = SynthConfig { n_risk: 7, n_control: 9, seed: 11, ..Default::default() };
    let a = generate_synthetic(&cfg, &vocab).unwrap();
    assert_eq!(a, generate_synthetic(&cfg, &vocab).unwrap());
    assert_eq!((a.count(Label::Risk), a.count(Label::Control)), (7, 9));
    let other = generate_synthetic(&SynthConfig { seed: 12, ..cfg }, &vocab).unwrap();
    assert_ne!(a, other);
}
