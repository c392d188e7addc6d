//! Handcrafted feature rows: 17 emotion slots, 36 PoS tag counts, the
//! first-person pronoun count, four 3ST dictionary counts and the suicide
//! keyword count.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::container::{ModelContainer, ModelKind, Persist};
use crate::corpus::UserRecord;
use crate::error::{Error, Result};
use crate::lexicons::{emotion_features, tst_features, EmotionBundle, TstDictionaries};
use crate::postagger::{pos_features, TaggerModel, N_TAGS, TAGSET};
use crate::textprep::{tokenize, Preprocessor};

pub const TST_COLUMNS: [&str; 4] = ["tst_gloom_burden", "tst_violence", "tst_hurt", "tst_shame"];

/// How per-post rows become one row per user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserAggregation {
    #[default]
    Mean,
    Sum,
}

pub struct HandcraftedExtractor<'a> {
    pub preprocessor: &'a Preprocessor,
    pub emotions: &'a EmotionBundle,
    pub tst: &'a TstDictionaries,
    pub tagger: &'a TaggerModel,
    pub aggregation: UserAggregation,
}

impl HandcraftedExtractor<'_> {
    pub fn width(&self) -> usize {
        self.emotions.slots().len() + N_TAGS + 1 + TST_COLUMNS.len() + 1
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.emotions.slot_names().iter().map(|n| format!("emo_{n}")).collect();
        names.extend(TAGSET.iter().map(|t| format!("pos_{t}")));
        names.push("first_person".into());
        names.extend(TST_COLUMNS.iter().map(|s| s.to_string()));
        names.push("suicide_keywords".into());
        names
    }

    /// Features of one post. Lexicon matching runs on the lemmatized stream;
    /// tagging and pronoun counting see every token.
    pub fn post_features(&self, text: &str) -> Vec<f64> {
        let raw = tokenize(text);
        let stream = self.preprocessor.preprocess(&raw, false, true);
        let mut row = emotion_features(&stream, self.emotions).values;
        let pos = pos_features(&raw, self.tagger);
        row.extend(pos.tag_counts.iter().map(|&c| f64::from(c)));
        row.push(f64::from(pos.first_person_count));
        let tst = tst_features(&stream, self.tst);
        row.extend(tst.as_array().iter().map(|&c| f64::from(c)));
        row
    }

    pub fn user_features(&self, user: &UserRecord) -> Vec<f64> {
        let mut acc = vec![0.0; self.width()];
        for post in &user.posts {
            for (a, v) in acc.iter_mut().zip(self.post_features(&post.text)) {
                *a += v;
            }
        }
        if self.aggregation == UserAggregation::Mean && !user.posts.is_empty() {
            let n = user.posts.len() as f64;
            acc.iter_mut().for_each(|v| *v /= n);
        }
        acc
    }
}

/// `user_id,label,<columns>` followed by one row per user.
pub fn write_feature_csv<W: Write>(
    columns: &[String],
    rows: &[(String, &str, Vec<f64>)],
    mut out: W,
) -> Result<()> {
    writeln!(out, "user_id,label,{}", columns.join(","))?;
    for (id, label, values) in rows {
        if values.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                got: values.len(),
            });
        }
        let vals: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{id},{label},{}", vals.join(","))?;
    }
    Ok(())
}

/// Per-column standardization fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    /// Constant columns get unit scale.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Scaler> {
        let first = rows.first().ok_or_else(|| Error::Validation("cannot fit a scaler on no rows".into()))?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: r.len() });
            }
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scale = var.into_iter().map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 }).collect();
        Ok(Scaler { mean, scale })
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }
}

impl Persist for Scaler {
    fn to_container(&self) -> Result<ModelContainer> {
        let mut c = ModelContainer::new(ModelKind::Scaler, &self.mean.len())?;
        c.push_f64s("mean", &self.mean);
        c.push_f64s("scale", &self.scale);
        Ok(c)
    }

    fn from_container(c: &ModelContainer) -> Result<Scaler> {
        c.expect_kind(ModelKind::Scaler)?;
        let s = Scaler {
            mean: c.f64s("mean")?,
            scale: c.f64s("scale")?,
        };
        if s.mean.len() != s.scale.len() {
            return Err(Error::Container("scaler blobs differ in length".into()));
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, Post};
    use crate::postagger::{parse_treebank, train_tagger};
    use crate::resources::Resources;

    #[test]
    fn width_is_fifty_nine() {
        let r = Resources::bundled().unwrap();
        let tb = parse_treebank(&r.treebank, "tb").unwrap();
        let tagger = train_tagger(&tb[..50], 1, 0).unwrap();
        let ex = HandcraftedExtractor {
            preprocessor: &r.preprocessor,
            emotions: &r.emotions,
            tst: &r.tst,
            tagger: &tagger,
            aggregation: UserAggregation::Mean,
        };
        assert_eq!(ex.width(), 59);
        assert_eq!(ex.column_names().len(), 59);
        let row = ex.post_features("I feel so hopeless and alone, I am a burden.");
        assert_eq!(row.len(), 59);
        assert_eq!(row[53], 2.0); // first-person: I, I
        let user = UserRecord {
            user_id: "u".into(),
            label: Label::Risk,
            posts: vec![
                Post { post_id: "1".into(), timestamp: 1, text: "I am a burden".into() },
                Post { post_id: "2".into(), timestamp: 2, text: "nice day".into() },
            ],
        };
        let u = ex.user_features(&user);
        let a = ex.post_features("I am a burden");
        let b = ex.post_features("nice day");
        for i in 0..59 {
            assert!((u[i] - (a[i] + b[i]) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scaler_standardizes() {
        let s = Scaler::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        assert_eq!(s.transform(&[1.0, 5.0]), [-1.0, 0.0]);
        let c = s.to_container().unwrap();
        assert_eq!(Scaler::from_container(&c).unwrap(), s);
    }
}
