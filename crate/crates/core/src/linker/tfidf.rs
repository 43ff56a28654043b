use std::collections::{BTreeMap, BTreeSet};

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been", "behind", "but", "by",
    "can", "did", "do", "for", "from", "had", "has", "have", "he", "her", "his", "in", "into", "is", "it", "its",
    "of", "on", "or", "our", "she", "so", "than", "that", "the", "their", "them", "then", "there", "these", "they",
    "this", "those", "to", "was", "we", "were", "which", "who", "will", "with", "would",
];

/// Lowercased alphanumeric words of two or more chars, minus stopwords.
pub fn terms(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.chars().count() >= 2)
        .map(str::to_lowercase)
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .collect()
}

/// tf-idf weights over a small collection, with smoothed
/// `idf = ln((1 + N) / (1 + df)) + 1`.
pub struct TfIdf {
    idf: BTreeMap<String, f64>,
    n_docs: usize,
}

impl TfIdf {
    pub fn fit<S: AsRef<str>>(docs: &[S]) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for d in docs {
            let uniq: BTreeSet<String> = terms(d.as_ref()).into_iter().collect();
            for t in uniq {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let n = docs.len();
        let idf = df
            .into_iter()
            .map(|(t, c)| (t, ((1.0 + n as f64) / (1.0 + c as f64)).ln() + 1.0))
            .collect();
        TfIdf { idf, n_docs: n }
    }

    pub fn vector(&self, text: &str) -> BTreeMap<String, f64> {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for t in terms(text) {
            *tf.entry(t).or_insert(0.0) += 1.0;
        }
        let unseen = ((1.0 + self.n_docs as f64) / 1.0).ln() + 1.0;
        for (t, w) in tf.iter_mut() {
            *w *= self.idf.get(t).copied().unwrap_or(unseen);
        }
        tf
    }
}

pub fn cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let dot: f64 = a.iter().filter_map(|(t, x)| b.get(t).map(|y| x * y)).sum();
    let na: f64 = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
