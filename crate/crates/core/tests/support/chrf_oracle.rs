//! Slow, literal ChrF++ used only to cross-check the library implementation.
//! n-grams are collected as owned strings and matched by linear search.

fn char_grams(text: &str, n: usize) -> Vec<String> {
    let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
    let mut out = Vec::new();
    let mut start = 0;
    while start + n <= chars.len() {
        out.push(chars[start..start + n].iter().collect());
        start += 1;
    }
    out
}

fn word_grams(text: &str, n: usize) -> Vec<String> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut out = Vec::new();
    let mut start = 0;
    while start + n <= words.len() {
        out.push(words[start..start + n].join("\u{1}"));
        start += 1;
    }
    out
}

/// (hyp count, ref count, matches) with each reference n-gram usable once.
fn match_counts(hyp: &[String], reference: &[String]) -> (usize, usize, usize) {
    let mut available: Vec<Option<&String>> = reference.iter().map(Some).collect();
    let mut matches = 0;
    for g in hyp {
        if let Some(slot) = available.iter_mut().find(|s| **s == Some(g)) {
            *slot = None;
            matches += 1;
        }
    }
    (hyp.len(), reference.len(), matches)
}

pub fn oracle_chrf(hyp: &str, reference: &str, char_order: usize, word_order: usize, beta: f64) -> f64 {
    if hyp.trim().is_empty() {
        return 0.0;
    }
    let mut per_order: Vec<(usize, usize, usize)> = Vec::new();
    for n in 1..=char_order {
        per_order.push(match_counts(&char_grams(hyp, n), &char_grams(reference, n)));
    }
    for n in 1..=word_order {
        per_order.push(match_counts(&word_grams(hyp, n), &word_grams(reference, n)));
    }
    let mut total = 0.0;
    let mut used = 0;
    for (h, r, m) in per_order {
        if h == 0 && r == 0 {
            continue;
        }
        used += 1;
        let p = if h == 0 { 0.0 } else { m as f64 / h as f64 };
        let rc = if r == 0 { 0.0 } else { m as f64 / r as f64 };
        if p + rc == 0.0 {
            continue;
        }
        total += (1.0 + beta * beta) * p * rc / (beta * beta * p + rc);
    }
    if used == 0 {
        0.0
    } else {
        100.0 * total / used as f64
    }
}

/// Sentence pairs built from Egyptian Arabic examples (reference, hypothesis).
pub const ARABIC_PAIRS: [(&str, &str); 10] = [
    ("حاسس إني بردان ومعدتي واجعاني جامد.", "حاسس إني بردان ومعدتي واجعاني جامد."),
    ("ممكن أعزمك على العشا في وقت ما؟", "ممكن أعزمك على العشا في يوم؟"),
    ("الحاجة اللي كنت بدوّر عليها.", "الحاجة اللي كنت بدور عليها"),
    ("رحلة رقم ميتين وتمانية، لطوكيو.", "رحلة رقم مئتين وثمانية إلى طوكيو."),
    ("عايز شريط آلة كاتبة.", "أريد شريط آلة كاتبة."),
    ("إيه أقل سن ممكن يعمل ده؟", "ما هو أقل سن لعمل هذا؟"),
    ("ممكن تكلّمني لو لقيت شنطتي؟", "ممكن تكلمني لو لقيت الشنطة بتاعتي؟"),
    (
        "أنا بسأل لو كان فيه ترابيزة جنب الشباك تكون فاضية على الساعة سبعة بليل.",
        "أنا بسأل لو فيه ترابيزة جنب الشباك فاضية الساعة سبعة.",
    ),
    ("ده قدامك هناك، يادوبك قدام مكتب استعلامات السياحة.", "ده قدامك هناك،"),
    ("عمري ما سمعت عن العنوان ده هنا.", "عمري ما سمعت"),
];

/// Corpus score from per-order counts summed over all pairs.
pub fn oracle_corpus_chrf(pairs: &[(&str, &str)], char_order: usize, word_order: usize, beta: f64) -> f64 {
    let orders = char_order + word_order;
    let mut sums = vec![(0usize, 0usize, 0usize); orders];
    for (hyp, reference) in pairs {
        for n in 1..=orders {
            let (h, r) = if n <= char_order {
                (char_grams(hyp, n), char_grams(reference, n))
            } else {
                (word_grams(hyp, n - char_order), word_grams(reference, n - char_order))
            };
            let (a, b, c) = match_counts(&h, &r);
            sums[n - 1].0 += a;
            sums[n - 1].1 += b;
            sums[n - 1].2 += c;
        }
    }
    let b2 = beta * beta;
    let mut total = 0.0;
    let mut used = 0;
    for (h, r, m) in sums {
        if h == 0 && r == 0 {
            continue;
        }
        used += 1;
        let p = if h == 0 { 0.0 } else { m as f64 / h as f64 };
        let rc = if r == 0 { 0.0 } else { m as f64 / r as f64 };
        if p + rc > 0.0 {
            total += (1.0 + b2) * p * rc / (b2 * p + rc);
        }
    }
    if used == 0 {
        0.0
    } else {
        100.0 * total / used as f64
    }
}
