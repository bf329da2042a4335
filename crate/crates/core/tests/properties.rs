//! Invariants checked over generated inputs.

mod common;

use lexiscope_core::analysis::tsne::{Tsne, TsneOptions};
use lexiscope_core::analysis::{
    build_heatmap, filter_models, nearest_neighbors, sort_heatmap, Constraint, FilterSpec, HeatmapOptions, ModelSummary,
    QueryExpr, SortMode,
};
use lexiscope_core::corpus::{build_vocabulary, discard_probability, subsample_stream};
use lexiscope_core::eval::{analogy_accuracy, triples_score, AnalogyQuestion, LabelStore, MetricReport, Relation, Split, Triple};
use lexiscope_core::hyper::HyperParams;
use lexiscope_core::sweep::{expand, SweepConfig};
use lexiscope_core::trainer::EmbeddingModel;
use proptest::prelude::*;

fn rows_strategy(n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f32>>> {
    prop::collection::vec(prop::collection::vec(-1.0f32..1.0, dim), n)
        .prop_filter("non-zero rows", |rows| rows.iter().all(|r| r.iter().any(|x| x.abs() > 1e-3)))
}

fn words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

fn all_triples(n: usize) -> Vec<Triple> {
    let mut out = Vec::new();
    for a in 0..n.min(4) {
        for s in 0..n {
            for t in 0..n {
                if a != s && s != t && a != t {
                    out.push(Triple::new(&format!("w{a}"), &format!("w{s}"), &format!("w{t}"), Split::Train).unwrap());
                }
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn f_t_ignores_positive_scaling(rows in rows_strategy(5, 4), exps in prop::collection::vec(-4i32..4, 5)) {
        let m = EmbeddingModel::from_rows("m", &words(5), &rows).unwrap();
        // Powers of two scale exactly, so the score must not move at all.
        let scaled: Vec<Vec<f32>> = rows.iter().zip(&exps).map(|(r, &e)| r.iter().map(|x| x * 2f32.powi(e)).collect()).collect();
        let s = EmbeddingModel::from_rows("s", &words(5), &scaled).unwrap();
        let t = all_triples(5);
        let a = triples_score(&m, &t).unwrap().value;
        let b = triples_score(&s, &t).unwrap().value;
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((-2.0..=2.0).contains(&a));
    }

    #[test]
    fn f_t_negates_when_swapped(rows in rows_strategy(5, 3)) {
        let m = EmbeddingModel::from_rows("m", &words(5), &rows).unwrap();
        let t = all_triples(5);
        let swapped: Vec<Triple> = t.iter().map(|t| Triple::new(&t.anchor, &t.antonym, &t.synonym, t.split).unwrap()).collect();
        prop_assert_eq!(triples_score(&m, &t).unwrap().value, -triples_score(&m, &swapped).unwrap().value);
    }

    #[test]
    fn analogy_survives_rotation(rows in rows_strategy(6, 3), axis in prop::array::uniform3(-1.0f64..1.0), angle in 0.1f64..3.0) {
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        prop_assume!(norm > 0.1);
        let k = [axis[0] / norm, axis[1] / norm, axis[2] / norm];
        let (s, c) = angle.sin_cos();
        // Rodrigues rotation.
        let rotate = |v: &[f32]| -> Vec<f32> {
            let v = [v[0] as f64, v[1] as f64, v[2] as f64];
            let kxv = [k[1] * v[2] - k[2] * v[1], k[2] * v[0] - k[0] * v[2], k[0] * v[1] - k[1] * v[0]];
            let kv = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
            (0..3).map(|i| (v[i] * c + kxv[i] * s + k[i] * kv * (1.0 - c)) as f32).collect()
        };
        let m = EmbeddingModel::from_rows("m", &words(6), &rows).unwrap();
        let r = EmbeddingModel::from_rows("r", &words(6), &rows.iter().map(|v| rotate(v)).collect::<Vec<_>>()).unwrap();
        let qs: Vec<AnalogyQuestion> = (0..6).map(|i| AnalogyQuestion {
            a: format!("w{i}"), b: format!("w{}", (i + 1) % 6), c: format!("w{}", (i + 2) % 6), expected: format!("w{}", (i + 3) % 6),
        }).collect();
        let margin_ok = |model: &EmbeddingModel| {
            // Skip inputs whose best and second-best candidates nearly tie.
            qs.iter().all(|q| {
                let t: Vec<f64> = (0..3).map(|d| {
                    let u = |w: &str| { let v = common::row64(model, w); let n = v.iter().map(|x| x * x).sum::<f64>().sqrt(); v[d] / n };
                    u(&q.b) - u(&q.a) + u(&q.c)
                }).collect();
                let mut sims: Vec<f64> = (0..6).map(|i| format!("w{i}")).filter(|w| *w != q.a && *w != q.b && *w != q.c)
                    .map(|w| common::cos64(&t, &common::row64(model, &w))).collect();
                sims.sort_by(|a, b| b.total_cmp(a));
                sims[0] - sims[1] > 1e-4
            })
        };
        prop_assume!(margin_ok(&m));
        prop_assert_eq!(analogy_accuracy(&m, &qs).unwrap().value, analogy_accuracy(&r, &qs).unwrap().value);
    }

    #[test]
    fn neighbors_ignore_stored_scale(rows in rows_strategy(8, 4), which in 0usize..8, e in -3i32..4) {
        let m = EmbeddingModel::from_rows("m", &words(8), &rows).unwrap();
        let mut scaled = rows.clone();
        scaled[which].iter_mut().for_each(|x| *x *= 2f32.powi(e));
        let s = EmbeddingModel::from_rows("s", &words(8), &scaled).unwrap();
        let q = QueryExpr::single("w0");
        let a: Vec<String> = nearest_neighbors(&m, &q, 7).unwrap().into_iter().map(|n| n.word).collect();
        let b: Vec<String> = nearest_neighbors(&s, &q, 7).unwrap().into_iter().map(|n| n.word).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn heatmap_sorts_are_permutations(seed in 0u64..1000, mode in 0usize..4) {
        let models: Vec<EmbeddingModel> = (0..4).map(|i| common::random_model(&format!("m{i}"), 12, 4, seed * 7 + i)).collect();
        let refs: Vec<&EmbeddingModel> = models.iter().collect();
        let view = build_heatmap(&refs, &QueryExpr::single("w1"), &HeatmapOptions { k: 5, ..HeatmapOptions::default() }).unwrap();
        let pop: Vec<ModelSummary> = models.iter().enumerate().map(|(i, m)| {
            let mut metrics = MetricReport::default();
            metrics.scores.insert("f_T".into(), ((seed + i as u64 * 13) % 7) as f64);
            ModelSummary { model_id: m.model_id.clone(), hyper: HyperParams { window: (seed as usize + i) % 3 + 1, ..HyperParams::default() }, metrics }
        }).collect();
        let mode = [SortMode::Loading, SortMode::Cluster, SortMode::Hyperparameter("window".into()), SortMode::Metric("f_T".into())][mode].clone();
        let sorted = sort_heatmap(&view, &mode, &pop).unwrap();
        // Each row keeps its own cells (as a word -> value map).
        for (r, id) in sorted.row_models.iter().enumerate() {
            let orig = view.row_models.iter().position(|x| x == id).unwrap();
            for (c, w) in sorted.col_words.iter().enumerate() {
                let oc = view.col_words.iter().position(|x| x == w).unwrap();
                prop_assert_eq!(sorted.cells[r][c], view.cells[orig][oc]);
            }
        }
        let mut a = sorted.row_models.clone();
        a.sort();
        let mut b = view.row_models.clone();
        b.sort();
        prop_assert_eq!(a, b);
        prop_assert_eq!(sort_heatmap(&sorted, &SortMode::Loading, &pop).unwrap().row_models, view.row_models.clone());
    }

    #[test]
    fn tightening_a_filter_never_grows_it(lo in 1usize..8, hi in 1usize..8, shrink in 0usize..3) {
        let pop: Vec<ModelSummary> = (1..=8).map(|w| ModelSummary {
            model_id: format!("m{w}"),
            hyper: HyperParams { window: w, ..HyperParams::default() },
            metrics: MetricReport::default(),
        }).collect();
        let (lo, hi) = (lo.min(hi) as f64, lo.max(hi) as f64);
        let wide = FilterSpec::new().with("window", Constraint::Range { min: lo, max: hi });
        let narrow = FilterSpec::new().with("window", Constraint::Range { min: (lo + shrink as f64).min(hi), max: hi });
        let w = filter_models(&pop, &wide).unwrap();
        let n = filter_models(&pop, &narrow).unwrap();
        prop_assert!(n.iter().all(|id| w.contains(id)));
    }

    #[test]
    fn subsampling_is_deterministic_and_monotone(seed in 0u64..100, t in 1e-4f64..0.5) {
        let text = common::two_topic_corpus(30, 7, seed);
        let vocab = build_vocabulary(&text, 1).unwrap();
        let a = subsample_stream(&vocab, &text, Some(t), seed);
        prop_assert_eq!(&a, &subsample_stream(&vocab, &text, Some(t), seed));
        prop_assert!(a.sentences.iter().flatten().all(|&i| (i as usize) < vocab.len()));
        for i in 0..vocab.len() {
            let f = vocab.frequency(i);
            prop_assert!(discard_probability(f, t / 2.0) >= discard_probability(f, t));
        }
    }

    #[test]
    fn vocabulary_invariants(text in "[a-d ]{0,60}( [A-D]{1,3}){0,10}", min_count in 1u64..4) {
        if let Ok(v) = build_vocabulary(&text, min_count) {
            prop_assert!(v.counts().iter().all(|&c| c >= min_count));
            prop_assert!(v.counts().iter().sum::<u64>() <= v.total_tokens());
            for (i, w) in v.words().iter().enumerate() {
                prop_assert_eq!(v.index_of(w), Some(i));
            }
            prop_assert!(v.counts().windows(2).all(|c| c[0] >= c[1]));
        }
    }

    #[test]
    fn metric_reports_roundtrip_exactly(values in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 1..6)) {
        let mut r = MetricReport::default();
        for (i, v) in values.iter().enumerate() {
            r.scores.insert(format!("m{i}"), *v);
        }
        let back: MetricReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        prop_assert_eq!(back, r);
    }

    #[test]
    fn grid_size_is_the_product(sizes in prop::collection::btree_set(1usize..50, 1..4), windows in prop::collection::btree_set(1usize..9, 1..4)) {
        let json = serde_json::json!({"corpus": "c", "params": {"size": sizes, "window": windows}});
        let config: SweepConfig = serde_json::from_value(json).unwrap();
        let points = expand(&config).unwrap();
        prop_assert_eq!(points.len(), sizes.len() * windows.len());
        let keys: Vec<(usize, usize)> = points.iter().map(|h| (h.size, h.window)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        prop_assert_eq!(keys, sorted);
    }

    #[test]
    fn label_versions_strictly_increase(ops in prop::collection::vec((0usize..5, 0usize..5, any::<bool>(), any::<bool>()), 1..30)) {
        let mut store = LabelStore::new();
        for (a, b, syn, delete) in ops {
            let before = store.version();
            let ok = if delete {
                store.list_labels().first().map(|l| l.id).map(|id| store.delete_label(id).is_ok()).unwrap_or(false)
            } else {
                let rel = if syn { Relation::Synonym } else { Relation::Antonym };
                store.add_label(&format!("x{a}"), &format!("x{b}"), rel, &|_| true).is_ok()
            };
            if ok {
                prop_assert!(store.version() > before);
            } else {
                prop_assert_eq!(store.version(), before);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn tsne_is_finite_and_descends(seed in 0u64..1000) {
        let pts: Vec<Vec<f64>> = (0..12).map(|i| {
            let c = if i < 6 { 0.0 } else { 5.0 };
            vec![c + ((seed + i) as f64 * 0.37).sin(), ((seed * 3 + i) as f64 * 0.91).cos()]
        }).collect();
        let mut t = Tsne::new(&pts, TsneOptions { seed, total_iters: 400, ..TsneOptions::default() }, None).unwrap();
        t.run_until(100);
        let after_exaggeration = t.kl_divergence();
        t.run_to_end();
        prop_assert!(t.layout().iter().all(|p| p[0].is_finite() && p[1].is_finite()));
        prop_assert!(t.kl_divergence() <= after_exaggeration);
    }
}
