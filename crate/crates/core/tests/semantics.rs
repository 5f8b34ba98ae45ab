use std::collections::BTreeSet;

use chartalk_core::chart::{build_chart, ChartDocument, ChartSpec, ChartType, DataPayload, ElementId};
use chartalk_core::ingest::GroupedSeries;
use chartalk_core::semantics::{
    annotate, build_chart_knowledge, format_sig, knowledge_file, knowledge_mismatches, serialize_chart_data,
    KnowledgeFile,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde_json::Value;

fn series(groups: &[(&str, Vec<f64>)]) -> Vec<GroupedSeries> {
    groups
        .iter()
        .map(|(l, v)| GroupedSeries {
            group_label: l.to_string(),
            values: v.clone(),
            unit: None,
        })
        .collect()
}

fn context(doc: &ChartDocument, id: &str) -> String {
    build_chart_knowledge(doc).unwrap().entries[&ElementId::from(id)].clone()
}

#[test]
fn golden_outlier_and_iqr_box() {
    // Type-7 quartiles of this sample are 3 and 7; 100 lies past the upper fence.
    let doc = build_chart(
        &ChartSpec::new(ChartType::Box, "g", "v"),
        &series(&[("A", vec![1.0, 3.0, 3.0, 3.0, 5.0, 7.0, 7.0, 7.0, 100.0])]),
    )
    .unwrap();
    assert_eq!(context(&doc, "g1.outlier1"), "The point shows an outlier at 100.");
    assert_eq!(context(&doc, "g1.box1"), "The box span from 3 to 7, indicating an IQR with 4.");
}

#[test]
fn golden_legend() {
    let doc = build_chart(
        &ChartSpec::new(ChartType::Box, "g", "v"),
        &series(&[("A", vec![1.0, 2.0, 3.0]), ("B", vec![2.0, 3.0, 4.0])]),
    )
    .unwrap();
    assert_eq!(context(&doc, "chart.legend"), "The legend indicates group color coding.");
}

#[test]
fn golden_density_area() {
    let mut spec = ChartSpec::new(ChartType::Density, "g", "v");
    spec.options.bandwidth = Some(1.0);
    let doc = build_chart(&spec, &series(&[("A", vec![-1.0, 0.0, 1.0])])).unwrap();
    assert_eq!(
        context(&doc, "g1.densityArea1"),
        "The area shows a density distribution, spanning from -4 to 4, and has a peak at 0."
    );
}

/// Mixture of unit normals at -1, 0, 1 restricted to [-4, 4], integrated
/// on a fine midpoint grid; returns the equal-tailed interval of mass `m`.
fn mixture_interval(m: f64) -> (f64, f64) {
    let pdf = |x: f64| {
        [-1.0f64, 0.0, 1.0]
            .iter()
            .map(|c| (-(x - c).powi(2) / 2.0).exp())
            .sum::<f64>()
    };
    let n = 400_000;
    let dx = 8.0 / n as f64;
    let mut cdf = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    cdf.push(0.0);
    for i in 0..n {
        acc += pdf(-4.0 + (i as f64 + 0.5) * dx) * dx;
        cdf.push(acc);
    }
    let total = acc;
    let inv = |p: f64| {
        let i = cdf.partition_point(|c| *c < p * total);
        -4.0 + i as f64 * dx
    };
    (inv((1.0 - m) / 2.0), inv((1.0 + m) / 2.0))
}

#[test]
fn golden_truncated_density_area() {
    let mut spec = ChartSpec::new(ChartType::Density, "g", "v");
    spec.options.bandwidth = Some(1.0);
    spec.options.intervals = Some(vec![0.5]);
    let doc = build_chart(&spec, &series(&[("A", vec![-1.0, 0.0, 1.0])])).unwrap();
    let (lo, hi) = mixture_interval(0.5);
    let expected = format!(
        "The area shows a density distribution, with an interval from {} to {}, indicating the central 50% of the distribution.",
        format_sig(lo, 3),
        format_sig(hi, 3)
    );
    assert_eq!(expected, "The area shows a density distribution, with an interval from -0.903 to 0.903, indicating the central 50% of the distribution.");
    assert_eq!(context(&doc, "g1.interval1"), expected);
}

#[test]
fn golden_dot_bin() {
    let values: Vec<f64> = (1..=7).flat_map(|v| [v as f64; 3]).collect();
    let mut spec = ChartSpec::new(ChartType::QuantileDotplot, "g", "v");
    spec.options.k = Some(20);
    spec.options.bin_width = Some(0.5);
    let doc = build_chart(&spec, &series(&[("A", values)])).unwrap();
    assert_eq!(
        context(&doc, "g1.dotBin1"),
        "The dot bin accounts for approximately 0.15 of the total sample, centered at 1.25. \
         It also indicates a one-sided cumulative probability P(X ≤ 1.25) ≈ 0.15 from start."
    );
    assert_eq!(
        context(&doc, "g1.dotBin3"),
        "The dot bin accounts for approximately 0.15 of the total sample, centered at 3.25. \
         It also indicates a one-sided cumulative probability P(X ≤ 3.25) ≈ 0.45 from start."
    );
    assert_eq!(
        context(&doc, "g1.dotBin7"),
        "The dot bin accounts for approximately 0.1 of the total sample, centered at 7. \
         It also indicates a one-sided cumulative probability P(X ≤ 7) ≈ 1 from start."
    );
}

fn random_doc(rng: &mut ChaCha8Rng, t: ChartType) -> ChartDocument {
    let groups = rng.random_range(1..5);
    let data: Vec<(String, Vec<f64>)> = (0..groups)
        .map(|g| {
            let n = rng.random_range(5..60);
            let scale = 10f64.powi(rng.random_range(-2..4));
            let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
            if rng.random_bool(0.5) {
                v.push(scale * 9.0);
            }
            (format!("G{g}"), v)
        })
        .collect();
    let s: Vec<GroupedSeries> = data
        .iter()
        .map(|(l, v)| GroupedSeries {
            group_label: l.clone(),
            values: v.clone(),
            unit: None,
        })
        .collect();
    let mut spec = ChartSpec::new(t, "g", "v");
    if t == ChartType::Density {
        spec.options.intervals = Some(vec![0.5, 0.9]);
    }
    if t == ChartType::QuantileDotplot {
        spec.options.k = Some([5, 20, 50][rng.random_range(0..3)]);
        spec.options.show_interval_bar = Some(true);
    }
    build_chart(&spec, &s).unwrap()
}

/// Numbers a context may legitimately contain: rounded payload values and
/// the derived box width.
fn allowed_numbers(doc: &ChartDocument, id: &ElementId) -> BTreeSet<String> {
    let e = &doc.registry[id];
    let mut raw: Vec<f64> = Vec::new();
    let mut ints: Vec<usize> = Vec::new();
    match &e.data {
        DataPayload::Empty => {}
        DataPayload::Value { v, .. } => raw.push(*v),
        DataPayload::Range { v1, v2, .. } => raw.extend([*v1, *v2, v2 - v1]),
        DataPayload::Density { features, .. } => {
            raw.extend([features.extent.x_start, features.extent.x_end]);
            raw.extend(features.peaks.iter().chain(&features.troughs).map(|p| p.x));
        }
        DataPayload::Interval { interval, features } => {
            raw.extend([interval.lo, interval.hi, features.extent.x_start, features.extent.x_end])
        }
        DataPayload::DotBin { proportion, center, cumulative, .. } => raw.extend([*proportion, *center, *cumulative]),
        DataPayload::Group { summary: s, density, dots, .. } => {
            raw.extend([s.min, s.q1, s.median, s.q3, s.max, s.mean]);
            ints.push(s.n);
            if let Some(f) = density {
                raw.extend([f.extent.x_start, f.extent.x_end]);
                raw.extend(f.peaks.iter().chain(&f.troughs).map(|p| p.x));
            }
            ints.extend(dots);
        }
    }
    raw.iter().map(|v| format_sig(*v, 3)).chain(ints.iter().map(|n| n.to_string())).collect()
}

#[test]
fn contexts_contain_no_fabricated_numbers() {
    let number = Regex::new(r"-?\d+(?:\.\d+)?").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for round in 0..40 {
        let t = [ChartType::Box, ChartType::Density, ChartType::Violin, ChartType::QuantileDotplot][round % 4];
        let doc = random_doc(&mut rng, t);
        let k = build_chart_knowledge(&doc).unwrap();
        for (id, text) in &k.entries {
            let e = &doc.registry[id];
            // Free-text role and label are configuration, not data.
            let mut scrubbed = text.replace("P(X ≤", "");
            if let Some(d) = &e.role_detail {
                scrubbed = scrubbed.replace(d.as_str(), "");
            }
            if let DataPayload::Group { label, .. } = &e.data {
                scrubbed = scrubbed.replace(label.as_str(), "");
            }
            let allowed = allowed_numbers(&doc, id);
            for m in number.find_iter(&scrubbed) {
                assert!(allowed.contains(m.as_str()), "{t} {id}: `{}` in {text:?} not in {allowed:?}", m.as_str());
            }
        }
    }
}

#[test]
fn knowledge_data_and_registry_keys_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for t in [ChartType::Box, ChartType::Density, ChartType::Violin, ChartType::QuantileDotplot] {
        let doc = random_doc(&mut rng, t);
        let k = build_chart_knowledge(&doc).unwrap();
        let d = serialize_chart_data(&doc);
        let reg: Vec<&ElementId> = doc.registry.keys().collect();
        assert_eq!(k.entries.keys().collect::<Vec<_>>(), reg);
        assert_eq!(d.entries.keys().collect::<Vec<_>>(), reg);
        assert!(knowledge_mismatches(&doc, &k).is_empty());
        assert!(!k.chart_level_summary.is_empty());
    }
}

#[test]
fn two_group_box_knowledge_has_thirteen_entries() {
    let doc = build_chart(
        &ChartSpec::new(ChartType::Box, "method", "score"),
        &series(&[("A", (1..=9).map(f64::from).collect()), ("B", vec![2.0, 3.0, 4.0, 5.0, 6.0])]),
    )
    .unwrap();
    let k = build_chart_knowledge(&doc).unwrap();
    assert_eq!(k.entries.len(), 13);
    assert_eq!(k.chart_level_summary, "This box plot shows score for 2 groups of method: A and B.");
    assert_eq!(
        k.entries[&ElementId::from("g1")],
        "The group A has 9 values, with a median of 5, a mean of 5, and an IQR from 3 to 7."
    );
    assert_eq!(k.entries[&ElementId::from("chart.xAxis")], "The x axis indicates the groups of method.");
}

#[test]
fn density_group_entry_mentions_every_peak() {
    let mut v: Vec<f64> = (0..40).map(|i| -10.0 + (i as f64 - 20.0) * 0.05).collect();
    v.extend((0..40).map(|i| 10.0 + (i as f64 - 20.0) * 0.05));
    let doc = build_chart(&ChartSpec::new(ChartType::Density, "g", "v"), &series(&[("A", v)])).unwrap();
    let DataPayload::Group { density: Some(f), .. } = &doc.registry[&ElementId::from("g1")].data else {
        panic!("density group payload")
    };
    assert_eq!(f.peaks.len(), 2);
    let entry = context(&doc, "g1");
    for p in &f.peaks {
        assert!(entry.contains(&format_sig(p.x, 3)), "{entry}");
    }
    assert!(entry.contains("peaks at"), "{entry}");
}

#[test]
fn chart_data_omits_sampled_curves() {
    let mut spec = ChartSpec::new(ChartType::Density, "g", "v");
    spec.options.intervals = Some(vec![0.8]);
    let s = series(&[
        ("A", (0..30).map(|i| (i as f64).sin() * 3.0).collect()),
        ("B", (0..30).map(|i| (i as f64).cos() * 2.0 + 1.0).collect()),
        ("C", (0..30).map(|i| (i as f64 * 0.7).sin() + 4.0).collect()),
    ]);
    let doc = build_chart(&spec, &s).unwrap();
    let data = serialize_chart_data(&doc);
    fn longest_array(v: &Value) -> usize {
        match v {
            Value::Array(a) => a.len().max(a.iter().map(longest_array).max().unwrap_or(0)),
            Value::Object(m) => m.values().map(longest_array).max().unwrap_or(0),
            _ => 0,
        }
    }
    for (id, v) in &data.entries {
        assert!(longest_array(v) < 256, "{id} carries a long array");
    }
    let area = &data.entries[&ElementId::from("g1.densityArea1")];
    assert!(area.get("features").is_some() && area["intervals"].as_array().unwrap().len() == 1);

    let data_size = serde_json::to_string(&data).unwrap().len();
    let grid_size: usize = doc
        .registry
        .values()
        .filter_map(|e| match &e.data {
            DataPayload::Density { grid_x, density_y, .. } => {
                Some(serde_json::to_string(&(grid_x, density_y)).unwrap().len())
            }
            _ => None,
        })
        .sum();
    assert!(data_size < grid_size, "{data_size} >= {grid_size}");
}

#[test]
fn dot_bin_data_round_trips_losslessly() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let doc = random_doc(&mut rng, ChartType::QuantileDotplot);
    let data = serialize_chart_data(&doc);
    let text = serde_json::to_string(&data).unwrap();
    let back: chartalk_core::semantics::ChartData = serde_json::from_str(&text).unwrap();
    assert_eq!(back, data);
    for (id, e) in &doc.registry {
        if let DataPayload::DotBin { proportion, center, cumulative, .. } = &e.data {
            let v = &back.entries[id];
            assert_eq!(v["proportion"].as_f64().unwrap(), *proportion);
            assert_eq!(v["center"].as_f64().unwrap(), *center);
            assert_eq!(v["cumulative"].as_f64().unwrap(), *cumulative);
        }
    }
}

#[test]
fn knowledge_file_round_trips_and_annotates() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let doc = random_doc(&mut rng, ChartType::Violin);
    let file = knowledge_file(&doc).unwrap();
    let text = serde_json::to_string_pretty(&file).unwrap();
    let back: KnowledgeFile = serde_json::from_str(&text).unwrap();
    assert_eq!(back, file);
    assert_eq!(file.id_list, doc.id_list);
    let annotated = annotate(&doc, &file.knowledge);
    assert!(annotated.registry.values().all(|e| !e.context.is_empty()));
    assert_eq!(annotated.svg, doc.svg);
}

#[test]
fn rendering_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let doc = random_doc(&mut rng, ChartType::Density);
    assert_eq!(build_chart_knowledge(&doc).unwrap(), build_chart_knowledge(&doc).unwrap());
}
