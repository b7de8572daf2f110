use ndarray::Array2;
use pgsc_core::message::*;
use proptest::prelude::*;

fn scada_dataset(rows: &[[f64; 5]]) -> Dataset {
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Dataset::new(Schema::Scada, Array2::from_shape_vec((rows.len(), 5), flat).unwrap(), None).unwrap()
}

/// Rows whose every column spans at least two distinct values.
fn varied_rows() -> impl Strategy<Value = Vec<[f64; 5]>> {
    prop::collection::vec(prop::array::uniform5(0.0f64..1e4), 2..60).prop_map(|mut rows| {
        rows[0] = [0.0; 5];
        rows[1] = [1e4; 5];
        rows
    })
}

#[derive(Clone, Copy, Debug)]
enum Corruption {
    None,
    Negative,
    NonNumeric,
    BadLabel,
    MissingCell,
}

fn corruption() -> impl Strategy<Value = Corruption> {
    prop_oneof![
        4 => Just(Corruption::None),
        1 => Just(Corruption::Negative),
        1 => Just(Corruption::NonNumeric),
        1 => Just(Corruption::BadLabel),
        1 => Just(Corruption::MissingCell),
    ]
}

fn scada_line(values: [f64; 5], label: u8, how: Corruption, column: usize) -> String {
    let mut cells: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    cells.push(label.to_string());
    match how {
        Corruption::None => {}
        Corruption::Negative => cells[column] = format!("-{}", values[column] + 1.0),
        Corruption::NonNumeric => cells[column] = "x1".into(),
        Corruption::BadLabel => cells[5] = "2".into(),
        Corruption::MissingCell => {
            cells.truncate(column.max(1));
        }
    }
    cells.join(",")
}

fn stability_line(tau: f64, stab: f64, how: Corruption, column: usize) -> String {
    let flag = if stab <= 0.0 { "stable" } else { "unstable" };
    let mut cells: Vec<String> = Vec::new();
    cells.extend((0..4).map(|_| tau.to_string()));
    cells.extend(["-1.5", "0.5", "0.5", "0.5"].map(String::from));
    cells.extend((0..4).map(|_| "0.2".to_string()));
    cells.push(stab.to_string());
    cells.push(flag.into());
    match how {
        Corruption::None => {}
        Corruption::Negative => cells[column % 4] = format!("-{tau}"),
        Corruption::NonNumeric => cells[column] = "nan?".into(),
        // The stability flag plays the label's role: contradict the index.
        Corruption::BadLabel => cells[13] = if stab <= 0.0 { "unstable" } else { "stable" }.into(),
        Corruption::MissingCell => cells.truncate(column.max(1)),
    }
    cells.join(",")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn normalization_round_trips(rows in varied_rows(), zscore in any::<bool>()) {
        let ds = scada_dataset(&rows);
        let mode = if zscore { NormMode::Zscore } else { NormMode::MinmaxPm1 };
        let (norm, stats) = normalize(&ds, mode).unwrap();
        let back = denormalize(&norm, &stats).unwrap();
        for (a, b) in ds.features().iter().zip(back.features()) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{} vs {}", a, b);
        }
    }

    #[test]
    fn stratified_split_keeps_label_ratio(
        n in 100usize..600,
        positive in 0.1f64..0.9,
        fraction in 0.5f64..0.9,
        seed in any::<u64>(),
    ) {
        let n_pos = ((n as f64 * positive).round() as usize).clamp(2, n - 2);
        let labels: Vec<u8> = (0..n).map(|i| (i < n_pos) as u8).collect();
        let x = Array2::from_shape_fn((n, 5), |(i, f)| (i * 5 + f) as f64);
        let ds = Dataset::new(Schema::Scada, x, Some(labels)).unwrap();
        let (train, test) = split(&ds, fraction, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), n);
        let ratio = |d: &Dataset| d.labels().unwrap().iter().filter(|&&y| y == 1).count() as f64 / d.len() as f64;
        let overall = n_pos as f64 / n as f64;
        prop_assert!((ratio(&train) - overall).abs() <= 0.02);
        // Whole-row apportionment: a small held-out side can be off by one row per class.
        prop_assert!((ratio(&test) - overall).abs() <= 0.02f64.max(1.0 / test.len() as f64));
    }

    #[test]
    fn scada_loader_rejects_exactly_the_corrupted_rows(
        rows in prop::collection::vec(
            (prop::array::uniform5(0.0f64..1e3), 0u8..2, corruption(), 0usize..5),
            1..40,
        ),
    ) {
        let mut text = String::from("a,b,c,d,e,label\n");
        for &(values, label, how, column) in &rows {
            text.push_str(&scada_line(values, label, how, column));
            text.push('\n');
        }
        let loaded = read_scada_csv(text.as_bytes()).unwrap();
        let expected_bad: Vec<usize> = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| !matches!(r.2, Corruption::None))
            .map(|(i, _)| i + 1)
            .collect();
        let rejected: Vec<usize> = loaded.rejected.iter().map(|r| r.row).collect();
        prop_assert_eq!(rejected, expected_bad);
        let good: Vec<_> = rows.iter().filter(|r| matches!(r.2, Corruption::None)).collect();
        prop_assert_eq!(loaded.dataset.len(), good.len());
        for (k, r) in good.iter().enumerate() {
            prop_assert_eq!(loaded.dataset.features().row(k).to_vec(), r.0.to_vec());
            prop_assert_eq!(loaded.dataset.labels().unwrap()[k], r.1);
        }
    }

    #[test]
    fn stability_loader_rejects_exactly_the_corrupted_rows(
        rows in prop::collection::vec((0.5f64..10.0, -1.0f64..1.0, corruption(), 0usize..13), 1..40),
    ) {
        let mut text = String::from("tau1,tau2,tau3,tau4,p1,p2,p3,p4,g1,g2,g3,g4,stab,stabf\n");
        for &(tau, stab, how, column) in &rows {
            text.push_str(&stability_line(tau, stab, how, column));
            text.push('\n');
        }
        let loaded = read_stability_csv(text.as_bytes()).unwrap();
        let corrupted = |how: Corruption| !matches!(how, Corruption::None);
        let expected_bad: Vec<usize> = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| corrupted(r.2))
            .map(|(i, _)| i + 1)
            .collect();
        let rejected: Vec<usize> = loaded.rejected.iter().map(|r| r.row).collect();
        prop_assert_eq!(rejected, expected_bad);
        prop_assert_eq!(loaded.dataset.len(), rows.iter().filter(|r| !corrupted(r.2)).count());
    }
}
