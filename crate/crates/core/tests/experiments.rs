use std::fs;
use std::path::Path;

use lexmap::experiments::{
    cmd_align, cmd_featurize, cmd_gen_synthetic, cmd_sweep_dict, cmd_sweep_seed_lexicon, cmd_union, RunConfig,
    SweepKind,
};

fn config(out: &Path) -> RunConfig {
    RunConfig {
        out: out.to_path_buf(),
        ..RunConfig::default()
    }
}

#[test]
fn identity_alignment_has_zero_residual() {
    let tmp = tempfile::tempdir().unwrap();
    let emb = tmp.path().join("e.vec");
    fs::write(&emb, "3 2\na 1 0\nb 0 1\nc 1 1\n").unwrap();
    let dict = tmp.path().join("d.tsv");
    fs::write(&dict, "a\ta\nb\tb\nc\tc\nzz\tc\n").unwrap();
    let out = cmd_align(&RunConfig {
        src_emb: Some(emb.clone()),
        tgt_emb: Some(emb),
        dict: Some(dict),
        ..config(tmp.path())
    })
    .unwrap();
    assert!(out.map.mean_squared_residual() < 1e-28);
    assert_eq!(out.skipped, 1);
    let kv = fs::read_to_string(out.run_dir.join("align.kv")).unwrap();
    assert!(kv.contains("skipped=1\n"));
}

#[test]
fn seed_lexicon_accuracy_grows_with_seed_size() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cmd_sweep_seed_lexicon(&RunConfig {
        synthetic: true,
        counts: vec![500, 50],
        ..config(tmp.path())
    })
    .unwrap();
    let c = &out.curve;
    assert_eq!(c.kind, SweepKind::SeedLexicon);
    assert!(c.is_well_formed());
    assert_eq!(c.points.iter().map(|p| p.runs).collect::<Vec<_>>(), vec![5, 5]);
    assert!(c.score_at(500).unwrap() >= c.score_at(50).unwrap());
    assert!(out.run_dir.join("points").join("x50-run4").join("result.kv").exists());
}

#[test]
fn file_mode_sweeps_clamp_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let files = cmd_gen_synthetic(&RunConfig {
        preset: "retrieval".into(),
        ..config(tmp.path())
    })
    .unwrap();
    assert!(files.train.is_none());

    let dict = cmd_sweep_dict(&RunConfig {
        src_emb: Some(files.src_emb.clone()),
        tgt_emb: Some(files.tgt_emb.clone()),
        dict: Some(files.dict.clone()),
        heldout: Some(files.heldout.clone()),
        sizes: vec![900, 100, 9000],
        ..config(tmp.path())
    })
    .unwrap();
    let xs: Vec<usize> = dict.curve.points.iter().map(|p| p.x).collect();
    assert_eq!(xs, vec![100, 500]);
    assert_eq!(dict.curve.clamped, vec![(900, 500), (9000, 500)]);
    assert!(dict.curve.points.iter().all(|p| p.runs == 1 && p.dispersion == 0.0));
    assert_eq!(dict.curve.metric, "precision@1");
    let text = fs::read_to_string(dict.run_dir.join("curve.txt")).unwrap();
    assert!(text.contains("clamped\t900->500,9000->500\n"), "{}", text);

    let single = cmd_sweep_dict(&RunConfig {
        src_emb: Some(files.src_emb.clone()),
        tgt_emb: Some(files.tgt_emb.clone()),
        dict: Some(files.dict.clone()),
        heldout: Some(files.heldout.clone()),
        sizes: vec![200],
        ..config(tmp.path())
    })
    .unwrap();
    assert_eq!(single.curve.points.len(), 1);

    let seed = cmd_sweep_seed_lexicon(&RunConfig {
        src_emb: Some(files.src_emb.clone()),
        tgt_emb: Some(files.tgt_emb.clone()),
        gold_pairs: Some(files.lexicon_pairs.clone()),
        lexicons: vec![files.lexicon.clone()],
        counts: vec![60, 150, 400],
        ..config(tmp.path())
    })
    .unwrap();
    let xs: Vec<usize> = seed.curve.points.iter().map(|p| p.x).collect();
    // 200 planted words, one kept back for evaluation
    assert_eq!(xs, vec![60, 150, 199]);
    assert_eq!(seed.curve.metric, "transfer-accuracy");
    assert!(seed.curve.is_well_formed());
}

#[test]
fn macro_f_sweep_with_datasets() {
    let tmp = tempfile::tempdir().unwrap();
    let files = cmd_gen_synthetic(&config(tmp.path())).unwrap();
    let out = cmd_sweep_dict(&RunConfig {
        src_emb: Some(files.src_emb.clone()),
        tgt_emb: Some(files.tgt_emb.clone()),
        dict: Some(files.dict.clone()),
        train: files.train.clone(),
        test: files.test.clone(),
        lexicons: vec![files.lexicon.clone()],
        sizes: vec![30, 1000],
        ..config(tmp.path())
    })
    .unwrap();
    assert_eq!(out.curve.metric, "macro-f");
    let small = out.curve.score_at(30).unwrap();
    let large = out.curve.score_at(1000).unwrap();
    assert!(large > small, "{} vs {}", large, small);
}

#[test]
fn union_and_featurize_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.tsv");
    let b = tmp.path().join("b.tsv");
    fs::write(&a, "good\tpositive\nbad\tnegative\nodd\tpositive\n").unwrap();
    fs::write(&b, "Great\tpositive\nbad\tnegative\nodd\tnegative\n").unwrap();
    let u = cmd_union(&RunConfig {
        lexicons: vec![a.clone(), b.clone()],
        ..config(tmp.path())
    })
    .unwrap();
    assert_eq!(u.conflicts, 1);
    assert_eq!(u.lexicon.words().collect::<Vec<_>>(), vec!["bad", "good", "great"]);
    assert_eq!(u.lexicon.name(), "a+b");

    let train = tmp.path().join("train.tsv");
    let test = tmp.path().join("test.tsv");
    fs::write(
        &train,
        "1\tpositive\tso good :)\n2\tnegative\tbad bad day\n3\tneutral\tjust a day\n",
    )
    .unwrap();
    fs::write(&test, "9\tsomething great #yay\n").unwrap();
    let f = cmd_featurize(&RunConfig {
        train: Some(train),
        test: Some(test),
        lexicons: vec![a, b],
        ..config(tmp.path())
    })
    .unwrap();
    assert_eq!(f.train.len(), 3);
    let test_rows = fs::read_to_string(f.run_dir.join("test.svm")).unwrap();
    assert!(test_rows.starts_with("? "), "{}", test_rows);
    assert!(f.index.get("lex:b:positive").is_some());
    assert!(f.index.get("ng:great").is_none());
}

#[test]
fn duplicate_lexicon_names_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let d1 = tmp.path().join("x");
    let d2 = tmp.path().join("y");
    fs::create_dir_all(&d1).unwrap();
    fs::create_dir_all(&d2).unwrap();
    fs::write(d1.join("lex.tsv"), "a\tpositive\n").unwrap();
    fs::write(d2.join("lex.tsv"), "b\tpositive\n").unwrap();
    let err = cmd_union(&RunConfig {
        lexicons: vec![d1.join("lex.tsv"), d2.join("lex.tsv")],
        ..config(tmp.path())
    })
    .unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
