use std::fs;
use std::path::Path;
use std::process::Command;

use sgnet::harness::{median, train, Settings};

const FIG: &str = "# sent_id = fig\n\
1\tIncome\t_\t_\t_\t_\t2\tnsubj\t_\t_\n\
2\treflects\t_\t_\t_\t_\t0\troot\t_\t_\n\
3\tlower\t_\t_\t_\t_\t5\tamod\t_\t_\n\
4\tcredit\t_\t_\t_\t_\t5\tcompound\t_\t_\n\
5\tlosses\t_\t_\t_\t_\t2\tobj\t_\t_\n\
6\t.\t_\t_\t_\t_\t2\tpunct\t_\t_\n\n";

const SMALL: &str = "steps = 20\nbatch_size = 2\neval_every = 10\neval_examples = 20\n\
d_model = 8\nd_ff = 8\nd_k = 4\nd_q = 4\nd_v = 4\nn_layers = 1\n";

fn sgnet(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sgnet")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn mask_command_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("fig.conllu");
    fs::write(&input, FIG).unwrap();
    for out in ["a", "b"] {
        let o = sgnet(&["--out", p(&dir.path().join(out)), "mask", p(&input), "--special-tokens"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["sentence1.json", "sentence1.rle"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap()
        );
    }
    let json = fs::read_to_string(dir.path().join("a/sentence1.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let row4: Vec<u64> = v["rows"][4].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    assert_eq!(row4, vec![0, 0, 1, 0, 1, 1, 0, 0]);
}

#[test]
fn bad_input_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.conllu");
    fs::write(&input, "1\tx\t_\t_\t_\t_\t1\t_\t_\t_\n").unwrap();
    let o = sgnet(&["--out", p(&dir.path().join("o")), "mask", p(&input)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn train_requires_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = sgnet(&["--out", p(dir.path()), "train"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn train_eval_dump_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, SMALL).unwrap();
    for out in ["a", "b"] {
        let o = sgnet(&["--seed", "4", "--config", p(&cfg), "--out", p(&dir.path().join(out)), "train"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["metrics.jsonl", "checkpoint.sgnet", "eval.json"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let ck = dir.path().join("a/checkpoint.sgnet");
    let o = sgnet(&["--out", p(&dir.path().join("e")), "eval", p(&ck)]);
    assert!(o.status.success());
    assert_eq!(
        fs::read(dir.path().join("e/eval.json")).unwrap(),
        fs::read(dir.path().join("a/eval.json")).unwrap()
    );
    let o = sgnet(&["--out", p(&dir.path().join("d")), "dump-attn", p(&ck), "--example", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dump: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("d/attn_sg.json")).unwrap()).unwrap();
    assert_eq!(dump["head"], 0);
    let o = sgnet(&["--out", p(&dir.path().join("d")), "dump-attn", p(&ck), "--layer", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gradcheck_command_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = sgnet(&["--seed", "2", "--out", p(dir.path()), "gradcheck", "--depth", "layers"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let report = fs::read_to_string(dir.path().join("gradcheck.jsonl")).unwrap();
    assert!(report.lines().count() >= 8);
}

#[test]
fn loss_falls_within_200_steps() {
    let mut first = Vec::new();
    let mut later = Vec::new();
    for seed in 1..=5 {
        let mut s = Settings::default().with_seed(seed);
        s.run.steps = 201;
        s.run.eval_examples = 20;
        let report = train(&s).unwrap();
        let losses: Vec<f64> = report
            .metrics
            .lines()
            .filter_map(|l| serde_json::from_str::<serde_json::Value>(l).ok()?["loss"].as_f64())
            .collect();
        first.push(losses[0]);
        later.push(losses[200]);
    }
    assert!(median(&later) < median(&first), "{later:?} vs {first:?}");
}
