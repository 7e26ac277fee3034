use kec::config::TrainConfig;
use kec::train::*;
use kec::Error;
use kec_core::knowledge::KnowledgeStore;
use kec_core::model::Model;
use kec_core::synth::{synth_corpus, SynthData};

fn cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        model: kec::toy_config(8, 2),
        epochs,
        batch_size: 2,
        accum_steps: 2,
        lr: 1e-2,
        weight_decay: 0.0,
        seeds: vec![0, 1],
        ..TrainConfig::default()
    }
}

fn data(seed: u64) -> SynthData {
    synth_corpus(12, 5, seed, true).unwrap()
}

fn dataset(d: &SynthData, c: &TrainConfig) -> Dataset {
    prepare(&d.corpus, Some(&d.knowledge), &d.lexicon, &c.model).unwrap()
}

fn field(line: &str, key: &str) -> f64 {
    line.split(' ')
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from {line}"))
        .parse()
        .unwrap()
}

#[test]
fn zero_epochs_keeps_initial_model() {
    let c = cfg(0);
    let d = data(1);
    let ds = dataset(&d, &c);
    let run = train_seed(&c, 3, &ds, Some(&ds), None, &mut |_| {}).unwrap();
    assert!(run.log.is_empty());
    assert_eq!(run.best.epoch, 0);
    assert_eq!(run.best.optimizer.as_ref().unwrap().step, 0);
    assert_eq!(run.best.model, Model::new(c.model.clone(), 3).unwrap());
}

#[test]
fn best_dev_checkpoint_is_selected() {
    let c = cfg(4);
    let d = data(2);
    let ds = dataset(&d, &c);
    let dev_data = synth_corpus(6, 5, 77, true).unwrap();
    let dev = dataset(&dev_data, &c);
    let mut seen = Vec::new();
    let run = train_seed(&c, 0, &ds, Some(&dev), None, &mut |l| seen.push(l.to_string())).unwrap();
    assert_eq!(seen, run.log);
    assert_eq!(run.log.len(), 4);
    let scores: Vec<f64> = run.log.iter().map(|l| field(l, "dev_macro_f1")).collect();
    let best = scores.iter().cloned().fold(f64::MIN, f64::max);
    let first_best = scores.iter().position(|&s| s == best).unwrap() + 1;
    assert_eq!(run.best.epoch, first_best);
    let rescored = evaluate(&run.best.model, &dev).unwrap().report;
    assert_eq!(Some(rescored), run.best_dev);
}

#[test]
fn no_dev_keeps_final_model() {
    let c = cfg(2);
    let d = data(3);
    let ds = dataset(&d, &c);
    let run = train_seed(&c, 0, &ds, None, None, &mut |_| {}).unwrap();
    assert_eq!(run.best.epoch, 2);
    assert!(run.best_dev.is_none());
    let steps = field(&run.log[1], "steps") as usize;
    assert_eq!(steps, 2 * ds.len().div_ceil(c.effective_batch()));
}

#[test]
fn identical_seeds_identical_runs() {
    let mut c = cfg(3);
    c.model.dropout = 0.3;
    let d = data(4);
    let ds = dataset(&d, &c);
    let a = train_all(&c, &ds, Some(&ds), Some(&ds), None, &mut |_| {}).unwrap();
    let b = train_all(&c, &ds, Some(&ds), Some(&ds), None, &mut |_| {}).unwrap();
    assert_eq!(a, b);
    assert_ne!(a[0].run.log, a[1].run.log);
}

#[test]
fn evaluation_does_not_touch_the_model() {
    let c = cfg(1);
    let d = data(5);
    let ds = dataset(&d, &c);
    let m = Model::new(c.model.clone(), 2).unwrap();
    let before = m.clone();
    let e1 = evaluate(&m, &ds).unwrap();
    let e2 = evaluate(&m, &ds).unwrap();
    assert_eq!(e1, e2);
    assert_eq!(m, before);
    assert_eq!(e1.probs.iter().map(Vec::len).sum::<usize>(), ds.pair_count());
    let se_de = analyze(&m, &ds).unwrap();
    let positives = ds.labels.iter().flatten().filter(|&&y| y == 1.0).count();
    assert_eq!(se_de.total_positives(), positives);
}

#[test]
fn non_finite_loss_aborts() {
    let c = cfg(1);
    let d = data(6);
    let ds = dataset(&d, &c);
    let mut t = Trainer::new(&c, 0, &ds, None).unwrap();
    let id = t.model.params.ids().next().unwrap();
    t.model.params.get_mut(id).data_mut().fill(f64::NAN);
    match t.run_epoch() {
        Err(Error::NonFinite { seed: 0, epoch: 1, step: 0, conv_id }) => {
            assert!(d.corpus.iter().any(|c| c.id() == conv_id));
        }
        other => panic!("expected a non-finite error, got {other:?}"),
    }
}

#[test]
fn knowledge_requirements() {
    let c = cfg(1);
    let d = data(7);
    assert!(prepare(&d.corpus, None, &d.lexicon, &c.model).is_err());
    let empty = KnowledgeStore::new();
    let err = prepare(&d.corpus, Some(&empty), &d.lexicon, &c.model).unwrap_err();
    assert!(err.to_string().contains(d.corpus[0].utterances()[0].id.as_str()), "{err}");
    let mut no_csk = c.model.clone();
    no_csk.use_csk = false;
    assert_eq!(prepare(&d.corpus, None, &d.lexicon, &no_csk).unwrap().len(), d.corpus.len());
}

#[test]
fn accumulation_matches_large_batch() {
    let d = data(8);
    let small = TrainConfig { batch_size: 2, accum_steps: 3, ..cfg(1) };
    let large = TrainConfig { batch_size: 6, accum_steps: 1, ..cfg(1) };
    let ds = dataset(&d, &small);
    let members = [5, 0, 3, 9, 1, 7];
    let (la, ga) = Trainer::new(&small, 1, &ds, None).unwrap().step_gradients(&members).unwrap();
    let (lb, gb) = Trainer::new(&large, 1, &ds, None).unwrap().step_gradients(&members).unwrap();
    assert!((la - lb).abs() < 1e-12);
    let mut diff = ga.clone();
    diff.scale(-1.0);
    diff.add_assign(&gb);
    assert!(diff.norm() < 1e-12);
}

fn sweep_inputs(d: &SynthData) -> SweepInputs<'_> {
    SweepInputs {
        train: &d.corpus,
        dev: &d.corpus,
        knowledge: Some(&d.knowledge),
        lexicon: &d.lexicon,
        embeddings: None,
    }
}

#[test]
fn sweep_validation_and_rows() {
    let c = TrainConfig { seeds: vec![0], ..cfg(1) };
    let d = data(9);
    let inputs = sweep_inputs(&d);
    assert!(sweep_window(&c, &[2, 2], &inputs, &mut |_| {}).is_err());
    assert!(sweep_window(&c, &[0], &inputs, &mut |_| {}).is_err());
    let one = sweep_window(&c, &[2], &inputs, &mut |_| {}).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].window, 2);
    assert_eq!(one[0].macro_f1.std, 0.0);

    let mut lines = Vec::new();
    let rows = sweep_window(&c, &[1, 2, 4], &inputs, &mut |l| lines.push(l.to_string())).unwrap();
    assert_eq!(rows.iter().map(|r| r.window).collect::<Vec<_>>(), [1, 2, 4]);
    assert!(lines.iter().all(|l| l.starts_with("window=")));
    let again = sweep_window(&c, &[1, 2, 4], &inputs, &mut |_| {}).unwrap();
    assert_eq!(rows, again);
}
