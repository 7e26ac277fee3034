use std::path::Path;

use proptest::prelude::*;

use kec::config::{parse_config, parse_model_config, render_config, render_model_config, TrainConfig};
use kec::io::*;
use kec::Error;
use kec_core::corpus::{compute_stats, enumerate_pairs};
use kec_core::knowledge::CskRelation;
use kec_core::model::{LayerConcat, ModelConfig};
use kec_core::sentiment::WordScores;
use kec_core::synth::synth_corpus;

const P: &str = "test.jsonl";

fn path() -> &'static Path {
    Path::new(P)
}

const TWO: &str = r#"{"id":"d1","utterances":[{"id":"d1_1","speaker":"A","emotion":"neutral","text":"I lost my keys ."},{"id":"d1_2","speaker":"B","emotion":"sadness","text":"Oh no , that is bad ."}],"causal_pairs":[[2,1]]}"#;

#[test]
fn empty_corpus() {
    assert!(parse_corpus("", path()).unwrap().is_empty());
    assert!(parse_corpus("\n  \n", path()).unwrap().is_empty());
}

#[test]
fn minimal_record() {
    let corpus = parse_corpus(TWO, path()).unwrap();
    assert_eq!(corpus.len(), 1);
    let c = &corpus[0];
    assert_eq!(c.len(), 2);
    assert_eq!(c.utterances()[1].tokens, ["Oh", "no", ",", "that", "is", "bad", "."]);
    let positives = enumerate_pairs(c).iter().filter(|p| p.label).count();
    assert_eq!(positives, 1);
    let s = compute_stats(&corpus);
    assert_eq!((s.positive_pairs, s.negative_pairs, s.dialogues, s.utterances), (1, 2, 1, 2));
}

fn line_of(err: Error) -> usize {
    match err {
        Error::Parse { line, .. } => line,
        other => panic!("expected a parse error, got {other}"),
    }
}

#[test]
fn corpus_errors_report_lines() {
    let bad_json = format!("{TWO}\n\n{{not json");
    assert_eq!(line_of(parse_corpus(&bad_json, path()).unwrap_err()), 3);
    let future_cause = TWO.replace("[[2,1]]", "[[1,2]]");
    assert_eq!(line_of(parse_corpus(&future_cause, path()).unwrap_err()), 1);
    let neutral_target = TWO.replace("[[2,1]]", "[[1,1]]");
    assert!(parse_corpus(&neutral_target, path()).is_err());
    let dup_pair = TWO.replace("[[2,1]]", "[[2,1],[2,1]]");
    assert!(parse_corpus(&dup_pair, path()).is_err());
    let unknown = TWO.replace("sadness", "joy");
    let msg = parse_corpus(&unknown, path()).unwrap_err().to_string();
    assert!(msg.contains("joy"), "{msg}");
    let empty_text = TWO.replace("I lost my keys .", "  ");
    assert!(parse_corpus(&empty_text, path()).is_err());
    let extra_field = TWO.replace(r#""id":"d1","#, r#""id":"d1","extra":1,"#);
    assert!(parse_corpus(&extra_field, path()).is_err());
}

#[test]
fn duplicate_ids_rejected() {
    let twice = format!("{TWO}\n{TWO}");
    assert!(parse_corpus(&twice, path()).unwrap_err().to_string().contains("duplicate conversation"));
    let other = TWO.replace(r#""id":"d1","#, r#""id":"d2","#);
    let clash = format!("{TWO}\n{other}");
    assert_eq!(line_of(parse_corpus(&clash, path()).unwrap_err()), 2);
}

#[test]
fn lexicon_format() {
    let lex = parse_lexicon("", path()).unwrap();
    assert_eq!(lex.lookup("anything"), WordScores::UNKNOWN);
    let lex = parse_lexicon("# header\ngood\t0.6\t0.0\t0.4\n\nBad\t0\t0.5\t0.5\n", path()).unwrap();
    assert_eq!(lex.lookup("good"), WordScores { pos: 0.6, neg: 0.0, neu: 0.4 });
    assert_eq!(lex.lookup("bad").neg, 0.5);
    let dup = parse_lexicon("good\t0.6\t0\t0.4\ngood\t0.1\t0\t0.9\n", path()).unwrap_err();
    assert!(dup.to_string().contains("good"));
    assert_eq!(line_of(dup), 2);
    assert!(parse_lexicon("good\t-0.1\t0\t1\n", path()).is_err());
    assert!(parse_lexicon("good\t0.1\t0\n", path()).is_err());
    assert!(parse_lexicon("good\tx\t0\t1\n", path()).is_err());
    let back = parse_lexicon(&render_lexicon(&lex), path()).unwrap();
    assert_eq!(back, lex);
}

fn knowledge_line(id: &str, rel: &str, beams: usize) -> String {
    let beams: Vec<String> = (0..beams).map(|k| format!("\"beam {k}\"")).collect();
    format!(r#"{{"utterance_id":"{id}","relation":"{rel}","beams":[{}]}}"#, beams.join(","))
}

#[test]
fn knowledge_format() {
    let short = knowledge_line("d1_1", "xReact", 4);
    let msg = parse_knowledge(&short, path()).unwrap_err().to_string();
    assert!(msg.contains("d1_1") && msg.contains("xReact"), "{msg}");

    let mut text = String::new();
    for id in ["d1_1", "d1_2"] {
        for rel in CskRelation::ALL {
            text.push_str(&knowledge_line(id, rel.as_str(), 5));
            text.push('\n');
        }
    }
    let store = parse_knowledge(&text, path()).unwrap();
    assert_eq!(store.len(), 8);
    store.check_coverage(&parse_corpus(TWO, path()).unwrap()).unwrap();
    assert_eq!(parse_knowledge(&render_knowledge(&store), path()).unwrap(), store);

    let dup = format!("{text}{}", knowledge_line("d1_1", "oEffect", 5));
    assert_eq!(line_of(parse_knowledge(&dup, path()).unwrap_err()), 9);
    assert!(parse_knowledge(&knowledge_line("d1_1", "xWant", 5), path()).is_err());

    let partial: String = text.lines().take(7).map(|l| format!("{l}\n")).collect();
    let gap = parse_knowledge(&partial, path()).unwrap().check_coverage(&parse_corpus(TWO, path()).unwrap());
    assert!(gap.unwrap_err().to_string().contains("d1_2"));
}

#[test]
fn embeddings_format() {
    let text = "{\"key\":\"d1_1\",\"vector\":[0.5,1.0]}\n{\"key\":\"klg:00\",\"vector\":[0,-2]}\n";
    let emb = parse_embeddings(text, path()).unwrap();
    assert_eq!(emb["d1_1"], vec![0.5, 1.0]);
    assert_eq!(parse_embeddings(&render_embeddings(&emb), path()).unwrap(), emb);
    assert!(parse_embeddings("{\"key\":\"a\",\"vector\":[1]}\n{\"key\":\"b\",\"vector\":[1,2]}", path()).is_err());
    assert!(parse_embeddings("{\"key\":\"a\",\"vector\":[1]}\n{\"key\":\"a\",\"vector\":[2]}", path()).is_err());
}

#[test]
fn files_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.jsonl");
    let corpus = parse_corpus(TWO, path()).unwrap();
    save_corpus(&p, &corpus).unwrap();
    assert_eq!(load_corpus(&p).unwrap(), corpus);
    assert!(matches!(load_corpus(&dir.path().join("missing")), Err(Error::Io { .. })));
}

#[test]
fn config_defaults_and_overrides() {
    let cfg = parse_config("").unwrap();
    assert_eq!(cfg, TrainConfig::default());
    assert_eq!((cfg.epochs, cfg.batch_size, cfg.accum_steps), (40, 4, 2));
    assert_eq!((cfg.lr, cfg.weight_decay), (3e-5, 1e-4));
    assert_eq!(cfg.model.layer_concat, LayerConcat::All);

    let cfg = parse_config("# comment\nd_u = 32\nlayer_concat = last\nuse_csk = false\nseeds = 3, 4\n").unwrap();
    assert_eq!(cfg.model.d_u, 32);
    assert_eq!(cfg.model.layer_concat, LayerConcat::Last);
    assert!(!cfg.model.use_csk);
    assert_eq!(cfg.seeds, [3, 4]);
    assert_eq!(parse_config(&render_config(&cfg)).unwrap(), cfg);

    for bad in ["nonsense = 1", "d_u = -1", "d_u", "dropout = 1.5", "seeds = ", "use_csk = maybe", "batch_size = 0"] {
        assert!(parse_config(bad).is_err(), "{bad}");
    }
    let m = ModelConfig { w_c: 3, direct_add_variant: true, ..ModelConfig::default() };
    assert_eq!(parse_model_config(&render_model_config(&m)).unwrap(), m);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn corpus_round_trip(seed in 0u64..1000, n in 1usize..6, max_len in 2usize..9, plant in any::<bool>()) {
        let data = synth_corpus(n, max_len, seed, plant).unwrap();
        let text = render_corpus(&data.corpus);
        prop_assert_eq!(parse_corpus(&text, path()).unwrap(), data.corpus);
        let k = parse_knowledge(&render_knowledge(&data.knowledge), path()).unwrap();
        prop_assert_eq!(k, data.knowledge);
        prop_assert_eq!(parse_lexicon(&render_lexicon(&data.lexicon), path()).unwrap(), data.lexicon);
    }
}
