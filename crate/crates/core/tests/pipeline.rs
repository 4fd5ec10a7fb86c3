use isoalign::synth::{make_pair, split_gold, SynthSpec};
use isoalign::{
    evaluate_p1, load_vec, procrustes, refine, translate, BilingualDictionary, LoadOptions, Provenance, RefineConfig,
    RetrievalConfig, TranslationMatrix,
};

#[test]
fn files_round_trip_through_alignment() {
    let pair = make_pair(&SynthSpec {
        n: 600,
        d: 12,
        noise_sigma: 0.05,
        seed: 21,
        ..Default::default()
    })
    .unwrap();
    let mut src_buf = Vec::new();
    let mut tgt_buf = Vec::new();
    let mut gold_buf = Vec::new();
    pair.src.write_vec(&mut src_buf).unwrap();
    pair.tgt.write_vec(&mut tgt_buf).unwrap();
    pair.gold.write(&mut gold_buf).unwrap();

    let src = load_vec(src_buf.as_slice(), &LoadOptions::default()).unwrap().space;
    let tgt = load_vec(tgt_buf.as_slice(), &LoadOptions::default()).unwrap().space;
    let gold = BilingualDictionary::read(gold_buf.as_slice(), Provenance::Gold).unwrap();
    assert_eq!(src.vectors(), pair.src.vectors());
    assert_eq!(gold.pairs(), pair.gold.pairs());

    let (train, test) = split_gold(&gold, 0.1, 21).unwrap();
    let w0 = procrustes(&src, &tgt, &train).unwrap().matrix;
    let w = refine(&src, &tgt, &w0, &RefineConfig::default()).unwrap().matrix;
    assert!(w.orthogonality_residual() < 1e-6);

    let mut w_buf = Vec::new();
    w.write(&mut w_buf).unwrap();
    let w_read = TranslationMatrix::read(w_buf.as_slice()).unwrap();
    assert_eq!(w_read, w);

    let t = translate(test.sources(), &src, &tgt, &w_read, &RetrievalConfig::default()).unwrap();
    let report = evaluate_p1(&t, &test).unwrap();
    assert_eq!(report.evaluated, test.len());
    assert!(report.p_at_1 > 0.95, "{}", report.p_at_1);
}
