use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use steer_core::corpus::{
    build_retrieval_index, generate_synthetic_corpus, training_windows, NearestLabelClassifier,
    SyntheticCorpusSpec,
};
use steer_core::diffusion::{
    cosine_schedule, LatentDiffusionGenerator, PcaCodec, PcaFitOptions, RetrievalDenoiser,
};
use steer_core::kinematics::builtin::humanoid29;
use steer_core::primitive::{stream_session, CommandEvent, CommandTimeline};
use steer_core::text::HashedBagOfWords;
use steer_core::{Quat, RawMotionFrame};

#[test]
fn scripted_session_follows_commands() {
    let skel = humanoid29();
    let corpus = generate_synthetic_corpus(&SyntheticCorpusSpec::default(), &skel).unwrap();
    let (windows, labels) = training_windows(&corpus.clips, 2, 8, 1).unwrap();
    let codec = PcaCodec::fit(&windows, 16, PcaFitOptions::default()).unwrap();
    let encoder = HashedBagOfWords::default();
    let index = build_retrieval_index(&windows, &labels, &codec, &encoder).unwrap();
    let classifier = NearestLabelClassifier::new(&windows, &labels).unwrap();
    let gen = LatentDiffusionGenerator::new(
        codec,
        RetrievalDenoiser::new(index).unwrap(),
        encoder,
        cosine_schedule(5).unwrap(),
        5.0,
    )
    .unwrap();
    let ev = |t: f64, s: &str| CommandEvent { time: t, text: s.into() };
    let tl = CommandTimeline::new(
        vec![ev(0.0, "stand"), ev(4.0, "wave left hand"), ev(8.0, "walk")],
        12.0,
    )
    .unwrap();
    let seed = RawMotionFrame::standing([0.0, 0.0, 0.79], Quat::IDENTITY, vec![0.0; 29]);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s = stream_session(&tl, &gen, &seed, 12.0, &mut rng).unwrap();
    let mut hits = 0;
    let mut total = 0;
    for (b, cmd) in s.block_commands.iter().enumerate() {
        let block = &s.features[b * 8..(b + 1) * 8];
        let got = classifier.classify(block).unwrap();
        if b * 8 >= 200 {
            total += 1;
            hits += (got == cmd) as usize;
        }
    }
    assert_eq!(total, 50);
    assert!(hits * 10 >= total * 9, "{hits}/{total}");
    assert_eq!(s.frames.len(), 600);
    for f in &s.frames {
        assert!(f.root_position.iter().chain(&f.q).all(|v| v.is_finite()));
        assert!((f.root_orientation.norm() - 1.0).abs() < 1e-9);
    }
    assert!(s.frame_commands[199] == "stand" && s.frame_commands[200] == "wave left hand");
}
