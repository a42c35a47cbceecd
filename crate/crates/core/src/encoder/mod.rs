//! Differentiable toy encoders, projection/predictor heads and the agent's
//! attention/policy step, all evaluated on [`crate::autodiff::Tape`].

mod encode;
mod params;

pub use encode::{
    attend_and_act, direction, embed_tokens, embed_trajectory, encode_instruction, encode_trajectory, gradient,
    project, step_vector, AgentStep, EmbeddingRecord, Role, StepFeature, TracedEmbedding,
};
pub use params::{Block, Checkpoint, Dims, EncoderParams, Layout, ParamVars, Vocab, CHECKPOINT_VERSION, DIRECTIONS, MAX_POSITIONS, UNK};

#[derive(Debug, thiserror::Error)]
pub enum EncodeError {
    #[error("empty input sequence")]
    EmptyInput,
    #[error("no candidate actions")]
    NoCandidates,
    #[error("landmark {0} outside the configured landmark vocabulary")]
    LandmarkOutOfRange(usize),
    #[error("non-finite value")]
    NonFinite,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::env_graph::{NavGraph, Trajectory, Viewpoint};
    use crate::lang::{split_sub_instructions, tokenize};

    fn dims(d: usize) -> Dims {
        Dims {
            vocab: 6,
            n_landmarks: 3,
            d,
        }
    }

    fn vocab() -> Vocab {
        Vocab::build(["walk", "to", "the", "sofa", "lamp"])
    }

    fn graph() -> NavGraph {
        let nodes = (0..3)
            .map(|i| Viewpoint {
                id: i,
                pos: [2.0 * i as f64, 0.0, 0.0],
                landmark: i,
            })
            .collect();
        NavGraph::new(nodes, &[[0, 1], [1, 2]]).unwrap()
    }

    #[test]
    fn zero_params_hit_the_normalisation_guard() {
        let p = EncoderParams::<f64>::zeros(dims(4));
        let doc = split_sub_instructions(&tokenize("walk to the sofa")).unwrap();
        let e = encode_instruction(&doc, &vocab(), &p, Role::Positive, 0).unwrap();
        assert_eq!(e.vec, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn embeddings_are_unit_norm_and_pooling_is_order_free() {
        let p = EncoderParams::<f64>::init(dims(8), 3);
        let v = vocab();
        let a = split_sub_instructions(&tokenize("walk the sofa")).unwrap();
        let b = split_sub_instructions(&tokenize("sofa walk the")).unwrap();
        for role in [Role::Anchor, Role::Positive] {
            let ea = encode_instruction(&a, &v, &p, role, 1).unwrap();
            let eb = encode_instruction(&b, &v, &p, role, 1).unwrap();
            assert!((ea.norm() - 1.0).abs() < 1e-12);
            for (x, y) in ea.vec.iter().zip(&eb.vec) {
                assert!((x - y).abs() < 1e-15);
            }
        }
        let anchor = encode_instruction(&a, &v, &p, Role::Anchor, 1).unwrap();
        let pos = encode_instruction(&a, &v, &p, Role::Positive, 1).unwrap();
        assert_ne!(anchor.vec, pos.vec);
    }

    #[test]
    fn single_token_goes_through_projection() {
        let p = EncoderParams::<f64>::init(dims(4), 5);
        let v = vocab();
        let doc = split_sub_instructions(&tokenize("lamp")).unwrap();
        let e = encode_instruction(&doc, &v, &p, Role::Positive, 0).unwrap();
        let tape = Tape::new();
        let pv = p.load_frozen(&tape);
        let want = tape.values(&project(&tape, &pv, pv.token(v.id("lamp")), Role::Positive));
        assert_eq!(e.vec, want);
    }

    #[test]
    fn trajectory_direction_matters() {
        let g = graph();
        let p = EncoderParams::<f64>::init(dims(8), 2);
        let fwd = Trajectory::new(&g, vec![0, 1, 2]).unwrap();
        let f = encode_trajectory(&fwd, &g, &p, Role::Positive, 0).unwrap();
        let r = encode_trajectory(&fwd.reversed(), &g, &p, Role::Positive, 0).unwrap();
        assert_ne!(f.vec, r.vec);
        assert_eq!(f, encode_trajectory(&fwd, &g, &p, Role::Positive, 0).unwrap());
        let still = Trajectory::new(&g, vec![1]).unwrap();
        assert!((encode_trajectory(&still, &g, &p, Role::Anchor, 0).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn axis_directions() {
        assert_eq!(direction(&[0., 0., 0.], &[2., 0., 0.]), 0);
        assert_eq!(direction(&[0., 0., 0.], &[-2., 0., 0.]), 1);
        assert_eq!(direction(&[0., 0., 0.], &[0., 0., -1.]), 5);
        assert_eq!(direction(&[0., 0., 0.], &[1., 1., 0.]), 6);
    }

    #[test]
    fn attention_by_hand() {
        let mut p = EncoderParams::<f64>::zeros(Dims {
            vocab: 2,
            n_landmarks: 1,
            d: 2,
        });
        p.block_mut(Block::AttnCtx).copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        p.block_mut(Block::ValueW).copy_from_slice(&[1.0, 0.0]);
        p.block_mut(Block::ValueB)[0] = 0.5;
        let t = Tape::new();
        let pv = p.load(&t);
        let x1 = t.constants(&[1.0, 0.0]);
        let x2 = t.constants(&[0.0, 1.0]);
        let obs = t.constants(&[1.0, 0.0]);
        let prev = t.constants(&[0.0, 0.0]);
        let cands = vec![t.constants(&[1.0, 0.0]), t.constants(&[0.0, 1.0])];
        let out = attend_and_act(&t, &pv, &[&x1, &x2], &obs, &prev, &cands).unwrap();

        let s1 = 1.0 / 2f64.sqrt();
        let a1 = s1.exp() / (s1.exp() + 1.0);
        let a2 = 1.0 / (s1.exp() + 1.0);
        let logits = t.values(&out.logits);
        assert!((logits[0] - a1.tanh()).abs() < 1e-14);
        assert!((logits[1] - a2.tanh()).abs() < 1e-14);
        assert!((t.value(out.value) - (a1.tanh() + 0.5)).abs() < 1e-14);
    }

    #[test]
    fn identical_candidates_get_equal_logits() {
        let p = EncoderParams::<f64>::init(dims(4), 8);
        let t = Tape::new();
        let pv = p.load(&t);
        let x = t.constants(&[0.1, 0.2, -0.3, 0.4]);
        let obs = t.constants(&[0.5, 0.0, 0.1, 0.0]);
        let prev = t.constants(&[0.0; 4]);
        let c = t.constants(&[0.3, -0.2, 0.1, 0.9]);
        let out = attend_and_act(&t, &pv, &[&x], &obs, &prev, &[c.clone(), c.clone(), c]).unwrap();
        let l = t.values(&out.logits);
        assert!(l.windows(2).all(|w| w[0] == w[1]));
        let single = attend_and_act(&t, &pv, &[&x], &obs, &prev, &[t.constants(&[1.0; 4])]).unwrap();
        let probs = t.values(&t.softmax(&single.logits));
        assert_eq!(probs, vec![1.0]);
    }

    #[test]
    fn gradient_of_probes() {
        let p = EncoderParams::<f64>::init(dims(3), 4);
        let (v, g) = gradient(&p, |t, _| Ok(t.constant(2.5))).unwrap();
        assert_eq!(v, 2.5);
        assert!(g.iter().all(|&x| x == 0.0));
        let (_, g) = gradient(&p, |t, pv| Ok(t.dot(pv.all(), pv.all()))).unwrap();
        for (gi, pi) in g.iter().zip(p.as_slice()) {
            assert!((gi - 2.0 * pi).abs() < 1e-15);
        }
        assert!(gradient(&p, |t, _| Ok(t.constant(f64::NAN))).is_err());
    }

    #[test]
    fn empty_tokens_rejected() {
        let p = EncoderParams::<f64>::init(dims(3), 4);
        let t = Tape::new();
        let pv = p.load(&t);
        assert!(embed_tokens(&t, &pv, &[], Role::Anchor).is_err());
    }
}
