//! Multi-input compilers.
//!
//! `Agg` turns a stateless list function into a stateful single-input one of
//! fixed arity. `AggS` takes the batch size from a leading count input,
//! supports any arity, and keeps the inner function's state across batches.
//!
//! `AggS` inputs are framed so a count can never be confused with data:
//! `0x00 || u64 LE` sets the batch size, `0x01 || payload` is data.

use super::{Evaluation, FunctionError, FunctionSpec, FunctionState, Output};
use crate::codec::{CodecError, Reader, Writer};
use crate::rng::SimRng;

const AGG_INPUTS: &str = "agg.inputs";
const AGGS_N: &str = "aggs.n";
const AGGS_INPUTS: &str = "aggs.inputs";
const AGGS_INNER: &str = "aggs.inner";

const COUNT_TAG: u8 = 0x00;
const DATA_TAG: u8 = 0x01;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AggsFrame<'a> {
    Count(u64),
    Data(&'a [u8]),
}

impl<'a> AggsFrame<'a> {
    pub fn parse(x: &'a [u8]) -> Option<Self> {
        match x.split_first()? {
            (&COUNT_TAG, rest) => Some(Self::Count(u64::from_le_bytes(rest.try_into().ok()?))),
            (&DATA_TAG, rest) => Some(Self::Data(rest)),
            _ => None,
        }
    }
}

pub fn aggs_count_frame(n: u64) -> Vec<u8> {
    let mut out = vec![COUNT_TAG];
    out.extend_from_slice(&n.to_le_bytes());
    out
}

pub fn aggs_data_frame(payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + 1);
    out.push(DATA_TAG);
    out.extend_from_slice(payload);
    out
}

fn encode_inputs(xs: &[Vec<u8>]) -> Vec<u8> {
    Writer::new()
        .list(xs, |w, x| {
            w.bytes(x);
        })
        .finish()
}

fn decode_inputs(b: Option<&[u8]>) -> Result<Vec<Vec<u8>>, CodecError> {
    let Some(b) = b else {
        return Ok(vec![]);
    };
    let mut r = Reader::new(b);
    let xs = r.list(|r| r.vec())?;
    r.finish()?;
    Ok(xs)
}

pub(super) fn agg_step(
    inner: &FunctionSpec,
    arity: u32,
    x: &[u8],
    s: &FunctionState,
    rng: &mut SimRng,
) -> Evaluation {
    let mut inputs = decode_inputs(s.get(AGG_INPUTS))?;
    inputs.push(x.to_vec());
    if inputs.len() < arity as usize {
        let mut next = s.clone();
        next.insert(AGG_INPUTS, encode_inputs(&inputs));
        return Ok((Output::Pending, next));
    }
    let (y, _) = inner.evaluate_list(&inputs, &FunctionState::default(), rng)?;
    Ok((Output::Value(y), FunctionState::default()))
}

pub(super) fn aggs_step(
    inner: &FunctionSpec,
    x: &[u8],
    s: &FunctionState,
    rng: &mut SimRng,
) -> Evaluation {
    let inner_state = inner_state(s)?.unwrap_or_default();
    let pending = s.get(AGGS_N).map(super::le_integer);
    match (AggsFrame::parse(x), pending) {
        (Some(AggsFrame::Count(0)), _) => {
            let (y, inner_next) = inner.evaluate_list(&[], &inner_state, rng)?;
            Ok((Output::Value(y), with_inner(inner_next)))
        }
        (Some(AggsFrame::Count(n)), _) => {
            if pending.is_some() {
                log::warn!("batch size reset with a batch still pending; discarding it");
            }
            let mut next = with_inner(inner_state);
            next.insert(AGGS_N, n.to_le_bytes().to_vec());
            Ok((Output::Value(n.to_le_bytes().to_vec()), next))
        }
        (Some(AggsFrame::Data(d)), Some(n)) => {
            let mut inputs = decode_inputs(s.get(AGGS_INPUTS))?;
            inputs.push(d.to_vec());
            if (inputs.len() as u64) < n {
                let mut next = s.clone();
                next.insert(AGGS_INPUTS, encode_inputs(&inputs));
                return Ok((Output::Pending, next));
            }
            let (y, inner_next) = inner.evaluate_list(&inputs, &inner_state, rng)?;
            Ok((Output::Value(y), with_inner(inner_next)))
        }
        _ => Err(FunctionError::RejectInit),
    }
}

fn with_inner(inner: FunctionState) -> FunctionState {
    let mut s = FunctionState::default();
    if !inner.is_empty() {
        s.insert(AGGS_INNER, inner.encode());
    }
    s
}

/// The inner function's state if `s` is an `AggS` state carrying one.
pub(super) fn inner_state(s: &FunctionState) -> Result<Option<FunctionState>, CodecError> {
    s.get(AGGS_INNER).map(FunctionState::decode).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::le_integer;
    use crate::rng;
    use proptest::prelude::*;

    fn int(v: u64) -> Vec<u8> {
        v.to_le_bytes().to_vec()
    }

    fn run(f: &FunctionSpec, xs: &[Vec<u8>]) -> (Vec<Output>, FunctionState) {
        let mut s = FunctionState::default();
        let mut r = rng::from_seed(1);
        let mut outs = vec![];
        for x in xs {
            let (y, s2) = f.evaluate(x, &s, &mut r).unwrap();
            outs.push(y);
            s = s2;
        }
        (outs, s)
    }

    #[test]
    fn agg_sum_of_three() {
        let f = FunctionSpec::agg(FunctionSpec::IntegerSum, 3);
        let (outs, s) = run(&f, &[int(1), int(2), int(3)]);
        assert_eq!(
            outs,
            vec![Output::Pending, Output::Pending, Output::Value(int(6))]
        );
        assert!(s.is_empty());
    }

    #[test]
    fn agg_arity_one_is_immediate() {
        let f = FunctionSpec::agg(FunctionSpec::IntegerSum, 1);
        assert_eq!(run(&f, &[int(9)]).0, vec![Output::Value(int(9))]);
    }

    #[test]
    fn agg_resets_after_batch() {
        let f = FunctionSpec::agg(FunctionSpec::IntegerSum, 3);
        let xs: Vec<_> = (1..=6).map(int).collect();
        let (outs, _) = run(&f, &xs);
        assert_eq!(outs[2], Output::Value(int(6)));
        assert_eq!(outs[3..5], [Output::Pending, Output::Pending]);
        assert_eq!(outs[5], Output::Value(int(15)));
    }

    #[test]
    fn aggs_concat_batch_of_two() {
        let inner = FunctionSpec::ByteConcatLength;
        let f = FunctionSpec::aggs(inner.clone());
        let (outs, s) = run(
            &f,
            &[
                aggs_count_frame(2),
                aggs_data_frame(b"a"),
                aggs_data_frame(b"bc"),
            ],
        );
        let direct = inner
            .evaluate_list(
                &[b"a".to_vec(), b"bc".to_vec()],
                &FunctionState::default(),
                &mut rng::from_seed(0),
            )
            .unwrap()
            .0;
        assert_eq!(
            outs,
            vec![
                Output::Value(int(2)),
                Output::Pending,
                Output::Value(direct)
            ]
        );
        assert!(s.is_empty());
    }

    #[test]
    fn aggs_zero_count_evaluates_empty() {
        let f = FunctionSpec::aggs(FunctionSpec::IntegerSum);
        assert_eq!(
            run(&f, &[aggs_count_frame(0)]).0,
            vec![Output::Value(int(0))]
        );
    }

    #[test]
    fn aggs_running_total_carries_across_batches() {
        let f = FunctionSpec::aggs(FunctionSpec::RunningTotal);
        let (outs, s) = run(
            &f,
            &[
                aggs_count_frame(2),
                aggs_data_frame(&int(3)),
                aggs_data_frame(&int(4)),
                aggs_count_frame(1),
                aggs_data_frame(&int(10)),
            ],
        );
        assert_eq!(outs[2], Output::Value(int(7)));
        assert_eq!(outs[4], Output::Value(int(17)));
        assert!(s.get(AGGS_N).is_none());
        assert!(s.get(AGGS_INPUTS).is_none());
    }

    #[test]
    fn aggs_rejects_data_before_count() {
        let f = FunctionSpec::aggs(FunctionSpec::IntegerSum);
        let s = FunctionState::default();
        let mut r = rng::from_seed(0);
        assert_eq!(
            f.evaluate(&aggs_data_frame(b"x"), &s, &mut r),
            Err(FunctionError::RejectInit)
        );
        assert_eq!(
            f.evaluate(b"junk", &s, &mut r),
            Err(FunctionError::RejectInit)
        );
        assert_eq!(
            f.evaluate(&[0, 1, 2], &s, &mut r),
            Err(FunctionError::RejectInit)
        );
    }

    #[test]
    fn aggs_count_while_pending_restarts() {
        let f = FunctionSpec::aggs(FunctionSpec::IntegerSum);
        let (outs, _) = run(
            &f,
            &[
                aggs_count_frame(3),
                aggs_data_frame(&int(100)),
                aggs_count_frame(1),
                aggs_data_frame(&int(5)),
            ],
        );
        assert_eq!(outs[3], Output::Value(int(5)));
    }

    #[test]
    fn nested_compilers_refused() {
        let f = FunctionSpec::aggs(FunctionSpec::agg(FunctionSpec::IntegerSum, 2));
        let (_, s) = run(&f, &[aggs_count_frame(1)]);
        let res = f.evaluate(&aggs_data_frame(b"x"), &s, &mut rng::from_seed(0));
        assert_eq!(res, Err(FunctionError::NotMultiInput("agg")));
    }

    fn stateless() -> impl Strategy<Value = FunctionSpec> {
        prop_oneof![
            Just(FunctionSpec::IntegerSum),
            Just(FunctionSpec::ByteSum),
            Just(FunctionSpec::ByteConcatLength),
            Just(FunctionSpec::F0),
        ]
    }

    proptest! {
        #[test]
        fn agg_matches_direct_evaluation(
            f in stateless(),
            xs in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..12), 1..=8),
        ) {
            let wrapped = FunctionSpec::agg(f.clone(), xs.len() as u32);
            let (outs, s) = run(&wrapped, &xs);
            let direct = f.evaluate_list(&xs, &FunctionState::default(), &mut rng::from_seed(0)).unwrap().0;
            prop_assert_eq!(outs.last().unwrap(), &Output::Value(direct));
            prop_assert!(outs[..xs.len() - 1].iter().all(|o| *o == Output::Pending));
            prop_assert!(s.is_empty());
        }

        #[test]
        fn aggs_matches_sequential_oracle(batches in proptest::collection::vec(proptest::collection::vec(any::<u32>(), 0..5), 1..5)) {
            let f = FunctionSpec::aggs(FunctionSpec::RunningTotal);
            let mut s = FunctionState::default();
            let mut r = rng::from_seed(0);
            let mut expected = 0u64;
            for batch in batches {
                let (y, s2) = f.evaluate(&aggs_count_frame(batch.len() as u64), &s, &mut r).unwrap();
                s = s2;
                let mut last = y;
                for v in &batch {
                    expected = expected.wrapping_add(u64::from(*v));
                    let (y, s2) = f.evaluate(&aggs_data_frame(&u64::from(*v).to_le_bytes()), &s, &mut r).unwrap();
                    s = s2;
                    last = y;
                }
                if !batch.is_empty() {
                    prop_assert_eq!(le_integer(last.value().unwrap()), expected);
                }
                prop_assert!(s.get(AGGS_N).is_none());
                prop_assert!(s.get(AGGS_INPUTS).is_none());
            }
        }
    }
}
