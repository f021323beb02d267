use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::DatasetError;
use crate::syntax::{special, CodeSequence, TypeSequence};

/// Masked, replaced and unchanged positions of one sequence. `repl[k]`
/// holds the code id and type id written at `loc_r[k]`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskPlan {
    pub loc_m: Vec<usize>,
    pub loc_r: Vec<usize>,
    pub loc_u: Vec<usize>,
    pub repl: Vec<(u32, u32)>,
}

impl MaskPlan {
    /// All predicted positions, sorted.
    pub fn positions(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self
            .loc_m
            .iter()
            .chain(&self.loc_r)
            .chain(&self.loc_u)
            .copied()
            .collect();
        all.sort_unstable();
        all
    }

    pub fn len(&self) -> usize {
        self.loc_m.len() + self.loc_r.len() + self.loc_u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Number of positions to predict: 15% rounded half up, at least one.
pub fn mask_count(maskable: usize) -> usize {
    ((15 * maskable + 50) / 100).max(1)
}

fn random_other(rng: &mut impl Rng, vocab: usize, original: u32) -> u32 {
    let lo = special::COUNT;
    let hi = (vocab as u32).max(lo + 1);
    if hi - lo == 1 {
        return lo;
    }
    loop {
        let id = rng.gen_range(lo..hi);
        if id != original {
            return id;
        }
    }
}

/// Draw a plan over the non-sentinel positions of a sequence. Each chosen
/// position is masked with probability 0.8, replaced with 0.1 and kept
/// with 0.1; replacement ids are uniform over non-special ids other than
/// the original.
pub fn plan_masks(
    code: &CodeSequence,
    types: &TypeSequence,
    code_vocab: usize,
    type_vocab: usize,
    rng: &mut impl Rng,
) -> MaskPlan {
    let maskable = code.maskable_len();
    assert!(maskable >= 1, "nothing to mask");
    let mut chosen = sample(rng, maskable, mask_count(maskable)).into_vec();
    chosen.sort_unstable();
    let mut plan = MaskPlan::default();
    for offset in chosen {
        let pos = offset + 1;
        let u: f64 = rng.gen();
        if u < 0.8 {
            plan.loc_m.push(pos);
        } else if u < 0.9 {
            plan.loc_r.push(pos);
            let c = random_other(rng, code_vocab, code.ids[pos]);
            let t = random_other(rng, type_vocab, types.ids[pos]);
            plan.repl.push((c, t));
        } else {
            plan.loc_u.push(pos);
        }
    }
    plan
}

/// Apply one plan to both streams: `[MASK]` at `loc_m`, the recorded ids
/// at `loc_r`, nothing elsewhere.
pub fn apply_masks(
    code: &[u32],
    types: &[u32],
    plan: &MaskPlan,
) -> Result<(Vec<u32>, Vec<u32>), DatasetError> {
    let len = code.len();
    let inside = |p: &usize| *p >= 1 && *p + 1 < len;
    let valid = types.len() == len
        && !plan.is_empty()
        && plan.repl.len() == plan.loc_r.len()
        && plan.positions().iter().all(inside)
        && plan.positions().windows(2).all(|w| w[0] < w[1]);
    if !valid {
        return Err(DatasetError::PlanMismatch { len });
    }
    let mut c = code.to_vec();
    let mut t = types.to_vec();
    for &p in &plan.loc_m {
        c[p] = special::MASK;
        t[p] = special::MASK;
    }
    for (&p, &(rc, rt)) in plan.loc_r.iter().zip(&plan.repl) {
        c[p] = rc;
        t[p] = rt;
    }
    Ok((c, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seqs(n: usize) -> (CodeSequence, TypeSequence) {
        let mut ids = vec![special::CLS];
        ids.extend((0..n).map(|i| special::COUNT + (i % 20) as u32));
        ids.push(special::SEP);
        let token_of = (0..ids.len() as i32).map(|i| i - 1).collect();
        let types = TypeSequence { ids: ids.clone() };
        (CodeSequence { ids, token_of }, types)
    }

    #[test]
    fn counts() {
        assert_eq!(mask_count(100), 15);
        assert_eq!(mask_count(1), 1);
        assert_eq!(mask_count(3), 1);
        assert_eq!(mask_count(10), 2);
        assert_eq!(mask_count(7), 1);
        assert_eq!(mask_count(30), 5);
    }

    #[test]
    fn plan_shape() {
        let (c, t) = seqs(100);
        let plan = plan_masks(&c, &t, 50, 40, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(plan.len(), 15);
        let all = plan.positions();
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert!(all.iter().all(|&p| p >= 1 && p <= 100));
        let (one, ty) = seqs(1);
        assert_eq!(plan_masks(&one, &ty, 50, 40, &mut ChaCha8Rng::seed_from_u64(1)).positions(), vec![1]);
    }

    #[test]
    fn masks_touch_both_streams_the_same_way() {
        let (c, t) = seqs(10);
        let plan = MaskPlan {
            loc_m: vec![3],
            loc_r: vec![5],
            loc_u: vec![7],
            repl: vec![(30, 31)],
        };
        let (mc, mt) = apply_masks(&c.ids, &t.ids, &plan).unwrap();
        assert_eq!((mc[3], mt[3]), (special::MASK, special::MASK));
        assert_eq!((mc[5], mt[5]), (30, 31));
        assert_eq!((mc[7], mt[7]), (c.ids[7], t.ids[7]));
        for p in [0, 1, 2, 4, 6, 8, 9, 10, 11] {
            assert_eq!((mc[p], mt[p]), (c.ids[p], t.ids[p]));
        }
    }

    #[test]
    fn bad_plans_are_rejected() {
        let (c, t) = seqs(2);
        assert!(apply_masks(&c.ids, &t.ids, &MaskPlan::default()).is_err());
        let sentinel = MaskPlan { loc_m: vec![0], ..Default::default() };
        assert!(apply_masks(&c.ids, &t.ids, &sentinel).is_err());
        let far = MaskPlan { loc_u: vec![9], ..Default::default() };
        assert!(apply_masks(&c.ids, &t.ids, &far).is_err());
        let short = MaskPlan { loc_m: vec![1], ..Default::default() };
        assert!(apply_masks(&c.ids, &t.ids[..3], &short).is_err());
    }

    #[test]
    fn replacements_differ_from_the_original() {
        let (c, t) = seqs(200);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let plan = plan_masks(&c, &t, 25, 25, &mut rng);
            for (&p, &(rc, rt)) in plan.loc_r.iter().zip(&plan.repl) {
                assert!(rc >= special::COUNT && rc != c.ids[p]);
                assert!(rt >= special::COUNT && rt != t.ids[p]);
            }
        }
    }
}
