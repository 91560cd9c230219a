//! Segment-based decomposition of a block chain.
//!
//! [`sod_decompose`] grows a segment block by block until it holds at least
//! `epsilon` dimensions, then steps the cursor back by roughly a fifth of the
//! segment so that adjacent segments share their boundary blocks.
//! [`exclusive_decompose`] performs the same growth without stepping back.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::SpaceLayout;

/// A contiguous, inclusive range of blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    /// 1-based segment id.
    pub id: usize,
    #[serde(rename = "blocks", with = "block_pair")]
    pub block_range: (usize, usize),
    pub dims: Vec<usize>,
}

impl Segment {
    pub fn first_block(&self) -> usize {
        self.block_range.0
    }

    pub fn last_block(&self) -> usize {
        self.block_range.1
    }

    pub fn n_blocks(&self) -> usize {
        self.block_range.1 - self.block_range.0 + 1
    }
}

mod block_pair {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &(usize, usize), s: S) -> Result<S::Ok, S::Error> {
        [v.0, v.1].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(usize, usize), D::Error> {
        let [a, b] = <[usize; 2]>::deserialize(d)?;
        Ok((a, b))
    }
}

/// Variables shared by segments `left` and `left + 1` (0-based positions),
/// plus the peculiar variables of each side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overlap {
    pub left: usize,
    pub shared_blocks: usize,
    pub com: Vec<usize>,
    pub pec_left: Vec<usize>,
    pub pec_right: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionPlan {
    pub segments: Vec<Segment>,
    /// One entry per adjacent pair; `com` is empty for exclusive plans.
    pub overlaps: Vec<Overlap>,
    pub epsilon: usize,
    pub exclusive: bool,
}

impl DecompositionPlan {
    pub fn m(&self) -> usize {
        self.segments.len()
    }

    pub fn segment(&self, i: usize) -> &Segment {
        &self.segments[i]
    }

    /// Number of blocks segment `i` shares with segment `i + 1`.
    pub fn blocks_shared_with_next(&self, i: usize) -> usize {
        self.overlaps.get(i).map_or(0, |o| o.shared_blocks)
    }

    /// Last block of segment `i` that is not shared with its successor. The
    /// state handed to segment `i + 1` is taken after this block.
    pub fn handoff_block(&self, i: usize) -> usize {
        self.segments[i].last_block() - self.blocks_shared_with_next(i)
    }

    /// Dimensions of segment `i` shared with neither neighbour.
    pub fn peculiar_dims(&self, i: usize) -> Vec<usize> {
        let prev = i.checked_sub(1).map(|p| self.overlaps[p].com.as_slice());
        let next = self.overlaps.get(i).map(|o| o.com.as_slice());
        self.segments[i]
            .dims
            .iter()
            .copied()
            .filter(|d| {
                !prev.is_some_and(|c| c.contains(d)) && !next.is_some_and(|c| c.contains(d))
            })
            .collect()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

/// Overlap for a segment of `blocks` blocks, of which `fresh` were not
/// covered by the previous segment.
///
/// Nominally `max(1, round(0.2 * blocks))`; it is further capped so that the
/// next segment starts after this one (`blocks - 1`) and never reaches back
/// into the previous segment (`fresh`).
pub fn overlap_blocks(blocks: usize, fresh: usize) -> usize {
    // round(b / 5) with halves rounded up; b / 5 never lands on a half
    let nominal = ((blocks + 2) / 5).max(1);
    nominal.min(blocks.saturating_sub(1)).min(fresh)
}

pub fn sod_decompose(layout: &SpaceLayout, epsilon: usize) -> Result<DecompositionPlan> {
    decompose(layout, epsilon, false)
}

pub fn exclusive_decompose(layout: &SpaceLayout, epsilon: usize) -> Result<DecompositionPlan> {
    decompose(layout, epsilon, true)
}

fn decompose(layout: &SpaceLayout, epsilon: usize, exclusive: bool) -> Result<DecompositionPlan> {
    if epsilon == 0 {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    let n = layout.n_blocks();
    let mut ranges: Vec<(usize, usize)> = Vec::new();
    let mut shared: Vec<usize> = Vec::new();
    let mut ind = 0;
    let mut prev_end: Option<usize> = None;

    while ind < n {
        let start = ind;
        let mut count = layout.block_len(ind);
        ind += 1;
        // a segment must also reach past the end of its predecessor
        while ind < n && (count < epsilon || prev_end.is_some_and(|e| ind <= e + 1)) {
            count += layout.block_len(ind);
            ind += 1;
        }
        let end = ind - 1;
        ranges.push((start, end));
        if ind < n && !exclusive {
            let blocks = end - start + 1;
            let fresh = prev_end.map_or(blocks, |e| end - e);
            let back = overlap_blocks(blocks, fresh);
            ind -= back;
            shared.push(back);
        } else if ind < n {
            shared.push(0);
        }
        prev_end = Some(end);
    }

    let segments: Vec<Segment> = ranges
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| Segment {
            id: i + 1,
            block_range: (a, b),
            dims: layout.block_range_dims(a, b).collect(),
        })
        .collect();

    let coms: Vec<Vec<usize>> = segments
        .windows(2)
        .map(|w| {
            let next_first = w[1].first_block();
            let last = w[0].last_block();
            if next_first <= last {
                layout.block_range_dims(next_first, last).collect()
            } else {
                Vec::new()
            }
        })
        .collect();

    let mut plan = DecompositionPlan {
        segments,
        overlaps: Vec::new(),
        epsilon,
        exclusive,
    };
    plan.overlaps = coms
        .into_iter()
        .zip(shared)
        .enumerate()
        .map(|(i, (com, shared_blocks))| Overlap {
            left: i,
            shared_blocks,
            com,
            pec_left: Vec::new(),
            pec_right: Vec::new(),
        })
        .collect();
    for i in 0..plan.overlaps.len() {
        plan.overlaps[i].pec_left = plan.peculiar_dims(i);
        plan.overlaps[i].pec_right = plan.peculiar_dims(i + 1);
    }
    Ok(plan)
}

/// Shared variables of segments `i` and `i + 1` and the peculiar variables
/// of each (0-based positions).
pub fn pair_partition(
    plan: &DecompositionPlan,
    i: usize,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let overlap = plan.overlaps.get(i).ok_or(Error::NoNextSegment(i))?;
    Ok((
        overlap.com.clone(),
        overlap.pec_left.clone(),
        overlap.pec_right.clone(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::HyperparameterSpec;

    fn layout(n_blocks: usize, dims: usize) -> SpaceLayout {
        let block = (0..dims)
            .map(|j| HyperparameterSpec::integer(format!("p{j}"), 0, 3).unwrap())
            .collect();
        SpaceLayout::uniform(n_blocks, block).unwrap()
    }

    fn blocks(plan: &DecompositionPlan) -> Vec<(usize, usize)> {
        plan.segments.iter().map(|s| s.block_range).collect()
    }

    #[test]
    fn fifteen_blocks_of_six() {
        let plan = sod_decompose(&layout(15, 6), 30).unwrap();
        assert_eq!(blocks(&plan), vec![(0, 4), (4, 8), (8, 12), (12, 14)]);
        assert!(plan
            .overlaps
            .iter()
            .all(|o| o.shared_blocks == 1 && o.com.len() == 6));
        assert_eq!(plan.handoff_block(0), 3);
        assert_eq!(plan.handoff_block(3), 14);
        assert_eq!(plan.peculiar_dims(0), (0..24).collect::<Vec<_>>());
        assert_eq!(plan.peculiar_dims(1), (30..48).collect::<Vec<_>>());
    }

    #[test]
    fn exclusive_fifteen_blocks_of_six() {
        let plan = exclusive_decompose(&layout(15, 6), 30).unwrap();
        assert_eq!(blocks(&plan), vec![(0, 4), (5, 9), (10, 14)]);
        assert_eq!(plan.overlaps.len(), 2);
        assert!(plan
            .overlaps
            .iter()
            .all(|o| o.com.is_empty() && o.shared_blocks == 0));
        assert_eq!(plan.peculiar_dims(1), plan.segment(1).dims);
        assert_eq!(plan.handoff_block(0), 4);
    }

    #[test]
    fn single_block_and_large_epsilon() {
        for plan in [
            sod_decompose(&layout(1, 6), 30).unwrap(),
            exclusive_decompose(&layout(1, 6), 30).unwrap(),
        ] {
            assert_eq!(blocks(&plan), vec![(0, 0)]);
            assert!(plan.overlaps.is_empty());
        }
        let plan = sod_decompose(&layout(10, 3), 30).unwrap();
        assert_eq!(plan.m(), 1);
        assert_eq!(plan.segment(0).dims.len(), 30);
        let sod = sod_decompose(&layout(1, 6), 30).unwrap();
        let excl = exclusive_decompose(&layout(1, 6), 30).unwrap();
        assert_eq!(sod.segments, excl.segments);
        assert_eq!(sod.overlaps, excl.overlaps);
    }

    #[test]
    fn zero_epsilon_is_rejected() {
        assert!(matches!(
            sod_decompose(&layout(3, 2), 0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn single_block_segments_do_not_loop() {
        // every block alone already exceeds epsilon
        let plan = sod_decompose(&layout(5, 6), 4).unwrap();
        assert_eq!(blocks(&plan), vec![(0, 0), (1, 1), (2, 2), (3, 3), (4, 4)]);
        assert!(plan.overlaps.iter().all(|o| o.com.is_empty()));
    }

    #[test]
    fn pair_partition_of_sod_plan() {
        let plan = sod_decompose(&layout(15, 6), 30).unwrap();
        let (com, pec, pec_next) = pair_partition(&plan, 1).unwrap();
        assert_eq!(com, (48..54).collect::<Vec<_>>());
        assert_eq!(pec, (30..48).collect::<Vec<_>>());
        assert_eq!(pec_next, (54..72).collect::<Vec<_>>());
        assert!(matches!(
            pair_partition(&plan, 3),
            Err(Error::NoNextSegment(3))
        ));

        let excl = exclusive_decompose(&layout(15, 6), 30).unwrap();
        assert!(pair_partition(&excl, 0).unwrap().0.is_empty());

        let single = sod_decompose(&layout(1, 6), 30).unwrap();
        assert!(pair_partition(&single, 0).is_err());
    }

    #[test]
    fn heterogeneous_blocks_keep_overlap_adjacent() {
        // nine 1-dim blocks followed by a wide one: the overlapped blocks
        // alone would already satisfy epsilon
        let mut chain: Vec<Vec<HyperparameterSpec>> = (0..9)
            .map(|_| vec![HyperparameterSpec::integer("a", 0, 1).unwrap()])
            .collect();
        chain.push(
            (0..30)
                .map(|_| HyperparameterSpec::integer("b", 0, 1).unwrap())
                .collect(),
        );
        chain.push(vec![HyperparameterSpec::integer("c", 0, 1).unwrap(); 2]);
        chain.push(vec![HyperparameterSpec::integer("d", 0, 1).unwrap(); 2]);
        let layout = SpaceLayout::new(chain).unwrap();
        let plan = sod_decompose(&layout, 10).unwrap();
        for (i, a) in plan.segments.iter().enumerate() {
            for b in plan.segments.iter().skip(i + 2) {
                assert!(a.last_block() < b.first_block(), "{:?}", blocks(&plan));
            }
        }
        for w in plan.segments.windows(2) {
            assert!(w[1].last_block() > w[0].last_block());
        }
    }

    #[test]
    fn plan_serializes_block_pairs() {
        let plan = sod_decompose(&layout(3, 2), 4).unwrap();
        let json: serde_json::Value = serde_json::from_str(&plan.to_json_string()).unwrap();
        assert_eq!(json["segments"][0]["blocks"], serde_json::json!([0, 1]));
        assert!(json["overlaps"].is_array());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_layout() -> impl Strategy<Value = SpaceLayout> {
            prop::collection::vec(1usize..6, 1..30).prop_map(|sizes| {
                let blocks = sizes
                    .into_iter()
                    .map(|k| {
                        (0..k)
                            .map(|j| HyperparameterSpec::integer(format!("h{j}"), 0, 2).unwrap())
                            .collect()
                    })
                    .collect();
                SpaceLayout::new(blocks).unwrap()
            })
        }

        proptest! {
            #[test]
            fn segments_cover_the_chain_in_order(layout in arb_layout(), eps in 1usize..40) {
                let plan = sod_decompose(&layout, eps).unwrap();
                let segs = &plan.segments;
                prop_assert_eq!(segs[0].first_block(), 0);
                prop_assert_eq!(segs.last().unwrap().last_block(), layout.n_blocks() - 1);
                prop_assert_eq!(plan.overlaps.len(), segs.len() - 1);
                for w in segs.windows(2) {
                    // adjacent segments touch or overlap, and both ends move forward
                    prop_assert!(w[1].first_block() <= w[0].last_block() + 1);
                    prop_assert!(w[1].first_block() > w[0].first_block());
                    prop_assert!(w[1].last_block() > w[0].last_block());
                }
                for w in segs.windows(3) {
                    prop_assert!(w[2].first_block() > w[0].last_block());
                }
            }

            #[test]
            fn peculiar_and_shared_dims_partition_each_pair(layout in arb_layout(), eps in 1usize..40) {
                let plan = sod_decompose(&layout, eps).unwrap();
                for ov in &plan.overlaps {
                    let left = &plan.segments[ov.left].dims;
                    let right = &plan.segments[ov.left + 1].dims;
                    for d in &ov.com {
                        prop_assert!(left.contains(d) && right.contains(d));
                        prop_assert!(!ov.pec_left.contains(d) && !ov.pec_right.contains(d));
                    }
                    prop_assert!(ov.com.is_empty() == (ov.shared_blocks == 0));
                }
            }

            #[test]
            fn exclusive_plan_has_disjoint_segments(layout in arb_layout(), eps in 1usize..40) {
                let plan = exclusive_decompose(&layout, eps).unwrap();
                let mut dims: Vec<usize> = plan.segments.iter().flat_map(|s| s.dims.clone()).collect();
                dims.dedup();
                prop_assert_eq!(dims, layout.all_dims());
            }
        }
    }
}
