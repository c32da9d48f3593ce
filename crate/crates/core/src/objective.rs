//! Multicut cost, the cubic penalty objective and the log-odds cost transform.

use alloc::vec::Vec;
use core::ops::Deref;

use crate::graph::{CycleSet, EdgeLabeling};
use crate::{math, Error, Result};

/// Per-edge cut costs on a log-odds scale. Negative cost favors cutting.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVector(Vec<f64>);

impl CostVector {
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("cost vector"));
        }
        Ok(Self(costs))
    }

    /// Costs `log((1 - p) / p)` for cut probabilities `p`.
    pub fn from_probabilities(p: &[f64], clamps: &mut ClampCounter) -> Self {
        Self(p.iter().map(|&p| cost_from_probability(p, clamps)).collect())
    }

    pub fn abs_sum(&self) -> f64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for CostVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Weight of one violated cycle inequality in the cubic objective.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PenaltyConstant(f64);

impl PenaltyConstant {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidConfig("penalty constant must be finite and nonnegative"));
        }
        Ok(Self(value))
    }

    /// `sum |c_e| + 1`: the smallest round value for which no violation can pay off.
    pub fn sufficient_for(costs: &CostVector) -> Self {
        Self(costs.abs_sum() + 1.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_len(costs: &CostVector, labels: &EdgeLabeling) -> Result<()> {
    if costs.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "edge labeling",
            expected: costs.len(),
            actual: labels.len(),
        });
    }
    Ok(())
}

/// `sum_e c_e y_e`, summed in edge-id order.
pub fn multicut_cost(costs: &CostVector, labels: &EdgeLabeling) -> Result<f64> {
    check_len(costs, labels)?;
    Ok(costs
        .iter()
        .zip(labels.as_slice())
        .filter(|(_, &cut)| cut)
        .map(|(c, _)| c)
        .sum())
}

/// Number of (cycle, edge) pairs where the edge is the only cut edge on the cycle.
/// Each such cycle contributes exactly one.
pub fn violation_count(labels: &EdgeLabeling, cycles: &CycleSet) -> usize {
    cycles
        .cycles()
        .iter()
        .filter(|c| c.iter().filter(|&&e| labels.is_cut(e)).count() == 1)
        .count()
}

/// Multicut cost plus `penalty` per violated cycle inequality.
pub fn cubic_objective(
    costs: &CostVector,
    labels: &EdgeLabeling,
    penalty: PenaltyConstant,
    cycles: &CycleSet,
) -> Result<f64> {
    let base = multicut_cost(costs, labels)?;
    let violations = violation_count(labels, cycles);
    if violations == 0 {
        return Ok(base);
    }
    Ok(base + penalty.value() * violations as f64)
}

/// Probabilities are clamped into `[PROBABILITY_EPS, 1 - PROBABILITY_EPS]` before any log.
pub const PROBABILITY_EPS: f64 = 1e-7;

/// Counts how often a probability had to be clamped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClampCounter {
    pub clamped: usize,
}

impl ClampCounter {
    pub fn clamp(&mut self, p: f64) -> f64 {
        let c = p.clamp(PROBABILITY_EPS, 1.0 - PROBABILITY_EPS);
        if c != p {
            self.clamped += 1;
        }
        c
    }
}

/// `log((1 - p) / p)` for a cut probability `p`, after clamping.
pub fn cost_from_probability(p: f64, clamps: &mut ClampCounter) -> f64 {
    let p = clamps.clamp(p);
    math::ln((1.0 - p) / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enumerate_chordless_cycles, Graph};
    use proptest::prelude::*;

    fn costs(c: &[f64]) -> CostVector {
        CostVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn cost_examples() {
        let c = costs(&[1.0, -2.0, 3.0]);
        assert_eq!(multicut_cost(&c, &EdgeLabeling::all_joined(3)).unwrap(), 0.0);
        assert_eq!(multicut_cost(&c, &EdgeLabeling::from_bits(&[0, 1, 0])).unwrap(), -2.0);
        assert!(matches!(
            multicut_cost(&c, &EdgeLabeling::all_joined(2)),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(CostVector::new(alloc::vec![f64::NAN]).is_err());
    }

    #[test]
    fn violation_examples() {
        let g = Graph::complete(3).unwrap();
        let cc = enumerate_chordless_cycles(&g, 3).unwrap();
        assert_eq!(violation_count(&EdgeLabeling::from_bits(&[1, 0, 0]), &cc), 1);
        assert_eq!(violation_count(&EdgeLabeling::from_bits(&[1, 1, 0]), &cc), 0);
        let c = costs(&[1.0, 0.0, 0.0]);
        let pc = PenaltyConstant::new(10.0).unwrap();
        assert_eq!(cubic_objective(&c, &EdgeLabeling::from_bits(&[1, 0, 0]), pc, &cc).unwrap(), 11.0);
    }

    #[test]
    fn k4_violations_match_per_triangle_check() {
        // Node 0 has edges 0:(0,1) 1:(0,2) 2:(0,3); cut (0,1) and (0,2) only.
        let g = Graph::complete(4).unwrap();
        let cc = enumerate_chordless_cycles(&g, 3).unwrap();
        let y = EdgeLabeling::from_bits(&[1, 1, 0, 0, 0, 0]);
        let mut expected = 0;
        for a in 0..4 {
            for b in a + 1..4 {
                for d in b + 1..4 {
                    let cuts = [(a, b), (a, d), (b, d)]
                        .iter()
                        .filter(|&&(u, v)| y.is_cut(g.edge_between(u, v).unwrap()))
                        .count();
                    expected += (cuts == 1) as usize;
                }
            }
        }
        // Triangles {0,1,2}: 2 cuts; {0,1,3}: 1; {0,2,3}: 1; {1,2,3}: 0.
        assert_eq!(expected, 2);
        assert_eq!(violation_count(&y, &cc), expected);
    }

    #[test]
    fn probability_costs() {
        let mut clamps = ClampCounter::default();
        assert_eq!(cost_from_probability(0.5, &mut clamps), 0.0);
        assert!((cost_from_probability(0.9, &mut clamps) - (1.0f64 / 9.0).ln()).abs() < 1e-12);
        assert!((cost_from_probability(0.9, &mut clamps) + 2.19722).abs() < 1e-5);
        assert_eq!(clamps.clamped, 0);
        let saturated = cost_from_probability(1.0, &mut clamps);
        assert!(saturated.is_finite());
        assert_eq!(clamps.clamped, 1);
        cost_from_probability(0.0, &mut clamps);
        assert_eq!(clamps.clamped, 2);
    }

    #[test]
    fn default_penalty_is_abs_sum_plus_one() {
        let c = costs(&[1.0, -2.5, 0.5]);
        assert_eq!(PenaltyConstant::sufficient_for(&c).value(), 5.0);
        assert!(PenaltyConstant::new(-1.0).is_err());
    }

    proptest! {
        #[test]
        fn logistic_round_trip(s in -15.0f64..15.0) {
            let p = 1.0 / (1.0 + (-s).exp());
            let mut clamps = ClampCounter::default();
            prop_assert!((cost_from_probability(p, &mut clamps) + s).abs() < 1e-8);
        }

        #[test]
        fn cost_antisymmetric_and_decreasing(p in 0.001f64..0.999, dp in 1e-4f64..0.1) {
            let mut clamps = ClampCounter::default();
            let f = cost_from_probability(p, &mut clamps);
            prop_assert!((f + cost_from_probability(1.0 - p, &mut clamps)).abs() < 1e-12);
            if p + dp < 0.999 {
                prop_assert!(cost_from_probability(p + dp, &mut clamps) < f);
            }
        }

        #[test]
        fn summation_order_independent(
            c in proptest::collection::vec(-10.0f64..10.0, 10),
            mask in 0u64..1024,
        ) {
            let y = EdgeLabeling::from_mask(10, mask);
            let forward = multicut_cost(&CostVector::new(c.clone()).unwrap(), &y).unwrap();
            let mut reversed = 0.0;
            for e in (0..10).rev() {
                if y.is_cut(e) {
                    reversed += c[e];
                }
            }
            prop_assert!((forward - reversed).abs() <= 1e-12 * (1.0 + forward.abs()));
        }

        #[test]
        fn feasible_labelings_carry_no_penalty(ids in proptest::collection::vec(0usize..4, 5), c in proptest::collection::vec(-3.0f64..3.0, 10)) {
            let g = Graph::complete(5).unwrap();
            let cc = enumerate_chordless_cycles(&g, 3).unwrap();
            let d = crate::graph::Decomposition::from_ids(&ids);
            let y = crate::graph::labeling_from_decomposition(&g, &d).unwrap();
            let c = CostVector::new(c).unwrap();
            let pc = PenaltyConstant::sufficient_for(&c);
            prop_assert_eq!(violation_count(&y, &cc), 0);
            prop_assert_eq!(cubic_objective(&c, &y, pc, &cc).unwrap(), multicut_cost(&c, &y).unwrap());
        }
    }
}
