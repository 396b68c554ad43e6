//! Objective and convergence measures: TSTT, SPTT, relative gap, Beckmann.

use crate::demand::OdMatrix;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::par;
use crate::shortest_path::{LabelSet, Router, Unconstrained};

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for v in iter {
            s.add(v);
        }
        s
    }
}

fn check_non_negative(flows: &[f64]) -> Result<()> {
    if let Some((i, x)) = flows.iter().enumerate().find(|(_, x)| !(**x >= 0.0)) {
        return Err(Error::Domain(format!("link {i} carries flow {x}; flows must be >= 0")));
    }
    Ok(())
}

/// Total system travel time, `sum of t(x) * x`.
pub fn tstt(network: &Network, link_flows: &[f64]) -> Result<f64> {
    network.check_flow_vector(link_flows)?;
    check_non_negative(link_flows)?;
    Ok(network
        .links()
        .iter()
        .zip(link_flows)
        .map(|(l, &x)| l.cost.time(x) * x)
        .collect::<CompensatedSum>()
        .value())
}

/// Beckmann objective at `link_flows`.
pub fn beckmann(network: &Network, link_flows: &[f64]) -> Result<f64> {
    network.check_flow_vector(link_flows)?;
    Ok(network
        .links()
        .iter()
        .zip(link_flows)
        .map(|(l, &x)| l.cost.integral(x))
        .collect::<CompensatedSum>()
        .value())
}

/// One shortest-path search per origin of `od`, run in parallel.
pub fn origin_labels(router: &dyn Router, od: &OdMatrix, costs: &[f64]) -> Result<Vec<LabelSet>> {
    let origins: Vec<_> = od.origin_groups().into_iter().map(|(o, _)| o).collect();
    par::map(&origins, |&o| router.labels(o, costs))
        .into_iter()
        .collect()
}

/// `sum of kappa_rs * d_rs` from precomputed per-origin labels (in
/// `od.origin_groups()` order).
pub fn sptt_from_labels(router: &dyn Router, od: &OdMatrix, labels: &[LabelSet]) -> Result<f64> {
    let network = router.network();
    let mut total = CompensatedSum::default();
    for ((_, range), set) in od.origin_groups().into_iter().zip(labels) {
        for pair in &od.pairs()[range] {
            let c = set.cost[pair.destination];
            if !c.is_finite() {
                return Err(Error::Disconnected {
                    origin: network.label(pair.origin),
                    destination: network.label(pair.destination),
                });
            }
            total.add(c * pair.demand);
        }
    }
    Ok(total.value())
}

pub fn sptt_with(router: &dyn Router, od: &OdMatrix, link_flows: &[f64]) -> Result<f64> {
    let network = router.network();
    network.check_flow_vector(link_flows)?;
    check_non_negative(link_flows)?;
    let costs = network.link_costs(link_flows);
    let labels = origin_labels(router, od, &costs)?;
    sptt_from_labels(router, od, &labels)
}

/// Shortest-path travel time: demand times current shortest path cost.
pub fn sptt(network: &Network, od: &OdMatrix, link_flows: &[f64]) -> Result<f64> {
    sptt_with(&Unconstrained::new(network), od, link_flows)
}

/// `TSTT / SPTT - 1`; an instance with no travel at all has gap 0.
pub fn gap_from_totals(tstt: f64, sptt: f64) -> Result<f64> {
    if sptt > 0.0 {
        Ok(tstt / sptt - 1.0)
    } else if tstt == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::Degenerate(format!(
            "shortest-path travel time is {sptt} while total travel time is {tstt}"
        )))
    }
}

pub fn relative_gap_with(router: &dyn Router, od: &OdMatrix, link_flows: &[f64]) -> Result<f64> {
    let t = tstt(router.network(), link_flows)?;
    let s = sptt_with(router, od, link_flows)?;
    gap_from_totals(t, s)
}

pub fn relative_gap(network: &Network, od: &OdMatrix, link_flows: &[f64]) -> Result<f64> {
    relative_gap_with(&Unconstrained::new(network), od, link_flows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{CostFunction, Link};

    fn parallel_links(costs: &[(f64, f64)]) -> Network {
        // node 0 -> node 1 over parallel affine links via distinct middle nodes
        let mut links = Vec::new();
        let n = 2 + costs.len();
        for (i, &(c0, m)) in costs.iter().enumerate() {
            let mid = 2 + i;
            links.push(Link::physical(0, mid, CostFunction::Affine { intercept: c0, slope: m }));
            links.push(Link::physical(mid, 1, CostFunction::Affine { intercept: 0.0, slope: 0.0 }));
        }
        Network::new(n, 2, 0, links).unwrap()
    }

    #[test]
    fn tstt_of_zero_flow_is_zero() {
        let net = parallel_links(&[(1.0, 1.0)]);
        assert_eq!(tstt(&net, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn tstt_single_bpr_link() {
        let net = Network::new(2, 0, 0, vec![Link::physical(0, 1, CostFunction::bpr(10.0, 100.0))])
            .unwrap();
        assert!((tstt(&net, &[100.0]).unwrap() - 1150.0).abs() < 1e-9);
        let two = Network::new(
            2,
            0,
            0,
            vec![
                Link::physical(0, 1, CostFunction::bpr(10.0, 100.0)),
                Link::physical(0, 1, CostFunction::bpr(10.0, 100.0)),
            ],
        )
        .unwrap();
        assert_eq!(
            tstt(&two, &[100.0, 100.0]).unwrap(),
            2.0 * tstt(&net, &[100.0]).unwrap()
        );
    }

    #[test]
    fn tstt_rejects_wrong_length() {
        let net = parallel_links(&[(1.0, 1.0)]);
        assert!(matches!(tstt(&net, &[0.0]), Err(Error::Structural(_))));
    }

    #[test]
    fn sptt_three_parallel_paths_brute_force() {
        let net = parallel_links(&[(5.0, 1.0), (3.0, 2.0), (9.0, 0.5)]);
        let od = OdMatrix::from_entries(2, [(0, 1, 10.0)]).unwrap();
        let flows = [4.0, 4.0, 5.0, 5.0, 1.0, 1.0];
        // path costs 9, 13, 9.5
        let best = [5.0 + 4.0, 3.0 + 2.0 * 5.0, 9.0 + 0.5 * 1.0]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        assert_eq!(sptt(&net, &od, &flows).unwrap(), best * 10.0);
    }

    #[test]
    fn single_path_network_has_sptt_equal_tstt() {
        let net = Network::new(2, 2, 0, vec![Link::physical(0, 1, CostFunction::bpr(10.0, 100.0))])
            .unwrap();
        let od = OdMatrix::from_entries(2, [(0, 1, 100.0)]).unwrap();
        let t = tstt(&net, &[100.0]).unwrap();
        assert_eq!(sptt(&net, &od, &[100.0]).unwrap(), t);
        assert_eq!(relative_gap(&net, &od, &[100.0]).unwrap(), 0.0);
    }

    #[test]
    fn zero_demand_gives_zero_sptt_and_gap() {
        let net = parallel_links(&[(1.0, 1.0)]);
        let od = OdMatrix::from_entries(2, []).unwrap();
        assert_eq!(sptt(&net, &od, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(relative_gap(&net, &od, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn gap_of_one_when_all_demand_on_double_cost_path() {
        // constant costs 2 and 1; all 10 units on the cost-2 path
        let net = parallel_links(&[(2.0, 0.0), (1.0, 0.0)]);
        let od = OdMatrix::from_entries(2, [(0, 1, 10.0)]).unwrap();
        let rg = relative_gap(&net, &od, &[10.0, 10.0, 0.0, 0.0]).unwrap();
        assert!((rg - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gap_invariant_to_cost_scaling() {
        let a = parallel_links(&[(2.0, 0.3), (1.0, 0.7)]);
        let b = parallel_links(&[(2.0 * 3.5, 0.3 * 3.5), (1.0 * 3.5, 0.7 * 3.5)]);
        let od = OdMatrix::from_entries(2, [(0, 1, 10.0)]).unwrap();
        let x = [6.0, 6.0, 4.0, 4.0];
        let (ga, gb) = (
            relative_gap(&a, &od, &x).unwrap(),
            relative_gap(&b, &od, &x).unwrap(),
        );
        assert!((ga - gb).abs() < 1e-14);
    }

    #[test]
    fn disconnected_pair_is_named() {
        let net = Network::new(3, 3, 0, vec![Link::physical(0, 1, CostFunction::bpr(1.0, 1.0))])
            .unwrap();
        let od = OdMatrix::from_entries(3, [(0, 2, 1.0)]).unwrap();
        match sptt(&net, &od, &[0.0]) {
            Err(Error::Disconnected { origin, destination }) => {
                assert_eq!((origin, destination), (1, 3));
            }
            other => panic!("expected disconnection, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_when_sptt_zero_but_tstt_positive() {
        assert!(matches!(gap_from_totals(5.0, 0.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        s.add(1.0);
        s.add(-1e16);
        assert_eq!(s.value(), 1.0);
    }
}
