//! Small generated instances: hand-sized classics, grids, an engineered
//! two-cluster network and random two-subnet master networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::demand::OdMatrix;
use crate::network::{CostFunction, Link, Network, NodeId};
use crate::partition::Partition;
use crate::shortest_path::{MasterTopology, ZoneRole};

#[derive(Clone, Debug)]
pub struct Instance {
    pub network: Network,
    pub od: OdMatrix,
}

/// Two parallel links with costs `10 + x` and `20 + 0.5 x`, 30 units of demand.
pub fn parallel_affine() -> Instance {
    let links = vec![
        Link::physical(0, 1, CostFunction::Affine { intercept: 10.0, slope: 1.0 }),
        Link::physical(0, 1, CostFunction::Affine { intercept: 20.0, slope: 0.5 }),
    ];
    Instance {
        network: Network::new(2, 2, 0, links).unwrap(),
        od: OdMatrix::from_entries(2, [(0, 1, 30.0)]).unwrap(),
    }
}

/// The Braess network with 6 units from node 0 to node 3. Links in order:
/// 0->1 (10x), 0->2 (50+x), 1->3 (50+x), 2->3 (10x), 1->2 (10+x).
pub fn braess() -> Instance {
    let affine = |intercept, slope| CostFunction::Affine { intercept, slope };
    let links = vec![
        Link::physical(0, 1, affine(0.0, 10.0)),
        Link::physical(0, 2, affine(50.0, 1.0)),
        Link::physical(1, 3, affine(50.0, 1.0)),
        Link::physical(2, 3, affine(0.0, 10.0)),
        Link::physical(1, 2, affine(10.0, 1.0)),
    ];
    Instance {
        network: Network::with_labels(vec![1, 2, 3, 4], 4, 0, links).unwrap(),
        od: OdMatrix::from_entries(4, [(0, 3, 6.0)]).unwrap(),
    }
}

/// Bidirectional `rows x cols` grid with BPR links whose free-flow times and
/// capacities vary pseudo-randomly with `seed`. Every `zone_stride`-th row
/// and column crossing is a zone; zones are renumbered to the front.
pub fn grid(rows: usize, cols: usize, zone_stride: usize, demand_per_pair: f64, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stride = zone_stride.max(1);
    let cell = |r: usize, c: usize| r * cols + c;
    let is_zone = |r: usize, c: usize| r % stride == 0 && c % stride == 0;
    let mut order: Vec<usize> = Vec::with_capacity(rows * cols);
    order.extend((0..rows * cols).filter(|&v| is_zone(v / cols, v % cols)));
    let zones = order.len();
    order.extend((0..rows * cols).filter(|&v| !is_zone(v / cols, v % cols)));
    let mut index = vec![0; rows * cols];
    for (i, &v) in order.iter().enumerate() {
        index[v] = i;
    }
    let mut links = Vec::new();
    let mut both = |a: usize, b: usize, rng: &mut ChaCha8Rng| {
        let t = rng.gen_range(1.0..3.0);
        let u = rng.gen_range(400.0..900.0);
        links.push(Link::physical(index[a], index[b], CostFunction::bpr(t, u)));
        links.push(Link::physical(index[b], index[a], CostFunction::bpr(t, u)));
    };
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                both(cell(r, c), cell(r, c + 1), &mut rng);
            }
            if r + 1 < rows {
                both(cell(r, c), cell(r + 1, c), &mut rng);
            }
        }
    }
    let network = Network::new(rows * cols, zones, 0, links).unwrap();
    let mut entries = Vec::new();
    for o in 0..zones {
        for d in 0..zones {
            if o != d {
                entries.push((o, d, demand_per_pair * rng.gen_range(0.5..1.5)));
            }
        }
    }
    Instance {
        network,
        od: OdMatrix::from_entries(zones, entries).unwrap(),
    }
}

/// Two `side x side` grids joined by a single two-way bridge between the
/// middle of their facing edges, with zones on the grid corners and edge
/// midpoints. Every path between the grids crosses the bridge exactly
/// once and no path gains by leaving its own grid, so at equilibrium the
/// two-grid partition has ψ = 0. Returns that partition with the instance.
pub fn twin_clusters(side: usize, intra: f64, inter: f64, seed: u64) -> (Instance, Partition) {
    let side = side.max(3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per = side * side;
    let mid = side / 2;
    let spots = [
        (0, 0),
        (0, mid),
        (0, side - 1),
        (mid, 0),
        (mid, side - 1),
        (side - 1, 0),
        (side - 1, mid),
        (side - 1, side - 1),
    ];
    let zone_spot = |r: usize, c: usize| spots.contains(&(r, c));
    // original ids: grid g, row r, col c -> g * per + r * side + c
    let mut order = Vec::with_capacity(2 * per);
    for g in 0..2 {
        order.extend((0..per).filter(|&v| zone_spot(v / side, v % side)).map(|v| g * per + v));
    }
    let zones = order.len();
    for g in 0..2 {
        order.extend((0..per).filter(|&v| !zone_spot(v / side, v % side)).map(|v| g * per + v));
    }
    let mut index = vec![0; 2 * per];
    for (i, &v) in order.iter().enumerate() {
        index[v] = i;
    }
    let mut links = Vec::new();
    let mut both = |a: usize, b: usize, t: f64, u: f64| {
        links.push(Link::physical(index[a], index[b], CostFunction::bpr(t, u)));
        links.push(Link::physical(index[b], index[a], CostFunction::bpr(t, u)));
    };
    for g in 0..2 {
        for r in 0..side {
            for c in 0..side {
                let v = g * per + r * side + c;
                if c + 1 < side {
                    both(v, v + 1, rng.gen_range(1.0..2.0), rng.gen_range(150.0..300.0));
                }
                if r + 1 < side {
                    both(v, v + side, rng.gen_range(1.0..2.0), rng.gen_range(150.0..300.0));
                }
            }
        }
    }
    both(mid * side + side - 1, per + mid * side, 1.0, 2000.0);
    let network = Network::new(2 * per, zones, 0, links).unwrap();
    let grid_of = |z: NodeId| order[z] / per;
    let mut entries = Vec::new();
    for o in 0..zones {
        for d in 0..zones {
            if o != d {
                let base = if grid_of(o) == grid_of(d) { intra } else { inter };
                entries.push((o, d, base * rng.gen_range(0.8..1.2)));
            }
        }
    }
    let assignment = (0..2 * per).map(|i| order[i] / per).collect();
    (
        Instance {
            network,
            od: OdMatrix::from_entries(zones, entries).unwrap(),
        },
        Partition::new(assignment).unwrap(),
    )
}

/// Master network with two subnetworks, for shortest-path cross-checks.
#[derive(Clone, Debug)]
pub struct RandomMaster {
    pub master: Network,
    pub topology: MasterTopology,
    pub roles: Vec<ZoneRole>,
    /// Integer-valued link costs, so path sums are exact in any order.
    pub costs: Vec<f64>,
}

/// Random two-subnet master with up to `max_zones` zones and up to
/// `max_boundary` boundary nodes. Some zones are boundary nodes, some zones
/// block through traffic, and artificial links join origins to boundary
/// nodes and boundary nodes to destinations inside each subnet.
pub fn random_master(rng: &mut impl Rng, max_zones: usize, max_boundary: usize) -> RandomMaster {
    let zones = rng.gen_range(2..=max_zones.max(2));
    let boundary_total = rng.gen_range(2..=max_boundary.max(2));
    let zone_boundary = rng.gen_range(0..=boundary_total.min(zones) / 2);
    let extra = boundary_total - zone_boundary;
    let n = zones + extra;
    let ftn = rng.gen_range(0..=zones);
    let mut subnet: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
    let mut boundary = vec![false; n];
    for v in 0..zone_boundary {
        boundary[v] = true;
    }
    for v in zones..n {
        boundary[v] = true;
    }
    // both subnets need a boundary node
    let bnodes: Vec<NodeId> = (0..n).filter(|&v| boundary[v]).collect();
    subnet[bnodes[0]] = 0;
    subnet[bnodes[1]] = 1;
    let roles: Vec<ZoneRole> = (0..zones)
        .map(|_| ZoneRole::from_flags(rng.gen_bool(0.6), rng.gen_bool(0.6)))
        .collect();
    let is_origin = |v: NodeId| v < zones && matches!(roles[v], ZoneRole::Origin | ZoneRole::Both);
    let is_destination = |v: NodeId| v < zones && matches!(roles[v], ZoneRole::Destination | ZoneRole::Both);

    let mut links = Vec::new();
    let mut costs = Vec::new();
    for &a in &bnodes {
        for &b in &bnodes {
            if subnet[a] != subnet[b] && rng.gen_bool(0.35) {
                links.push(Link::physical(a, b, CostFunction::bpr(1.0, 1.0)));
                costs.push(f64::from(rng.gen_range(1u32..20)));
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            if a == b || subnet[a] != subnet[b] {
                continue;
            }
            let wanted = (is_origin(a) && boundary[b]) || (boundary[a] && is_destination(b));
            if wanted && rng.gen_bool(0.8) {
                links.push(Link::artificial(a, b, 0.0, 0.0));
                costs.push(f64::from(rng.gen_range(1u32..40)));
            }
        }
    }
    let master = Network::new(n, zones, ftn, links).unwrap();
    RandomMaster {
        master,
        topology: MasterTopology {
            subnet,
            subnet_count: 2,
        },
        roles,
        costs,
    }
}
