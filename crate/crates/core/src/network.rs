//! Site/edge structure of dual Sierpinski gaskets and rings, and assembly of
//! the block-sparse walk propagator.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::coin::{ComplexMatrix, HoppingSet, Role};
use crate::Family;

/// Largest supported gasket generation.
pub const MAX_DSG_GENERATION: u32 = 10;

/// Default unitarity tolerance checked when assembling at `z = 1`.
pub const UNITARITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("invalid gasket generation {0} (supported: 1..={MAX_DSG_GENERATION})")]
    InvalidGeneration(u32),
    #[error("invalid loop size {0} (must be even and at least 2)")]
    InvalidLoopSize(usize),
    #[error("network family {0} has no site-level construction")]
    UnsupportedFamily(Family),
    #[error("hopping set family {hops} does not match network family {net}")]
    FamilyMismatch { net: Family, hops: Family },
    #[error("direct simulation needs an un-renormalized hopping set, got k = {0}")]
    RenormalizedHopping(u32),
    #[error("hopping set lacks the {0} matrix")]
    MissingRole(&'static str),
    #[error("coin dimension {hops} does not match the network's {net}")]
    CoinDimMismatch { net: usize, hops: usize },
    #[error("assembled propagator is not unitary: max deviation {deviation:.3e} exceeds {tol:.1e}")]
    NotUnitary { deviation: f64, tol: f64 },
    #[error("malformed edge list at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Directed hop: the spinor at `from` reaches `to` through the matrix of `role`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Hop {
    pub from: usize,
    pub to: usize,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    pub family: Family,
    /// Gasket generation `g`, or the loop size for rings.
    pub size_param: u32,
    pub num_sites: usize,
    /// Sorted by `(to, from, role)`, so each site's incoming hops are contiguous.
    pub hops: Vec<Hop>,
    pub corner_sites: Vec<usize>,
}

fn digits_of(mut x: usize, g: usize) -> Vec<usize> {
    let mut d = vec![0; g];
    for slot in d.iter_mut().rev() {
        *slot = x % 3;
        x /= 3;
    }
    d
}

fn index_of(d: &[usize]) -> usize {
    d.iter().fold(0, |acc, &x| acc * 3 + x)
}

/// C-partner of a gasket site, or `None` for the three outer corners.
///
/// Sites are base-3 strings, most significant digit = top-level copy. Within
/// the innermost triangle the last digit names the corner. A site whose
/// digits end in a run of `j` starting at position `m > 0` sits at the corner
/// of sub-gasket `d[..m]` facing copy `j`; it pairs with the corner of the
/// sibling copy `j` that faces back towards copy `d[m-1]`.
pub fn dsg_c_partner(site: usize, g: u32) -> Option<usize> {
    let g = g as usize;
    let d = digits_of(site, g);
    let j = d[g - 1];
    let m = (0..g).rev().take_while(|&p| d[p] == j).last().unwrap_or(g - 1);
    if m == 0 {
        return None;
    }
    let i = d[m - 1];
    let mut p = d[..m - 1].to_vec();
    p.push(j);
    p.extend(std::iter::repeat(i).take(g - m));
    Some(index_of(&p))
}

/// Dual Sierpinski gasket of `3^g` sites.
pub fn build_dsg(g: u32) -> Result<Network, NetworkError> {
    if g == 0 || g > MAX_DSG_GENERATION {
        return Err(NetworkError::InvalidGeneration(g));
    }
    let n = 3usize.pow(g);
    let mut hops = Vec::with_capacity(4 * n);
    let mut corners = Vec::new();
    for x in 0..n {
        hops.push(Hop { from: x, to: x, role: Role::M });
        let base = x - x % 3;
        for y in base..base + 3 {
            if y != x {
                hops.push(Hop { from: y, to: x, role: Role::A });
            }
        }
        match dsg_c_partner(x, g) {
            Some(p) => hops.push(Hop { from: p, to: x, role: Role::C }),
            None => {
                corners.push(x);
                hops.push(Hop { from: x, to: x, role: Role::C });
            }
        }
    }
    hops.sort_by_key(|h| (h.to, h.from, h.role));
    Ok(Network { family: Family::Dsg, size_param: g, num_sites: n, hops, corner_sites: corners })
}

/// Ring of `n` sites. Component 1 travels right through `A`, component 2
/// travels left through `B`.
pub fn build_loop(n: usize) -> Result<Network, NetworkError> {
    if n < 2 || n % 2 != 0 || n > u32::MAX as usize {
        return Err(NetworkError::InvalidLoopSize(n));
    }
    let mut hops = Vec::with_capacity(3 * n);
    for x in 0..n {
        hops.push(Hop { from: x, to: x, role: Role::M });
        hops.push(Hop { from: (x + n - 1) % n, to: x, role: Role::A });
        hops.push(Hop { from: (x + 1) % n, to: x, role: Role::B });
    }
    hops.sort_by_key(|h| (h.to, h.from, h.role));
    Ok(Network { family: Family::Line, size_param: n as u32, num_sites: n, hops, corner_sites: vec![] })
}

impl Network {
    pub fn generation(&self) -> Option<u32> {
        (self.family == Family::Dsg).then_some(self.size_param)
    }

    /// Sites whose spinor reaches `site` through `role`.
    pub fn sources(&self, site: usize, role: Role) -> Vec<usize> {
        self.hops
            .iter()
            .filter(|h| h.to == site && h.role == role)
            .map(|h| h.from)
            .collect()
    }

    pub fn count_c_self_loops(&self) -> usize {
        self.hops.iter().filter(|h| h.role == Role::C && h.from == h.to).count()
    }

    /// Undirected C-edges between distinct sites.
    pub fn count_c_edges(&self) -> usize {
        self.hops.iter().filter(|h| h.role == Role::C && h.from != h.to).count() / 2
    }

    /// Undirected A-edges.
    pub fn count_a_edges(&self) -> usize {
        match self.family {
            Family::Line => self.num_sites,
            _ => self.hops.iter().filter(|h| h.role == Role::A).count() / 2,
        }
    }

    /// Edge-list text: a header line, then `src dst role` per directed hop.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!(
            "# family={} size={} N={}\n",
            self.family,
            self.size_param,
            self.num_sites
        );
        for h in &self.hops {
            let _ = writeln!(s, "{} {} {}", h.from, h.to, h.role.name());
        }
        s
    }

    pub fn from_edge_list(text: &str) -> Result<Self, NetworkError> {
        let perr = |line: usize, reason: &str| NetworkError::Parse { line, reason: reason.to_string() };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| perr(1, "empty input"))?;
        let mut family = None;
        let mut size = None;
        let mut n = None;
        for field in header.trim_start_matches('#').split_whitespace() {
            match field.split_once('=') {
                Some(("family", v)) => family = v.parse::<Family>().ok(),
                Some(("size", v)) => size = v.parse::<u32>().ok(),
                Some(("N", v)) => n = v.parse::<usize>().ok(),
                _ => return Err(perr(1, "unrecognized header field")),
            }
        }
        let (family, size_param, num_sites) = match (family, size, n) {
            (Some(f), Some(s), Some(n)) => (f, s, n),
            _ => return Err(perr(1, "header must give family, size and N")),
        };
        let mut hops = Vec::new();
        for (i, line) in lines {
            let mut it = line.split_whitespace();
            let from = it.next().and_then(|v| v.parse::<usize>().ok());
            let to = it.next().and_then(|v| v.parse::<usize>().ok());
            let role = match it.next() {
                Some("M") => Some(Role::M),
                Some("A") => Some(Role::A),
                Some("B") => Some(Role::B),
                Some("C") => Some(Role::C),
                _ => None,
            };
            match (from, to, role, it.next()) {
                (Some(from), Some(to), Some(role), None) if from < num_sites && to < num_sites => {
                    hops.push(Hop { from, to, role })
                }
                _ => return Err(perr(i + 1, "expected `src dst role` with sites below N")),
            }
        }
        hops.sort_by_key(|h| (h.to, h.from, h.role));
        let corner_sites = hops
            .iter()
            .filter(|h| h.role == Role::C && h.from == h.to)
            .map(|h| h.to)
            .collect();
        Ok(Network { family, size_param, num_sites, hops, corner_sites })
    }
}

/// Block-sparse operator `𝒰` with `(𝒰ψ)_x = Σ_hops H_role · ψ_from`.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub family: Family,
    pub num_sites: usize,
    pub coin_dim: usize,
    pub z: Complex64,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    roles: Vec<usize>,
    role_names: Vec<Role>,
    blocks: Vec<ComplexMatrix>,
    blocks_adj: Vec<ComplexMatrix>,
}

impl Propagator {
    pub fn dim(&self) -> usize {
        self.num_sites * self.coin_dim
    }

    /// Stored blocks of row `site` as `(column site, role)`.
    pub fn row_blocks(&self, site: usize) -> impl Iterator<Item = (usize, Role, &ComplexMatrix)> {
        (self.row_ptr[site]..self.row_ptr[site + 1])
            .map(move |e| (self.cols[e], self.role_names[self.roles[e]], &self.blocks[self.roles[e]]))
    }

    /// `out = 𝒰·psi`.
    pub fn apply_into(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let d = self.coin_dim;
        debug_assert_eq!(psi.len(), self.dim());
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for x in 0..self.num_sites {
            let o = &mut out[x * d..(x + 1) * d];
            for e in self.row_ptr[x]..self.row_ptr[x + 1] {
                let c = self.cols[e];
                self.blocks[self.roles[e]].mul_vec_acc(&psi[c * d..(c + 1) * d], o);
            }
        }
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.apply_into(psi, &mut out);
        out
    }

    /// `out = 𝒰†·psi`.
    pub fn apply_adjoint_into(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let d = self.coin_dim;
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for x in 0..self.num_sites {
            let src = &psi[x * d..(x + 1) * d];
            for e in self.row_ptr[x]..self.row_ptr[x + 1] {
                let c = self.cols[e];
                self.blocks_adj[self.roles[e]].mul_vec_acc(src, &mut out[c * d..(c + 1) * d]);
            }
        }
    }

    pub fn apply_adjoint(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.apply_adjoint_into(psi, &mut out);
        out
    }

    /// `‖𝒰†𝒰 − I‖_max`, accumulated block-wise from pairs of entries that
    /// share a row.
    pub fn unitarity_deviation(&self) -> f64 {
        let d = self.coin_dim;
        let mut gram: HashMap<(usize, usize), ComplexMatrix> = HashMap::new();
        for x in 0..self.num_sites {
            for e1 in self.row_ptr[x]..self.row_ptr[x + 1] {
                for e2 in self.row_ptr[x]..self.row_ptr[x + 1] {
                    let prod = &self.blocks_adj[self.roles[e1]] * &self.blocks[self.roles[e2]];
                    gram.entry((self.cols[e1], self.cols[e2]))
                        .and_modify(|acc| *acc = &*acc + &prod)
                        .or_insert(prod);
                }
            }
        }
        let eye = ComplexMatrix::identity(d);
        let zero = ComplexMatrix::zeros(d);
        let mut dev = 0.0f64;
        for j in 0..self.num_sites {
            if !gram.contains_key(&(j, j)) {
                dev = dev.max(1.0);
            }
        }
        for ((j, l), m) in &gram {
            let target = if j == l { &eye } else { &zero };
            dev = dev.max(m.max_diff(target));
        }
        dev
    }
}

/// Assembles `𝒰` for a network from an un-renormalized hopping set. When
/// `z = 1` the result is checked for unitarity against [`UNITARITY_TOL`].
pub fn assemble_propagator(net: &Network, hops: &HoppingSet) -> Result<Propagator, NetworkError> {
    assemble_propagator_with_tol(net, hops, UNITARITY_TOL)
}

pub fn assemble_propagator_with_tol(
    net: &Network,
    hops: &HoppingSet,
    tol: f64,
) -> Result<Propagator, NetworkError> {
    if net.family != hops.family {
        return Err(NetworkError::FamilyMismatch { net: net.family, hops: hops.family });
    }
    if hops.k != 0 {
        return Err(NetworkError::RenormalizedHopping(hops.k));
    }
    let coin_dim = net.family.coin_dim();
    if hops.coin_dim != coin_dim {
        return Err(NetworkError::CoinDimMismatch { net: coin_dim, hops: hops.coin_dim });
    }
    let role_names: Vec<Role> = match net.family {
        Family::Dsg => vec![Role::M, Role::A, Role::C],
        Family::Line => vec![Role::M, Role::A, Role::B],
        Family::Mk3 => return Err(NetworkError::UnsupportedFamily(Family::Mk3)),
    };
    let mut blocks = Vec::with_capacity(role_names.len());
    for r in &role_names {
        blocks.push(hops.get(*r).ok_or(NetworkError::MissingRole(r.name()))?.clone());
    }
    let blocks_adj = blocks.iter().map(|b| b.adjoint()).collect();

    let mut row_ptr = Vec::with_capacity(net.num_sites + 1);
    let mut cols = Vec::with_capacity(net.hops.len());
    let mut roles = Vec::with_capacity(net.hops.len());
    row_ptr.push(0);
    let mut h = 0;
    for x in 0..net.num_sites {
        while h < net.hops.len() && net.hops[h].to == x {
            let hop = net.hops[h];
            let idx = role_names
                .iter()
                .position(|r| *r == hop.role)
                .ok_or(NetworkError::MissingRole(hop.role.name()))?;
            cols.push(hop.from);
            roles.push(idx);
            h += 1;
        }
        row_ptr.push(cols.len());
    }

    let prop = Propagator {
        family: net.family,
        num_sites: net.num_sites,
        coin_dim,
        z: hops.z,
        row_ptr,
        cols,
        roles,
        role_names,
        blocks,
        blocks_adj,
    };
    if hops.z == Complex64::new(1.0, 0.0) {
        let deviation = prop.unitarity_deviation();
        if deviation.is_nan() || deviation > tol {
            return Err(NetworkError::NotUnitary { deviation, tol });
        }
    }
    Ok(prop)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coin::{grover_coin, raw_hopping};
    use std::collections::BTreeSet;
    use std::f64::consts::FRAC_PI_4;

    const ONE: Complex64 = Complex64::new(1.0, 0.0);

    fn undirected(net: &Network, role: Role) -> BTreeSet<(usize, usize)> {
        net.hops
            .iter()
            .filter(|h| h.role == role)
            .map(|h| (h.from.min(h.to), h.from.max(h.to)))
            .collect()
    }

    #[test]
    fn generation_one_is_a_triangle() {
        let net = build_dsg(1).unwrap();
        assert_eq!(net.num_sites, 3);
        assert_eq!(net.count_a_edges(), 3);
        assert_eq!(net.count_c_self_loops(), 3);
        assert_eq!(net.count_c_edges(), 0);
        assert_eq!(net.corner_sites, vec![0, 1, 2]);
    }

    #[test]
    fn generation_two_matches_nine_site_graphlet() {
        // Relabel to the reference drawing: corners 0,1,2; triangles
        // {0,3,4}, {1,5,6}, {2,7,8}; C pairs 3-8, 4-5, 6-7.
        let relabel = [0, 4, 3, 5, 1, 6, 8, 7, 2];
        let net = build_dsg(2).unwrap();
        let map = |s: &BTreeSet<(usize, usize)>| -> BTreeSet<(usize, usize)> {
            s.iter()
                .map(|&(a, b)| {
                    let (x, y) = (relabel[a], relabel[b]);
                    (x.min(y), x.max(y))
                })
                .collect()
        };
        let a = map(&undirected(&net, Role::A));
        let c = map(&undirected(&net, Role::C));
        let want_a: BTreeSet<_> =
            [(0, 3), (0, 4), (3, 4), (1, 5), (1, 6), (5, 6), (2, 7), (2, 8), (7, 8)].into_iter().collect();
        let want_c: BTreeSet<_> = [(0, 0), (1, 1), (2, 2), (3, 8), (4, 5), (6, 7)].into_iter().collect();
        assert_eq!(a, want_a);
        assert_eq!(c, want_c);
    }

    #[test]
    fn c_edge_counts_by_handshake() {
        for g in 1..=5 {
            let net = build_dsg(g).unwrap();
            let n = 3usize.pow(g);
            assert_eq!(net.count_c_self_loops(), 3, "g={g}");
            assert_eq!(net.count_c_edges(), (n - 3) / 2, "g={g}");
            for x in 0..n {
                assert_eq!(net.sources(x, Role::A).len(), 2);
                assert_eq!(net.sources(x, Role::C).len(), 1);
                let p = net.sources(x, Role::C)[0];
                assert_eq!(net.sources(p, Role::C), vec![x], "partner symmetry g={g} x={x}");
            }
        }
    }

    #[test]
    fn invalid_sizes() {
        assert_eq!(build_dsg(0), Err(NetworkError::InvalidGeneration(0)));
        assert!(build_dsg(11).is_err());
        assert_eq!(build_loop(7), Err(NetworkError::InvalidLoopSize(7)));
        assert_eq!(build_loop(0), Err(NetworkError::InvalidLoopSize(0)));
    }

    #[test]
    fn loop_neighbors() {
        let two = build_loop(2).unwrap();
        assert_eq!(two.sources(0, Role::A), vec![1]);
        assert_eq!(two.sources(0, Role::B), vec![1]);
        let eight = build_loop(8).unwrap();
        for x in 0..8 {
            assert_eq!(eight.sources(x, Role::A), vec![(x + 7) % 8]);
            assert_eq!(eight.sources(x, Role::B), vec![(x + 1) % 8]);
        }
    }

    #[test]
    fn row_blocks_partition_the_coin() {
        // the hopping prefactors in each row sum to I, i.e. every coin
        // component is emitted exactly once
        let g = grover_coin(3).unwrap();
        for gen in 1..=6 {
            let net = build_dsg(gen).unwrap();
            let prop = assemble_propagator(&net, &raw_hopping(Family::Dsg, ONE, None).unwrap()).unwrap();
            for x in 0..net.num_sites {
                let mut sum = ComplexMatrix::zeros(3);
                let mut roles = Vec::new();
                for (_, r, b) in prop.row_blocks(x) {
                    sum = &sum + &(b * &g);
                    roles.push(r);
                }
                assert!(sum.max_diff(&ComplexMatrix::identity(3)) < 1e-15);
                roles.sort();
                assert_eq!(roles, vec![Role::M, Role::A, Role::A, Role::C]);
            }
        }
    }

    #[test]
    fn unitarity_at_z1() {
        let prop = assemble_propagator(&build_dsg(1).unwrap(), &raw_hopping(Family::Dsg, ONE, None).unwrap())
            .unwrap();
        assert_eq!(prop.dim(), 9);
        assert!(prop.unitarity_deviation() < 1e-12);
        let lp = assemble_propagator(
            &build_loop(8).unwrap(),
            &raw_hopping(Family::Line, ONE, Some(FRAC_PI_4)).unwrap(),
        )
        .unwrap();
        assert!(lp.unitarity_deviation() < 1e-14);
    }

    #[test]
    fn zero_z_gives_zero_operator() {
        let net = build_dsg(2).unwrap();
        let prop = assemble_propagator(&net, &raw_hopping(Family::Dsg, Complex64::new(0.0, 0.0), None).unwrap())
            .unwrap();
        let psi = vec![ONE; prop.dim()];
        assert!(prop.apply(&psi).iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn mismatches_are_rejected() {
        let net = build_dsg(2).unwrap();
        let line = raw_hopping(Family::Line, ONE, Some(0.3)).unwrap();
        assert!(matches!(assemble_propagator(&net, &line), Err(NetworkError::FamilyMismatch { .. })));
        let mut renorm = raw_hopping(Family::Dsg, ONE, None).unwrap();
        renorm.k = 1;
        assert_eq!(assemble_propagator(&net, &renorm).unwrap_err(), NetworkError::RenormalizedHopping(1));
    }

    #[test]
    fn non_unitary_hopping_is_rejected() {
        let net = build_dsg(1).unwrap();
        let good = raw_hopping(Family::Dsg, ONE, None).unwrap();
        let bent: Vec<(Role, ComplexMatrix)> = good
            .roles()
            .map(|(r, m)| (r, if r == Role::C { m.scale(Complex64::new(0.9, 0.0)) } else { m.clone() }))
            .collect();
        let bad = HoppingSet::new(Family::Dsg, 0, ONE, None, bent).unwrap();
        assert!(matches!(assemble_propagator(&net, &bad), Err(NetworkError::NotUnitary { .. })));
    }

    #[test]
    fn edge_list_roundtrip() {
        for net in [build_dsg(3).unwrap(), build_loop(6).unwrap()] {
            let text = net.to_edge_list();
            assert!(text.starts_with("# family="));
            assert_eq!(Network::from_edge_list(&text).unwrap(), net);
        }
        assert!(Network::from_edge_list("# family=dsg size=1 N=3\n0 5 A\n").is_err());
    }

    #[test]
    fn construction_is_deterministic() {
        assert_eq!(build_dsg(4).unwrap(), build_dsg(4).unwrap());
    }
}
