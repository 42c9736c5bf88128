//! Uniform spatio-temporal grids, interior/initial/boundary partition, and
//! sub-sequence construction.
//!
//! Each grid point anchors exactly one sub-sequence: the point itself plus
//! its `k-1` temporal successors at spacing `dt`. When `dt` divides the grid
//! interval, all token times of a spatial column live on one integer
//! sub-lattice and are computed as a single product `index * dt`, so tokens
//! shared by overlapping sub-sequences coincide bit-exactly. Successor
//! tokens past the time horizon are evaluated anyway (the PDE operators
//! extend smoothly) and flagged, unless clamping is requested.

use crate::error::{Error, Result};

/// Spatio-temporal box `[x_min, x_max] x [0, t_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    pub t_max: f64,
}

impl Domain {
    pub fn new(x_min: f64, x_max: f64, t_max: f64) -> Self {
        assert!(x_min < x_max, "domain requires x_min < x_max");
        assert!(t_max > 0.0, "domain requires a positive time horizon");
        Domain {
            x_min,
            x_max,
            t_max,
        }
    }
}

/// Uniform M x N collocation grid, row-major with x varying slowest.
#[derive(Clone, Debug)]
pub struct Grid {
    pub domain: Domain,
    pub m: usize,
    pub n: usize,
}

impl Grid {
    pub fn new(domain: Domain, m: usize, n: usize) -> Result<Self> {
        if m < 2 || n < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 points per axis, got {m}x{n}"
            )));
        }
        Ok(Grid { domain, m, n })
    }

    pub fn dx(&self) -> f64 {
        (self.domain.x_max - self.domain.x_min) / (self.m - 1) as f64
    }

    /// Temporal spacing `T / (N-1)`.
    pub fn dt_grid(&self) -> f64 {
        self.domain.t_max / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        debug_assert!(i < self.m);
        self.domain.x_min + i as f64 * self.dx()
    }

    pub fn t(&self, j: usize) -> f64 {
        debug_assert!(j < self.n);
        j as f64 * self.dt_grid()
    }

    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x(i), self.t(j))
    }

    pub fn len(&self) -> usize {
        self.m * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All points, x-major.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.m).flat_map(move |i| (0..self.n).map(move |j| self.point(i, j)))
    }
}

/// Grid indices of the interior set (all points), the initial set (t = 0)
/// and the boundary set (x on either edge). Corners at t = 0 belong to both
/// the initial and boundary sets.
#[derive(Clone, Debug)]
pub struct CollocationSets {
    pub interior: Vec<(usize, usize)>,
    pub initial: Vec<(usize, usize)>,
    pub boundary: Vec<(usize, usize)>,
}

pub fn partition_sets(grid: &Grid) -> CollocationSets {
    let mut interior = Vec::with_capacity(grid.len());
    let mut initial = Vec::with_capacity(grid.m);
    let mut boundary = Vec::with_capacity(2 * grid.n);
    for i in 0..grid.m {
        for j in 0..grid.n {
            interior.push((i, j));
            if j == 0 {
                initial.push((i, j));
            }
            if i == 0 || i == grid.m - 1 {
                boundary.push((i, j));
            }
        }
    }
    CollocationSets {
        interior,
        initial,
        boundary,
    }
}

/// A collocation point with its `k-1` temporal successors.
#[derive(Clone, Debug)]
pub struct SubSequence {
    pub x: f64,
    pub t0: f64,
    pub dt: f64,
    pub k: usize,
}

impl SubSequence {
    pub fn new(anchor: (f64, f64), k: usize, dt: f64) -> Self {
        assert!(k >= 2, "a sub-sequence needs at least 2 tokens");
        assert!(dt > 0.0, "sequence interval must be positive");
        SubSequence {
            x: anchor.0,
            t0: anchor.1,
            dt,
            k,
        }
    }

    pub fn token(&self, j: usize) -> (f64, f64) {
        debug_assert!(j < self.k);
        (self.x, self.t0 + j as f64 * self.dt)
    }

    pub fn tokens(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.k).map(move |j| self.token(j))
    }

    /// True when token `j` lies past the time horizon.
    pub fn beyond_horizon(&self, j: usize, t_max: f64) -> bool {
        self.token(j).1 > t_max * (1.0 + 1e-12) + 1e-15
    }
}

/// Index pairs `(j, j-1)` of coordinate-sharing tokens between a
/// sub-sequence and the one anchored exactly one `dt` later at the same x.
pub fn overlap_pairs(a: &SubSequence, b: &SubSequence) -> Vec<(usize, usize)> {
    assert_eq!(a.x, b.x, "overlap requires the same spatial coordinate");
    assert_eq!(a.k, b.k);
    assert_eq!(a.dt, b.dt);
    let offset = b.t0 - (a.t0 + a.dt);
    assert!(
        offset.abs() <= 1e-9 * a.dt,
        "overlap requires anchors offset by exactly one dt"
    );
    (1..a.k).map(|j| (j, j - 1)).collect()
}

/// How anchors and tokens are laid out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SequenceMode {
    /// One sub-sequence of length `k` per grid point.
    Sub,
    /// One full-horizon sequence per spatial coordinate (ablation).
    Long,
}

/// A token evaluation point.
#[derive(Clone, Copy, Debug)]
pub struct TokenPoint {
    pub x: f64,
    pub t: f64,
    pub beyond_horizon: bool,
}

/// The full set of sequences anchored on a grid, with deduplicated token
/// points (tokens shared between overlapping sub-sequences map to the same
/// entry, so their coordinates agree bit-exactly by construction).
#[derive(Clone, Debug)]
pub struct SequenceSet {
    pub mode: SequenceMode,
    pub k: usize,
    pub dt: f64,
    pub m: usize,
    pub n: usize,
    /// Token-index shift between sequences of consecutive anchors in one
    /// column; `None` when `dt` does not divide the grid interval, in which
    /// case no alignment pairs exist.
    pub align_shift: Option<usize>,
    pub points: Vec<TokenPoint>,
    /// `n_seq * k` point indices, sequence-major.
    pub seq_tokens: Vec<u32>,
}

impl SequenceSet {
    /// Builds sequences for every anchor. In [`SequenceMode::Sub`] the
    /// anchor at grid `(i, j)` is sequence `i*n + j`; in
    /// [`SequenceMode::Long`] spatial coordinate `i` is sequence `i` with
    /// `k = n`.
    pub fn build(
        grid: &Grid,
        mode: SequenceMode,
        k: usize,
        dt: f64,
        extrapolate_beyond_horizon: bool,
    ) -> Self {
        let t_max = grid.domain.t_max;
        let beyond = |t: f64| t > t_max * (1.0 + 1e-12) + 1e-15;
        match mode {
            SequenceMode::Long => {
                let k = grid.n;
                let mut points = Vec::with_capacity(grid.len());
                let mut seq_tokens = Vec::with_capacity(grid.len());
                for i in 0..grid.m {
                    for j in 0..grid.n {
                        let (x, t) = grid.point(i, j);
                        seq_tokens.push(points.len() as u32);
                        points.push(TokenPoint {
                            x,
                            t,
                            beyond_horizon: false,
                        });
                    }
                }
                SequenceSet {
                    mode,
                    k,
                    dt: grid.dt_grid(),
                    m: grid.m,
                    n: grid.n,
                    align_shift: None,
                    points,
                    seq_tokens,
                }
            }
            SequenceMode::Sub => {
                assert!(k >= 2, "a sub-sequence needs at least 2 tokens");
                assert!(dt > 0.0, "sequence interval must be positive");
                let ratio = grid.dt_grid() / dt;
                let shift = ratio.round();
                let lattice = shift >= 1.0 && (ratio - shift).abs() <= 1e-9 * ratio;
                let align_shift = if lattice && (shift as usize) < k {
                    Some(shift as usize)
                } else {
                    None
                };

                let mut points = Vec::new();
                let mut seq_tokens = Vec::with_capacity(grid.len() * k);
                if lattice {
                    let delta = shift as usize;
                    // All tokens of a column live on the sub-lattice
                    // `idx * dt`; overlapping sequences share entries.
                    let col_points = (grid.n - 1) * delta + k;
                    for i in 0..grid.m {
                        let x = grid.x(i);
                        let base = points.len() as u32;
                        for idx in 0..col_points {
                            let t = idx as f64 * dt;
                            let over = beyond(t);
                            points.push(TokenPoint {
                                x,
                                t: if over && !extrapolate_beyond_horizon {
                                    t_max
                                } else {
                                    t
                                },
                                beyond_horizon: over && extrapolate_beyond_horizon,
                            });
                        }
                        for j in 0..grid.n {
                            for jj in 0..k {
                                seq_tokens.push(base + (j * delta + jj) as u32);
                            }
                        }
                    }
                } else {
                    for i in 0..grid.m {
                        for j in 0..grid.n {
                            let (x, t0) = grid.point(i, j);
                            for jj in 0..k {
                                let t = t0 + jj as f64 * dt;
                                let over = beyond(t);
                                seq_tokens.push(points.len() as u32);
                                points.push(TokenPoint {
                                    x,
                                    t: if over && !extrapolate_beyond_horizon {
                                        t_max
                                    } else {
                                        t
                                    },
                                    beyond_horizon: over && extrapolate_beyond_horizon,
                                });
                            }
                        }
                    }
                }
                SequenceSet {
                    mode,
                    k,
                    dt,
                    m: grid.m,
                    n: grid.n,
                    align_shift,
                    points,
                    seq_tokens,
                }
            }
        }
    }

    /// One single-token "sequence" per grid point, for point-wise models
    /// trained with the plain (non-sequential) losses.
    pub fn single_points(grid: &Grid) -> Self {
        let mut points = Vec::with_capacity(grid.len());
        let mut seq_tokens = Vec::with_capacity(grid.len());
        for i in 0..grid.m {
            for j in 0..grid.n {
                let (x, t) = grid.point(i, j);
                seq_tokens.push(points.len() as u32);
                points.push(TokenPoint {
                    x,
                    t,
                    beyond_horizon: false,
                });
            }
        }
        SequenceSet {
            mode: SequenceMode::Sub,
            k: 1,
            dt: grid.dt_grid(),
            m: grid.m,
            n: grid.n,
            align_shift: None,
            points,
            seq_tokens,
        }
    }

    pub fn n_seq(&self) -> usize {
        self.seq_tokens.len() / self.k
    }

    pub fn token_index(&self, seq: usize, j: usize) -> usize {
        self.seq_tokens[seq * self.k + j] as usize
    }

    pub fn token_point(&self, seq: usize, j: usize) -> TokenPoint {
        self.points[self.token_index(seq, j)]
    }

    /// Grid indices of a sequence's anchor.
    pub fn anchor_of(&self, seq: usize) -> (usize, usize) {
        match self.mode {
            SequenceMode::Sub => (seq / self.n, seq % self.n),
            SequenceMode::Long => (seq, 0),
        }
    }

    /// `(sequence, token)` whose prediction represents grid point `(i, j)`.
    pub fn prediction_slot(&self, i: usize, j: usize) -> (usize, usize) {
        match self.mode {
            SequenceMode::Sub => (i * self.n + j, 0),
            SequenceMode::Long => (i, j),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_grid(m: usize, n: usize) -> Grid {
        Grid::new(Domain::new(0.0, 2.0 * PI, 1.0), m, n).unwrap()
    }

    #[test]
    fn grid_linspace_values() {
        let g = unit_grid(3, 3);
        assert_eq!((g.x(0), g.x(1), g.x(2)), (0.0, PI, 2.0 * PI));
        assert_eq!((g.t(0), g.t(1), g.t(2)), (0.0, 0.5, 1.0));
        assert_eq!(g.len(), 9);
    }

    #[test]
    fn grid_spacing_matches_default_interval() {
        let g = unit_grid(101, 101);
        assert!((g.dt_grid() - 0.01).abs() < 1e-18);
        assert_eq!(g.len(), 101 * 101);
    }

    #[test]
    fn grid_rejects_degenerate_axes() {
        assert!(Grid::new(Domain::new(0.0, 1.0, 1.0), 1, 3).is_err());
        assert!(Grid::new(Domain::new(0.0, 1.0, 1.0), 3, 1).is_err());
    }

    #[test]
    fn partition_counts_and_corners() {
        let g = unit_grid(3, 3);
        let sets = partition_sets(&g);
        assert_eq!(sets.interior.len(), 9);
        assert_eq!(sets.initial.len(), 3);
        assert_eq!(sets.boundary.len(), 6);
        let corners: Vec<_> = sets
            .initial
            .iter()
            .filter(|p| sets.boundary.contains(p))
            .collect();
        assert_eq!(corners.len(), 2);
    }

    #[test]
    fn subsequence_tokens() {
        let s = SubSequence::new((0.0, 0.0), 3, 0.01);
        let toks: Vec<_> = s.tokens().collect();
        assert_eq!(toks, vec![(0.0, 0.0), (0.0, 0.01), (0.0, 0.02)]);

        let s2 = SubSequence::new((1.0, 0.5), 2, 0.1);
        assert_eq!(s2.token(0), (1.0, 0.5));
        assert_eq!(s2.token(1), (1.0, 0.6));
    }

    #[test]
    fn subsequence_flags_horizon_overshoot() {
        let s = SubSequence::new((0.0, 1.0), 7, 0.01);
        assert!(!s.beyond_horizon(0, 1.0));
        assert!(s.beyond_horizon(6, 1.0));
        assert!((s.token(6).1 - 1.06).abs() < 1e-12);
    }

    #[test]
    fn overlap_pairs_indices_and_coordinates() {
        let a = SubSequence::new((0.5, 0.0), 3, 0.01);
        let b = SubSequence::new((0.5, a.t0 + a.dt), 3, 0.01);
        assert_eq!(overlap_pairs(&a, &b), vec![(1, 0), (2, 1)]);
        for (j, jb) in overlap_pairs(&a, &b) {
            assert_eq!(a.token(j), b.token(jb));
        }
        let a2 = SubSequence::new((0.5, 0.0), 2, 0.01);
        let b2 = SubSequence::new((0.5, 0.01), 2, 0.01);
        assert_eq!(overlap_pairs(&a2, &b2), vec![(1, 0)]);
    }

    #[test]
    #[should_panic(expected = "offset by exactly one dt")]
    fn overlap_rejects_misaligned_anchors() {
        let a = SubSequence::new((0.0, 0.0), 3, 0.01);
        let b = SubSequence::new((0.0, 0.025), 3, 0.01);
        let _ = overlap_pairs(&a, &b);
    }

    #[test]
    fn sequence_set_counts_and_anchor_identity() {
        let g = unit_grid(5, 4);
        let set = SequenceSet::build(&g, SequenceMode::Sub, 3, g.dt_grid(), true);
        assert_eq!(set.n_seq(), g.len());
        assert_eq!(set.align_shift, Some(1));
        for s in 0..set.n_seq() {
            let (i, j) = set.anchor_of(s);
            let p = set.token_point(s, 0);
            let (gx, gt) = g.point(i, j);
            assert_eq!(p.x.to_bits(), gx.to_bits());
            assert_eq!(p.t.to_bits(), gt.to_bits());
        }
    }

    #[test]
    fn sequence_set_shared_tokens_are_bit_exact() {
        let g = unit_grid(3, 6);
        for delta in [1usize, 5] {
            let dt = g.dt_grid() / delta as f64;
            let set = SequenceSet::build(&g, SequenceMode::Sub, 7, dt, true);
            assert_eq!(set.align_shift, Some(delta).filter(|&d| d < 7));
            if let Some(d) = set.align_shift {
                for i in 0..g.m {
                    for j in 0..g.n - 1 {
                        let sa = i * g.n + j;
                        let sb = sa + 1;
                        for jj in d..7 {
                            assert_eq!(
                                set.token_index(sa, jj),
                                set.token_index(sb, jj - d),
                                "tokens must be the same deduplicated point"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sequence_set_without_lattice_disables_alignment() {
        let g = unit_grid(3, 11); // dt_grid = 0.1
        let set = SequenceSet::build(&g, SequenceMode::Sub, 7, 1.0, true);
        assert_eq!(set.align_shift, None);
    }

    #[test]
    fn sequence_tokens_coincide_with_grid_points() {
        let g = unit_grid(4, 6);
        let set = SequenceSet::build(&g, SequenceMode::Sub, 3, g.dt_grid(), true);
        for s in 0..set.n_seq() {
            let (i, j) = set.anchor_of(s);
            for jj in 0..set.k {
                if j + jj < g.n {
                    let p = set.token_point(s, jj);
                    let (gx, gt) = g.point(i, j + jj);
                    assert!((p.x - gx).abs() < 1e-12);
                    assert!((p.t - gt).abs() < 1e-12);
                    assert!(!p.beyond_horizon);
                }
            }
        }
    }

    #[test]
    fn clamped_mode_pins_tokens_to_horizon() {
        let g = unit_grid(2, 3);
        let set = SequenceSet::build(&g, SequenceMode::Sub, 4, g.dt_grid(), false);
        let last_seq = g.n - 1; // anchor (0, t=T)
        for jj in 1..4 {
            let p = set.token_point(last_seq, jj);
            assert_eq!(p.t, 1.0);
            assert!(!p.beyond_horizon);
        }
    }

    #[test]
    fn long_mode_layout() {
        let g = unit_grid(4, 5);
        let set = SequenceSet::build(&g, SequenceMode::Long, 7, 0.01, true);
        assert_eq!(set.k, 5);
        assert_eq!(set.n_seq(), 4);
        assert_eq!(set.align_shift, None);
        let (s, j) = set.prediction_slot(2, 3);
        let p = set.token_point(s, j);
        let (gx, gt) = g.point(2, 3);
        assert_eq!((p.x, p.t), (gx, gt));
    }
}
