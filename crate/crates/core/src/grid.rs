//! Finite belief grids over the probability simplex.

use crate::problem::Belief;

/// Lattice of beliefs whose entries are multiples of `1/resolution`.
///
/// For two states the points are ordered by increasing mass on the second
/// state, so point `k` is `(1 − k/n, k/n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefGrid {
    points: Vec<Belief>,
    resolution: Option<u32>,
}

impl BeliefGrid {
    /// 100 for binary state spaces, 20 otherwise.
    pub fn default_resolution(n_states: usize) -> u32 {
        if n_states <= 2 {
            100
        } else {
            20
        }
    }

    pub fn default_for(n_states: usize) -> Self {
        Self::simplex(n_states, Self::default_resolution(n_states))
    }

    pub fn simplex(n_states: usize, resolution: u32) -> Self {
        assert!(n_states >= 1 && resolution >= 1);
        let mut points = Vec::new();
        let mut counts = vec![0u32; n_states];
        compositions(resolution, n_states - 1, &mut counts, &mut |c| {
            let probs = c.iter().map(|k| f64::from(*k) / f64::from(resolution)).collect();
            points.push(Belief::from_vec_unchecked(probs));
        });
        Self {
            points,
            resolution: Some(resolution),
        }
    }

    pub fn from_points(points: Vec<Belief>) -> Self {
        Self {
            points,
            resolution: None,
        }
    }

    pub fn points(&self) -> &[Belief] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn resolution(&self) -> Option<u32> {
        self.resolution
    }

    pub fn n_states(&self) -> usize {
        self.points.first().map_or(0, Belief::len)
    }
}

// Enumerates compositions of `remaining` over `counts[..=idx]`, the highest
// coordinate varying slowest so binary grids come out as (1−k/n, k/n).
fn compositions(remaining: u32, idx: usize, counts: &mut [u32], emit: &mut impl FnMut(&[u32])) {
    if idx == 0 {
        counts[0] = remaining;
        emit(counts);
        return;
    }
    for k in 0..=remaining {
        counts[idx] = k;
        compositions(remaining - k, idx - 1, counts, emit);
    }
}
