//! Patch-bucket index over agent positions.
//!
//! Agents sit on integer patches, so buckets are single patches stored in
//! CSR form (`starts[p]..starts[p + 1]` indexes into `agents`).

use crate::lattice::{Lattice, Position};

#[derive(Debug, Clone)]
pub struct PatchIndex {
    lattice: Lattice,
    starts: Vec<u32>,
    agents: Vec<u32>,
}

impl PatchIndex {
    /// Index the agents yielded by `positions` as `(agent index, position)`.
    pub fn build<I>(lattice: Lattice, positions: I) -> Self
    where
        I: IntoIterator<Item = (u32, Position)>,
        I::IntoIter: Clone,
    {
        let it = positions.into_iter();
        let n = lattice.patch_count() as usize;
        let mut starts = vec![0u32; n + 1];
        for (_, p) in it.clone() {
            starts[lattice.index(p) + 1] += 1;
        }
        for i in 0..n {
            starts[i + 1] += starts[i];
        }
        let mut cursor = starts.clone();
        let mut agents = vec![0u32; starts[n] as usize];
        for (id, p) in it {
            let slot = &mut cursor[lattice.index(p)];
            agents[*slot as usize] = id;
            *slot += 1;
        }
        Self {
            lattice,
            starts,
            agents,
        }
    }

    pub fn at(&self, p: Position) -> &[u32] {
        let i = self.lattice.index(p);
        &self.agents[self.starts[i] as usize..self.starts[i + 1] as usize]
    }

    /// Visit every agent whose patch lies in the square of half-width
    /// `reach` around `center`. Each agent is visited once even when the
    /// square wraps onto itself.
    pub fn for_each_in_square(&self, center: Position, reach: u32, mut f: impl FnMut(u32)) {
        let side = self.lattice.side();
        if 2 * u64::from(reach) + 1 >= u64::from(side) {
            self.agents.iter().copied().for_each(f);
            return;
        }
        let r = reach as i32;
        for dy in -r..=r {
            for dx in -r..=r {
                for &a in self.at(self.lattice.shift(center, dx, dy)) {
                    f(a);
                }
            }
        }
    }
}
