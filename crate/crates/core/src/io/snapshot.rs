//! Binary P6 pixmap snapshots: one `k×k` block per patch, colored by the
//! population of the last agent (highest id) on that patch.

use std::io::Write;

use crate::dynamics::WorldState;
use crate::lattice::Lattice;

pub const DEFAULT_SCALE: u32 = 8;

pub const PALETTE: [[u8; 3]; 12] = [
    [215, 38, 38],
    [38, 84, 215],
    [46, 171, 70],
    [240, 200, 30],
    [160, 60, 190],
    [30, 190, 190],
    [240, 130, 20],
    [230, 100, 170],
    [140, 100, 50],
    [170, 200, 60],
    [120, 120, 240],
    [200, 200, 200],
];

pub fn population_color(population_index: usize) -> [u8; 3] {
    PALETTE[population_index % PALETTE.len()]
}

/// Write the snapshot to `sink`; returns the number of bytes written.
pub fn render_snapshot<W: Write>(
    state: &WorldState,
    lattice: &Lattice,
    scale: u32,
    mut sink: W,
) -> std::io::Result<usize> {
    let scale = scale.max(1) as usize;
    let side = lattice.side() as usize;
    let mut patch = vec![[0u8; 3]; side * side];
    for a in &state.agents {
        patch[lattice.index(a.position)] = population_color(a.population.index());
    }
    let width = side * scale;
    let header = format!("P6\n{width} {width}\n255\n");
    let mut buf = Vec::with_capacity(header.len() + width * width * 3);
    buf.extend_from_slice(header.as_bytes());
    for y in 0..side {
        let mut row = Vec::with_capacity(width * 3);
        for x in 0..side {
            for _ in 0..scale {
                row.extend_from_slice(&patch[y * side + x]);
            }
        }
        for _ in 0..scale {
            buf.extend_from_slice(&row);
        }
    }
    sink.write_all(&buf)?;
    Ok(buf.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Agent;
    use crate::lattice::Position;
    use crate::model::PopulationId;

    fn render(state: &WorldState, side: u32, scale: u32) -> Vec<u8> {
        let mut out = Vec::new();
        let n = render_snapshot(state, &Lattice::new(side).unwrap(), scale, &mut out).unwrap();
        assert_eq!(n, out.len());
        out
    }

    #[test]
    fn empty_world_is_black() {
        let img = render(
            &WorldState {
                tick: 0,
                agents: vec![],
            },
            3,
            1,
        );
        let header = b"P6\n3 3\n255\n";
        assert_eq!(&img[..header.len()], header);
        assert_eq!(img.len(), header.len() + 27);
        assert!(img[header.len()..].iter().all(|&b| b == 0));
    }

    #[test]
    fn one_agent_lights_top_left_block() {
        let s = WorldState {
            tick: 0,
            agents: vec![Agent {
                id: 0,
                population: PopulationId(1),
                position: Position::new(0, 0),
                active: true,
            }],
        };
        let img = render(&s, 4, 2);
        let header_len = b"P6\n8 8\n255\n".len();
        let pixels: Vec<&[u8]> = img[header_len..].chunks(3).collect();
        assert_eq!(pixels.len(), 64);
        for (i, px) in pixels.iter().enumerate() {
            let (x, y) = (i % 8, i / 8);
            if x < 2 && y < 2 {
                assert_eq!(*px, &PALETTE[1]);
            } else {
                assert_eq!(*px, &[0, 0, 0]);
            }
        }
        assert_eq!(img, render(&s, 4, 2));
    }

    #[test]
    fn last_agent_wins_the_patch() {
        let at = |id, pop| Agent {
            id,
            population: PopulationId(pop),
            position: Position::new(1, 1),
            active: true,
        };
        let s = WorldState {
            tick: 0,
            agents: vec![at(0, 0), at(1, 2)],
        };
        let img = render(&s, 3, 1);
        let off = b"P6\n3 3\n255\n".len() + 3 * 4;
        assert_eq!(&img[off..off + 3], &PALETTE[2]);
    }
}
