use std::collections::HashMap;

use super::TriMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WatertightReport {
    pub watertight: bool,
    /// Undirected edges not shared by exactly two faces.
    pub non_manifold_edges: usize,
}

/// Edge-incidence check: watertight iff every undirected edge bounds exactly two faces.
pub fn check_watertight(mesh: &TriMesh) -> WatertightReport {
    let mut incidence: HashMap<(usize, usize), u32> = HashMap::new();
    for &[a, b, c] in mesh.faces() {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            *incidence.entry((u.min(v), u.max(v))).or_default() += 1;
        }
    }
    let bad = incidence.values().filter(|&&n| n != 2).count();
    WatertightReport {
        watertight: bad == 0 && !mesh.faces().is_empty(),
        non_manifold_edges: bad,
    }
}
