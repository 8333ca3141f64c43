//! Structured meshes, refinement and the Lagrange spaces built on them.
//!
//! `cargo run --example mesh_spaces -- [nx] [ny]`

use std::sync::Arc;

use leray_fem::fem::FeSpace;
use leray_fem::mesh::TriMesh;

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let (nx, ny) = (args.first().copied().unwrap_or(8), args.get(1).copied().unwrap_or(4));
    let mesh = Arc::new(TriMesh::rect((0.0, 8.0), (0.0, 1.0), nx, ny).expect("valid box"));
    println!(
        "{nx}x{ny} cells: {} vertices, {} triangles, {} boundary edges, h_max {:.4}, area {}",
        mesh.num_vertices(),
        mesh.num_triangles(),
        mesh.boundary_edges().len(),
        mesh.h_max(),
        mesh.total_area()
    );
    let fine = mesh.refine_uniform();
    println!("refined: {} triangles, h_max {:.4}", fine.num_triangles(), fine.h_max());

    for k in 1..=3 {
        let space = FeSpace::new(mesh.clone(), k).expect("supported degree");
        let boundary = (0..space.num_dofs()).filter(|&d| space.is_boundary_dof(d)).count();
        println!(
            "P{k}: {} dofs, {} on the boundary, {} per element",
            space.num_dofs(),
            boundary,
            space.dofs_per_element()
        );
    }

    let p = [3.3, 0.7];
    let (t, lam) = mesh.locate(p).expect("point inside the box");
    println!("{p:?} lies in triangle {t} with barycentric coordinates {lam:.3?}");
}
