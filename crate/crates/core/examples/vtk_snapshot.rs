//! A few steps of the manufactured solution written as a VTK snapshot.
//!
//! `cargo run --release --example vtk_snapshot -- [out.vtk]`

use std::sync::Arc;

use leray_fem::io::{snapshot_data, write_vtk};
use leray_fem::mesh::TriMesh;
use leray_fem::stepper::{FlowParams, Model, Simulation};
use leray_fem::verification::{mms_stepper_options, MmsProblem};

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| "mms_snapshot.vtk".into());
    let problem = MmsProblem::default();
    let mesh = Arc::new(TriMesh::rect((0.0, 1.0), (0.0, 1.0), 8, 8).expect("valid box"));
    let params = FlowParams {
        re: problem.re,
        ri: problem.ri,
        pr: problem.pr,
        dt: 0.05,
        t_end: 0.25,
        alpha: 0.125,
        order: 1,
        model: Model::AdaptiveLeray,
    };
    let mut sim = Simulation::new(mesh, 2, params, mms_stepper_options(), Arc::new(problem)).expect("set-up");
    sim.run(|_, r| println!("step {}: divergence residual {:.1e}", r.step, r.divergence_residual)).expect("run");
    let (vis, data) = snapshot_data(sim.state(), sim.last_indicator(), true).expect("sampling");
    write_vtk(path.as_ref(), &vis, &data, "manufactured solution").expect("write");
    println!("wrote {path}: {} points, {} cells", vis.num_vertices(), vis.num_triangles());
}
