use infsup_lab_core::criteria::assembly_discrepancies;
use infsup_lab_core::mesh::Mesh;

#[test]
fn every_form_matches_requadrature_on_coarse_meshes() {
    for n in [2, 3] {
        let mesh = Mesh::unit_square(n).unwrap();
        let diffs = assembly_discrepancies(&mesh).unwrap();
        assert!(diffs.len() >= 20);
        for (name, d) in diffs {
            assert!(d <= 1e-12, "n={n} {name}: {d:e}");
        }
    }
}
