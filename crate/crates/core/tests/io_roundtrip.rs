use lusin_core::algebra::{essential_range, OperatorSpec};
use lusin_core::construct::{realize, Grid, RealizeOptions};
use lusin_core::io::{
    field_from_json, field_to_json, ledger_from_csv, ledger_jump_mass, ledger_to_csv,
    operator_from_json, operator_to_json, read_field, read_operator, write_field_binary, FieldData,
};
use lusin_core::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs;

fn random_field(seed: u64, space_dim: usize, r: usize, dim_f: usize) -> FieldData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FieldData {
        space_dim,
        r,
        dim_f,
        cells: (0..r.pow(space_dim as u32))
            .map(|_| DVector::from_fn(dim_f, |_, _| rng.gen_range(-1e3..1e3) / 7.0))
            .collect(),
    }
}

#[test]
fn binary_sidecar_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("field.json");
    let field = random_field(1, 2, 3, 4);
    write_field_binary(&field, &path).unwrap();
    assert!(dir.path().join("field.bin").exists());
    assert_eq!(
        fs::metadata(dir.path().join("field.bin")).unwrap().len(),
        9 * 4 * 8
    );
    assert_eq!(read_field(&path).unwrap(), field);
}

#[test]
fn inline_field_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inline.json");
    let field = random_field(2, 3, 2, 1);
    fs::write(&path, field_to_json(&field)).unwrap();
    assert_eq!(read_field(&path).unwrap(), field);
    assert_eq!(field_from_json(&field_to_json(&field)).unwrap(), field);
}

#[test]
fn truncated_sidecar_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("field.json");
    write_field_binary(&random_field(3, 1, 4, 2), &path).unwrap();
    let bin = dir.path().join("field.bin");
    let bytes = fs::read(&bin).unwrap();
    fs::write(&bin, &bytes[..bytes.len() - 3]).unwrap();
    assert!(read_field(&path).is_err());
    fs::write(&bin, &bytes[..bytes.len() - 8]).unwrap();
    assert!(read_field(&path).is_err());
}

#[test]
fn header_with_both_or_neither_payload_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.json");
    fs::write(
        &path,
        r#"{"N":1,"r":1,"dimF":1,"layout":"cell-major-rowmajor"}"#,
    )
    .unwrap();
    assert!(read_field(&path).is_err());
    fs::write(
        &path,
        r#"{"N":1,"r":1,"dimF":1,"layout":"cell-major-rowmajor","data":[1.0],"binary":"f.bin"}"#,
    )
    .unwrap();
    assert!(read_field(&path).is_err());
}

#[test]
fn operator_file_round_trips_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("op.json");
    let op = OperatorSpec::first_order(vec![
        DMatrix::from_row_slice(2, 3, &[1.0, 0.5, -0.25, 0.0, 2.0, 1e-7]),
        DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 1.0, -3.0, 0.1, 0.2]),
    ])
    .unwrap();
    fs::write(&path, operator_to_json(&op)).unwrap();
    assert_eq!(read_operator(&path).unwrap(), op);
    assert_eq!(operator_from_json(&operator_to_json(&op)).unwrap(), op);
    assert!(read_operator(&dir.path().join("missing.json")).is_err());
}

#[test]
fn ledger_round_trip_reproduces_jump_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (n, r, m) in [(1, 3, 4), (2, 3, 2), (3, 2, 3)] {
        let blocks = (0..n)
            .map(|_| DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let op = OperatorSpec::first_order(blocks).unwrap();
        let basis = essential_range(&op);
        let grid = Grid::new(n, r).unwrap();
        let field: Vec<_> = (0..grid.cell_count())
            .map(|_| &basis * DVector::from_fn(basis.ncols(), |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let options = RealizeOptions {
            slab_count: m,
            ..RealizeOptions::default()
        };
        let real = realize(&op, &field, grid, options).unwrap();
        let csv = ledger_to_csv(&real.decomposition, op.dim_e()).unwrap();
        let rows = ledger_from_csv(&csv).unwrap();
        assert_eq!(rows.len(), real.decomposition.faces.len());
        let want = real.decomposition.jump_mass;
        let got = ledger_jump_mass(&rows);
        assert!(
            (got - want).abs() <= 1e-12 * (1.0 + want),
            "{got} vs {want}"
        );
        for ((row, face), g) in rows
            .iter()
            .zip(&real.decomposition.faces)
            .zip(&real.decomposition.jump_density)
        {
            assert_eq!(&row.face, face);
            assert_eq!(&row.density, g);
        }
    }
}

#[test]
fn empty_ledger_is_a_header_only_csv() {
    let op = OperatorSpec::gradient(2, 1).unwrap();
    let grid = Grid::new(2, 2).unwrap();
    let real = realize(
        &op,
        &vec![DVector::zeros(2); 4],
        grid,
        RealizeOptions::default(),
    )
    .unwrap();
    let csv = ledger_to_csv(&real.decomposition, 1).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("faceId,cellIndex,axis,planeOffset,area,kind"));
    assert!(ledger_from_csv(&csv).unwrap().is_empty());
}
