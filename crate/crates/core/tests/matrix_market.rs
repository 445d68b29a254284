use lanczos_switch::problems::{
    format_matrix_market, parse_matrix_market, write_matrix_market, MmSymmetry,
};
use lanczos_switch::{gen_baheux, read_matrix_market, BaheuxSpec, CsrMatrix, Vector};

#[test]
fn baheux_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.mtx");
    for delta in [0.0, 0.2, 5.0, 8.0] {
        let p = gen_baheux(BaheuxSpec::new(40, delta).unwrap()).unwrap();
        write_matrix_market(&p.a, &path, MmSymmetry::General).unwrap();
        let q = read_matrix_market(&path, None).unwrap();
        assert_eq!(q.a, p.a);
        assert_eq!(q.b, p.b);
    }
}

#[test]
fn symmetric_storage_matches_general() {
    let p = gen_baheux(BaheuxSpec::new(30, 0.0).unwrap()).unwrap();
    let sym =
        parse_matrix_market(&format_matrix_market(&p.a, MmSymmetry::Symmetric).unwrap()).unwrap();
    let gen =
        parse_matrix_market(&format_matrix_market(&p.a, MmSymmetry::General).unwrap()).unwrap();
    assert_eq!(sym.to_dense(), gen.to_dense());
    assert_eq!(sym.to_dense(), p.a.to_dense());
    let skew = gen_baheux(BaheuxSpec::new(30, 0.2).unwrap()).unwrap();
    assert!(format_matrix_market(&skew.a, MmSymmetry::Symmetric).is_err());
}

#[test]
fn explicit_rhs_file() {
    let dir = tempfile::tempdir().unwrap();
    let a_path = dir.path().join("a.mtx");
    let b_path = dir.path().join("b.txt");
    let a = CsrMatrix::diagonal(&[2.0, 4.0, 8.0]);
    write_matrix_market(&a, &a_path, MmSymmetry::General).unwrap();
    std::fs::write(&b_path, "2\n4\n8\n").unwrap();
    let p = read_matrix_market(&a_path, Some(&b_path)).unwrap();
    assert_eq!(p.b, Vector::new(vec![2.0, 4.0, 8.0]).unwrap());
    std::fs::write(&b_path, "2\n4\n").unwrap();
    assert!(read_matrix_market(&a_path, Some(&b_path)).is_err());
}
