use std::path::{Path, PathBuf};

use rrl_core::data::{
    generate_glyphs, load_idx, load_idx_dir, load_image_dir, read_netpbm, write_idx, write_synthetic_split, Dataset,
};
use rrl_core::Error;

fn idx_images(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let mut b = vec![0, 0, 8, 3];
    for v in [count, rows, cols] {
        b.extend_from_slice(&v.to_be_bytes());
    }
    b.extend_from_slice(pixels);
    b
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut b = vec![0, 0, 8, 1];
    b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    b.extend_from_slice(labels);
    b
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, bytes).unwrap();
    p
}

#[test]
fn idx_fixture_loads_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let pixels: Vec<u8> = (0..4 * 2 * 3).map(|i| (i * 11) as u8).collect();
    let ip = write(dir.path(), "img", &idx_images(4, 2, 3, &pixels));
    let lp = write(dir.path(), "lbl", &idx_labels(&[3, 0, 9, 1]));
    let d: Dataset<f64> = load_idx(&ip, &lp).unwrap();
    assert_eq!(d.len(), 4);
    assert_eq!(d.image_shape(), Some([1, 2, 3, 1]));
    assert_eq!(d.labels(), &[3, 0, 9, 1]);
    assert_eq!(d.classes(), 10);
    for (i, img) in d.images().iter().enumerate() {
        let expected: Vec<f64> = pixels[i * 6..(i + 1) * 6].iter().map(|&p| p as f64 / 255.0).collect();
        assert_eq!(img.as_slice(), &expected[..]);
    }
}

#[test]
fn idx_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let good_i = write(dir.path(), "i", &idx_images(2, 1, 1, &[0, 255]));
    let good_l = write(dir.path(), "l", &idx_labels(&[0, 1]));

    let empty = write(dir.path(), "empty", &[]);
    assert!(matches!(load_idx::<f32>(&empty, &good_l), Err(Error::Truncated { .. })));
    let short = write(dir.path(), "short", &idx_images(3, 1, 1, &[0, 1]));
    assert!(matches!(load_idx::<f32>(&short, &good_l), Err(Error::Truncated { .. })));

    let three = write(dir.path(), "three", &idx_labels(&[0, 1, 2]));
    assert!(matches!(load_idx::<f32>(&good_i, &three), Err(Error::CountMismatch { images: 2, labels: 3 })));

    assert!(matches!(
        load_idx::<f32>(&good_l, &good_l),
        Err(Error::BadMagic { expected: 0x803, found: 0x801, .. })
    ));
    assert!(matches!(load_idx::<f32>(&good_i, &good_i), Err(Error::BadMagic { expected: 0x801, .. })));

    let missing = dir.path().join("nope");
    assert!(load_idx::<f32>(&missing, &good_l).unwrap_err().is_io());
}

#[test]
fn idx_writer_round_trips_glyphs() {
    let dir = tempfile::tempdir().unwrap();
    let d = generate_glyphs::<f64>(30, 28, 4).unwrap();
    let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
    write_idx(&d, &ip, &lp).unwrap();
    assert_eq!(load_idx::<f64>(&ip, &lp).unwrap(), d);

    write_synthetic_split(dir.path(), 20, 10, 1).unwrap();
    let (train, test) = load_idx_dir::<f32>(dir.path()).unwrap();
    assert_eq!((train.len(), test.len()), (20, 10));
}

#[test]
fn ppm_fixture_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut p6 = b"P6\n# three by three\n3 3\n255\n".to_vec();
    p6.extend((0..27).map(|i| (i * 9) as u8));
    write(dir.path(), "a.ppm", &p6);
    let mut p5 = b"P5 3 3 255 ".to_vec();
    p5.extend([0, 255, 0, 255, 0, 255, 0, 255, 0]);
    write(dir.path(), "b.pgm", &p5);

    let t = read_netpbm::<f64>(&dir.path().join("a.ppm")).unwrap();
    assert_eq!(t.shape(), [1, 3, 3, 3]);
    assert_eq!(t[[0, 0, 1, 0]], 27.0 / 255.0);
    assert_eq!(t[[0, 2, 2, 2]], 234.0 / 255.0);

    let m = write(dir.path(), "manifest.csv", b"filename,label\na.ppm,2\n");
    let d = load_image_dir::<f64>(dir.path(), &m).unwrap();
    assert_eq!((d.len(), d.labels(), d.classes()), (1, &[2usize][..], 3));
    assert_eq!(d.images()[0], t);

    let m = write(dir.path(), "gray.csv", b"b.pgm, 1\nb.pgm,0\n");
    let d = load_image_dir::<f32>(dir.path(), &m).unwrap();
    assert_eq!(d.image_shape(), Some([1, 3, 3, 1]));
    assert_eq!(d.images()[0].as_slice()[1], 1.0);
}

#[test]
fn sixteen_bit_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let mut b = b"P5\n2 1\n1000\n".to_vec();
    b.extend_from_slice(&500u16.to_be_bytes());
    b.extend_from_slice(&1000u16.to_be_bytes());
    let p = write(dir.path(), "x.pgm", &b);
    assert_eq!(read_netpbm::<f64>(&p).unwrap().as_slice(), &[0.5, 1.0]);
}

#[test]
fn image_dir_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.csv", b"");
    assert!(load_image_dir::<f32>(dir.path(), &empty).unwrap().is_empty());

    write(dir.path(), "bad.ppm", b"P3\n1 1\n255\n0 0 0\n");
    let m = write(dir.path(), "m1.csv", b"bad.ppm,0\n");
    assert!(matches!(load_image_dir::<f32>(dir.path(), &m), Err(Error::Netpbm { .. })));

    write(dir.path(), "noheader.pgm", b"P5\n2\n");
    let m = write(dir.path(), "m2.csv", b"noheader.pgm,0\n");
    assert!(matches!(load_image_dir::<f32>(dir.path(), &m), Err(Error::Netpbm { .. })));

    let mut short = b"P5\n2 2\n255\n".to_vec();
    short.push(7);
    write(dir.path(), "short.pgm", &short);
    let m = write(dir.path(), "m3.csv", b"short.pgm,0\n");
    assert!(matches!(load_image_dir::<f32>(dir.path(), &m), Err(Error::Truncated { .. })));

    let m = write(dir.path(), "m4.csv", b"x.pgm,cat\n");
    assert!(matches!(load_image_dir::<f32>(dir.path(), &m), Err(Error::Manifest { line: 1, .. })));

    let m = write(dir.path(), "m5.csv", b"missing.pgm,0\n");
    assert!(load_image_dir::<f32>(dir.path(), &m).unwrap_err().is_io());

    let m = write(dir.path(), "m6.csv", b"a,1,2\n");
    assert!(matches!(load_image_dir::<f32>(dir.path(), &m), Err(Error::Manifest { .. })));

    assert!(load_image_dir::<f32>(dir.path(), &dir.path().join("none.csv")).unwrap_err().is_io());
}
