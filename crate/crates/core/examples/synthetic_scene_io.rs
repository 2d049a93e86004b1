// Generates a synthetic scene, writes it in the cube and label formats,
// reads it back and converts a raw band-interleaved dump.

use hsi_stv::io::{self, Interleave, RawLayout, RawScalar, SyntheticSceneSpec};
use hsi_stv::Result;

/// Returns the neighbour agreement of the generated label map.
pub fn run_example() -> Result<f64> {
    let dir = std::env::temp_dir().join(format!("hsi-synth-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| hsi_stv::Error::io(&dir, e))?;

    let spec = SyntheticSceneSpec {
        patch_side: 10,
        noise_sigma: 0.05,
        seed: 99,
        ..SyntheticSceneSpec::new(50, 60, 8, 5)
    };
    let (cube, gt) = io::generate_synthetic(&spec)?;
    let cube_path = dir.join("scene.hsic");
    let label_path = dir.join("scene.hsil");
    io::write_cube(&cube, &cube_path)?;
    io::write_labels(&gt, &label_path)?;

    let cube_back = io::read_cube(&cube_path)?;
    let gt_back = io::read_labels(&label_path)?;
    assert_eq!(gt_back, gt);
    let max_diff = cube
        .values()
        .iter()
        .zip(cube_back.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("cube stored as f32: largest round-trip change {max_diff:.2e}");
    println!("class histogram (0 = background): {:?}", gt.histogram());
    let agreement = io::neighbor_agreement(&gt);
    println!("4-neighbour label agreement: {agreement:.3}");

    // A 2x2 image with 3 bands as little-endian u16, band interleaved by line.
    let raw: Vec<u8> = [1u16, 2, 10, 20, 100, 200, 3, 4, 30, 40, 300, 400]
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    let layout = RawLayout {
        rows: 2,
        cols: 2,
        bands: 3,
        scalar: RawScalar::U16,
        big_endian: false,
        interleave: Interleave::Bil,
    };
    let converted = io::convert_raw_cube(&raw, &layout)?;
    println!("converted pixel (1, 1): {:?}", converted.spectrum(1, 1));

    std::fs::remove_dir_all(&dir).map_err(|e| hsi_stv::Error::io(&dir, e))?;
    Ok(agreement)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
