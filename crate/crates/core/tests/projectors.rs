use proptest::prelude::*;
use tomocouple::metrics::psnr;
use tomocouple::phantom::Phantom;
use tomocouple::projectors::{assemble_dense, assemble_dense_adjoint};
use tomocouple::{Geometry, ImageGrid, ProjectorKind, ProjectorPair, SeededRng, Sinogram};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn probed_adjoint_is_the_transpose() {
    let g = Geometry::new(20, 16).unwrap();
    for kind in ProjectorKind::ALL {
        let pair = ProjectorPair::new(kind, &g).unwrap();
        let a = assemble_dense(&pair).unwrap().transpose();
        let at = assemble_dense_adjoint(&pair).unwrap();
        assert_eq!((a.rows, a.cols), (at.rows, at.cols));
        let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let worst = a.data.iter().zip(&at.data).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(worst <= 1e-10 * scale.max(1.0), "{kind}: {worst:e}");
    }
}

#[test]
fn one_pixel_shift_moves_the_zero_degree_view_by_one_cell() {
    let g = Geometry::new(4, 16).unwrap();
    let mut a = ImageGrid::zeros(16, 16);
    let mut b = ImageGrid::zeros(16, 16);
    a.set(7, 5, 1.0);
    b.set(7, 6, 1.0);
    for kind in [ProjectorKind::Pd, ProjectorKind::Rd, ProjectorKind::Dd, ProjectorKind::Ss] {
        let pair = ProjectorPair::new(kind, &g).unwrap();
        let (sa, sb) = (pair.forward(&a).unwrap(), pair.forward(&b).unwrap());
        let (ra, rb) = (sa.row(0), sb.row(0));
        for n in 0..15 {
            assert!((ra[n] - rb[n + 1]).abs() < 1e-12, "{kind} cell {n}: {} vs {}", ra[n], rb[n + 1]);
        }
    }
}

#[test]
fn single_pixel_mass_is_preserved_per_view() {
    let g = Geometry::new(12, 24).unwrap();
    let mut img = ImageGrid::zeros(24, 24);
    img.set(10, 13, 1.0);
    for kind in ProjectorKind::ALL {
        let pair = ProjectorPair::new(kind, &g).unwrap();
        let s = pair.forward(&img).unwrap();
        let masses: Vec<f64> = (0..12).map(|k| s.row(k).iter().sum()).collect();
        if matches!(kind, ProjectorKind::Pd | ProjectorKind::Dd) {
            for (k, m) in masses.iter().enumerate() {
                assert!((m - 1.0).abs() < 1e-9, "{kind} view {k}: {m}");
            }
        } else {
            // sampled footprints conserve the mass of one pixel only on average
            let mean = masses.iter().sum::<f64>() / 12.0;
            assert!((mean - 1.0).abs() < 0.05, "{kind}: {mean}");
        }
    }
}

#[test]
fn gridding_agrees_with_slant_stacking() {
    let g = Geometry::new(402, 256).unwrap();
    let raster = Phantom::shepp_logan().rasterize(256).unwrap();
    let ss = ProjectorPair::new(ProjectorKind::Ss, &g).unwrap().forward(&raster).unwrap();
    for kind in [ProjectorKind::Wf, ProjectorKind::Kb] {
        let s = ProjectorPair::new(kind, &g).unwrap().forward(&raster).unwrap();
        let q = psnr(&s, &ss, None).unwrap();
        assert!(q >= 30.0, "{kind}: {q:.2} dB");
    }
}

fn random_pair(p: usize, m: usize, seed: u64) -> (ImageGrid, Sinogram) {
    let g = Geometry::new(m, p).unwrap();
    let mut rng = SeededRng::new(seed);
    let x = ImageGrid::from_vec(p, p, rng.uniform_sym_vec(p * p)).unwrap();
    let y = Sinogram::from_vec(&g, rng.uniform_sym_vec(m * p)).unwrap();
    (x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adjoint_identity_holds(p in 4usize..14, m in 1usize..9, seed in any::<u64>(), k in 0usize..6) {
        let kind = ProjectorKind::ALL[k];
        let (x, y) = random_pair(p, m, seed);
        let pair = ProjectorPair::new(kind, y.geometry()).unwrap();
        let lhs = dot(pair.forward(&x).unwrap().data(), y.data());
        let rhs = dot(x.data(), pair.adjoint(&y).unwrap().data());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1.0), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn forward_is_linear(p in 4usize..12, m in 1usize..6, seed in any::<u64>(), k in 0usize..6, a in -3.0f64..3.0) {
        let kind = ProjectorKind::ALL[k];
        let (x, _) = random_pair(p, m, seed);
        let (z, y) = random_pair(p, m, seed.wrapping_add(1));
        let pair = ProjectorPair::new(kind, y.geometry()).unwrap();
        let mixed = ImageGrid::from_vec(p, p, x.data().iter().zip(z.data()).map(|(u, v)| a * u + v).collect()).unwrap();
        let lhs = pair.forward(&mixed).unwrap();
        let (fx, fz) = (pair.forward(&x).unwrap(), pair.forward(&z).unwrap());
        for ((l, u), v) in lhs.data().iter().zip(fx.data()).zip(fz.data()) {
            prop_assert!((l - (a * u + v)).abs() <= 1e-10 * (1.0 + l.abs()));
        }
    }
}
