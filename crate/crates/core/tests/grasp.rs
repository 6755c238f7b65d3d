use blockid::grasp::{grasp_direction, grasp_pose, PointCloud};

#[test]
fn slab_is_grasped_across_its_thickness() {
    // long thin slab along the line y = x, thickness 0.02
    let mut pts = Vec::new();
    for i in 0..50 {
        for j in 0..3 {
            let t = i as f64 * 0.02;
            let n = j as f64 * 0.01;
            let z = (i % 5) as f64 * 0.1;
            pts.push([t - n / 2f64.sqrt(), t + n / 2f64.sqrt(), z]);
        }
    }
    let g = grasp_direction(&PointCloud::new(pts).unwrap()).unwrap();
    let s = 0.5f64.sqrt();
    assert!((g.direction[0] - s).abs() < 1e-9 && (g.direction[1] + s).abs() < 1e-9);
    assert!((g.width - 0.02).abs() < 1e-9);
}

#[test]
fn translation_moves_position_only() {
    let base = vec![[0.0, 0.0, 0.0], [3.0, 0.5, 1.0], [2.0, 2.0, 0.0], [-1.0, 1.5, 2.0], [0.5, -0.7, 1.0]];
    let shift = [4.0, -2.5, 0.75];
    let moved: Vec<[f64; 3]> = base
        .iter()
        .map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]])
        .collect();
    let a = grasp_pose(&PointCloud::new(base).unwrap()).unwrap();
    let b = grasp_pose(&PointCloud::new(moved).unwrap()).unwrap();
    for ((pb, pa), d) in b.position.iter().zip(&a.position).zip(&shift) {
        assert!((pb - pa - d).abs() < 1e-12);
    }
    assert!((a.direction[0] - b.direction[0]).abs() < 1e-12);
    assert!((a.direction[1] - b.direction[1]).abs() < 1e-12);
    assert!((a.width - b.width).abs() < 1e-12);
}
