use hif_core::dataset_io::{
    read_labels, read_poses, read_scan_bin, write_labels, write_poses, write_scan_bin,
    SequenceReader, SequenceSpec,
};
use hif_core::synthetic::SceneSpec;
use hif_core::{gen_scene, ScanFrame};

#[test]
fn generated_sequence_survives_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SceneSpec {
        scans: 3,
        ..SceneSpec::street()
    };
    let frames: Vec<ScanFrame<f32>> = gen_scene(&spec, 9).unwrap();
    let scans = dir.path().join("velodyne");
    let labels = dir.path().join("labels");
    std::fs::create_dir_all(&scans).unwrap();
    std::fs::create_dir_all(&labels).unwrap();
    for f in &frames {
        write_scan_bin(&scans.join(format!("{:06}.bin", f.index)), &f.points).unwrap();
        write_labels(
            &labels.join(format!("{:06}.label", f.index)),
            f.labels.as_ref().unwrap(),
        )
        .unwrap();
    }
    let poses: Vec<_> = frames.iter().map(|f| f.pose).collect();
    let pose_file = dir.path().join("poses.txt");
    write_poses(&pose_file, &poses).unwrap();

    let f0 = &frames[0];
    let (points, diag) = read_scan_bin::<f32>(&scans.join("000000.bin")).unwrap();
    assert_eq!(diag.total(), 0);
    let xyz = |p: &hif_core::Point3<f32>| (p.x, p.y, p.z);
    assert_eq!(
        points.iter().map(xyz).collect::<Vec<_>>(),
        f0.points.iter().map(xyz).collect::<Vec<_>>()
    );
    assert_eq!(
        &read_labels(&labels.join("000000.label")).unwrap(),
        f0.labels.as_ref().unwrap()
    );
    let back = read_poses(&pose_file, None).unwrap();
    for (a, b) in back.iter().zip(&poses) {
        for i in 0..3 {
            assert!((a.translation()[i] - f64::from(b.translation()[i])).abs() < 1e-6);
        }
    }

    let reader = SequenceReader::open(SequenceSpec {
        scan_dir: scans,
        pose_file,
        calib_file: None,
        label_dir: Some(labels),
        frame_range: (0, 2),
    })
    .unwrap();
    let (frame, _) = reader.load_frame::<f64>(2).unwrap();
    assert_eq!(frame.len(), frames[2].len());
    assert_eq!(frame.labels, frames[2].labels);
}
