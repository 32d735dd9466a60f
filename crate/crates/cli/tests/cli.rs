use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stereo_avoid::imgio::{load_gray, load_kitti_disparity, save_gray, write_disparity, DisparityFormat};
use stereo_avoid::sgm::PathCount;
use stereo_avoid::sim::{add_sensor_noise, render_stereo_pair, sim_calibration, Scene, Vec3};
use stereo_avoid::{CostKind, DisparityMap, Engine, GrayImage};
use stereo_avoid_cli::{parse_config, parse_config_for, CliError, ConfigArgs};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stereo-avoid"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scene_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenes").join(name)
}

/// Noise texture and its copy shifted left by `k` pixels.
fn shifted_pair(w: usize, h: usize, k: usize) -> (GrayImage, GrayImage) {
    let px = |x: usize, y: usize| ((x * 7919 + y * 104_729 + (x * y) % 97) % 251) as u8;
    let left = GrayImage::from_fn(w, h, px).unwrap();
    let right = GrayImage::from_fn(w, h, |x, y| px(x + k, y)).unwrap();
    (left, right)
}

#[test]
fn defaults_are_census() {
    let cfg = parse_config(&ConfigArgs::default()).unwrap();
    assert_eq!(cfg.cost, CostKind::Census);
    assert_eq!((cfg.d_max, cfg.p1, cfg.p2, cfg.radius), (60, 8, 32, 2));
    assert_eq!((cfg.paths, cfg.engine, cfg.lr_tol, cfg.median_k), (PathCount::Four, Engine::Streaming, 1, 5));
}

#[test]
fn sad_swaps_penalties_unless_given() {
    let args = ConfigArgs {
        cost: Some("sad".into()),
        ..ConfigArgs::default()
    };
    let cfg = parse_config(&args).unwrap();
    assert_eq!((cfg.cost, cfg.p1, cfg.p2), (CostKind::Sad, 200, 800));
    let args = ConfigArgs {
        p1: Some("50".into()),
        ..args
    };
    assert_eq!(parse_config(&args).unwrap().p1, 50);
    let forced = parse_config_for(&ConfigArgs::default(), CostKind::Sad).unwrap();
    assert_eq!((forced.p1, forced.p2), (200, 800));
}

#[test]
fn out_of_range_values_name_the_key() {
    let args = ConfigArgs {
        dmax: Some("0".into()),
        ..ConfigArgs::default()
    };
    match parse_config(&args) {
        Err(CliError::Usage(msg)) => assert!(msg.contains("dmax"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
    let args = ConfigArgs {
        p1: Some("40".into()),
        p2: Some("10".into()),
        ..ConfigArgs::default()
    };
    assert!(matches!(parse_config(&args), Err(CliError::Usage(_))));
    let args = ConfigArgs {
        paths: Some("8".into()),
        ..ConfigArgs::default()
    };
    assert!(matches!(parse_config(&args), Err(CliError::Usage(_))));
    let args = ConfigArgs {
        paths: Some("8".into()),
        engine: Some("reference".into()),
        ..ConfigArgs::default()
    };
    assert_eq!(parse_config(&args).unwrap().paths, PathCount::Eight);
}

#[test]
fn no_rectify_drops_maps_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.conf");
    fs::write(&file, "rect_left = a.rmap\nrect_right = b.rmap\n").unwrap();
    let args = ConfigArgs {
        config: Some(file),
        ..ConfigArgs::default()
    };
    assert!(parse_config(&args).unwrap().rect_left.is_some());
    let args = ConfigArgs { no_rectify: true, ..args };
    let cfg = parse_config(&args).unwrap();
    assert!(cfg.rect_left.is_none() && cfg.rect_right.is_none());
    let clash = run(&["disparity", "--left", "l.png", "--right", "r.png", "--out", "d.png", "--no-rectify", "--rect-left", "a.rmap"]);
    assert_eq!(clash.status.code(), Some(1));
}

#[test]
fn flags_override_file_override_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.conf");
    fs::write(&file, "# experiment\ncost = sad\np2 = 500\nmedian_k = 3\n").unwrap();
    let args = ConfigArgs {
        config: Some(file.clone()),
        p2: Some("600".into()),
        ..ConfigArgs::default()
    };
    let cfg = parse_config(&args).unwrap();
    assert_eq!((cfg.cost, cfg.p1, cfg.p2, cfg.median_k), (CostKind::Sad, 200, 600, 3));

    fs::write(&file, "cost = census\nwindow = 7\n").unwrap();
    let args = ConfigArgs {
        config: Some(file),
        ..ConfigArgs::default()
    };
    match parse_config(&args) {
        Err(CliError::Usage(msg)) => assert!(msg.contains("window"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
    let args = ConfigArgs {
        config: Some(dir.path().join("missing.conf")),
        ..ConfigArgs::default()
    };
    assert!(matches!(parse_config(&args), Err(CliError::Io(_))));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["simulate"]).status.code(), Some(1));
    let missing = run(&["disparity", "--left", "/nonexistent/l.png", "--right", "/nonexistent/r.png", "--out", "/tmp/x.png"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error:"));
    let bad = run(&["simulate", "--scene", scene_path("empty.scene").to_str().unwrap(), "--dmax", "0"]);
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(run(&["eval-kitti", "--dir", "/nonexistent/kitti"]).status.code(), Some(2));
}

#[test]
fn disparity_command_writes_kitti_png() {
    let dir = tempfile::tempdir().unwrap();
    let (l, r) = shifted_pair(160, 96, 5);
    let (lp, rp, out) = (dir.path().join("l.png"), dir.path().join("r.pgm"), dir.path().join("d.png"));
    save_gray(&l, &lp).unwrap();
    save_gray(&r, &rp).unwrap();
    let o = run(&["disparity", "--left", lp.to_str().unwrap(), "--right", rp.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    // The resolved configuration is logged.
    assert!(String::from_utf8_lossy(&o.stderr).contains("cost=census dmax=60 p1=8 p2=32"));
    let d = load_kitti_disparity(&out).unwrap();
    let mut interior = Vec::new();
    for y in 10..86 {
        interior.extend((20..150).filter_map(|x| d.get(x, y)));
    }
    let exact = interior.iter().filter(|&&v| v == 5.0).count();
    assert!(exact * 10 >= interior.len() * 9, "{exact} of {}", interior.len());

    let color = dir.path().join("c.png");
    let o = run(&["disparity", "--left", lp.to_str().unwrap(), "--right", rp.to_str().unwrap(), "--out", color.to_str().unwrap(), "--format", "color", "--cost", "sad"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(color.exists());
}

#[test]
fn simulate_prints_command_trace() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    let report = dir.path().join("report.txt");
    let scene = scene_path("single_box.scene");
    let args = [
        "simulate",
        "--scene",
        scene.to_str().unwrap(),
        "--frames-dir",
        frames.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ];
    let a = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let text = stdout(&a);
    assert!(text.contains("goal_reached=true collision=false"));
    assert!(text.lines().any(|l| l.starts_with("t=") && l.contains(" cmd=forward v=(2.000,0.000,0.000)")));
    assert!(text.lines().any(|l| l.starts_with("t=") && !l.contains("cmd=forward") && !l.contains("phase=takeoff")));
    assert_eq!(fs::read_to_string(&report).unwrap(), text);
    assert!(fs::read_dir(&frames).unwrap().count() > 10);

    let b = run(&args);
    assert_eq!(stdout(&b), text);

    let control = run(&["simulate", "--scene", scene.to_str().unwrap(), "--no-avoid"]);
    assert!(stdout(&control).contains("collision=true"));

    let headless = stdout(&run(&["simulate", "--scene", scene.to_str().unwrap(), "--headless"]));
    let trace: Vec<&str> = text.lines().filter(|l| l.starts_with("t=")).collect();
    assert_eq!(headless.lines().count(), trace.len());
    for (h, full) in headless.lines().zip(trace) {
        assert!(full.starts_with(h), "{h} / {full}");
        assert!(h.split(' ').count() == 3 && h.contains(" v=("));
    }
}

#[test]
fn detect_reports_obstacle_and_escape() {
    let dir = tempfile::tempdir().unwrap();
    let scene: Scene = "ground 0\ngoal 30 0 1\nbox 5 0.6 1 2 2 2\n".parse().unwrap();
    let (l, r) = render_stereo_pair(&scene, Vec3::new(0.0, 0.0, 1.0), &sim_calibration(), 256, 160, 3).unwrap();
    // Untextured sky streaks without a little sensor noise.
    let (l, r) = (add_sensor_noise(&l, 2.0, 11).unwrap(), add_sensor_noise(&r, 2.0, 12).unwrap());
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let (lp, rp, ann, um, vm) = (p("l.png"), p("r.png"), p("a.png"), p("u.png"), p("v.png"));
    save_gray(&l, &lp).unwrap();
    save_gray(&r, &rp).unwrap();
    let o = run(&["detect", "--left", &lp, "--right", &rp, "--annotate-out", &ann, "--umap-out", &um, "--vmap-out", &vm]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("obstacle d=")), "{text}");
    // The box sits left of centre, so the shortest way out is to the right.
    assert!(text.contains("cmd=right"), "{text}");
    for f in [&ann, &um, &vm] {
        assert!(Path::new(f).exists());
    }
    let u = load_gray(&um).unwrap();
    assert_eq!((u.width(), u.height()), (256, 60));

    // A saved disparity map gives the same obstacle list.
    let disp = p("d.png");
    assert_eq!(run(&["disparity", "--left", &lp, "--right", &rp, "--out", &disp]).status.code(), Some(0));
    let again = run(&["detect", "--disparity", &disp]);
    assert_eq!(stdout(&again), text);
}

/// A two-frame dataset in the KITTI training layout, plus one frame with a
/// missing right image.
fn fake_kitti(root: &Path) {
    for sub in ["image_2", "image_3", "disp_noc_0"] {
        fs::create_dir_all(root.join(sub)).unwrap();
    }
    for (i, k) in [(0, 4usize), (1, 9)] {
        let id = format!("{i:06}_10.png");
        let (l, r) = shifted_pair(660, 370, k);
        save_gray(&l, root.join("image_2").join(&id)).unwrap();
        save_gray(&r, root.join("image_3").join(&id)).unwrap();
        let gt = DisparityMap::from_disparities(660, 370, &vec![k as u16; 660 * 370]).unwrap();
        write_disparity(&gt, root.join("disp_noc_0").join(&id), DisparityFormat::Raw16).unwrap();
    }
    let (l, _) = shifted_pair(660, 370, 1);
    save_gray(&l, root.join("image_2/000002_10.png")).unwrap();
    let gt = DisparityMap::from_disparities(660, 370, &vec![1u16; 660 * 370]).unwrap();
    write_disparity(&gt, root.join("disp_noc_0/000002_10.png"), DisparityFormat::Raw16).unwrap();
}

#[test]
fn eval_kitti_writes_text_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    fake_kitti(dir.path());
    let report = dir.path().join("kitti.txt");
    let o = run(&["eval-kitti", "--dir", dir.path().to_str().unwrap(), "--both", "--report", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&report).unwrap();
    assert_eq!(text, stdout(&o));
    assert!(text.contains("# cost=census") && text.contains("# cost=sad"));
    assert!(text.contains("000002_10    skipped:"));
    let csv = fs::read_to_string(dir.path().join("kitti.csv")).unwrap();
    assert!(csv.starts_with("cost,frame,density,correct,evaluated_pixels,gt_pixels\n"));
    let census_row = csv.lines().find(|l| l.starts_with("census,000000_10,")).unwrap();
    let correct: f64 = census_row.split(',').nth(3).unwrap().parse().unwrap();
    assert!(correct > 0.95, "{census_row}");
}
