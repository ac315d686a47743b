use std::ffi::{CStr, CString};
use std::ptr;

use stratlearn::datagen::{fill_reward_table, generate_dataset, DatagenConfig};
use stratlearn::families::{build_fuel_cell_family, FuelCellParams};
use stratlearn::inference::{fast_solve, predict_rewards, DEFAULT_EPS};
use stratlearn::io::{save_library, save_model, serialize_mps};
use stratlearn::learner::{train, TrainConfig, TrainingSet};
use stratlearn::milp::{solve_milp, BnbConfig};
use stratlearn::pruning::{build_bipartite, greedy_set_cover};
use stratlearn_ffi::*;

struct Fixture {
    _dir: tempfile::TempDir,
    model: CString,
    library: CString,
    mps: Vec<CString>,
    expected: Vec<(f64, usize)>,
    predictions: Vec<(Vec<f64>, Vec<f64>)>,
}

fn fixture() -> Fixture {
    let fam = build_fuel_cell_family(&FuelCellParams::default(), 0.25).unwrap();
    let mut ds = generate_dataset(&fam, &DatagenConfig { min_n: 40, max_n: 40, ..Default::default() }).unwrap();
    fill_reward_table(&mut ds, None, None).unwrap();
    let g = build_bipartite(&ds, 1e-4, 1e-4).unwrap();
    let lib = greedy_set_cover(&g, &ds.library).unwrap();
    let set = TrainingSet::from_dataset(&ds, &lib).unwrap();
    let (model, _) = train(&set, &TrainConfig { epochs: 3, ..Default::default() }).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("model.json");
    let lib_path = dir.path().join("library.json");
    save_model(&model_path, &model).unwrap();
    save_library(&lib_path, &fam.varying, &lib).unwrap();

    let k = 2.min(lib.len());
    let mut mps = Vec::new();
    let mut expected = Vec::new();
    let mut predictions = Vec::new();
    for i in 0..3 {
        let inst = ds.instance(i);
        let theta = ds.records[i].theta.clone();
        let sel = fast_solve(&model, &inst, &theta, &lib, k, None, DEFAULT_EPS).unwrap();
        expected.push((sel.solution.objective, sel.index));
        predictions.push((theta.clone(), predict_rewards(&model, &theta, &lib)));
        mps.push(CString::new(serialize_mps(&inst)).unwrap());
    }
    Fixture {
        model: CString::new(model_path.to_str().unwrap()).unwrap(),
        library: CString::new(lib_path.to_str().unwrap()).unwrap(),
        _dir: dir,
        mps,
        expected,
        predictions,
    }
}

fn last_error() -> String {
    let p = sl_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn handles_match_the_rust_api() {
    let fx = fixture();
    unsafe {
        let mut model = ptr::null_mut();
        let mut lib = ptr::null_mut();
        assert_eq!(sl_model_load(fx.model.as_ptr(), &mut model), SlStatus::Ok);
        assert_eq!(sl_library_load(fx.library.as_ptr(), &mut lib), SlStatus::Ok);
        let mut len = 0usize;
        assert_eq!(sl_library_len(lib, &mut len), SlStatus::Ok);
        let k = 2.min(len);

        for (theta, pred) in &fx.predictions {
            let mut scores = vec![0.0; len];
            assert_eq!(sl_predict(model, lib, theta.as_ptr(), theta.len(), scores.as_mut_ptr(), len), SlStatus::Ok);
            assert_eq!(&scores, pred);
        }

        for (text, &(objective, index)) in fx.mps.iter().zip(&fx.expected) {
            let mut inst = ptr::null_mut();
            assert_eq!(sl_instance_from_mps(text.as_ptr(), &mut inst), SlStatus::Ok);
            let (mut n, mut m) = (0usize, 0usize);
            assert_eq!(sl_instance_dims(inst, &mut n, &mut m), SlStatus::Ok);
            let mut x = vec![0.0; n];
            let mut res = SlSolveResult::default();
            assert_eq!(sl_fast_solve(model, lib, inst, k, &mut res, x.as_mut_ptr(), n), SlStatus::Ok);
            assert_eq!(res.strategy_index, index);
            assert!((res.objective - objective).abs() <= 1e-9 * (1.0 + objective.abs()));

            let mut full = 0.0;
            assert_eq!(sl_solve_full(inst, &mut full, ptr::null_mut(), 0), SlStatus::Ok);
            let reference = solve_milp(&stratlearn::io::parse_mps(text.to_str().unwrap()).unwrap(), &BnbConfig::default());
            assert_eq!(full, reference.objective);
            sl_instance_free(inst);
        }
        sl_model_free(model);
        sl_library_free(lib);
    }
}

#[test]
fn errors_set_codes_and_messages() {
    let fx = fixture();
    unsafe {
        let mut inst = ptr::null_mut();
        let bad = CString::new("NAME X\nROWS\n N obj\nCOLUMNS\n x obj 1 nosuchrow 2\nENDATA\n").unwrap();
        assert_eq!(sl_instance_from_mps(bad.as_ptr(), &mut inst), SlStatus::Parse);
        assert!(last_error().contains("line 5"));
        assert!(inst.is_null());

        assert_eq!(sl_instance_from_mps(ptr::null(), &mut inst), SlStatus::NullPointer);
        assert!(last_error().contains("text"));

        let mut model = ptr::null_mut();
        let missing = CString::new("/nonexistent/model.json").unwrap();
        assert_eq!(sl_model_load(missing.as_ptr(), &mut model), SlStatus::Io);
        assert!(model.is_null());
        assert_eq!(sl_model_load(fx.library.as_ptr(), &mut model), SlStatus::Parse);

        let mut lib = ptr::null_mut();
        assert_eq!(sl_model_load(fx.model.as_ptr(), &mut model), SlStatus::Ok);
        assert!(sl_last_error_message().is_null());
        assert_eq!(sl_library_load(fx.library.as_ptr(), &mut lib), SlStatus::Ok);
        let mut len = 0usize;
        sl_library_len(lib, &mut len);

        let theta = [0.0; 1];
        let mut scores = vec![0.0; len];
        assert_eq!(sl_predict(model, lib, theta.as_ptr(), 1, scores.as_mut_ptr(), len), SlStatus::InvalidArgument);
        assert!(last_error().contains("theta"));
        let theta = &fx.predictions[0].0;
        assert_eq!(sl_predict(model, lib, theta.as_ptr(), theta.len(), scores.as_mut_ptr(), len - 1), SlStatus::InvalidArgument);

        assert_eq!(sl_instance_from_mps(fx.mps[0].as_ptr(), &mut inst), SlStatus::Ok);
        let mut res = SlSolveResult::default();
        assert_eq!(sl_fast_solve(model, lib, inst, 0, &mut res, ptr::null_mut(), 0), SlStatus::InvalidArgument);
        assert_eq!(sl_fast_solve(model, lib, inst, len + 1, &mut res, ptr::null_mut(), 0), SlStatus::InvalidArgument);
        assert_eq!(sl_fast_solve(ptr::null(), lib, inst, 1, &mut res, ptr::null_mut(), 0), SlStatus::NullPointer);

        sl_instance_free(inst);
        sl_model_free(model);
        sl_library_free(lib);
        sl_instance_free(ptr::null_mut());
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(sl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
