use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "sharedrbf.h"

int main(int argc, char **argv) {
    SrbfDataset *ds = NULL;
    if (srbf_dataset_load(argv[1], NULL, 0, NULL, 0, &ds) != SRBF_STATUS_OK) {
        fprintf(stderr, "load: %s\n", srbf_last_error_message());
        return 1;
    }
    SrbfFitOptions o = srbf_fit_options_default();
    o.n_iter = 300;
    o.n_burn = 150;
    o.n_fixed_gamma = 50;
    SrbfChain *chain = NULL;
    if (srbf_fit(ds, &o, &chain) != SRBF_STATUS_OK) {
        fprintf(stderr, "fit: %s\n", srbf_last_error_message());
        return 1;
    }
    double x[5] = {0.5, 0.5, 0.5, 0.5, 0.5};
    double m, lo, hi;
    if (srbf_predict_cate(chain, x, 1, 5, 2, 1, &m, &lo, &hi) != SRBF_STATUS_OK) return 1;
    if (!(lo <= m && m <= hi)) return 2;
    if (srbf_predict_cate(chain, x, 1, 5, 9, 1, &m, NULL, NULL) != SRBF_STATUS_INVALID_ARGUMENT) return 3;
    printf("%s %f\n", srbf_version(), m);
    srbf_chain_free(chain);
    srbf_dataset_free(ds);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let Some(lib) = [profile_dir.join("deps"), profile_dir]
        .iter()
        .map(|d| d.join("libsharedrbf_ffi.a"))
        .find(|p| p.exists())
    else {
        eprintln!("static library not found; skipped");
        return;
    };
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("cc unavailable; skipped");
        return;
    }
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "compile/link failed");
    let out = Command::new(&bin).arg(crate_dir.join("../../data/tiny.csv")).output().unwrap();
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with(env!("CARGO_PKG_VERSION")));
}
