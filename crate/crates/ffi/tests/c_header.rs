//! Compiles and runs a C program against the generated header and the
//! static library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "deconv.h"

int main(void) {
    DeconvKernel *k = NULL;
    if (deconv_kernel_builtin("exp_decay", 0.0, 0.0, &k) != DECONV_STATUS_OK) return 1;
    DeconvEstimator *e = NULL;
    if (deconv_estimator_new(k, 0.5, 0.1, &e) != DECONV_STATUS_OK) return 2;
    double out[2];
    size_t count = 0, total = 0;
    double xs[3] = {0.0, 0.1, 0.3};
    for (int i = 0; i < 3; i++) {
        if (deconv_estimator_push(e, xs[i], out, &count) != DECONV_STATUS_OK) return 3;
        total += count;
    }
    if (total != 3) return 4;
    if (deconv_kernel_builtin("bogus", 0.0, 0.0, &k) != DECONV_STATUS_INVALID_ARGUMENT) return 5;
    if (deconv_last_error() == NULL) return 6;
    deconv_estimator_free(e);
    printf("ok\n");
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libdeconv_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("main.c");
    let bin = tmp.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler named cc");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "ok\n");
}
