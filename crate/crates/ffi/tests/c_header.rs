use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "multisecretary.h"

int main(void) {
    MsModel *m = NULL;
    if (ms_model_parse("fbeta:beta=1", &m) != MS_STATUS_OK) return 10;
    double u[6] = {0.9, 0.2, 0.7, 0.4, 0.95, 0.1};
    MsTrace *t = NULL;
    if (ms_policy_run(m, MS_POLICY_CWG, u, 6, 2, &t) != MS_STATUS_OK) return 11;
    double value = -1.0, offline = -1.0;
    if (ms_trace_value(t, &value) != MS_STATUS_OK) return 12;
    if (ms_offline_value(m, u, 6, 2, &offline, NULL, NULL) != MS_STATUS_OK) return 13;
    if (value > offline + 1e-12) return 14;
    MsStatus bad = ms_model_quantile(m, -1.0, &value);
    if (bad != MS_STATUS_DOMAIN || ms_last_error_message() == NULL) return 15;
    printf("%zu %.6f\n", ms_trace_horizon(t), offline);
    ms_trace_free(t);
    ms_model_free(m);
    return 0;
}
"#;

fn artifact_dir() -> PathBuf {
    // <target>/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_static_library() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("multisecretary.h").exists());
    let lib_dir = artifact_dir();
    assert!(lib_dir.join("libmultisecretary_ffi.a").exists(), "{}", lib_dir.display());

    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = work.path().join("main");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let out = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(lib_dir.join("libmultisecretary_ffi.a"))
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .output()
        .expect("C compiler available");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let run = Command::new(&exe).output().unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let text = String::from_utf8(run.stdout).unwrap();
    assert!(text.starts_with("6 "), "{text}");
}
