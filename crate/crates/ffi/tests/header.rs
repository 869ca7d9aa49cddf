//! Compiles a C program against the generated header, then links it to the
//! static library and runs it.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "assemblies.h"

int main(void) {
    AsmModel *model = NULL;
    if (asm_model_new(1000, 100, 0.1, 0.1, 7, 0, &model) != ASM_STATUS_OK) return 10;
    static double samples[2 * 5 * 1000];
    for (int c = 0; c < 2; c++)
        for (int s = 0; s < 5; s++)
            for (int i = 0; i < 100; i++) samples[(c * 5 + s) * 1000 + c * 500 + i] = 1.0;
    if (asm_model_train(model, samples, 2 * 5 * 1000, 2, 5, true) != ASM_STATUS_OK) return 11;
    uint32_t core[100];
    if (asm_model_assembly(model, 0, core, 100) != ASM_STATUS_OK) return 12;
    double x[1000] = {0};
    for (int i = 0; i < 100; i++) x[500 + i] = 1.0;
    size_t label = 99;
    if (asm_model_classify(model, x, 1000, &label, NULL, 0) != ASM_STATUS_OK) return 13;
    asm_model_free(model);
    if (asm_model_new(10, 20, 0.1, 0.1, 0, 0, &model) != ASM_STATUS_CONFIG) return 14;
    AsmBoundInputs in = {1000, 100, 0.1, 0.9, 0.1, 0.0, NAN, 1.0, 1.0};
    AsmBounds out;
    if (asm_bounds(&in, &out) != ASM_STATUS_OK) return 15;
    printf("label=%zu beta0=%.4f\n", label, out.beta0);
    return label == 1 ? 0 : 16;
}
"#;

fn include_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

fn compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"].into_iter().find(|c| {
        Command::new(c)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
    })
}

/// The static library in this test binary's profile directory, built on
/// demand because `cargo test` only produces the rlib.
fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let lib = profile_dir.join("libassemblies_ffi.a");
    if !lib.exists() {
        let cargo = std::env::var_os("CARGO")?;
        let target_dir = profile_dir.parent()?;
        let mut build = Command::new(cargo);
        build
            .args(["build", "--lib", "-p", "assemblies-ffi", "--target-dir"])
            .arg(target_dir);
        if profile_dir.file_name()? == "release" {
            build.arg("--release");
        }
        let status = build.status().ok()?;
        assert!(status.success(), "building the static library failed");
    }
    lib.exists().then_some(lib)
}

#[test]
fn header_is_valid_c_and_cpp() {
    let header = include_dir().join("assemblies.h");
    assert!(
        header.exists(),
        "build script did not write {}",
        header.display()
    );
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    for lang in ["c", "c++"] {
        let status = Command::new(cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .status()
            .unwrap();
        assert!(status.success(), "header fails to compile as {lang}");
    }
}

#[test]
fn c_program_links_and_runs() {
    let (Some(cc), Some(lib)) = (compiler(), static_lib()) else {
        eprintln!("no C compiler or static library; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(cc)
        .arg("-I")
        .arg(include_dir())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "linking against {} failed", lib.display());
    let output = Command::new(&exe).output().unwrap();
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(
        output.status.success(),
        "exit {:?}, stdout {stdout}",
        output.status.code()
    );
    assert!(stdout.contains("label=1 beta0=0.8713"), "{stdout}");
}
